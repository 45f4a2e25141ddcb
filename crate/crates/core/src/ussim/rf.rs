use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// One beamformed RF image on a polar grid, shape `[h, w]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RfImage {
    pub data: Tensor<f64>,
}

impl RfImage {
    pub fn new(data: Tensor<f64>) -> Result<Self> {
        if data.ndim() != 2 {
            return Err(Error::shape(format!("RF image must be 2-D, got {:?}", data.dims())));
        }
        Ok(Self { data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            data: Tensor::zeros(&[h, w]).expect("non-empty"),
        }
    }

    pub fn height(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn width(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data.data()[row * self.width() + col]
    }

    /// `[1, 1, h, w]` network-ready tensor.
    pub fn to_batch<T: Element>(&self) -> Tensor<T> {
        let (h, w) = (self.height(), self.width());
        self.data.cast::<T>().reshape(&[1, 1, h, w]).expect("same length")
    }

    pub fn from_batch<T: Element>(t: &Tensor<T>) -> Result<Self> {
        let [n, c, h, w] = t.dims4()?;
        if n != 1 || c != 1 {
            return Err(Error::shape(format!("expected a single-channel image, got {:?}", t.dims())));
        }
        Self::new(t.cast::<f64>().reshape(&[h, w])?)
    }
}

/// Stack of per-transmit RF images, shape `[m, h, w]`, with their steering angles.
#[derive(Clone, Debug, PartialEq)]
pub struct RfStack {
    pub data: Tensor<f64>,
    pub angles: Vec<f64>,
}

impl RfStack {
    pub fn new(data: Tensor<f64>, angles: Vec<f64>) -> Result<Self> {
        if data.ndim() != 3 {
            return Err(Error::shape(format!("RF stack must be 3-D, got {:?}", data.dims())));
        }
        if data.dims()[0] != angles.len() {
            return Err(Error::shape(format!(
                "RF stack holds {} images but {} angles",
                data.dims()[0],
                angles.len()
            )));
        }
        Ok(Self { data, angles })
    }

    pub fn from_images(images: &[RfImage], angles: Vec<f64>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero images"))?;
        let (h, w) = (first.height(), first.width());
        let mut data = Vec::with_capacity(images.len() * h * w);
        for im in images {
            im.data.ensure_same_dims(&first.data, "stacked RF image")?;
            data.extend_from_slice(im.data.data());
        }
        Self::new(Tensor::from_vec(&[images.len(), h, w], data)?, angles)
    }

    pub fn count(&self) -> usize {
        self.data.dims()[0]
    }

    pub fn height(&self) -> usize {
        self.data.dims()[1]
    }

    pub fn width(&self) -> usize {
        self.data.dims()[2]
    }

    pub fn plane(&self, i: usize) -> &[f64] {
        let n = self.height() * self.width();
        &self.data.data()[i * n..(i + 1) * n]
    }

    pub fn image(&self, i: usize) -> RfImage {
        RfImage {
            data: Tensor::from_vec(&[self.height(), self.width()], self.plane(i).to_vec()).expect("plane"),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.count()) {
            return Err(Error::invalid(format!("transmit {bad} out of range for {} images", self.count())));
        }
        let images: Vec<_> = indices.iter().map(|&i| self.image(i)).collect();
        Self::from_images(&images, indices.iter().map(|&i| self.angles[i]).collect())
    }

    /// `[1, m, h, w]` network-ready tensor.
    pub fn to_batch<T: Element>(&self) -> Tensor<T> {
        let d = self.data.dims().to_vec();
        self.data.cast::<T>().reshape(&[1, d[0], d[1], d[2]]).expect("same length")
    }
}
