//! Shared raster containers: 8-bit RGB images and float-valued maps.

use crate::error::AvsError;

/// One RGB pixel, channels in [0, 255].
pub type Rgb = [u8; 3];

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `pixels[y * width + x]`.
    pub pixels: Vec<Rgb>,
}

impl RgbImage {
    /// Solid-color image.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![color; width * height],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }
}

/// Row-major scalar raster of `f64` values (channel planes, saliency, depth).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    pub width: usize,
    pub height: usize,
    /// `data[y * width + x]`.
    pub data: Vec<f64>,
}

impl GrayMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        GrayMap {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        GrayMap {
            width,
            height,
            data: vec![v; width * height],
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Largest value, or 0 for an empty map.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0)
    }

    /// Checks that `other` has identical dimensions.
    pub fn same_shape(&self, other: &GrayMap) -> Result<(), AvsError> {
        if self.width != other.width || self.height != other.height {
            return Err(AvsError::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Three-plane float image (C1C2C3 or scaled RGB), each plane row-major in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneImage {
    pub width: usize,
    pub height: usize,
    pub planes: [Vec<f64>; 3],
}

impl PlaneImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        let n = width * height;
        PlaneImage {
            width,
            height,
            planes: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
