use serde::{Deserialize, Serialize};

/// Row-major real-valued image; `pixels[x + width * y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[x + self.width * y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[x + self.width * y] = v;
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.pixels.iter().sum()
    }

    /// `(x, y)` of the first maximal pixel in raster order.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.pixels.iter().enumerate() {
            if v > self.pixels[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn add_assign(&mut self, other: &Image) {
        for (a, b) in self.pixels.iter_mut().zip(&other.pixels) {
            *a += b;
        }
    }

    /// Copies `tile` into this image with its top-left corner at `(x0, y0)`.
    pub fn blit(&mut self, tile: &Image, x0: usize, y0: usize) {
        for y in 0..tile.height {
            let dst = x0 + self.width * (y0 + y);
            self.pixels[dst..dst + tile.width].copy_from_slice(&tile.pixels[tile.width * y..tile.width * (y + 1)]);
        }
    }
}

/// Row-major binary image with values 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[x + self.width * y] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[x + self.width * y] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn union_assign(&mut self, other: &Mask) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a |= b;
        }
    }

    pub fn blit(&mut self, tile: &Mask, x0: usize, y0: usize) {
        for y in 0..tile.height {
            let dst = x0 + self.width * (y0 + y);
            self.data[dst..dst + tile.width].copy_from_slice(&tile.data[tile.width * y..tile.width * (y + 1)]);
        }
    }
}

/// Slices of one field of view at several focal offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub width: usize,
    pub height: usize,
    pub pixel_size_nm: f64,
    pub z_offsets_nm: Vec<f64>,
    pub slices: Vec<Image>,
    /// Slices hold integer Poisson counts.
    pub noisy: bool,
    pub seed: Option<u64>,
}

impl ImageStack {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.slices.iter().map(Image::max).fold(0.0, f64::max)
    }
}

/// Field of view: pixel `i` spans `[x0 + i*px, x0 + (i+1)*px)` with
/// `x0 = center_x - width*px/2`, likewise in y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOfView {
    pub width: usize,
    pub height: usize,
    pub center_nm: [f64; 2],
}

impl FieldOfView {
    pub fn new(width: usize, height: usize, center_nm: [f64; 2]) -> Self {
        Self {
            width,
            height,
            center_nm,
        }
    }

    pub fn origin(&self, pixel_size: f64) -> [f64; 2] {
        [
            self.center_nm[0] - self.width as f64 * pixel_size / 2.0,
            self.center_nm[1] - self.height as f64 * pixel_size / 2.0,
        ]
    }

    pub fn pixel_center(&self, pixel_size: f64, x: usize, y: usize) -> [f64; 2] {
        let o = self.origin(pixel_size);
        [o[0] + (x as f64 + 0.5) * pixel_size, o[1] + (y as f64 + 0.5) * pixel_size]
    }
}
