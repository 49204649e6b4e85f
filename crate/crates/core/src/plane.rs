//! Single-channel float image with the handful of resampling and filtering
//! operations the pipeline needs.

/// Row-major single-channel image of `f32` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl Plane {
    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width as usize) * (height as usize)],
        }
    }

    /// Build from a row-major buffer. Panics if the length does not match.
    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Self {
        assert_eq!(
            data.len(),
            (width as usize) * (height as usize),
            "plane buffer length must be width*height"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> f32) -> Self {
        let mut data = Vec::with_capacity((width as usize) * (height as usize));
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: f32) {
        self.data[(y as usize) * (self.width as usize) + x as usize] = value;
    }

    pub fn in_bounds(&self, x: u32, y: u32) -> bool {
        x < self.width && y < self.height
    }

    /// Mirror along the vertical axis (left-right).
    pub fn flip_horizontal(&self) -> Plane {
        let mut out = self.clone();
        let w = self.width as usize;
        for row in out.data.chunks_mut(w) {
            row.reverse();
        }
        out
    }

    /// Non-overlapping `factor`×`factor` block averaging. Trailing rows and
    /// columns that do not fill a whole block are dropped.
    pub fn avg_pool(&self, factor: u32) -> Plane {
        assert!(factor >= 1, "pool factor must be >= 1");
        if factor == 1 {
            return self.clone();
        }
        let out_w = self.width / factor;
        let out_h = self.height / factor;
        let norm = 1.0 / ((factor as f64) * (factor as f64));
        Plane::from_fn(out_w, out_h, |x, y| {
            let mut acc = 0.0f64;
            for dy in 0..factor {
                for dx in 0..factor {
                    acc += self.get(x * factor + dx, y * factor + dy) as f64;
                }
            }
            (acc * norm) as f32
        })
    }

    /// Separable Gaussian blur with kernel radius `ceil(3*sigma)` and
    /// clamp-to-edge boundary handling. `sigma <= 0` is a no-op.
    pub fn gaussian_blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil().max(1.0) as i64;
        let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
        let denom = 2.0 * sigma * sigma;
        for i in -radius..=radius {
            kernel.push((-((i * i) as f64) / denom).exp());
        }
        let total: f64 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= total;
        }

        let w = self.width as i64;
        let h = self.height as i64;
        // Horizontal pass.
        let mut tmp = self.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0f64;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = (x + ki as i64 - radius).clamp(0, w - 1);
                    acc += k * self.get(sx as u32, y as u32) as f64;
                }
                tmp.set(x as u32, y as u32, acc as f32);
            }
        }
        // Vertical pass.
        let mut out = tmp.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0f64;
                for (ki, k) in kernel.iter().enumerate() {
                    let sy = (y + ki as i64 - radius).clamp(0, h - 1);
                    acc += k * tmp.get(x as u32, sy as u32) as f64;
                }
                out.set(x as u32, y as u32, acc as f32);
            }
        }
        out
    }
}
