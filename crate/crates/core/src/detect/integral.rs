use image::GrayImage;

/// Summed-area tables of pixel values and squared pixel values.
///
/// Both tables are `(H+1)×(W+1)` with a zero first row and column, so
/// `sums[y][x]` is the sum of all pixels strictly above and left of `(x, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<u64>,
    squared_sums: Vec<u64>,
}

impl IntegralImage {
    /// Builds the tables from row-major 8-bit pixels.
    ///
    /// # Panics
    /// If `pixels.len() != width * height`.
    pub fn from_pixels(width: usize, height: usize, pixels: &[u8]) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
        let stride = width + 1;
        let mut sums = vec![0u64; stride * (height + 1)];
        let mut squared_sums = vec![0u64; stride * (height + 1)];
        for y in 0..height {
            let (mut row, mut row_sq) = (0u64, 0u64);
            for x in 0..width {
                let p = pixels[y * width + x] as u64;
                row += p;
                row_sq += p * p;
                let i = (y + 1) * stride + x + 1;
                sums[i] = sums[i - stride] + row;
                squared_sums[i] = squared_sums[i - stride] + row_sq;
            }
        }
        Self {
            width,
            height,
            sums,
            squared_sums,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Table entry `S[y][x]`, for `x <= width`, `y <= height`.
    pub fn sum_at(&self, x: usize, y: usize) -> u64 {
        self.sums[y * (self.width + 1) + x]
    }

    pub fn squared_sum_at(&self, x: usize, y: usize) -> u64 {
        self.squared_sums[y * (self.width + 1) + x]
    }

    fn corners(table: &[u64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let at = |xx: usize, yy: usize| table[yy * stride + xx];
        at(x + w, y + h) + at(x, y) - at(x + w, y) - at(x, y + h)
    }

    fn check(&self, x: usize, y: usize, w: usize, h: usize) {
        assert!(
            x + w <= self.width && y + h <= self.height,
            "rectangle ({x}, {y}, {w}, {h}) outside {}x{} image",
            self.width,
            self.height
        );
    }

    /// Sum of pixels in the rectangle at `(x, y)` of size `w×h`.
    ///
    /// # Panics
    /// If the rectangle extends past the image.
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        self.check(x, y, w, h);
        Self::corners(&self.sums, self.width + 1, x, y, w, h)
    }

    /// Sum of squared pixels in the rectangle; same contract as [`Self::rect_sum`].
    pub fn rect_squared_sum(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        self.check(x, y, w, h);
        Self::corners(&self.squared_sums, self.width + 1, x, y, w, h)
    }
}

pub fn integral_image(gray: &GrayImage) -> IntegralImage {
    IntegralImage::from_pixels(gray.width() as usize, gray.height() as usize, gray.as_raw())
}
