//! Dense RGB image container and the separable linear resampling operator
//! shared by the resize augmentation and the fuse operator.

use crate::error::{Error, Result};

/// `height x width x 3` grid of channel intensities, row-major with
/// interleaved channels. Values are nominally in `[0, 1]`; intermediate
/// results may leave that range and are only clamped at I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        Self {
            height,
            width,
            data: vec![value; height * width * 3],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParams(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width * 3 {
            return Err(Error::mismatch("image buffer", height * width * 3, data.len()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut img = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..3 {
                    img.data[(r * width + c) * 3 + ch] = f(r, c, ch);
                }
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn idx(&self, r: usize, c: usize, ch: usize) -> usize {
        (r * self.width + c) * 3 + ch
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.data[self.idx(r, c, ch)]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, ch: usize, v: f64) {
        let i = self.idx(r, c, ch);
        self.data[i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn clamped(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn same_dims(&self, other: &ImageGrid, context: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::mismatch(
                context,
                format!("{}x{}", self.height, self.width),
                format!("{}x{}", other.height, other.width),
            ));
        }
        Ok(())
    }

    pub fn dot(&self, other: &ImageGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn add_scaled(&mut self, other: &ImageGrid, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn max_abs_diff(&self, other: &ImageGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copy of the `h x w` window whose top-left corner is `(top, left)`.
    pub fn window(&self, top: usize, left: usize, h: usize, w: usize) -> ImageGrid {
        assert!(top + h <= self.height && left + w <= self.width);
        let mut out = ImageGrid::zeros(h, w);
        for r in 0..h {
            let src = self.idx(top + r, left, 0);
            let dst = out.idx(r, 0, 0);
            out.data[dst..dst + w * 3].copy_from_slice(&self.data[src..src + w * 3]);
        }
        out
    }

    /// Overwrites the window at `(top, left)` with `patch`.
    pub fn paste(&mut self, patch: &ImageGrid, top: usize, left: usize) {
        assert!(top + patch.height <= self.height && left + patch.width <= self.width);
        for r in 0..patch.height {
            let dst = self.idx(top + r, left, 0);
            let src = patch.idx(r, 0, 0);
            self.data[dst..dst + patch.width * 3].copy_from_slice(&patch.data[src..src + patch.width * 3]);
        }
    }
}

/// One-dimensional linear resampling: output sample `i` is
/// `sum_t weight_t * input[index_t]` over at most two taps. Out-of-range
/// taps are dropped, which is zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Resample1d {
    input_len: usize,
    taps: Vec<Vec<(usize, f64)>>,
}

impl Resample1d {
    /// Bilinear taps for sampling `input_len` samples at the given source
    /// coordinates (pixel centres at integers). Coordinates further than one
    /// pixel outside `[0, input_len - 1]` produce no taps.
    pub fn from_coords(input_len: usize, coords: impl IntoIterator<Item = f64>) -> Self {
        let taps = coords
            .into_iter()
            .map(|x| {
                let x0 = x.floor();
                let frac = x - x0;
                let mut t = Vec::with_capacity(2);
                for (pos, w) in [(x0, 1.0 - frac), (x0 + 1.0, frac)] {
                    if w != 0.0 && pos >= 0.0 && pos < input_len as f64 {
                        t.push((pos as usize, w));
                    }
                }
                t
            })
            .collect();
        Self { input_len, taps }
    }

    /// Area-aligned scaling from `input_len` to `output_len` samples
    /// (half-pixel centre convention, edge-clamped). Equal lengths give the
    /// identity.
    pub fn scale_to(input_len: usize, output_len: usize) -> Self {
        let ratio = input_len as f64 / output_len as f64;
        let max = (input_len - 1) as f64;
        Self::from_coords(
            input_len,
            (0..output_len).map(|i| ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, max)),
        )
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_identity(&self) -> bool {
        self.input_len == self.taps.len()
            && self
                .taps
                .iter()
                .enumerate()
                .all(|(i, t)| t.len() == 1 && t[0] == (i, 1.0))
    }
}

/// Separable 2-D resampling built from one row operator and one column
/// operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Resample2d {
    pub rows: Resample1d,
    pub cols: Resample1d,
}

impl Resample2d {
    pub fn scale_to(src: (usize, usize), dst: (usize, usize)) -> Self {
        Self {
            rows: Resample1d::scale_to(src.0, dst.0),
            cols: Resample1d::scale_to(src.1, dst.1),
        }
    }

    pub fn apply(&self, img: &ImageGrid) -> ImageGrid {
        debug_assert_eq!(img.dims(), (self.rows.input_len, self.cols.input_len));
        let (oh, ow) = (self.rows.output_len(), self.cols.output_len());
        // columns first into an (in_h x ow) buffer
        let ih = img.height();
        let mut tmp = vec![0.0; ih * ow * 3];
        for r in 0..ih {
            for (oc, taps) in self.cols.taps.iter().enumerate() {
                for ch in 0..3 {
                    let mut acc = 0.0;
                    for &(c, w) in taps {
                        acc += w * img.get(r, c, ch);
                    }
                    tmp[(r * ow + oc) * 3 + ch] = acc;
                }
            }
        }
        let mut out = ImageGrid::zeros(oh, ow);
        for (or, taps) in self.rows.taps.iter().enumerate() {
            for oc in 0..ow {
                for ch in 0..3 {
                    let mut acc = 0.0;
                    for &(r, w) in taps {
                        acc += w * tmp[(r * ow + oc) * 3 + ch];
                    }
                    out.set(or, oc, ch, acc);
                }
            }
        }
        out
    }

    /// Transpose of [`Self::apply`].
    pub fn transpose_apply(&self, cot: &ImageGrid) -> ImageGrid {
        let (ih, iw) = (self.rows.input_len, self.cols.input_len);
        let ow = self.cols.output_len();
        let mut tmp = vec![0.0; ih * ow * 3];
        for (or, taps) in self.rows.taps.iter().enumerate() {
            for oc in 0..ow {
                for ch in 0..3 {
                    let g = cot.get(or, oc, ch);
                    for &(r, w) in taps {
                        tmp[(r * ow + oc) * 3 + ch] += w * g;
                    }
                }
            }
        }
        let mut out = ImageGrid::zeros(ih, iw);
        for r in 0..ih {
            for (oc, taps) in self.cols.taps.iter().enumerate() {
                for ch in 0..3 {
                    let g = tmp[(r * ow + oc) * 3 + ch];
                    for &(c, w) in taps {
                        let i = out.idx(r, c, ch);
                        out.as_mut_slice()[i] += w * g;
                    }
                }
            }
        }
        out
    }
}
