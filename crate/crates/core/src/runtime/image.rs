use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::state::{filter_signal, Priming, Realization};
use crate::design::{FilterCoefficients, LdeCoefficients};
use crate::{Error, Result};

/// A real-valued raster, row-major. Intensity images loaded from disk are
/// normalized to `[0, 1]`; derived planes (gradients, products) may take any
/// real value.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn<F: Fn(usize, usize) -> f64>(width: usize, height: usize, f: F) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Elementwise combination of two equally sized images.
    pub fn zip_map<F: Fn(f64, f64) -> f64>(&self, other: &Image, f: F) -> Result<Image> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let pixels = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Image {
            width: self.width,
            height: self.height,
            pixels,
        })
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&v| f(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Filter along each row (the x direction).
    Rows,
    /// Filter along each column (the y direction).
    Cols,
}

/// Applies a 1-D filter to every row or every column.
pub fn filter_image_separable(
    filter: &FilterCoefficients,
    img: &Image,
    axis: Axis,
    priming: Priming,
) -> Image {
    let (w, h) = (img.width, img.height);
    match axis {
        Axis::Rows => {
            let mut pixels = vec![0.0; w * h];
            pixels
                .par_chunks_mut(w)
                .zip(img.pixels.par_chunks(w))
                .for_each(|(out, row)| out.copy_from_slice(&filter_signal(filter, row, priming)));
            Image {
                width: w,
                height: h,
                pixels,
            }
        }
        Axis::Cols => {
            let columns: Vec<Vec<f64>> = (0..w)
                .into_par_iter()
                .map(|x| {
                    let column: Vec<f64> = (0..h).map(|y| img.pixels[y * w + x]).collect();
                    filter_signal(filter, &column, priming)
                })
                .collect();
            let mut pixels = vec![0.0; w * h];
            for (x, column) in columns.iter().enumerate() {
                for (y, &v) in column.iter().enumerate() {
                    pixels[y * w + x] = v;
                }
            }
            Image {
                width: w,
                height: h,
                pixels,
            }
        }
    }
}

/// A non-empty sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStream {
    frames: Vec<Image>,
}

impl FrameStream {
    pub fn new(frames: Vec<Image>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("frame stream is empty"))?;
        if let Some((n, _)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| !f.same_shape(first))
        {
            return Err(Error::DimensionMismatch(format!(
                "frame {n} differs in size from frame 0"
            )));
        }
        Ok(FrameStream { frames })
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Image> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Time series of one pixel.
    pub fn pixel_series(&self, x: usize, y: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.get(x, y)).collect()
    }
}

/// One causal filter state per pixel, advanced a frame at a time.
#[derive(Debug, Clone)]
pub struct TemporalFilter {
    realization: Realization,
    width: usize,
    height: usize,
    states: Vec<f64>,
    priming: Priming,
    started: bool,
}

impl TemporalFilter {
    pub fn new(lde: &LdeCoefficients, width: usize, height: usize, priming: Priming) -> Self {
        let realization = Realization::new(lde);
        let states = vec![0.0; realization.state_len() * width * height];
        TemporalFilter {
            realization,
            width,
            height,
            states,
            priming,
            started: false,
        }
    }

    /// Makes the next [`push`](Self::push) prime the states again, as if it
    /// were the first frame.
    pub fn restart(&mut self) {
        self.started = false;
        self.states.iter_mut().for_each(|s| *s = 0.0);
    }

    /// Filters the next frame; output pixel `i` is the filter output for the
    /// time series of input pixel `i`.
    pub fn push(&mut self, frame: &Image) -> Result<Image> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, filter expects {}x{}",
                frame.width, frame.height, self.width, self.height
            )));
        }
        let len = self.realization.state_len();
        let realization = &self.realization;
        let mut out = vec![0.0; frame.pixels.len()];
        if len == 0 {
            for (o, &x) in out.iter_mut().zip(&frame.pixels) {
                *o = realization.step(&mut [], x);
            }
        } else {
            let prime = !self.started && self.priming == Priming::HoldFirst;
            self.states
                .par_chunks_mut(len)
                .zip(out.par_iter_mut())
                .zip(frame.pixels.par_iter())
                .for_each(|((state, o), &x)| {
                    if prime {
                        realization.prime(state, x);
                    }
                    *o = realization.step(state, x);
                });
        }
        self.started = true;
        Ok(Image {
            width: self.width,
            height: self.height,
            pixels: out,
        })
    }
}

/// Lazily filters every pixel's time series through `lde`.
pub fn filter_time_stack<'a>(
    lde: &LdeCoefficients,
    stream: &'a FrameStream,
    priming: Priming,
) -> impl Iterator<Item = Image> + 'a {
    let mut filter = TemporalFilter::new(lde, stream.width(), stream.height(), priming);
    stream
        .frames
        .iter()
        .map(move |frame| filter.push(frame).expect("stream frames share one size"))
}
