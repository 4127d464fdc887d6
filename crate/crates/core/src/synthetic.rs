//! Synthetic image sequences with known motion, for exercising the flow
//! pipeline: a translating sinusoidal plaid, a rotating textured background,
//! a Gaussian blob that moves independently, and seeded sensor noise.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::runtime::{FrameStream, Image};
use crate::{Error, Result};

/// `0.5 + a sin(2 pi fx (x - vx t)) + a sin(2 pi fy (y - vy t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plaid {
    pub width: usize,
    pub height: usize,
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Cycles per pixel along x and y.
    pub frequency: (f64, f64),
    pub amplitude: f64,
}

impl Default for Plaid {
    fn default() -> Self {
        Plaid {
            width: 128,
            height: 128,
            velocity: (0.5, -0.25),
            frequency: (1.0 / 48.0, 1.0 / 40.0),
            amplitude: 0.2,
        }
    }
}

impl Plaid {
    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        let (vx, vy) = self.velocity;
        let (fx, fy) = self.frequency;
        0.5 + self.amplitude
            * ((2.0 * PI * fx * (x - vx * t)).sin() + (2.0 * PI * fy * (y - vy * t)).sin())
    }

    pub fn frame(&self, t: usize) -> Result<Image> {
        Image::from_fn(self.width, self.height, |x, y| {
            self.value(x as f64, y as f64, t as f64)
        })
    }

    pub fn sequence(&self, frames: usize) -> Result<FrameStream> {
        FrameStream::new((0..frames).map(|t| self.frame(t)).collect::<Result<_>>()?)
    }
}

/// Additive isotropic Gaussian spot moving in a straight line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    /// Centre at frame 0.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Standard deviation in pixels.
    pub sigma: f64,
    pub amplitude: f64,
}

impl Blob {
    /// A blob of 8 px diameter (`sigma = 4`) starting at `start` and moving
    /// against the given background velocity.
    pub fn counter_moving(start: (f64, f64), background: (f64, f64)) -> Self {
        Blob {
            start,
            velocity: (-background.0, -background.1),
            sigma: 4.0,
            amplitude: 0.5,
        }
    }

    pub fn centre(&self, t: usize) -> (f64, f64) {
        (
            self.start.0 + self.velocity.0 * t as f64,
            self.start.1 + self.velocity.1 * t as f64,
        )
    }

    pub fn value(&self, x: f64, y: f64, t: usize) -> f64 {
        let (cx, cy) = self.centre(t);
        let r2 = (x - cx).powi(2) + (y - cy).powi(2);
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Pixels within one standard deviation of the centre at frame `t`.
    pub fn contains(&self, x: usize, y: usize, t: usize) -> bool {
        let (cx, cy) = self.centre(t);
        (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= self.sigma * self.sigma
    }
}

/// Adds `blob` to every frame of `stream`.
pub fn with_blob(stream: &FrameStream, blob: &Blob) -> Result<FrameStream> {
    let frames = stream
        .frames()
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            Image::from_fn(frame.width(), frame.height(), |x, y| {
                frame.get(x, y) + blob.value(x as f64, y as f64, t)
            })
        })
        .collect::<Result<_>>()?;
    FrameStream::new(frames)
}

/// A textured background turning about the image centre by
/// `angular_velocity` radians per frame, resampled nearest-neighbour from a
/// fixed texture.
pub fn rotating_background(
    width: usize,
    height: usize,
    angular_velocity: f64,
    frames: usize,
) -> Result<FrameStream> {
    if !angular_velocity.is_finite() {
        return Err(Error::invalid("angular velocity must be finite"));
    }
    // texture twice the frame diagonal so rotated lookups stay inside it
    let side = 2 * ((width * width + height * height) as f64).sqrt().ceil() as usize;
    let texture = Image::from_fn(side, side, |x, y| {
        let (x, y) = (x as f64, y as f64);
        0.5 + 0.15 * (2.0 * PI * x / 29.0).sin()
            + 0.15 * (2.0 * PI * y / 23.0).sin()
            + 0.1 * (2.0 * PI * (x + y) / 37.0).sin()
    })?;
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let centre = (side as f64 - 1.0) / 2.0;
    let frames = (0..frames)
        .map(|t| {
            let (s, c) = (angular_velocity * t as f64).sin_cos();
            Image::from_fn(width, height, |x, y| {
                // inverse rotation: where did this pixel come from
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                let u = (c * dx + s * dy + centre).round() as usize;
                let v = (-s * dx + c * dy + centre).round() as usize;
                texture.get(u, v)
            })
        })
        .collect::<Result<_>>()?;
    FrameStream::new(frames)
}

/// Adds independent Gaussian noise of standard deviation `sigma` to every
/// pixel, reproducibly for a given `seed`.
pub fn add_noise(stream: &FrameStream, sigma: f64, seed: u64) -> Result<FrameStream> {
    let normal =
        Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = stream
        .frames()
        .iter()
        .map(|frame| {
            let pixels = frame
                .pixels()
                .iter()
                .map(|&v| v + normal.sample(&mut rng))
                .collect();
            Image::new(frame.width(), frame.height(), pixels)
        })
        .collect::<Result<_>>()?;
    FrameStream::new(frames)
}

/// Quarter turn with `x' = H - 1 - y`, `y' = x`; motion `(vx, vy)` becomes
/// `(-vy, vx)`.
pub fn rotate_quarter(img: &Image) -> Image {
    let (w, h) = (img.width(), img.height());
    Image::from_fn(h, w, |xp, yp| img.get(yp, h - 1 - xp))
        .expect("rotated image keeps its pixel count")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plaid_translates() {
        let plaid = Plaid {
            velocity: (1.0, 2.0),
            ..Plaid::default()
        };
        let f0 = plaid.frame(0).unwrap();
        let f1 = plaid.frame(1).unwrap();
        assert!((f1.get(11, 12) - f0.get(10, 10)).abs() < 1e-12);
    }

    #[test]
    fn blob_peak_follows_centre() {
        let blob = Blob::counter_moving((20.0, 30.0), (0.5, -0.25));
        assert_eq!(blob.centre(4), (18.0, 31.0));
        assert!((blob.value(18.0, 31.0, 4) - blob.amplitude).abs() < 1e-15);
        assert!(blob.contains(18, 31, 4) && !blob.contains(30, 31, 4));
    }

    #[test]
    fn noise_is_seeded() {
        let stream = Plaid::default().sequence(2).unwrap();
        let a = add_noise(&stream, 0.01, 7).unwrap();
        let b = add_noise(&stream, 0.01, 7).unwrap();
        let c = add_noise(&stream, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rotation_at_zero_speed_is_static() {
        let s = rotating_background(32, 24, 0.0, 3).unwrap();
        assert_eq!(s.frames()[0], s.frames()[2]);
        let moving = rotating_background(32, 24, 0.05, 3).unwrap();
        assert_ne!(moving.frames()[0], moving.frames()[2]);
    }

    #[test]
    fn quarter_turn_mapping() {
        let img = Image::from_fn(3, 2, |x, y| (10 * y + x) as f64).unwrap();
        let r = rotate_quarter(&img);
        assert_eq!((r.width(), r.height()), (2, 3));
        // x' = H - 1 - y, y' = x
        for y in 0..2 {
            for x in 0..3 {
                assert_eq!(r.get(1 - y, x), img.get(x, y));
            }
        }
    }
}
