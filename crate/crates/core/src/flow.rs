//! Gradient-based optical flow and moving-target disparity.
//!
//! Per frame: spatial derivatives come from the symmetric `B = 2`
//! differentiator applied along rows and columns, the temporal derivative
//! from a causal `B = 2` differentiator evaluated `q` frames back, and the
//! spatial derivatives are taken on a copy of the input delayed by the same
//! `q` frames so that all three refer to one instant. The five
//! derivative products are averaged by exponential smoothers (two-sided in
//! space, one-sided in time), a 2x2 normal-equation solve gives the local
//! flow, and the part of the raw spatiotemporal products that the local flow
//! cannot explain is reported as the disparity map `dJ`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    derive_causal_lde, derive_noncausal_pair, table_coefficients, ClosedForm, FilterCoefficients,
    FilterDesign, LdeCoefficients,
};
use crate::runtime::{filter_image_separable, Axis, FrameStream, Image, Priming, TemporalFilter};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    /// Forgetting factor of the spatial differentiator.
    pub spatial_sigma: f64,
    /// Forgetting factor of the temporal differentiator.
    pub temporal_sigma: f64,
    /// Delay of the temporal differentiator, in frames. Must be a whole
    /// number: the spatial derivatives are taken on a frame that old.
    pub temporal_q: f64,
    pub temporal_kappa: u32,
    /// Pole shared by all product smoothers.
    pub smoothing_pole: f64,
    /// A pixel is unsolvable when `det J < det_threshold * trace(J)^2`.
    pub det_threshold: f64,
    #[serde(rename = "T_space")]
    pub t_space: f64,
    #[serde(rename = "T_time")]
    pub t_time: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            spatial_sigma: -1.0,
            temporal_sigma: -1.0,
            temporal_q: 4.0,
            temporal_kappa: 1,
            smoothing_pole: (-1.0f64 / 16.0).exp(),
            det_threshold: 1e-6,
            t_space: 1.0,
            t_time: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, sigma) in [
            ("spatial_sigma", self.spatial_sigma),
            ("temporal_sigma", self.temporal_sigma),
        ] {
            if !(sigma.is_finite() && sigma < 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be negative, got {sigma}"
                )));
            }
        }
        if !(self.temporal_q >= 0.0 && self.temporal_q.fract() == 0.0 && self.temporal_q <= 64.0) {
            return Err(Error::invalid(format!(
                "temporal_q must be a whole number of frames in 0..=64, got {}",
                self.temporal_q
            )));
        }
        if !(self.smoothing_pole > 0.0 && self.smoothing_pole < 1.0) {
            return Err(Error::invalid(format!(
                "smoothing_pole must lie in (0, 1), got {}",
                self.smoothing_pole
            )));
        }
        if !(self.det_threshold.is_finite() && self.det_threshold >= 0.0) {
            return Err(Error::invalid(
                "det_threshold must be finite and non-negative",
            ));
        }
        for (name, t) in [("T_space", self.t_space), ("T_time", self.t_time)] {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {t}")));
            }
        }
        Ok(())
    }

    pub fn delay_frames(&self) -> usize {
        self.temporal_q as usize
    }

    /// Frames flagged as warm-up: the delay plus about six time constants of
    /// the temporal differentiator.
    pub fn warmup_frames(&self) -> usize {
        let p = self.temporal_sigma.exp();
        self.delay_frames() + (6.0 / (1.0 - p)).ceil() as usize
    }

    pub fn spatial_differentiator(&self) -> Result<FilterCoefficients> {
        table_coefficients(
            ClosedForm::SymmetricDifferentiator,
            self.spatial_sigma.exp(),
            0.0,
            self.t_space,
        )
    }

    pub fn temporal_differentiator(&self) -> Result<LdeCoefficients> {
        let design = FilterDesign::causal(
            2,
            1,
            self.temporal_kappa,
            self.temporal_sigma.exp(),
            self.temporal_q,
        )?
        .with_sample_period(self.t_time)?;
        derive_causal_lde(&design)
    }

    pub fn spatial_smoother(&self) -> Result<FilterCoefficients> {
        Ok(derive_noncausal_pair(&FilterDesign::two_sided(0, 0, self.smoothing_pole)?)?.into())
    }

    pub fn temporal_smoother(&self) -> Result<LdeCoefficients> {
        derive_causal_lde(&FilterDesign::causal(0, 0, 0, self.smoothing_pole, 0.0)?)
    }
}

/// `(Ix, Iy)` of one image: the symmetric differentiator along rows and
/// along columns.
pub fn spatial_gradients(img: &Image, cfg: &FlowConfig) -> Result<(Image, Image)> {
    cfg.validate()?;
    let diff = cfg.spatial_differentiator()?;
    Ok(spatial_pair(&diff, img))
}

fn spatial_pair(diff: &FilterCoefficients, img: &Image) -> (Image, Image) {
    rayon::join(
        || filter_image_separable(diff, img, Axis::Rows, Priming::HoldFirst),
        || filter_image_separable(diff, img, Axis::Cols, Priming::HoldFirst),
    )
}

/// Temporal derivative and the input frame it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalSample {
    pub iz: Image,
    /// Input from `temporal_q` frames ago (the first frame is repeated
    /// until that many frames have arrived).
    pub delayed: Image,
}

/// Per-pixel causal differentiator plus the matching frame delay line.
#[derive(Debug, Clone)]
pub struct TemporalGradient {
    filter: TemporalFilter,
    history: VecDeque<Image>,
    delay: usize,
}

impl TemporalGradient {
    pub fn new(cfg: &FlowConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        let lde = cfg.temporal_differentiator()?;
        Ok(TemporalGradient {
            filter: TemporalFilter::new(&lde, width, height, Priming::HoldFirst),
            history: VecDeque::with_capacity(cfg.delay_frames() + 1),
            delay: cfg.delay_frames(),
        })
    }

    pub fn push(&mut self, frame: &Image) -> Result<TemporalSample> {
        let iz = self.filter.push(frame)?;
        if self.history.is_empty() {
            self.history
                .extend(std::iter::repeat_n(frame.clone(), self.delay));
        }
        self.history.push_back(frame.clone());
        let delayed = self
            .history
            .pop_front()
            .expect("history holds delay + 1 frames");
        Ok(TemporalSample { iz, delayed })
    }
}

/// Temporal derivatives of a whole stream.
pub fn temporal_gradient(stream: &FrameStream, cfg: &FlowConfig) -> Result<Vec<TemporalSample>> {
    let mut stage = TemporalGradient::new(cfg, stream.width(), stream.height())?;
    stream.frames().iter().map(|f| stage.push(f)).collect()
}

/// `Ix`, `Iy` and `Iz` referring to the same instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientFrames {
    pub ix: Image,
    pub iy: Image,
    pub iz: Image,
}

/// The five distinct entries of the gradient outer product.
#[derive(Debug, Clone, PartialEq)]
pub struct Products {
    pub xx: Image,
    pub xy: Image,
    pub xz: Image,
    pub yy: Image,
    pub yz: Image,
}

impl Products {
    pub fn from_gradients(g: &GradientFrames) -> Result<Self> {
        let mul = |a: &Image, b: &Image| a.zip_map(b, |u, v| u * v);
        Ok(Products {
            xx: mul(&g.ix, &g.ix)?,
            xy: mul(&g.ix, &g.iy)?,
            xz: mul(&g.ix, &g.iz)?,
            yy: mul(&g.iy, &g.iy)?,
            yz: mul(&g.iy, &g.iz)?,
        })
    }

    fn planes(&self) -> [&Image; 5] {
        [&self.xx, &self.xy, &self.xz, &self.yy, &self.yz]
    }

    fn from_planes([xx, xy, xz, yy, yz]: [Image; 5]) -> Self {
        Products { xx, xy, xz, yy, yz }
    }

    /// Multiplies every plane by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Products::from_planes(self.planes().map(|p| p.map(|v| v * factor)))
    }
}

/// Smoothed products `J` next to the raw products they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMaps {
    pub smoothed: Products,
    pub raw: Products,
}

/// Exponential averaging of the products: two-sided along rows and columns,
/// then one-sided over frames.
#[derive(Debug, Clone)]
pub struct ProductSmoother {
    spatial: FilterCoefficients,
    temporal: [TemporalFilter; 5],
}

impl ProductSmoother {
    pub fn new(cfg: &FlowConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        let lde = cfg.temporal_smoother()?;
        Ok(ProductSmoother {
            spatial: cfg.spatial_smoother()?,
            temporal: std::array::from_fn(|_| {
                TemporalFilter::new(&lde, width, height, Priming::HoldFirst)
            }),
        })
    }

    /// Forgets the temporal history; the next frame primes the smoothers.
    pub fn restart(&mut self) {
        self.temporal.iter_mut().for_each(TemporalFilter::restart);
    }

    pub fn push(&mut self, raw: Products) -> Result<ProductMaps> {
        let spatial = &self.spatial;
        let blurred: Vec<Image> = raw
            .planes()
            .into_par_iter()
            .map(|p| {
                let rows = filter_image_separable(spatial, p, Axis::Rows, Priming::HoldFirst);
                filter_image_separable(spatial, &rows, Axis::Cols, Priming::HoldFirst)
            })
            .collect();
        let mut smoothed = Vec::with_capacity(5);
        for (filter, plane) in self.temporal.iter_mut().zip(&blurred) {
            smoothed.push(filter.push(plane)?);
        }
        let smoothed: [Image; 5] = smoothed.try_into().expect("five planes");
        Ok(ProductMaps {
            smoothed: Products::from_planes(smoothed),
            raw,
        })
    }
}

/// Smooths the products of a sequence of aligned gradients.
pub fn smooth_products(gradients: &[GradientFrames], cfg: &FlowConfig) -> Result<Vec<ProductMaps>> {
    let Some(first) = gradients.first() else {
        return Ok(Vec::new());
    };
    let mut smoother = ProductSmoother::new(cfg, first.ix.width(), first.ix.height())?;
    gradients
        .iter()
        .map(|g| smoother.push(Products::from_gradients(g)?))
        .collect()
}

/// Pixels per frame; unsolvable pixels hold zero flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub vx: Image,
    pub vy: Image,
    pub valid: Vec<bool>,
}

impl FlowField {
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.vx.width() + x]
    }
}

/// Solves `J [vx; vy] = -[Jxz; Jyz]` per pixel.
pub fn solve_flow(products: &ProductMaps, cfg: &FlowConfig) -> FlowField {
    let j = &products.smoothed;
    let (w, h) = (j.xx.width(), j.xx.height());
    let solved: Vec<Option<(f64, f64)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (a, b, d) = (j.xx.pixels()[i], j.xy.pixels()[i], j.yy.pixels()[i]);
            let (ez, fz) = (j.xz.pixels()[i], j.yz.pixels()[i]);
            let trace = a + d;
            let det = a * d - b * b;
            if !(trace > 0.0) || !(det >= cfg.det_threshold * trace * trace) || det == 0.0 {
                return None;
            }
            Some(((-d * ez + b * fz) / det, (b * ez - a * fz) / det))
        })
        .collect();
    let plane = |f: fn(&(f64, f64)) -> f64| {
        Image::new(
            w,
            h,
            solved.iter().map(|s| s.as_ref().map_or(0.0, f)).collect(),
        )
        .expect("flow plane matches product size")
    };
    FlowField {
        vx: plane(|v| v.0),
        vy: plane(|v| v.1),
        valid: solved.iter().map(Option::is_some).collect(),
    }
}

/// Norm of the raw spatiotemporal products left over after subtracting what
/// the local flow predicts from the raw spatial products.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub dj: Image,
}

pub fn background_disparity(products: &ProductMaps, flow: &FlowField) -> Result<DisparityMap> {
    let r = &products.raw;
    if !r.xx.same_shape(&flow.vx) {
        return Err(Error::DimensionMismatch(
            "flow and products differ in size".into(),
        ));
    }
    let dj: Vec<f64> = (0..flow.valid.len())
        .into_par_iter()
        .map(|i| {
            if !flow.valid[i] {
                return 0.0;
            }
            let (vx, vy) = (flow.vx.pixels()[i], flow.vy.pixels()[i]);
            let (xx, xy, yy) = (r.xx.pixels()[i], r.xy.pixels()[i], r.yy.pixels()[i]);
            let pred_xz = -(xx * vx + xy * vy);
            let pred_yz = -(xy * vx + yy * vy);
            (r.xz.pixels()[i] - pred_xz).hypot(r.yz.pixels()[i] - pred_yz)
        })
        .collect();
    Ok(DisparityMap {
        dj: Image::new(flow.vx.width(), flow.vx.height(), dj)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub index: usize,
    /// The output still carries start-up transients.
    pub warmup: bool,
    pub flow: FlowField,
    pub disparity: DisparityMap,
}

/// Streaming version of [`process_sequence`].
///
/// The temporal product smoothers are primed again when the warm-up span
/// ends, so post-warm-up flow is not biased by products formed while the
/// temporal differentiator was still settling.
#[derive(Debug, Clone)]
pub struct FlowPipeline {
    cfg: FlowConfig,
    spatial: FilterCoefficients,
    temporal: TemporalGradient,
    smoother: ProductSmoother,
    index: usize,
}

impl FlowPipeline {
    pub fn new(cfg: FlowConfig, width: usize, height: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(FlowPipeline {
            spatial: cfg.spatial_differentiator()?,
            temporal: TemporalGradient::new(&cfg, width, height)?,
            smoother: ProductSmoother::new(&cfg, width, height)?,
            cfg,
            index: 0,
        })
    }

    pub fn config(&self) -> &FlowConfig {
        &self.cfg
    }

    /// Gradients for the next frame, aligned to `temporal_q` frames back.
    pub fn gradients(&mut self, frame: &Image) -> Result<GradientFrames> {
        let TemporalSample { iz, delayed } = self.temporal.push(frame)?;
        let (ix, iy) = spatial_pair(&self.spatial, &delayed);
        Ok(GradientFrames { ix, iy, iz })
    }

    pub fn push(&mut self, frame: &Image) -> Result<FrameResult> {
        let gradients = self.gradients(frame)?;
        let warmup_frames = self.cfg.warmup_frames();
        if self.index == warmup_frames {
            self.smoother.restart();
        }
        let products = self.smoother.push(Products::from_gradients(&gradients)?)?;
        let flow = solve_flow(&products, &self.cfg);
        let disparity = background_disparity(&products, &flow)?;
        let result = FrameResult {
            index: self.index,
            warmup: self.index < warmup_frames,
            flow,
            disparity,
        };
        self.index += 1;
        Ok(result)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub config: FlowConfig,
    pub warmup_frames: usize,
    pub frames: Vec<FrameResult>,
}

/// Flow and disparity for every frame of `stream`.
pub fn process_sequence(stream: &FrameStream, cfg: &FlowConfig) -> Result<SequenceResult> {
    let mut pipeline = FlowPipeline::new(*cfg, stream.width(), stream.height())?;
    let frames = stream
        .frames()
        .iter()
        .map(|f| pipeline.push(f))
        .collect::<Result<_>>()?;
    Ok(SequenceResult {
        config: *cfg,
        warmup_frames: cfg.warmup_frames(),
        frames,
    })
}

/// Median of `values`; `None` when empty. NaNs sort last.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Values of `img` at least `margin` pixels from every edge.
pub fn interior(img: &Image, margin: usize) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    (margin..h.saturating_sub(margin))
        .flat_map(|y| (margin..w.saturating_sub(margin)).map(move |x| (x, y)))
        .map(|(x, y)| img.get(x, y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{rotate_quarter, with_blob, Blob, Plaid};
    use std::f64::consts::PI;

    fn plane(w: usize, h: usize, v: f64) -> Image {
        Image::filled(w, h, v).unwrap()
    }

    fn maps(xx: f64, xy: f64, xz: f64, yy: f64, yz: f64) -> ProductMaps {
        let p = Products {
            xx: plane(1, 1, xx),
            xy: plane(1, 1, xy),
            xz: plane(1, 1, xz),
            yy: plane(1, 1, yy),
            yz: plane(1, 1, yz),
        };
        ProductMaps {
            smoothed: p.clone(),
            raw: p,
        }
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = FlowConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.warmup_frames(), 14);
        let bad = FlowConfig {
            temporal_q: 2.5,
            ..cfg
        };
        assert!(bad.validate().is_err());
        let bad = FlowConfig {
            smoothing_pole: 1.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
        let bad = FlowConfig {
            spatial_sigma: 0.0,
            ..cfg
        };
        assert!(bad.validate().is_err());
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"T_space\""));
        let back: FlowConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn diagonal_system() {
        let f = solve_flow(&maps(1.0, 0.0, -0.5, 1.0, 0.25), &FlowConfig::default());
        assert!(f.valid[0]);
        assert_eq!((f.vx.pixels()[0], f.vy.pixels()[0]), (0.5, -0.25));
    }

    #[test]
    fn aperture_problem_is_invalid() {
        let f = solve_flow(&maps(1.0, 1.0, 0.3, 1.0, 0.3), &FlowConfig::default());
        assert!(!f.valid[0]);
        assert_eq!((f.vx.pixels()[0], f.vy.pixels()[0]), (0.0, 0.0));
        let flat = solve_flow(&maps(0.0, 0.0, 0.0, 0.0, 0.0), &FlowConfig::default());
        assert!(!flat.valid[0]);
        let d = background_disparity(&maps(0.0, 0.0, 0.0, 0.0, 0.0), &flat).unwrap();
        assert_eq!(d.dj.pixels()[0], 0.0);
    }

    #[test]
    fn ramp_and_constant_gradients() {
        let cfg = FlowConfig::default();
        let ramp = Image::from_fn(100, 80, |x, _| x as f64).unwrap();
        let (ix, iy) = spatial_gradients(&ramp, &cfg).unwrap();
        for v in interior(&ix, 32) {
            assert!((v - 1.0).abs() < 1e-9, "{v}");
        }
        for v in interior(&iy, 0) {
            assert!(v.abs() < 1e-12);
        }
        let (cx, cy) = spatial_gradients(&plane(20, 20, 0.7), &cfg).unwrap();
        assert!(cx
            .pixels()
            .iter()
            .chain(cy.pixels())
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sinusoid_amplitude_matches_response() {
        use crate::response::FrequencyResponse;
        let cfg = FlowConfig::default();
        let f = 0.02;
        let omega = 2.0 * PI * f;
        let img = Image::from_fn(400, 4, |x, _| (omega * x as f64).sin()).unwrap();
        let (ix, _) = spatial_gradients(&img, &cfg).unwrap();
        // amplitude over the interior: max |Ix|
        let amp = (100..300).map(|x| ix.get(x, 1).abs()).fold(0.0, f64::max);
        let expected = cfg.spatial_differentiator().unwrap().response(omega).norm();
        assert!(
            (amp - expected).abs() / expected < 0.02,
            "{amp} vs {expected}"
        );
    }

    #[test]
    fn temporal_ramp_and_static() {
        let cfg = FlowConfig::default();
        let frames: Vec<Image> = (0..30)
            .map(|n| plane(4, 3, 0.2 + 0.01 * n as f64))
            .collect();
        let out = temporal_gradient(&FrameStream::new(frames).unwrap(), &cfg).unwrap();
        for s in &out[cfg.warmup_frames()..] {
            for &v in s.iz.pixels() {
                assert!((v - 0.01).abs() < 1e-5, "{v}");
            }
        }
        assert!(out[29].iz.pixels().iter().all(|v| (v - 0.01).abs() < 1e-8));
        // the delayed copy lags by q frames
        assert!((out[20].delayed.get(0, 0) - (0.2 + 0.01 * 16.0)).abs() < 1e-12);
        let still = FrameStream::new(vec![plane(4, 3, 0.4); 20]).unwrap();
        let out = temporal_gradient(&still, &cfg).unwrap();
        assert!(out
            .iter()
            .all(|s| s.iz.pixels().iter().all(|v| v.abs() < 1e-12)));
    }

    #[test]
    fn brightness_constancy_alignment() {
        let cfg = FlowConfig::default();
        let plaid = Plaid {
            velocity: (1.0, 0.0),
            frequency: (1.0 / 40.0, 0.0),
            width: 96,
            height: 8,
            ..Plaid::default()
        };
        let mut pipeline = FlowPipeline::new(cfg, plaid.width, plaid.height).unwrap();
        let mut worst: f64 = 0.0;
        for t in 0..30 {
            let g = pipeline.gradients(&plaid.frame(t).unwrap()).unwrap();
            if t < cfg.warmup_frames() {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for x in 24..72 {
                num += (g.iz.get(x, 4) + g.ix.get(x, 4)).powi(2);
                den += g.ix.get(x, 4).powi(2);
            }
            worst = worst.max((num / den).sqrt());
        }
        assert!(worst < 0.1, "relative residual {worst}");
    }

    #[test]
    fn smoother_constant_and_impulse() {
        let cfg = FlowConfig::default();
        let mut s = ProductSmoother::new(&cfg, 33, 33).unwrap();
        let c = Products::from_planes(std::array::from_fn(|_| plane(33, 33, 0.3)));
        let out = s.push(c).unwrap();
        for p in out.smoothed.planes() {
            assert!(p.pixels().iter().all(|v| (v - 0.3).abs() < 1e-12));
        }

        let mut s = ProductSmoother::new(&cfg, 65, 65).unwrap();
        let mut imp = plane(65, 65, 0.0);
        imp.set(32, 32, 1.0);
        let out = s
            .push(Products::from_planes(std::array::from_fn(|_| imp.clone())))
            .unwrap();
        let j = &out.smoothed.xx;
        let p = cfg.smoothing_pole;
        for k in 1..12 {
            let (l, r) = (j.get(32 - k, 32), j.get(32 + k, 32));
            assert!((l - r).abs() < 1e-15 * j.get(32, 32).max(1.0));
            assert!((r / j.get(32 + k - 1, 32) - p).abs() < 1e-6);
            assert!((j.get(32, 32 + k) / j.get(32, 32 + k - 1) - p).abs() < 1e-6);
        }
    }

    fn plaid_errors(cfg: &FlowConfig, plaid: &Plaid, frames: usize, margin: usize) -> Vec<f64> {
        let res = process_sequence(&plaid.sequence(frames).unwrap(), cfg).unwrap();
        let (tx, ty) = plaid.velocity;
        res.frames
            .iter()
            .filter(|f| !f.warmup)
            .map(|f| {
                let mx = median(&mut interior(&f.flow.vx, margin)).unwrap();
                let my = median(&mut interior(&f.flow.vy, margin)).unwrap();
                (mx - tx).hypot(my - ty) / tx.hypot(ty)
            })
            .collect()
    }

    #[test]
    fn plaid_flow_accuracy() {
        let plaid = Plaid {
            width: 80,
            height: 80,
            ..Plaid::default()
        };
        let errs = plaid_errors(&FlowConfig::default(), &plaid, 30, 16);
        assert!(!errs.is_empty());
        for e in errs {
            assert!(e < 0.1, "relative error {e}");
        }
    }

    #[test]
    fn quarter_turn_equivariance() {
        let cfg = FlowConfig::default();
        let plaid = Plaid {
            width: 48,
            height: 40,
            velocity: (0.4, 0.3),
            ..Plaid::default()
        };
        let stream = plaid.sequence(18).unwrap();
        let rotated =
            FrameStream::new(stream.frames().iter().map(rotate_quarter).collect()).unwrap();
        let a = process_sequence(&stream, &cfg).unwrap();
        let b = process_sequence(&rotated, &cfg).unwrap();
        let (fa, fb) = (&a.frames[17].flow, &b.frames[17].flow);
        let (w, h) = (48, 40);
        for y in 8..h - 8 {
            for x in 8..w - 8 {
                let (xp, yp) = (h - 1 - y, x);
                assert_eq!(fa.is_valid(x, y), fb.is_valid(xp, yp));
                assert!((fb.vx.get(xp, yp) + fa.vy.get(x, y)).abs() < 1e-9);
                assert!((fb.vy.get(xp, yp) - fa.vx.get(x, y)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn intensity_scaling() {
        let cfg = FlowConfig::default();
        let plaid = Plaid {
            width: 40,
            height: 40,
            ..Plaid::default()
        };
        let stream = with_blob(
            &plaid.sequence(16).unwrap(),
            &Blob::counter_moving((20.0, 20.0), plaid.velocity),
        )
        .unwrap();
        let s = 3.0;
        let scaled =
            FrameStream::new(stream.frames().iter().map(|f| f.map(|v| s * v)).collect()).unwrap();
        let a = process_sequence(&stream, &cfg).unwrap();
        let b = process_sequence(&scaled, &cfg).unwrap();
        let (fa, fb) = (&a.frames[15], &b.frames[15]);
        for i in 0..fa.flow.valid.len() {
            assert_eq!(fa.flow.valid[i], fb.flow.valid[i]);
            if !fa.flow.valid[i] {
                continue;
            }
            let tol = 1e-9 * (1.0 + fa.flow.vx.pixels()[i].abs());
            assert!((fa.flow.vx.pixels()[i] - fb.flow.vx.pixels()[i]).abs() < tol);
            let (da, db) = (fa.disparity.dj.pixels()[i], fb.disparity.dj.pixels()[i]);
            assert!((db - s * s * da).abs() <= 1e-9 * (s * s * da).max(1e-12));
        }
    }

    #[test]
    fn disparity_is_nonnegative_and_deterministic() {
        let cfg = FlowConfig::default();
        let plaid = Plaid {
            width: 32,
            height: 32,
            ..Plaid::default()
        };
        let stream = plaid.sequence(16).unwrap();
        let a = process_sequence(&stream, &cfg).unwrap();
        let b = process_sequence(&stream, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a
            .frames
            .iter()
            .all(|f| f.disparity.dj.pixels().iter().all(|&v| v >= 0.0)));
        assert!(a.frames[..14].iter().all(|f| f.warmup) && !a.frames[14].warmup);
    }
}
