//! Agent value densities over the unit cake.
//!
//! A [`Valuation`] is a nonnegative density on `[0, 1]` scaled so the whole
//! cake is worth exactly 1 to its owner. All integrals are closed-form; the
//! composite Simpson rule in [`quadrature_oracle`] only evaluates the density
//! and is kept as an independent check on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cake::Piece;

/// Raw mass at or below this is treated as an empty valuation.
pub const ZERO_MASS: f64 = 1e-12;
/// Bisection stops once the bracket is narrower than this.
pub const CUT_TOLERANCE: f64 = 1e-12;
/// Hard cap on bisection iterations.
pub const MAX_BISECTION_STEPS: usize = 200;

const ENDPOINT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValuationError {
    #[error("valuation `{label}` has zero total mass")]
    ZeroMass { label: String },
    #[error("valuation `{label}` has negative density: {reason}")]
    NegativeDensity { label: String, reason: String },
    #[error("valuation `{label}` is malformed: {reason}")]
    InvalidSpec { label: String, reason: String },
    #[error("{value} is outside [0, 1]")]
    OutOfDomain { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampDirection {
    Increasing,
    Decreasing,
}

/// Shape of a raw (unnormalized) density.
///
/// Piecewise-constant breakpoints give the height on `[x_i, x_{i+1})`; the
/// height attached to the final breakpoint (at `x = 1`) is ignored.
/// Piecewise-linear knots are joined by straight segments. A sinusoid is
/// `offset + amplitude * sin(2π · frequency · x + phase)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DensityFamily {
    Uniform,
    PiecewiseConstant {
        breakpoints: Vec<(f64, f64)>,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: u32,
        #[serde(default)]
        phase: f64,
    },
    LinearRamp {
        direction: RampDirection,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationSpec {
    pub label: String,
    #[serde(flatten)]
    pub family: DensityFamily,
}

impl ValuationSpec {
    pub fn new(label: impl Into<String>, family: DensityFamily) -> Self {
        Self {
            label: label.into(),
            family,
        }
    }

    pub fn uniform(label: impl Into<String>) -> Self {
        Self::new(label, DensityFamily::Uniform)
    }

    pub fn ramp(label: impl Into<String>, direction: RampDirection) -> Self {
        Self::new(label, DensityFamily::LinearRamp { direction })
    }

    pub fn sinusoid(
        label: impl Into<String>,
        offset: f64,
        amplitude: f64,
        frequency: u32,
        phase: f64,
    ) -> Self {
        Self::new(
            label,
            DensityFamily::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            },
        )
    }

    pub fn piecewise_constant(label: impl Into<String>, breakpoints: Vec<(f64, f64)>) -> Self {
        Self::new(label, DensityFamily::PiecewiseConstant { breakpoints })
    }

    pub fn piecewise_linear(label: impl Into<String>, knots: Vec<(f64, f64)>) -> Self {
        Self::new(label, DensityFamily::PiecewiseLinear { knots })
    }
}

/// Internal shape with prefix masses precomputed at every breakpoint.
#[derive(Debug, Clone)]
enum Shape {
    Uniform,
    Steps {
        xs: Vec<f64>,
        heights: Vec<f64>,
        prefix: Vec<f64>,
    },
    Knots {
        xs: Vec<f64>,
        ys: Vec<f64>,
        prefix: Vec<f64>,
    },
    Sinusoid {
        offset: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    Ramp {
        increasing: bool,
    },
}

/// A normalized value density: `∫₀¹ v(x) dx = 1`.
#[derive(Debug, Clone)]
pub struct Valuation {
    spec: ValuationSpec,
    shape: Shape,
    scale: f64,
    raw_origin: f64,
}

impl PartialEq for Valuation {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Normalizes `spec` so the whole cake is worth 1.
pub fn normalize(spec: ValuationSpec) -> Result<Valuation, ValuationError> {
    Valuation::new(spec)
}

fn check_grid(label: &str, points: &[(f64, f64)], what: &str) -> Result<(), ValuationError> {
    let invalid = |reason: String| ValuationError::InvalidSpec {
        label: label.to_string(),
        reason,
    };
    if points.len() < 2 {
        return Err(invalid(format!("need at least two {what}")));
    }
    if points.iter().any(|(x, h)| !x.is_finite() || !h.is_finite()) {
        return Err(invalid(format!("{what} must be finite")));
    }
    let first = points[0].0;
    let last = points[points.len() - 1].0;
    if first.abs() > ENDPOINT_TOLERANCE || (last - 1.0).abs() > ENDPOINT_TOLERANCE {
        return Err(invalid(format!(
            "{what} must span [0, 1], got [{first}, {last}]"
        )));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(invalid(format!("{what} must be strictly increasing in x")));
    }
    Ok(())
}

fn negative(label: &str, reason: String) -> ValuationError {
    ValuationError::NegativeDensity {
        label: label.to_string(),
        reason,
    }
}

impl Valuation {
    pub fn new(spec: ValuationSpec) -> Result<Self, ValuationError> {
        let label = spec.label.as_str();
        let shape = match &spec.family {
            DensityFamily::Uniform => Shape::Uniform,
            DensityFamily::LinearRamp { direction } => Shape::Ramp {
                increasing: *direction == RampDirection::Increasing,
            },
            DensityFamily::PiecewiseConstant { breakpoints } => {
                check_grid(label, breakpoints, "breakpoints")?;
                let mut xs: Vec<f64> = breakpoints.iter().map(|p| p.0).collect();
                let n = xs.len();
                xs[0] = 0.0;
                xs[n - 1] = 1.0;
                let heights: Vec<f64> = breakpoints[..n - 1].iter().map(|p| p.1).collect();
                if let Some(h) = heights.iter().find(|h| **h < 0.0) {
                    return Err(negative(label, format!("step height {h}")));
                }
                let mut prefix = vec![0.0; n];
                for i in 0..n - 1 {
                    prefix[i + 1] = prefix[i] + heights[i] * (xs[i + 1] - xs[i]);
                }
                Shape::Steps {
                    xs,
                    heights,
                    prefix,
                }
            }
            DensityFamily::PiecewiseLinear { knots } => {
                check_grid(label, knots, "knots")?;
                let mut xs: Vec<f64> = knots.iter().map(|p| p.0).collect();
                let n = xs.len();
                xs[0] = 0.0;
                xs[n - 1] = 1.0;
                let ys: Vec<f64> = knots.iter().map(|p| p.1).collect();
                if let Some(y) = ys.iter().find(|y| **y < 0.0) {
                    return Err(negative(label, format!("knot height {y}")));
                }
                let mut prefix = vec![0.0; n];
                for i in 0..n - 1 {
                    prefix[i + 1] = prefix[i] + 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
                }
                Shape::Knots { xs, ys, prefix }
            }
            DensityFamily::Sinusoid {
                offset,
                amplitude,
                frequency,
                phase,
            } => {
                if !(offset.is_finite() && amplitude.is_finite() && phase.is_finite()) {
                    return Err(ValuationError::InvalidSpec {
                        label: label.to_string(),
                        reason: "sinusoid parameters must be finite".into(),
                    });
                }
                if *frequency == 0 {
                    return Err(ValuationError::InvalidSpec {
                        label: label.to_string(),
                        reason: "sinusoid frequency must be a positive number of cycles".into(),
                    });
                }
                if amplitude.abs() > *offset {
                    return Err(negative(
                        label,
                        format!(
                            "|amplitude| = {} exceeds offset {}",
                            amplitude.abs(),
                            offset
                        ),
                    ));
                }
                Shape::Sinusoid {
                    offset: *offset,
                    amplitude: *amplitude,
                    omega: 2.0 * PI * f64::from(*frequency),
                    phase: *phase,
                }
            }
        };
        let raw_origin = shape.antiderivative(0.0);
        let raw_total = shape.antiderivative(1.0) - raw_origin;
        if raw_total.partial_cmp(&ZERO_MASS) != Some(std::cmp::Ordering::Greater) {
            return Err(ValuationError::ZeroMass {
                label: label.to_string(),
            });
        }
        Ok(Self {
            spec,
            shape,
            scale: 1.0 / raw_total,
            raw_origin,
        })
    }

    pub fn spec(&self) -> &ValuationSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.spec.label
    }

    /// Factor applied to the raw density so that it integrates to 1.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Normalized density at `x`. Piecewise-constant densities are right-continuous.
    pub fn density(&self, x: f64) -> f64 {
        self.scale * self.shape.raw_density(x, None)
    }

    /// Value of the prefix `[0, x]`, with `x` clamped to the cake.
    pub(crate) fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        (self.scale * (self.shape.antiderivative(x) - self.raw_origin)).clamp(0.0, 1.0)
    }

    pub fn cumulative(&self, x: f64) -> Result<f64, ValuationError> {
        if !(0.0..=1.0).contains(&x) {
            return Err(ValuationError::OutOfDomain { value: x });
        }
        Ok(self.cdf(x))
    }

    /// Value of `[lo, hi]`; empty when `hi <= lo`.
    pub fn measure_interval(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let lo = lo.clamp(0.0, 1.0);
        let hi = hi.clamp(0.0, 1.0);
        (self.scale * (self.shape.antiderivative(hi) - self.shape.antiderivative(lo))).max(0.0)
    }

    pub fn measure(&self, piece: &Piece) -> f64 {
        piece
            .intervals()
            .iter()
            .map(|iv| self.measure_interval(iv.lo(), iv.hi()))
            .sum()
    }

    /// Leftmost `x` with `cumulative(x) >= t`.
    pub fn inverse_cumulative(&self, t: f64) -> Result<f64, ValuationError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(ValuationError::OutOfDomain { value: t });
        }
        Ok(self.quantile(t))
    }

    pub(crate) fn quantile(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo <= CUT_TOLERANCE {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Point `x >= from` such that `[from, x]` is worth `mass`, capped at `limit`.
    pub(crate) fn advance(&self, from: f64, mass: f64, limit: f64) -> f64 {
        let target = (self.cdf(from) + mass).min(1.0);
        self.quantile(target).clamp(from, limit)
    }

    /// Boundaries between smooth segments of the density, including 0 and 1.
    pub fn smooth_breaks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Steps { xs, .. } | Shape::Knots { xs, .. } => xs.clone(),
            _ => vec![0.0, 1.0],
        }
    }

    /// Density of the smooth segment containing `hint`, evaluated at `x`.
    fn density_on_segment(&self, hint: f64, x: f64) -> f64 {
        self.scale * self.shape.raw_density(x, Some(hint))
    }
}

impl Shape {
    fn segment(xs: &[f64], x: f64) -> usize {
        // index i with xs[i] <= x < xs[i+1], clamped to the last segment
        let n = xs.len();
        match xs.partition_point(|b| *b <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    fn raw_density(&self, x: f64, hint: Option<f64>) -> f64 {
        let at = hint.unwrap_or(x);
        match self {
            Shape::Uniform => 1.0,
            Shape::Ramp { increasing: true } => x,
            Shape::Ramp { increasing: false } => 1.0 - x,
            Shape::Steps { xs, heights, .. } => heights[Self::segment(xs, at)],
            Shape::Knots { xs, ys, .. } => {
                let i = Self::segment(xs, at);
                let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
                ys[i] + (ys[i + 1] - ys[i]) * w
            }
            Shape::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => offset + amplitude * (omega * x + phase).sin(),
        }
    }

    fn antiderivative(&self, x: f64) -> f64 {
        match self {
            Shape::Uniform => x,
            Shape::Ramp { increasing: true } => 0.5 * x * x,
            Shape::Ramp { increasing: false } => x - 0.5 * x * x,
            Shape::Steps {
                xs,
                heights,
                prefix,
            } => {
                let i = Self::segment(xs, x);
                prefix[i] + heights[i] * (x - xs[i])
            }
            Shape::Knots { xs, ys, prefix } => {
                let i = Self::segment(xs, x);
                let d = x - xs[i];
                let slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
                prefix[i] + ys[i] * d + 0.5 * slope * d * d
            }
            Shape::Sinusoid {
                offset,
                amplitude,
                omega,
                phase,
            } => offset * x - amplitude / omega * (omega * x + phase).cos(),
        }
    }
}

/// Composite Simpson estimate of `∫_a^b v`, using only density evaluations.
///
/// The range is split at the density's breakpoints and each smooth segment
/// gets its share of at least 4096 panels.
pub fn quadrature_oracle(v: &Valuation, a: f64, b: f64) -> f64 {
    const PANELS: usize = 4096;
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a];
    cuts.extend(v.smooth_breaks().into_iter().filter(|x| *x > a && *x < b));
    cuts.push(b);
    cuts.windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let mid = 0.5 * (lo + hi);
            let h = (hi - lo) / PANELS as f64;
            let f = |k: usize| v.density_on_segment(mid, lo + h * k as f64);
            let mut acc = f(0) + f(PANELS);
            for k in 1..PANELS {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k);
            }
            acc * h / 3.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cake::{Interval, Piece};

    fn sudan() -> Valuation {
        normalize(ValuationSpec::sinusoid("Sudan", 1.0, 0.5, 3, 0.0)).unwrap()
    }

    fn piece(lo: f64, hi: f64) -> Piece {
        Piece::from_interval(Interval::new(lo, hi).unwrap())
    }

    #[test]
    fn normalize_examples() {
        let u = normalize(ValuationSpec::uniform("u")).unwrap();
        assert_eq!(u.scale(), 1.0);
        assert_eq!(u.density(0.3), 1.0);

        let r = normalize(ValuationSpec::ramp("r", RampDirection::Increasing)).unwrap();
        assert!((r.scale() - 2.0).abs() < 1e-15);
        assert!((r.density(0.25) - 0.5).abs() < 1e-15);

        assert!((sudan().scale() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_specs() {
        let err = normalize(ValuationSpec::sinusoid("s", 0.5, 0.6, 2, 0.0)).unwrap_err();
        assert!(matches!(err, ValuationError::NegativeDensity { .. }));

        let err = normalize(ValuationSpec::piecewise_constant(
            "z",
            vec![(0.0, 0.0), (0.5, 0.0), (1.0, 3.0)],
        ))
        .unwrap_err();
        assert!(matches!(err, ValuationError::ZeroMass { .. }));

        let err = normalize(ValuationSpec::piecewise_constant(
            "n",
            vec![(0.0, 1.0), (0.5, -0.1), (1.0, 0.0)],
        ))
        .unwrap_err();
        assert!(matches!(err, ValuationError::NegativeDensity { .. }));

        let err = normalize(ValuationSpec::piecewise_linear(
            "gap",
            vec![(0.0, 1.0), (0.9, 1.0)],
        ))
        .unwrap_err();
        assert!(matches!(err, ValuationError::InvalidSpec { .. }));

        let err = normalize(ValuationSpec::piecewise_linear(
            "order",
            vec![(0.0, 1.0), (0.6, 1.0), (0.6, 2.0), (1.0, 1.0)],
        ))
        .unwrap_err();
        assert!(matches!(err, ValuationError::InvalidSpec { .. }));

        let err = normalize(ValuationSpec::sinusoid("f", 1.0, 0.1, 0, 0.0)).unwrap_err();
        assert!(matches!(err, ValuationError::InvalidSpec { .. }));
    }

    #[test]
    fn measure_examples() {
        let u = normalize(ValuationSpec::uniform("u")).unwrap();
        assert!((u.measure(&piece(0.0, 0.25)) - 0.25).abs() < 1e-15);
        let r = normalize(ValuationSpec::ramp("r", RampDirection::Increasing)).unwrap();
        assert!((r.measure(&piece(0.0, 0.5)) - 0.25).abs() < 1e-15);
        assert_eq!(r.measure(&Piece::empty()), 0.0);

        // composite Simpson, 10^5 panels, computed outside this crate
        let pinned = 0.2479856661320027;
        let s = sudan();
        assert!((s.measure(&piece(0.0, 0.2)) - pinned).abs() < 1e-12);
        assert!((quadrature_oracle(&s, 0.0, 0.2) - pinned).abs() < 1e-12);
    }

    #[test]
    fn cumulative_examples() {
        let r = normalize(ValuationSpec::ramp("r", RampDirection::Increasing)).unwrap();
        assert_eq!(r.cumulative(0.0).unwrap(), 0.0);
        assert!((r.cumulative(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((r.cumulative((1.0f64 / 3.0).sqrt()).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            r.cumulative(1.5),
            Err(ValuationError::OutOfDomain { .. })
        ));
        assert!(r.cumulative(-0.1).is_err());
    }

    #[test]
    fn inverse_examples() {
        let u = normalize(ValuationSpec::uniform("u")).unwrap();
        assert!((u.inverse_cumulative(1.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-11);
        let r = normalize(ValuationSpec::ramp("r", RampDirection::Increasing)).unwrap();
        assert!((r.inverse_cumulative(0.25).unwrap() - 0.5).abs() < 1e-11);
        // bisection against a 20k-panel Simpson cumulative, computed externally
        let x = sudan().inverse_cumulative(0.5).unwrap();
        assert!((x - 0.45567908396370943).abs() < 1e-9);
        assert!(u.inverse_cumulative(1.2).is_err());
        assert_eq!(u.inverse_cumulative(0.0).unwrap(), 0.0);
    }

    #[test]
    fn inverse_returns_leftmost_point_of_plateau() {
        let v = normalize(ValuationSpec::piecewise_constant(
            "plateau",
            vec![(0.0, 1.0), (0.4, 0.0), (0.6, 1.0), (1.0, 0.0)],
        ))
        .unwrap();
        // mass 0.5 is reached at x = 0.4 and stays flat until 0.6
        let x = v.inverse_cumulative(0.5).unwrap();
        assert!((x - 0.4).abs() < 1e-11, "{x}");
        let y = v.inverse_cumulative(1.0).unwrap();
        assert!((y - 1.0).abs() < 1e-11);
    }

    #[test]
    fn quadrature_oracle_examples() {
        let u = normalize(ValuationSpec::uniform("u")).unwrap();
        assert!((quadrature_oracle(&u, 0.0, 1.0) - 1.0).abs() < 1e-12);
        let r = normalize(ValuationSpec::ramp("r", RampDirection::Increasing)).unwrap();
        assert!((quadrature_oracle(&r, 0.0, 0.5) - 0.25).abs() < 1e-10);
        assert_eq!(quadrature_oracle(&sudan(), 0.3, 0.3), 0.0);
    }

    #[test]
    fn piecewise_linear_closed_form() {
        let v = normalize(ValuationSpec::piecewise_linear(
            "tent",
            vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)],
        ))
        .unwrap();
        assert!((v.scale() - 2.0).abs() < 1e-12);
        assert!((v.cumulative(0.5).unwrap() - 0.5).abs() < 1e-12);
        assert!((v.measure_interval(0.25, 0.5) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn spec_round_trips_through_serde_shape() {
        let spec = ValuationSpec::sinusoid("Sudan", 1.0, 0.5, 3, 0.0);
        assert_eq!(spec.clone(), normalize(spec).unwrap().spec().clone());
    }
}
