//! Exact Q and Wigner functions, phase-space grids, and the Gaussian smoothing
//! that takes W to Q.
//!
//! Wigner normalization: `W(alpha) = (2/pi) Tr[rho D(alpha) P D(alpha)^dagger]`
//! with `P` the photon-number parity, so that `∫ W d^2alpha = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{QcavError, Result};
use crate::fock::{coherent_overlap, displacement_elements, FieldDensity};

/// Uniform sampling of one phase-space axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(QcavError::InvalidParameter { name: "steps", value: steps as f64 });
        }
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(QcavError::InvalidParameter { name: "axis range", value: max - min });
        }
        Ok(Self { min, max, steps })
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.steps - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }
}

impl FromStr for Axis {
    type Err = QcavError;

    /// `<min>:<max>:<steps>`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || QcavError::GridSpecParse(s.to_string());
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].parse().map_err(|_| bad())?;
        let max: f64 = parts[1].parse().map_err(|_| bad())?;
        let steps: usize = parts[2].parse().map_err(|_| bad())?;
        Axis::new(min, max, steps).map_err(|_| bad())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub re: Axis,
    pub im: Axis,
}

impl GridSpec {
    /// Same sampling on both axes.
    pub fn square(axis: Axis) -> Self {
        Self { re: axis, im: axis }
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        C64::new(self.re.point(i), self.im.point(j))
    }
}

/// Values sampled on a uniform grid; `values[[i, j]]` sits at
/// `re_min + i*dre + i*(im_min + j*dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub spec: GridSpec,
    pub values: Array2<f64>,
}

impl PhaseGrid {
    pub fn new(spec: GridSpec, values: Array2<f64>) -> Result<Self> {
        let expected = (spec.re.steps, spec.im.steps);
        if values.dim() != expected {
            return Err(QcavError::DimensionMismatch { expected: expected.0 * expected.1, got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(QcavError::InvalidParameter { name: "grid value", value: *v });
        }
        Ok(Self { spec, values })
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.spec.point(i, j)
    }

    /// Two-dimensional trapezoid rule over the whole grid.
    pub fn integral(&self) -> f64 {
        let (nr, ni) = self.values.dim();
        let mut acc = 0.0;
        for i in 0..nr {
            for j in 0..ni {
                acc += trapezoid_weight(i, nr) * trapezoid_weight(j, ni) * self.values[[i, j]];
            }
        }
        acc * self.spec.re.spacing() * self.spec.im.spacing()
    }

    /// `(i, j)` of the largest value (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for ((i, j), &v) in self.values.indexed_iter() {
            if v > best.1 {
                best = ((i, j), v);
            }
        }
        best.0
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn trapezoid_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Evaluates `f` at every grid point. Failures carry the point coordinates;
/// the first failure in row-major order is reported.
pub fn sample_grid<F>(f: F, spec: GridSpec) -> Result<PhaseGrid>
where
    F: Fn(C64) -> Result<f64> + Sync,
{
    let (nr, ni) = (spec.re.steps, spec.im.steps);
    let flat: Vec<Result<f64>> = (0..nr * ni)
        .into_par_iter()
        .map(|k| {
            let alpha = spec.point(k / ni, k % ni);
            let at = |source| QcavError::AtPoint { re: alpha.re, im: alpha.im, source: Box::new(source) };
            match f(alpha) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(at(QcavError::InvalidParameter { name: "value", value: v })),
                Err(e) => Err(at(e)),
            }
        })
        .collect();
    let values: Vec<f64> = flat.into_iter().collect::<Result<_>>()?;
    let values = Array2::from_shape_vec((nr, ni), values).expect("grid shape");
    PhaseGrid::new(spec, values)
}

/// Husimi function `<alpha|rho|alpha> / pi`.
pub fn q_direct(rho: &FieldDensity, alpha: C64) -> f64 {
    coherent_overlap(rho, alpha) / PI
}

/// `W(alpha) = (2/pi) sum_n (-1)^n <n|D(alpha)^dagger rho D(alpha)|n>`, summed in
/// closed form as `(2/pi) Re sum_{nm} rho_nm <m|D(2 alpha)|n> (-1)^n` since
/// `D(alpha) P D(alpha)^dagger = D(2 alpha) P`. The matrix elements are exact,
/// so no displaced state is ever truncated.
pub fn wigner_direct(rho: &FieldDensity, alpha: C64) -> f64 {
    let d = displacement_elements(2.0 * alpha, rho.cutoff());
    let m = rho.matrix();
    let mut acc = C64::new(0.0, 0.0);
    for ((n, k), r) in m.indexed_iter() {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        acc += r * d[[k, n]] * sign;
    }
    2.0 / PI * acc.re
}

/// Radius around `alpha` that the Wigner grid must cover: the smoothing kernel
/// `e^{-2|alpha-beta|^2}` is 1.5e-8 there.
pub const CONVOLUTION_RADIUS: f64 = 3.0;
pub const MAX_CONVOLUTION_SPACING: f64 = 0.1;

/// `Q(alpha) = (2/pi) ∫ W(beta) e^{-2|alpha-beta|^2} d^2beta` by the trapezoid
/// rule on the sampled Wigner grid.
pub fn q_from_wigner_convolution(w: &PhaseGrid, alpha: C64) -> Result<f64> {
    let (re, im) = (w.spec.re, w.spec.im);
    let spacing = re.spacing().max(im.spacing());
    if spacing > MAX_CONVOLUTION_SPACING * (1.0 + 1e-9) {
        return Err(QcavError::GridTooCoarse(spacing));
    }
    let slack = 1e-9;
    let r = CONVOLUTION_RADIUS;
    if alpha.re - r < re.min - slack
        || alpha.re + r > re.max + slack
        || alpha.im - r < im.min - slack
        || alpha.im + r > im.max + slack
    {
        return Err(QcavError::ConvolutionDomainTooSmall { re: alpha.re, im: alpha.im });
    }
    let (nr, ni) = w.values.dim();
    let kernel_im: Vec<f64> =
        (0..ni).map(|j| trapezoid_weight(j, ni) * (-2.0 * (alpha.im - im.point(j)).powi(2)).exp()).collect();
    let mut acc = 0.0;
    for i in 0..nr {
        let kr = trapezoid_weight(i, nr) * (-2.0 * (alpha.re - re.point(i)).powi(2)).exp();
        if kr == 0.0 {
            continue;
        }
        let row: f64 = kernel_im.iter().zip(w.values.row(i)).map(|(k, v)| k * v).sum();
        acc += kr * row;
    }
    Ok(2.0 / PI * acc * re.spacing() * im.spacing())
}
