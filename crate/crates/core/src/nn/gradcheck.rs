use rand::seq::index::sample;

use super::init::rng_from_seed;

/// Coordinates beyond this count are subsampled.
pub const MAX_CHECKED_COORDS: usize = 10_000;

/// Gradients whose magnitude is below this floor are compared on an absolute
/// scale; central differences cannot resolve relative error there.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Index (into the flat parameter vector) where `max_rel_err` occurred.
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.tol
    }
}

/// Central finite-difference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(f(p + h) - f(p - h)) / 2h`, error `O(h²)`.
    #[default]
    TwoPoint,
    /// `(8 (f(p + h) - f(p - h)) - (f(p + 2h) - f(p - 2h))) / 12h`, error `O(h⁴)`.
    FourPoint,
}

/// Compares `analytic` with two-point central differences, see
/// [`finite_difference_check_with`].
pub fn finite_difference_check(
    loss_fn: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tol: f64,
    seed: u64,
) -> GradCheckReport {
    finite_difference_check_with(loss_fn, params, analytic, h, tol, seed, Stencil::TwoPoint)
}

/// Compares `analytic` with central differences of step `h`.
///
/// The error at a coordinate is `|a - n| / max(|a|, |n|, MAGNITUDE_FLOOR)`.
/// When there are more than [`MAX_CHECKED_COORDS`] parameters a random subset
/// (seeded by `seed`) is checked.
pub fn finite_difference_check_with(
    mut loss_fn: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tol: f64,
    seed: u64,
    stencil: Stencil,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    assert!((1e-7..=1e-3).contains(&h), "step {h} outside [1e-7, 1e-3]");

    let coords: Vec<usize> = if params.len() > MAX_CHECKED_COORDS {
        let mut rng = rng_from_seed(seed);
        let mut picked = sample(&mut rng, params.len(), MAX_CHECKED_COORDS).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..params.len()).collect()
    };

    let mut work = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: coords.len(),
        tol,
    };
    for &i in &coords {
        let orig = work[i];
        let mut diff = |step: f64| {
            work[i] = orig + step;
            let plus = loss_fn(&work);
            work[i] = orig - step;
            let minus = loss_fn(&work);
            work[i] = orig;
            plus - minus
        };
        let numeric = match stencil {
            Stencil::TwoPoint => diff(h) / (2.0 * h),
            Stencil::FourPoint => (8.0 * diff(h) - diff(2.0 * h)) / (12.0 * h),
        };
        let a = analytic[i];
        let scale = a.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
        let err = (a - numeric).abs() / scale;
        if err > report.max_rel_err || !err.is_finite() {
            report.max_rel_err = if err.is_finite() { err } else { f64::INFINITY };
            report.worst_index = i;
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    report
}
