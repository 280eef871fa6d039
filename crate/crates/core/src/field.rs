//! Stochastic reaction-diffusion of one signaling species on a 1D grid.
//!
//! The grid is node-centred: `num_cells` nodes spaced `dx` apart with the first
//! node on `grid_min` and the last on `grid_max`. Diffusion and decay are
//! stepped with implicit Euler; sources and white noise enter explicitly:
//!
//! ```text
//! (I - dt*D*L + dt*lambda*I) C_new = C_old + dt*S + sqrt(dt)*sigma*N
//! ```
//!
//! where `L` is the second-difference operator with mirrored (no-flux) ends.
//! The mirrored stencil conserves the trapezoid-weighted mass exactly.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    pub diffusion: f64,
    pub decay: f64,
    /// Amplitude of the additive white noise.
    pub noise_sigma: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub num_cells: usize,
    pub dt: f64,
}

impl Default for FieldParams {
    fn default() -> Self {
        Self {
            diffusion: 0.1,
            decay: 0.01,
            noise_sigma: 0.1,
            grid_min: 0.0,
            grid_max: 10.0,
            num_cells: 256,
            dt: 0.01,
        }
    }
}

impl FieldParams {
    pub fn dx(&self) -> f64 {
        (self.grid_max - self.grid_min) / (self.num_cells - 1) as f64
    }

    pub fn length(&self) -> f64 {
        self.grid_max - self.grid_min
    }

    pub fn position(&self, cell: usize) -> f64 {
        self.grid_min + cell as f64 * self.dx()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.num_cells).map(|i| self.position(i)).collect()
    }

    pub fn clamp_position(&self, x: f64) -> f64 {
        x.clamp(self.grid_min, self.grid_max)
    }

    pub fn validate(&self, prefix: &str, issues: &mut Vec<ConfigIssue>) {
        let at = |name: &str| format!("{prefix}.{name}");
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !finite_nonneg(self.diffusion) {
            issues.push(ConfigIssue::new(at("diffusion"), "must be finite and >= 0"));
        }
        if !finite_nonneg(self.decay) {
            issues.push(ConfigIssue::new(at("decay"), "must be finite and >= 0"));
        }
        if !finite_nonneg(self.noise_sigma) {
            issues.push(ConfigIssue::new(at("noise_sigma"), "must be finite and >= 0"));
        }
        if self.num_cells < 3 {
            issues.push(ConfigIssue::new(at("num_cells"), "must be at least 3"));
        }
        if !(self.grid_min.is_finite() && self.grid_max.is_finite() && self.grid_max > self.grid_min) {
            issues.push(ConfigIssue::new(at("grid_max"), "must be finite and > grid_min"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            issues.push(ConfigIssue::new(at("dt"), "must be finite and > 0"));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl ConcentrationField {
    pub fn zeros(params: &FieldParams) -> Self {
        Self {
            values: vec![0.0; params.num_cells],
            time: 0.0,
        }
    }

    pub fn from_fn(params: &FieldParams, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: params.positions().into_iter().map(f).collect(),
            time: 0.0,
        }
    }

    /// Trapezoid-weighted integral of the concentration over the domain.
    pub fn total_mass(&self, params: &FieldParams) -> f64 {
        let n = self.values.len();
        let interior: f64 = self.values[1..n - 1].iter().sum();
        params.dx() * (interior + 0.5 * (self.values[0] + self.values[n - 1]))
    }

    /// Linear interpolation between nodes; positions outside the grid are clamped.
    pub fn value_at(&self, params: &FieldParams, x: f64) -> f64 {
        let (i, frac) = locate(params, x);
        if frac == 0.0 {
            return self.values[i];
        }
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    /// Interpolated concentration gradient at a continuous position.
    pub fn gradient_at_position(&self, params: &FieldParams, x: f64) -> f64 {
        let (i, frac) = locate(params, x);
        let g0 = node_gradient(&self.values, params.dx(), i);
        if frac == 0.0 {
            return g0;
        }
        let g1 = node_gradient(&self.values, params.dx(), i + 1);
        g0 * (1.0 - frac) + g1 * frac
    }
}

/// Node index left of `x` and the fractional offset towards the next node.
fn locate(params: &FieldParams, x: f64) -> (usize, f64) {
    let n = params.num_cells;
    let s = (params.clamp_position(x) - params.grid_min) / params.dx();
    let i = (s.floor() as usize).min(n - 1);
    if i == n - 1 {
        (i, 0.0)
    } else {
        (i, s - i as f64)
    }
}

fn node_gradient(values: &[f64], dx: f64, i: usize) -> f64 {
    let n = values.len();
    if i == 0 {
        (values[1] - values[0]) / dx
    } else if i == n - 1 {
        (values[n - 1] - values[n - 2]) / dx
    } else {
        (values[i + 1] - values[i - 1]) / (2.0 * dx)
    }
}

/// Gaussian source profile `S0 * exp(-(x - x_target)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecretionProfile {
    pub peak_rate: f64,
    pub target: f64,
    pub width: f64,
}

impl Default for SecretionProfile {
    fn default() -> Self {
        Self {
            peak_rate: 1.0,
            target: 4.0,
            width: 0.5,
        }
    }
}

impl SecretionProfile {
    pub fn validate(&self, prefix: &str, params: &FieldParams, issues: &mut Vec<ConfigIssue>) {
        if !(self.peak_rate.is_finite() && self.peak_rate >= 0.0) {
            issues.push(ConfigIssue::new(format!("{prefix}.peak_rate"), "must be finite and >= 0"));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            issues.push(ConfigIssue::new(format!("{prefix}.width"), "must be finite and > 0"));
        }
        if !(self.target >= params.grid_min && self.target <= params.grid_max) {
            issues.push(ConfigIssue::new(format!("{prefix}.target"), "must lie within the grid"));
        }
    }

    /// Adds `scale * profile(x)` to every node of `out`.
    pub fn deposit(&self, params: &FieldParams, scale: f64, out: &mut [f64]) {
        if scale == 0.0 || self.peak_rate == 0.0 {
            return;
        }
        for (i, v) in out.iter_mut().enumerate() {
            *v += scale * secretion_at(self, params.position(i));
        }
    }
}

pub fn secretion_at(profile: &SecretionProfile, x: f64) -> f64 {
    let d = x - profile.target;
    profile.peak_rate * (-(d * d) / (2.0 * profile.width * profile.width)).exp()
}

/// One white-noise increment per node: `sqrt(dt) * sigma * N(0, 1)`.
pub fn sample_noise<R: Rng + ?Sized>(params: &FieldParams, rng: &mut R) -> Vec<f64> {
    if params.noise_sigma == 0.0 {
        return vec![0.0; params.num_cells];
    }
    let scale = params.dt.sqrt() * params.noise_sigma;
    (0..params.num_cells)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        })
        .collect()
}

/// Result of one field step.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStep {
    pub field: ConcentrationField,
    /// Number of nodes that went negative and were clamped to zero.
    pub clamped: usize,
}

pub fn step_field<R: Rng + ?Sized>(
    field: &ConcentrationField,
    params: &FieldParams,
    sources: &[f64],
    rng: &mut R,
) -> Result<FieldStep> {
    let n = params.num_cells;
    if field.values.len() != n {
        return Err(Error::Dimension {
            context: "field values",
            expected: n,
            actual: field.values.len(),
        });
    }
    if sources.len() != n {
        return Err(Error::Dimension {
            context: "field sources",
            expected: n,
            actual: sources.len(),
        });
    }
    if field.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field values".into()));
    }
    if sources.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field sources".into()));
    }

    let dt = params.dt;
    let r = dt * params.diffusion / (params.dx() * params.dx());
    let diag = vec![1.0 + dt * params.decay + 2.0 * r; n];
    let mut lower = vec![-r; n - 1];
    let mut upper = vec![-r; n - 1];
    // Mirrored ghost nodes at both ends.
    upper[0] = -2.0 * r;
    lower[n - 2] = -2.0 * r;

    let noise = sample_noise(params, rng);
    let mut rhs: Vec<f64> = field
        .values
        .iter()
        .zip(sources)
        .zip(&noise)
        .map(|((c, s), eta)| c + dt * s + eta)
        .collect();

    tridiag::solve(&lower, &diag, &upper, &mut rhs)
        .expect("implicit diffusion-decay matrix is diagonally dominant");

    let mut clamped = 0;
    for v in rhs.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
            clamped += 1;
        }
    }

    Ok(FieldStep {
        field: ConcentrationField {
            values: rhs,
            time: field.time + dt,
        },
        clamped,
    })
}

/// Concentration gradient at a node: central in the interior, one-sided at the ends.
pub fn gradient_at(field: &ConcentrationField, params: &FieldParams, cell: usize) -> Result<f64> {
    let len = field.values.len();
    if cell >= len {
        return Err(Error::IndexOutOfRange { index: cell, len });
    }
    Ok(node_gradient(&field.values, params.dx(), cell))
}

/// Position of the highest node (lowest index wins ties; NaNs are skipped).
pub fn peak_position(field: &ConcentrationField, params: &FieldParams) -> Result<f64> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in field.values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| params.position(i))
        .ok_or_else(|| Error::NonFinite("field is entirely NaN".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn quiet(params: FieldParams) -> FieldParams {
        FieldParams {
            noise_sigma: 0.0,
            ..params
        }
    }

    fn no_rng() -> crate::rng::SimRng {
        stream(0, Stream::FieldNoise)
    }

    #[test]
    fn zero_field_is_a_fixed_point() {
        let p = quiet(FieldParams::default());
        let f = ConcentrationField::zeros(&p);
        let out = step_field(&f, &p, &vec![0.0; p.num_cells], &mut no_rng()).unwrap();
        assert!(out.field.values.iter().all(|&v| v == 0.0));
        assert_eq!(out.clamped, 0);
        assert!((out.field.time - p.dt).abs() < 1e-15);
    }

    #[test]
    fn uniform_decay_matches_implicit_formula() {
        let p = FieldParams {
            diffusion: 0.0,
            decay: 0.01,
            noise_sigma: 0.0,
            dt: 1.0,
            ..FieldParams::default()
        };
        let f = ConcentrationField::from_fn(&p, |_| 1.0);
        let out = step_field(&f, &p, &vec![0.0; p.num_cells], &mut no_rng()).unwrap();
        for v in out.field.values {
            assert!((v - 1.0 / 1.01).abs() < 1e-15);
            assert!((v - 0.990099).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_field_stays_uniform_under_diffusion() {
        let p = FieldParams {
            decay: 0.0,
            ..quiet(FieldParams::default())
        };
        let f = ConcentrationField::from_fn(&p, |_| 2.5);
        let out = step_field(&f, &p, &vec![0.0; p.num_cells], &mut no_rng()).unwrap();
        for v in out.field.values {
            assert!((v - 2.5).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = quiet(FieldParams::default());
        let mut f = ConcentrationField::zeros(&p);
        assert!(matches!(
            step_field(&f, &p, &[0.0; 3], &mut no_rng()),
            Err(Error::Dimension { .. })
        ));
        f.values[4] = f64::NAN;
        assert!(matches!(
            step_field(&f, &p, &vec![0.0; p.num_cells], &mut no_rng()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn negative_excursions_are_clamped_and_counted() {
        let p = FieldParams {
            noise_sigma: 5.0,
            ..FieldParams::default()
        };
        let f = ConcentrationField::zeros(&p);
        let mut rng = stream(3, Stream::FieldNoise);
        let out = step_field(&f, &p, &vec![0.0; p.num_cells], &mut rng).unwrap();
        assert!(out.clamped > 0);
        assert!(out.field.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn secretion_profile_values() {
        let prof = SecretionProfile {
            peak_rate: 1.0,
            target: 4.0,
            width: 1.0,
        };
        assert_eq!(secretion_at(&prof, 4.0), 1.0);
        assert!((secretion_at(&prof, 5.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((secretion_at(&prof, 5.0) - 0.60653).abs() < 1e-5);
        let off = SecretionProfile {
            peak_rate: 0.0,
            ..prof
        };
        assert_eq!(secretion_at(&off, 1.3), 0.0);
    }

    #[test]
    fn zero_sigma_noise_is_zero() {
        let p = quiet(FieldParams::default());
        let mut rng = stream(1, Stream::FieldNoise);
        assert!(sample_noise(&p, &mut rng).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_statistics() {
        let p = FieldParams {
            noise_sigma: 1.0,
            num_cells: 3,
            ..FieldParams::default()
        };
        let mut rng = stream(11, Stream::FieldNoise);
        let n = 100_000;
        let (mut s0, mut s00, mut s1, mut s11, mut s01) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = sample_noise(&p, &mut rng);
            s0 += z[0];
            s00 += z[0] * z[0];
            s1 += z[1];
            s11 += z[1] * z[1];
            s01 += z[0] * z[1];
        }
        let nf = n as f64;
        let m0 = s0 / nf;
        let v0 = s00 / nf - m0 * m0;
        let m1 = s1 / nf;
        let v1 = s11 / nf - m1 * m1;
        let rho = (s01 / nf - m0 * m1) / (v0 * v1).sqrt();
        assert!(m0.abs() < 3e-2 * p.dt.sqrt(), "mean {m0}");
        assert!((v0 / p.dt - 1.0).abs() < 0.05, "variance {v0}");
        assert!(rho.abs() < 0.02, "correlation {rho}");
    }

    #[test]
    fn gradients() {
        let p = FieldParams::default();
        let flat = ConcentrationField::from_fn(&p, |_| 3.0);
        for i in [0, 10, p.num_cells - 1] {
            assert_eq!(gradient_at(&flat, &p, i).unwrap(), 0.0);
        }
        let ramp = ConcentrationField::from_fn(&p, |x| x);
        assert!((gradient_at(&ramp, &p, 100).unwrap() - 1.0).abs() < 1e-12);
        assert!((gradient_at(&ramp, &p, 0).unwrap() - 1.0).abs() < 1e-12);

        let quad = ConcentrationField::from_fn(&p, |x| x * x);
        let dx = p.dx();
        let g = quad.gradient_at_position(&p, 2.0);
        assert!((g - 4.0).abs() < dx * dx, "{g}");

        assert!(matches!(
            gradient_at(&ramp, &p, p.num_cells),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn interpolated_reads_are_exact_on_linear_data() {
        let p = FieldParams::default();
        let ramp = ConcentrationField::from_fn(&p, |x| 2.0 * x - 1.0);
        for x in [0.0, 1.234, 5.0, 9.99, 10.0] {
            assert!((ramp.value_at(&p, x) - (2.0 * x - 1.0)).abs() < 1e-12);
            assert!((ramp.gradient_at_position(&p, x) - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn peak_position_rules() {
        let p = FieldParams::default();
        let mut f = ConcentrationField::zeros(&p);
        f.values[7] = 1.0;
        assert_eq!(peak_position(&f, &p).unwrap(), p.position(7));

        let flat = ConcentrationField::from_fn(&p, |_| 0.3);
        assert_eq!(peak_position(&flat, &p).unwrap(), p.grid_min);

        let prof = SecretionProfile::default();
        let snap = ConcentrationField::from_fn(&p, |x| secretion_at(&prof, x));
        assert!((peak_position(&snap, &p).unwrap() - 4.0).abs() <= p.dx());

        let nan = ConcentrationField {
            values: vec![f64::NAN; p.num_cells],
            time: 0.0,
        };
        assert!(peak_position(&nan, &p).is_err());
    }
}
