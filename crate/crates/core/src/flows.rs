//! Velocity fields `v(z, t)` on the unit time interval.
//!
//! Every field in the catalog is analytic. Most carry a closed-form flow map
//! used as ground truth; the rest are certified against [`reference_solve`],
//! a fine-grid classical fourth-order Runge-Kutta integration.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::vecops::add_scaled;

/// Slack allowed on the `[0, 1]` time domain to absorb rounding in grid
/// construction.
pub const TIME_TOLERANCE: f64 = 1e-12;

/// A deterministic velocity field `v: R^d x [0, 1] -> R^d`.
///
/// Implementations must be pure: the same `(z, t)` always produces the same
/// bits. Callers go through [`evaluate`], which validates the inputs before
/// dispatching to [`VelocityField::velocity`].
pub trait VelocityField {
    /// Catalog identifier.
    fn name(&self) -> &str;

    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Writes `v(z, t)` into `out`. `z` and `out` both have length `dim()`.
    fn velocity(&self, z: &[f64], t: f64, out: &mut [f64]);

    /// Lipschitz constant in `z`, when one is known. Metadata only.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }

    /// Closed-form flow map: the state at `t_end` of the trajectory passing
    /// through `z` at `t_start`. `None` when no closed form exists.
    fn exact(&self, _z: &[f64], _t_start: f64, _t_end: f64) -> Option<Vec<f64>> {
        None
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && (-TIME_TOLERANCE..=1.0 + TIME_TOLERANCE).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain { t })
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Evaluates `field` at `(z, t)` after checking the dimension and the time
/// domain. Performs no evaluation counting.
pub fn evaluate<F: VelocityField + ?Sized>(field: &F, z: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(field.dim(), z.len())?;
    check_time(t)?;
    let mut out = vec![0.0; field.dim()];
    field.velocity(z, t, &mut out);
    Ok(out)
}

/// Integrates `field` from `t_start` to `t_end` with `oracle_steps` classical
/// RK4 steps on a uniform grid. Serves as ground truth for fields without a
/// closed form; use at least 1000 times the step count under test.
pub fn reference_solve<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    t_start: f64,
    t_end: f64,
    oracle_steps: usize,
) -> Result<Vec<f64>> {
    check_dim(field.dim(), z_start.len())?;
    check_time(t_start)?;
    check_time(t_end)?;
    if oracle_steps == 0 {
        return Err(Error::Config("oracle_steps must be positive".into()));
    }
    let d = field.dim();
    let span = t_end - t_start;
    let mut z = z_start.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for i in 0..oracle_steps {
        let t = t_start + span * (i as f64 / oracle_steps as f64);
        let t_next = if i + 1 == oracle_steps {
            t_end
        } else {
            t_start + span * ((i + 1) as f64 / oracle_steps as f64)
        };
        let h = t_next - t;
        let t_mid = t + 0.5 * h;
        field.velocity(&z, t, &mut k1);
        field.velocity(&add_scaled(&z, 0.5 * h, &k1), t_mid, &mut k2);
        field.velocity(&add_scaled(&z, 0.5 * h, &k2), t_mid, &mut k3);
        field.velocity(&add_scaled(&z, h, &k3), t_next, &mut k4);
        for j in 0..d {
            z[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    Ok(z)
}

/// Ground truth for a trajectory segment: the closed form when the field has
/// one, otherwise [`reference_solve`] with `oracle_steps`.
pub fn ground_truth<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    t_start: f64,
    t_end: f64,
    oracle_steps: usize,
) -> Result<Vec<f64>> {
    check_dim(field.dim(), z_start.len())?;
    match field.exact(z_start, t_start, t_end) {
        Some(z) => Ok(z),
        None => reference_solve(field, z_start, t_start, t_end, oracle_steps),
    }
}

/// `v(z, t) = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    name: String,
    c: Vec<f64>,
}

impl Constant {
    pub fn new(c: Vec<f64>) -> Self {
        Self {
            name: "constant".into(),
            c,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            name: "zero".into(),
            c: vec![0.0; dim],
        }
    }

    pub fn value(&self) -> &[f64] {
        &self.c
    }
}

impl VelocityField for Constant {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.c.len()
    }

    fn velocity(&self, _z: &[f64], _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.c);
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(0.0)
    }

    fn exact(&self, z: &[f64], t_start: f64, t_end: f64) -> Option<Vec<f64>> {
        Some(add_scaled(z, t_end - t_start, &self.c))
    }
}

/// Endpoints of a straight rectified-flow path `z_t = (1 - t) z0 + t z1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedPair {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
}

impl RectifiedPair {
    pub fn new(z0: Vec<f64>, z1: Vec<f64>) -> Result<Self> {
        check_dim(z0.len(), z1.len())?;
        Ok(Self { z0, z1 })
    }

    /// The constant-difference field `v = z1 - z0` driving the straight path.
    pub fn field(&self) -> Constant {
        let c = self.z1.iter().zip(&self.z0).map(|(a, b)| a - b).collect();
        Constant {
            name: "rectified".into(),
            c,
        }
    }
}

/// Linear decay `v(z, t) = -lambda z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDecay {
    pub dim: usize,
    pub lambda: f64,
}

impl LinearDecay {
    pub fn new(dim: usize) -> Self {
        Self { dim, lambda: 1.0 }
    }
}

impl VelocityField for LinearDecay {
    fn name(&self) -> &str {
        "decay"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, z: &[f64], _t: f64, out: &mut [f64]) {
        for (o, zi) in out.iter_mut().zip(z) {
            *o = -self.lambda * zi;
        }
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.lambda.abs())
    }

    fn exact(&self, z: &[f64], t_start: f64, t_end: f64) -> Option<Vec<f64>> {
        let g = (-self.lambda * (t_end - t_start)).exp();
        Some(z.iter().map(|zi| g * zi).collect())
    }
}

/// Planar rotation applied to consecutive coordinate pairs:
/// `(v_{2k}, v_{2k+1}) = omega (-z_{2k+1}, z_{2k})`. Dimension must be even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    dim: usize,
    pub omega: f64,
}

impl Rotation {
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_rate(dim, 1.0)
    }

    pub fn with_rate(dim: usize, omega: f64) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "rotation field needs an even positive dimension, got {dim}"
            )));
        }
        Ok(Self { dim, omega })
    }
}

impl VelocityField for Rotation {
    fn name(&self) -> &str {
        "rotation"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, z: &[f64], _t: f64, out: &mut [f64]) {
        for (o, p) in out.chunks_exact_mut(2).zip(z.chunks_exact(2)) {
            o[0] = -self.omega * p[1];
            o[1] = self.omega * p[0];
        }
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.omega.abs())
    }

    fn exact(&self, z: &[f64], t_start: f64, t_end: f64) -> Option<Vec<f64>> {
        let (s, c) = (self.omega * (t_end - t_start)).sin_cos();
        let mut out = vec![0.0; z.len()];
        for (o, p) in out.chunks_exact_mut(2).zip(z.chunks_exact(2)) {
            o[0] = c * p[0] - s * p[1];
            o[1] = s * p[0] + c * p[1];
        }
        Some(out)
    }
}

/// Time-modulated linear field `v(z, t) = sin(2 pi t) z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinScaled {
    pub dim: usize,
}

impl VelocityField for SinScaled {
    fn name(&self) -> &str {
        "sin"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, z: &[f64], t: f64, out: &mut [f64]) {
        let s = (2.0 * PI * t).sin();
        for (o, zi) in out.iter_mut().zip(z) {
            *o = s * zi;
        }
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }

    fn exact(&self, z: &[f64], t_start: f64, t_end: f64) -> Option<Vec<f64>> {
        let g = (((2.0 * PI * t_start).cos() - (2.0 * PI * t_end).cos()) / (2.0 * PI)).exp();
        Some(z.iter().map(|zi| g * zi).collect())
    }
}

/// Smooth nonlinear stand-in for a learned field:
/// `v(z, t) = A tanh(z) + b cos(2 pi t)`, with `A` a dense `d x d` matrix.
/// No closed form; ground truth comes from [`reference_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Surrogate {
    /// `A = 0.5 I`, `b = 0.3 * ones`.
    pub fn new(dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 0.5;
        }
        Self {
            dim,
            a,
            b: vec![0.3; dim],
        }
    }

    /// `a` is row-major `d x d`, `b` has length `d`.
    pub fn with_params(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let dim = b.len();
        check_dim(dim * dim, a.len())?;
        Ok(Self { dim, a, b })
    }
}

impl VelocityField for Surrogate {
    fn name(&self) -> &str {
        "surrogate"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn velocity(&self, z: &[f64], t: f64, out: &mut [f64]) {
        let c = (2.0 * PI * t).cos();
        let th: Vec<f64> = z.iter().map(|x| x.tanh()).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.a[i * self.dim..(i + 1) * self.dim];
            *o = row.iter().zip(&th).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * c;
        }
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        // |tanh'| <= 1, so the Frobenius norm of A bounds the L2 Lipschitz constant.
        Some(self.a.iter().map(|x| x * x).sum::<f64>().sqrt())
    }
}

/// Names accepted by [`by_name`].
pub const CATALOG: &[&str] = &[
    "constant",
    "zero",
    "decay",
    "rotation",
    "sin",
    "surrogate",
    "rectified",
];

/// Builds a catalog field with its default parameters.
///
/// `constant` uses `c = 2` in every coordinate; `rectified` joins
/// `z0 = 0` to `z1 = (1, 3, 5, ...)`.
pub fn by_name(name: &str, dim: usize) -> Result<Box<dyn VelocityField + Send + Sync>> {
    if dim == 0 {
        return Err(Error::Config("field dimension must be positive".into()));
    }
    Ok(match name {
        "constant" => Box::new(Constant::new(vec![2.0; dim])),
        "zero" => Box::new(Constant::zero(dim)),
        "decay" => Box::new(LinearDecay::new(dim)),
        "rotation" => Box::new(Rotation::new(dim)?),
        "sin" => Box::new(SinScaled { dim }),
        "surrogate" => Box::new(Surrogate::new(dim)),
        "rectified" => {
            let z1 = (0..dim).map(|k| 1.0 + 2.0 * k as f64).collect();
            Box::new(RectifiedPair::new(vec![0.0; dim], z1)?.field())
        }
        other => return Err(Error::UnknownField(other.to_string())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let c = Constant::new(vec![2.0]);
        assert_eq!(evaluate(&c, &[1.0], 0.3).unwrap(), vec![2.0]);

        let decay = LinearDecay::new(2);
        assert_eq!(
            evaluate(&decay, &[1.0, -2.0], 0.5).unwrap(),
            vec![-1.0, 2.0]
        );

        let pair = RectifiedPair::new(vec![0.0, 0.0], vec![1.0, 3.0]).unwrap();
        let f = pair.field();
        for (z, t) in [([5.0, -1.0], 0.0), ([0.1, 0.2], 0.77), ([9.0, 9.0], 1.0)] {
            assert_eq!(evaluate(&f, &z, t).unwrap(), vec![1.0, 3.0]);
        }
    }

    #[test]
    fn evaluate_rejects_bad_inputs() {
        let decay = LinearDecay::new(2);
        assert!(matches!(
            evaluate(&decay, &[1.0], 0.5),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            evaluate(&decay, &[1.0, 1.0], 1.5),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            evaluate(&decay, &[1.0, 1.0], -0.1),
            Err(Error::Domain { .. })
        ));
        assert!(matches!(
            evaluate(&decay, &[1.0, 1.0], f64::NAN),
            Err(Error::Domain { .. })
        ));
        // endpoint slack
        assert!(evaluate(&decay, &[1.0, 1.0], 1.0 + 1e-13).is_ok());
    }

    #[test]
    fn reference_solve_decay_matches_exp() {
        let z = reference_solve(&LinearDecay::new(1), &[1.0], 0.0, 1.0, 100_000).unwrap();
        assert!((z[0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn reference_solve_constant_is_exact() {
        for steps in [1, 7, 1000] {
            let z = reference_solve(&Constant::new(vec![2.0]), &[1.0], 0.0, 1.0, steps).unwrap();
            // only rounding accumulates
            let tol = 4.0 * f64::EPSILON * 3.0 * steps as f64;
            assert!((z[0] - 3.0).abs() <= tol, "steps={steps}: {}", z[0]);
        }
    }

    #[test]
    fn reference_solve_quarter_turn() {
        let rot = Rotation::with_rate(2, PI / 2.0).unwrap();
        let z = reference_solve(&rot, &[1.0, 0.0], 0.0, 1.0, 100_000).unwrap();
        assert!(z[0].abs() < 1e-12 && (z[1] - 1.0).abs() < 1e-12, "{z:?}");

        let unit = Rotation::new(2).unwrap();
        let z = reference_solve(&unit, &[1.0, 0.0], 0.0, 1.0, 100_000).unwrap();
        assert!((z[0] - 1f64.cos()).abs() < 1e-12 && (z[1] - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn reference_solve_agrees_with_closed_forms() {
        for name in ["constant", "zero", "decay", "rotation", "sin", "rectified"] {
            for dim in [2, 8] {
                let f = by_name(name, dim).unwrap();
                let z0: Vec<f64> = (0..dim).map(|k| 0.3 - 0.17 * k as f64).collect();
                for (a, b) in [(0.0, 1.0), (1.0, 0.0), (0.2, 0.7)] {
                    let exact = f.exact(&z0, a, b).unwrap();
                    let approx = reference_solve(f.as_ref(), &z0, a, b, 100_000).unwrap();
                    let scale = crate::vecops::l2_norm(&exact).max(1.0);
                    let err = crate::vecops::l2_distance(&exact, &approx) / scale;
                    assert!(err < 1e-10, "{name} d={dim} [{a},{b}]: {err:e}");
                }
            }
        }
    }

    #[test]
    fn exact_is_identity_on_zero_span() {
        for name in ["constant", "decay", "rotation", "sin", "rectified"] {
            let f = by_name(name, 4).unwrap();
            let z = [0.1, -0.4, 2.0, 7.5];
            for t in [0.0, 0.25, 1.0] {
                assert_eq!(f.exact(&z, t, t).unwrap(), z.to_vec(), "{name}");
            }
        }
        assert!(by_name("surrogate", 3)
            .unwrap()
            .exact(&[0.0; 3], 0.0, 1.0)
            .is_none());
    }

    #[test]
    fn catalog_lookup() {
        for name in CATALOG {
            let dim = 4;
            let f = by_name(name, dim).unwrap();
            assert_eq!(f.name(), *name);
            assert_eq!(f.dim(), dim);
        }
        assert!(matches!(
            by_name("conditional", 2),
            Err(Error::UnknownField(_))
        ));
        assert!(by_name("rotation", 3).is_err());
        assert!(by_name("decay", 0).is_err());
    }

    #[test]
    fn surrogate_is_deterministic_and_nonlinear() {
        let s = Surrogate::new(3);
        let z = [0.4, -1.2, 3.0];
        let a = evaluate(&s, &z, 0.37).unwrap();
        let b = evaluate(&s, &z, 0.37).unwrap();
        assert_eq!(
            a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
        let expected0 = 0.5 * 0.4f64.tanh() + 0.3 * (2.0 * PI * 0.37).cos();
        assert!((a[0] - expected0).abs() < 1e-15);
        assert_eq!(s.lipschitz_bound(), Some((3.0f64 * 0.25).sqrt()));
    }
}
