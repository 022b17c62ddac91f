//! Small dense-vector helpers shared by the integrators.

/// `z + a * v`
pub(crate) fn add_scaled(z: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    z.iter().zip(v).map(|(zi, vi)| zi + a * vi).collect()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
