//! Small dense linear-algebra helpers shared by the readout solvers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `HᵀH + shift·I`.
pub fn shifted_gram(h: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let mut g = h.tr_mul(h);
    for i in 0..g.nrows() {
        g[(i, i)] += shift;
    }
    g
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    m.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical(format!("{n}x{n} normal matrix not positive definite")))
}

/// Ridge readout `W = Eᵀ H (HᵀH + λI)⁻¹`, with `H` holding one feature row per
/// sample and `E` one target row per sample. Returns `W` as `targets × features`.
pub fn ridge(h: &DMatrix<f64>, e: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    ridge_from_moments(&h.tr_mul(h), &e.tr_mul(h), lambda)
}

/// Ridge readout from accumulated moments `HᵀH` and `EᵀH`.
pub fn ridge_from_moments(
    gram: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    let mut g = gram.clone();
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    let n = g.nrows();
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Numerical(format!("{n}x{n} ridge system not positive definite")))?;
    // W·G = C  <=>  G·Wᵀ = Cᵀ (G symmetric)
    Ok(chol.solve(&cross.transpose()).transpose())
}

/// Pearson correlation squared, `Cov²(a, b) / (Var a · Var b)`. Zero when either
/// series is constant.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.len() < 2 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab * sab / (saa * sbb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ridge_recovers_exact_linear_map() {
        let h = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, -1.0]);
        let w_true = DMatrix::from_row_slice(1, 2, &[0.5, -2.0]);
        let e = &h * w_true.transpose();
        let w = ridge(&h, &e, 1e-12).unwrap();
        assert_relative_eq!(w, w_true, epsilon = 1e-9);
    }

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let a = [1.0, 2.0, 4.0, 3.0];
        let b: Vec<f64> = a.iter().map(|x| -3.0 * x + 1.0).collect();
        assert_relative_eq!(squared_correlation(&a, &b), 1.0, epsilon = 1e-12);
        assert_eq!(squared_correlation(&a, &[1.0; 4]), 0.0);
    }
}
