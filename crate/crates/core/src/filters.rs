//! Spectral filters on the normalized Laplacian spectrum `[0, 2]`.
//!
//! The encoder's filter is a piecewise-constant combination of Haar scaling
//! functions: at depth `J` the spectrum is cut into `K = 2^J` equal bins and
//! each bin carries one learnable gain. The decoder uses Wiener deconvolution
//! kernels of the heat kernel, approximated by polynomials in `L` so they can
//! be applied with sparse products only.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::graph::SparseSymMatrix;
use crate::linalg::{Matrix, SpectralDecomposition};
use crate::math;

/// Upper end of the normalized Laplacian spectrum.
pub const SPECTRUM_MAX: f64 = 2.0;

/// Slack allowed outside `[0, 2]` before a spectral value is rejected.
pub const SPECTRUM_TOLERANCE: f64 = 1e-8;

/// Grid size used to measure polynomial fit error.
pub const FIT_GRID_POINTS: usize = 1001;

fn check_spectral_value(lambda: f64) -> Result<f64> {
    if !(-SPECTRUM_TOLERANCE..=SPECTRUM_MAX + SPECTRUM_TOLERANCE).contains(&lambda) {
        return Err(Error::SpectrumOutOfRange(lambda));
    }
    Ok(lambda.clamp(0.0, SPECTRUM_MAX))
}

/// Values this close to a bin edge, in units of bin width, count as on it.
/// Eigenvalues such as `λ = 1` come out of the solver as `1 ± 1e-16`, and
/// the bin must not depend on the sign of the rounding.
pub const BIN_EDGE_TOLERANCE: f64 = 1e-10;

/// Index of the dyadic bin containing `lambda` among `bins` equal bins of
/// `[0, 2]`. `λ = 2` falls in the last bin.
pub fn bin_index(bins: usize, lambda: f64) -> Result<usize> {
    let lambda = check_spectral_value(lambda)?;
    let t = lambda * bins as f64 / SPECTRUM_MAX;
    let edge = math::floor(t + 0.5);
    let t = if math::abs(t - edge) < BIN_EDGE_TOLERANCE {
        edge
    } else {
        t
    };
    Ok((math::floor(t) as usize).min(bins - 1))
}

/// Haar scaling function `φ_{J,k}(λ)`: the indicator of
/// `[2k / 2^J, 2(k+1) / 2^J)`, unnormalized.
pub fn haar_scaling_value(depth: u32, k: usize, lambda: f64) -> Result<f64> {
    let bins = 1usize << depth;
    if k >= bins {
        return Err(Error::ShiftOutOfRange { k, bins });
    }
    Ok(if bin_index(bins, lambda)? == k { 1.0 } else { 0.0 })
}

/// Learnable Haar filter: one gain per dyadic spectral bin.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFilterBank {
    depth: u32,
    theta: Vec<f64>,
}

impl HaarFilterBank {
    pub fn new(depth: u32, theta: Vec<f64>) -> Result<Self> {
        if depth > 30 {
            return Err(Error::InvalidParameter(format!("haar depth {depth} too large")));
        }
        if theta.len() != 1usize << depth {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for depth {depth} (need {})",
                theta.len(),
                1usize << depth
            )));
        }
        Ok(Self { depth, theta })
    }

    /// All gains one: the identity filter.
    pub fn identity(depth: u32) -> Self {
        Self {
            depth,
            theta: vec![1.0; 1usize << depth],
        }
    }

    /// Bank with `bins` coefficients; `bins` must be a power of two.
    pub fn from_coefficients(theta: Vec<f64>) -> Result<Self> {
        let bins = theta.len();
        if bins == 0 || !bins.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "bin count {bins} is not a power of two"
            )));
        }
        Self::new(bins.trailing_zeros(), theta)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn bins(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// `g_c(λ) = Σ_k θ_k φ_{J,k}(λ)`; bins are disjoint so this is a lookup.
    pub fn response(&self, lambda: f64) -> Result<f64> {
        Ok(self.theta[bin_index(self.bins(), lambda)?])
    }

    /// Filter gain at each eigenvalue.
    pub fn gains(&self, eigenvalues: &[f64]) -> Result<Vec<f64>> {
        eigenvalues.iter().map(|&l| self.response(l)).collect()
    }
}

/// `g_c(λ)` for a Haar filter bank.
pub fn filter_response(bank: &HaarFilterBank, lambda: f64) -> Result<f64> {
    bank.response(lambda)
}

/// Bin of every eigenvalue.
pub fn bin_assignment(bins: usize, eigenvalues: &[f64]) -> Result<Vec<usize>> {
    eigenvalues.iter().map(|&l| bin_index(bins, l)).collect()
}

/// Multiscale diffusion operator `M = U G_c Uᵀ`.
pub fn diffusion_operator(decomp: &SpectralDecomposition, bank: &HaarFilterBank) -> Result<Matrix> {
    let gains = bank.gains(&decomp.eigenvalues)?;
    Ok(decomp.spectral_matrix(&gains))
}

/// Basis matrices `B_k = U diag(φ_{J,k}(λ_i)) Uᵀ`, so that
/// `M = Σ_k θ_k B_k` and `∂M/∂θ_k = B_k`.
pub fn diffusion_basis(decomp: &SpectralDecomposition, depth: u32) -> Result<Vec<Matrix>> {
    let bins = 1usize << depth;
    let assignment = bin_assignment(bins, &decomp.eigenvalues)?;
    Ok((0..bins)
        .map(|k| {
            let ind: Vec<f64> = assignment.iter().map(|&b| if b == k { 1.0 } else { 0.0 }).collect();
            decomp.spectral_matrix(&ind)
        })
        .collect())
}

/// Heat kernel `e^{−λ}`.
pub fn heat_kernel_response(lambda: f64) -> f64 {
    math::exp(-lambda)
}

/// Wiener deconvolution response of the heat kernel,
/// `e^{−λ} / (e^{−2λ} + aer)`. With `aer = 0` this is the exact inverse `e^{λ}`.
pub fn wiener_response(lambda: f64, aer: f64) -> f64 {
    if aer == 0.0 {
        return math::exp(lambda);
    }
    let g = math::exp(-lambda);
    g / (g * g + aer)
}

/// Polynomial in the Laplacian, `Σ_k c_k L^k`, with its fit error.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub coeffs: Vec<f64>,
    pub fit_error: f64,
}

/// Evaluates `Σ_k c_k λ^k` by Horner's rule.
pub fn eval_polynomial(coeffs: &[f64], lambda: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * lambda + c)
}

/// Interpolates `target` at `order + 1` Chebyshev nodes mapped to `[0, 2]` and
/// returns the monomial coefficients of the interpolant. The fit error is the
/// maximum deviation over a uniform grid of [`FIT_GRID_POINTS`] points.
pub fn fit_polynomial_kernel(target: impl Fn(f64) -> f64, order: usize) -> Result<PolynomialFit> {
    let n = order + 1;
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let t = math::cos(PI * (j as f64 + 0.5) / n as f64);
        let lambda = 1.0 + t;
        let v = target(lambda);
        if !v.is_finite() {
            return Err(Error::NonFiniteTarget(lambda));
        }
        values.push(v);
    }

    // Chebyshev series in t = λ − 1.
    let mut cheb = vec![0.0; n];
    for (k, a) in cheb.iter_mut().enumerate() {
        let s: f64 = values
            .iter()
            .enumerate()
            .map(|(j, v)| v * math::cos(PI * k as f64 * (j as f64 + 0.5) / n as f64))
            .sum();
        *a = 2.0 * s / n as f64;
    }
    cheb[0] *= 0.5;

    // Monomials in t via T_{k+1} = 2t T_k − T_{k−1}.
    let mut in_t = vec![0.0; n];
    let mut t_prev = vec![0.0; n];
    let mut t_cur = vec![0.0; n];
    t_prev[0] = 1.0;
    if n > 1 {
        t_cur[1] = 1.0;
    }
    for (k, &a) in cheb.iter().enumerate() {
        let basis = match k {
            0 => &t_prev,
            1 => &t_cur,
            _ => {
                let mut next = vec![0.0; n];
                for i in 0..n - 1 {
                    next[i + 1] += 2.0 * t_cur[i];
                }
                for i in 0..n {
                    next[i] -= t_prev[i];
                }
                t_prev = core::mem::replace(&mut t_cur, next);
                &t_cur
            }
        };
        for (c, b) in in_t.iter_mut().zip(basis) {
            *c += a * b;
        }
    }

    // Substitute t = λ − 1: (λ − 1)^m = Σ_i C(m, i) λ^i (−1)^{m−i}.
    let mut coeffs = vec![0.0; n];
    let mut binom = vec![0.0; n];
    for (m, &c) in in_t.iter().enumerate() {
        binom[m] = 1.0;
        for i in (1..m).rev() {
            binom[i] += binom[i - 1];
        }
        for (i, &b) in binom[..=m].iter().enumerate() {
            let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
            coeffs[i] += c * b * sign;
        }
    }

    let mut fit_error: f64 = 0.0;
    for i in 0..FIT_GRID_POINTS {
        let lambda = SPECTRUM_MAX * i as f64 / (FIT_GRID_POINTS - 1) as f64;
        let err = math::abs(eval_polynomial(&coeffs, lambda) - target(lambda));
        fit_error = fit_error.max(err);
    }
    Ok(PolynomialFit { coeffs, fit_error })
}

/// `Σ_k c_k L^k H` by Horner iteration; `L^k` is never formed.
pub fn apply_polynomial_kernel(l: &SparseSymMatrix, coeffs: &[f64], h: &Matrix) -> Result<Matrix> {
    if h.rows() != l.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel on {} nodes applied to {} rows",
            l.dim(),
            h.rows()
        )));
    }
    let Some((&top, rest)) = coeffs.split_last() else {
        return Ok(Matrix::zeros(h.rows(), h.cols()));
    };
    let mut acc = h.clone();
    acc.scale(top);
    let mut tmp = Matrix::zeros(h.rows(), h.cols());
    for &c in rest.iter().rev() {
        l.mul_dense_into(&acc, &mut tmp)?;
        core::mem::swap(&mut acc, &mut tmp);
        for (a, &x) in acc.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *a += c * x;
        }
    }
    Ok(acc)
}

/// Polynomial approximation of the heat-kernel Wiener response for one
/// augmentation-to-energy ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerKernel {
    pub aer: f64,
    pub order: usize,
    pub coeffs: Vec<f64>,
    pub fit_error: f64,
}

impl WienerKernel {
    pub fn fit(aer: f64, order: usize) -> Result<Self> {
        if !aer.is_finite() || aer < 0.0 {
            return Err(Error::InvalidParameter(format!("aer must be >= 0, got {aer}")));
        }
        let PolynomialFit { coeffs, fit_error } = fit_polynomial_kernel(|l| wiener_response(l, aer), order)?;
        Ok(Self {
            aer,
            order,
            coeffs,
            fit_error,
        })
    }

    /// `D_γ H`
    pub fn apply(&self, l: &SparseSymMatrix, h: &Matrix) -> Result<Matrix> {
        apply_polynomial_kernel(l, &self.coeffs, h)
    }

    pub fn response(&self, lambda: f64) -> f64 {
        eval_polynomial(&self.coeffs, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_bins() {
        for l in [0.0, 0.7, 1.999, 2.0] {
            assert_eq!(haar_scaling_value(0, 0, l).unwrap(), 1.0);
        }
        assert_eq!(haar_scaling_value(2, 1, 0.75).unwrap(), 1.0);
        assert_eq!(haar_scaling_value(2, 1, 1.0).unwrap(), 0.0);
        assert_eq!(haar_scaling_value(3, 7, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn haar_errors_and_clamping() {
        assert_eq!(
            haar_scaling_value(2, 4, 0.5),
            Err(Error::ShiftOutOfRange { k: 4, bins: 4 })
        );
        assert!(matches!(
            haar_scaling_value(2, 0, -0.1),
            Err(Error::SpectrumOutOfRange(_))
        ));
        assert!(matches!(
            haar_scaling_value(2, 3, 2.01),
            Err(Error::SpectrumOutOfRange(_))
        ));
        assert_eq!(haar_scaling_value(2, 0, -5e-9).unwrap(), 1.0);
        assert_eq!(haar_scaling_value(2, 3, 2.0 + 5e-9).unwrap(), 1.0);
    }

    #[test]
    fn response_lookup() {
        let bank = HaarFilterBank::new(1, vec![3.0, -2.0]).unwrap();
        assert_eq!(filter_response(&bank, 0.3).unwrap(), 3.0);
        assert_eq!(filter_response(&bank, 1.7).unwrap(), -2.0);
        let ones = HaarFilterBank::identity(5);
        assert!((0..=200).all(|i| ones.response(i as f64 / 100.0).unwrap() == 1.0));
        assert!(HaarFilterBank::new(2, vec![1.0; 3]).is_err());
        assert!(HaarFilterBank::from_coefficients(vec![1.0; 6]).is_err());
        assert_eq!(HaarFilterBank::from_coefficients(vec![1.0; 8]).unwrap().depth(), 3);
    }

    #[test]
    fn rounding_at_bin_edges_is_absorbed() {
        assert_eq!(bin_index(8, 1.0).unwrap(), 4);
        assert_eq!(bin_index(8, 1.0 - 1e-15).unwrap(), 4);
        assert_eq!(bin_index(8, 1.0 + 1e-15).unwrap(), 4);
        assert_eq!(bin_index(8, 1.0 - 1e-6).unwrap(), 3);
        assert_eq!(bin_index(8, 2.0 - 1e-15).unwrap(), 7);
        assert_eq!(bin_index(8, -1e-15).unwrap(), 0);
    }

    #[test]
    fn haar_approximates_heat_kernel() {
        // θ_k = exp(−midpoint) at J = 4; the bound is half a bin times max |slope|.
        let bins = 16;
        let theta = (0..bins)
            .map(|k| (-(2.0 * (k as f64 + 0.5) / bins as f64)).exp())
            .collect();
        let bank = HaarFilterBank::new(4, theta).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=100_000 {
            let l = 2.0 * i as f64 / 100_000.0;
            worst = worst.max((bank.response(l).unwrap() - (-l).exp()).abs());
        }
        assert!(worst <= 0.0625, "{worst}");
    }

    #[test]
    fn heat_and_wiener_values() {
        assert_eq!(heat_kernel_response(0.0), 1.0);
        assert!((heat_kernel_response(2.0) - 0.1353352832366127).abs() < 1e-15);
        for l in [0.0, 0.4, 1.3, 2.0] {
            assert_eq!(wiener_response(l, 0.0), libm::exp(l));
            assert!((libm::exp(l) * heat_kernel_response(l) - 1.0).abs() < 1e-15);
        }
        assert_eq!(wiener_response(0.0, 1.0), 0.5);
        let expected = (-1.0f64).exp() / ((-2.0f64).exp() + 0.1);
        assert!((wiener_response(1.0, 0.1) - expected).abs() < 1e-15);
        assert!((wiener_response(1.0, 0.1) - 1.563214).abs() < 1e-6);
    }

    #[test]
    fn polynomial_targets_are_recovered() {
        let target = [0.5, -1.0, 0.25, 2.0, -0.125];
        let fit = fit_polynomial_kernel(|l| eval_polynomial(&target, l), 6).unwrap();
        for (i, c) in fit.coeffs.iter().enumerate() {
            let want = target.get(i).copied().unwrap_or(0.0);
            assert!((c - want).abs() < 1e-10, "coefficient {i}: {c} vs {want}");
        }
        assert!(fit.fit_error < 1e-10);

        let fit = fit_polynomial_kernel(|_| 3.25, 10).unwrap();
        assert!((fit.coeffs[0] - 3.25).abs() < 1e-12);
        assert!(fit.coeffs[1..].iter().all(|c| c.abs() < 1e-9), "{:?}", fit.coeffs);
    }

    #[test]
    fn exponential_fit_quality() {
        let fit = fit_polynomial_kernel(f64::exp, 10).unwrap();
        assert!(fit.fit_error < 1e-6, "{}", fit.fit_error);
        let kernel = WienerKernel::fit(0.0, 10).unwrap();
        assert_eq!(kernel.coeffs.len(), 11);
        assert!(kernel.fit_error < 1e-6);
    }

    #[test]
    fn non_finite_target_rejected() {
        let err = fit_polynomial_kernel(|l| 1.0 / (l - l), 3).unwrap_err();
        assert!(matches!(err, Error::NonFiniteTarget(_)));
    }

    #[test]
    fn polynomial_application_trivial_cases() {
        let l = SparseSymMatrix::from_triplets(
            3,
            vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (0, 1, -0.5), (1, 0, -0.5)],
        )
        .unwrap();
        let h = Matrix::from_fn(3, 2, |i, j| (i + 2 * j) as f64 - 1.5);
        assert_eq!(apply_polynomial_kernel(&l, &[1.0], &h).unwrap(), h);
        assert_eq!(
            apply_polynomial_kernel(&l, &[0.0, 1.0], &h).unwrap(),
            l.mul_dense(&h).unwrap()
        );
        assert!(apply_polynomial_kernel(&l, &[1.0], &Matrix::zeros(2, 2)).is_err());
    }
}
