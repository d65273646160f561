use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Learnable Haar-wavelet spectral filter.
    Wavelet,
    /// Normalized adjacency propagation (ablation).
    Gcn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrDecoderKind {
    /// Multi-channel Wiener graph deconvolution.
    Gdn,
    /// Per-node MLP (ablation).
    Mlp,
}

impl EncoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Wavelet => "wavelet",
            Self::Gcn => "gcn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "wavelet" => Some(Self::Wavelet),
            "gcn" => Some(Self::Gcn),
            _ => None,
        }
    }
}

impl AttrDecoderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gdn => "gdn",
            Self::Mlp => "mlp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gdn" => Some(Self::Gdn),
            "mlp" => Some(Self::Mlp),
            _ => None,
        }
    }
}

/// Training and model configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Weight of the degree reconstruction loss.
    pub lambda_d: f64,
    /// Weight of the neighborhood KL loss.
    pub lambda_n: f64,
    /// Weight of the attribute reconstruction loss.
    pub lambda_x: f64,
    /// Number of Haar bins `K = 2^J`.
    pub bins: usize,
    /// Latent noise magnitude `β`.
    pub noise_scale: f64,
    /// Neighbor sample cap `S`.
    pub sample_size: usize,
    /// Encoder depth; the deconvolution decoder uses the same depth.
    pub depth: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Covariance regularizer added to empirical neighborhood covariances.
    pub cov_eps: f64,
    /// Degree of the polynomial Wiener kernel approximation.
    pub remez_order: usize,
    /// One augmentation-to-energy ratio per deconvolution channel.
    pub aer_grid: Vec<f64>,
    pub seed: u64,
    pub encoder: EncoderKind,
    pub attr_decoder: AttrDecoderKind,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lambda_d: 0.0,
            lambda_n: 0.4,
            lambda_x: 3.0,
            bins: 16,
            noise_scale: 0.5,
            sample_size: 20,
            depth: 2,
            hidden: 32,
            lr: 0.005,
            epochs: 200,
            cov_eps: 1e-4,
            remez_order: 10,
            aer_grid: vec![0.001, 0.01, 0.1, 1.0],
            seed: 0,
            encoder: EncoderKind::Wavelet,
            attr_decoder: AttrDecoderKind::Gdn,
        }
    }
}

impl HyperParams {
    /// Number of deconvolution channels `Q`.
    pub fn channels(&self) -> usize {
        self.aer_grid.len()
    }

    /// Haar depth `J` with `bins = 2^J`.
    pub fn haar_depth(&self) -> u32 {
        self.bins.trailing_zeros()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        for (name, v) in [
            ("lambda_d", self.lambda_d),
            ("lambda_n", self.lambda_n),
            ("lambda_x", self.lambda_x),
            ("noise_scale", self.noise_scale),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if self.bins == 0 || !self.bins.is_power_of_two() {
            return bad(format!("bins must be a power of two, got {}", self.bins));
        }
        if self.sample_size == 0 {
            return bad("sample_size must be at least 1".into());
        }
        if self.depth == 0 || self.hidden == 0 {
            return bad("depth and hidden must be positive".into());
        }
        if !self.lr.is_finite() || self.lr <= 0.0 {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.cov_eps.is_nan() || self.cov_eps <= 0.0 {
            return bad(format!("cov_eps must be positive, got {}", self.cov_eps));
        }
        if self.attr_decoder == AttrDecoderKind::Gdn && self.aer_grid.is_empty() {
            return bad("aer_grid needs at least one channel".into());
        }
        if let Some(a) = self.aer_grid.iter().find(|a| !a.is_finite() || **a <= 0.0) {
            return bad(format!("aer values must be positive, got {a}"));
        }
        Ok(())
    }

    /// Grid values explored for each tunable axis.
    pub fn default_grid() -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("lambda_n", vec![0.2, 0.4, 0.6, 2.0, 3.0, 8.0, 9.0]),
            ("lambda_x", vec![0.3, 0.4, 0.6, 1.0, 3.0, 4.0, 6.0, 10.0]),
            ("lambda_d", vec![0.0, 0.05, 0.15, 0.25]),
            ("bins", vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]),
            ("noise_scale", vec![0.3, 0.5, 0.7, 1.0, 1.5]),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let h = HyperParams::default();
        h.validate().unwrap();
        assert_eq!(h.channels(), 4);
        assert_eq!(h.haar_depth(), 4);
    }

    #[test]
    fn invalid_values_rejected() {
        for h in [
            HyperParams {
                bins: 12,
                ..HyperParams::default()
            },
            HyperParams {
                sample_size: 0,
                ..HyperParams::default()
            },
            HyperParams {
                lr: 0.0,
                ..HyperParams::default()
            },
            HyperParams {
                lambda_n: -1.0,
                ..HyperParams::default()
            },
            HyperParams {
                cov_eps: f64::NAN,
                ..HyperParams::default()
            },
        ] {
            assert!(h.validate().is_err());
        }
    }

    #[test]
    fn grid_sizes() {
        let g = HyperParams::default_grid();
        let cells: usize = g.iter().map(|(_, v)| v.len()).product();
        assert_eq!(cells, 7 * 8 * 4 * 8 * 5);
    }
}
