//! Forward model: wavelet encoder, structure and neighbor decoders, latent
//! noise, Wiener deconvolution attribute decoder and the loss terms.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filters::{HaarFilterBank, WienerKernel};
use crate::graph::{normalized_adjacency, Graph, SparseSymMatrix};
use crate::hyper::{AttrDecoderKind, EncoderKind, HyperParams};
use crate::linalg::{cholesky, Matrix, SpectralDecomposition};
use crate::math;
use crate::rng::Rng;

/// Bound applied to the log-variance head before exponentiation.
pub const LOG_SIGMA_CLAMP: f64 = 30.0;

#[inline]
pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let a = math::sqrt(6.0 / (rows + cols) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
}

fn add_bias(m: &mut Matrix, bias: &[f64]) {
    for i in 0..m.rows() {
        for (x, b) in m.row_mut(i).iter_mut().zip(bias) {
            *x += b;
        }
    }
}

/// Two-layer perceptron `input → hidden (ReLU) → output`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Cached activations of an [`Mlp`] batch forward pass.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    pub pre_hidden: Matrix,
    pub hidden: Matrix,
    pub output: Matrix,
}

impl Mlp {
    pub fn init(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(input, hidden, rng),
            b1: vec![0.0; hidden],
            w2: glorot(hidden, output, rng),
            b2: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Matrix::zeros(input, hidden),
            b1: vec![0.0; hidden],
            w2: Matrix::zeros(hidden, output),
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    /// Forward pass on every row of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<MlpTrace> {
        let mut pre_hidden = x.matmul(&self.w1)?;
        add_bias(&mut pre_hidden, &self.b1);
        let mut hidden = pre_hidden.clone();
        hidden.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        let mut output = hidden.matmul(&self.w2)?;
        add_bias(&mut output, &self.b2);
        Ok(MlpTrace {
            pre_hidden,
            hidden,
            output,
        })
    }

    /// Forward pass on a single input vector.
    pub fn forward_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::new(1, x.len(), x.to_vec())?;
        Ok(self.forward(&m)?.output.into_vec())
    }

    /// Accumulates parameter gradients into `grad` and returns `∂/∂x`.
    pub fn backward(&self, x: &Matrix, trace: &MlpTrace, d_out: &Matrix, grad: &mut Mlp) -> Result<Matrix> {
        grad.w2.add_assign(&trace.hidden.t_matmul(d_out)?)?;
        for i in 0..d_out.rows() {
            for (g, d) in grad.b2.iter_mut().zip(d_out.row(i)) {
                *g += d;
            }
        }
        let mut d_hidden = d_out.matmul_t(&self.w2)?;
        for (d, &z) in d_hidden.as_mut_slice().iter_mut().zip(trace.pre_hidden.as_slice()) {
            if z <= 0.0 {
                *d = 0.0;
            }
        }
        grad.w1.add_assign(&x.t_matmul(&d_hidden)?)?;
        for i in 0..d_hidden.rows() {
            for (g, d) in grad.b1.iter_mut().zip(d_hidden.row(i)) {
                *g += d;
            }
        }
        d_hidden.matmul_t(&self.w1)
    }

    fn visit(&self, prefix: &str, f: &mut TensorVisitor<'_>) {
        f(
            &format!("{prefix}.w1"),
            &[self.w1.rows(), self.w1.cols()],
            self.w1.as_slice(),
            true,
        );
        f(&format!("{prefix}.b1"), &[self.b1.len()], &self.b1, true);
        f(
            &format!("{prefix}.w2"),
            &[self.w2.rows(), self.w2.cols()],
            self.w2.as_slice(),
            true,
        );
        f(&format!("{prefix}.b2"), &[self.b2.len()], &self.b2, true);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut TensorVisitorMut<'_>) {
        let s1 = [self.w1.rows(), self.w1.cols()];
        let s2 = [self.w2.rows(), self.w2.cols()];
        f(&format!("{prefix}.w1"), &s1, self.w1.as_mut_slice(), true);
        f(&format!("{prefix}.b1"), &[self.b1.len()], &mut self.b1, true);
        f(&format!("{prefix}.w2"), &s2, self.w2.as_mut_slice(), true);
        f(&format!("{prefix}.b2"), &[self.b2.len()], &mut self.b2, true);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    /// Haar filter for the wavelet encoder; `None` for the adjacency variant.
    pub filter: Option<HaarFilterBank>,
    pub weight: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdnChannel {
    pub kernel: WienerKernel,
    pub weight: Matrix,
}

/// One deconvolution layer; channel outputs are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct GdnLayer {
    pub channels: Vec<GdnChannel>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttrDecoder {
    /// Deconvolution layers in application order (latent first).
    Gdn(Vec<GdnLayer>),
    Mlp(Mlp),
}

/// Callback receiving `(name, shape, values, trainable)`.
pub type TensorVisitor<'a> = dyn FnMut(&str, &[usize], &[f64], bool) + 'a;
pub type TensorVisitorMut<'a> = dyn FnMut(&str, &[usize], &mut [f64], bool) + 'a;

/// Every learnable tensor of the autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: Vec<EncoderLayer>,
    pub structure: Mlp,
    pub neighbor_mu: Mlp,
    pub neighbor_sigma: Mlp,
    pub attr: AttrDecoder,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases and all-ones Haar gains.
    pub fn init(hyp: &HyperParams, feature_dim: usize, rng: &mut Rng) -> Result<Self> {
        hyp.validate()?;
        let p = hyp.hidden;
        let mut encoder = Vec::with_capacity(hyp.depth);
        for i in 0..hyp.depth {
            let input = if i == 0 { feature_dim } else { p };
            let filter = match hyp.encoder {
                EncoderKind::Wavelet => Some(HaarFilterBank::identity(hyp.haar_depth())),
                EncoderKind::Gcn => None,
            };
            encoder.push(EncoderLayer {
                filter,
                weight: glorot(input, p, rng),
            });
        }
        let structure = Mlp::init(p, p, 1, rng);
        let neighbor_mu = Mlp::init(p, p, feature_dim, rng);
        let neighbor_sigma = Mlp::init(p, p, feature_dim, rng);
        let attr = match hyp.attr_decoder {
            AttrDecoderKind::Gdn => {
                let kernels = hyp
                    .aer_grid
                    .iter()
                    .map(|&aer| WienerKernel::fit(aer, hyp.remez_order))
                    .collect::<Result<Vec<_>>>()?;
                let mut layers = Vec::with_capacity(hyp.depth);
                for i in 0..hyp.depth {
                    let output = if i + 1 == hyp.depth { feature_dim } else { p };
                    let channels = kernels
                        .iter()
                        .map(|k| GdnChannel {
                            kernel: k.clone(),
                            weight: glorot(p, output, rng),
                        })
                        .collect();
                    layers.push(GdnLayer { channels });
                }
                AttrDecoder::Gdn(layers)
            }
            AttrDecoderKind::Mlp => AttrDecoder::Mlp(Mlp::init(p, p, feature_dim, rng)),
        };
        Ok(Self {
            encoder,
            structure,
            neighbor_mu,
            neighbor_sigma,
            attr,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().map_or(0, |l| l.weight.cols())
    }

    /// Visits every tensor as `(name, shape, values, trainable)`. Kernel
    /// coefficients are stored but not trained.
    pub fn visit_tensors(&self, f: &mut TensorVisitor<'_>) {
        for (i, layer) in self.encoder.iter().enumerate() {
            if let Some(bank) = &layer.filter {
                f(&format!("encoder.{i}.theta"), &[bank.bins()], bank.theta(), true);
            }
            let w = &layer.weight;
            f(
                &format!("encoder.{i}.weight"),
                &[w.rows(), w.cols()],
                w.as_slice(),
                true,
            );
        }
        self.structure.visit("structure", f);
        self.neighbor_mu.visit("neighbor_mu", f);
        self.neighbor_sigma.visit("neighbor_sigma", f);
        match &self.attr {
            AttrDecoder::Gdn(layers) => {
                for (i, layer) in layers.iter().enumerate() {
                    for (q, ch) in layer.channels.iter().enumerate() {
                        let w = &ch.weight;
                        f(
                            &format!("gdn.{i}.{q}.weight"),
                            &[w.rows(), w.cols()],
                            w.as_slice(),
                            true,
                        );
                        let k = &ch.kernel;
                        f(
                            &format!("gdn.{i}.{q}.kernel.aer"),
                            &[1],
                            core::slice::from_ref(&k.aer),
                            false,
                        );
                        f(
                            &format!("gdn.{i}.{q}.kernel.coeffs"),
                            &[k.coeffs.len()],
                            &k.coeffs,
                            false,
                        );
                        f(
                            &format!("gdn.{i}.{q}.kernel.fit_error"),
                            &[1],
                            core::slice::from_ref(&k.fit_error),
                            false,
                        );
                    }
                }
            }
            AttrDecoder::Mlp(m) => m.visit("attr_mlp", f),
        }
    }

    /// Mutable counterpart of [`Self::visit_tensors`], same order.
    pub fn visit_tensors_mut(&mut self, f: &mut TensorVisitorMut<'_>) {
        for (i, layer) in self.encoder.iter_mut().enumerate() {
            if let Some(bank) = &mut layer.filter {
                let shape = [bank.bins()];
                f(&format!("encoder.{i}.theta"), &shape, bank.theta_mut(), true);
            }
            let w = &mut layer.weight;
            let shape = [w.rows(), w.cols()];
            f(&format!("encoder.{i}.weight"), &shape, w.as_mut_slice(), true);
        }
        self.structure.visit_mut("structure", f);
        self.neighbor_mu.visit_mut("neighbor_mu", f);
        self.neighbor_sigma.visit_mut("neighbor_sigma", f);
        match &mut self.attr {
            AttrDecoder::Gdn(layers) => {
                for (i, layer) in layers.iter_mut().enumerate() {
                    for (q, ch) in layer.channels.iter_mut().enumerate() {
                        let w = &mut ch.weight;
                        let shape = [w.rows(), w.cols()];
                        f(&format!("gdn.{i}.{q}.weight"), &shape, w.as_mut_slice(), true);
                        let k = &mut ch.kernel;
                        f(
                            &format!("gdn.{i}.{q}.kernel.aer"),
                            &[1],
                            core::slice::from_mut(&mut k.aer),
                            false,
                        );
                        let shape = [k.coeffs.len()];
                        f(&format!("gdn.{i}.{q}.kernel.coeffs"), &shape, &mut k.coeffs, false);
                        f(
                            &format!("gdn.{i}.{q}.kernel.fit_error"),
                            &[1],
                            core::slice::from_mut(&mut k.fit_error),
                            false,
                        );
                    }
                }
            }
            AttrDecoder::Mlp(m) => m.visit_mut("attr_mlp", f),
        }
    }

    /// Copy with every trainable entry set to zero (gradient accumulator).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.visit_tensors_mut(&mut |_, _, data, trainable| {
            if trainable {
                data.fill(0.0);
            }
        });
        z
    }

    /// Number of trainable scalars.
    pub fn num_trainable(&self) -> usize {
        let mut count = 0;
        self.visit_tensors(&mut |_, _, data, trainable| {
            if trainable {
                count += data.len();
            }
        });
        count
    }

    /// Names of trainable tensors.
    pub fn trainable_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit_tensors(&mut |name, _, _, trainable| {
            if trainable {
                names.push(String::from(name));
            }
        });
        names
    }
}

/// How each encoder layer propagates features over the graph.
#[derive(Debug, Clone, Copy)]
pub enum Propagation<'a> {
    /// `U diag(g_c(λ)) Uᵀ` with the layer's own Haar filter.
    Spectral(&'a SpectralDecomposition),
    /// An explicit dense operator per layer.
    Dense(&'a [Matrix]),
    /// The normalized adjacency `Ã`.
    Adjacency(&'a SparseSymMatrix),
}

/// Per-layer cache of an encoder pass.
#[derive(Debug, Clone)]
pub struct EncoderLayerTrace {
    /// `H^{(i-1)} W^{(i)}`
    pub mixed: Matrix,
    /// `Uᵀ · mixed`, spectral route only.
    pub spectral: Option<Matrix>,
    /// Propagated pre-activation.
    pub pre_activation: Matrix,
}

#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// `H^{(0)} = X, H^{(1)}, …, H^{(Z)}`
    pub outputs: Vec<Matrix>,
    pub layers: Vec<EncoderLayerTrace>,
}

impl EncoderTrace {
    pub fn latent(&self) -> &Matrix {
        self.outputs.last().expect("encoder has at least the input")
    }
}

/// Runs the encoder layers `H^{(i)} = ReLU(P_i H^{(i-1)} W^{(i)})`.
pub fn encode_with(features: &Matrix, layers: &[EncoderLayer], prop: Propagation<'_>) -> Result<EncoderTrace> {
    let mut outputs = Vec::with_capacity(layers.len() + 1);
    outputs.push(features.clone());
    let mut traces = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let mixed = outputs[i].matmul(&layer.weight)?;
        let (spectral, pre_activation) = match prop {
            Propagation::Spectral(decomp) => {
                let bank = layer
                    .filter
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter(format!("encoder layer {i} has no spectral filter")))?;
                let gains = bank.gains(&decomp.eigenvalues)?;
                let coeffs = decomp.forward(&mixed)?;
                let out = decomp.inverse_scaled(&gains, &coeffs)?;
                (Some(coeffs), out)
            }
            Propagation::Dense(ops) => {
                let op = ops.get(i).ok_or_else(|| {
                    Error::DimensionMismatch(format!("{} operators for {} layers", ops.len(), layers.len()))
                })?;
                (None, op.matmul(&mixed)?)
            }
            Propagation::Adjacency(adj) => (None, adj.mul_dense(&mixed)?),
        };
        let mut h = pre_activation.clone();
        h.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        outputs.push(h);
        traces.push(EncoderLayerTrace {
            mixed,
            spectral,
            pre_activation,
        });
    }
    Ok(EncoderTrace {
        outputs,
        layers: traces,
    })
}

/// Wavelet encoder with explicit diffusion operators, one per layer.
pub fn encode(features: &Matrix, params: &ModelParams, operators: &[Matrix]) -> Result<Matrix> {
    if operators.len() != params.encoder.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} diffusion operators for {} layers",
            operators.len(),
            params.encoder.len()
        )));
    }
    Ok(encode_with(features, &params.encoder, Propagation::Dense(operators))?
        .outputs
        .pop()
        .unwrap())
}

/// Adjacency-propagation encoder used by the ablation variant.
pub fn encode_gcn(g: &Graph, params: &ModelParams) -> Result<Matrix> {
    let adj = normalized_adjacency(g);
    Ok(
        encode_with(g.features(), &params.encoder, Propagation::Adjacency(&adj))?
            .outputs
            .pop()
            .unwrap(),
    )
}

/// Predicted degree `d̂_u` from a latent row.
pub fn decode_degree(h_u: &[f64], structure: &Mlp) -> Result<f64> {
    Ok(structure.forward_row(h_u)?[0])
}

/// `‖d̂ − d‖²`
pub fn degree_loss(predicted: f64, degree: f64) -> f64 {
    let r = predicted - degree;
    r * r
}

/// Empirical feature distribution of a node's (sampled) neighbors.
///
/// The covariance `Σ = CᵀC / (count − 1) + εI` is kept in factored form
/// through the centered samples `C`; [`Self::sigma`] materializes it.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodStats {
    pub mu: Vec<f64>,
    /// Centered samples, `count × p`. Empty when `count ≤ 1`.
    pub centered: Matrix,
    pub eps: f64,
    pub count: usize,
}

impl NeighborhoodStats {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    fn scatter_scale(&self) -> f64 {
        if self.count > 1 {
            1.0 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    /// Full `p × p` covariance including `εI`.
    pub fn sigma(&self) -> Matrix {
        let p = self.dim();
        let mut s = if self.centered.rows() > 0 {
            let mut s = self.centered.t_matmul(&self.centered).expect("shapes agree");
            s.scale(self.scatter_scale());
            s
        } else {
            Matrix::zeros(p, p)
        };
        for i in 0..p {
            s[(i, i)] += self.eps;
        }
        s
    }

    pub fn sigma_diag(&self) -> Vec<f64> {
        let scale = self.scatter_scale();
        (0..self.dim())
            .map(|j| {
                let ss: f64 = (0..self.centered.rows())
                    .map(|i| self.centered[(i, j)] * self.centered[(i, j)])
                    .sum();
                ss * scale + self.eps
            })
            .collect()
    }

    /// `log |Σ|` via a Cholesky factorization of whichever of the `p × p`
    /// covariance or the `count × count` Gram form is smaller.
    pub fn log_det(&self) -> Result<f64> {
        let p = self.dim();
        let c = self.centered.rows();
        if c == 0 {
            return Ok(p as f64 * math::ln(self.eps));
        }
        if p <= c {
            return crate::linalg::log_det_spd(&self.sigma());
        }
        // |εI_p + CᵀC/(c−1)| = ε^p |I_c + CCᵀ/(ε(c−1))|
        let mut gram = self.centered.matmul_t(&self.centered)?;
        gram.scale(self.scatter_scale() / self.eps);
        for i in 0..c {
            gram[(i, i)] += 1.0;
        }
        let l = cholesky(&gram)?;
        let inner: f64 = (0..c).map(|i| 2.0 * math::ln(l[(i, i)])).sum();
        Ok(p as f64 * math::ln(self.eps) + inner)
    }
}

/// Neighbors used for the statistics of `u`: a uniform sample without
/// replacement of `min(cap, d_u)` neighbors when `rng` is given, otherwise
/// the first `min(cap, d_u)` in ascending index order.
pub fn sample_neighbors(g: &Graph, u: usize, cap: usize, rng: Option<&mut Rng>) -> Vec<usize> {
    let nbrs = g.neighbors(u);
    let take = cap.min(nbrs.len());
    match rng {
        Some(rng) if take < nbrs.len() => {
            let mut idx: Vec<usize> = rand::seq::index::sample(rng, nbrs.len(), take).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| nbrs[i]).collect()
        }
        _ => nbrs[..take].to_vec(),
    }
}

/// Mean and regularized covariance of the sampled neighbors' features.
pub fn neighborhood_stats(
    g: &Graph,
    u: usize,
    cap: usize,
    eps: f64,
    rng: Option<&mut Rng>,
) -> Result<NeighborhoodStats> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "covariance eps must be > 0, got {eps}"
        )));
    }
    let sample = sample_neighbors(g, u, cap, rng);
    Ok(stats_from_rows(g.features(), &sample, eps))
}

pub(crate) fn stats_from_rows(x: &Matrix, rows: &[usize], eps: f64) -> NeighborhoodStats {
    let p = x.cols();
    let count = rows.len();
    let mut mu = vec![0.0; p];
    if count == 0 {
        return NeighborhoodStats {
            mu,
            centered: Matrix::zeros(0, p),
            eps,
            count,
        };
    }
    for &v in rows {
        for (m, &f) in mu.iter_mut().zip(x.row(v)) {
            *m += f;
        }
    }
    for m in &mut mu {
        *m /= count as f64;
    }
    let centered = if count > 1 {
        Matrix::from_fn(count, p, |i, j| x[(rows[i], j)] - mu[j])
    } else {
        Matrix::zeros(0, p)
    };
    NeighborhoodStats {
        mu,
        centered,
        eps,
        count,
    }
}

/// Predicted neighborhood Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrediction {
    pub mu_hat: Vec<f64>,
    /// `log Σ̂` diagonal after clamping to `±LOG_SIGMA_CLAMP`.
    pub log_sigma: Vec<f64>,
    pub sigma_hat_diag: Vec<f64>,
    /// Whether any log-variance was clamped.
    pub clamped: bool,
}

impl GaussianPrediction {
    /// Builds a prediction from raw `φ_μ` and `φ_σ` outputs.
    pub fn from_raw(mu_hat: Vec<f64>, raw_log_sigma: &[f64]) -> Self {
        let mut clamped = false;
        let log_sigma: Vec<f64> = raw_log_sigma
            .iter()
            .map(|&s| {
                if !(-LOG_SIGMA_CLAMP..=LOG_SIGMA_CLAMP).contains(&s) {
                    clamped = true;
                }
                s.clamp(-LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP)
            })
            .collect();
        let sigma_hat_diag = log_sigma.iter().map(|&s| math::exp(s)).collect();
        Self {
            mu_hat,
            log_sigma,
            sigma_hat_diag,
            clamped,
        }
    }
}

/// `μ̂ = φ_μ(h_u)`, `Σ̂ = diag(exp(φ_σ(h_u)))`.
pub fn decode_neighborhood(h_u: &[f64], mu: &Mlp, sigma: &Mlp) -> Result<GaussianPrediction> {
    let mu_hat = mu.forward_row(h_u)?;
    let raw = sigma.forward_row(h_u)?;
    Ok(GaussianPrediction::from_raw(mu_hat, &raw))
}

/// Neighborhood reconstruction loss
/// `½[log(|Σ̂|/|Σ|) − p + tr(Σ̂⁻¹Σ) + (μ − μ̂)ᵀ Σ̂⁻¹ (μ − μ̂)]`.
pub fn kl_loss(pred: &GaussianPrediction, emp: &NeighborhoodStats) -> Result<f64> {
    let p = emp.dim();
    if pred.mu_hat.len() != p || pred.log_sigma.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "prediction of width {} against statistics of width {p}",
            pred.mu_hat.len()
        )));
    }
    let log_det_emp = emp.log_det()?;
    Ok(kl_with_log_det(pred, emp, &emp.sigma_diag(), log_det_emp))
}

pub(crate) fn kl_with_log_det(
    pred: &GaussianPrediction,
    emp: &NeighborhoodStats,
    sigma_diag: &[f64],
    log_det_emp: f64,
) -> f64 {
    let mut acc = -log_det_emp - emp.dim() as f64;
    for (j, &var) in sigma_diag.iter().enumerate().take(emp.dim()) {
        let inv = math::exp(-pred.log_sigma[j]);
        let diff = emp.mu[j] - pred.mu_hat[j];
        acc += pred.log_sigma[j] + var * inv + diff * diff * inv;
    }
    0.5 * acc
}

/// Scalar sample variance of all entries (divisor `count − 1`).
pub fn latent_variance(h: &Matrix) -> f64 {
    let data = h.as_slice();
    let n = data.len();
    if n < 2 {
        return 0.0;
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Matrix of i.i.d. standard normal draws in row-major order.
pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Additive latent noise `β σ_P Z` for standard normal `Z`.
pub fn scaled_latent_noise(h: &Matrix, beta: f64, standard: &Matrix) -> Matrix {
    let mut e = standard.clone();
    e.scale(beta * math::sqrt(latent_variance(h)));
    e
}

/// `Ĥ = H + βE` with `E ~ N(0, σ_P² I)` and `σ_P² = Var[H]`.
pub fn inject_latent_noise(h: &Matrix, beta: f64, rng: &mut Rng) -> Matrix {
    if beta == 0.0 {
        return h.clone();
    }
    let z = standard_normal_matrix(h.rows(), h.cols(), rng);
    let mut out = h.clone();
    out.add_assign(&scaled_latent_noise(h, beta, &z)).expect("same shape");
    out
}

/// Cache of a deconvolution decoder pass.
#[derive(Debug, Clone)]
pub struct GdnTrace {
    /// Input of each layer; `inputs[0]` is the noisy latent.
    pub inputs: Vec<Matrix>,
    /// Pre-activation `D_q H W_q` per layer and channel.
    pub pre_activations: Vec<Vec<Matrix>>,
    pub output: Matrix,
}

/// Multi-channel Wiener deconvolution decoder. Hidden layers use ReLU, the
/// last layer is linear; channels are aggregated by summation.
pub fn gdn_decode_with(h_hat: &Matrix, laplacian: &SparseSymMatrix, layers: &[GdnLayer]) -> Result<GdnTrace> {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre_activations = Vec::with_capacity(layers.len());
    let mut current = h_hat.clone();
    for (i, layer) in layers.iter().enumerate() {
        let last = i + 1 == layers.len();
        let out_dim = layer
            .channels
            .first()
            .map(|c| c.weight.cols())
            .ok_or_else(|| Error::InvalidParameter(format!("deconvolution layer {i} has no channels")))?;
        let mut out = Matrix::zeros(current.rows(), out_dim);
        let mut pres = Vec::with_capacity(layer.channels.len());
        for ch in &layer.channels {
            let mixed = current.matmul(&ch.weight)?;
            let pre = ch.kernel.apply(laplacian, &mixed)?;
            for (o, &z) in out.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                *o += if last { z } else { relu(z) };
            }
            pres.push(pre);
        }
        inputs.push(core::mem::replace(&mut current, out));
        pre_activations.push(pres);
    }
    Ok(GdnTrace {
        inputs,
        pre_activations,
        output: current,
    })
}

/// Reconstructed attributes `Ĥ^{(0)}`.
pub fn gdn_decode(h_hat: &Matrix, laplacian: &SparseSymMatrix, layers: &[GdnLayer]) -> Result<Matrix> {
    Ok(gdn_decode_with(h_hat, laplacian, layers)?.output)
}

/// Per-node MLP attribute decoder used by the ablation variant.
pub fn mlp_attribute_decode(h_u: &[f64], mlp: &Mlp) -> Result<Vec<f64>> {
    mlp.forward_row(h_u)
}

/// `‖x_u − x̂_u‖₂` (the norm, not its square).
pub fn attribute_loss(x: &[f64], x_hat: &[f64]) -> f64 {
    math::sqrt(x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Unweighted loss terms of one node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NodeLosses {
    pub degree: f64,
    pub neighbor: f64,
    pub attribute: f64,
}

/// `λ_d ℒ^d + λ_n ℒ^n + λ_x ℒ^x`
pub fn node_score(losses: &NodeLosses, hyp: &HyperParams) -> f64 {
    hyp.lambda_d * losses.degree + hyp.lambda_n * losses.neighbor + hyp.lambda_x * losses.attribute
}

/// Sum of per-node scores.
pub fn total_loss(losses: &[NodeLosses], hyp: &HyperParams) -> f64 {
    losses.iter().map(|l| node_score(l, hyp)).sum()
}
