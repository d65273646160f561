//! Objective evaluation, reverse-mode gradients, Adam, the training loop and
//! anomaly scoring.
//!
//! Each epoch draws a fresh neighbor sample per node and a fresh latent
//! noise matrix from substreams keyed by `(seed, epoch, node)`. The noise is
//! a constant of the forward pass: its scale `β·σ_P` is computed from the
//! latent but not differentiated.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::filters::bin_assignment;
use crate::graph::{eigendecompose, normalized_adjacency, normalized_laplacian, Graph, SparseSymMatrix};
use crate::hyper::{EncoderKind, HyperParams};
use crate::linalg::{Matrix, SpectralDecomposition};
use crate::math;
use crate::model::{
    encode_with, gdn_decode_with, kl_with_log_det, node_score, sample_neighbors, scaled_latent_noise,
    standard_normal_matrix, stats_from_rows, AttrDecoder, EncoderLayer, EncoderTrace, GaussianPrediction, GdnLayer,
    GdnTrace, MlpTrace, ModelParams, NeighborhoodStats, NodeLosses, Propagation, LOG_SIGMA_CLAMP,
};
use crate::rng::{stream, substream, Purpose};

/// Graph-derived quantities shared by every epoch.
#[derive(Debug, Clone)]
pub struct TrainingContext<'g> {
    pub graph: &'g Graph,
    pub laplacian: SparseSymMatrix,
    /// Laplacian spectrum, wavelet encoder only.
    pub spectrum: Option<SpectralDecomposition>,
    /// Normalized adjacency, adjacency encoder only.
    pub adjacency: Option<SparseSymMatrix>,
    pub degrees: Vec<f64>,
}

impl<'g> TrainingContext<'g> {
    pub fn new(graph: &'g Graph, hyp: &HyperParams) -> Result<Self> {
        let laplacian = normalized_laplacian(graph);
        let (spectrum, adjacency) = match hyp.encoder {
            EncoderKind::Wavelet => (Some(eigendecompose(&laplacian)?), None),
            EncoderKind::Gcn => (None, Some(normalized_adjacency(graph))),
        };
        let degrees = graph.degrees().into_iter().map(|d| d as f64).collect();
        Ok(Self {
            graph,
            laplacian,
            spectrum,
            adjacency,
            degrees,
        })
    }

    pub fn propagation(&self) -> Result<Propagation<'_>> {
        match (&self.spectrum, &self.adjacency) {
            (Some(s), _) => Ok(Propagation::Spectral(s)),
            (None, Some(a)) => Ok(Propagation::Adjacency(a)),
            (None, None) => Err(Error::InvalidParameter(String::from(
                "context has no propagation operator",
            ))),
        }
    }
}

/// Latent noise added before the attribute decoder.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentNoise {
    None,
    /// Standard normal draws scaled by `beta · σ_P` in the forward pass.
    Gaussian {
        beta: f64,
        standard: Matrix,
    },
    /// Already-scaled additive noise.
    Fixed(Matrix),
}

/// Per-node neighborhood statistics plus latent noise for one evaluation.
#[derive(Debug, Clone)]
pub struct EpochDraw {
    pub stats: Vec<NeighborhoodStats>,
    pub stats_log_det: Vec<f64>,
    pub stats_diag: Vec<Vec<f64>>,
    pub noise: LatentNoise,
}

impl EpochDraw {
    fn from_samples(
        ctx: &TrainingContext<'_>,
        hyp: &HyperParams,
        samples: Vec<Vec<usize>>,
        noise: LatentNoise,
    ) -> Result<Self> {
        let x = ctx.graph.features();
        let stats: Vec<NeighborhoodStats> = samples
            .iter()
            .map(|rows| stats_from_rows(x, rows, hyp.cov_eps))
            .collect();
        let stats_log_det = stats
            .iter()
            .map(NeighborhoodStats::log_det)
            .collect::<Result<Vec<_>>>()?;
        let stats_diag = stats.iter().map(NeighborhoodStats::sigma_diag).collect();
        Ok(Self {
            stats,
            stats_log_det,
            stats_diag,
            noise,
        })
    }

    /// Training draw for `epoch`: random neighbor samples and fresh noise.
    pub fn sample(ctx: &TrainingContext<'_>, hyp: &HyperParams, epoch: usize) -> Result<Self> {
        let g = ctx.graph;
        let samples = (0..g.num_nodes())
            .map(|u| {
                let mut rng = substream(hyp.seed, Purpose::NeighborSample, epoch as u64, u as u64);
                sample_neighbors(g, u, hyp.sample_size, Some(&mut rng))
            })
            .collect();
        let noise = if hyp.noise_scale > 0.0 {
            let mut rng = substream(hyp.seed, Purpose::LatentNoise, epoch as u64, 0);
            LatentNoise::Gaussian {
                beta: hyp.noise_scale,
                standard: standard_normal_matrix(g.num_nodes(), hyp.hidden, &mut rng),
            }
        } else {
            LatentNoise::None
        };
        Self::from_samples(ctx, hyp, samples, noise)
    }

    /// Scoring draw: first `S` neighbors by index, no noise.
    pub fn deterministic(ctx: &TrainingContext<'_>, hyp: &HyperParams) -> Result<Self> {
        let g = ctx.graph;
        let samples = (0..g.num_nodes())
            .map(|u| sample_neighbors(g, u, hyp.sample_size, None))
            .collect();
        Self::from_samples(ctx, hyp, samples, LatentNoise::None)
    }
}

/// Result of one forward pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub per_node: Vec<NodeLosses>,
    /// Weighted per-node loss, the anomaly score.
    pub scores: Vec<f64>,
    pub total: f64,
    pub sum_degree: f64,
    pub sum_neighbor: f64,
    pub sum_attribute: f64,
    /// Nodes whose log-variance head hit the clamp.
    pub clamped_nodes: usize,
    /// Noise actually added to the latent.
    pub applied_noise: Option<Matrix>,
}

enum AttrTrace {
    Gdn(GdnTrace),
    Mlp(MlpTrace),
}

struct Forward {
    encoder: EncoderTrace,
    structure: MlpTrace,
    mu: MlpTrace,
    sigma: MlpTrace,
    noisy_latent: Matrix,
    attr: AttrTrace,
    predictions: Vec<GaussianPrediction>,
    reconstruction: Matrix,
    eval: Evaluation,
}

fn forward(ctx: &TrainingContext<'_>, params: &ModelParams, hyp: &HyperParams, draw: &EpochDraw) -> Result<Forward> {
    let g = ctx.graph;
    let n = g.num_nodes();
    if draw.stats.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} neighborhood statistics for {n} nodes",
            draw.stats.len()
        )));
    }
    let encoder = encode_with(g.features(), &params.encoder, ctx.propagation()?)?;
    let latent = encoder.latent();
    let structure = params.structure.forward(latent)?;
    let mu = params.neighbor_mu.forward(latent)?;
    let sigma = params.neighbor_sigma.forward(latent)?;

    let applied_noise = match &draw.noise {
        LatentNoise::None => None,
        LatentNoise::Gaussian { beta, standard } => Some(scaled_latent_noise(latent, *beta, standard)),
        LatentNoise::Fixed(m) => Some(m.clone()),
    };
    let mut noisy_latent = latent.clone();
    if let Some(e) = &applied_noise {
        noisy_latent.add_assign(e)?;
    }
    let (attr, reconstruction) = match &params.attr {
        AttrDecoder::Gdn(layers) => {
            let t = gdn_decode_with(&noisy_latent, &ctx.laplacian, layers)?;
            let out = t.output.clone();
            (AttrTrace::Gdn(t), out)
        }
        AttrDecoder::Mlp(mlp) => {
            let t = mlp.forward(&noisy_latent)?;
            let out = t.output.clone();
            (AttrTrace::Mlp(t), out)
        }
    };
    if reconstruction.shape() != g.features().shape() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction {}x{} for features {}x{}",
            reconstruction.rows(),
            reconstruction.cols(),
            g.features().rows(),
            g.features().cols()
        )));
    }

    let mut per_node = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    let mut clamped_nodes = 0;
    for u in 0..n {
        let pred = GaussianPrediction::from_raw(mu.output.row(u).to_vec(), sigma.output.row(u));
        if pred.clamped {
            clamped_nodes += 1;
        }
        let neighbor = kl_with_log_det(&pred, &draw.stats[u], &draw.stats_diag[u], draw.stats_log_det[u]);
        let degree = crate::model::degree_loss(structure.output[(u, 0)], ctx.degrees[u]);
        let attribute = crate::model::attribute_loss(g.features().row(u), reconstruction.row(u));
        per_node.push(NodeLosses {
            degree,
            neighbor,
            attribute,
        });
        predictions.push(pred);
    }
    let scores: Vec<f64> = per_node.iter().map(|l| node_score(l, hyp)).collect();
    let eval = Evaluation {
        total: scores.iter().sum(),
        sum_degree: per_node.iter().map(|l| l.degree).sum(),
        sum_neighbor: per_node.iter().map(|l| l.neighbor).sum(),
        sum_attribute: per_node.iter().map(|l| l.attribute).sum(),
        per_node,
        scores,
        clamped_nodes,
        applied_noise,
    };
    Ok(Forward {
        encoder,
        structure,
        mu,
        sigma,
        noisy_latent,
        attr,
        predictions,
        reconstruction,
        eval,
    })
}

/// Forward pass only.
pub fn evaluate(
    ctx: &TrainingContext<'_>,
    params: &ModelParams,
    hyp: &HyperParams,
    draw: &EpochDraw,
) -> Result<Evaluation> {
    Ok(forward(ctx, params, hyp, draw)?.eval)
}

/// Backpropagates `d_latent` through the encoder, accumulating into `grad`.
pub fn encoder_backward(
    trace: &EncoderTrace,
    layers: &[EncoderLayer],
    prop: Propagation<'_>,
    d_latent: Matrix,
    grad: &mut [EncoderLayer],
) -> Result<()> {
    let mut d_out = d_latent;
    for i in (0..layers.len()).rev() {
        let lt = &trace.layers[i];
        let mut d_pre = d_out;
        for (d, &a) in d_pre.as_mut_slice().iter_mut().zip(lt.pre_activation.as_slice()) {
            if a <= 0.0 {
                *d = 0.0;
            }
        }
        let d_mixed = match prop {
            Propagation::Spectral(decomp) => {
                let bank = layers[i]
                    .filter
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter(format!("encoder layer {i} has no spectral filter")))?;
                let coeffs = lt
                    .spectral
                    .as_ref()
                    .ok_or_else(|| Error::InvalidParameter(String::from("trace lacks spectral coefficients")))?;
                let d_coeffs = decomp.forward(&d_pre)?;
                let bins = bin_assignment(bank.bins(), &decomp.eigenvalues)?;
                if let Some(gb) = grad[i].filter.as_mut() {
                    let gt = gb.theta_mut();
                    for (row, &b) in bins.iter().enumerate() {
                        gt[b] += crate::linalg::dot(d_coeffs.row(row), coeffs.row(row));
                    }
                }
                let gains = bank.gains(&decomp.eigenvalues)?;
                decomp.inverse_scaled(&gains, &d_coeffs)?
            }
            Propagation::Dense(ops) => ops[i].t_matmul(&d_pre)?,
            Propagation::Adjacency(adj) => adj.mul_dense(&d_pre)?,
        };
        grad[i].weight.add_assign(&trace.outputs[i].t_matmul(&d_mixed)?)?;
        d_out = d_mixed.matmul_t(&layers[i].weight)?;
    }
    Ok(())
}

/// Backpropagates through the deconvolution decoder; returns `∂/∂Ĥ`.
pub fn gdn_backward(
    trace: &GdnTrace,
    layers: &[GdnLayer],
    laplacian: &SparseSymMatrix,
    d_output: Matrix,
    grad: &mut [GdnLayer],
) -> Result<Matrix> {
    let mut d_out = d_output;
    for i in (0..layers.len()).rev() {
        let last = i + 1 == layers.len();
        let input = &trace.inputs[i];
        let mut d_in = Matrix::zeros(input.rows(), input.cols());
        for (q, ch) in layers[i].channels.iter().enumerate() {
            let mut d_pre = d_out.clone();
            if !last {
                for (d, &z) in d_pre
                    .as_mut_slice()
                    .iter_mut()
                    .zip(trace.pre_activations[i][q].as_slice())
                {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let back = ch.kernel.apply(laplacian, &d_pre)?;
            grad[i].channels[q].weight.add_assign(&input.t_matmul(&back)?)?;
            d_in.add_assign(&back.matmul_t(&ch.weight)?)?;
        }
        d_out = d_in;
    }
    Ok(d_out)
}

/// Forward pass plus exact gradients of the total loss.
pub fn loss_and_gradient(
    ctx: &TrainingContext<'_>,
    params: &ModelParams,
    hyp: &HyperParams,
    draw: &EpochDraw,
) -> Result<(Evaluation, ModelParams)> {
    let fw = forward(ctx, params, hyp, draw)?;
    let g = ctx.graph;
    let n = g.num_nodes();
    let p_feat = g.feature_dim();
    let latent = fw.encoder.latent();
    let mut grad = params.zeros_like();
    let mut d_latent = Matrix::zeros(latent.rows(), latent.cols());

    if hyp.lambda_d != 0.0 {
        let d_out = Matrix::from_fn(n, 1, |u, _| {
            hyp.lambda_d * 2.0 * (fw.structure.output[(u, 0)] - ctx.degrees[u])
        });
        d_latent.add_assign(
            &params
                .structure
                .backward(latent, &fw.structure, &d_out, &mut grad.structure)?,
        )?;
    }

    if hyp.lambda_n != 0.0 {
        let mut d_mu = Matrix::zeros(n, p_feat);
        let mut d_sigma = Matrix::zeros(n, p_feat);
        for u in 0..n {
            let pred = &fw.predictions[u];
            let emp = &draw.stats[u];
            let diag = &draw.stats_diag[u];
            let raw = fw.sigma.output.row(u);
            for j in 0..p_feat {
                let inv = math::exp(-pred.log_sigma[j]);
                let diff = emp.mu[j] - pred.mu_hat[j];
                d_mu[(u, j)] = -hyp.lambda_n * diff * inv;
                if raw[j].abs() <= LOG_SIGMA_CLAMP {
                    d_sigma[(u, j)] = hyp.lambda_n * 0.5 * (1.0 - (diag[j] + diff * diff) * inv);
                }
            }
        }
        d_latent.add_assign(
            &params
                .neighbor_mu
                .backward(latent, &fw.mu, &d_mu, &mut grad.neighbor_mu)?,
        )?;
        d_latent.add_assign(&params.neighbor_sigma.backward(
            latent,
            &fw.sigma,
            &d_sigma,
            &mut grad.neighbor_sigma,
        )?)?;
    }

    if hyp.lambda_x != 0.0 {
        let x = g.features();
        let mut d_recon = Matrix::zeros(n, p_feat);
        for u in 0..n {
            let norm = fw.eval.per_node[u].attribute;
            if norm > 0.0 {
                for j in 0..p_feat {
                    d_recon[(u, j)] = -hyp.lambda_x * (x[(u, j)] - fw.reconstruction[(u, j)]) / norm;
                }
            }
        }
        let d_noisy = match (&params.attr, &fw.attr, &mut grad.attr) {
            (AttrDecoder::Gdn(layers), AttrTrace::Gdn(t), AttrDecoder::Gdn(gl)) => {
                gdn_backward(t, layers, &ctx.laplacian, d_recon, gl)?
            }
            (AttrDecoder::Mlp(m), AttrTrace::Mlp(t), AttrDecoder::Mlp(gm)) => {
                m.backward(&fw.noisy_latent, t, &d_recon, gm)?
            }
            _ => unreachable!("gradient mirrors parameter structure"),
        };
        d_latent.add_assign(&d_noisy)?;
    }

    encoder_backward(
        &fw.encoder,
        &params.encoder,
        ctx.propagation()?,
        d_latent,
        &mut grad.encoder,
    )?;

    let mut bad: Option<String> = None;
    grad.visit_tensors(&mut |name, _, data, trainable| {
        if trainable && bad.is_none() && !data.iter().all(|v| v.is_finite()) {
            bad = Some(String::from(name));
        }
    });
    if let Some(tensor) = bad {
        return Err(Error::NonFinite {
            what: "gradient",
            tensor,
        });
    }
    Ok((fw.eval, grad))
}

/// Adam with `β₁ = 0.9`, `β₂ = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let n = params.num_trainable();
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        let mut flat = Vec::with_capacity(self.m.len());
        grads.visit_tensors(&mut |_, _, data, trainable| {
            if trainable {
                flat.extend_from_slice(data);
            }
        });
        assert_eq!(flat.len(), self.m.len(), "gradient layout differs from optimizer state");
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - libm::pow(self.beta1, t);
        let bc2 = 1.0 - libm::pow(self.beta2, t);
        let mut idx = 0;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        params.visit_tensors_mut(&mut |_, _, data, trainable| {
            if !trainable {
                return;
            }
            for p in data.iter_mut() {
                let g = flat[idx];
                m[idx] = b1 * m[idx] + (1.0 - b1) * g;
                v[idx] = b2 * v[idx] + (1.0 - b2) * g * g;
                let m_hat = m[idx] / bc1;
                let v_hat = v[idx] / bc2;
                *p -= lr * m_hat / (math::sqrt(v_hat) + eps);
                idx += 1;
            }
        });
    }
}

/// Loss terms recorded for one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total: f64,
    pub loss_d: f64,
    pub loss_n: f64,
    pub loss_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub seed: u64,
    /// Filled in by callers that can read a clock.
    pub wall_seconds: f64,
}

/// Parameters at epoch zero for `hyp.seed`.
pub fn initial_params(g: &Graph, hyp: &HyperParams) -> Result<ModelParams> {
    ModelParams::init(hyp, g.feature_dim(), &mut stream(hyp.seed, Purpose::Init))
}

/// Full-batch training for `hyp.epochs` epochs.
pub fn train(g: &Graph, hyp: &HyperParams) -> Result<(ModelParams, TrainReport)> {
    hyp.validate()?;
    let ctx = TrainingContext::new(g, hyp)?;
    let mut params = initial_params(g, hyp)?;
    let mut adam = AdamState::new(&params);
    let mut history = Vec::with_capacity(hyp.epochs);
    for epoch in 0..hyp.epochs {
        let draw = EpochDraw::sample(&ctx, hyp, epoch)?;
        let (eval, grads) = loss_and_gradient(&ctx, &params, hyp, &draw)?;
        if !eval.total.is_finite() {
            return Err(Error::NonFinite {
                what: "loss",
                tensor: format!("epoch {epoch}"),
            });
        }
        history.push(EpochRecord {
            epoch,
            total: eval.total,
            loss_d: eval.sum_degree,
            loss_n: eval.sum_neighbor,
            loss_x: eval.sum_attribute,
        });
        adam.step(&mut params, &grads, hyp.lr);
    }
    Ok((
        params,
        TrainReport {
            history,
            seed: hyp.seed,
            wall_seconds: 0.0,
        },
    ))
}

/// Per-node anomaly scores with a prepared context.
pub fn score_with_context(ctx: &TrainingContext<'_>, params: &ModelParams, hyp: &HyperParams) -> Result<Evaluation> {
    let draw = EpochDraw::deterministic(ctx, hyp)?;
    evaluate(ctx, params, hyp, &draw)
}

/// Per-node anomaly scores (higher is more anomalous). No noise; neighbors
/// are the first `S` by index.
pub fn score_nodes(g: &Graph, params: &ModelParams, hyp: &HyperParams) -> Result<Vec<f64>> {
    let ctx = TrainingContext::new(g, hyp)?;
    Ok(score_with_context(&ctx, params, hyp)?.scores)
}

/// Central difference of the total loss along one coordinate of a named
/// tensor, holding `draw` fixed.
pub fn numerical_gradient(
    ctx: &TrainingContext<'_>,
    params: &ModelParams,
    hyp: &HyperParams,
    draw: &EpochDraw,
    tensor: &str,
    index: usize,
    step: f64,
) -> Result<f64> {
    let shifted = |delta: f64| -> Result<Vec<NodeLosses>> {
        let mut p = params.clone();
        let mut found = false;
        p.visit_tensors_mut(&mut |name, _, data, _| {
            if name == tensor && index < data.len() {
                data[index] += delta;
                found = true;
            }
        });
        if !found {
            return Err(Error::InvalidParameter(format!(
                "no coordinate {index} in tensor {tensor}"
            )));
        }
        Ok(evaluate(ctx, &p, hyp, draw)?.per_node)
    };
    let (plus, minus) = (shifted(step)?, shifted(-step)?);
    // Differences per node and term before summing keep rounding at the
    // scale of the individual terms rather than of the total.
    let diff: f64 = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| {
            hyp.lambda_d * (p.degree - m.degree)
                + hyp.lambda_n * (p.neighbor - m.neighbor)
                + hyp.lambda_x * (p.attribute - m.attribute)
        })
        .sum();
    Ok(diff / (2.0 * step))
}

/// Ridders' extrapolation of central differences over steps shrinking from
/// `initial_step` by 1.4 per level. Returns the estimate and its error
/// estimate.
pub fn extrapolated_gradient(
    ctx: &TrainingContext<'_>,
    params: &ModelParams,
    hyp: &HyperParams,
    draw: &EpochDraw,
    tensor: &str,
    index: usize,
    initial_step: f64,
) -> Result<(f64, f64)> {
    const SHRINK: f64 = 1.4;
    const LEVELS: usize = 10;
    const SAFE: f64 = 2.0;
    let mut h = initial_step;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    table[0][0] = numerical_gradient(ctx, params, hyp, draw, tensor, index, h)?;
    let mut best = (table[0][0], f64::INFINITY);
    for i in 1..LEVELS {
        h /= SHRINK;
        table[0][i] = numerical_gradient(ctx, params, hyp, draw, tensor, index, h)?;
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let err = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if err <= best.1 {
                best = (table[j][i], err);
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= SAFE * best.1 {
            break;
        }
    }
    Ok(best)
}

/// Copy of `draw` whose noise is the already-scaled matrix applied at
/// `params`, so perturbing parameters does not rescale it.
pub fn freeze_noise(
    ctx: &TrainingContext<'_>,
    params: &ModelParams,
    hyp: &HyperParams,
    draw: &EpochDraw,
) -> Result<EpochDraw> {
    let applied = evaluate(ctx, params, hyp, draw)?.applied_noise;
    Ok(EpochDraw {
        noise: applied.map_or(LatentNoise::None, LatentNoise::Fixed),
        ..draw.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{diffusion_basis, HaarFilterBank};
    use crate::model::EncoderLayer;

    #[test]
    fn adam_zero_gradient_is_noop() {
        let hyp = HyperParams {
            hidden: 4,
            bins: 4,
            aer_grid: alloc::vec![0.1],
            ..HyperParams::default()
        };
        let mut params = ModelParams::init(&hyp, 3, &mut stream(1, Purpose::Init)).unwrap();
        let before = params.clone();
        let mut adam = AdamState::new(&params);
        let zero = params.zeros_like();
        adam.step(&mut params, &zero, 0.005);
        assert_eq!(params, before);
    }

    #[test]
    fn adam_first_step_has_lr_magnitude() {
        let hyp = HyperParams {
            hidden: 4,
            bins: 4,
            aer_grid: alloc::vec![0.1],
            ..HyperParams::default()
        };
        let mut params = ModelParams::init(&hyp, 3, &mut stream(1, Purpose::Init)).unwrap();
        let before = params.clone();
        let mut grads = params.zeros_like();
        let mut k = 0.0;
        grads.visit_tensors_mut(&mut |_, _, d, trainable| {
            if trainable {
                for v in d.iter_mut() {
                    k += 1.0;
                    *v = if (k as usize).is_multiple_of(2) {
                        0.3 * k
                    } else {
                        -1e-3 * k
                    };
                }
            }
        });
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &grads, 0.005);
        let mut moved = Vec::new();
        params.visit_tensors(&mut |_, _, d, t| {
            if t {
                moved.extend_from_slice(d);
            }
        });
        let mut orig = Vec::new();
        before.visit_tensors(&mut |_, _, d, t| {
            if t {
                orig.extend_from_slice(d);
            }
        });
        let mut g = Vec::new();
        grads.visit_tensors(&mut |_, _, d, t| {
            if t {
                g.extend_from_slice(d);
            }
        });
        for ((a, b), gi) in moved.iter().zip(&orig).zip(&g) {
            let step = a - b;
            assert!((step.abs() - 0.005).abs() < 1e-6, "{step}");
            assert!(step * gi < 0.0);
        }
    }

    #[test]
    fn adam_is_deterministic() {
        let hyp = HyperParams {
            hidden: 3,
            bins: 2,
            aer_grid: alloc::vec![0.1],
            ..HyperParams::default()
        };
        let base = ModelParams::init(&hyp, 2, &mut stream(4, Purpose::Init)).unwrap();
        let mut grads = base.zeros_like();
        grads.visit_tensors_mut(&mut |_, _, d, t| {
            if t {
                d.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.37).sin());
            }
        });
        let run = || {
            let mut p = base.clone();
            let mut a = AdamState::new(&p);
            a.step(&mut p, &grads, 0.01);
            a.step(&mut p, &grads, 0.01);
            (p, a)
        };
        assert_eq!(run(), run());
    }

    /// θ gradient equals `⟨∂ℒ/∂A, B_k X W⟩` with the ReLU mask folded into `∂ℒ/∂A`.
    #[test]
    fn theta_gradient_matches_basis_formula() {
        let x = Matrix::from_fn(3, 2, |i, j| [0.7, -0.2, 1.1, 0.4, -0.5, 0.9][i * 2 + j]);
        let g = Graph::build_undirected(&[(0, 1), (1, 2)], 3, x.clone(), None).unwrap();
        let dec = eigendecompose(&normalized_laplacian(&g)).unwrap();
        let bank = HaarFilterBank::new(2, alloc::vec![0.9, -0.4, 1.3, 0.6]).unwrap();
        let layers = alloc::vec![EncoderLayer {
            filter: Some(bank),
            weight: Matrix::identity(2)
        }];
        let trace = encode_with(&x, &layers, Propagation::Spectral(&dec)).unwrap();
        // ℒ = ½‖H‖² ⇒ ∂ℒ/∂H = H.
        let d_latent = trace.latent().clone();
        let mut grad = alloc::vec![EncoderLayer {
            filter: Some(HaarFilterBank::new(2, alloc::vec![0.0; 4]).unwrap()),
            weight: Matrix::zeros(2, 2),
        }];
        encoder_backward(
            &trace,
            &layers,
            Propagation::Spectral(&dec),
            d_latent.clone(),
            &mut grad,
        )
        .unwrap();
        let pre = &trace.layers[0].pre_activation;
        let basis = diffusion_basis(&dec, 2).unwrap();
        for (k, b) in basis.iter().enumerate() {
            let bxw = b.matmul(&x).unwrap();
            let mut want = 0.0;
            for i in 0..3 {
                for j in 0..2 {
                    if pre[(i, j)] > 0.0 {
                        want += d_latent[(i, j)] * bxw[(i, j)];
                    }
                }
            }
            let got = grad[0].filter.as_ref().unwrap().theta()[k];
            assert!((got - want).abs() < 1e-12, "bin {k}: {got} vs {want}");
        }
    }

    #[test]
    fn zero_weights_give_zero_gradients() {
        let x = Matrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let g = Graph::build_undirected(&[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)], 6, x, None).unwrap();
        let hyp = HyperParams {
            lambda_d: 0.0,
            lambda_n: 0.0,
            lambda_x: 0.0,
            hidden: 4,
            bins: 4,
            aer_grid: alloc::vec![0.01, 1.0],
            ..HyperParams::default()
        };
        let ctx = TrainingContext::new(&g, &hyp).unwrap();
        let params = initial_params(&g, &hyp).unwrap();
        let draw = EpochDraw::sample(&ctx, &hyp, 0).unwrap();
        let (eval, grads) = loss_and_gradient(&ctx, &params, &hyp, &draw).unwrap();
        assert_eq!(eval.total, 0.0);
        grads.visit_tensors(&mut |name, _, d, t| {
            if t {
                assert!(d.iter().all(|v| *v == 0.0), "{name}");
            }
        });
    }
}
