//! Variational graph autoencoder trained on normal graphs only.
//!
//! Encoder: a stack of GCN layers produces node embeddings `H`; two MLP heads
//! map `H` to the latent mean `Mu` and log standard deviation `LogSigma`.
//! A latent code `Z = Mu + E ⊙ exp(LogSigma)` feeds two decoder branches,
//! each an MLP followed by a GCN stack. The feature branch reconstructs `X`
//! directly; the structure branch produces node embeddings `U` and the
//! adjacency reconstruction `sigmoid(U Uᵀ)`.
//!
//! The loss is `β‖X − X̃‖²_F + (1 − β)‖A − Ã‖²_F + KL` with
//! `KL = −1/(2N) Σ (1 + 2·LogSigma − Mu² − exp(2·LogSigma))`.

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::graph::{Graph, GraphDataset, NormalizedAdjacency};
use crate::nn::{
    Activation, AdamConfig, AdamState, Checkpoint, ForwardCtx, InitScheme, LayerSpec, Matrix,
    Params, Sequential, Tape, Var,
};

/// Which nonlinearities the network uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Linear GCN stack, ReLU inside the MLPs.
    Analysis,
    /// GELU between GCN layers and inside the MLPs.
    #[default]
    Experiment,
}

impl Profile {
    pub fn activation(self) -> Activation {
        match self {
            Profile::Analysis => Activation::Relu,
            Profile::Experiment => Activation::Gelu,
        }
    }

    fn layer(self, dim: usize) -> LayerSpec {
        match self {
            Profile::Analysis => LayerSpec::relu(dim),
            Profile::Experiment => LayerSpec::gelu(dim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VgaeConfig {
    pub gcn_layers: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub profile: Profile,
    pub dropout_rate: f64,
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub init: InitScheme,
}

impl Default for VgaeConfig {
    fn default() -> Self {
        VgaeConfig {
            gcn_layers: 4,
            hidden_dim: 64,
            latent_dim: 32,
            profile: Profile::Experiment,
            dropout_rate: 0.1,
            beta: 0.5,
            learning_rate: 1e-3,
            epochs: 200,
            seed: 0,
            init: InitScheme::GlorotUniform,
        }
    }
}

impl VgaeConfig {
    /// Identity weights, zero biases, linear GCN stack and every width equal
    /// to `n`; pair it with adjacency features on `n`-node graphs.
    pub fn identity_debug(n: usize) -> Self {
        VgaeConfig {
            gcn_layers: 4,
            hidden_dim: n,
            latent_dim: n,
            profile: Profile::Analysis,
            dropout_rate: 0.0,
            learning_rate: 0.0,
            init: InitScheme::IdentityDebug,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gcn_layers == 0 {
            return Err(GramError::Domain("gcn_layers must be at least 1".into()));
        }
        if self.hidden_dim == 0 || self.latent_dim == 0 {
            return Err(GramError::Domain("hidden_dim and latent_dim must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(GramError::Domain(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(GramError::Domain(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(GramError::Domain(format!(
                "learning_rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// What a checkpoint needs to rebuild the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub config: VgaeConfig,
}

#[derive(Clone, Debug)]
pub struct VgaeModel {
    arch: Architecture,
    params: Params,
    encoder: Sequential,
    mean_head: Sequential,
    log_std_head: Sequential,
    feature_decoder: Sequential,
    structure_decoder: Sequential,
}

/// Tape handles produced by [`VgaeModel::encode`].
pub struct Encoding {
    pub tape: Tape,
    pub params: Vec<Var>,
    pub h: Var,
    pub mu: Var,
    pub log_sigma: Var,
}

/// The three loss terms and their weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub feature_recon: f64,
    pub structure_recon: f64,
    pub kl: f64,
}

struct LossVars {
    total: Var,
    feature_recon: Var,
    structure_recon: Var,
    kl: Var,
}

fn gcn_stack(
    input: usize,
    hidden: usize,
    output: usize,
    cfg: &VgaeConfig,
) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for l in 0..cfg.gcn_layers {
        let in_dim = if l == 0 { input } else { hidden };
        let last = l + 1 == cfg.gcn_layers;
        let out_dim = if last { output } else { hidden };
        specs.push(LayerSpec::gcn(in_dim, out_dim));
        if !last {
            if cfg.profile == Profile::Experiment {
                specs.push(LayerSpec::gelu(hidden));
            }
            if cfg.dropout_rate > 0.0 {
                specs.push(LayerSpec::dropout(hidden, cfg.dropout_rate));
            }
        }
    }
    specs
}

fn mlp(input: usize, hidden: usize, output: usize, cfg: &VgaeConfig) -> Vec<LayerSpec> {
    vec![
        LayerSpec::affine(input, hidden),
        cfg.profile.layer(hidden),
        LayerSpec::affine(hidden, output),
    ]
}

fn decoder(latent: usize, hidden: usize, output: usize, cfg: &VgaeConfig) -> Vec<LayerSpec> {
    let mut specs = mlp(latent, hidden, hidden, cfg);
    specs.push(cfg.profile.layer(hidden));
    specs.extend(gcn_stack(hidden, hidden, output, cfg));
    specs
}

pub(crate) fn sample_standard_normal(rows: usize, cols: usize, rng: &mut dyn RngCore) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("length matches")
}

impl VgaeModel {
    pub fn new(config: &VgaeConfig, input_dim: usize, rng: &mut dyn RngCore) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(GramError::Domain("input feature dimension must be positive".into()));
        }
        let (j, hid, lat) = (config.hidden_dim, config.hidden_dim, config.latent_dim);
        let scheme = config.init;
        let mut params = Params::new();
        let encoder = Sequential::init(gcn_stack(input_dim, j, j, config), "encoder", &mut params, rng, scheme)?;
        let mean_head = Sequential::init(mlp(j, hid, lat, config), "mean_head", &mut params, rng, scheme)?;
        let log_std_head = Sequential::init(mlp(j, hid, lat, config), "log_std_head", &mut params, rng, scheme)?;
        let feature_decoder = Sequential::init(
            decoder(lat, hid, input_dim, config),
            "feature_decoder",
            &mut params,
            rng,
            scheme,
        )?;
        let structure_decoder = Sequential::init(
            decoder(lat, hid, hid, config),
            "structure_decoder",
            &mut params,
            rng,
            scheme,
        )?;
        Ok(VgaeModel {
            arch: Architecture {
                input_dim,
                config: config.clone(),
            },
            params,
            encoder,
            mean_head,
            log_std_head,
            feature_decoder,
            structure_decoder,
        })
    }

    /// Identity-weight model for `n`-node graphs with adjacency features.
    pub fn identity_debug(n: usize) -> Result<Self> {
        Self::new(&VgaeConfig::identity_debug(n), n, &mut ChaCha8Rng::seed_from_u64(0))
    }

    pub fn config(&self) -> &VgaeConfig {
        &self.arch.config
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.config.latent_dim
    }

    pub fn embedding_dim(&self) -> usize {
        self.arch.config.hidden_dim
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    pub fn to_checkpoint(&self) -> Checkpoint<Architecture> {
        Checkpoint::new(self.arch.clone(), &self.params)
    }

    pub fn from_checkpoint(ck: &Checkpoint<Architecture>) -> Result<Self> {
        let mut model = Self::new(
            &ck.architecture.config,
            ck.architecture.input_dim,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        ck.restore_into(&mut model.params)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    fn check_graph(&self, g: &Graph) -> Result<()> {
        if g.feature_dim() != self.arch.input_dim {
            return Err(GramError::shape(
                "model input",
                format!("{} feature columns", self.arch.input_dim),
                g.feature_dim(),
            ));
        }
        Ok(())
    }

    fn run_encoder(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        x: Var,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<(Var, Var, Var)> {
        let h = self.encoder.forward(tape, bound, x, ctx)?;
        let (mu, log_sigma) = self.run_heads(tape, bound, h, ctx)?;
        Ok((h, mu, log_sigma))
    }

    fn run_heads(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        h: Var,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<(Var, Var)> {
        let mu = self.mean_head.forward(tape, bound, h, ctx)?;
        let log_sigma = self.log_std_head.forward(tape, bound, h, ctx)?;
        Ok((mu, log_sigma))
    }

    fn run_decoder(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        z: Var,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<(Var, Var)> {
        let x_rec = self.feature_decoder.forward(tape, bound, z, ctx)?;
        let u = self.structure_decoder.forward(tape, bound, z, ctx)?;
        let logits = tape.matmul_nt(u, u)?;
        let a_rec = tape.sigmoid(logits);
        Ok((x_rec, a_rec))
    }

    /// Eval-mode encoder pass with all parameters differentiable.
    pub fn encode(&self, g: &Graph) -> Result<Encoding> {
        self.check_graph(g)?;
        let s = g.normalized_adjacency();
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, true);
        let x = tape.constant(g.features().clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let (h, mu, log_sigma) = self.run_encoder(&mut tape, &params, x, &mut ctx)?;
        Ok(Encoding {
            tape,
            params,
            h,
            mu,
            log_sigma,
        })
    }

    /// Eval-mode decoder pass on a given latent matrix.
    pub fn decode(&self, z: &Matrix, s: &NormalizedAdjacency) -> Result<(Matrix, Matrix)> {
        z.expect_shape("decode", s.matrix().rows(), self.latent_dim())?;
        let mut tape = Tape::new();
        let params = self.params.bind(&mut tape, false);
        let zv = tape.constant(z.clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let (x_rec, a_rec) = self.run_decoder(&mut tape, &params, zv, &mut ctx)?;
        Ok((tape.value(x_rec).clone(), tape.value(a_rec).clone()))
    }

    /// Full pass from an embedding handle `h` to the loss terms.
    #[allow(clippy::too_many_arguments)]
    fn loss_from_embedding(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        h: Var,
        g: &Graph,
        noise: Option<&Matrix>,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<LossVars> {
        let (mu, log_sigma) = self.run_heads(tape, bound, h, ctx)?;
        let z = reparameterize_on_tape(tape, mu, log_sigma, noise)?;
        let (x_rec, a_rec) = self.run_decoder(tape, bound, z, ctx)?;
        let x = tape.constant(g.features().clone());
        let a = tape.constant(g.adjacency_matrix());
        loss_on_tape(tape, x, a, x_rec, a_rec, mu, log_sigma, self.arch.config.beta)
    }

    /// Deterministic loss (no dropout) with a fixed noise matrix, together
    /// with the gradient of the total with respect to every parameter.
    /// `noise = None` means `E = 0`.
    pub fn loss_and_grads(&self, g: &Graph, noise: Option<&Matrix>) -> Result<(LossParts, Vec<Matrix>)> {
        self.check_graph(g)?;
        let s = g.normalized_adjacency();
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, true);
        let x = tape.constant(g.features().clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let h = self.encoder.forward(&mut tape, &bound, x, &mut ctx)?;
        let lv = self.loss_from_embedding(&mut tape, &bound, h, g, noise, &mut ctx)?;
        let parts = read_loss(&tape, &lv);
        let grads = tape.backward(lv.total, &Matrix::ones(1, 1))?;
        let grads = bound
            .iter()
            .zip(self.params.shapes())
            .map(|(v, shape)| grads.get_or_zeros(*v, shape))
            .collect();
        Ok((parts, grads))
    }

    /// Loss value and gradient when the node embedding `H` is supplied
    /// directly (bypassing the GCN encoder). Used to check `∂loss/∂H`.
    pub fn loss_and_grad_wrt_embedding(
        &self,
        g: &Graph,
        h: &Matrix,
        noise: Option<&Matrix>,
    ) -> Result<(f64, Matrix)> {
        h.expect_shape("embedding", g.num_nodes(), self.embedding_dim())?;
        let s = g.normalized_adjacency();
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let hv = tape.leaf(h.clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let lv = self.loss_from_embedding(&mut tape, &bound, hv, g, noise, &mut ctx)?;
        let total = tape.value(lv.total)[(0, 0)];
        let grads = tape.backward(lv.total, &Matrix::ones(1, 1))?;
        Ok((total, grads.get_or_zeros(hv, h.shape())))
    }

    /// Gradient of the full loss with respect to the encoder output `H`,
    /// read off the complete forward tape.
    pub fn embedding_and_loss_grad(&self, g: &Graph, noise: Option<&Matrix>) -> Result<(Matrix, Matrix)> {
        self.check_graph(g)?;
        let s = g.normalized_adjacency();
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, true);
        let x = tape.constant(g.features().clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let h = self.encoder.forward(&mut tape, &bound, x, &mut ctx)?;
        let lv = self.loss_from_embedding(&mut tape, &bound, h, g, noise, &mut ctx)?;
        let hv = tape.value(h).clone();
        let grads = tape.backward(lv.total, &Matrix::ones(1, 1))?;
        let gh = grads.get_or_zeros(h, hv.shape());
        Ok((hv, gh))
    }

    /// Deterministic reconstruction error `β‖X − X̃‖² + (1 − β)‖A − Ã‖²`
    /// with `Z = Mu`.
    pub fn reconstruction_error(&self, g: &Graph) -> Result<f64> {
        let (parts, _) = self.loss_parts(g, None)?;
        let beta = self.arch.config.beta;
        Ok(beta * parts.feature_recon + (1.0 - beta) * parts.structure_recon)
    }

    /// Eval-mode loss terms plus the value of `Z`.
    pub fn loss_parts(&self, g: &Graph, noise: Option<&Matrix>) -> Result<(LossParts, Matrix)> {
        self.check_graph(g)?;
        let s = g.normalized_adjacency();
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, false);
        let x = tape.constant(g.features().clone());
        let mut ctx = ForwardCtx::eval(Some(s.shared()));
        let (_, mu, log_sigma) = self.run_encoder(&mut tape, &bound, x, &mut ctx)?;
        let z = reparameterize_on_tape(&mut tape, mu, log_sigma, noise)?;
        let (x_rec, a_rec) = self.run_decoder(&mut tape, &bound, z, &mut ctx)?;
        let xc = tape.constant(g.features().clone());
        let ac = tape.constant(g.adjacency_matrix());
        let lv = loss_on_tape(&mut tape, xc, ac, x_rec, a_rec, mu, log_sigma, self.arch.config.beta)?;
        Ok((read_loss(&tape, &lv), tape.value(z).clone()))
    }

    /// One training step on one graph: train-mode forward with dropout and
    /// sampled noise, backward, Adam update.
    fn train_step(&mut self, g: &Graph, adam: &mut AdamState, rng: &mut ChaCha8Rng) -> Result<LossParts> {
        let s = g.normalized_adjacency();
        let noise = sample_standard_normal(g.num_nodes(), self.latent_dim(), rng);
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape, true);
        let x = tape.constant(g.features().clone());
        let mut ctx = ForwardCtx::train(Some(s.shared()), rng);
        let h = self.encoder.forward(&mut tape, &bound, x, &mut ctx)?;
        let lv = self.loss_from_embedding(&mut tape, &bound, h, g, Some(&noise), &mut ctx)?;
        let parts = read_loss(&tape, &lv);
        if !parts.total.is_finite() {
            return Ok(parts);
        }
        let grads = tape.backward(lv.total, &Matrix::ones(1, 1))?;
        let grads: Vec<Matrix> = bound
            .iter()
            .zip(self.params.shapes())
            .map(|(v, shape)| grads.get_or_zeros(*v, shape))
            .collect();
        adam.step(&mut self.params, &grads)?;
        Ok(parts)
    }
}

fn read_loss(tape: &Tape, lv: &LossVars) -> LossParts {
    let v = |x: Var| tape.value(x)[(0, 0)];
    LossParts {
        total: v(lv.total),
        feature_recon: v(lv.feature_recon),
        structure_recon: v(lv.structure_recon),
        kl: v(lv.kl),
    }
}

pub(crate) fn reparameterize_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var, noise: Option<&Matrix>) -> Result<Var> {
    match noise {
        Some(e) if e.data().iter().any(|&v| v != 0.0) => {
            let sigma = tape.exp(log_sigma);
            let scaled = tape.mul_const(sigma, e.clone())?;
            tape.add(mu, scaled)
        }
        Some(e) => {
            tape.value(mu).expect_same("reparameterize", e)?;
            Ok(mu)
        }
        None => Ok(mu),
    }
}

#[allow(clippy::too_many_arguments)]
fn loss_on_tape(
    tape: &mut Tape,
    x: Var,
    a: Var,
    x_rec: Var,
    a_rec: Var,
    mu: Var,
    log_sigma: Var,
    beta: f64,
) -> Result<LossVars> {
    let dx = tape.sub(x, x_rec)?;
    let dx2 = tape.square(dx);
    let feature_recon = tape.sum(dx2);
    let da = tape.sub(a, a_rec)?;
    let da2 = tape.square(da);
    let structure_recon = tape.sum(da2);
    let kl = kl_on_tape(tape, mu, log_sigma)?;
    let wx = tape.scale(feature_recon, beta);
    let wa = tape.scale(structure_recon, 1.0 - beta);
    let rec = tape.add(wx, wa)?;
    let total = tape.add(rec, kl)?;
    Ok(LossVars {
        total,
        feature_recon,
        structure_recon,
        kl,
    })
}

fn kl_on_tape(tape: &mut Tape, mu: Var, log_sigma: Var) -> Result<Var> {
    let n = tape.value(mu).rows() as f64;
    let two_l = tape.scale(log_sigma, 2.0);
    let var = tape.exp(two_l);
    let mu2 = tape.square(mu);
    let t = tape.sub(two_l, mu2)?;
    let t = tape.sub(t, var)?;
    let t = tape.add_scalar(t, 1.0);
    let s = tape.sum(t);
    Ok(tape.scale(s, -1.0 / (2.0 * n)))
}

/// `Z = Mu + (noise_scale · E) ⊙ exp(LogSigma)`.
pub fn reparameterize(mu: &Matrix, log_sigma: &Matrix, e: &Matrix, noise_scale: f64) -> Result<Matrix> {
    mu.expect_same("reparameterize", log_sigma)?;
    mu.expect_same("reparameterize", e)?;
    if noise_scale < 0.0 {
        return Err(GramError::Domain("noise_scale must be nonnegative".into()));
    }
    let mut z = mu.clone();
    for ((z, &l), &e) in z.data_mut().iter_mut().zip(log_sigma.data()).zip(e.data()) {
        let eps = noise_scale * e;
        if eps != 0.0 {
            *z += eps * l.exp();
        }
    }
    Ok(z)
}

/// `−1/(2N) Σ_{n,d} (1 + 2ℓ − μ² − e^{2ℓ})`, summed over the latent columns.
pub fn kl_loss(mu: &Matrix, log_sigma: &Matrix) -> Result<f64> {
    mu.expect_same("kl_loss", log_sigma)?;
    let n = mu.rows() as f64;
    let s: f64 = mu
        .data()
        .iter()
        .zip(log_sigma.data())
        .map(|(&m, &l)| 1.0 + 2.0 * l - m * m - (2.0 * l).exp())
        .sum();
    Ok(-s / (2.0 * n))
}

#[allow(clippy::too_many_arguments)]
pub fn vgae_loss(
    x: &Matrix,
    a: &Matrix,
    x_rec: &Matrix,
    a_rec: &Matrix,
    mu: &Matrix,
    log_sigma: &Matrix,
    beta: f64,
) -> Result<LossParts> {
    let feature_recon = x.sub(x_rec)?.frobenius_sq();
    let structure_recon = a.sub(a_rec)?.frobenius_sq();
    let kl = kl_loss(mu, log_sigma)?;
    Ok(LossParts {
        total: beta * feature_recon + (1.0 - beta) * structure_recon + kl,
        feature_recon,
        structure_recon,
        kl,
    })
}

/// Per-epoch mean loss terms over the training graphs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub total: f64,
    pub feature_recon: f64,
    pub structure_recon: f64,
    pub kl: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    pub optimizer_steps: u64,
    pub wall_clock_secs: f64,
    pub checkpoint_path: Option<String>,
}

impl TrainReport {
    pub fn losses_csv(&self) -> String {
        let mut out = String::from("epoch,total,feature_recon,structure_recon,kl\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.epoch, e.total, e.feature_recon, e.structure_recon, e.kl
            ));
        }
        out
    }

    pub fn write_losses_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| GramError::io(path, e))?;
        f.write_all(self.losses_csv().as_bytes())
            .map_err(|e| GramError::io(path, e))
    }
}

/// Trains a fresh model on `graphs` (assumed to be the normal class).
///
/// One Adam step per graph, graphs visited in a seeded shuffled order each
/// epoch. Everything random (init, shuffles, dropout, noise) comes from one
/// ChaCha stream seeded with `config.seed`.
pub fn train(graphs: &[Graph], config: &VgaeConfig) -> Result<(VgaeModel, TrainReport)> {
    if graphs.is_empty() {
        return Err(GramError::Domain("training set is empty".into()));
    }
    let input_dim = graphs[0].feature_dim();
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != input_dim) {
        return Err(GramError::shape(
            "train",
            format!("{input_dim} feature columns in every graph"),
            g.feature_dim(),
        ));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = VgaeModel::new(config, input_dim, &mut rng)?;
    let mut adam = AdamState::new(&model.params, AdamConfig::with_learning_rate(config.learning_rate));
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut acc = [0.0f64; 4];
        for &i in &order {
            let parts = match model.train_step(&graphs[i], &mut adam, &mut rng) {
                Ok(p) => p,
                Err(GramError::Numeric(_)) => return Err(GramError::Diverged { epoch: epoch + 1 }),
                Err(e) => return Err(e),
            };
            if !parts.total.is_finite() || !model.params.is_finite() {
                return Err(GramError::Diverged { epoch: epoch + 1 });
            }
            acc[0] += parts.total;
            acc[1] += parts.feature_recon;
            acc[2] += parts.structure_recon;
            acc[3] += parts.kl;
        }
        let n = graphs.len() as f64;
        epochs.push(EpochLoss {
            epoch: epoch + 1,
            total: acc[0] / n,
            feature_recon: acc[1] / n,
            structure_recon: acc[2] / n,
            kl: acc[3] / n,
        });
    }
    let report = TrainReport {
        epochs,
        optimizer_steps: adam.steps(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        checkpoint_path: None,
    };
    Ok((model, report))
}

/// Convenience wrapper: trains on every graph of `ds`.
pub fn train_dataset(ds: &GraphDataset, config: &VgaeConfig) -> Result<(VgaeModel, TrainReport)> {
    train(ds.graphs(), config)
}
