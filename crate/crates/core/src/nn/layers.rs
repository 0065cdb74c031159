//! Layer descriptions, parameter storage and the sequential forward pass.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::nn::matrix::Matrix;
use crate::nn::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    /// `S · H · W` with the normalized adjacency `S`; no bias.
    Gcn,
    /// `H · W + b`.
    Affine,
    Gelu,
    Relu,
    Dropout { rate: f64 },
    /// Sum over node rows, N×d → 1×d.
    GlobalAddPool,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Gcn => write!(f, "gcn"),
            LayerKind::Affine => write!(f, "affine"),
            LayerKind::Gelu => write!(f, "gelu"),
            LayerKind::Relu => write!(f, "relu"),
            LayerKind::Dropout { rate } => write!(f, "dropout({rate})"),
            LayerKind::GlobalAddPool => write!(f, "global_add_pool"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerSpec {
    pub fn gcn(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Gcn,
            in_dim,
            out_dim,
        }
    }

    pub fn affine(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Affine,
            in_dim,
            out_dim,
        }
    }

    pub fn gelu(dim: usize) -> Self {
        Self::elementwise(LayerKind::Gelu, dim)
    }

    pub fn relu(dim: usize) -> Self {
        Self::elementwise(LayerKind::Relu, dim)
    }

    pub fn dropout(dim: usize, rate: f64) -> Self {
        Self::elementwise(LayerKind::Dropout { rate }, dim)
    }

    pub fn global_add_pool(dim: usize) -> Self {
        Self::elementwise(LayerKind::GlobalAddPool, dim)
    }

    fn elementwise(kind: LayerKind, dim: usize) -> Self {
        LayerSpec {
            kind,
            in_dim: dim,
            out_dim: dim,
        }
    }

    fn has_weight(&self) -> bool {
        matches!(self.kind, LayerKind::Gcn | LayerKind::Affine)
    }

    fn has_bias(&self) -> bool {
        matches!(self.kind, LayerKind::Affine)
    }
}

/// Checks that consecutive layers agree on width and every spec is well formed.
pub fn validate_chain(specs: &[LayerSpec]) -> Result<()> {
    for (k, spec) in specs.iter().enumerate() {
        if spec.in_dim == 0 || spec.out_dim == 0 {
            return Err(GramError::Domain(format!("layer {k}: zero width")));
        }
        match spec.kind {
            LayerKind::Gcn | LayerKind::Affine => {}
            LayerKind::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                return Err(GramError::Domain(format!(
                    "layer {k}: dropout rate {rate} outside [0, 1)"
                )));
            }
            _ if spec.in_dim != spec.out_dim => {
                return Err(GramError::Domain(format!(
                    "layer {k}: {} must preserve width",
                    spec.kind
                )));
            }
            _ => {}
        }
        if let Some(next) = specs.get(k + 1) {
            if next.in_dim != spec.out_dim {
                return Err(GramError::shape(
                    "layer chain",
                    format!("layer {} in_dim {}", k + 1, spec.out_dim),
                    next.in_dim,
                ));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    GlorotUniform,
    /// Identity weights and zero biases on every layer.
    IdentityDebug,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedParam {
    pub name: String,
    pub value: Matrix,
}

/// Ordered, named parameter storage shared by all sub-networks of a model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    entries: Vec<NamedParam>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Matrix) -> usize {
        self.entries.push(NamedParam {
            name: name.into(),
            value,
        });
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Matrix {
        &self.entries[idx].value
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Matrix {
        &mut self.entries[idx].value
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.entries[idx].name
    }

    pub fn by_name(&self, name: &str) -> Option<&Matrix> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.value)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedParam> {
        self.entries.iter()
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.entries.iter_mut().map(|e| &mut e.value)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|e| e.value.shape()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.value.is_finite())
    }

    /// Places every parameter on the tape as a leaf.
    pub fn bind(&self, tape: &mut Tape, requires_grad: bool) -> Vec<Var> {
        self.entries
            .iter()
            .map(|e| {
                if requires_grad {
                    tape.leaf(e.value.clone())
                } else {
                    tape.constant(e.value.clone())
                }
            })
            .collect()
    }
}

/// Draws one weight matrix (and bias) per layer according to `scheme`.
fn init_layer(
    spec: &LayerSpec,
    rng: &mut dyn RngCore,
    scheme: InitScheme,
) -> Result<(Option<Matrix>, Option<Matrix>)> {
    if !spec.has_weight() {
        return Ok((None, None));
    }
    let w = match scheme {
        InitScheme::GlorotUniform => {
            let a = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
            let data = (0..spec.in_dim * spec.out_dim)
                .map(|_| rng.random_range(-a..=a))
                .collect();
            Matrix::from_vec(spec.in_dim, spec.out_dim, data)?
        }
        InitScheme::IdentityDebug => {
            if spec.in_dim != spec.out_dim {
                return Err(GramError::Domain(format!(
                    "identity_debug needs square layers, got {} {}→{}",
                    spec.kind, spec.in_dim, spec.out_dim
                )));
            }
            Matrix::identity(spec.in_dim)
        }
    };
    let b = spec.has_bias().then(|| Matrix::zeros(1, spec.out_dim));
    Ok((Some(w), b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Slot {
    weight: Option<usize>,
    bias: Option<usize>,
}

/// A chain of layers whose parameters live in a shared [`Params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    specs: Vec<LayerSpec>,
    slots: Vec<Slot>,
}

impl Sequential {
    /// Validates `specs` and appends freshly initialised parameters for them
    /// to `params`, named `{prefix}.{k}.weight` / `{prefix}.{k}.bias`.
    pub fn init(
        specs: Vec<LayerSpec>,
        prefix: &str,
        params: &mut Params,
        rng: &mut dyn RngCore,
        scheme: InitScheme,
    ) -> Result<Self> {
        validate_chain(&specs)?;
        let mut slots = Vec::with_capacity(specs.len());
        for (k, spec) in specs.iter().enumerate() {
            let (w, b) = init_layer(spec, rng, scheme)?;
            slots.push(Slot {
                weight: w.map(|w| params.push(format!("{prefix}.{k}.weight"), w)),
                bias: b.map(|b| params.push(format!("{prefix}.{k}.bias"), b)),
            });
        }
        Ok(Sequential { specs, slots })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.specs.first().map(|s| s.in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.specs.last().map(|s| s.out_dim)
    }

    /// Runs the chain on `input`, recording every step on `tape`. `bound`
    /// holds the tape handles of the shared parameter set (see
    /// [`Params::bind`]).
    pub fn forward(
        &self,
        tape: &mut Tape,
        bound: &[Var],
        input: Var,
        ctx: &mut ForwardCtx<'_>,
    ) -> Result<Var> {
        let mut h = input;
        for (k, (spec, slot)) in self.specs.iter().zip(&self.slots).enumerate() {
            let cols = tape.value(h).cols();
            if cols != spec.in_dim {
                return Err(GramError::shape(
                    "layer input",
                    format!("layer {k} ({}) width {}", spec.kind, spec.in_dim),
                    cols,
                ));
            }
            h = match spec.kind {
                LayerKind::Gcn => {
                    let s = ctx.adjacency.ok_or_else(|| {
                        GramError::Domain(format!("layer {k}: gcn needs an adjacency"))
                    })?;
                    let hw = tape.matmul(h, bound[slot.weight.expect("gcn weight")])?;
                    tape.propagate(s, hw)?
                }
                LayerKind::Affine => {
                    let hw = tape.matmul(h, bound[slot.weight.expect("affine weight")])?;
                    tape.add_bias(hw, bound[slot.bias.expect("affine bias")])?
                }
                LayerKind::Gelu => tape.gelu(h),
                LayerKind::Relu => tape.relu(h),
                LayerKind::Dropout { rate } => dropout(tape, h, rate, ctx)?,
                LayerKind::GlobalAddPool => tape.sum_rows(h),
            };
            if !tape.value(h).is_finite() {
                return Err(GramError::Numeric(format!("layer {k} ({})", spec.kind)));
            }
        }
        Ok(h)
    }
}

/// Everything a forward pass needs besides the parameters.
pub struct ForwardCtx<'a> {
    pub adjacency: Option<&'a Arc<Matrix>>,
    pub mode: Mode,
    pub rng: Option<&'a mut dyn RngCore>,
}

impl<'a> ForwardCtx<'a> {
    pub fn eval(adjacency: Option<&'a Arc<Matrix>>) -> Self {
        ForwardCtx {
            adjacency,
            mode: Mode::Eval,
            rng: None,
        }
    }

    pub fn train(adjacency: Option<&'a Arc<Matrix>>, rng: &'a mut dyn RngCore) -> Self {
        ForwardCtx {
            adjacency,
            mode: Mode::Train,
            rng: Some(rng),
        }
    }
}

fn dropout(tape: &mut Tape, h: Var, rate: f64, ctx: &mut ForwardCtx<'_>) -> Result<Var> {
    if ctx.mode == Mode::Eval || rate == 0.0 {
        return Ok(h);
    }
    let rng = ctx
        .rng
        .as_deref_mut()
        .ok_or_else(|| GramError::Domain("dropout in train mode needs an rng".into()))?;
    let keep = 1.0 - rate;
    let (r, c) = tape.value(h).shape();
    let data = (0..r * c)
        .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    tape.mul_const(h, Matrix::from_vec(r, c, data)?)
}

/// Builds a standalone network: validated specs plus freshly drawn parameters.
pub fn init_params(
    specs: &[LayerSpec],
    rng: &mut dyn RngCore,
    scheme: InitScheme,
) -> Result<(Sequential, Params)> {
    let mut params = Params::new();
    let net = Sequential::init(specs.to_vec(), "layer", &mut params, rng, scheme)?;
    Ok((net, params))
}

/// One-shot forward pass of a standalone network on `input`; returns the
/// tape, the output handle, the input handle and the parameter handles.
pub fn forward(
    net: &Sequential,
    params: &Params,
    input: &Matrix,
    ctx: &mut ForwardCtx<'_>,
) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, true);
    let x = tape.leaf(input.clone());
    let out = net.forward(&mut tape, &bound, x, ctx)?;
    Ok(ForwardOutput {
        tape,
        output: out,
        input: x,
        params: bound,
    })
}

pub struct ForwardOutput {
    pub tape: Tape,
    pub output: Var,
    pub input: Var,
    pub params: Vec<Var>,
}
