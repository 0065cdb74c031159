//! Wengert tape for reverse-mode differentiation over [`Matrix`] values.
//!
//! Every operation appends a node holding its value and the indices of its
//! inputs. A reverse sweep from an output node accumulates vector-Jacobian
//! products into every node that (transitively) depends on a leaf created
//! with `requires_grad = true`. Intermediate nodes keep their gradients, so
//! the gradient at an embedding such as `H` can be read back directly.
//!
//! A tape supports exactly one reverse sweep. [`Tape::backward_multi`] runs
//! several seeds in that single sweep, which is how attention maps obtain one
//! gradient per latent dimension without re-running the forward pass.

use std::sync::Arc;

use crate::error::{GramError, Result};
use crate::nn::activation;
use crate::nn::matrix::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulNT(Var, Var),
    /// `S · x` for a constant propagation matrix `S`.
    Propagate(Arc<Matrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// Elementwise product with a constant (dropout masks, reparameterization noise).
    MulConst(Var, Matrix),
    /// Broadcast a 1×c bias over every row.
    AddBias(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Gelu(Var),
    Sigmoid(Var),
    Exp(Var),
    Square(Var),
    /// Column sums as a 1×c row (global add pooling).
    SumRows(Var),
    /// Sum of all entries as a 1×1 matrix.
    Sum(Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Result of a reverse sweep: one optional gradient per tape node.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient at `v`, or `None` when `v` does not influence the output
    /// (or does not depend on any differentiable leaf).
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient at `v`, materialising zeros of `shape` when absent.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Matrix {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Matrix, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, op, rg)
    }

    /// A differentiable leaf (parameter or marked input).
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant leaf; gradients never flow into it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.derived(v, Op::MatMul(a, b), &[a, b]))
    }

    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul_nt(self.value(b))?;
        Ok(self.derived(v, Op::MatMulNT(a, b), &[a, b]))
    }

    pub fn propagate(&mut self, s: &Arc<Matrix>, x: Var) -> Result<Var> {
        let v = s.matmul(self.value(x))?;
        Ok(self.derived(v, Op::Propagate(Arc::clone(s), x), &[x]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.derived(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).sub(self.value(b))?;
        Ok(self.derived(v, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).hadamard(self.value(b))?;
        Ok(self.derived(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn mul_const(&mut self, x: Var, c: Matrix) -> Result<Var> {
        let v = self.value(x).hadamard(&c)?;
        Ok(self.derived(v, Op::MulConst(x, c), &[x]))
    }

    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let xv = self.value(x);
        let bv = self.value(bias);
        bv.expect_shape("add_bias", 1, xv.cols())?;
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        Ok(self.derived(out, Op::AddBias(x, bias), &[x, bias]))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x).scale(c);
        self.derived(v, Op::Scale(x, c), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let v = self.value(x).map(|a| a + c);
        self.derived(v, Op::AddScalar(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(activation::relu);
        self.derived(v, Op::Relu(x), &[x])
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(activation::gelu);
        self.derived(v, Op::Gelu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let v = self.value(x).map(activation::sigmoid);
        self.derived(v, Op::Sigmoid(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let v = self.value(x).map(f64::exp);
        self.derived(v, Op::Exp(x), &[x])
    }

    pub fn square(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|a| a * a);
        self.derived(v, Op::Square(x), &[x])
    }

    pub fn sum_rows(&mut self, x: Var) -> Var {
        let v = self.value(x).sum_rows();
        self.derived(v, Op::SumRows(x), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Matrix::filled(1, 1, self.value(x).sum());
        self.derived(v, Op::Sum(x), &[x])
    }

    /// Reverse sweep from `output` seeded with `seed`, i.e. the gradient of
    /// `⟨seed, output⟩` with respect to every node.
    pub fn backward(&mut self, output: Var, seed: &Matrix) -> Result<Gradients> {
        let mut all = self.backward_multi(output, std::slice::from_ref(seed))?;
        Ok(all.pop().expect("one seed in, one gradient set out"))
    }

    /// Reverse sweep for several seeds at once. Consumes the tape.
    pub fn backward_multi(&mut self, output: Var, seeds: &[Matrix]) -> Result<Vec<Gradients>> {
        if self.consumed {
            return Err(GramError::State(
                "tape already consumed by a backward pass".into(),
            ));
        }
        let out_shape = self.value(output).shape();
        for seed in seeds {
            seed.expect_shape("backward seed", out_shape.0, out_shape.1)?;
        }
        self.consumed = true;
        Ok(seeds.iter().map(|s| self.sweep(output, s)).collect())
    }

    fn sweep(&self, output: Var, seed: &Matrix) -> Gradients {
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed.clone());

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].clone() else {
                continue;
            };
            self.accumulate_inputs(node, &g, &mut grads);
        }
        Gradients { grads }
    }

    fn accumulate_inputs(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut send = |v: Var, contrib: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&contrib),
                slot @ None => *slot = Some(contrib),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        // Shapes were validated on the forward pass, so the products below
        // cannot fail.
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                send(*a, g.matmul_nt(val(*b)).unwrap());
                send(*b, val(*a).matmul_tn(g).unwrap());
            }
            Op::MatMulNT(a, b) => {
                send(*a, g.matmul(val(*b)).unwrap());
                send(*b, g.matmul_tn(val(*a)).unwrap());
            }
            Op::Propagate(s, x) => send(*x, s.matmul_tn(g).unwrap()),
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::Sub(a, b) => {
                send(*a, g.clone());
                send(*b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                send(*a, g.hadamard(val(*b)).unwrap());
                send(*b, g.hadamard(val(*a)).unwrap());
            }
            Op::MulConst(x, c) => send(*x, g.hadamard(c).unwrap()),
            Op::AddBias(x, b) => {
                send(*x, g.clone());
                send(*b, g.sum_rows());
            }
            Op::Scale(x, c) => send(*x, g.scale(*c)),
            Op::AddScalar(x) => send(*x, g.clone()),
            Op::Relu(x) => send(*x, g.zip_with(val(*x), |g, a| g * activation::relu_grad(a)).unwrap()),
            Op::Gelu(x) => send(*x, g.zip_with(val(*x), |g, a| g * activation::gelu_grad(a)).unwrap()),
            Op::Sigmoid(x) => send(
                *x,
                g.zip_with(&node.value, |g, y| g * y * (1.0 - y)).unwrap(),
            ),
            Op::Exp(x) => send(*x, g.hadamard(&node.value).unwrap()),
            Op::Square(x) => send(*x, g.zip_with(val(*x), |g, a| 2.0 * g * a).unwrap()),
            Op::SumRows(x) => {
                let rows = val(*x).rows();
                let mut out = Matrix::zeros(rows, g.cols());
                for r in 0..rows {
                    out.row_mut(r).copy_from_slice(g.data());
                }
                send(*x, out);
            }
            Op::Sum(x) => {
                let (r, c) = val(*x).shape();
                send(*x, Matrix::filled(r, c, g.data()[0]));
            }
        }
    }
}
