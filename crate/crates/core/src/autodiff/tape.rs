use super::{AutodiffError, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Powf(Var, f64),
    Square(Var),
    Hinge(Var),
    Concat(Vec<Var>),
    Mean(Var),
    ColMean(Var),
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation so that [`Tape::backward`] can replay it in reverse.
///
/// Nodes are appended in evaluation order, which is already a topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node that required them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let shape = &self.shapes[var.0];
                Tensor::new(shape.clone(), vec![0.0; shape.iter().product()]).expect("consistent shape")
            }
        }
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) -> Result<(), AutodiffError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(AutodiffError::Shape(format!("{op}: shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    fn row_operand(&self, op: &str, x: Var, r: Var) -> Result<(), AutodiffError> {
        let (xv, rv) = (self.value(x), self.value(r));
        xv.require_rank2(op)?;
        rv.require_rank2(op)?;
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return Err(AutodiffError::Shape(format!(
                "{op}: row operand {:?} does not broadcast over {:?}",
                rv.shape(),
                xv.shape()
            )));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        av.require_rank2("matmul")?;
        bv.require_rank2("matmul")?;
        if av.cols() != bv.rows() {
            return Err(AutodiffError::Shape(format!("matmul: {:?} x {:?}", av.shape(), bv.shape())));
        }
        let out = av.matmul_raw(bv);
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x + y);
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x - y);
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x * y);
        let ng = self.needs(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    /// `x + row`, with a `1 x n` row broadcast over every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, AutodiffError> {
        self.row_operand("add_row", x, row)?;
        let xv = self.value(x);
        let out = xv.zip(&self.value(row).tile_rows(xv.rows()), |a, b| a + b);
        let ng = self.needs(&[x, row]);
        Ok(self.push(out, Op::AddRow(x, row), ng))
    }

    /// `x * row` elementwise, with a `1 x n` row broadcast over every row of `x`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var, AutodiffError> {
        self.row_operand("mul_row", x, row)?;
        let xv = self.value(x);
        let out = xv.zip(&self.value(row).tile_rows(xv.rows()), |a, b| a * b);
        let ng = self.needs(&[x, row]);
        Ok(self.push(out, Op::MulRow(x, row), ng))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v * c);
        let ng = self.needs(&[x]);
        self.push(out, Op::Scale(x, c), ng)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v + c);
        let ng = self.needs(&[x]);
        self.push(out, Op::AddScalar(x), ng)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let ng = self.needs(&[x]);
        self.push(out, Op::Relu(x), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        let ng = self.needs(&[x]);
        self.push(out, Op::Tanh(x), ng)
    }

    /// Elementwise `x^k`.
    pub fn powf(&mut self, x: Var, k: f64) -> Var {
        let out = self.value(x).map(|v| v.powf(k));
        let ng = self.needs(&[x]);
        self.push(out, Op::Powf(x, k), ng)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        let ng = self.needs(&[x]);
        self.push(out, Op::Square(x), ng)
    }

    /// `max(0, x)` elementwise; same values as [`Tape::relu`], kept separate for readability of losses.
    pub fn hinge(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let ng = self.needs(&[x]);
        self.push(out, Op::Hinge(x), ng)
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let first = parts.first().ok_or_else(|| AutodiffError::Shape("concat of nothing".into()))?;
        let rows = self.value(*first).rows();
        for p in parts {
            let v = self.value(*p);
            v.require_rank2("concat")?;
            if v.rows() != rows {
                return Err(AutodiffError::Shape(format!("concat: row counts {} and {rows} differ", v.rows())));
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row_slice(r));
            }
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let ng = self.needs(parts);
        Ok(self.push(out, Op::Concat(parts.to_vec()), ng))
    }

    /// Mean of every element, as a `1 x 1` scalar.
    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor::scalar(v.data().iter().sum::<f64>() / v.len() as f64);
        let ng = self.needs(&[x]);
        self.push(out, Op::Mean(x), ng)
    }

    /// Sum of every element, as a `1 x 1` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).data().iter().sum());
        let ng = self.needs(&[x]);
        self.push(out, Op::Sum(x), ng)
    }

    /// Per-column mean, as a `1 x n` row.
    pub fn col_mean(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let v = self.value(x);
        v.require_rank2("col_mean")?;
        let m = v.rows() as f64;
        let out = v.col_sum().map(|s| s / m);
        let ng = self.needs(&[x]);
        Ok(self.push(out, Op::ColMean(x), ng))
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients, AutodiffError> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(AutodiffError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                loss_value.shape()
            )));
        }
        let shapes: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::new(loss_value.shape().to_vec(), vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = Some(g);
                continue;
            }
            let nodes = &self.nodes;
            let val = |v: Var| &nodes[v.0].value;
            let mut contributions: Vec<(Var, Tensor)> = Vec::with_capacity(2);
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    contributions.push((*a, g.matmul_raw(&val(*b).transpose())));
                    contributions.push((*b, val(*a).transpose().matmul_raw(&g)));
                }
                Op::Add(a, b) => {
                    contributions.push((*a, g.clone()));
                    contributions.push((*b, g.clone()));
                }
                Op::Sub(a, b) => {
                    contributions.push((*a, g.clone()));
                    contributions.push((*b, g.map(|v| -v)));
                }
                Op::Mul(a, b) => {
                    contributions.push((*a, g.zip(val(*b), |x, y| x * y)));
                    contributions.push((*b, g.zip(val(*a), |x, y| x * y)));
                }
                Op::AddRow(x, r) => {
                    contributions.push((*x, g.clone()));
                    contributions.push((*r, g.col_sum()));
                }
                Op::MulRow(x, r) => {
                    let tiled = val(*r).tile_rows(g.rows());
                    contributions.push((*x, g.zip(&tiled, |a, b| a * b)));
                    contributions.push((*r, g.zip(val(*x), |a, b| a * b).col_sum()));
                }
                Op::Scale(x, c) => contributions.push((*x, g.map(|v| v * c))),
                Op::AddScalar(x) => contributions.push((*x, g.clone())),
                Op::Relu(x) | Op::Hinge(x) => {
                    contributions.push((*x, g.zip(val(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 })))
                }
                Op::Tanh(x) => contributions.push((*x, g.zip(&node.value, |gv, y| gv * (1.0 - y * y)))),
                Op::Powf(x, k) => {
                    let k = *k;
                    contributions.push((*x, g.zip(val(*x), |gv, xv| gv * k * xv.powf(k - 1.0))))
                }
                Op::Square(x) => contributions.push((*x, g.zip(val(*x), |gv, xv| 2.0 * gv * xv))),
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let w = val(*p).cols();
                        let mut data = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row_slice(r)[offset..offset + w]);
                        }
                        offset += w;
                        contributions.push((*p, Tensor::from_vec(rows, w, data)?));
                    }
                }
                Op::Mean(x) => {
                    let n = val(*x).len() as f64;
                    let gv = g.item() / n;
                    contributions.push((*x, val(*x).map(|_| gv)));
                }
                Op::Sum(x) => {
                    let gv = g.item();
                    contributions.push((*x, val(*x).map(|_| gv)));
                }
                Op::ColMean(x) => {
                    let m = val(*x).rows();
                    contributions.push((*x, g.map(|v| v / m as f64).tile_rows(m)));
                }
            }
            for (target, c) in contributions {
                if !self.nodes[target.0].needs_grad {
                    continue;
                }
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&c),
                    slot => *slot = Some(c),
                }
            }
            grads[idx] = Some(g);
        }
        // Gradients are only meaningful for nodes the loss depends on and that need them.
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.needs_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients { grads, shapes })
    }
}
