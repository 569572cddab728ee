//! Reverse-mode autodiff on a flat tape.
//!
//! A [`Tape`] records one forward computation as a sequence of nodes, each
//! holding its operation and eagerly computed value. [`Tape::backward`]
//! walks the nodes once in reverse, accumulating gradients. Values are
//! always 2-D `f64` matrices; vectors are 1×n.
//!
//! The operation set is exactly what the crate's three models need:
//! dense algebra, row softmax for attention, row gathering for embedding
//! lookup, flat gathering for im2col convolution and pooling, and two
//! fused numerically-stable losses.

use std::sync::Arc;

use ndarray::{Array2, Axis};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    /// Elementwise sum of two same-shape nodes.
    Add(usize, usize),
    /// (m×n) plus a (1×n) row broadcast down the rows.
    AddRowBroadcast(usize, usize),
    /// Multiply by a constant.
    Scale(usize, f64),
    /// Matrix product.
    MatMul(usize, usize),
    Transpose(usize),
    Relu(usize),
    Sigmoid(usize),
    /// Softmax independently along each row.
    SoftmaxRows(usize),
    /// Gather whole rows: out[i] = x[rows[i]] (embedding lookup).
    Rows(usize, Arc<Vec<usize>>),
    /// Gather from the row-major flattening of x: out[i][j] =
    /// flat[idx[i·cols + j]], with negative indices reading 0.0 (used for
    /// zero padding in im2col and pooling).
    GatherFlat(usize, Arc<Vec<i64>>, usize),
    /// Row-major reshape.
    Reshape(usize),
    /// Mean over rows: (m×n) → (1×n).
    MeanRows(usize),
    /// Mean over all elements: → (1×1).
    MeanAll(usize),
    /// Add a constant matrix (attention masks).
    AddConst(usize),
    /// Mean binary cross-entropy of logits against constant 0/1 targets,
    /// computed in the stable fused form; → (1×1).
    BceWithLogits(usize, Arc<Array2<f64>>),
    /// Mean categorical cross-entropy: row t of the logits against target
    /// class ids; → (1×1).
    CeWithLogits(usize, Arc<Vec<usize>>),
}

struct Node {
    op: Op,
    value: Array2<f64>,
}

/// One recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Array2<f64>>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> &Array2<f64> {
        &self.grads[v.0]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.value(a).dim(), self.value(b).dim(), "add shape mismatch");
        let value = self.value(a) + self.value(b);
        self.push(Op::Add(a.0, b.0), value)
    }

    pub fn add_row_broadcast(&mut self, x: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "broadcast operand must be 1×n");
        assert_eq!(self.value(x).ncols(), self.value(row).ncols());
        let value = self.value(x) + &self.value(row).row(0);
        self.push(Op::AddRowBroadcast(x.0, row.0), value)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x) * factor;
        self.push(Op::Scale(x.0, factor), value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a.0, b.0), value)
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).t().to_owned();
        self.push(Op::Transpose(x.0), value)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        self.push(Op::Relu(x.0), value)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(sigmoid);
        self.push(Op::Sigmoid(x.0), value)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let value = softmax_rows(self.value(x));
        self.push(Op::SoftmaxRows(x.0), value)
    }

    pub fn rows(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let src = self.value(x);
        let mut value = Array2::zeros((rows.len(), src.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).assign(&src.row(r));
        }
        self.push(Op::Rows(x.0, Arc::new(rows)), value)
    }

    pub fn gather_flat(&mut self, x: Var, indices: Arc<Vec<i64>>, cols: usize) -> Var {
        assert_eq!(indices.len() % cols, 0, "index count must fill whole rows");
        let flat = self
            .value(x)
            .as_slice()
            .expect("tape values are standard layout")
            .to_vec();
        let rows = indices.len() / cols;
        let mut value = Array2::zeros((rows, cols));
        for (k, &idx) in indices.iter().enumerate() {
            if idx >= 0 {
                value[(k / cols, k % cols)] = flat[idx as usize];
            }
        }
        self.push(Op::GatherFlat(x.0, indices, cols), value)
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let src = self.value(x);
        assert_eq!(src.len(), rows * cols, "reshape must preserve element count");
        let value =
            Array2::from_shape_vec((rows, cols), src.iter().cloned().collect()).unwrap();
        self.push(Op::Reshape(x.0), value)
    }

    pub fn mean_rows(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let value = (src.sum_axis(Axis(0)) / src.nrows() as f64).insert_axis(Axis(0));
        self.push(Op::MeanRows(x.0), value)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let value = Array2::from_elem((1, 1), src.sum() / src.len() as f64);
        self.push(Op::MeanAll(x.0), value)
    }

    pub fn add_const(&mut self, x: Var, constant: &Array2<f64>) -> Var {
        assert_eq!(self.value(x).dim(), constant.dim());
        let value = self.value(x) + constant;
        self.push(Op::AddConst(x.0), value)
    }

    /// Stable mean binary cross-entropy of logits `z` against 0/1 targets:
    /// mean(max(z,0) − y·z + ln(1 + e^{−|z|})).
    pub fn bce_with_logits(&mut self, z: Var, targets: Array2<f64>) -> Var {
        let logits = self.value(z);
        assert_eq!(logits.dim(), targets.dim());
        let mut total = 0.0;
        for (&zi, &yi) in logits.iter().zip(targets.iter()) {
            total += zi.max(0.0) - yi * zi + (-zi.abs()).exp().ln_1p();
        }
        let value = Array2::from_elem((1, 1), total / logits.len() as f64);
        self.push(Op::BceWithLogits(z.0, Arc::new(targets)), value)
    }

    /// Mean categorical cross-entropy: row i of the logits scored against
    /// class `targets[i]` via log-softmax.
    pub fn ce_with_logits(&mut self, z: Var, targets: Vec<usize>) -> Var {
        let logits = self.value(z);
        assert_eq!(logits.nrows(), targets.len());
        let mut total = 0.0;
        for (row, &target) in logits.rows().into_iter().zip(&targets) {
            assert!(target < row.len(), "target class out of range");
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[target];
        }
        let value = Array2::from_elem((1, 1), total / targets.len() as f64);
        self.push(Op::CeWithLogits(z.0, Arc::new(targets)), value)
    }

    /// Accumulates gradients of a scalar (1×1) loss into every node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.value(loss).dim(), (1, 1), "loss must be scalar");
        self.grads = self
            .nodes
            .iter()
            .map(|n| Array2::zeros(n.value.dim()))
            .collect();
        self.grads[loss.0][(0, 0)] = 1.0;

        for i in (0..self.nodes.len()).rev() {
            let grad = self.grads[i].clone();
            if grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    self.grads[*a] += &grad;
                    self.grads[*b] += &grad;
                }
                Op::AddRowBroadcast(x, row) => {
                    self.grads[*x] += &grad;
                    let summed = grad.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.grads[*row] += &summed;
                }
                Op::Scale(x, factor) => {
                    self.grads[*x] += &(&grad * *factor);
                }
                Op::MatMul(a, b) => {
                    let ga = grad.dot(&self.nodes[*b].value.t());
                    let gb = self.nodes[*a].value.t().dot(&grad);
                    self.grads[*a] += &ga;
                    self.grads[*b] += &gb;
                }
                Op::Transpose(x) => {
                    self.grads[*x] += &grad.t();
                }
                Op::Relu(x) => {
                    let mask = self.nodes[*x].value.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                    self.grads[*x] += &(&grad * &mask);
                }
                Op::Sigmoid(x) => {
                    let y = &self.nodes[i].value;
                    self.grads[*x] += &(&grad * &(y * &y.mapv(|v| 1.0 - v)));
                }
                Op::SoftmaxRows(x) => {
                    let y = &self.nodes[i].value;
                    let mut gx = Array2::zeros(y.dim());
                    for (r, (y_row, g_row)) in
                        y.rows().into_iter().zip(grad.rows()).enumerate()
                    {
                        let dot: f64 =
                            y_row.iter().zip(g_row.iter()).map(|(a, b)| a * b).sum();
                        for (c, (&yv, &gv)) in y_row.iter().zip(g_row.iter()).enumerate() {
                            gx[(r, c)] = yv * (gv - dot);
                        }
                    }
                    self.grads[*x] += &gx;
                }
                Op::Rows(x, rows) => {
                    let mut gx = self.grads[*x].clone();
                    for (out_row, &src_row) in rows.iter().enumerate() {
                        let mut target = gx.row_mut(src_row);
                        target += &grad.row(out_row);
                    }
                    self.grads[*x] = gx;
                }
                Op::GatherFlat(x, indices, cols) => {
                    let mut gx = self.grads[*x].clone();
                    {
                        let flat = gx.as_slice_mut().expect("standard layout");
                        for (k, &idx) in indices.iter().enumerate() {
                            if idx >= 0 {
                                flat[idx as usize] += grad[(k / *cols, k % *cols)];
                            }
                        }
                    }
                    self.grads[*x] = gx;
                }
                Op::Reshape(x) => {
                    let shape = self.nodes[*x].value.dim();
                    let back =
                        Array2::from_shape_vec(shape, grad.iter().cloned().collect())
                            .unwrap();
                    self.grads[*x] += &back;
                }
                Op::MeanRows(x) => {
                    let rows = self.nodes[*x].value.nrows() as f64;
                    let spread = &grad.row(0) / rows;
                    let mut gx = self.grads[*x].clone();
                    for mut row in gx.rows_mut() {
                        row += &spread;
                    }
                    self.grads[*x] = gx;
                }
                Op::MeanAll(x) => {
                    let count = self.nodes[*x].value.len() as f64;
                    self.grads[*x] += &Array2::from_elem(
                        self.nodes[*x].value.dim(),
                        grad[(0, 0)] / count,
                    );
                }
                Op::AddConst(x) => {
                    self.grads[*x] += &grad;
                }
                Op::BceWithLogits(x, targets) => {
                    let z = &self.nodes[*x].value;
                    let count = z.len() as f64;
                    let g0 = grad[(0, 0)];
                    let gx = z.mapv(sigmoid) - targets.as_ref();
                    self.grads[*x] += &(gx * (g0 / count));
                }
                Op::CeWithLogits(x, targets) => {
                    let z = &self.nodes[*x].value;
                    let rows = targets.len() as f64;
                    let g0 = grad[(0, 0)];
                    let mut gx = softmax_rows(z);
                    for (r, &t) in targets.iter().enumerate() {
                        gx[(r, t)] -= 1.0;
                    }
                    self.grads[*x] += &(gx * (g0 / rows));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
    }

    /// Central finite-difference check of d(loss)/d(x) for a graph built by
    /// `build` from a single input leaf.
    fn check_gradient(x0: &Array2<f64>, build: impl Fn(&mut Tape, Var) -> Var) {
        let mut tape = Tape::new();
        let x = tape.leaf(x0.clone());
        let loss = build(&mut tape, x);
        tape.backward(loss);
        let analytic = tape.grad(x).clone();

        let h = 1e-6;
        for idx in 0..x0.len() {
            let evaluate = |delta: f64| {
                let mut perturbed = x0.clone();
                perturbed.as_slice_mut().unwrap()[idx] += delta;
                let mut tape = Tape::new();
                let x = tape.leaf(perturbed);
                let loss = build(&mut tape, x);
                tape.value(loss)[(0, 0)]
            };
            let numeric = (evaluate(h) - evaluate(-h)) / (2.0 * h);
            let got = analytic.as_slice().unwrap()[idx];
            assert!(
                (got - numeric).abs() <= 1e-5 * (1.0 + numeric.abs()),
                "element {idx}: analytic {got} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn add_and_scale_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = random(&mut rng, 2, 3);
        check_gradient(&x0, |tape, x| {
            let doubled = tape.scale(x, 2.5);
            let sum = tape.add(x, doubled);
            tape.mean_all(sum)
        });
    }

    #[test]
    fn row_broadcast_gradient_on_both_operands() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = random(&mut rng, 3, 4);
        let row = random(&mut rng, 1, 4);
        check_gradient(&x0, |tape, x| {
            let r = tape.leaf(row.clone());
            let s = tape.add_row_broadcast(x, r);
            tape.mean_all(s)
        });
        let base = random(&mut rng, 3, 4);
        check_gradient(&row, |tape, r| {
            let x = tape.leaf(base.clone());
            let s = tape.add_row_broadcast(x, r);
            tape.mean_all(s)
        });
    }

    #[test]
    fn matmul_gradient_on_both_operands() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a0 = random(&mut rng, 2, 4);
        let b0 = random(&mut rng, 4, 3);
        check_gradient(&a0, |tape, a| {
            let b = tape.leaf(b0.clone());
            let p = tape.matmul(a, b);
            tape.mean_all(p)
        });
        check_gradient(&b0, |tape, b| {
            let a = tape.leaf(a0.clone());
            let p = tape.matmul(a, b);
            tape.mean_all(p)
        });
    }

    #[test]
    fn transpose_relu_sigmoid_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x0 = random(&mut rng, 3, 2);
        check_gradient(&x0, |tape, x| {
            let t = tape.transpose(x);
            let r = tape.relu(t);
            tape.mean_all(r)
        });
        check_gradient(&x0, |tape, x| {
            let s = tape.sigmoid(x);
            tape.mean_all(s)
        });
    }

    #[test]
    fn softmax_rows_gradient_and_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x0 = random(&mut rng, 3, 5);
        check_gradient(&x0, |tape, x| {
            let s = tape.softmax_rows(x);
            let w = tape.leaf(Array2::from_shape_fn((5, 4), |(i, j)| {
                ((i * 4 + j) as f64).sin()
            }));
            // Weighted sum so the gradient is not uniform across the row.
            let prod = tape.matmul(s, w);
            tape.mean_all(prod)
        });

        let mut tape = Tape::new();
        let x = tape.leaf(x0 * 30.0);
        let s = tape.softmax_rows(x);
        for row in tape.value(s).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn rows_gather_accumulates_repeated_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x0 = random(&mut rng, 4, 3);
        check_gradient(&x0, |tape, x| {
            let g = tape.rows(x, vec![1, 1, 3, 0]);
            tape.mean_all(g)
        });
    }

    #[test]
    fn gather_flat_skips_padding_indices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x0 = random(&mut rng, 2, 4);
        let indices = Arc::new(vec![0i64, -1, 3, 5, -1, 7, 2, 2, 1]);
        check_gradient(&x0, |tape, x| {
            let g = tape.gather_flat(x, indices.clone(), 3);
            tape.mean_all(g)
        });

        let mut tape = Tape::new();
        let x = tape.leaf(arr2(&[[1.0, 2.0], [3.0, 4.0]]));
        let g = tape.gather_flat(x, Arc::new(vec![3, -1]), 2);
        assert_eq!(tape.value(g), &arr2(&[[4.0, 0.0]]));
    }

    #[test]
    fn reshape_and_mean_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x0 = random(&mut rng, 2, 6);
        check_gradient(&x0, |tape, x| {
            let r = tape.reshape(x, 3, 4);
            let m = tape.mean_rows(r);
            tape.mean_all(m)
        });
    }

    #[test]
    fn bce_with_logits_matches_definition_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z0 = random(&mut rng, 1, 6) * 3.0;
        let targets = Array2::from_shape_fn((1, 6), |(_, j)| (j % 2) as f64);

        let mut tape = Tape::new();
        let z = tape.leaf(z0.clone());
        let loss = tape.bce_with_logits(z, targets.clone());
        // Direct evaluation of mean −[y ln σ(z) + (1−y) ln(1−σ(z))].
        let direct: f64 = z0
            .iter()
            .zip(targets.iter())
            .map(|(&z, &y)| {
                let p = sigmoid(z);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 6.0;
        assert!((tape.value(loss)[(0, 0)] - direct).abs() < 1e-12);

        check_gradient(&z0, |tape, z| tape.bce_with_logits(z, targets.clone()));
    }

    #[test]
    fn ce_with_logits_matches_log_softmax_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let z0 = random(&mut rng, 3, 5) * 2.0;
        let targets = vec![4usize, 0, 2];

        let mut tape = Tape::new();
        let z = tape.leaf(z0.clone());
        let loss = tape.ce_with_logits(z, targets.clone());
        let probs = softmax_rows(&z0);
        let direct: f64 = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| -probs[(r, t)].ln())
            .sum::<f64>()
            / 3.0;
        assert!((tape.value(loss)[(0, 0)] - direct).abs() < 1e-12);

        check_gradient(&z0, |tape, z| tape.ce_with_logits(z, targets.clone()));
    }

    #[test]
    fn backward_through_a_small_composite_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x0 = random(&mut rng, 2, 4);
        let w1 = random(&mut rng, 4, 6);
        let b1 = random(&mut rng, 1, 6);
        let w2 = random(&mut rng, 6, 3);
        check_gradient(&x0, |tape, x| {
            let w1v = tape.leaf(w1.clone());
            let b1v = tape.leaf(b1.clone());
            let w2v = tape.leaf(w2.clone());
            let h = tape.matmul(x, w1v);
            let h = tape.add_row_broadcast(h, b1v);
            let h = tape.relu(h);
            let z = tape.matmul(h, w2v);
            tape.ce_with_logits(z, vec![0, 2])
        });
    }
}
