//! Minimal reverse-mode tape.
//!
//! Nodes hold dense values (column vectors, or `rows x batch` matrices for
//! batched layers) and the op that produced them. Parameters are read from a
//! borrowed flat slice so that the tape never copies weights; their
//! gradients accumulate into a flat vector with the same layout.
//!
//! Constant linear or affine maps (system matrix, smoother sweeps, grid
//! transfer) plug in through [`TapeMap`]; the spectral filter through
//! [`BilinearMap`]; loss norms through [`ScalarMap`].

use std::sync::Arc;

use nalgebra::{DMatrix, DMatrixView};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Affine map `y = M x + c` with a constant Jacobian `M`.
pub trait TapeMap: Send + Sync {
    fn forward(&self, x: &[f64]) -> Vec<f64>;
    /// `M^T g`
    fn backward(&self, g: &[f64]) -> Vec<f64>;
}

/// Map bilinear in its two arguments, e.g. a filter `y = F(r, multipliers)`.
pub trait BilinearMap: Send + Sync {
    fn forward(&self, a: &[f64], b: &[f64]) -> Vec<f64>;
    /// Returns `(dL/da, dL/db)` given `g = dL/dy`.
    fn backward(&self, a: &[f64], b: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// Scalar-valued function of a vector.
pub trait ScalarMap: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

enum Op {
    Leaf,
    Affine {
        x: Var,
        w: usize,
        b: usize,
        rows: usize,
        cols: usize,
    },
    Tanh(Var),
    Concat(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    ScaleConst(Var, f64),
    ScaleBy {
        x: Var,
        s: Var,
    },
    DivBy {
        x: Var,
        s: Var,
    },
    MaxAbs {
        x: Var,
        index: usize,
    },
    Contract {
        basis: Var,
        coeffs: Var,
        bias: usize,
    },
    Map {
        x: Var,
        map: Arc<dyn TapeMap>,
    },
    Bilinear {
        a: Var,
        b: Var,
        map: Arc<dyn BilinearMap>,
    },
    Scalar {
        x: Var,
        map: Arc<dyn ScalarMap>,
    },
    Sum(Vec<Var>),
}

struct Node {
    value: DMatrix<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [f64],
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [f64]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, value: DMatrix<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &DMatrix<f64> {
        &self.nodes[v.0].value
    }

    pub fn slice(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.as_slice()
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[(0, 0)]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bytes held by node values.
    pub fn bytes(&self) -> usize {
        self.nodes
            .iter()
            .map(|n| n.value.len() * std::mem::size_of::<f64>())
            .sum()
    }

    /// Constant column vector.
    pub fn leaf(&mut self, values: &[f64]) -> Var {
        self.push(
            DMatrix::from_column_slice(values.len(), 1, values),
            Op::Leaf,
        )
    }

    /// Constant matrix.
    pub fn leaf_matrix(&mut self, m: DMatrix<f64>) -> Var {
        self.push(m, Op::Leaf)
    }

    /// `W x + b 1^T` with `W` (`rows x cols`, column-major) at `params[w..]`
    /// and `b` at `params[b..]`.
    pub fn affine(&mut self, x: Var, w: usize, b: usize, rows: usize, cols: usize) -> Var {
        let xv = &self.nodes[x.0].value;
        assert_eq!(xv.nrows(), cols, "affine input has wrong width");
        let wv = DMatrixView::from_slice(&self.params[w..w + rows * cols], rows, cols);
        let mut y = wv * xv;
        let bias = &self.params[b..b + rows];
        for mut col in y.column_iter_mut() {
            for (yi, bi) in col.iter_mut().zip(bias) {
                *yi += bi;
            }
        }
        self.push(
            y,
            Op::Affine {
                x,
                w,
                b,
                rows,
                cols,
            },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.nodes[x.0].value.map(f64::tanh);
        self.push(y, Op::Tanh(x))
    }

    /// Vertical concatenation of two column vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(av.as_slice());
        data.extend_from_slice(bv.as_slice());
        self.push(DMatrix::from_vec(data.len(), 1, data), Op::Concat(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let y = &self.nodes[a.0].value - &self.nodes[b.0].value;
        self.push(y, Op::Sub(a, b))
    }

    pub fn scale_const(&mut self, x: Var, c: f64) -> Var {
        let y = &self.nodes[x.0].value * c;
        self.push(y, Op::ScaleConst(x, c))
    }

    /// `x * s` for a 1x1 node `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let y = &self.nodes[x.0].value * sv;
        self.push(y, Op::ScaleBy { x, s })
    }

    /// `x / s` for a 1x1 node `s`; zero when `s == 0`.
    pub fn div_by(&mut self, x: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let xv = &self.nodes[x.0].value;
        let y = if sv == 0.0 {
            DMatrix::zeros(xv.nrows(), xv.ncols())
        } else {
            xv / sv
        };
        self.push(y, Op::DivBy { x, s })
    }

    /// `max_i |x_i|` as a 1x1 node.
    pub fn max_abs(&mut self, x: Var) -> Var {
        let xv = self.nodes[x.0].value.as_slice();
        let (index, m) = xv.iter().enumerate().fold((0, 0.0f64), |(bi, bm), (i, v)| {
            if v.abs() > bm {
                (i, v.abs())
            } else {
                (bi, bm)
            }
        });
        self.push(DMatrix::from_element(1, 1, m), Op::MaxAbs { x, index })
    }

    /// `basis^T coeffs + bias` where `basis` is `p x q`, `coeffs` is `p x 1`
    /// and the scalar bias is `params[bias]`.
    pub fn contract(&mut self, basis: Var, coeffs: Var, bias: usize) -> Var {
        let mut y = self.nodes[basis.0]
            .value
            .tr_mul(&self.nodes[coeffs.0].value);
        y.add_scalar_mut(self.params[bias]);
        self.push(
            y,
            Op::Contract {
                basis,
                coeffs,
                bias,
            },
        )
    }

    pub fn map(&mut self, x: Var, map: Arc<dyn TapeMap>) -> Var {
        let y = map.forward(self.slice(x));
        self.push(DMatrix::from_vec(y.len(), 1, y), Op::Map { x, map })
    }

    pub fn bilinear(&mut self, a: Var, b: Var, map: Arc<dyn BilinearMap>) -> Var {
        let y = map.forward(self.slice(a), self.slice(b));
        self.push(DMatrix::from_vec(y.len(), 1, y), Op::Bilinear { a, b, map })
    }

    pub fn scalar_map(&mut self, x: Var, map: Arc<dyn ScalarMap>) -> Var {
        let y = map.value(self.slice(x));
        self.push(DMatrix::from_element(1, 1, y), Op::Scalar { x, map })
    }

    /// Sum of same-shaped nodes.
    pub fn sum(&mut self, xs: Vec<Var>) -> Var {
        assert!(!xs.is_empty(), "sum of nothing");
        let mut y = self.nodes[xs[0].0].value.clone();
        for x in &xs[1..] {
            y += &self.nodes[x.0].value;
        }
        self.push(y, Op::Sum(xs))
    }

    /// Reverse sweep from the scalar node `out`; returns `d out / d params`.
    pub fn gradient(&self, out: Var) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        self.backward_into(out, 1.0, &mut grad);
        grad
    }

    /// Reverse sweep accumulating `seed * d out / d params` into `grad`.
    pub fn backward_into(&self, out: Var, seed: f64, grad: &mut [f64]) {
        assert_eq!(
            self.nodes[out.0].value.len(),
            1,
            "gradient needs a scalar output"
        );
        let mut adj: Vec<Option<DMatrix<f64>>> = (0..=out.0).map(|_| None).collect();
        adj[out.0] = Some(DMatrix::from_element(1, 1, seed));

        fn acc(adj: &mut [Option<DMatrix<f64>>], v: Var, g: DMatrix<f64>) {
            match &mut adj[v.0] {
                Some(a) => *a += g,
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=out.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Affine {
                    x,
                    w,
                    b,
                    rows,
                    cols,
                } => {
                    let xv = &self.nodes[x.0].value;
                    let gw = &g * xv.transpose();
                    for (dst, src) in grad[*w..*w + rows * cols].iter_mut().zip(gw.as_slice()) {
                        *dst += src;
                    }
                    for (r, dst) in grad[*b..*b + rows].iter_mut().enumerate() {
                        *dst += g.row(r).sum();
                    }
                    let wv =
                        DMatrixView::from_slice(&self.params[*w..*w + rows * cols], *rows, *cols);
                    acc(&mut adj, *x, wv.tr_mul(&g));
                }
                Op::Tanh(x) => {
                    let gx = g.zip_map(&node.value, |gi, yi| gi * (1.0 - yi * yi));
                    acc(&mut adj, *x, gx);
                }
                Op::Concat(a, b) => {
                    let na = self.nodes[a.0].value.len();
                    let nb = self.nodes[b.0].value.len();
                    acc(
                        &mut adj,
                        *a,
                        DMatrix::from_column_slice(na, 1, &g.as_slice()[..na]),
                    );
                    acc(
                        &mut adj,
                        *b,
                        DMatrix::from_column_slice(nb, 1, &g.as_slice()[na..]),
                    );
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, -g);
                }
                Op::ScaleConst(x, c) => acc(&mut adj, *x, g * *c),
                Op::ScaleBy { x, s } => {
                    let sv = self.scalar(*s);
                    let gs = g.dot(&self.nodes[x.0].value);
                    acc(&mut adj, *s, DMatrix::from_element(1, 1, gs));
                    acc(&mut adj, *x, g * sv);
                }
                Op::DivBy { x, s } => {
                    let sv = self.scalar(*s);
                    if sv != 0.0 {
                        let gs = -g.dot(&self.nodes[x.0].value) / (sv * sv);
                        acc(&mut adj, *s, DMatrix::from_element(1, 1, gs));
                        acc(&mut adj, *x, g / sv);
                    }
                }
                Op::MaxAbs { x, index } => {
                    let xv = &self.nodes[x.0].value;
                    let mut gx = DMatrix::zeros(xv.nrows(), xv.ncols());
                    gx.as_mut_slice()[*index] = g[(0, 0)] * xv.as_slice()[*index].signum();
                    if xv.as_slice()[*index] != 0.0 {
                        acc(&mut adj, *x, gx);
                    }
                }
                Op::Contract {
                    basis,
                    coeffs,
                    bias,
                } => {
                    grad[*bias] += g.sum();
                    let bv = &self.nodes[basis.0].value;
                    let cv = &self.nodes[coeffs.0].value;
                    acc(&mut adj, *coeffs, bv * &g);
                    acc(&mut adj, *basis, cv * g.transpose());
                }
                Op::Map { x, map } => {
                    let gx = map.backward(g.as_slice());
                    acc(&mut adj, *x, DMatrix::from_vec(gx.len(), 1, gx));
                }
                Op::Bilinear { a, b, map } => {
                    let (ga, gb) = map.backward(self.slice(*a), self.slice(*b), g.as_slice());
                    acc(&mut adj, *a, DMatrix::from_vec(ga.len(), 1, ga));
                    acc(&mut adj, *b, DMatrix::from_vec(gb.len(), 1, gb));
                }
                Op::Scalar { x, map } => {
                    let gx = map.gradient(self.slice(*x));
                    let gs = g[(0, 0)];
                    acc(
                        &mut adj,
                        *x,
                        DMatrix::from_iterator(gx.len(), 1, gx.into_iter().map(|v| v * gs)),
                    );
                }
                Op::Sum(xs) => {
                    for x in xs {
                        acc(&mut adj, *x, g.clone());
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct SumSquares;
    impl ScalarMap for SumSquares {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().map(|v| v * v).sum()
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|v| 2.0 * v).collect()
        }
    }

    fn small_net(params: &[f64], input: &[f64]) -> (f64, Vec<f64>) {
        let mut t = Tape::new(params);
        let x = t.leaf(input);
        let s = t.max_abs(x);
        let xn = t.div_by(x, s);
        let h = t.affine(xn, 0, 6, 2, 3);
        let h = t.tanh(h);
        let basis = t.leaf_matrix(DMatrix::from_row_slice(
            2,
            3,
            &[0.3, -0.1, 0.7, 0.2, 0.5, -0.4],
        ));
        let y = t.contract(basis, h, 8);
        let y = t.scale_by(y, s);
        let both = t.concat(y, x);
        let z = t.scale_const(both, 0.5);
        let pad = x_pad(&mut t, input.len());
        let z = t.sub(z, pad);
        let loss = t.scalar_map(z, Arc::new(SumSquares));
        (t.scalar(loss), t.gradient(loss))
    }

    fn x_pad(t: &mut Tape, n: usize) -> Var {
        t.leaf(&vec![0.1; n + 3])
    }

    #[test]
    fn gradient_matches_central_differences() {
        let params: Vec<f64> = (0..9).map(|i| 0.1 * (i as f64 + 1.0).sin()).collect();
        let input = [0.4, -1.3, 0.8];
        let (_, g) = small_net(&params, &input);
        for i in 0..params.len() {
            let eps = 1e-6;
            let mut p = params.clone();
            p[i] += eps;
            let up = small_net(&p, &input).0;
            p[i] -= 2.0 * eps;
            let dn = small_net(&p, &input).0;
            let fd = (up - dn) / (2.0 * eps);
            assert!(
                (fd - g[i]).abs() <= 1e-6 * fd.abs().max(1e-3),
                "param {i}: fd {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn zero_scale_gives_zero() {
        let params = vec![0.5; 9];
        let mut t = Tape::new(&params);
        let x = t.leaf(&[0.0, 0.0, 0.0]);
        let s = t.max_abs(x);
        let xn = t.div_by(x, s);
        assert!(t.slice(xn).iter().all(|v| *v == 0.0));
        assert_eq!(t.bytes(), 8 * 7);
    }
}
