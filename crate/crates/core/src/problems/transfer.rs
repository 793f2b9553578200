use super::grid::Grid1D;

/// Sparse piecewise-linear interpolation operator (two weights per row).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    n_src: usize,
    rows: Vec<[(usize, f64); 2]>,
}

impl TransferMatrix {
    /// Interpolates values at `src_coords` (sorted) onto `targets`.
    ///
    /// With `zero_ends` the source is treated as having extra zero-valued nodes
    /// at x = 0 and x = 1 (Dirichlet vectors that store interior nodes only).
    /// Targets outside the source span are clamped to the nearest end value.
    pub fn new(src_coords: &[f64], targets: &[f64], zero_ends: bool) -> Self {
        let n_src = src_coords.len();
        let mut xs: Vec<(f64, Option<usize>)> = Vec::with_capacity(n_src + 2);
        if zero_ends {
            xs.push((0.0, None));
        }
        xs.extend(src_coords.iter().enumerate().map(|(i, &x)| (x, Some(i))));
        if zero_ends {
            xs.push((1.0, None));
        }
        let rows = targets
            .iter()
            .map(|&t| {
                let j = xs.partition_point(|(x, _)| *x <= t);
                let (left, right, w) = if j == 0 {
                    (0, 0, 0.0)
                } else if j >= xs.len() {
                    (xs.len() - 1, xs.len() - 1, 0.0)
                } else {
                    let (x0, x1) = (xs[j - 1].0, xs[j].0);
                    (j - 1, j, (t - x0) / (x1 - x0))
                };
                let entry = |k: usize, weight: f64| match xs[k].1 {
                    Some(idx) if weight != 0.0 => (idx, weight),
                    _ => (0, 0.0),
                };
                [entry(left, 1.0 - w), entry(right, w)]
            })
            .collect();
        Self { n_src, rows }
    }

    /// Interior-to-interior transfer between two Dirichlet grids.
    pub fn between(src: &Grid1D, dst: &Grid1D) -> Self {
        Self::new(&src.nodes(), &dst.nodes(), true)
    }

    pub fn n_src(&self) -> usize {
        self.n_src
    }

    pub fn n_dst(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.n_src);
        self.rows
            .iter()
            .map(|[(i, a), (j, b)]| a * v[*i] + b * v[*j])
            .collect()
    }

    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_src];
        for (row, gi) in self.rows.iter().zip(g) {
            for &(idx, w) in row {
                out[idx] += w * gi;
            }
        }
        out
    }
}

/// Piecewise-linear sampling of `(coords, values)` at `targets`.
pub fn sample_piecewise_linear(
    coords: &[f64],
    values: &[f64],
    targets: &[f64],
    zero_ends: bool,
) -> Vec<f64> {
    TransferMatrix::new(coords, targets, zero_ends).apply(values)
}

/// Fine interior vector → coarse interior vector.
pub fn restrict(v: &[f64], coarse: &Grid1D) -> Vec<f64> {
    let fine = Grid1D::new(v.len()).expect("non-empty vector");
    TransferMatrix::between(&fine, coarse).apply(v)
}

/// Coarse interior vector → fine interior vector.
pub fn interpolate(v: &[f64], fine: &Grid1D) -> Vec<f64> {
    let coarse = Grid1D::new(v.len()).expect("non-empty vector");
    TransferMatrix::between(&coarse, fine).apply(v)
}
