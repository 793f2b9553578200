use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::operator::{layer_slots, mlp, Arch, CorrectionOperator, OperatorContext, SpectralArch};
use crate::problems::FieldSample;
use crate::tape::{BilinearMap, Tape, Var};
use crate::{Error, Result};

/// Truncated sine-series filter on an `n`-point interior grid.
///
/// Forward: `y = sum_j (a_j sin_j + b_j cos_j) * shat_j` where `shat_j` is
/// the DST-I coefficient of `r` and `(a_j, b_j)` are the scaled multipliers.
/// Both transforms run through a length `2 (n + 1)` FFT.
pub struct SineFilter {
    n: usize,
    n_modes: usize,
    modes: usize,
    scales: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SineFilter {
    /// `n_modes` multipliers are expected; only the first `min(n_modes, n)`
    /// modes exist on the grid.
    pub fn new(n: usize, n_modes: usize) -> Self {
        let mut planner = FftPlanner::new();
        let len = 2 * (n + 1);
        let modes = n_modes.min(n);
        Self {
            n,
            n_modes,
            modes,
            scales: (1..=modes).map(SpectralArch::mode_scale).collect(),
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        }
    }

    /// `(sum_l x_l sin, sum_l x_l cos)` for modes `1..=modes`.
    fn analyse(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * (self.n + 1)];
        for (b, v) in buf[1..=self.n].iter_mut().zip(x) {
            b.re = *v;
        }
        self.fwd.process(&mut buf);
        let s = (1..=self.modes).map(|j| -buf[j].im).collect();
        let c = (1..=self.modes).map(|j| buf[j].re).collect();
        (s, c)
    }

    /// `sum_j (ws_j sin_j + wc_j cos_j)` at the interior nodes.
    fn synthesise(&self, ws: &[f64], wc: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * (self.n + 1)];
        for j in 0..self.modes {
            buf[j + 1] = Complex64::new(wc[j], -ws[j]);
        }
        self.inv.process(&mut buf);
        buf[1..=self.n].iter().map(|z| z.re).collect()
    }

    fn coefficients(&self, r: &[f64]) -> Vec<f64> {
        let c = 2.0 / (self.n + 1) as f64;
        self.analyse(r).0.into_iter().map(|s| c * s).collect()
    }

    /// Apply with raw (unscaled) multipliers `m = [a_1..a_M, b_1..b_M]`.
    pub fn apply(&self, r: &[f64], m: &[f64]) -> Vec<f64> {
        self.forward(r, m)
    }
}

impl BilinearMap for SineFilter {
    fn forward(&self, r: &[f64], m: &[f64]) -> Vec<f64> {
        let shat = self.coefficients(r);
        let ws: Vec<f64> = (0..self.modes)
            .map(|j| shat[j] * m[j] * self.scales[j])
            .collect();
        let wc: Vec<f64> = (0..self.modes)
            .map(|j| shat[j] * m[self.n_modes + j] * self.scales[j])
            .collect();
        self.synthesise(&ws, &wc)
    }

    fn backward(&self, r: &[f64], m: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let shat = self.coefficients(r);
        let (gs, gc) = self.analyse(g);
        let mut gm = vec![0.0; 2 * self.n_modes];
        let mut gshat = vec![0.0; self.modes];
        for j in 0..self.modes {
            let sc = self.scales[j];
            gm[j] = gs[j] * shat[j] * sc;
            gm[self.n_modes + j] = gc[j] * shat[j] * sc;
            gshat[j] = (gs[j] * m[j] + gc[j] * m[self.n_modes + j]) * sc;
        }
        let c = 2.0 / (self.n + 1) as f64;
        let gshat: Vec<f64> = gshat.into_iter().map(|v| c * v).collect();
        let gr = self.synthesise(&gshat, &vec![0.0; self.modes]);
        (gr, gm)
    }
}

pub(crate) fn build(arch: &SpectralArch, tape: &mut Tape, r: Var, ctx: &OperatorContext) -> Var {
    let (slots, _) = layer_slots(&arch.cond_widths(), 0);
    let kc = tape.leaf(&ctx.k_train);
    let m = mlp(tape, kc, &slots, false);
    let filter = ctx
        .filter
        .clone()
        .expect("spectral context carries a filter");
    tape.bilinear(r, m, filter)
}

/// Raw multipliers produced by the conditioning net.
pub(crate) fn multipliers(arch: &SpectralArch, params: &[f64], k_train: &[f64]) -> Vec<f64> {
    let (slots, _) = layer_slots(&arch.cond_widths(), 0);
    let mut tape = Tape::new(params);
    let kc = tape.leaf(k_train);
    let m = mlp(&mut tape, kc, &slots, false);
    tape.slice(m).to_vec()
}

/// Spectral correction of `r`, output on the residual's grid.
pub fn spectral_apply(op: &CorrectionOperator, r: &[f64], k: &FieldSample) -> Result<Vec<f64>> {
    if !matches!(op.arch, Arch::Spectral(_)) {
        return Err(Error::InvalidArgument("operator is not spectral".into()));
    }
    op.apply(r, k)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::problems::{assemble_diffusion, Grid1D};

    fn sin_mode(n: usize, j: usize, l: usize) -> f64 {
        (PI * (j * l) as f64 / (n + 1) as f64).sin()
    }

    #[test]
    fn unit_multipliers_reproduce_input() {
        let n = 31;
        let op = CorrectionOperator::spectral_with_multipliers(n, &vec![(1.0, 0.0); n]);
        let g = Grid1D::new(n).unwrap();
        let r: Vec<f64> = (1..=n)
            .map(|i| (i as f64 * 0.7).cos() + 0.1 * i as f64)
            .collect();
        let y = spectral_apply(&op, &r, &FieldSample::constant(g, 1.0)).unwrap();
        for (a, b) in y.iter().zip(&r) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn inverse_eigenvalue_multipliers_solve_laplacian() {
        let n = 63;
        let g = Grid1D::new(n).unwrap();
        let h = g.h();
        let inv: Vec<(f64, f64)> = (1..=n)
            .map(|j| (h * h / (2.0 - 2.0 * (j as f64 * PI * h).cos()), 0.0))
            .collect();
        let op = CorrectionOperator::spectral_with_multipliers(n, &inv);
        let k = FieldSample::constant(g, 1.0);
        let sys = assemble_diffusion(&k, g).unwrap();
        let e: Vec<f64> = (1..=n).map(|i| ((i * i) as f64 * 0.01).sin()).collect();
        let y = spectral_apply(&op, &sys.apply(&e), &k).unwrap();
        for (a, b) in y.iter().zip(&e) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn filter_matches_direct_sums() {
        let (n, m) = (20, 6);
        let f = SineFilter::new(n, m);
        let r: Vec<f64> = (1..=n).map(|i| (1.3 * i as f64).sin()).collect();
        let mult: Vec<f64> = (0..2 * m).map(|i| 0.3 + 0.1 * i as f64).collect();
        let y = f.apply(&r, &mult);
        for l in 1..=n {
            let mut want = 0.0;
            for j in 1..=m {
                let shat: f64 = (1..=n).map(|i| r[i - 1] * sin_mode(n, j, i)).sum::<f64>() * 2.0
                    / (n + 1) as f64;
                let sc = SpectralArch::mode_scale(j);
                let cosl = (PI * (j * l) as f64 / (n + 1) as f64).cos();
                want += shat * sc * (mult[j - 1] * sin_mode(n, j, l) + mult[m + j - 1] * cosl);
            }
            assert!((y[l - 1] - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn filter_backward_is_adjoint() {
        let (n, m) = (17, 5);
        let f = SineFilter::new(n, m);
        let r: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mult: Vec<f64> = (0..2 * m).map(|i| (i as f64 * 0.9).sin()).collect();
        let g: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 1.0).collect();
        let (gr, gm) = f.backward(&r, &mult, &g);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        // y is bilinear, so <g, y(r, m)> = <gr, r> = <gm, m>
        let gy = dot(&g, &f.forward(&r, &mult));
        assert!((gy - dot(&gr, &r)).abs() <= 1e-12 * gy.abs().max(1.0));
        assert!((gy - dot(&gm, &mult)).abs() <= 1e-12 * gy.abs().max(1.0));
    }

    #[test]
    fn zero_operator_is_zero() {
        let op = CorrectionOperator::zero(31);
        let g = Grid1D::new(101).unwrap();
        let y = op
            .apply(&vec![1.0; 101], &FieldSample::constant(g, 1.0))
            .unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_in_residual() {
        let op = CorrectionOperator::init(Arch::Spectral(SpectralArch::new(31)), 3);
        let g = Grid1D::new(61).unwrap();
        let k = FieldSample::constant(g, 0.9);
        let a: Vec<f64> = (0..61).map(|i| (i as f64 * 0.2).sin()).collect();
        let b: Vec<f64> = (0..61).map(|i| (i as f64 * 0.5).cos()).collect();
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let (ya, yb, yab) = (
            op.apply(&a, &k).unwrap(),
            op.apply(&b, &k).unwrap(),
            op.apply(&ab, &k).unwrap(),
        );
        for i in 0..61 {
            assert!((yab[i] - (2.0 * ya[i] - 3.0 * yb[i])).abs() <= 1e-12);
        }
    }
}
