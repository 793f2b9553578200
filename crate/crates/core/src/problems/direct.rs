use super::system::LinearSystem;
use crate::{Error, Result};

/// Reference solve of `A u = f`.
///
/// SPD systems use the Thomas algorithm; everything else goes through
/// tridiagonal LU with partial pivoting (one extra band of fill).
pub fn direct_solve(sys: &LinearSystem) -> Result<Vec<f64>> {
    if sys.spd {
        thomas(sys)
    } else {
        pivoted_lu(sys)
    }
}

fn thomas(sys: &LinearSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut denom = sys.diag[0];
    if denom == 0.0 {
        return Err(Error::Singular { row: 0 });
    }
    if n > 1 {
        c[0] = sys.sup[0] / denom;
    }
    d[0] = sys.rhs[0] / denom;
    for i in 1..n {
        denom = sys.diag[i] - sys.sub[i - 1] * c[i - 1];
        if denom == 0.0 {
            return Err(Error::Singular { row: i });
        }
        if i + 1 < n {
            c[i] = sys.sup[i] / denom;
        }
        d[i] = (sys.rhs[i] - sys.sub[i - 1] * d[i - 1]) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

fn pivoted_lu(sys: &LinearSystem) -> Result<Vec<f64>> {
    let n = sys.n();
    let mut dl = sys.sub.clone();
    let mut d = sys.diag.clone();
    let mut du = sys.sup.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut b = sys.rhs.clone();

    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return Err(Error::Singular { row: i });
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            // swap rows i and i+1
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return Err(Error::Singular { row: n - 1 });
    }

    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    if n > 1 {
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
    }
    Ok(x)
}
