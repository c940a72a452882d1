use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::linalg::{dot_slice, norm2};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Relative residual `|b - Ax| / |b|` to reach.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 2000, restart: 150 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
}

/// Incomplete LU factorisation with zero fill-in, stored on the matrix pattern.
pub struct Ilu0 {
    lu: Vec<f64>,
    diag: Vec<usize>,
    matrix_pattern: std::sync::Arc<super::sparse::SparsityPattern>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let p = a.pattern().clone();
        let n = a.n_rows();
        let mut lu = a.values().to_vec();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(p.find(i, i).ok_or_else(|| Error::SolverBreakdown(format!("row {i} has no diagonal entry")))?);
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let r = p.row_range(i);
            let cols = p.row(i);
            for (k, &j) in cols.iter().enumerate() {
                pos[j] = r.start + k;
            }
            let row_scale = lu[r.clone()].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            for kk in r.start..diag[i] {
                let k = cols[kk - r.start];
                let f = lu[kk] / lu[diag[k]];
                lu[kk] = f;
                for kj in diag[k] + 1..p.row_range(k).end {
                    let j = p.row(k)[kj - p.row_range(k).start];
                    let t = pos[j];
                    if t != usize::MAX {
                        lu[t] -= f * lu[kj];
                    }
                }
            }
            let piv = lu[diag[i]];
            if !piv.is_finite() || piv.abs() <= 1e-14 * row_scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SolverBreakdown(format!(
                    "zero pivot {piv:.3e} in incomplete factorisation at row {i} (singular system?)"
                )));
            }
            for &j in cols {
                pos[j] = usize::MAX;
            }
        }
        Ok(Self { lu, diag, matrix_pattern: p })
    }

    /// `z = (LU)^{-1} r`
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let p = &self.matrix_pattern;
        let n = r.len();
        for i in 0..n {
            let rs = p.row_range(i).start;
            let mut s = r[i];
            for k in rs..self.diag[i] {
                s -= self.lu[k] * z[p.row(i)[k - rs]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let r = p.row_range(i);
            let mut s = z[i];
            for k in self.diag[i] + 1..r.end {
                s -= self.lu[k] * z[p.row(i)[k - r.start]];
            }
            z[i] = s / self.lu[self.diag[i]];
        }
    }
}

/// Right-preconditioned restarted GMRES with ILU(0). `x` holds the initial
/// guess on entry and the solution on exit.
pub fn solve(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<SolveStats> {
    let n = a.n_rows();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats::default());
    }
    let ilu = Ilu0::new(a)?;
    let m = opts.restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0;

    let residual = |x: &[f64], r: &mut [f64]| {
        a.mul_vec(x, r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        norm2(r)
    };

    let mut rnorm = residual(x, &mut r);
    loop {
        if rnorm / bnorm <= opts.tolerance {
            return Ok(SolveStats { iterations: total, residual: rnorm / bnorm });
        }
        if total >= opts.max_iterations {
            return Err(Error::NonConvergence { iterations: total, residual: rnorm / bnorm });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / rnorm).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = rnorm;
        let mut k = 0;
        while k < m && total < opts.max_iterations {
            ilu.apply(&basis[k], &mut z);
            a.mul_vec(&z, &mut w);
            for (j, hj) in h.iter_mut().take(k + 1).enumerate() {
                let hjk = dot_slice(&w, &basis[j]);
                hj[k] = hjk;
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vi;
                }
            }
            let wn = norm2(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 || !d.is_finite() {
                return Err(Error::SolverBreakdown("GMRES Hessenberg column vanished".into()));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            let est = g[k].abs() / bnorm;
            if est <= 0.5 * opts.tolerance || wn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for y, then x += M^{-1} V y
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut vy = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (acc, vj) in vy.iter_mut().zip(&basis[j]) {
                *acc += yj * vj;
            }
        }
        ilu.apply(&vy, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverBreakdown("non-finite iterate".into()));
        }
        rnorm = residual(x, &mut r);
    }
}
