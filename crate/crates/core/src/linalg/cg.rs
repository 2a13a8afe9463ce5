use nalgebra::{DMatrix, SymmetricEigen};

use super::{axpy, dot, norm2, LinearOperator, Preconditioner};

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    /// Keep the CG coefficients so Ritz values can be extracted afterwards.
    pub record_lanczos: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 0.0,
            max_iter: 5000,
            record_lanczos: false,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CgReport {
    pub iterations: usize,
    pub converged: bool,
    /// Residual 2-norm before each iteration and at exit.
    pub history: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl CgReport {
    pub fn residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

/// Preconditioned conjugate gradients from the initial guess in `x`.
///
/// `project` is applied to residuals and search directions; it removes a known
/// null space (e.g. constants for Neumann problems) and must commute with the
/// operator.
pub fn pcg(
    op: &dyn LinearOperator,
    prec: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: &CgOptions,
    project: Option<&dyn Fn(&mut [f64])>,
) -> CgReport {
    let n = b.len();
    let mut report = CgReport::default();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if let Some(p) = project {
        p(&mut r);
    }
    let target = (opts.rtol * norm2(b)).max(opts.atol);
    let mut rnorm = norm2(&r);
    report.history.push(rnorm);
    if rnorm <= target {
        report.converged = true;
        return report;
    }
    let mut z = vec![0.0; n];
    prec.apply(&r, &mut z);
    if let Some(p) = project {
        p(&mut z);
    }
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    while report.iterations < opts.max_iter {
        op.apply(&d, &mut q);
        let dq = dot(&d, &q);
        if !(dq > 0.0) || !(rz > 0.0) {
            break;
        }
        let alpha = rz / dq;
        axpy(alpha, &d, x);
        axpy(-alpha, &q, &mut r);
        if let Some(p) = project {
            p(&mut r);
        }
        report.iterations += 1;
        rnorm = norm2(&r);
        report.history.push(rnorm);
        if opts.record_lanczos {
            report.alphas.push(alpha);
        }
        if rnorm <= target {
            report.converged = true;
            break;
        }
        prec.apply(&r, &mut z);
        if let Some(p) = project {
            p(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        if opts.record_lanczos {
            report.betas.push(beta);
        }
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    report
}

/// Eigenvalues of the Lanczos tridiagonal matrix implied by the CG
/// coefficients (ascending). They approximate the extreme eigenvalues of the
/// preconditioned operator from inside the spectrum.
pub fn ritz_values(report: &CgReport) -> Vec<f64> {
    let m = report.alphas.len();
    if m == 0 {
        return Vec::new();
    }
    let a = &report.alphas;
    let b = &report.betas;
    let mut t = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = 1.0 / a[j] + if j > 0 { b[j - 1] / a[j - 1] } else { 0.0 };
        if j + 1 < m {
            let off = b[j].sqrt() / a[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}
