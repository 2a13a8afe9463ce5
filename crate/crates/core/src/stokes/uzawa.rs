use super::StokesSystem;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, pcg, CgOptions, LinearOperator, Preconditioner};

pub(super) type Outcome = (Vec<f64>, Vec<f64>, usize, usize, Vec<f64>);

pub(super) struct VelocityOp<'a>(pub &'a StokesSystem);

impl LinearOperator for VelocityOp<'_> {
    fn len(&self) -> usize {
        self.0.velocity_len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_velocity(x, y)
    }
}

pub(super) struct VelocityPrec<'a>(pub &'a StokesSystem);

impl Preconditioner for VelocityPrec<'_> {
    fn name(&self) -> &str {
        "velocity"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.0.precondition_velocity(r, z)
    }
}

fn inner_solve(sys: &StokesSystem, b: &[f64], x: &mut [f64], count: &mut usize) -> Result<()> {
    let opts = CgOptions {
        rtol: sys.tol.inner_rtol,
        atol: 0.0,
        max_iter: sys.tol.max_inner,
        record_lanczos: false,
    };
    let rep = pcg(&VelocityOp(sys), &VelocityPrec(sys), b, x, &opts, None);
    *count += rep.iterations;
    if !rep.converged {
        return Err(Error::convergence("inner velocity solve", rep.history));
    }
    Ok(())
}

/// Conjugate gradients on the Schur complement S = Bᵀ A⁻¹ B, B = W∇.
pub(super) fn solve(sys: &StokesSystem, f: &[f64], g: &[f64], mut p: Vec<f64>) -> Result<Outcome> {
    let nu = sys.velocity_len();
    let np = sys.pressure_len();
    let h3 = sys.grid.cell_volume();
    let mut inner = 0usize;
    let mut bp = vec![0.0; nu];
    sys.apply_gradient(&p, &mut bp);
    let rhs: Vec<f64> = f.iter().zip(&bp).map(|(a, b)| a - b).collect();
    let mut u = vec![0.0; nu];
    inner_solve(sys, &rhs, &mut u, &mut inner)?;
    let mut r = vec![0.0; np];
    sys.apply_divergence(&u, &mut r);
    for (ri, gi) in r.iter_mut().zip(g) {
        *ri = gi - *ri;
    }
    sys.project_pressure(&mut r);
    let fnorm = sys.l2(f);
    let energy = |u: &[f64], bp: &[f64]| {
        let e: f64 = u
            .iter()
            .zip(f)
            .zip(bp)
            .map(|((ui, fi), bi)| ui * (fi - bi))
            .sum();
        (h3 * e).max(0.0).sqrt()
    };
    let mut z = vec![0.0; np];
    sys.precondition_pressure(&r, &mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let mut w = vec![0.0; nu];
    let mut bd = vec![0.0; nu];
    let mut sd = vec![0.0; np];
    let mut outer = 0;
    loop {
        let scale = sys.divergence_scale(g, energy(&u, &bp), fnorm);
        let rn = sys.l2(&r);
        history.push(if scale > 0.0 { rn / scale } else { rn });
        if rn <= sys.tol.divergence * scale {
            break;
        }
        if outer >= sys.tol.max_outer {
            return Err(Error::convergence("Uzawa outer iteration", history));
        }
        sys.apply_gradient(&d, &mut bd);
        w.iter_mut().for_each(|v| *v = 0.0);
        inner_solve(sys, &bd, &mut w, &mut inner)?;
        sys.apply_divergence(&w, &mut sd);
        sd.iter_mut().for_each(|v| *v = -*v);
        sys.project_pressure(&mut sd);
        let dsd = dot(&d, &sd);
        if !(dsd > 0.0) || !(rz > 0.0) {
            return Err(Error::convergence(
                "Uzawa outer iteration (breakdown)",
                history,
            ));
        }
        let alpha = rz / dsd;
        axpy(alpha, &d, &mut p);
        axpy(-alpha, &w, &mut u);
        axpy(alpha, &bd, &mut bp);
        axpy(-alpha, &sd, &mut r);
        sys.project_pressure(&mut r);
        outer += 1;
        sys.precondition_pressure(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    Ok((u, p, outer, inner, history))
}
