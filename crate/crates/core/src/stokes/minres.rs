use super::uzawa::Outcome;
use super::StokesSystem;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};

/// Applies the symmetric saddle-point matrix [[A, B], [Bᵀ, 0]].
fn apply_k(sys: &StokesSystem, x: &[f64], y: &mut [f64], nu: usize) {
    let (xu, xp) = x.split_at(nu);
    let (yu, yp) = y.split_at_mut(nu);
    sys.apply_velocity(xu, yu);
    let mut bp = vec![0.0; nu];
    sys.apply_gradient(xp, &mut bp);
    axpy(1.0, &bp, yu);
    sys.apply_divergence(xu, yp);
    yp.iter_mut().for_each(|v| *v = -*v);
}

fn apply_m(sys: &StokesSystem, r: &[f64], z: &mut [f64], nu: usize) {
    let (ru, rp) = r.split_at(nu);
    let (zu, zp) = z.split_at_mut(nu);
    sys.precondition_velocity(ru, zu);
    sys.precondition_pressure(rp, zp);
}

/// Block-preconditioned MINRES on the whole system; restarted from the
/// current iterate until the true residuals meet the tolerances.
pub(super) fn solve(sys: &StokesSystem, f: &[f64], g: &[f64], p0: Vec<f64>) -> Result<Outcome> {
    let nu = sys.velocity_len();
    let n = nu + sys.pressure_len();
    let mut b = vec![0.0; n];
    b[..nu].copy_from_slice(f);
    for (bi, gi) in b[nu..].iter_mut().zip(g) {
        *bi = -gi;
    }
    let mut x = vec![0.0; n];
    x[nu..].copy_from_slice(&p0);
    let mut history = Vec::new();
    let mut total = 0usize;
    let mut rtol = 0.1 * sys.tol.momentum.min(sys.tol.divergence);
    loop {
        let its = run(
            sys,
            &b,
            &mut x,
            nu,
            rtol,
            sys.tol.max_outer - total,
            &mut history,
        );
        total += its;
        let (mres, dres) = sys.residuals(&x[..nu], &x[nu..], f, g);
        if mres <= sys.tol.momentum && dres <= sys.tol.divergence {
            break;
        }
        if total >= sys.tol.max_outer {
            return Err(Error::convergence("MINRES", history));
        }
        rtol *= 0.1;
    }
    let p = x.split_off(nu);
    Ok((x, p, total, 0, history))
}

fn run(
    sys: &StokesSystem,
    b: &[f64],
    x: &mut [f64],
    nu: usize,
    rtol: f64,
    max_it: usize,
    history: &mut Vec<f64>,
) -> usize {
    let n = b.len();
    let mut r1 = vec![0.0; n];
    apply_k(sys, x, &mut r1, nu);
    for (ri, bi) in r1.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    sys.project_pressure(&mut r1[nu..]);
    let mut y = vec![0.0; n];
    apply_m(sys, &r1, &mut y, nu);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 == 0.0 {
        return 0;
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (0.0, beta1);
    let (mut dbar, mut epsln, mut phibar) = (0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut its = 0;
    while its < max_it {
        its += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply_k(sys, &v, &mut y, nu);
        if its >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        apply_m(sys, &r2, &mut y, nu);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, x);
        history.push(phibar / beta1);
        if phibar <= rtol * beta1 || beta == 0.0 {
            break;
        }
    }
    its
}
