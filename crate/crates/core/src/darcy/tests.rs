use super::*;
use crate::forcing::{Constant, Gradient, Vortex};
use crate::geometry::DomainSpec;

fn cube(n: usize) -> GridSpec {
    GridSpec::with_cells(DomainSpec::unit_cube(), n).unwrap()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn zero_forcing() {
    let g = cube(8);
    let s = solve_darcy(&g, &ResistanceMatrix::isotropic(2.0).unwrap(), 1.0, &ForcingSpec::zero(), 1e-10).unwrap();
    assert_eq!(max_abs(&s.u.data), 0.0);
    assert_eq!(max_abs(&s.p.data), 0.0);
}

#[test]
fn constant_force_is_absorbed_by_pressure() {
    let g = cube(12);
    let force = [0.3, -1.0, 2.0];
    let s = solve_darcy(&g, &ResistanceMatrix::isotropic(3.0).unwrap(), 1.0, &ForcingSpec::body(Constant(force)), 1e-12).unwrap();
    assert!(max_abs(&s.u.data) < 1e-9, "{} {} {}", max_abs(&s.u.data), s.iterations, s.divergence_residual);
    let exact = ScalarField::from_fn(&g, |x| force[0] * (x[0] - 0.5) + force[1] * (x[1] - 0.5) + force[2] * (x[2] - 0.5));
    for (a, b) in s.p.data.iter().zip(&exact.data) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn solenoidal_force_passes_through() {
    for n in [16, 32] {
        let g = cube(n);
        let r = 4.0;
        let vortex = Vortex { amplitude: 1.0, domain: g.domain };
        let s = solve_darcy(&g, &ResistanceMatrix::isotropic(r).unwrap(), 1.0, &ForcingSpec::body(vortex), 1e-12).unwrap();
        let target = sample_faces(&g, &vortex);
        let mask = Mask::full(&g);
        let mut err = 0.0f64;
        for ((u, t), &f) in s.u.data.iter().zip(&target.data).zip(&mask.face) {
            if f {
                err = err.max((u - t / r).abs());
            }
        }
        // The sampled vortex is discretely divergence-free only up to O(h²).
        assert!(err < 3.0 * (g.h * g.h) * max_abs(&target.data) / r * 10.0, "n {n}: {err}");
        assert!(max_abs(&s.p.data) < 0.05 * g.h * g.h * 40.0);
    }
}

#[test]
fn anisotropic_solution_is_divergence_free_and_linear() {
    let g = cube(12);
    let r = ResistanceMatrix::from_r([[3.0, 0.4, 0.0], [0.4, 2.0, 0.3], [0.0, 0.3, 5.0]]).unwrap();
    let dom = g.domain;
    let f1 = ForcingSpec::body(Vortex { amplitude: 1.0, domain: dom });
    let f2 = ForcingSpec { f: std::sync::Arc::new(Gradient { amplitude: 0.5, domain: dom }), g: std::sync::Arc::new(Constant([1.0, 0.0, 0.0])) };
    let a = solve_darcy(&g, &r, 2.0, &f1, 1e-12).unwrap();
    let b = solve_darcy(&g, &r, 2.0, &f2, 1e-12).unwrap();
    let both = ForcingSpec { f: f2.f.clone(), g: std::sync::Arc::new(Sum(f1.g.clone(), f2.g.clone())) };
    let c = solve_darcy(&g, &r, 2.0, &both, 1e-12).unwrap();
    assert!(a.divergence_residual < 1e-9 && c.divergence_residual < 1e-9);
    let scale = max_abs(&c.u.data);
    for ((x, y), z) in a.u.data.iter().zip(&b.u.data).zip(&c.u.data) {
        assert!((x + y - z).abs() < 1e-8 * scale);
    }
}

#[derive(Debug)]
struct Sum(crate::forcing::Preset, crate::forcing::Preset);

impl VectorPreset for Sum {
    fn kind(&self) -> &'static str {
        "sum"
    }
    fn eval(&self, x: Vec3) -> Vec3 {
        let (a, b) = (self.0.eval(x), self.1.eval(x));
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }
    fn params(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[test]
fn gauge_shift_moves_pressure_only() {
    let g = cube(24);
    let r = ResistanceMatrix::isotropic(2.0).unwrap();
    let dom = g.domain;
    let vortex = Vortex { amplitude: 1.0, domain: dom };
    let grad = Gradient { amplitude: 0.8, domain: dom };
    let a = solve_darcy(&g, &r, 1.0, &ForcingSpec::body(vortex), 1e-12).unwrap();
    let both = ForcingSpec { f: std::sync::Arc::new(grad), g: std::sync::Arc::new(vortex) };
    let b = solve_darcy(&g, &r, 1.0, &both, 1e-12).unwrap();
    let mut phi = ScalarField::from_fn(&g, |x| grad.potential(x));
    let m = phi.data.iter().sum::<f64>() / phi.data.len() as f64;
    phi.data.iter_mut().for_each(|v| *v -= m);
    let dp: Vec<f64> = b.p.data.iter().zip(&a.p.data).zip(&phi.data).map(|((x, y), z)| x - y - z).collect();
    assert!(max_abs(&dp) < 0.02 * max_abs(&phi.data), "{}", max_abs(&dp));
    let du: Vec<f64> = b.u.data.iter().zip(&a.u.data).map(|(x, y)| x - y).collect();
    assert!(max_abs(&du) < 0.02 * max_abs(&a.u.data));
}

#[test]
fn isotropic_law_holds_facewise() {
    let g = cube(10);
    let r = ResistanceMatrix::isotropic(1.5).unwrap();
    let forcing = ForcingSpec::body(Gradient { amplitude: 1.0, domain: g.domain });
    let s = solve_darcy(&g, &r, 1.0, &forcing, 1e-12).unwrap();
    let b = sample_total(&g, &forcing, 1.0);
    let mask = Mask::full(&g);
    let gp = crate::grid::grad(&g, &mask, &s.p).unwrap();
    for i in 0..b.data.len() {
        if mask.face[i] {
            assert!((1.5 * s.u.data[i] - (b.data[i] - gp.data[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn rejects_indefinite_matrix() {
    let g = cube(8);
    let mut r = ResistanceMatrix::isotropic(1.0).unwrap();
    r.r[2][2] = -1.0;
    assert!(matches!(solve_darcy(&g, &r, 1.0, &ForcingSpec::zero(), 1e-8), Err(Error::Parameter(_))));
    assert!(matches!(
        solve_brinkman(&g, &r, 0.25, 1.5, 1.0, &ForcingSpec::zero(), &SolverTolerances::default()),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn brinkman_approaches_darcy_as_friction_grows() {
    let g = cube(32);
    let r = ResistanceMatrix::isotropic(2.0).unwrap();
    let forcing = ForcingSpec::body(Vortex { amplitude: 1.0, domain: g.domain });
    let darcy = solve_darcy(&g, &r, 1.0, &forcing, 1e-12).unwrap();
    let collar = 0.125;
    let interior = |x: Vec3| x.iter().all(|&c| c > collar && c < 1.0 - collar);
    let mut gaps = Vec::new();
    for eps in [0.5, 0.25, 0.125] {
        let alpha = 2.0;
        let s = solve_brinkman(&g, &r, eps, alpha, 1.0, &forcing, &SolverTolerances::default()).unwrap();
        let sig2 = sigma(eps, alpha).unwrap().powi(2);
        let (mut num, mut den) = (0.0, 0.0);
        for c in 0..3 {
            let d = g.face_dims(c);
            let off = g.face_offsets()[c];
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        if interior(g.face_center(c, i, j, k)) {
                            let f = off + i + d[0] * (j + d[1] * k);
                            num += (s.u.data[f] / sig2 - darcy.u.data[f]).powi(2);
                            den += darcy.u.data[f].powi(2);
                        }
                    }
                }
            }
        }
        gaps.push((num / den).sqrt());
    }
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn brinkman_zero_forcing() {
    let g = cube(8);
    let s = solve_brinkman(&g, &ResistanceMatrix::isotropic(2.0).unwrap(), 0.25, 1.5, 1.0, &ForcingSpec::zero(), &SolverTolerances::default()).unwrap();
    assert_eq!(max_abs(&s.u.data), 0.0);
}

