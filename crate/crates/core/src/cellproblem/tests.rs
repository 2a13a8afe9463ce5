use std::sync::Arc;

use super::*;
use crate::geometry::{Sphere, Superellipsoid};

fn sphere(r: f64) -> ReferenceShape {
    Arc::new(Sphere::new(r).unwrap())
}

fn tol() -> SolverTolerances {
    SolverTolerances {
        momentum: 1e-9,
        divergence: 1e-10,
        ..Default::default()
    }
}

#[test]
fn rejects_coarse_grid_and_small_box() {
    let s = sphere(1.0);
    assert!(matches!(
        solve_cell_problem(&s, 0, 4.0, 0.3, &tol(), true),
        Err(Error::Resolution(_))
    ));
    assert!(matches!(
        solve_cell_problem(&s, 0, 3.0, 0.25, &tol(), true),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        solve_cell_problem(&s, 3, 4.0, 0.25, &tol(), true),
        Err(Error::Parameter(_))
    ));
}

#[test]
fn extrapolation_recovers_affine_law() {
    let levels: Vec<DragLevel> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&l| {
            let mut rbar = [[0.0; 3]; 3];
            for k in 0..3 {
                rbar[k][k] = 10.0 + k as f64 + 3.0 / l;
            }
            DragLevel {
                l,
                rbar,
                force: None,
                full_rbar: None,
            }
        })
        .collect();
    let r = extrapolate(&levels).unwrap();
    for k in 0..3 {
        assert!((r[k][k] - 10.0 - k as f64).abs() < 1e-12);
    }
    assert!(matches!(
        extrapolate(&levels[..1]),
        Err(Error::Extrapolation(_))
    ));
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    let (x, w) = gauss_legendre(6);
    for p in 0..12 {
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
        let exact = if p % 2 == 1 {
            0.0
        } else {
            2.0 / (p as f64 + 1.0)
        };
        assert!((q - exact).abs() < 1e-13, "degree {p}: {q} vs {exact}");
    }
}

#[test]
fn quarter_box_matches_full_box() {
    let s = sphere(1.0);
    let t = tol();
    let q = solve_cell_problem(&s, 1, 4.0, 0.25, &t, true).unwrap();
    let f = solve_cell_problem(&s, 1, 4.0, 0.25, &t, false).unwrap();
    assert!(q.quarter && !f.quarter);
    let e = unit(1);
    let dq = 4.0 * dirichlet_pairing(&q.grid, &q.mask, &q.w, e, &q.w, e).unwrap();
    let df = dirichlet_pairing(&f.grid, &f.mask, &f.w, e, &f.w, e).unwrap();
    assert!((dq - df).abs() < 1e-6 * df, "{dq} vs {df}");
    for x in [[0.7, -1.3, 0.4], [-2.0, 0.5, -1.1], [1.5, 1.5, -1.5]] {
        let (a, b) = (q.sample_velocity(x), f.sample_velocity(x));
        for c in 0..3 {
            assert!((a[c] - b[c]).abs() < 1e-6, "{x:?}: {a:?} vs {b:?}");
        }
    }
}

#[test]
fn full_box_drag_is_symmetric_and_matches_surface_force() {
    let s: ReferenceShape = Arc::new(Superellipsoid::new([1.0, 0.8, 1.2], 2.0).unwrap());
    let t = tol();
    let sols = directional(&s, 5.0, 0.2, &t, false).unwrap();
    let lv = drag_matrix(&sols).unwrap();
    let f = lv.force.unwrap();
    for j in 0..3 {
        for k in 0..3 {
            assert!((lv.rbar[j][k] - lv.rbar[k][j]).abs() < 1e-12 * lv.rbar[0][0]);
            assert!(
                (f[j][k] - lv.rbar[j][k]).abs() < 1e-6 * lv.rbar[0][0],
                "F[{j}][{k}] = {} vs {}",
                f[j][k],
                lv.rbar[j][k]
            );
        }
        let sf = surface_force(&sols[j], 2.5, 16);
        assert!(
            (sf[j] - lv.rbar[j][j]).abs() < 0.03 * lv.rbar[j][j],
            "surface {} vs energy {}",
            sf[j],
            lv.rbar[j][j]
        );
    }
    // distinct semi-axes give distinct drags, the long axis the smallest
    assert!(lv.rbar[2][2] < lv.rbar[0][0] && lv.rbar[0][0] < lv.rbar[1][1]);
}

#[test]
fn drag_scales_linearly_with_size() {
    let t = tol();
    let a = solve_cell_problem(&sphere(1.0), 0, 4.0, 0.25, &t, true).unwrap();
    let b = solve_cell_problem(&sphere(2.0), 0, 8.0, 0.5, &t, true).unwrap();
    let e = unit(0);
    let da = dirichlet_pairing(&a.grid, &a.mask, &a.w, e, &a.w, e).unwrap();
    let db = dirichlet_pairing(&b.grid, &b.mask, &b.w, e, &b.w, e).unwrap();
    assert!((db / da - 2.0).abs() < 1e-6, "{}", db / da);
    let c = a.dilate(2.0).unwrap();
    for x in [[0.9, 2.1, -0.4], [3.0, 0.2, 0.1]] {
        let (u, v) = (b.sample_velocity(x), c.sample_velocity(x));
        assert!((0..3).all(|i| (u[i] - v[i]).abs() < 1e-6), "{u:?} vs {v:?}");
        assert!((b.sample_pressure(x) - c.sample_pressure(x)).abs() < 1e-6);
    }
}

#[test]
fn resistance_ladder_and_brinkman_density() {
    let opts = ResistanceOptions {
        ladder: vec![4.0, 6.0],
        tol: tol(),
        ..Default::default()
    };
    let (res, last) = compute_resistance(&sphere(1.0), &opts).unwrap();
    assert_eq!(res.ladder.len(), 2);
    assert!(res.ladder[0].full_rbar.is_some() && res.ladder[0].force.is_some());
    assert!(res.symmetry_defect < 1e-5 && res.off_diagonal_ratio < 1e-5);
    assert!(last.iter().all(|s| s.quarter && s.l == 6.0));
    // the truncated drags decrease towards the limit
    assert!(res.ladder[1].rbar[0][0] < res.ladder[0].rbar[0][0]);
    assert!(res.rbar[0][0] < res.ladder[1].rbar[0][0]);
    for k in 0..3 {
        assert!((res.r[k][k] - res.rbar[k][k] / 8.0).abs() < 1e-12);
    }
    let b = brinkman_density(&res, 0.125, 1.5).unwrap();
    let s = sigma(0.125, 1.5).unwrap();
    assert!((b[0][0] * s * s - res.r[0][0]).abs() < 1e-9 * res.r[0][0]);
}

#[test]
fn explicit_resistance_must_be_spd() {
    assert!(ResistanceMatrix::isotropic(2.0).is_ok());
    assert!(ResistanceMatrix::from_r([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
    assert!(ResistanceMatrix::from_r([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
}

#[test]
fn far_field_decays_like_inverse_distance() {
    let t = SolverTolerances { momentum: 1e-6, divergence: 1e-7, ..Default::default() };
    let s = solve_cell_problem(&sphere(1.0), 0, 32.0, 0.25, &t, true).unwrap();
    let near = far_field_slope(&s, 2.0, 4.0, 8).unwrap();
    assert!((near + 1.0).abs() <= 0.15, "{near}");
    // the Dirichlet box pulls w onto e_k faster than 1/r further out
    let outer = far_field_slope(&s, 2.0, 16.0, 8).unwrap();
    assert!(outer < near, "{outer} vs {near}");
    assert!(far_field_slope(&s, 4.0, 2.0, 8).is_err());
}
