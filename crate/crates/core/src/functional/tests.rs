use super::*;
use std::sync::Arc;

use crate::geometry::{DomainSpec, ReferenceShape, Sphere};

fn cube(n: usize) -> GridSpec {
    GridSpec::with_cells(DomainSpec::unit_cube(), n).unwrap()
}

fn sphere() -> ReferenceShape {
    Arc::new(Sphere::new(0.6).unwrap())
}

#[test]
fn empty_cube_eigenvalue() {
    let g = cube(16);
    let lat = PerforationLattice::empty(g.domain, sphere());
    let est = poincare_constant(&lat, &g, 1e-8).unwrap();
    // Exact discrete eigenvalue of the cell-centred Dirichlet stencil.
    let h = g.h;
    let l1 = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
    assert!((est.lambda_min - 3.0 * l1).abs() < 1e-6 * est.lambda_min, "{}", est.lambda_min);
    let exact = 1.0 / (std::f64::consts::PI * 3f64.sqrt());
    assert!((est.constant - exact).abs() < 0.01 * exact);
}

#[test]
fn mirror_octant_matches_full_box() {
    let dom = DomainSpec::new([0.0; 3], [2.0; 3]).unwrap();
    let full = GridSpec::with_cells(dom, 32).unwrap();
    let lat = PerforationLattice::build(dom, 0.25, 1.5, sphere()).unwrap();
    let a = poincare_constant(&lat, &full, 1e-9).unwrap();
    let oct_dom = DomainSpec::new([0.0; 3], [1.0; 3]).unwrap();
    let oct = GridSpec::with_cells(oct_dom, 16).unwrap().with_walls([[WallKind::NoSlip, WallKind::FreeSlip]; 3]);
    let lat_o = PerforationLattice::build(oct_dom, 0.25, 1.5, sphere()).unwrap();
    let b = poincare_constant(&lat_o, &oct, 1e-9).unwrap();
    assert!((a.lambda_min - b.lambda_min).abs() < 1e-6 * a.lambda_min, "{} {}", a.lambda_min, b.lambda_min);
}

#[test]
fn rayleigh_certificate_and_monotonicity() {
    let g = cube(32);
    let empty = PerforationLattice::empty(g.domain, sphere());
    let lat = PerforationLattice::build(g.domain, 0.25, 1.5, sphere()).unwrap();
    let tol = 1e-7;
    let e0 = poincare_constant(&empty, &g, tol).unwrap();
    let e1 = poincare_constant(&lat, &g, tol).unwrap();
    assert!(e1.constant < e0.constant);
    let mask = Mask::from_lattice(&g, &lat);
    let v = &e1.eigenvector;
    let l2 = (g.cell_volume() * v.data.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let grad = dirichlet_energy(&g, &mask, v).unwrap().sqrt();
    assert!(l2 / grad <= e1.constant * (1.0 + tol));
    assert!(l2 / grad >= e1.constant * (1.0 - 1e-6));
}

#[test]
fn energy_matches_operator() {
    let g = cube(12).with_walls([[WallKind::NoSlip, WallKind::FreeSlip], [WallKind::FreeSlip, WallKind::NoSlip], [WallKind::NoSlip; 2]]);
    let lat = PerforationLattice::build(g.domain, 0.25, 1.5, sphere()).unwrap();
    let mask = Mask::from_lattice(&g, &lat);
    let mut v = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() + x[1] * x[2] - 0.2);
    mask.zero_solid_scalar(&mut v);
    let op = ScalarDirichletLaplacian::new(&g, &mask);
    let mut av = vec![0.0; v.data.len()];
    op.apply(&v.data, &mut av);
    let quad = g.cell_volume() * dot(&v.data, &av);
    let e = dirichlet_energy(&g, &mask, &v).unwrap();
    assert!((quad - e).abs() < 1e-12 * e);
}

fn tol() -> SolverTolerances {
    SolverTolerances { divergence: 1e-11, momentum: 1e-10, ..Default::default() }
}

#[test]
fn bogovskii_constant_is_zero() {
    let g = cube(16);
    let lat = PerforationLattice::build(g.domain, 0.25, 1.5, sphere()).unwrap();
    let r = bogovskii(&ScalarField::constant(&g, 3.0), &lat, &g, &tol()).unwrap();
    assert_eq!(r.h1_norm, 0.0);
    assert!(r.v.data.iter().all(|&x| x == 0.0));
}

#[test]
fn bogovskii_residual_and_linearity() {
    let g = cube(16);
    let lat = PerforationLattice::build(g.domain, 0.25, 1.5, sphere()).unwrap();
    let op = BogovskiiOperator::new(&lat, &g, &tol()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut rand_field = || {
        let mut f = ScalarField::zeros(&g);
        for v in f.data.iter_mut() {
            *v = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        }
        f
    };
    let f = rand_field();
    let h = rand_field();
    let rf = op.apply(&f).unwrap();
    let rh = op.apply(&h).unwrap();
    assert!(rf.residual <= 1e-8, "{}", rf.residual);
    // Independent check of the residual from the returned velocity.
    let d = div(&g, op.mask(), &rf.v).unwrap();
    let mask = op.mask();
    let mean = mask.fluid_mean(&f);
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &m) in mask.cell.iter().enumerate() {
        if m {
            num += (d.data[i] - (f.data[i] - mean)).powi(2);
            den += (f.data[i] - mean).powi(2);
        }
    }
    assert!((num / den).sqrt() <= 1e-8);
    let mut sum = f.clone();
    for (a, b) in sum.data.iter_mut().zip(&h.data) {
        *a += b;
    }
    let rs = op.apply(&sum).unwrap();
    let scale = rf.v.data.iter().map(|x| x.abs()).fold(0.0, f64::max);
    for ((s, a), b) in rs.v.data.iter().zip(&rf.v.data).zip(&rh.v.data) {
        assert!((s - a - b).abs() < 1e-6 * scale);
    }
}

#[test]
fn norm_probe_is_lower_bound_of_power_limit() {
    let g = cube(16);
    let lat = PerforationLattice::build(g.domain, 0.25, 1.5, sphere()).unwrap();
    let op = BogovskiiOperator::new(&lat, &g, &tol()).unwrap();
    let probe = bogovskii_norm(&op, 4, 3, 1).unwrap();
    assert_eq!(probe.solves, 7);
    let best = probe.probe_ratios.iter().cloned().fold(0.0, f64::max);
    assert!(probe.estimate >= best);
    // Power iteration increases the Rayleigh quotient monotonically.
    for w in probe.power_ratios.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-6));
    }
}

#[test]
fn mean_equiv_arithmetic() {
    let r = gamma_mean_equiv(&[1.0, 4.0], 0.5).unwrap();
    let s = 2.5f64.sqrt();
    let lhs = (1.0 - s).powi(2) + (2.0 - s).powi(2);
    assert!((r.power_of_mean - lhs).abs() < 1e-14);
    assert!((r.mean_of_power - 0.5).abs() < 1e-14);
    assert!((r.ratio - lhs / 0.5).abs() < 1e-12);
    assert!((r.ratio - 1.026).abs() < 1e-3);
    assert_eq!(gamma_mean_equiv(&[2.0; 5], 1.7).unwrap().ratio, 1.0);
    assert!(matches!(gamma_mean_equiv(&[1.0, -1.0], 1.0), Err(Error::Domain(_))));
    assert!(matches!(gamma_mean_equiv(&[1.0], 0.3), Err(Error::Parameter(_))));
}

#[test]
fn bregman_identity_at_two() {
    let (l, r) = gamma_bregman_equiv(4.0, 1.0, 2.0).unwrap();
    assert!((l - 4.5).abs() < 1e-14 && (r - 9.0).abs() < 1e-14);
    assert_eq!(gamma_bregman_equiv(3.0, 3.0, 2.5).unwrap(), (0.0, 0.0));
    assert!(matches!(gamma_bregman_equiv(1.0, 2.0, 1.0), Err(Error::Parameter(_))));
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    // The Bregman ratio at t = a/b tends to (γ−1)/γ at 0, 2(γ−1)/γ² at 1 and
    // 1/γ at ∞; it stays between the extremes of these limits.
    fn limit_range(gamma: f64) -> (f64, f64) {
        let l = [(gamma - 1.0) / gamma, 2.0 * (gamma - 1.0) / (gamma * gamma), 1.0 / gamma];
        (l.iter().cloned().fold(f64::MAX, f64::min), l.iter().cloned().fold(f64::MIN, f64::max))
    }

    proptest! {
        #[test]
        fn bregman_ratio_stays_between_its_limits(gamma in 1.05f64..4.0, la in -3.0f64..3.0, lb in -3.0f64..3.0) {
            let (a, b) = (10f64.powf(la), 10f64.powf(lb));
            prop_assume!((a / b - 1.0).abs() > 1e-3);
            let (l, r) = gamma_bregman_equiv(a, b, gamma).unwrap();
            let (lo, hi) = limit_range(gamma);
            prop_assert!(l > 0.0 && r > 0.0);
            prop_assert!(l / r >= lo * (1.0 - 1e-6) && l / r <= hi * (1.0 + 1e-6), "{} not in [{lo}, {hi}]", l / r);
        }

        #[test]
        fn mean_of_powers_is_the_better_centre(a in 0.5f64..3.0, s in proptest::collection::vec(0.0f64..50.0, 2..12)) {
            let r = gamma_mean_equiv(&s, a).unwrap();
            prop_assert!(r.power_of_mean >= r.mean_of_power * (1.0 - 1e-12));
        }
    }
}
