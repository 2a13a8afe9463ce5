//! Oscillating test functions built cell by cell from the four-region
//! decomposition, with norm audits and the (H4) pairing.

use serde::Serialize;

use crate::cellproblem::CellField;
use crate::error::{Error, Result};
use crate::geometry::{CellRegion, DomainSpec, PerforationLattice};
use crate::grid::ops::div_into;
use crate::grid::{
    div_unmasked, sample_scalar, sample_vector, GridSpec, Mask, ScalarField, VectorField,
};
use crate::stokes::{DirichletData, Friction, SolverTolerances, StokesRhs, StokesSystem};
use crate::vec3::{norm, unit, Vec3};

/// Stokes solution on the reference annulus ε/2 ≤ |y| < ε, shared by all
/// interior cells.
#[derive(Debug, Clone)]
pub struct AnnulusSolution {
    pub grid: GridSpec,
    pub w: VectorField,
    /// Pressure with the constant fixed so that q has zero mean over the cell.
    pub q: ScalarField,
    /// Uniform divergence added to balance the discrete flux of the traces.
    pub flux_balance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct OscillatingTestFunction {
    pub grid: GridSpec,
    pub mask: Mask,
    pub w: VectorField,
    pub q: ScalarField,
    pub k: usize,
    pub eps: f64,
    pub alpha: f64,
    pub sigma: f64,
    /// Region tag per grid cell.
    pub regions: Vec<CellRegion>,
    pub annulus: AnnulusSolution,
    /// ‖div_h w‖₂ over fluid cells.
    pub divergence_l2: f64,
    centers: CenterIndex,
}

/// Lookup of the particle cell around a point.
#[derive(Debug, Clone)]
struct CenterIndex {
    block_min: Vec3,
    width: f64,
    cells: [usize; 3],
}

impl CenterIndex {
    fn new(lat: &PerforationLattice) -> Self {
        Self {
            block_min: lat.block_min,
            width: 2.0 * lat.eps,
            cells: lat.cells,
        }
    }

    /// Offset from the centre of the containing particle cell.
    fn offset(&self, x: Vec3) -> Option<Vec3> {
        let mut y = [0.0; 3];
        for d in 0..3 {
            let s = (x[d] - self.block_min[d]) / self.width;
            if s < 0.0 || s >= self.cells[d] as f64 {
                return None;
            }
            y[d] = x[d] - (self.block_min[d] + (s.floor() + 0.5) * self.width);
        }
        Some(y)
    }

    fn radius(&self, x: Vec3) -> Option<f64> {
        self.offset(x).map(norm)
    }
}

fn check_cell_solution(
    lat: &PerforationLattice,
    grid: &GridSpec,
    k: usize,
    cell: &dyn CellField,
) -> Result<()> {
    if k > 2 || cell.direction() != k {
        return Err(Error::Parameter(format!(
            "cell solution is for direction {}, requested {k}",
            cell.direction()
        )));
    }
    let s = lat.particle_scale;
    if cell.reach() * s < 0.5 * lat.eps {
        return Err(Error::Resampling(format!(
            "cell solution box half-width {} does not cover the inner ball (needs {})",
            cell.reach(),
            0.5 * lat.eps / s
        )));
    }
    if cell.spacing() * s > 2.0 * grid.h {
        return Err(Error::Resampling(format!(
            "cell solution spacing {} (physical {}) is coarser than twice the grid spacing {}",
            cell.spacing(),
            cell.spacing() * s,
            grid.h
        )));
    }
    Ok(())
}

/// Velocity and pressure of the rescaled cell solution at offset `y`.
fn inner_values(cell: &dyn CellField, s: f64, y: Vec3) -> (Vec3, f64) {
    let z = y.map(|v| v / s);
    (cell.velocity(z), cell.pressure(z) / s)
}

fn solve_annulus(
    lat: &PerforationLattice,
    h: f64,
    k: usize,
    cell: &dyn CellField,
    outer: impl Fn(Vec3) -> Vec3,
    tol: &SolverTolerances,
) -> Result<AnnulusSolution> {
    let eps = lat.eps;
    let s = lat.particle_scale;
    let m = (2.0 * eps / h).round().max(8.0);
    let half = 0.5 * m * h;
    let grid = GridSpec::with_spacing(DomainSpec::new([-half; 3], [half; 3])?, h)?;
    let mask = Mask::from_solid(&grid, |y| {
        let r = norm(y);
        r < 0.5 * eps || r >= eps
    });
    let mut data = DirichletData::uniform_walls(&grid, &mask, unit(k));
    for c in 0..3 {
        let d = grid.face_dims(c);
        for kk in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = grid.face_offsets()[c] + i + d[0] * (j + d[1] * kk);
                    if mask.face[f] {
                        continue;
                    }
                    let y = grid.face_center(c, i, j, kk);
                    data.solid.data[f] = if norm(y) < 0.75 * eps {
                        inner_values(cell, s, y).0[c]
                    } else {
                        outer(y)[c]
                    };
                }
            }
        }
    }
    // The sampled inner trace carries a small discrete net flux; it is
    // balanced by a uniform divergence over the annulus.
    let mut boundary = data.solid.data.clone();
    for (v, &fl) in boundary.iter_mut().zip(&mask.face) {
        if fl {
            *v = 0.0;
        }
    }
    let mut dd = vec![0.0; grid.cell_count()];
    div_into(&grid, Some(&mask), &boundary, &mut dd);
    let fluid = mask.fluid_cells() as f64;
    let flux_balance = dd.iter().sum::<f64>() / fluid;
    let mut g = ScalarField::zeros(&grid);
    for (v, &fl) in g.data.iter_mut().zip(&mask.cell) {
        if fl {
            *v = flux_balance;
        }
    }
    let sys = StokesSystem::new(&grid, mask, Friction::None, 0.0, tol)?;
    let sol = sys.solve(&StokesRhs {
        data: Some(&data),
        divergence: Some(&g),
        ..Default::default()
    })?;
    let mut q = sol.p;
    // zero mean of q over the cell: inner-ball part from the cell solution
    let (mut inner, mut annulus, mut count) = (0.0, 0.0, 0.0);
    for kk in 0..grid.n[2] {
        for j in 0..grid.n[1] {
            for i in 0..grid.n[0] {
                let ci = grid.cell_index(i, j, kk);
                let y = grid.cell_center(i, j, kk);
                if sys.mask.cell[ci] {
                    annulus += q.data[ci];
                    count += 1.0;
                } else if norm(y) < 0.5 * eps && !lat.shape_contains(y) {
                    inner += inner_values(cell, s, y).1;
                }
            }
        }
    }
    let shift = -(inner + annulus) / count;
    for (v, &fl) in q.data.iter_mut().zip(&sys.mask.cell) {
        if fl {
            *v += shift;
        }
    }
    Ok(AnnulusSolution {
        grid,
        w: sol.u,
        q,
        flux_balance,
        iterations: sol.iterations,
    })
}

/// Assembles (w_k^ε, q_k^ε): zero in particles, the rescaled cell solution
/// in the inner balls, the annulus solution in the annuli and (e_k, 0) in
/// the corners and in cells without a particle.
pub fn build_testfn(
    lat: &PerforationLattice,
    grid: &GridSpec,
    k: usize,
    cell: &dyn CellField,
    tol: &SolverTolerances,
) -> Result<OscillatingTestFunction> {
    check_cell_solution(lat, grid, k, cell)?;
    let mask = Mask::from_lattice(grid, lat);
    let s = lat.particle_scale;
    let annulus = solve_annulus(lat, grid.h, k, cell, |_| unit(k), tol)?;
    let idx = CenterIndex::new(lat);
    let ek = unit(k);
    let mut w = VectorField::zeros(grid);
    let offsets = grid.face_offsets();
    for c in 0..3 {
        let d = grid.face_dims(c);
        for kk in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = offsets[c] + i + d[0] * (j + d[1] * kk);
                    let on_wall = [i, j, kk][c] == 0 || [i, j, kk][c] == grid.n[c];
                    if !mask.face[f] && !on_wall {
                        continue;
                    }
                    let x = grid.face_center(c, i, j, kk);
                    w.data[f] = match lat.classify(x) {
                        CellRegion::Solid => 0.0,
                        CellRegion::Inner => {
                            inner_values(cell, s, idx.offset(x).expect("inner point")).0[c]
                        }
                        CellRegion::Annulus => sample_vector(
                            &annulus.grid,
                            &annulus.w,
                            idx.offset(x).expect("annulus point"),
                        )[c],
                        CellRegion::Corner | CellRegion::BoundaryCell => ek[c],
                    };
                }
            }
        }
    }
    let mut q = ScalarField::zeros(grid);
    let mut regions = vec![CellRegion::Solid; grid.cell_count()];
    for kk in 0..grid.n[2] {
        for j in 0..grid.n[1] {
            for i in 0..grid.n[0] {
                let ci = grid.cell_index(i, j, kk);
                if !mask.cell[ci] {
                    continue;
                }
                let x = grid.cell_center(i, j, kk);
                let region = lat.classify(x);
                regions[ci] = region;
                q.data[ci] = match region {
                    CellRegion::Inner => {
                        inner_values(cell, s, idx.offset(x).expect("inner point")).1
                    }
                    CellRegion::Annulus => sample_scalar(
                        &annulus.grid,
                        &annulus.q,
                        idx.offset(x).expect("annulus point"),
                    ),
                    _ => 0.0,
                };
            }
        }
    }
    let mut dv = vec![0.0; grid.cell_count()];
    div_into(grid, Some(&mask), &w.data, &mut dv);
    let divergence_l2 = (grid.cell_volume() * dv.iter().map(|v| v * v).sum::<f64>()).sqrt();
    Ok(OscillatingTestFunction {
        grid: grid.clone(),
        mask,
        w,
        q,
        k,
        eps: lat.eps,
        alpha: lat.alpha,
        sigma: lat.sigma(),
        regions,
        annulus,
        divergence_l2,
        centers: idx,
    })
}

/// Visits every forward difference `(∂_a u_c)` between neighbouring faces of
/// the same family, passing the midpoint and the two buffer indices.
fn for_each_difference(grid: &GridSpec, mut visit: impl FnMut(Vec3, usize, usize)) {
    let offsets = grid.face_offsets();
    let h = grid.h;
    for c in 0..3 {
        let d = grid.face_dims(c);
        let strides = [1, d[0], d[0] * d[1]];
        for kk in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let idx = [i, j, kk];
                    let f = offsets[c] + i + d[0] * (j + d[1] * kk);
                    let x = grid.face_center(c, i, j, kk);
                    for a in 0..3 {
                        if idx[a] + 1 < d[a] {
                            let mut m = x;
                            m[a] += 0.5 * h;
                            visit(m, f, f + strides[a]);
                        }
                    }
                }
            }
        }
    }
}

/// Discrete Dirichlet pairing Σ h³ ∂_a u_c ∂_a v_c over the whole box
/// (fields extended by zero into particles).
pub fn gradient_pairing(grid: &GridSpec, u: &VectorField, v: &VectorField) -> Result<f64> {
    u.check(grid)?;
    v.check(grid)?;
    let mut acc = 0.0;
    for_each_difference(grid, |_, f, g| {
        acc += (u.data[g] - u.data[f]) * (v.data[g] - v.data[f])
    });
    Ok(acc * grid.h)
}

/// σ²∫|∇w|² split by the region of each difference midpoint.
pub fn region_energy(
    tf: &OscillatingTestFunction,
    lat: &PerforationLattice,
) -> Vec<(CellRegion, f64)> {
    let regions = [
        CellRegion::Solid,
        CellRegion::Inner,
        CellRegion::Annulus,
        CellRegion::Corner,
        CellRegion::BoundaryCell,
    ];
    let mut acc = [0.0; 5];
    for_each_difference(&tf.grid, |m, f, g| {
        let r = lat.classify(m);
        let i = regions.iter().position(|&x| x == r).expect("known region");
        acc[i] += (tf.w.data[g] - tf.w.data[f]).powi(2);
    });
    let scale = tf.sigma * tf.sigma * tf.grid.h;
    regions
        .iter()
        .zip(acc)
        .map(|(&r, a)| (r, scale * a))
        .collect()
}

/// One row of a norm audit.
#[derive(Debug, Clone, Serialize)]
pub struct NormAudit {
    pub eps: f64,
    pub alpha: f64,
    pub k: usize,
    pub p: f64,
    /// ‖∇w‖_{L^p(Ω)}.
    pub grad_w: f64,
    /// ‖q‖_{L^p(Ω)}.
    pub q: f64,
    /// ‖∇w‖_{L^p(∪C)}.
    pub grad_w_inner: f64,
    /// ‖q‖_{L^p(∪C)}.
    pub q_inner: f64,
    /// ‖∇q‖_{L^p(∪C)}.
    pub grad_q_inner: f64,
    /// Target exponent of the first two: −α + 3(α−1)/p.
    pub target_exponent: f64,
    /// Target exponent of ‖∇q‖ over the inner balls: −2α + 3(α−1)/p.
    pub target_exponent_grad_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditRecord {
    pub eps: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub k: usize,
    pub rows: Vec<NormAudit>,
    /// ‖∇w‖₂ + ‖q‖₂ over ∪(B^ε ∖ B^{ε/4}); target exponent α − 2.
    pub annulus_l2: f64,
    /// σ(‖∇w‖₂ + ‖q‖₂).
    pub h3_bound: f64,
    pub w_minus_ek_l2: f64,
    pub w_max: f64,
    pub divergence_l2: f64,
}

fn lp_finish(sum: f64, vol: f64, p: f64) -> f64 {
    (vol * sum).powf(1.0 / p)
}

/// L^p norms of the test function for each `p`, plus the annulus and
/// boundedness quantities.
pub fn audit_norms(tf: &OscillatingTestFunction, ps: &[f64]) -> Result<AuditRecord> {
    if let Some(p) = ps.iter().find(|&&p| !(p > 1.5) || !p.is_finite()) {
        return Err(Error::Parameter(format!(
            "norm exponent must exceed 3/2, got {p}"
        )));
    }
    let g = &tf.grid;
    let vol = g.cell_volume();
    let inv_h = 1.0 / g.h;
    let eps = tf.eps;
    let in_annulus = |x: Vec3| {
        tf.centers
            .radius(x)
            .is_some_and(|r| r >= 0.25 * eps && r < eps)
    };
    let in_inner = |x: Vec3| tf.centers.radius(x).is_some_and(|r| r < 0.5 * eps);
    let mut rows = Vec::new();
    let (mut ann_grad, mut ann_q) = (0.0, 0.0);
    for (pi, &p) in ps.iter().enumerate() {
        let (mut gw, mut gwi) = (0.0, 0.0);
        for_each_difference(g, |m, f, h| {
            let d = ((tf.w.data[h] - tf.w.data[f]) * inv_h).abs();
            let dp = d.powf(p);
            gw += dp;
            if in_inner(m) {
                gwi += dp;
            }
            if pi == 0 && in_annulus(m) {
                ann_grad += d * d;
            }
        });
        let (mut qs, mut qi) = (0.0, 0.0);
        let mut gq = 0.0;
        for kk in 0..g.n[2] {
            for j in 0..g.n[1] {
                for i in 0..g.n[0] {
                    let ci = g.cell_index(i, j, kk);
                    qs += tf.q.data[ci].abs().powf(p);
                    if pi == 0 && in_annulus(g.cell_center(i, j, kk)) {
                        ann_q += tf.q.data[ci].powi(2);
                    }
                    if tf.regions[ci] != CellRegion::Inner {
                        continue;
                    }
                    qi += tf.q.data[ci].abs().powf(p);
                    let idx = [i, j, kk];
                    let strides = [1, g.n[0], g.n[0] * g.n[1]];
                    for a in 0..3 {
                        if idx[a] + 1 < g.n[a] && tf.regions[ci + strides[a]] == CellRegion::Inner {
                            gq += ((tf.q.data[ci + strides[a]] - tf.q.data[ci]) * inv_h)
                                .abs()
                                .powf(p);
                        }
                    }
                }
            }
        }
        let a = tf.alpha;
        rows.push(NormAudit {
            eps,
            alpha: a,
            k: tf.k,
            p,
            grad_w: lp_finish(gw, vol, p),
            q: lp_finish(qs, vol, p),
            grad_w_inner: lp_finish(gwi, vol, p),
            q_inner: lp_finish(qi, vol, p),
            grad_q_inner: lp_finish(gq, vol, p),
            target_exponent: -a + 3.0 * (a - 1.0) / p,
            target_exponent_grad_q: -2.0 * a + 3.0 * (a - 1.0) / p,
        });
    }
    // quantities in L² regardless of the requested list
    let mut g2 = 0.0;
    for_each_difference(g, |_, f, h| {
        g2 += ((tf.w.data[h] - tf.w.data[f]) * inv_h).powi(2)
    });
    let q2: f64 = tf.q.data.iter().map(|v| v * v).sum();
    let h3_bound = tf.sigma * ((vol * g2).sqrt() + (vol * q2).sqrt());
    let ek = unit(tf.k);
    let mut dev = 0.0;
    let mut w_max: f64 = 0.0;
    for c in 0..3 {
        for &v in tf.w.comp(c) {
            dev += (v - ek[c]).powi(2);
            w_max = w_max.max(v.abs());
        }
    }
    Ok(AuditRecord {
        eps,
        alpha: tf.alpha,
        sigma: tf.sigma,
        k: tf.k,
        rows,
        annulus_l2: (vol * ann_grad).sqrt() + (vol * ann_q).sqrt(),
        h3_bound,
        w_minus_ek_l2: (vol * dev).sqrt(),
        w_max,
        divergence_l2: tf.divergence_l2,
    })
}

/// σ²⟨∇q − Δw, φν⟩ evaluated as σ²[∫∇w:∇(φν) − ∫q div(φν)], with φ given
/// at cell centres and interpolated to faces.
pub fn h4_pairing(
    tf: &OscillatingTestFunction,
    phi: &ScalarField,
    nu: &VectorField,
) -> Result<f64> {
    let g = &tf.grid;
    phi.check(g)?;
    nu.check(g)?;
    let mut pn = nu.clone();
    let offsets = g.face_offsets();
    for c in 0..3 {
        let d = g.face_dims(c);
        for kk in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = offsets[c] + i + d[0] * (j + d[1] * kk);
                    if pn.data[f] != 0.0 {
                        pn.data[f] *= sample_scalar(g, phi, g.face_center(c, i, j, kk));
                    }
                }
            }
        }
    }
    let a = gradient_pairing(g, &tf.w, &pn)?;
    let dv = div_unmasked(g, &pn)?;
    let qd: f64 = tf.q.data.iter().zip(&dv.data).map(|(q, d)| q * d).sum();
    Ok(tf.sigma * tf.sigma * (a - g.cell_volume() * qd))
}

/// ∫φ over the box by the midpoint rule.
pub fn integrate(grid: &GridSpec, phi: &ScalarField) -> f64 {
    grid.cell_volume() * phi.data.iter().sum::<f64>()
}
