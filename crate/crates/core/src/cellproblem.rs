//! Exterior Stokes problem around the reference particle and its resistance
//! matrix.
//!
//! The condition `w_k → e_k` at infinity is replaced by `w_k = e_k` on the
//! walls of the box `[−L, L]³`; drag values from a ladder of `L` are
//! extrapolated linearly in `1/L`. Shapes symmetric under the coordinate
//! reflections are solved on the quarter box `x_a ≥ 0` (a ≠ k), with mirror
//! walls on the two symmetry planes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sigma, DomainSpec, ReferenceShape};
use crate::grid::{
    sample_scalar, sample_vector, GridSpec, Mask, ScalarField, VectorField, WallKind,
};
use crate::stokes::{
    dirichlet_pairing, DirichletData, Friction, SolverTolerances, StokesDiagnostics, StokesRhs,
    StokesSystem,
};
use crate::vec3::{unit, Vec3};

pub type Mat3 = [[f64; 3]; 3];

/// Fewest grid cells across the particle accepted by the cell solver.
pub const MIN_CELLS_ACROSS: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct CellSolution {
    pub grid: GridSpec,
    pub mask: Mask,
    pub w: VectorField,
    pub q: ScalarField,
    pub l: f64,
    pub k: usize,
    /// Solved on the quarter box `x_a ≥ 0` for both axes `a ≠ k`.
    pub quarter: bool,
    pub diagnostics: StokesDiagnostics,
}

impl CellSolution {
    /// Maps a point of the full box to the solved region; returns the point
    /// and the sign flips of the velocity components.
    fn fold(&self, x: Vec3) -> (Vec3, [f64; 3]) {
        let mut y = x;
        let mut s = [1.0; 3];
        if self.quarter {
            for a in 0..3 {
                if a != self.k && y[a] < 0.0 {
                    y[a] = -y[a];
                    s[a] = -1.0;
                }
            }
        }
        (y, s)
    }

    fn outside(&self, x: Vec3) -> bool {
        x.iter().any(|v| v.abs() >= self.l)
    }

    /// Velocity at a point of R³ (`e_k` beyond the truncation box).
    pub fn sample_velocity(&self, x: Vec3) -> Vec3 {
        if self.outside(x) {
            return unit(self.k);
        }
        let (y, s) = self.fold(x);
        let v = sample_vector(&self.grid, &self.w, y);
        [v[0] * s[0], v[1] * s[1], v[2] * s[2]]
    }

    /// Pressure at a point of R³ (zero beyond the truncation box).
    pub fn sample_pressure(&self, x: Vec3) -> f64 {
        if self.outside(x) {
            return 0.0;
        }
        let (y, _) = self.fold(x);
        sample_scalar(&self.grid, &self.q, y)
    }

    /// The solution for the shape dilated by `s`: velocities are unchanged
    /// at corresponding points and pressures scale by 1/s. Exact at the
    /// discrete level since grid, box and particle scale together.
    pub fn dilate(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Parameter(format!(
                "dilation factor must be positive, got {s}"
            )));
        }
        let d = &self.grid.domain;
        let domain = DomainSpec::new(d.min.map(|v| v * s), d.max.map(|v| v * s))?;
        let mut grid = self.grid.clone();
        grid.domain = domain;
        grid.h *= s;
        let mut q = self.q.clone();
        q.data.iter_mut().for_each(|v| *v /= s);
        Ok(Self {
            grid,
            q,
            l: self.l * s,
            ..self.clone()
        })
    }

    /// Number of copies of the solved region making up the full box.
    pub fn multiplicity(&self) -> f64 {
        if self.quarter {
            4.0
        } else {
            1.0
        }
    }
}

/// A velocity/pressure pair around the reference particle, sampled in the
/// reference frame.
pub trait CellField: Send + Sync {
    fn direction(&self) -> usize;
    fn velocity(&self, x: Vec3) -> Vec3;
    fn pressure(&self, x: Vec3) -> f64;
    /// Half-width of the box on which the field is resolved.
    fn reach(&self) -> f64;
    /// Grid spacing of the underlying solutions.
    fn spacing(&self) -> f64;
}

impl CellField for CellSolution {
    fn direction(&self) -> usize {
        self.k
    }
    fn velocity(&self, x: Vec3) -> Vec3 {
        self.sample_velocity(x)
    }
    fn pressure(&self, x: Vec3) -> f64 {
        self.sample_pressure(x)
    }
    fn reach(&self) -> f64 {
        self.l
    }
    fn spacing(&self) -> f64 {
        self.grid.h
    }
}

/// Pointwise 1/L extrapolation of two truncations of the same cell problem,
/// `w∞ ≈ (L₂w₂ − L₁w₁)/(L₂ − L₁)`.
#[derive(Debug, Clone)]
pub struct ExtrapolatedCell {
    pub near: CellSolution,
    pub far: CellSolution,
}

impl ExtrapolatedCell {
    pub fn new(near: CellSolution, far: CellSolution) -> Result<Self> {
        if near.k != far.k
            || !(far.l > near.l)
            || (near.grid.h - far.grid.h).abs() > 1e-12 * near.grid.h
        {
            return Err(Error::Parameter(
                "extrapolation needs one direction, one spacing and two increasing truncations"
                    .into(),
            ));
        }
        Ok(Self { near, far })
    }

    fn weights(&self) -> (f64, f64) {
        let d = self.far.l - self.near.l;
        (-self.near.l / d, self.far.l / d)
    }
}

impl CellField for ExtrapolatedCell {
    fn direction(&self) -> usize {
        self.near.k
    }
    fn velocity(&self, x: Vec3) -> Vec3 {
        let (a, b) = self.weights();
        let (u, v) = (self.near.sample_velocity(x), self.far.sample_velocity(x));
        [0, 1, 2].map(|c| a * u[c] + b * v[c])
    }
    fn pressure(&self, x: Vec3) -> f64 {
        let (a, b) = self.weights();
        a * self.near.sample_pressure(x) + b * self.far.sample_pressure(x)
    }
    fn reach(&self) -> f64 {
        self.near.l
    }
    fn spacing(&self) -> f64 {
        self.near.grid.h
    }
}

fn check_shape(shape: &ReferenceShape, l: f64, h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    if l < 4.0 * shape.bounding_radius() {
        return Err(Error::Parameter(format!(
            "truncation half-width {l} below 4 × bounding radius {}",
            shape.bounding_radius()
        )));
    }
    let across = 2.0 * shape.min_half_width() / h;
    if across < MIN_CELLS_ACROSS {
        return Err(Error::Resolution(format!(
            "particle spans {across:.1} cells, need at least {MIN_CELLS_ACROSS}"
        )));
    }
    Ok(())
}

/// Grid for direction `k` on the full or quarter truncation box.
pub fn cell_grid(l: f64, h: f64, k: usize, quarter: bool) -> Result<GridSpec> {
    if !quarter {
        return GridSpec::with_spacing(DomainSpec::new([-l; 3], [l; 3])?, h);
    }
    let mut min = [0.0; 3];
    min[k] = -l;
    let mut walls = [[WallKind::FreeSlip, WallKind::NoSlip]; 3];
    walls[k] = [WallKind::NoSlip, WallKind::NoSlip];
    Ok(GridSpec::with_spacing(DomainSpec::new(min, [l; 3])?, h)?.with_walls(walls))
}

/// Solves `−Δw + ∇q = 0`, `div w = 0` outside the particle, `w = 0` on it and
/// `w = e_k` on the walls of `[−L, L]³`, on a grid of spacing `h`.
pub fn solve_cell_problem(
    shape: &ReferenceShape,
    k: usize,
    l: f64,
    h: f64,
    tol: &SolverTolerances,
    use_symmetry: bool,
) -> Result<CellSolution> {
    if k > 2 {
        return Err(Error::Parameter(format!(
            "direction index {k} out of range"
        )));
    }
    check_shape(shape, l, h)?;
    let quarter = use_symmetry && shape.is_reflection_symmetric();
    let grid = cell_grid(l, h, k, quarter)?;
    let s = shape.clone();
    let mask = Mask::from_solid(&grid, move |x| s.sdf(x) < 0.0);
    let data = DirichletData::uniform_walls(&grid, &mask, unit(k));
    let sys = StokesSystem::new(&grid, mask, Friction::None, 0.0, tol)?;
    let sol = sys.solve(&StokesRhs {
        data: Some(&data),
        ..Default::default()
    })?;
    Ok(CellSolution {
        mask: sys.mask.clone(),
        grid,
        w: sol.u,
        q: sol.p,
        l,
        k,
        quarter,
        diagnostics: sol.diagnostics,
    })
}

/// Drag matrices of one truncation level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DragLevel {
    pub l: f64,
    /// Energy pairing `a_h(w_j, w_k)` (full box).
    pub rbar: Mat3,
    /// Wall-force form `F_k · e_j`; only available on full-box solves.
    pub force: Option<Mat3>,
    /// Energy pairing from a full-box solve when `rbar` came from the
    /// quarter box.
    pub full_rbar: Option<Mat3>,
}

/// Wall-force form F_jk = a_h(w_k, L_j) − ⟨q_k, div L_j⟩, with `L_j` the
/// lift that carries `e_j` on the walls and vanishes inside.
fn force_entry(wk: &CellSolution, j: usize) -> Result<f64> {
    let g = &wk.grid;
    let lift = DirichletData::uniform_walls(g, &wk.mask, unit(j));
    let lj = lift.solid;
    let a = dirichlet_pairing(g, &wk.mask, &wk.w, unit(wk.k), &lj, unit(j))?;
    let d = crate::grid::div(g, &wk.mask, &lj)?;
    let qd: f64 = wk.q.data.iter().zip(&d.data).map(|(q, v)| q * v).sum();
    Ok(a - g.cell_volume() * qd)
}

/// Drag matrix from three directional solves at one truncation level.
pub fn drag_matrix(solutions: &[CellSolution; 3]) -> Result<DragLevel> {
    let l = solutions[0].l;
    for (k, s) in solutions.iter().enumerate() {
        if s.k != k
            || (s.l - l).abs() > 1e-12 * l
            || (s.grid.h - solutions[0].grid.h).abs() > 1e-12 * s.grid.h
        {
            return Err(Error::Parameter(
                "cell solutions must share L and resolution, ordered by direction".into(),
            ));
        }
    }
    let mut rbar = [[0.0; 3]; 3];
    let full = solutions.iter().all(|s| !s.quarter);
    if full {
        for j in 0..3 {
            for k in j..3 {
                let (a, b) = (&solutions[j], &solutions[k]);
                let v = dirichlet_pairing(&a.grid, &a.mask, &a.w, unit(j), &b.w, unit(k))?;
                rbar[j][k] = v;
                rbar[k][j] = v;
            }
        }
        let mut force = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                force[j][k] = force_entry(&solutions[k], j)?;
            }
        }
        Ok(DragLevel {
            l,
            rbar,
            force: Some(force),
            full_rbar: None,
        })
    } else {
        // Off-diagonal entries vanish by the reflection symmetry of the shape.
        for k in 0..3 {
            let s = &solutions[k];
            rbar[k][k] = s.multiplicity()
                * dirichlet_pairing(&s.grid, &s.mask, &s.w, unit(k), &s.w, unit(k))?;
        }
        Ok(DragLevel {
            l,
            rbar,
            force: None,
            full_rbar: None,
        })
    }
}

/// Least-squares fit `y(L) = y∞ + c/L` for each entry.
pub fn extrapolate(levels: &[DragLevel]) -> Result<Mat3> {
    if levels.len() < 2 {
        return Err(Error::Extrapolation(format!(
            "need at least two truncation levels, got {}",
            levels.len()
        )));
    }
    let xs: Vec<f64> = levels.iter().map(|d| 1.0 / d.l).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Extrapolation(
            "truncation levels must be distinct".into(),
        ));
    }
    let mut out = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            let ys: Vec<f64> = levels.iter().map(|d| d.rbar[j][k]).collect();
            let my = ys.iter().sum::<f64>() / n;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            out[j][k] = my - sxy / sxx * mx;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistanceMatrix {
    pub shape: serde_json::Value,
    /// Extrapolated drag matrix R̄.
    pub rbar: Mat3,
    /// R = R̄/8: the drag per unit cell volume ε³ of a cell of volume (2ε)³.
    pub r: Mat3,
    pub ladder: Vec<DragLevel>,
    /// max |F − Fᵀ| / max |F_kk| over the full-box force matrices.
    pub symmetry_defect: f64,
    /// Largest off-diagonal over smallest diagonal entry of R̄ (full-box levels).
    pub off_diagonal_ratio: f64,
    pub spd_min_eigenvalue: f64,
    pub h: f64,
}

fn sym_eigs(m: &Mat3) -> [f64; 3] {
    let a = nalgebra::Matrix3::from_fn(|i, j| 0.5 * (m[i][j] + m[j][i]));
    let e = nalgebra::SymmetricEigen::new(a).eigenvalues;
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

impl ResistanceMatrix {
    pub fn from_levels(shape: serde_json::Value, levels: Vec<DragLevel>, h: f64) -> Result<Self> {
        let rbar = extrapolate(&levels)?;
        let r = rbar.map(|row| row.map(|v| v / 8.0));
        let mut symmetry_defect: f64 = 0.0;
        let mut off_diagonal_ratio: f64 = 0.0;
        for lv in &levels {
            if let Some(f) = &lv.force {
                let diag = (0..3).map(|k| f[k][k].abs()).fold(0.0, f64::max);
                for j in 0..3 {
                    for k in 0..3 {
                        symmetry_defect = symmetry_defect.max((f[j][k] - f[k][j]).abs() / diag);
                    }
                }
            }
            if let Some(m) = lv
                .full_rbar
                .as_ref()
                .or(lv.force.as_ref().map(|_| &lv.rbar))
            {
                let dmin = (0..3).map(|k| m[k][k]).fold(f64::INFINITY, f64::min);
                for j in 0..3 {
                    for k in 0..3 {
                        if j != k {
                            off_diagonal_ratio = off_diagonal_ratio.max(m[j][k].abs() / dmin);
                        }
                    }
                }
            }
        }
        let spd_min_eigenvalue = sym_eigs(&r)[0];
        if !(spd_min_eigenvalue > 0.0) {
            return Err(Error::Extrapolation(format!(
                "extrapolated resistance is not positive definite ({spd_min_eigenvalue})"
            )));
        }
        Ok(Self {
            shape,
            rbar,
            r,
            ladder: levels,
            symmetry_defect,
            off_diagonal_ratio,
            spd_min_eigenvalue,
            h,
        })
    }

    /// Resistance from a given R (for configured or cached values).
    pub fn from_r(r: Mat3) -> Result<Self> {
        let e = sym_eigs(&r);
        let asym = (0..3)
            .flat_map(|j| (0..3).map(move |k| (j, k)))
            .map(|(j, k)| (r[j][k] - r[k][j]).abs())
            .fold(0.0, f64::max);
        if !(e[0] > 0.0) || asym > 1e-6 * e[2] {
            return Err(Error::Parameter(format!(
                "resistance matrix must be symmetric positive definite (eigenvalues {e:?})"
            )));
        }
        Ok(Self {
            shape: serde_json::Value::Null,
            rbar: r.map(|row| row.map(|v| 8.0 * v)),
            r,
            ladder: Vec::new(),
            symmetry_defect: 0.0,
            off_diagonal_ratio: 0.0,
            spd_min_eigenvalue: e[0],
            h: 0.0,
        })
    }

    /// Drag scales linearly with the size of the particle.
    pub fn dilate(&self, s: f64, shape: serde_json::Value) -> Self {
        let mut out = self.clone();
        out.shape = shape;
        out.rbar = self.rbar.map(|row| row.map(|v| v * s));
        out.r = self.r.map(|row| row.map(|v| v * s));
        out.spd_min_eigenvalue *= s;
        out.h *= s;
        for lv in &mut out.ladder {
            lv.l *= s;
            let sc = |m: Mat3| m.map(|row| row.map(|v| v * s));
            lv.rbar = sc(lv.rbar);
            lv.force = lv.force.map(sc);
            lv.full_rbar = lv.full_rbar.map(sc);
        }
        out
    }

    pub fn isotropic(r: f64) -> Result<Self> {
        Self::from_r([[r, 0.0, 0.0], [0.0, r, 0.0], [0.0, 0.0, r]])
    }
}

/// Options of a resistance computation.
#[derive(Debug, Clone)]
pub struct ResistanceOptions {
    /// Truncation half-widths in units of the bounding radius.
    pub ladder: Vec<f64>,
    /// Grid cells per unit length of the reference frame.
    pub cells_per_unit: f64,
    pub use_symmetry: bool,
    /// Also solve the smallest level on the full box (symmetry defect).
    pub full_box_check: bool,
    pub tol: SolverTolerances,
}

impl Default for ResistanceOptions {
    fn default() -> Self {
        Self {
            ladder: vec![8.0, 16.0, 32.0],
            cells_per_unit: 4.0,
            use_symmetry: true,
            full_box_check: true,
            tol: SolverTolerances::default(),
        }
    }
}

/// Truncation ladder with 1/L extrapolation; returns the resistance matrix
/// and the directional solutions of the largest truncation.
pub fn compute_resistance(
    shape: &ReferenceShape,
    opts: &ResistanceOptions,
) -> Result<(ResistanceMatrix, [CellSolution; 3])> {
    let h = 1.0 / opts.cells_per_unit;
    let rb = shape.bounding_radius();
    let mut levels = Vec::new();
    let mut last = None;
    let symmetric = opts.use_symmetry && shape.is_reflection_symmetric();
    let mut ls: Vec<f64> = opts.ladder.iter().map(|m| snap(m * rb, h)).collect();
    ls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ls.dedup();
    if ls.len() < 2 {
        return Err(Error::Extrapolation(format!(
            "need at least two truncation levels, got {}",
            ls.len()
        )));
    }
    for (i, &l) in ls.iter().enumerate() {
        let sols = directional(shape, l, h, &opts.tol, symmetric)?;
        let mut level = drag_matrix(&sols)?;
        if i == 0 && symmetric && opts.full_box_check {
            let full = directional(shape, l, h, &opts.tol, false)?;
            let check = drag_matrix(&full)?;
            level.force = check.force;
            level.full_rbar = Some(check.rbar);
        }
        levels.push(level);
        last = Some(sols);
    }
    let res = ResistanceMatrix::from_levels(shape.describe(), levels, h)?;
    Ok((res, last.expect("ladder is nonempty")))
}

/// Rounds a half-width to a whole number of cells.
fn snap(l: f64, h: f64) -> f64 {
    (l / h).round().max(1.0) * h
}

fn directional(
    shape: &ReferenceShape,
    l: f64,
    h: f64,
    tol: &SolverTolerances,
    symmetric: bool,
) -> Result<[CellSolution; 3]> {
    let a = solve_cell_problem(shape, 0, l, h, tol, symmetric)?;
    let b = solve_cell_problem(shape, 1, l, h, tol, symmetric)?;
    let c = solve_cell_problem(shape, 2, l, h, tol, symmetric)?;
    Ok([a, b, c])
}

/// Brinkman friction coefficient σ_ε⁻²·R.
pub fn brinkman_density(r: &ResistanceMatrix, eps: f64, alpha: f64) -> Result<Mat3> {
    let s = sigma(eps, alpha)?;
    Ok(r.r.map(|row| row.map(|v| v / (s * s))))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * z * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = p0;
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Force on everything inside the sphere of radius `r`, from the traction
/// (∇w + ∇wᵀ)n − q n integrated over that sphere. Velocity gradients are
/// central differences of the interpolated field with step h.
pub fn surface_force(sol: &CellSolution, r: f64, n_theta: usize) -> Vec3 {
    let (mu, wmu) = gauss_legendre(n_theta);
    let n_phi = 2 * n_theta;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let h = sol.grid.h;
    let mut force = [0.0; 3];
    for (m, wm) in mu.iter().zip(&wmu) {
        let st = (1.0 - m * m).sqrt();
        for ip in 0..n_phi {
            let phi = (ip as f64 + 0.5) * dphi;
            let n = [st * phi.cos(), st * phi.sin(), *m];
            let x = [r * n[0], r * n[1], r * n[2]];
            let mut grad = [[0.0; 3]; 3]; // grad[c][a] = ∂_a w_c
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let vp = sol.sample_velocity(xp);
                let vm = sol.sample_velocity(xm);
                for c in 0..3 {
                    grad[c][a] = (vp[c] - vm[c]) / (2.0 * h);
                }
            }
            let q = sol.sample_pressure(x);
            let wgt = wm * dphi * r * r;
            for c in 0..3 {
                let mut t = -q * n[c];
                for a in 0..3 {
                    t += (grad[c][a] + grad[a][c]) * n[a];
                }
                force[c] += wgt * t;
            }
        }
    }
    force
}

/// Root-mean-square of |w − e_k| over spheres of the given radii.
pub fn far_field_profile(sol: &CellSolution, radii: &[f64], n_theta: usize) -> Vec<f64> {
    let (mu, wmu) = gauss_legendre(n_theta);
    let n_phi = 2 * n_theta;
    let e = unit(sol.k);
    radii
        .iter()
        .map(|&r| {
            let mut acc = 0.0;
            for (m, wm) in mu.iter().zip(&wmu) {
                let st = (1.0 - m * m).sqrt();
                for ip in 0..n_phi {
                    let phi = (ip as f64 + 0.5) * 2.0 * std::f64::consts::PI / n_phi as f64;
                    let w = sol.sample_velocity([r * st * phi.cos(), r * st * phi.sin(), r * m]);
                    let d: f64 = (0..3).map(|c| (w[c] - e[c]).powi(2)).sum();
                    acc += wm * d;
                }
            }
            (acc / (2.0 * n_phi as f64)).sqrt()
        })
        .collect()
}

/// Log-log slope of the far-field profile over `r ∈ [r_min, r_max]`.
pub fn far_field_slope(sol: &CellSolution, r_min: f64, r_max: f64, samples: usize) -> Result<f64> {
    if !(r_min > 0.0 && r_max > r_min) || samples < 2 {
        return Err(Error::Parameter(format!(
            "invalid far-field range [{r_min}, {r_max}] with {samples} samples"
        )));
    }
    let radii: Vec<f64> = (0..samples)
        .map(|i| r_min * (r_max / r_min).powf(i as f64 / (samples - 1) as f64))
        .collect();
    let prof = far_field_profile(sol, &radii, 12);
    let pts: Vec<(f64, f64)> = radii.into_iter().zip(prof).collect();
    Ok(crate::harness::fit_rate(&pts)?.exponent)
}

#[cfg(test)]
mod tests;
