//! Discrete gradient, divergence and Laplacians on the masked MAC grid.
//!
//! Solid neighbours enter the Laplacians through the ghost value `−v`
//! (homogeneous Dirichlet halfway between the two nodes). A normal-velocity
//! neighbour on the box boundary sits exactly on the wall and contributes its
//! own value. At a free-slip wall the tangential ghost is `+v`.

use crate::error::Result;
use crate::grid::field::check_same_len;
use crate::grid::{GridSpec, Mask, ScalarField, VectorField, WallKind};

/// ∇p on fluid faces, zero elsewhere.
pub fn grad(grid: &GridSpec, mask: &Mask, p: &ScalarField) -> Result<VectorField> {
    p.check(grid)?;
    mask.check(grid)?;
    let mut out = VectorField::zeros(grid);
    grad_into(grid, mask, &p.data, &mut out.data);
    Ok(out)
}

pub(crate) fn grad_into(grid: &GridSpec, mask: &Mask, p: &[f64], out: &mut [f64]) {
    let inv_h = 1.0 / grid.h;
    let n = grid.n;
    for c in 0..3 {
        let d = grid.face_dims(c);
        let off = mask.offsets[c];
        let cstride = [1, n[0], n[0] * n[1]][c];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = off + i + d[0] * (j + d[1] * k);
                    if mask.face[f] {
                        let hi = grid.cell_index(i, j, k);
                        out[f] = (p[hi] - p[hi - cstride]) * inv_h;
                    } else {
                        out[f] = 0.0;
                    }
                }
            }
        }
    }
}

/// Flux divergence on fluid cells, zero on solid cells.
pub fn div(grid: &GridSpec, mask: &Mask, u: &VectorField) -> Result<ScalarField> {
    u.check(grid)?;
    mask.check(grid)?;
    let mut out = ScalarField::zeros(grid);
    div_into(grid, Some(mask), &u.data, &mut out.data);
    Ok(out)
}

/// Flux divergence on every cell of the box, fluid or not.
pub fn div_unmasked(grid: &GridSpec, u: &VectorField) -> Result<ScalarField> {
    u.check(grid)?;
    let mut out = ScalarField::zeros(grid);
    div_into(grid, None, &u.data, &mut out.data);
    Ok(out)
}

pub(crate) fn div_into(grid: &GridSpec, mask: Option<&Mask>, u: &[f64], out: &mut [f64]) {
    let inv_h = 1.0 / grid.h;
    let n = grid.n;
    let offsets = grid.face_offsets();
    let dx = grid.face_dims(0);
    let dy = grid.face_dims(1);
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let ci = grid.cell_index(i, j, k);
                if let Some(m) = mask {
                    if !m.cell[ci] {
                        out[ci] = 0.0;
                        continue;
                    }
                }
                let fx = offsets[0] + i + dx[0] * (j + dx[1] * k);
                let fy = offsets[1] + i + dy[0] * (j + dy[1] * k);
                let fz = offsets[2] + ci;
                let s =
                    (u[fx + 1] - u[fx]) + (u[fy + dy[0]] - u[fy]) + (u[fz + n[0] * n[1]] - u[fz]);
                out[ci] = s * inv_h;
            }
        }
    }
}

/// Four-point average of the `from`-face values onto the `to`-faces: each
/// `to`-face takes the mean of the `from`-faces of its two adjacent cells.
/// The weights are symmetric, so averaging back is the transpose. Returns
/// values for the whole `to` family; box-boundary `to`-faces are left at zero.
pub fn average_component(grid: &GridSpec, u: &[f64], from: usize, to: usize) -> Vec<f64> {
    let df = grid.face_dims(from);
    let dt = grid.face_dims(to);
    let off = grid.face_offsets();
    let mut out = vec![0.0; grid.face_count(to)];
    if from == to {
        out.copy_from_slice(&u[off[to]..off[to + 1]]);
        return out;
    }
    let fs = [1, df[0], df[0] * df[1]];
    for k in 0..dt[2] {
        for j in 0..dt[1] {
            for i in 0..dt[0] {
                let idx = [i, j, k];
                if idx[to] == 0 || idx[to] == grid.n[to] {
                    continue;
                }
                // the two cells share this face: idx (high side) and idx - e_to
                let base = off[from] + i + df[0] * (j + df[1] * k);
                let lo_cell = base - fs[to];
                let s = u[base] + u[base + fs[from]] + u[lo_cell] + u[lo_cell + fs[from]];
                out[i + dt[0] * (j + dt[1] * k)] = 0.25 * s;
            }
        }
    }
    out
}

/// Classification of one neighbour link of a velocity or scalar node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Link {
    Fluid,
    /// Ghost `−v`: wall halfway to the neighbour.
    Ghost,
    /// Neighbour on the box boundary, exactly at the wall.
    Wall,
    /// Ghost `+v`: mirror plane halfway to the neighbour.
    Mirror,
}

/// −Δ_h acting on face velocities, with the link structure precomputed.
#[derive(Debug, Clone)]
pub struct VectorLaplacian {
    pub(crate) inv_h2: f64,
    /// Diagonal in units of 1/h².
    pub(crate) diag: Vec<f64>,
    /// Bit `2a + s` set when the neighbour along axis `a` on side `s` is fluid.
    pub(crate) nbr: Vec<u8>,
    pub(crate) strides: [[usize; 3]; 3],
    pub(crate) offsets: [usize; 4],
    pub(crate) fluid: Vec<usize>,
}

impl VectorLaplacian {
    pub fn new(grid: &GridSpec, mask: &Mask) -> Self {
        let total = mask.offsets[3];
        let mut diag = vec![0.0; total];
        let mut nbr = vec![0u8; total];
        let mut fluid = Vec::with_capacity(mask.fluid_faces());
        let mut strides = [[0usize; 3]; 3];
        for c in 0..3 {
            let d = grid.face_dims(c);
            strides[c] = [1, d[0], d[0] * d[1]];
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let f = mask.offsets[c] + i + d[0] * (j + d[1] * k);
                        if !mask.face[f] {
                            continue;
                        }
                        fluid.push(f);
                        let idx = [i, j, k];
                        let mut dg = 0.0;
                        let mut bits = 0u8;
                        for a in 0..3 {
                            for s in 0..2 {
                                let link = face_link(grid, mask, c, idx, a, s, f, strides[c][a]);
                                match link {
                                    Link::Fluid => {
                                        dg += 1.0;
                                        bits |= 1 << (2 * a + s);
                                    }
                                    Link::Ghost => dg += 2.0,
                                    Link::Wall => dg += 1.0,
                                    Link::Mirror => {}
                                }
                            }
                        }
                        diag[f] = dg;
                        nbr[f] = bits;
                    }
                }
            }
        }
        Self {
            inv_h2: 1.0 / (grid.h * grid.h),
            diag,
            nbr,
            strides,
            offsets: mask.offsets,
            fluid,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Jacobi diagonal (zero on solid dofs).
    pub fn diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|d| d * self.inv_h2).collect()
    }

    pub fn fluid_dofs(&self) -> &[usize] {
        &self.fluid
    }

    /// y = −Δ_h x on fluid dofs; solid entries of y are left at zero.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for &f in &self.fluid {
            let c = if f < self.offsets[1] {
                0
            } else if f < self.offsets[2] {
                1
            } else {
                2
            };
            let st = &self.strides[c];
            let bits = self.nbr[f];
            let mut s = self.diag[f] * x[f];
            if bits & 1 != 0 {
                s -= x[f - st[0]];
            }
            if bits & 2 != 0 {
                s -= x[f + st[0]];
            }
            if bits & 4 != 0 {
                s -= x[f - st[1]];
            }
            if bits & 8 != 0 {
                s -= x[f + st[1]];
            }
            if bits & 16 != 0 {
                s -= x[f - st[2]];
            }
            if bits & 32 != 0 {
                s -= x[f + st[2]];
            }
            y[f] = s * self.inv_h2;
        }
    }
}

fn face_link(
    grid: &GridSpec,
    mask: &Mask,
    c: usize,
    idx: [usize; 3],
    a: usize,
    s: usize,
    f: usize,
    stride: usize,
) -> Link {
    let d = grid.face_dims(c);
    if a == c {
        // Normal direction: neighbours are faces, the outermost ones sit on the wall.
        let m = if s == 0 { idx[a] - 1 } else { idx[a] + 1 };
        if m == 0 || m == grid.n[c] {
            return Link::Wall;
        }
        let g = if s == 0 { f - stride } else { f + stride };
        return if mask.face[g] {
            Link::Fluid
        } else {
            Link::Ghost
        };
    }
    let out_of_box = (s == 0 && idx[a] == 0) || (s == 1 && idx[a] + 1 == d[a]);
    if out_of_box {
        return match grid.walls[a][s] {
            WallKind::NoSlip => Link::Ghost,
            WallKind::FreeSlip => Link::Mirror,
        };
    }
    let g = if s == 0 { f - stride } else { f + stride };
    if mask.face[g] {
        Link::Fluid
    } else {
        Link::Ghost
    }
}

/// Kind of each of the six links of face dof `f` (for boundary data handling).
pub(crate) fn face_links(
    grid: &GridSpec,
    mask: &Mask,
    c: usize,
    idx: [usize; 3],
    f: usize,
) -> [Link; 6] {
    let d = grid.face_dims(c);
    let strides = [1, d[0], d[0] * d[1]];
    let mut out = [Link::Fluid; 6];
    for a in 0..3 {
        for s in 0..2 {
            out[2 * a + s] = face_link(grid, mask, c, idx, a, s, f, strides[a]);
        }
    }
    out
}

/// −Δ_h on cell scalars with homogeneous Dirichlet data on the solid set and
/// on no-slip box walls; free-slip walls act as zero-flux mirror planes.
#[derive(Debug, Clone)]
pub struct ScalarDirichletLaplacian {
    pub(crate) inv_h2: f64,
    pub(crate) diag: Vec<f64>,
    pub(crate) nbr: Vec<u8>,
    pub(crate) strides: [usize; 3],
    pub(crate) fluid: Vec<usize>,
}

impl ScalarDirichletLaplacian {
    pub fn new(grid: &GridSpec, mask: &Mask) -> Self {
        let n = grid.n;
        let strides = [1, n[0], n[0] * n[1]];
        let mut diag = vec![0.0; grid.cell_count()];
        let mut nbr = vec![0u8; grid.cell_count()];
        let mut fluid = Vec::with_capacity(mask.fluid_cells());
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let ci = grid.cell_index(i, j, k);
                    if !mask.cell[ci] {
                        continue;
                    }
                    fluid.push(ci);
                    let faces = mask.cell_faces(grid, i, j, k);
                    let idx = [i, j, k];
                    let mut dg = 0.0;
                    let mut bits = 0u8;
                    for a in 0..3 {
                        for s in 0..2 {
                            let inside = if s == 0 {
                                idx[a] > 0
                            } else {
                                idx[a] + 1 < n[a]
                            };
                            if inside && mask.face[faces[2 * a + s]] {
                                dg += 1.0;
                                bits |= 1 << (2 * a + s);
                            } else if inside || grid.walls[a][s] == WallKind::NoSlip {
                                dg += 2.0;
                            }
                        }
                    }
                    diag[ci] = dg;
                    nbr[ci] = bits;
                }
            }
        }
        Self {
            inv_h2: 1.0 / (grid.h * grid.h),
            diag,
            nbr,
            strides,
            fluid,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|d| d * self.inv_h2).collect()
    }

    pub fn fluid_dofs(&self) -> &[usize] {
        &self.fluid
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let st = self.strides;
        for &f in &self.fluid {
            let bits = self.nbr[f];
            let mut s = self.diag[f] * x[f];
            for a in 0..3 {
                if bits & (1 << (2 * a)) != 0 {
                    s -= x[f - st[a]];
                }
                if bits & (1 << (2 * a + 1)) != 0 {
                    s -= x[f + st[a]];
                }
            }
            y[f] = s * self.inv_h2;
        }
    }
}

/// Δ_h u (the negative of the solver operator).
pub fn laplacian_vector(grid: &GridSpec, mask: &Mask, u: &VectorField) -> Result<VectorField> {
    u.check(grid)?;
    mask.check(grid)?;
    let op = VectorLaplacian::new(grid, mask);
    let mut out = VectorField::zeros(grid);
    op.apply(&u.data, &mut out.data);
    out.data.iter_mut().for_each(|v| *v = -*v);
    Ok(out)
}

/// Δ_h p with Dirichlet ghosts.
pub fn laplacian_scalar(grid: &GridSpec, mask: &Mask, p: &ScalarField) -> Result<ScalarField> {
    p.check(grid)?;
    mask.check(grid)?;
    let op = ScalarDirichletLaplacian::new(grid, mask);
    let mut out = ScalarField::zeros(grid);
    op.apply(&p.data, &mut out.data);
    out.data.iter_mut().for_each(|v| *v = -*v);
    Ok(out)
}

/// ⟨∇_h u, ∇_h v⟩ summed link by link (fluid-fluid links once, wall links
/// with the half-cell or full-cell distance).
pub fn vector_dirichlet_form(
    grid: &GridSpec,
    mask: &Mask,
    u: &VectorField,
    v: &VectorField,
) -> Result<f64> {
    u.check(grid)?;
    v.check(grid)?;
    check_same_len(&u.data, &v.data)?;
    let h = grid.h;
    let mut total = 0.0;
    for c in 0..3 {
        let d = grid.face_dims(c);
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = mask.offsets[c] + i + d[0] * (j + d[1] * k);
                    if !mask.face[f] {
                        continue;
                    }
                    let links = face_links(grid, mask, c, [i, j, k], f);
                    let strides = [1, d[0], d[0] * d[1]];
                    for a in 0..3 {
                        for s in 0..2 {
                            match links[2 * a + s] {
                                Link::Fluid if s == 1 => {
                                    let g = f + strides[a];
                                    total += h * (u.data[f] - u.data[g]) * (v.data[f] - v.data[g]);
                                }
                                Link::Fluid => {}
                                Link::Ghost => total += 2.0 * h * u.data[f] * v.data[f],
                                Link::Wall => total += h * u.data[f] * v.data[f],
                                Link::Mirror => {}
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Scalar counterpart of [`vector_dirichlet_form`].
pub fn scalar_dirichlet_form(
    grid: &GridSpec,
    mask: &Mask,
    u: &ScalarField,
    v: &ScalarField,
) -> Result<f64> {
    u.check(grid)?;
    v.check(grid)?;
    let op = ScalarDirichletLaplacian::new(grid, mask);
    let h = grid.h;
    let mut total = 0.0;
    for &f in &op.fluid {
        let bits = op.nbr[f];
        // each Dirichlet ghost adds 2 to the diagonal, mirror walls add nothing
        let ghosts = op.diag[f] - bits.count_ones() as f64;
        total += h * ghosts * u.data[f] * v.data[f];
        for a in 0..3 {
            if bits & (1 << (2 * a + 1)) != 0 {
                let g = f + op.strides[a];
                total += h * (u.data[f] - u.data[g]) * (v.data[f] - v.data[g]);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::with_cells(DomainSpec::unit_cube(), n).unwrap()
    }

    fn holes(g: &GridSpec) -> Mask {
        Mask::from_solid(g, |x| {
            let a = crate::vec3::norm(crate::vec3::sub(x, [0.3, 0.4, 0.5])) < 0.17;
            let b = crate::vec3::norm(crate::vec3::sub(x, [0.75, 0.7, 0.3])) < 0.12;
            a || b
        })
    }

    fn random_vector(g: &GridSpec, m: &Mask, rng: &mut ChaCha8Rng) -> VectorField {
        let mut u = VectorField::zeros(g);
        for (v, &f) in u.data.iter_mut().zip(&m.face) {
            if f {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        u
    }

    fn random_scalar(g: &GridSpec, m: &Mask, rng: &mut ChaCha8Rng) -> ScalarField {
        let mut p = ScalarField::zeros(g);
        for (v, &f) in p.data.iter_mut().zip(&m.cell) {
            if f {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        p
    }

    fn inner(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn grad_of_constant_and_linear() {
        let g = grid(8);
        let m = Mask::full(&g);
        let z = grad(&g, &m, &ScalarField::constant(&g, 3.0)).unwrap();
        assert!(z.data.iter().all(|&v| v == 0.0));
        let a = [0.5, -2.0, 1.25];
        let p = ScalarField::from_fn(&g, |x| a[0] * x[0] + a[1] * x[1] + a[2] * x[2]);
        let gp = grad(&g, &m, &p).unwrap();
        for c in 0..3 {
            let d = g.face_dims(c);
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let f = m.offsets[c] + i + d[0] * (j + d[1] * k);
                        let expect = if m.face[f] { a[c] } else { 0.0 };
                        assert!((gp.data[f] - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn div_of_constant_and_identity() {
        let g = grid(8);
        let m = Mask::full(&g);
        let c = div(&g, &m, &VectorField::from_fn(&g, |_| [1.0, 2.0, 3.0])).unwrap();
        assert!(c.data.iter().all(|v| v.abs() < 1e-12));
        let d = div(&g, &m, &VectorField::from_fn(&g, |x| x)).unwrap();
        assert!(d.data.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn summation_by_parts_on_perforated_grid() {
        let g = grid(24);
        let m = holes(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_vector(&g, &m, &mut rng);
        let p = random_scalar(&g, &m, &mut rng);
        let du = div(&g, &m, &u).unwrap();
        let gp = grad(&g, &m, &p).unwrap();
        let a = inner(&du.data, &p.data);
        let b = inner(&u.data, &gp.data);
        assert!((a + b).abs() <= 1e-13 * a.abs().max(b.abs()), "{a} {b}");
    }

    #[test]
    fn quadratic_is_reproduced_in_the_interior() {
        let g = grid(10);
        let m = Mask::full(&g);
        let q = |x: [f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let s = laplacian_scalar(&g, &m, &ScalarField::from_fn(&g, q)).unwrap();
        for k in 1..9 {
            for j in 1..9 {
                for i in 1..9 {
                    assert!((s.data[g.cell_index(i, j, k)] - 6.0).abs() < 1e-9);
                }
            }
        }
        let u = VectorField::from_fn(&g, |x| [q(x), q(x), q(x)]);
        let lu = laplacian_vector(&g, &m, &u).unwrap();
        for c in 0..3 {
            let d = g.face_dims(c);
            for k in 1..d[2] - 1 {
                for j in 1..d[1] - 1 {
                    for i in 1..d[0] - 1 {
                        let idx = [i, j, k];
                        if idx[c] < 2 || idx[c] + 2 >= d[c] {
                            continue;
                        }
                        let f = m.offsets[c] + i + d[0] * (j + d[1] * k);
                        assert!((lu.data[f] - 6.0).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn dirichlet_eigenvalue_converges_at_second_order() {
        let pi = std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = grid(n);
            let m = Mask::full(&g);
            let v = ScalarField::from_fn(&g, |x| {
                (pi * x[0]).sin() * (pi * x[1]).sin() * (pi * x[2]).sin()
            });
            let lv = laplacian_scalar(&g, &m, &v).unwrap();
            let lambda = -inner(&lv.data, &v.data) / inner(&v.data, &v.data);
            errs.push((lambda - 3.0 * pi * pi).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "{errs:?}");
        assert!(errs[1] < 0.01 * 3.0 * pi * pi);
    }

    fn check_symmetry(g: &GridSpec, m: &Mask, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_vector(g, m, &mut rng);
        let v = random_vector(g, m, &mut rng);
        let op = VectorLaplacian::new(g, m);
        let mut au = vec![0.0; u.data.len()];
        op.apply(&u.data, &mut au);
        for (a, &f) in au.iter().zip(&m.face) {
            if !f {
                assert_eq!(*a, 0.0);
            }
        }
        let lhs = g.cell_volume() * inner(&au, &v.data);
        let rhs = vector_dirichlet_form(g, m, &u, &v).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1.0),
            "{lhs} {rhs}"
        );
        assert!(vector_dirichlet_form(g, m, &u, &u).unwrap() > 0.0);

        let p = random_scalar(g, m, &mut rng);
        let q = random_scalar(g, m, &mut rng);
        let sop = ScalarDirichletLaplacian::new(g, m);
        let mut ap = vec![0.0; p.data.len()];
        sop.apply(&p.data, &mut ap);
        let lhs = g.cell_volume() * inner(&ap, &q.data);
        let rhs = scalar_dirichlet_form(g, m, &p, &q).unwrap();
        assert!(
            (lhs - rhs).abs() <= 1e-13 * rhs.abs().max(1.0),
            "{lhs} {rhs}"
        );
    }

    #[test]
    fn laplacian_matches_energy_form() {
        let g = grid(20);
        check_symmetry(&g, &holes(&g), 3);
        let free = g.clone().with_walls([
            [WallKind::FreeSlip, WallKind::NoSlip],
            [WallKind::NoSlip, WallKind::FreeSlip],
            [WallKind::FreeSlip, WallKind::FreeSlip],
        ]);
        check_symmetry(&free, &holes(&free), 4);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = grid(8);
        let h = grid(10);
        assert!(grad(&g, &Mask::full(&g), &ScalarField::zeros(&h)).is_err());
        assert!(div(&g, &Mask::full(&h), &VectorField::zeros(&g)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn adjointness_holds_for_random_geometry(seed in 0u64..1000, cx in 0.2f64..0.8, r in 0.05f64..0.3, n in 8usize..14) {
            let g = grid(n);
            let m = Mask::from_solid(&g, |x| crate::vec3::norm(crate::vec3::sub(x, [cx, 0.5, 0.45])) < r);
            prop_assume!(m.fluid_faces() > 0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_vector(&g, &m, &mut rng);
            let p = random_scalar(&g, &m, &mut rng);
            let gp = grad(&g, &m, &p).unwrap();
            let a = inner(&div(&g, &m, &u).unwrap().data, &p.data);
            let b = inner(&u.data, &gp.data);
            // relative to the Cauchy-Schwarz bound, since a and b may nearly cancel
            let scale = inner(&u.data, &u.data).sqrt() * inner(&gp.data, &gp.data).sqrt();
            prop_assert!((a + b).abs() <= 1e-13 * scale);
            check_symmetry(&g, &m, seed);
        }
    }
}
