//! Exact inverses of separable box Laplacians through 1D eigenbases.
//!
//! Each axis carries a symmetric tridiagonal second-difference matrix whose
//! end rows encode the boundary treatment; the 3D operator is the Kronecker
//! sum, so it is diagonalized by the tensor product of the 1D eigenvectors.
//! Transforms are dense matrix products, which is competitive with fast
//! trigonometric transforms at the resolutions used here.

use nalgebra::{DMatrix, SymmetricEigen};

/// Treatment of one end of a 1D line of unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    /// Ghost `−v` half a cell beyond the last unknown.
    Ghost,
    /// Ghost `+v` half a cell beyond the last unknown (zero flux).
    Mirror,
    /// Zero value one full cell beyond the last unknown.
    Wall,
}

/// Eigen-decomposition of a 1D second-difference matrix (unit spacing).
#[derive(Debug, Clone)]
pub struct Axis1d {
    /// Number of unknowns.
    pub m: usize,
    /// Index of the first unknown in the full array line.
    pub first: usize,
    /// Eigenvectors as columns, row-major `m × m`.
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Axis1d {
    pub fn new(m: usize, first: usize, ends: [End; 2]) -> Self {
        let mut t = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            let mut d = 0.0;
            for (s, end) in ends.iter().enumerate() {
                let inner = if s == 0 { j > 0 } else { j + 1 < m };
                if inner {
                    d += 1.0;
                    let o = if s == 0 { j - 1 } else { j + 1 };
                    t[(j, o)] = -1.0;
                } else {
                    d += match end {
                        End::Ghost => 2.0,
                        End::Mirror => 0.0,
                        End::Wall => 1.0,
                    };
                }
            }
            t[(j, j)] = d;
        }
        let eig = SymmetricEigen::new(t);
        let mut q = vec![0.0; m * m];
        for i in 0..m {
            for e in 0..m {
                q[i * m + e] = eig.eigenvectors[(i, e)];
            }
        }
        let lambda = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        Self {
            m,
            first,
            q,
            lambda,
        }
    }
}

/// Solver for `(−Δ_h + shift) x = r` on a rectangular array of unknowns
/// embedded in a larger array (entries outside the block are ignored on input
/// and set to zero on output).
#[derive(Debug, Clone)]
pub struct BoxSpectral {
    pub dims: [usize; 3],
    pub axes: [Axis1d; 3],
    inv: Vec<f64>,
}

/// Relative size below which an eigenvalue counts as a null mode.
const NULL_TOL: f64 = 1e-12;

impl BoxSpectral {
    pub fn new(dims: [usize; 3], axes: [Axis1d; 3], h: f64, shift: f64) -> Self {
        let m = [axes[0].m, axes[1].m, axes[2].m];
        let inv_h2 = 1.0 / (h * h);
        let mut inv = Vec::with_capacity(m[0] * m[1] * m[2]);
        let scale = 12.0 * inv_h2 + shift.abs();
        for c in 0..m[2] {
            for b in 0..m[1] {
                for a in 0..m[0] {
                    let l = (axes[0].lambda[a] + axes[1].lambda[b] + axes[2].lambda[c]) * inv_h2
                        + shift;
                    inv.push(if l > NULL_TOL * scale { 1.0 / l } else { 0.0 });
                }
            }
        }
        Self { dims, axes, inv }
    }

    fn block(&self) -> [usize; 3] {
        [self.axes[0].m, self.axes[1].m, self.axes[2].m]
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let m = self.block();
        let d = self.dims;
        let first = [self.axes[0].first, self.axes[1].first, self.axes[2].first];
        let len = m[0] * m[1] * m[2];
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        for k in 0..m[2] {
            for j in 0..m[1] {
                let src = first[0] + d[0] * (first[1] + j + d[1] * (first[2] + k));
                let dst = m[0] * (j + m[1] * k);
                a[dst..dst + m[0]].copy_from_slice(&r[src..src + m[0]]);
            }
        }
        self.transform(&mut a, &mut b, false);
        for (v, s) in a.iter_mut().zip(&self.inv) {
            *v *= s;
        }
        self.transform(&mut a, &mut b, true);
        z.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m[2] {
            for j in 0..m[1] {
                let dst = first[0] + d[0] * (first[1] + j + d[1] * (first[2] + k));
                let src = m[0] * (j + m[1] * k);
                z[dst..dst + m[0]].copy_from_slice(&a[src..src + m[0]]);
            }
        }
    }

    /// Forward (`x ↦ Qᵀx`) or inverse (`c ↦ Qc`) transform of the compact
    /// block held in `a`; `b` is scratch. The result ends up in `a`.
    fn transform(&self, a: &mut Vec<f64>, b: &mut Vec<f64>, inverse: bool) {
        let m = self.block();
        // x axis: rows of length m0, A(m1·m2 × m0) · Q or · Qᵀ
        let qx = &self.axes[0].q;
        let (rsq, csq) = if inverse { (1, m[0]) } else { (m[0], 1) };
        gemm(
            m[1] * m[2],
            m[0],
            m[0],
            a,
            m[0] as isize,
            1,
            qx,
            rsq as isize,
            csq as isize,
            b,
            m[0] as isize,
            1,
        );
        std::mem::swap(a, b);
        // y axis: per z-slab, Qᵀ or Q times the (m1 × m0) slab
        let qy = &self.axes[1].q;
        let (rsq, csq) = if inverse { (m[1], 1) } else { (1, m[1]) };
        let slab = m[0] * m[1];
        for k in 0..m[2] {
            let src = &a[k * slab..(k + 1) * slab];
            let dst = &mut b[k * slab..(k + 1) * slab];
            gemm(
                m[1],
                m[1],
                m[0],
                qy,
                rsq as isize,
                csq as isize,
                src,
                m[0] as isize,
                1,
                dst,
                m[0] as isize,
                1,
            );
        }
        std::mem::swap(a, b);
        // z axis: Qᵀ or Q times the (m2 × m0·m1) matrix
        let qz = &self.axes[2].q;
        let (rsq, csq) = if inverse { (m[2], 1) } else { (1, m[2]) };
        gemm(
            m[2],
            m[2],
            slab,
            qz,
            rsq as isize,
            csq as isize,
            a,
            slab as isize,
            1,
            b,
            slab as isize,
            1,
        );
        std::mem::swap(a, b);
    }
}

/// C(m×n) = A(m×k)·B(k×n) with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the strides describe views lying inside the given slices, as
    // checked above for the dense layouts used by the callers.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}
