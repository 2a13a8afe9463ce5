use crate::error::{Error, Result};
use crate::grid::{GridSpec, Mask};

/// Cell-centred values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub n: [usize; 3],
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            n: grid.n,
            data: vec![0.0; grid.cell_count()],
        }
    }

    pub fn constant(grid: &GridSpec, value: f64) -> Self {
        Self {
            n: grid.n,
            data: vec![value; grid.cell_count()],
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    out.data[grid.cell_index(i, j, k)] = f(grid.cell_center(i, j, k));
                }
            }
        }
        out
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.n != grid.n || self.data.len() != grid.cell_count() {
            return Err(Error::Shape(format!(
                "scalar field {:?} on grid {:?}",
                self.n, grid.n
            )));
        }
        Ok(())
    }
}

/// Face-centred vector components, concatenated x | y | z.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub n: [usize; 3],
    pub offsets: [usize; 4],
    pub data: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &GridSpec) -> Self {
        let offsets = grid.face_offsets();
        Self {
            n: grid.n,
            offsets,
            data: vec![0.0; offsets[3]],
        }
    }

    /// Samples component `c` of `f` at the centres of the `c`-faces.
    pub fn from_fn(grid: &GridSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for c in 0..3 {
            let d = grid.face_dims(c);
            let off = out.offsets[c];
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        out.data[off + i + d[0] * (j + d[1] * k)] =
                            f(grid.face_center(c, i, j, k))[c];
                    }
                }
            }
        }
        out
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        &self.data[self.offsets[c]..self.offsets[c + 1]]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[self.offsets[c]..self.offsets[c + 1]]
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.n != grid.n || self.data.len() != grid.face_offsets()[3] {
            return Err(Error::Shape(format!(
                "vector field {:?} on grid {:?}",
                self.n, grid.n
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// (h³ Σ |v|^p)^{1/p} over the selected entries; `p = ∞` gives max |v|.
fn lp_norm<'a>(values: impl Iterator<Item = &'a f64>, h3: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!(
            "norm exponent must be in [1, ∞], got {p}"
        )));
    }
    if p.is_infinite() {
        return Ok(values.fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let s: f64 = if p == 2.0 {
        values.map(|v| v * v).sum()
    } else {
        values.map(|v| v.abs().powf(p)).sum()
    };
    Ok((h3 * s).powf(1.0 / p))
}

impl ScalarField {
    /// Discrete L^p norm over fluid cells (all cells without a mask).
    pub fn norm(&self, grid: &GridSpec, mask: Option<&Mask>, p: f64) -> Result<f64> {
        self.check(grid)?;
        let h3 = grid.cell_volume();
        match mask {
            Some(m) => lp_norm(
                self.data
                    .iter()
                    .zip(&m.cell)
                    .filter(|(_, &f)| f)
                    .map(|(v, _)| v),
                h3,
                p,
            ),
            None => lp_norm(self.data.iter(), h3, p),
        }
    }
}

impl VectorField {
    /// Discrete L^p norm summing |u_c|^p over every face of every family.
    pub fn norm(&self, grid: &GridSpec, mask: Option<&Mask>, p: f64) -> Result<f64> {
        self.check(grid)?;
        let h3 = grid.cell_volume();
        match mask {
            Some(m) => lp_norm(
                self.data
                    .iter()
                    .zip(&m.face)
                    .filter(|(_, &f)| f)
                    .map(|(v, _)| v),
                h3,
                p,
            ),
            None => lp_norm(self.data.iter(), h3, p),
        }
    }
}
