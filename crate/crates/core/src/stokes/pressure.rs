use crate::grid::{GridSpec, Mask};
use crate::linalg::{Axis1d, BoxSpectral, End};

/// Schur-complement preconditioner `W⁻¹ (I + c (−Δ_N)⁻¹) W⁻¹` on fluid cells,
/// with the Neumann Laplacian of the obstacle-free box and `W` the cell density.
#[derive(Debug, Clone)]
pub struct PressurePrecond {
    coef: f64,
    neumann: Option<BoxSpectral>,
    fluid: Vec<bool>,
    inv_weight: Option<Vec<f64>>,
}

impl PressurePrecond {
    pub fn new(grid: &GridSpec, mask: &Mask, coef: f64, weights: Option<&[f64]>) -> Self {
        let neumann = (coef > 0.0).then(|| {
            let axes = [0, 1, 2].map(|a| Axis1d::new(grid.n[a], 0, [End::Mirror, End::Mirror]));
            BoxSpectral::new(grid.n, axes, grid.h, 0.0)
        });
        let mut p = Self {
            coef,
            neumann,
            fluid: mask.cell.clone(),
            inv_weight: None,
        };
        p.set_weights(weights);
        p
    }

    pub fn set_weights(&mut self, weights: Option<&[f64]>) {
        self.inv_weight = weights.map(|w| {
            w.iter()
                .map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 })
                .collect()
        });
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut t: Vec<f64> = r
            .iter()
            .zip(&self.fluid)
            .map(|(v, &f)| if f { *v } else { 0.0 })
            .collect();
        if let Some(s) = &self.inv_weight {
            for (v, si) in t.iter_mut().zip(s) {
                *v *= si;
            }
        }
        match &self.neumann {
            Some(sp) => {
                sp.apply(&t, z);
                for ((zi, ti), &f) in z.iter_mut().zip(&t).zip(&self.fluid) {
                    *zi = if f { ti + self.coef * *zi } else { 0.0 };
                }
            }
            None => z.copy_from_slice(&t),
        }
        if let Some(s) = &self.inv_weight {
            for (v, si) in z.iter_mut().zip(s) {
                *v *= si;
            }
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for (v, &f) in z.iter().zip(&self.fluid) {
            if f {
                sum += v;
                n += 1;
            }
        }
        let m = if n > 0 { sum / n as f64 } else { 0.0 };
        for (v, &f) in z.iter_mut().zip(&self.fluid) {
            *v = if f { *v - m } else { 0.0 };
        }
    }
}
