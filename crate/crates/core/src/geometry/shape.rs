//! Reference particle shapes.
//!
//! Every shape is a level set: `sdf(x) < 0` inside the solid, `> 0` outside.
//! Analytic shapes return exact (sphere) or scaled implicit (superellipsoid)
//! distances; sampled shapes interpolate a grid of signed distances.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use crate::error::{Error, Result};
use crate::vec3::{norm, Vec3};

pub type ReferenceShape = Arc<dyn Shape>;

pub trait Shape: Send + Sync + Debug {
    fn kind(&self) -> &'static str;

    /// Signed distance (or a continuous sign-correct surrogate) to the boundary.
    fn sdf(&self, x: Vec3) -> f64;

    /// Radius of the smallest origin-centred ball containing the solid.
    fn bounding_radius(&self) -> f64;

    /// Half of the thinnest extent along a coordinate axis; drives resolution checks.
    fn min_half_width(&self) -> f64;

    fn volume(&self) -> f64;

    /// True when the solid is invariant under the three coordinate reflections.
    fn is_reflection_symmetric(&self) -> bool;

    /// Parameters as a JSON object, used in reports and cache keys.
    fn describe(&self) -> serde_json::Value;

    /// Radius of the ball with the same volume as the solid.
    fn equivalent_radius(&self) -> f64 {
        (3.0 * self.volume() / (4.0 * std::f64::consts::PI)).cbrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sphere {
    pub radius: f64,
}

impl Sphere {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self { radius })
    }
}

impl Shape for Sphere {
    fn kind(&self) -> &'static str {
        "sphere"
    }
    fn sdf(&self, x: Vec3) -> f64 {
        norm(x) - self.radius
    }
    fn bounding_radius(&self) -> f64 {
        self.radius
    }
    fn min_half_width(&self) -> f64 {
        self.radius
    }
    fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
    fn is_reflection_symmetric(&self) -> bool {
        true
    }
    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "sphere", "radius": self.radius })
    }
}

/// `(|x/a|^n + |y/b|^n + |z/c|^n)^{1/n} ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superellipsoid {
    pub semi_axes: Vec3,
    pub exponent: f64,
    bounding: f64,
}

impl Superellipsoid {
    pub fn new(semi_axes: Vec3, exponent: f64) -> Result<Self> {
        if semi_axes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::Parameter(format!(
                "semi-axes must be positive, got {semi_axes:?}"
            )));
        }
        if !(exponent >= 1.0 && exponent.is_finite()) {
            return Err(Error::Parameter(format!(
                "superellipsoid exponent must be ≥ 1, got {exponent}"
            )));
        }
        let mut shape = Self {
            semi_axes,
            exponent,
            bounding: 0.0,
        };
        shape.bounding = shape.max_surface_radius();
        Ok(shape)
    }

    fn implicit(&self, x: Vec3) -> f64 {
        let n = self.exponent;
        let s: f64 = (0..3)
            .map(|d| (x[d] / self.semi_axes[d]).abs().powf(n))
            .sum();
        s.powf(1.0 / n)
    }

    /// Largest |x| on the surface; along direction θ the surface sits at 1/F(θ).
    fn max_surface_radius(&self) -> f64 {
        let steps = 256;
        let mut best: f64 = self.semi_axes.iter().cloned().fold(0.0, f64::max);
        for i in 0..=steps {
            let theta = std::f64::consts::FRAC_PI_2 * i as f64 / steps as f64;
            for j in 0..=steps {
                let phi = std::f64::consts::FRAC_PI_2 * j as f64 / steps as f64;
                let dir = [
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ];
                let f = self.implicit(dir);
                if f > 0.0 {
                    best = best.max(1.0 / f);
                }
            }
        }
        best * (1.0 + 1e-3)
    }
}

impl Shape for Superellipsoid {
    fn kind(&self) -> &'static str {
        "superellipsoid"
    }
    fn sdf(&self, x: Vec3) -> f64 {
        let r = norm(x);
        if r == 0.0 {
            return -self.min_half_width();
        }
        // Radial distance to the surface along the ray through x.
        let f = self.implicit(x);
        r - r / f
    }
    fn bounding_radius(&self) -> f64 {
        self.bounding
    }
    fn min_half_width(&self) -> f64 {
        self.semi_axes.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    fn volume(&self) -> f64 {
        let n = self.exponent;
        let g = statrs::function::gamma::gamma;
        8.0 * self.semi_axes.iter().product::<f64>() * g(1.0 + 1.0 / n).powi(3) / g(1.0 + 3.0 / n)
    }
    fn is_reflection_symmetric(&self) -> bool {
        true
    }
    fn describe(&self) -> serde_json::Value {
        json!({ "kind": "superellipsoid", "semi_axes": self.semi_axes, "exponent": self.exponent })
    }
}

/// Signed distances sampled on an origin-centred grid, trilinearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSdf {
    pub n: [usize; 3],
    pub h: f64,
    pub values: Vec<f64>,
    origin: Vec3,
    bounding: f64,
    source: String,
}

impl SampledSdf {
    pub fn new(n: [usize; 3], h: f64, values: Vec<f64>, source: impl Into<String>) -> Result<Self> {
        if n.iter().any(|&m| m < 2) || !(h > 0.0) {
            return Err(Error::Parameter(format!(
                "sdf grid needs ≥ 2 samples per axis and h > 0, got {n:?}, h={h}"
            )));
        }
        if values.len() != n[0] * n[1] * n[2] {
            return Err(Error::Parameter(format!(
                "sdf grid {n:?} expects {} values, got {}",
                n[0] * n[1] * n[2],
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter(
                "sdf grid contains non-finite values".into(),
            ));
        }
        let origin = [0, 1, 2].map(|d| -0.5 * (n[d] - 1) as f64 * h);
        let mut shape = Self {
            n,
            h,
            values,
            origin,
            bounding: 0.0,
            source: source.into(),
        };
        let mut bounding: f64 = 0.0;
        let mut any_inside = false;
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    if shape.values[i + n[0] * (j + n[1] * k)] <= 0.0 {
                        any_inside = true;
                        let p = shape.node(i, j, k);
                        bounding = bounding.max(norm(p));
                    }
                }
            }
        }
        if !any_inside {
            return Err(Error::Parameter("sdf grid has no interior samples".into()));
        }
        shape.bounding = bounding + h * 3f64.sqrt();
        Ok(shape)
    }

    /// Reads the `sdf <nx> <ny> <nz> <h>` text format.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.display().to_string())
    }

    pub fn parse(text: &str, source: impl Into<String>) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty sdf file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 5 || parts[0] != "sdf" {
            return Err(Error::Parameter(format!("bad sdf header {header:?}")));
        }
        let dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parameter(format!("bad sdf dimension {s:?}: {e}")))
        };
        let n = [dim(parts[1])?, dim(parts[2])?, dim(parts[3])?];
        let h: f64 = parts[4]
            .parse()
            .map_err(|e| Error::Parameter(format!("bad sdf spacing {:?}: {e}", parts[4])))?;
        let mut values = Vec::with_capacity(n[0] * n[1] * n[2]);
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(
                line.parse::<f64>()
                    .map_err(|e| Error::Parameter(format!("bad sdf value {line:?}: {e}")))?,
            );
        }
        Self::new(n, h, values, source)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("sdf {} {} {} {}\n", self.n[0], self.n[1], self.n[2], self.h);
        for v in &self.values {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    /// Samples another shape on a grid with `n` nodes per axis and spacing `h`.
    pub fn sample(shape: &dyn Shape, n: [usize; 3], h: f64) -> Result<Self> {
        let origin = [0, 1, 2].map(|d| -0.5 * (n[d] - 1) as f64 * h);
        let mut values = Vec::with_capacity(n[0] * n[1] * n[2]);
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    let p = [
                        origin[0] + i as f64 * h,
                        origin[1] + j as f64 * h,
                        origin[2] + k as f64 * h,
                    ];
                    values.push(shape.sdf(p));
                }
            }
        }
        Self::new(n, h, values, format!("sampled:{}", shape.kind()))
    }

    fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
            self.origin[2] + k as f64 * self.h,
        ]
    }

    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[i + self.n[0] * (j + self.n[1] * k)]
    }
}

impl Shape for SampledSdf {
    fn kind(&self) -> &'static str {
        "sampled-sdf"
    }
    fn sdf(&self, x: Vec3) -> f64 {
        // Outside the sample box the distance to the box is a lower bound; add
        // the boundary sample so the field stays continuous and positive.
        let mut clamped = x;
        let mut outside = 0.0f64;
        for d in 0..3 {
            let hi = self.origin[d] + (self.n[d] - 1) as f64 * self.h;
            if x[d] < self.origin[d] {
                outside += (self.origin[d] - x[d]).powi(2);
                clamped[d] = self.origin[d];
            } else if x[d] > hi {
                outside += (x[d] - hi).powi(2);
                clamped[d] = hi;
            }
        }
        let mut idx = [0usize; 3];
        let mut t = [0.0; 3];
        for d in 0..3 {
            let s = (clamped[d] - self.origin[d]) / self.h;
            let i = (s.floor() as usize).min(self.n[d] - 2);
            idx[d] = i;
            t[d] = (s - i as f64).clamp(0.0, 1.0);
        }
        let mut v = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3)
                .map(|d| if o[d] == 1 { t[d] } else { 1.0 - t[d] })
                .product();
            v += w * self.value(idx[0] + o[0], idx[1] + o[1], idx[2] + o[2]);
        }
        v + outside.sqrt()
    }
    fn bounding_radius(&self) -> f64 {
        self.bounding
    }
    fn min_half_width(&self) -> f64 {
        // Interior extent along each axis through the origin.
        let mut best = f64::INFINITY;
        for d in 0..3 {
            let mut lo = 0.0;
            let mut hi = 0.0;
            let step = self.h / 4.0;
            let mut s = 0.0;
            let mut p = [0.0; 3];
            while s < self.bounding {
                p[d] = s;
                if self.sdf(p) <= 0.0 {
                    hi = s;
                }
                p[d] = -s;
                if self.sdf(p) <= 0.0 {
                    lo = s;
                }
                s += step;
            }
            best = best.min(0.5 * (lo + hi));
        }
        best
    }
    fn volume(&self) -> f64 {
        self.values.iter().filter(|v| **v < 0.0).count() as f64 * self.h.powi(3)
    }
    fn is_reflection_symmetric(&self) -> bool {
        false
    }
    fn describe(&self) -> serde_json::Value {
        let digest = crate::cache::digest_f64(&self.values);
        json!({ "kind": "sampled-sdf", "n": self.n, "h": self.h, "source": self.source, "digest": digest })
    }
}

type ShapeFactory = fn(&toml::Table, Option<&Path>) -> Result<ReferenceShape>;

/// Name → constructor table for the shape catalog.
pub struct ShapeRegistry {
    factories: BTreeMap<&'static str, ShapeFactory>,
}

impl Default for ShapeRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("sphere", |t, _| {
            let r = get_f64(t, "radius")?;
            Ok(Arc::new(Sphere::new(r)?))
        });
        reg.register("superellipsoid", |t, _| {
            let axes = get_vec3(t, "semi_axes")?;
            let n = get_f64(t, "exponent")?;
            Ok(Arc::new(Superellipsoid::new(axes, n)?))
        });
        reg.register("sdf", |t, base| {
            let rel = t
                .get("path")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::Config("sdf shape needs a `path`".into()))?;
            let path = match base {
                Some(b) => b.join(rel),
                None => Path::new(rel).to_path_buf(),
            };
            Ok(Arc::new(SampledSdf::load(&path)?))
        });
        reg
    }
}

impl ShapeRegistry {
    pub fn register(&mut self, name: &'static str, factory: ShapeFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    /// Builds a shape from a table with a `kind` key plus the kind's parameters.
    pub fn build(&self, table: &toml::Table, base: Option<&Path>) -> Result<ReferenceShape> {
        let kind = table
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("shape table needs a `kind`".into()))?;
        let factory = self.factories.get(kind).ok_or_else(|| {
            Error::Config(format!(
                "unknown shape kind {kind:?}; known: {:?}",
                self.names()
            ))
        })?;
        factory(table, base)
    }
}

fn get_f64(t: &toml::Table, key: &str) -> Result<f64> {
    match t.get(key) {
        Some(toml::Value::Float(f)) => Ok(*f),
        Some(toml::Value::Integer(i)) => Ok(*i as f64),
        _ => Err(Error::Config(format!("missing or non-numeric `{key}`"))),
    }
}

fn get_vec3(t: &toml::Table, key: &str) -> Result<Vec3> {
    let arr = t
        .get(key)
        .and_then(|v| v.as_array())
        .ok_or_else(|| Error::Config(format!("missing array `{key}`")))?;
    if arr.len() != 3 {
        return Err(Error::Config(format!("`{key}` must have 3 entries")));
    }
    let mut out = [0.0; 3];
    for (o, v) in out.iter_mut().zip(arr) {
        *o = match v {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            _ => return Err(Error::Config(format!("`{key}` entries must be numbers"))),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_sign_and_volume() {
        let s = Sphere::new(0.5).unwrap();
        assert_eq!(s.sdf([0.0; 3]), -0.5);
        assert!(s.sdf([0.6, 0.0, 0.0]) > 0.0);
        assert!((s.volume() - std::f64::consts::PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn superellipsoid_with_exponent_two_is_an_ellipsoid() {
        let e = Superellipsoid::new([0.3, 0.4, 0.5], 2.0).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.3 * 0.4 * 0.5;
        assert!((e.volume() - exact).abs() < 1e-12);
        assert!((e.bounding_radius() - 0.5).abs() < 1e-3);
        assert!(e.sdf([0.29, 0.0, 0.0]) < 0.0);
        assert!(e.sdf([0.0, 0.0, 0.51]) > 0.0);
    }

    #[test]
    fn boxy_superellipsoid_bounding_radius_reaches_corners() {
        let e = Superellipsoid::new([0.4, 0.4, 0.4], 8.0).unwrap();
        let corner = 0.4 * 3f64.sqrt() * 3f64.powf(-1.0 / 8.0);
        assert!(e.bounding_radius() >= corner);
        assert!(e.bounding_radius() < corner * 1.01);
    }

    #[test]
    fn sampled_sdf_round_trips_through_text() {
        let s = Sphere::new(0.5).unwrap();
        let grid = SampledSdf::sample(&s, [11, 11, 11], 0.12).unwrap();
        let back = SampledSdf::parse(&grid.to_text(), "mem").unwrap();
        assert_eq!(back.values, grid.values);
        assert!(back.sdf([0.0; 3]) < 0.0);
        assert!(back.sdf([0.9, 0.0, 0.0]) > 0.0);
        assert!(back.sdf([5.0, 0.0, 0.0]) > 4.0);
        // Interpolation is exact at nodes.
        let p = [0.12, -0.24, 0.36];
        assert!((back.sdf(p) - s.sdf(p)).abs() < 1e-12);
    }

    #[test]
    fn malformed_sdf_header_is_rejected() {
        assert!(SampledSdf::parse("grid 2 2 2 0.1\n", "mem").is_err());
        assert!(SampledSdf::parse("sdf 2 2 2 0.1\n1\n2\n", "mem").is_err());
    }

    #[test]
    fn registry_builds_catalog_shapes() {
        let reg = ShapeRegistry::default();
        let t: toml::Table = toml::from_str("kind = 'sphere'\nradius = 0.25").unwrap();
        let s = reg.build(&t, None).unwrap();
        assert_eq!(s.kind(), "sphere");
        let t: toml::Table =
            toml::from_str("kind = 'superellipsoid'\nsemi_axes = [0.2, 0.3, 0.2]\nexponent = 4")
                .unwrap();
        assert_eq!(reg.build(&t, None).unwrap().kind(), "superellipsoid");
        let t: toml::Table = toml::from_str("kind = 'blob'").unwrap();
        assert!(matches!(reg.build(&t, None), Err(Error::Config(_))));
    }
}
