//! Analytic body-force presets for the momentum equations.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Debug;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::grid::{GridSpec, VectorField};
use crate::vec3::Vec3;

/// A vector field that can be evaluated anywhere in the box it was built for.
pub trait VectorPreset: Send + Sync + Debug {
    fn kind(&self) -> &'static str;
    fn eval(&self, x: Vec3) -> Vec3;
    /// Parameters for report echoes and cache keys.
    fn params(&self) -> serde_json::Value;
    /// True when the field vanishes identically.
    fn is_zero(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Zero;

impl VectorPreset for Zero {
    fn kind(&self) -> &'static str {
        "zero"
    }
    fn eval(&self, _: Vec3) -> Vec3 {
        [0.0; 3]
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "zero" })
    }
    fn is_zero(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub Vec3);

impl VectorPreset for Constant {
    fn kind(&self) -> &'static str {
        "constant"
    }
    fn eval(&self, _: Vec3) -> Vec3 {
        self.0
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "constant", "value": self.0 })
    }
    fn is_zero(&self) -> bool {
        self.0 == [0.0; 3]
    }
}

/// Four counter-rotating vortices in the (x, y) plane, uniform in z:
/// the curl of ψ = A·sin(2πx̂)·sin(2πŷ) e_z with x̂, ŷ the normalized box
/// coordinates. Divergence-free with zero normal trace on every wall, and
/// mirror-symmetric about the mid-planes of the box.
#[derive(Debug, Clone, Copy)]
pub struct Vortex {
    pub amplitude: f64,
    pub domain: DomainSpec,
}

impl VectorPreset for Vortex {
    fn kind(&self) -> &'static str {
        "vortex"
    }
    fn eval(&self, x: Vec3) -> Vec3 {
        let e = self.domain.extent();
        let s = [0, 1].map(|d| 2.0 * PI * (x[d] - self.domain.min[d]) / e[d]);
        let a = self.amplitude;
        [
            a * 2.0 * PI / e[1] * s[0].sin() * s[1].cos(),
            -a * 2.0 * PI / e[0] * s[0].cos() * s[1].sin(),
            0.0,
        ]
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "vortex", "amplitude": self.amplitude })
    }
    fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

/// ∇φ with φ = A·cos(πx̂)cos(πŷ)cos(πẑ); the normal derivative of φ
/// vanishes on the walls.
#[derive(Debug, Clone, Copy)]
pub struct Gradient {
    pub amplitude: f64,
    pub domain: DomainSpec,
}

impl Gradient {
    pub fn potential(&self, x: Vec3) -> f64 {
        let e = self.domain.extent();
        (0..3).map(|d| (PI * (x[d] - self.domain.min[d]) / e[d]).cos()).product::<f64>() * self.amplitude
    }
}

impl VectorPreset for Gradient {
    fn kind(&self) -> &'static str {
        "gradient"
    }
    fn eval(&self, x: Vec3) -> Vec3 {
        let e = self.domain.extent();
        let t = [0, 1, 2].map(|d| PI * (x[d] - self.domain.min[d]) / e[d]);
        let (s, c) = (t.map(f64::sin), t.map(f64::cos));
        let a = self.amplitude;
        [
            -a * PI / e[0] * s[0] * c[1] * c[2],
            -a * PI / e[1] * c[0] * s[1] * c[2],
            -a * PI / e[2] * c[0] * c[1] * s[2],
        ]
    }
    fn params(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "gradient", "amplitude": self.amplitude })
    }
    fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }
}

pub type Preset = Arc<dyn VectorPreset>;

/// Momentum data: the density-weighted force f and the body force g.
#[derive(Debug, Clone)]
pub struct ForcingSpec {
    pub f: Preset,
    pub g: Preset,
}

impl ForcingSpec {
    pub fn zero() -> Self {
        Self { f: Arc::new(Zero), g: Arc::new(Zero) }
    }

    pub fn body(g: impl VectorPreset + 'static) -> Self {
        Self { f: Arc::new(Zero), g: Arc::new(g) }
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero() && self.g.is_zero()
    }

    /// ρ₀f + g at x.
    pub fn total(&self, rho0: f64, x: Vec3) -> Vec3 {
        let (f, g) = (self.f.eval(x), self.g.eval(x));
        [0, 1, 2].map(|d| rho0 * f[d] + g[d])
    }

    pub fn params(&self) -> serde_json::Value {
        serde_json::json!({ "f": self.f.params(), "g": self.g.params() })
    }
}

/// Samples a preset on the faces of a grid (normal component per face).
pub fn sample_faces(grid: &GridSpec, preset: &dyn VectorPreset) -> VectorField {
    let mut v = VectorField::zeros(grid);
    if preset.is_zero() {
        return v;
    }
    for c in 0..3 {
        let d = grid.face_dims(c);
        let off = grid.face_offsets()[c];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    v.data[off + i + d[0] * (j + d[1] * k)] = preset.eval(grid.face_center(c, i, j, k))[c];
                }
            }
        }
    }
    v
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    pub name: &'static str,
    pub keys: &'static [&'static str],
}

type Factory = fn(&toml::Table, DomainSpec) -> Result<Preset>;

/// Presets selectable by name from configuration.
pub struct ForcingRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

fn number(t: &toml::Table, key: &str) -> Result<f64> {
    match t.get(key) {
        Some(toml::Value::Float(f)) => Ok(*f),
        Some(toml::Value::Integer(i)) => Ok(*i as f64),
        _ => Err(Error::Config(format!("forcing preset needs numeric `{key}`"))),
    }
}

fn only_keys(t: &toml::Table, allowed: &[&str]) -> Result<()> {
    for k in t.keys() {
        if k != "kind" && !allowed.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown forcing key `{k}`")));
        }
    }
    Ok(())
}

impl Default for ForcingRegistry {
    fn default() -> Self {
        let mut r = Self { factories: BTreeMap::new() };
        r.register("zero", |t, _| {
            only_keys(t, &[])?;
            Ok(Arc::new(Zero))
        });
        r.register("constant", |t, _| {
            only_keys(t, &["value"])?;
            let arr = t
                .get("value")
                .and_then(|v| v.as_array())
                .filter(|a| a.len() == 3)
                .ok_or_else(|| Error::Config("constant forcing needs `value` with 3 entries".into()))?;
            let mut v = [0.0; 3];
            for (d, x) in arr.iter().enumerate() {
                v[d] = x
                    .as_float()
                    .or_else(|| x.as_integer().map(|i| i as f64))
                    .ok_or_else(|| Error::Config("non-numeric forcing value".into()))?;
            }
            Ok(Arc::new(Constant(v)))
        });
        r.register("vortex", |t, domain| {
            only_keys(t, &["amplitude"])?;
            Ok(Arc::new(Vortex { amplitude: number(t, "amplitude")?, domain }))
        });
        r.register("gradient", |t, domain| {
            only_keys(t, &["amplitude"])?;
            Ok(Arc::new(Gradient { amplitude: number(t, "amplitude")?, domain }))
        });
        r
    }
}

impl ForcingRegistry {
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, table: &toml::Table, domain: DomainSpec) -> Result<Preset> {
        let kind = table
            .get("kind")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("forcing table needs a `kind`".into()))?;
        let factory = self
            .factories
            .get(kind)
            .ok_or_else(|| Error::Config(format!("unknown forcing kind {kind:?}; known: {:?}", self.names())))?;
        factory(table, domain)
    }
}
