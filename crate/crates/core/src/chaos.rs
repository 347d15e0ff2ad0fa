//! Chaotic ODE systems and operation-count accounting.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("unknown system `{0}` (expected one of: chen, lorenz, rossler)")]
    UnknownSystem(String),
    #[error("system `{system}` has no parameter `{param}`")]
    UnknownParameter { system: String, param: String },
    #[error("parameter `{0}` is not finite")]
    NonFiniteParameter(String),
}

/// Number of multiplications and additions. Subtractions count as additions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct OpCount {
    pub multiplications: u64,
    pub additions: u64,
}

impl OpCount {
    pub const fn new(multiplications: u64, additions: u64) -> Self {
        Self {
            multiplications,
            additions,
        }
    }
}

impl fmt::Display for OpCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mul / {} add", self.multiplications, self.additions)
    }
}

/// Right-hand side of an autonomous ODE `dX/dt = f(X)`.
pub trait VectorField {
    fn dimension(&self) -> usize;

    /// Writes `f(state)` into `out`. Both slices have length `dimension()`.
    fn eval(&self, state: &[f64], out: &mut [f64]);

    /// Operations in one evaluation of `f` (the dynamic terms of RK-4).
    fn dynamic_ops(&self) -> OpCount;
}

/// Adapter for ad-hoc fields given as closures. Used mostly by tests.
pub struct FnField<F> {
    dim: usize,
    ops: OpCount,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, ops: OpCount, f: F) -> Self {
        Self { dim, ops, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dimension(&self) -> usize {
        self.dim
    }

    fn eval(&self, state: &[f64], out: &mut [f64]) {
        (self.f)(state, out)
    }

    fn dynamic_ops(&self) -> OpCount {
        self.ops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Builtin {
    Chen,
    Lorenz,
    Rossler,
}

impl Builtin {
    fn name(self) -> &'static str {
        match self {
            Builtin::Chen => "chen",
            Builtin::Lorenz => "lorenz",
            Builtin::Rossler => "rossler",
        }
    }

    fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            Builtin::Chen => &[("a", 35.0), ("b", 3.0), ("c", 28.0)],
            Builtin::Lorenz => &[("sigma", 10.0), ("rho", 28.0), ("beta", 8.0 / 3.0)],
            Builtin::Rossler => &[("a", 0.2), ("b", 0.2), ("c", 5.7)],
        }
    }

    // Hand counts of the expressions in `ChaoticSystem::eval`.
    fn dynamic_ops(self) -> OpCount {
        match self {
            // a(y-x): 1m 1a; (c-a)x - xz + cy: 3m 3a; xy - bz: 2m 1a
            Builtin::Chen => OpCount::new(6, 5),
            // s(y-x): 1m 1a; x(r-z) - y: 1m 2a; xy - bz: 2m 1a
            Builtin::Lorenz => OpCount::new(4, 4),
            // -y-z: 1a; x+ay: 1m 1a; b+z(x-c): 1m 2a
            Builtin::Rossler => OpCount::new(2, 4),
        }
    }
}

/// A built-in three-dimensional chaotic system with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaoticSystem {
    kind: Builtin,
    params: BTreeMap<String, f64>,
    // Cached in declaration order for the hot path.
    p: [f64; 3],
}

impl ChaoticSystem {
    pub const BUILTINS: [&'static str; 3] = ["chen", "lorenz", "rossler"];

    /// Chen system with `a = 35, b = 3, c = 28`.
    pub fn chen() -> Self {
        Self::with_kind(Builtin::Chen)
    }

    pub fn lorenz() -> Self {
        Self::with_kind(Builtin::Lorenz)
    }

    pub fn rossler() -> Self {
        Self::with_kind(Builtin::Rossler)
    }

    fn with_kind(kind: Builtin) -> Self {
        let defaults = kind.default_params();
        let params = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let p = [defaults[0].1, defaults[1].1, defaults[2].1];
        Self { kind, params, p }
    }

    /// Looks up a built-in by name (case-insensitive) and applies parameter
    /// overrides.
    pub fn by_name<'a, I>(name: &str, overrides: I) -> Result<Self, SystemError>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let kind = match name.to_ascii_lowercase().as_str() {
            "chen" => Builtin::Chen,
            "lorenz" => Builtin::Lorenz,
            "rossler" | "rössler" => Builtin::Rossler,
            _ => return Err(SystemError::UnknownSystem(name.to_string())),
        };
        let mut sys = Self::with_kind(kind);
        for (k, v) in overrides {
            sys.set_param(k, v)?;
        }
        Ok(sys)
    }

    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), SystemError> {
        if !value.is_finite() {
            return Err(SystemError::NonFiniteParameter(name.to_string()));
        }
        let idx = self
            .kind
            .default_params()
            .iter()
            .position(|(k, _)| *k == name)
            .ok_or_else(|| SystemError::UnknownParameter {
                system: self.name().to_string(),
                param: name.to_string(),
            })?;
        self.p[idx] = value;
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }
}

impl VectorField for ChaoticSystem {
    fn dimension(&self) -> usize {
        3
    }

    fn eval(&self, s: &[f64], out: &mut [f64]) {
        let [p0, p1, p2] = self.p;
        let d = match self.kind {
            Builtin::Chen => chen_rhs([s[0], s[1], s[2]], p0, p1, p2),
            Builtin::Lorenz => [
                p0 * (s[1] - s[0]),
                s[0] * (p1 - s[2]) - s[1],
                s[0] * s[1] - p2 * s[2],
            ],
            Builtin::Rossler => [-s[1] - s[2], s[0] + p0 * s[1], p1 + s[2] * (s[0] - p2)],
        };
        out[..3].copy_from_slice(&d);
    }

    fn dynamic_ops(&self) -> OpCount {
        self.kind.dynamic_ops()
    }
}

/// Chen system right-hand side.
pub fn chen_rhs(x: [f64; 3], a: f64, b: f64, c: f64) -> [f64; 3] {
    [
        a * (x[1] - x[0]),
        (c - a) * x[0] - x[0] * x[2] + c * x[1],
        x[0] * x[1] - b * x[2],
    ]
}

/// Operations in one RK-4 step: `3N² + 3N` static multiplications and
/// `3N² + 4N` static additions plus four evaluations of the field.
pub fn count_rk4_ops<F: VectorField + ?Sized>(system: &F) -> OpCount {
    rk4_ops(system.dimension() as u64, system.dynamic_ops())
}

pub fn rk4_ops(n: u64, dynamic: OpCount) -> OpCount {
    OpCount {
        multiplications: 3 * n * n + 3 * n + 4 * dynamic.multiplications,
        additions: 3 * n * n + 4 * n + 4 * dynamic.additions,
    }
}

/// Operations in one forward pass of a fully connected network with the
/// given layer widths (input first). Every neuron costs one add per input
/// plus one for its bias.
pub fn count_ann_ops(layer_sizes: &[usize]) -> OpCount {
    assert!(
        layer_sizes.len() >= 2,
        "a network needs at least two layers"
    );
    layer_sizes.windows(2).fold(OpCount::default(), |acc, w| {
        let (prev, cur) = (w[0] as u64, w[1] as u64);
        OpCount {
            multiplications: acc.multiplications + cur * prev,
            additions: acc.additions + cur * (prev + 1),
        }
    })
}
