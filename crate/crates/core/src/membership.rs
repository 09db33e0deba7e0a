//! Gaussian and trapezoidal membership functions.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TskError};

/// Shape family shared by every membership function of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MfType {
    Gaussian,
    Trapezoid,
}

impl MfType {
    /// Number of trainable shape parameters per membership function.
    pub fn num_params(self) -> usize {
        match self {
            MfType::Gaussian => 2,
            MfType::Trapezoid => 4,
        }
    }
}

impl std::fmt::Display for MfType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MfType::Gaussian => f.write_str("gaussian"),
            MfType::Trapezoid => f.write_str("trapezoid"),
        }
    }
}

impl std::str::FromStr for MfType {
    type Err = TskError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(MfType::Gaussian),
            "trapezoid" => Ok(MfType::Trapezoid),
            other => Err(TskError::InvalidConfig(format!(
                "unknown membership function type `{other}`"
            ))),
        }
    }
}

/// `exp(-(x - center)^2 / (2 spread^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMf {
    center: f64,
    spread: f64,
}

impl GaussianMf {
    pub fn new(center: f64, spread: f64) -> Result<Self> {
        if !center.is_finite() || !spread.is_finite() || spread <= 0.0 {
            return Err(TskError::InvalidParameter(format!(
                "gaussian needs finite center and spread > 0, got center={center}, spread={spread}"
            )));
        }
        Ok(Self { center, spread })
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn grade(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.spread;
        (-0.5 * z * z).exp()
    }
}

/// Trapezoid with feet `a`, `d` and shoulders `b`, `c`; `a < b <= c < d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidMf {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TrapezoidMf {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let finite = a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite();
        if !finite || !(a < b && b <= c && c < d) {
            return Err(TskError::InvalidParameter(format!(
                "trapezoid needs a < b <= c < d, got ({a}, {b}, {c}, {d})"
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn points(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn grade(&self, x: f64) -> f64 {
        if x > self.a && x < self.b {
            (x - self.a) / (self.b - self.a)
        } else if x >= self.b && x <= self.c {
            1.0
        } else if x > self.c && x < self.d {
            (self.d - x) / (self.d - self.c)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Gaussian(GaussianMf),
    Trapezoid(TrapezoidMf),
}

impl MembershipFunction {
    pub fn gaussian(center: f64, spread: f64) -> Result<Self> {
        GaussianMf::new(center, spread).map(Self::Gaussian)
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        TrapezoidMf::new(a, b, c, d).map(Self::Trapezoid)
    }

    pub fn mf_type(&self) -> MfType {
        match self {
            Self::Gaussian(_) => MfType::Gaussian,
            Self::Trapezoid(_) => MfType::Trapezoid,
        }
    }

    /// Membership grade of `x`, always in `[0, 1]`.
    pub fn grade(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian(g) => g.grade(x),
            Self::Trapezoid(t) => t.grade(x),
        }
    }

    /// Shape parameters in canonical order: `(center, spread)` or `(a, b, c, d)`.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Self::Gaussian(g) => vec![g.center, g.spread],
            Self::Trapezoid(t) => t.points().to_vec(),
        }
    }

    pub(crate) fn write_params(&self, out: &mut [f64]) {
        match self {
            Self::Gaussian(g) => {
                out[0] = g.center;
                out[1] = g.spread;
            }
            Self::Trapezoid(t) => out[..4].copy_from_slice(&t.points()),
        }
    }

    /// Rebuilds a function of the same family from raw parameters, validating them.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        match self {
            Self::Gaussian(_) => Self::gaussian(p[0], p[1]),
            Self::Trapezoid(_) => Self::trapezoid(p[0], p[1], p[2], p[3]),
        }
    }

    /// Writes raw parameters without validation. Used by the optimizer, which
    /// restores the invariants itself right after the update.
    pub(crate) fn set_params_unchecked(&mut self, p: &[f64]) {
        match self {
            Self::Gaussian(g) => {
                g.center = p[0];
                g.spread = p[1];
            }
            Self::Trapezoid(t) => {
                t.a = p[0];
                t.b = p[1];
                t.c = p[2];
                t.d = p[3];
            }
        }
    }
}
