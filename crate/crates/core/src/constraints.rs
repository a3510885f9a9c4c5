//! Eigenvalue bounds, constraint regimes and the relaxation schedule used for
//! dynamic initialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, sample_covariance, Matrix};

/// Default schedule length.
pub const DEFAULT_SCHEDULE_LEN: usize = 25;
/// Default schedule scale, appropriate for standardized data.
pub const DEFAULT_BETA: f64 = 1.0;

/// Closed interval `[lower, upper]` of admissible eigenvalues; `upper` may be
/// `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    #[serde(with = "infinite_f64")]
    pub upper: f64,
}

impl Bounds {
    pub const VACUOUS: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower >= 0.0) || !(lower <= upper) || lower.is_infinite() {
            return Err(Error::InvalidBounds { a: lower, b: upper });
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Whether `self ⊇ other`.
    pub fn contains_interval(&self, other: &Bounds) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        self.upper.min(x.max(self.lower))
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

/// Clamps each entry of `v` into `[a, b]`, preserving order.
pub fn clamp_eigs(v: &[f64], a: f64, b: f64) -> Result<Vec<f64>> {
    let bounds = Bounds::new(a, b)?;
    Ok(v.iter().map(|&x| bounds.clamp(x)).collect())
}

/// Which side(s) of the schedule interval are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    None,
    Lower,
    Upper,
    Range,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::None, Regime::Lower, Regime::Upper, Regime::Range];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::None => "none",
            Regime::Lower => "lower",
            Regime::Upper => "upper",
            Regime::Range => "range",
        }
    }

    /// Column label used in convergence tables.
    pub fn label(self) -> &'static str {
        match self {
            Regime::None => "None",
            Regime::Lower => "Lower",
            Regime::Upper => "Upper",
            Regime::Range => "Range",
        }
    }

    fn filter(self, pair: Bounds) -> Bounds {
        match self {
            Regime::None => Bounds::VACUOUS,
            Regime::Lower => Bounds { lower: pair.lower, upper: f64::INFINITY },
            Regime::Upper => Bounds { lower: 0.0, upper: pair.upper },
            Regime::Range => pair,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Regime>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let r: Regime = part.parse()?;
            if !out.contains(&r) {
                out.push(r);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty regime list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Regime::None),
            "lower" => Ok(Regime::Lower),
            "upper" => Ok(Regime::Upper),
            "range" => Ok(Regime::Range),
            other => Err(Error::Config(format!("unknown regime {other:?}"))),
        }
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Regime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `β (1 − v, 1 − ln(1 − v))` for `v ∈ [0, 1]`; `v = 1` gives `(0, ∞)`.
pub fn schedule_bounds(v: f64, beta: f64) -> Result<Bounds> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::SchedulePosition(v));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Config(format!("schedule beta must be positive, got {beta}")));
    }
    let lower = beta * (1.0 - v);
    let upper = if v == 1.0 { f64::INFINITY } else { beta * (1.0 - (1.0 - v).ln()) };
    Ok(Bounds { lower, upper })
}

/// Equidistant relaxation schedule of `len` steps from v = 0 to v = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub len: usize,
    pub beta: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { len: DEFAULT_SCHEDULE_LEN, beta: DEFAULT_BETA }
    }
}

impl Schedule {
    pub fn new(len: usize, beta: f64) -> Result<Self> {
        if len < 2 {
            return Err(Error::Config(format!("schedule length must be at least 2, got {len}")));
        }
        schedule_bounds(0.0, beta)?;
        Ok(Self { len, beta })
    }

    /// Position v_t of step `t` (1-based); clamps to 1 after the last step.
    pub fn position(&self, t: usize) -> f64 {
        if t >= self.len {
            1.0
        } else {
            (t.max(1) - 1) as f64 / (self.len - 1) as f64
        }
    }

    pub fn pair(&self, t: usize) -> Bounds {
        schedule_bounds(self.position(t), self.beta).expect("validated schedule")
    }
}

/// Full eigenvalue-constraint configuration for one EM run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub regime: Regime,
    /// Interval used when there is no schedule.
    pub static_bounds: Bounds,
    pub schedule: Option<Schedule>,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self::unconstrained()
    }
}

impl ConstraintSpec {
    pub fn unconstrained() -> Self {
        Self { regime: Regime::None, static_bounds: Bounds::VACUOUS, schedule: None }
    }

    /// Fixed interval for every iteration.
    pub fn fixed(bounds: Bounds) -> Self {
        Self { regime: Regime::Range, static_bounds: bounds, schedule: None }
    }

    pub fn dynamic(regime: Regime, schedule: Schedule) -> Self {
        Self { regime, static_bounds: Bounds::VACUOUS, schedule: Some(schedule) }
    }

    /// Effective interval at EM step `t` (1-based).
    pub fn bounds_at(&self, t: usize) -> Bounds {
        let pair = match &self.schedule {
            Some(s) => s.pair(t),
            None => self.static_bounds,
        };
        self.regime.filter(pair)
    }

    /// Number of leading steps during which the interval may change.
    pub fn schedule_steps(&self) -> usize {
        match (&self.schedule, self.regime) {
            (_, Regime::None) | (None, _) => 0,
            (Some(s), _) => s.len,
        }
    }
}

/// Smallest and largest eigenvalue of the sample covariance of `data`.
pub fn static_bounds_from_data(data: &Matrix) -> Result<Bounds> {
    let (n, p) = (data.rows(), data.cols());
    if n <= p {
        return Err(Error::TooFewObservations { n, needed: p + 1 });
    }
    let eig = eig_sym(&sample_covariance(data)?)?;
    let hi = eig.values[0];
    let lo = *eig.values.last().expect("p >= 1");
    if !(lo > hi * 1e-12) {
        return Err(Error::SingularCovariance(lo));
    }
    Bounds::new(lo, hi)
}

mod infinite_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str(if *x > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad float {s:?}"))),
        }
    }
}
