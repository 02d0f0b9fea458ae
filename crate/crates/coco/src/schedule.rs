//! Admissible stepsize schedules `beta_t = (t + T0)^(-b)` with
//! `b in (1/2, 1)` and `T0` large enough that `beta_t <= min(1, lambda)` and
//! `beta_t - beta_{t+1} <= beta_t^2 / 2` hold from the first step.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Truncation point for tail-bounded infinite series.
const SERIES_TRUNCATION: u64 = 1_000_000;

/// Decay exponent `b`, kept as an exact rational when the config provides
/// one so that the three-way rate regime split at `b = 2/3` is well defined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Rational { num: u32, den: u32 },
    Real(f64),
}

impl Exponent {
    pub fn value(&self) -> f64 {
        match self {
            Exponent::Rational { num, den } => *num as f64 / *den as f64,
            Exponent::Real(v) => *v,
        }
    }

    /// True only for the exact rational 2/3; a float near 2/3 falls in a
    /// neighboring regime.
    pub fn is_critical(&self) -> bool {
        matches!(self, Exponent::Rational { num, den } if 3 * u64::from(*num) == 2 * u64::from(*den))
    }

    pub fn regime(&self) -> Regime {
        if self.is_critical() {
            Regime::Critical
        } else if self.value() < 2.0 / 3.0 {
            Regime::Low
        } else {
            Regime::High
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Rational { num, den } => serializer.serialize_str(&format!("{num}/{den}")),
            Exponent::Real(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Exponent::Real(v)),
            Raw::Text(s) => {
                let (num, den) = s
                    .split_once('/')
                    .ok_or_else(|| D::Error::custom(format!("expected \"num/den\", got {s:?}")))?;
                let num: u32 = num.trim().parse().map_err(D::Error::custom)?;
                let den: u32 = den.trim().parse().map_err(D::Error::custom)?;
                if den == 0 {
                    return Err(D::Error::custom("exponent denominator must be nonzero"));
                }
                Ok(Exponent::Rational { num, den })
            }
        }
    }
}

/// Rate regime determined by the decay exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `b in (1/2, 2/3)`
    Low,
    /// `b = 2/3`
    Critical,
    /// `b in (2/3, 1)`
    High,
}

/// Partial sums of the stepsize sequence and its squares, both inclusive of
/// the index passed to [`StepsizeSchedule::partial_sums`].
#[derive(Clone, Copy, Debug)]
pub struct PartialSums {
    pub sum_beta: f64,
    pub sum_beta_sq: f64,
}

/// A validated stepsize schedule paired with a game's co-coercivity
/// parameter.
#[derive(Clone, Copy, Debug)]
pub struct StepsizeSchedule {
    b: Exponent,
    t0: f64,
}

/// Smallest admissible `T0` for the pair `(lambda, b)`:
/// `max{1, lambda^(-1/b), (2b)^(1/(1-b))}`.
pub fn min_t0(lambda: f64, b: f64) -> Result<f64> {
    if !(b > 0.5 && b < 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "exponent b must lie in the open interval (0.5, 1), got {b}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidSchedule(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(1.0_f64
        .max(lambda.powf(-1.0 / b))
        .max((2.0 * b).powf(1.0 / (1.0 - b))))
}

impl StepsizeSchedule {
    /// Validates `b` and `T0` against `lambda` and builds the schedule.
    pub fn new(b: Exponent, t0: f64, lambda: f64) -> Result<Self> {
        let bound = min_t0(lambda, b.value())?;
        if !t0.is_finite() || t0 < bound {
            return Err(Error::InvalidSchedule(format!(
                "T0 below admissible minimum {bound}: got {t0}"
            )));
        }
        Ok(Self { b, t0 })
    }

    pub fn exponent(&self) -> Exponent {
        self.b
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn regime(&self) -> Regime {
        self.b.regime()
    }

    /// `beta_t = (t + T0)^(-b)`.
    pub fn stepsize(&self, t: u64) -> f64 {
        (t as f64 + self.t0).powf(-self.b.value())
    }

    /// Direct summation of `sum_{i=0}^{t} beta_i` and `sum_{i=0}^{t} beta_i^2`.
    pub fn partial_sums(&self, t: u64) -> PartialSums {
        let mut sum = KahanSum::new();
        let mut sum_sq = KahanSum::new();
        for i in 0..=t {
            let beta = self.stepsize(i);
            sum.add(beta);
            sum_sq.add(beta * beta);
        }
        PartialSums {
            sum_beta: sum.value(),
            sum_beta_sq: sum_sq.value(),
        }
    }

    /// Upper bound on `D1 = sum_{i=0}^inf beta_i^2`: direct summation up to
    /// the truncation point plus the integral tail bound
    /// `(K + T0)^(1 - 2b) / (2b - 1)`.
    pub fn d1_upper_bound(&self) -> f64 {
        let b = self.b.value();
        let k = SERIES_TRUNCATION;
        let head = self.partial_sums(k).sum_beta_sq;
        let tail = (k as f64 + self.t0).powf(1.0 - 2.0 * b) / (2.0 * b - 1.0);
        head + tail
    }

    /// Upper bound on `sum_{j=0}^inf (j+1)^(1-3b)` for `b > 2/3`, again by
    /// truncated summation plus an integral tail bound.
    pub fn high_regime_series_upper_bound(&self) -> Result<f64> {
        let b = self.b.value();
        if !(b > 2.0 / 3.0) {
            return Err(Error::Analysis(format!(
                "series sum_(j+1)^(1-3b) diverges for b = {b} <= 2/3"
            )));
        }
        let e = 1.0 - 3.0 * b;
        let k = SERIES_TRUNCATION;
        let mut head = KahanSum::new();
        for j in 0..=k {
            head.add((j as f64 + 1.0).powf(e));
        }
        let tail = (k as f64 + 1.0).powf(e + 1.0) / (3.0 * b - 2.0);
        Ok(head.value() + tail)
    }
}
