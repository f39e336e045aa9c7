use std::fmt;
use std::ops::{Add, AddAssign};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Exact = Ratio<u128>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldCounts {
    pub correct: u64,
    pub extracted: u64,
    pub total: u64,
}

impl FieldCounts {
    pub fn new(correct: u64, extracted: u64, total: u64) -> Self {
        Self {
            correct,
            extracted,
            total,
        }
    }
}

impl Add for FieldCounts {
    type Output = FieldCounts;

    fn add(self, o: FieldCounts) -> FieldCounts {
        FieldCounts::new(self.correct + o.correct, self.extracted + o.extracted, self.total + o.total)
    }
}

impl AddAssign for FieldCounts {
    fn add_assign(&mut self, o: FieldCounts) {
        *self = *self + o;
    }
}

/// The four ratios of one field, kept exact.
///
/// Recall is extracted/total and efficiency is correct/total. These are the
/// definitions that reproduce the published tables; conventional recall is
/// what this suite calls efficiency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MetricRow {
    pub efficiency: Exact,
    pub precision: Exact,
    pub recall: Exact,
    pub f1: Exact,
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
#[error("field has no annotated ground truth (total = 0)")]
pub struct UndefinedField;

fn ratio(n: u64, d: u64) -> Exact {
    if d == 0 {
        Exact::from_integer(0)
    } else {
        Exact::new(n as u128, d as u128)
    }
}

pub fn compute_metrics(c: FieldCounts) -> Result<MetricRow, UndefinedField> {
    if c.total == 0 {
        return Err(UndefinedField);
    }
    let precision = ratio(c.correct, c.extracted);
    let recall = ratio(c.extracted, c.total);
    // 2PR/(P+R) with P = c/e and R = e/t simplifies to 2ce / (ct + e²).
    let (cc, e, t) = (c.correct as u128, c.extracted as u128, c.total as u128);
    let f1 = if cc == 0 || e == 0 {
        Exact::from_integer(0)
    } else {
        Exact::new(2 * cc * e, cc * t + e * e)
    };
    Ok(MetricRow {
        efficiency: ratio(c.correct, c.total),
        precision,
        recall,
        f1,
    })
}

/// A percentage rounded half-up to two decimals, stored in hundredths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent2(pub u128);

impl Percent2 {
    /// Rounds a ratio, usually in [0, 1], to percent hundredths half-up.
    pub fn of(r: Exact) -> Self {
        Self::round(r * Exact::from_integer(10_000))
    }

    fn round(hundredths: Exact) -> Self {
        let (n, d) = (*hundredths.numer(), *hundredths.denom());
        Percent2((2 * n + d) / (2 * d))
    }

    /// Half-up mean of already rounded values, as the published averages are
    /// computed.
    pub fn mean(values: &[Percent2]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sum: u128 = values.iter().map(|v| v.0).sum();
        Some(Self::round(Exact::new(sum, values.len() as u128)))
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Exact ratio as "n/d".
pub fn exact_string(r: Exact) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pct(r: Exact) -> String {
        Percent2::of(r).to_string()
    }

    #[test]
    fn published_yield_row() {
        let m = compute_metrics(FieldCounts::new(236, 256, 326)).unwrap();
        assert_eq!(pct(m.precision), "92.19");
        assert_eq!(pct(m.recall), "78.53");
        assert_eq!(pct(m.f1), "84.81");
        assert_eq!(pct(m.efficiency), "72.39");
    }

    #[test]
    fn published_reactant_row() {
        let m = compute_metrics(FieldCounts::new(203, 228, 300)).unwrap();
        assert_eq!(
            [pct(m.precision), pct(m.recall), pct(m.f1), pct(m.efficiency)],
            ["89.04", "76.00", "82.00", "67.67"]
        );
    }

    #[test]
    fn perfect_and_zero_cases() {
        let m = compute_metrics(FieldCounts::new(7, 7, 7)).unwrap();
        assert!([m.precision, m.recall, m.f1, m.efficiency].iter().all(|r| *r == Exact::from_integer(1)));
        let z = compute_metrics(FieldCounts::new(0, 5, 10)).unwrap();
        assert_eq!([pct(z.precision), pct(z.recall), pct(z.f1), pct(z.efficiency)], ["0.00", "50.00", "0.00", "0.00"]);
        let none = compute_metrics(FieldCounts::new(0, 0, 3)).unwrap();
        assert_eq!(none.precision, Exact::from_integer(0));
        assert_eq!(compute_metrics(FieldCounts::new(0, 0, 0)), Err(UndefinedField));
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(Percent2::mean(&[Percent2(9219), Percent2(9220)]).unwrap().to_string(), "92.20");
        assert_eq!(Percent2::of(Exact::new(1, 8)).to_string(), "12.50");
        assert_eq!(Percent2::of(Exact::new(1, 80_000)).to_string(), "0.00");
        assert_eq!(Percent2::of(Exact::new(1, 20_000)).to_string(), "0.01");
    }
}
