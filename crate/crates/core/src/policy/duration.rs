use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DurationUnit {
    Seconds,
    Minutes,
    Hours,
    Days,
    Weeks,
}

impl DurationUnit {
    pub const ALL: [DurationUnit; 5] = [
        DurationUnit::Seconds,
        DurationUnit::Minutes,
        DurationUnit::Hours,
        DurationUnit::Days,
        DurationUnit::Weeks,
    ];

    pub fn factor(self) -> u64 {
        match self {
            DurationUnit::Seconds => 1,
            DurationUnit::Minutes => 60,
            DurationUnit::Hours => 3_600,
            DurationUnit::Days => 86_400,
            DurationUnit::Weeks => 604_800,
        }
    }

    pub fn suffix(self) -> char {
        match self {
            DurationUnit::Seconds => 's',
            DurationUnit::Minutes => 'm',
            DurationUnit::Hours => 'h',
            DurationUnit::Days => 'd',
            DurationUnit::Weeks => 'w',
        }
    }

    fn from_suffix(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|u| u.suffix() == c.to_ascii_lowercase())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed duration {text:?}: {reason}")]
pub struct MalformedDuration {
    pub text: String,
    pub reason: &'static str,
}

/// `<magnitude><unit>`, e.g. `1w` or `90m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DurationLiteral {
    magnitude: u64,
    unit: DurationUnit,
}

impl DurationLiteral {
    pub fn new(magnitude: u64, unit: DurationUnit) -> Option<Self> {
        if magnitude == 0 {
            return None;
        }
        magnitude.checked_mul(unit.factor())?;
        Some(DurationLiteral { magnitude, unit })
    }

    pub fn magnitude(self) -> u64 {
        self.magnitude
    }

    pub fn unit(self) -> DurationUnit {
        self.unit
    }

    pub fn seconds(self) -> u64 {
        // Overflow is excluded at construction.
        self.magnitude * self.unit.factor()
    }

    /// Largest unit that represents `seconds` exactly.
    pub fn from_seconds(seconds: u64) -> Option<Self> {
        let unit = DurationUnit::ALL
            .into_iter()
            .rev()
            .find(|u| seconds % u.factor() == 0)?;
        Self::new(seconds / unit.factor(), unit)
    }
}

impl fmt::Display for DurationLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.magnitude, self.unit.suffix())
    }
}

pub fn parse_duration(text: &str) -> Result<DurationLiteral, MalformedDuration> {
    let err = |reason| MalformedDuration {
        text: text.to_owned(),
        reason,
    };
    let mut chars = text.chars();
    let suffix = chars.next_back().ok_or_else(|| err("empty"))?;
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err("expected decimal digits before the unit"));
    }
    let unit = DurationUnit::from_suffix(suffix).ok_or_else(|| err("unit must be one of s, m, h, d, w"))?;
    let magnitude: u64 = digits.parse().map_err(|_| err("magnitude out of range"))?;
    if magnitude == 0 {
        return Err(err("magnitude must be positive"));
    }
    DurationLiteral::new(magnitude, unit).ok_or_else(|| err("magnitude out of range"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_week() {
        let d = parse_duration("1w").unwrap();
        assert_eq!((d.magnitude(), d.unit()), (1, DurationUnit::Weeks));
        assert_eq!(d.seconds(), 604_800);
    }

    #[test]
    fn ninety_minutes() {
        let d = parse_duration("90m").unwrap();
        assert_eq!((d.magnitude(), d.unit()), (90, DurationUnit::Minutes));
        assert_eq!(d.seconds(), 5_400);
    }

    #[test]
    fn malformed_inputs() {
        for bad in ["0d", "", "w", "1", "1x", "-1d", "1.5h", " 1d", "99999999999999999999s", "30500000000000000w"] {
            assert!(parse_duration(bad).is_err(), "{bad:?} accepted");
        }
    }

    #[test]
    fn canonical_unit_choice() {
        assert_eq!(DurationLiteral::from_seconds(604_800).unwrap().to_string(), "1w");
        assert_eq!(DurationLiteral::from_seconds(5_400).unwrap().to_string(), "90m");
        assert_eq!(DurationLiteral::from_seconds(61).unwrap().to_string(), "61s");
        assert!(DurationLiteral::from_seconds(0).is_none());
    }

    proptest! {
        #[test]
        fn seconds_strictly_monotone_in_magnitude(a in 1u64..1_000_000, b in 1u64..1_000_000, u in 0usize..5) {
            prop_assume!(a < b);
            let unit = DurationUnit::ALL[u];
            let da = parse_duration(&format!("{a}{}", unit.suffix())).unwrap();
            let db = parse_duration(&format!("{b}{}", unit.suffix())).unwrap();
            prop_assert!(da.seconds() < db.seconds());
        }

        #[test]
        fn never_panics(s in "\\PC{0,12}") {
            let _ = parse_duration(&s);
        }
    }
}
