//! Physical dimensions as integer exponent vectors.
//!
//! Five base axes: length, mass, time, charge, amount. Angles are
//! dimensionless. Derived dimensions (energy, force constants, ...) are just
//! exponent combinations; arithmetic on quantities adds or subtracts the
//! vectors, so mismatches are detected mechanically without knowing what the
//! numbers mean.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dimension {
    pub length: i32,
    pub mass: i32,
    pub time: i32,
    pub charge: i32,
    pub amount: i32,
}

impl Dimension {
    pub const DIMENSIONLESS: Dimension =
        Dimension { length: 0, mass: 0, time: 0, charge: 0, amount: 0 };
    pub const LENGTH: Dimension = Dimension { length: 1, ..Self::DIMENSIONLESS };
    pub const MASS: Dimension = Dimension { mass: 1, ..Self::DIMENSIONLESS };
    pub const TIME: Dimension = Dimension { time: 1, ..Self::DIMENSIONLESS };
    pub const CHARGE: Dimension = Dimension { charge: 1, ..Self::DIMENSIONLESS };
    pub const AMOUNT: Dimension = Dimension { amount: 1, ..Self::DIMENSIONLESS };
    /// Molar energy (kcal/mol and friends): M L^2 T^-2 N^-1.
    pub const MOLAR_ENERGY: Dimension =
        Dimension { length: 2, mass: 1, time: -2, charge: 0, amount: -1 };

    pub fn is_dimensionless(&self) -> bool {
        *self == Self::DIMENSIONLESS
    }

    #[must_use]
    pub fn mul(self, o: Dimension) -> Dimension {
        Dimension {
            length: self.length + o.length,
            mass: self.mass + o.mass,
            time: self.time + o.time,
            charge: self.charge + o.charge,
            amount: self.amount + o.amount,
        }
    }

    #[must_use]
    pub fn div(self, o: Dimension) -> Dimension {
        Dimension {
            length: self.length - o.length,
            mass: self.mass - o.mass,
            time: self.time - o.time,
            charge: self.charge - o.charge,
            amount: self.amount - o.amount,
        }
    }

    #[must_use]
    pub fn pow(self, n: i32) -> Dimension {
        Dimension {
            length: self.length * n,
            mass: self.mass * n,
            time: self.time * n,
            charge: self.charge * n,
            amount: self.amount * n,
        }
    }

    /// Exponents divided by `n`, or `None` when any is not divisible
    /// (e.g. the square root of a plain length).
    pub fn root(self, n: i32) -> Option<Dimension> {
        let d = |x: i32| if x % n == 0 { Some(x / n) } else { None };
        Some(Dimension {
            length: d(self.length)?,
            mass: d(self.mass)?,
            time: d(self.time)?,
            charge: d(self.charge)?,
            amount: d(self.amount)?,
        })
    }

    /// Parses the dictionary syntax: space-separated `base` or `baseN`
    /// factors with signed integer exponents, or the word `dimensionless`.
    /// Example: `mass length2 time-2 amount-1`.
    pub fn parse(s: &str) -> Result<Dimension, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty dimension".into());
        }
        if s == "dimensionless" {
            return Ok(Self::DIMENSIONLESS);
        }
        let mut dim = Self::DIMENSIONLESS;
        for tok in s.split_whitespace() {
            let split = tok
                .char_indices()
                .find(|(_, c)| c.is_ascii_digit() || *c == '-' || *c == '+')
                .map(|(i, _)| i)
                .unwrap_or(tok.len());
            let (base, exp) = tok.split_at(split);
            let exp: i32 = if exp.is_empty() {
                1
            } else {
                exp.parse().map_err(|_| format!("bad exponent in `{tok}`"))?
            };
            let axis = match base {
                "length" => &mut dim.length,
                "mass" => &mut dim.mass,
                "time" => &mut dim.time,
                "charge" => &mut dim.charge,
                "amount" => &mut dim.amount,
                _ => return Err(format!("unknown dimension base `{base}`")),
            };
            *axis += exp;
        }
        Ok(dim)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("dimensionless");
        }
        let mut first = true;
        for (name, exp) in [
            ("length", self.length),
            ("mass", self.mass),
            ("time", self.time),
            ("charge", self.charge),
            ("amount", self.amount),
        ] {
            if exp == 0 {
                continue;
            }
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            if exp == 1 {
                f.write_str(name)?;
            } else {
                write!(f, "{name}{exp}")?;
            }
        }
        Ok(())
    }
}
