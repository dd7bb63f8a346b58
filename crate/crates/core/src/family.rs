//! Identifiers and static metadata for the iteration families.

use std::fmt;
use std::str::FromStr;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::weights::WeightName;

/// Every iteration family the suite implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    /// `x - m f/f'`.
    Schroder,
    /// Two-point, correction `m G(u) f/f'`.
    Zhou1,
    /// Two-point with the `λ` shifted denominators and weight `W`.
    Lee2,
    /// Two-point with the derivative ratio `t = (f'(y)/f'(x))^{1/(m-1)}`.
    Liu3,
    /// Three-point with `h = u/(a1 + a2 u)` and weights `S`, `R`.
    Behl4,
    /// Three-point with weights `P(u)` and `Q(u, v)`.
    PQ12,
    /// Three-point with weights `H`, `P`, `G`, `L` and `w = u v`.
    Hpgl15b,
    /// Three-point with the `(1 + 2uv)` factor and weights `H`, `P`, `G`.
    Mod7b,
    /// Two-point, correction `m u P(u) f/f'`.
    TwoPoint18,
    /// Root-free two-point with the rational correction in `t = f'(y)/f'(x)`.
    Li22,
    /// Root-free two-point with weight `φ(t)`.
    Zhou23,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Schroder,
        Family::Zhou1,
        Family::Lee2,
        Family::Liu3,
        Family::Behl4,
        Family::PQ12,
        Family::Hpgl15b,
        Family::Mod7b,
        Family::TwoPoint18,
        Family::Li22,
        Family::Zhou23,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Schroder => "schroder",
            Family::Zhou1 => "fam1",
            Family::Lee2 => "fam2",
            Family::Liu3 => "fam3",
            Family::Behl4 => "fam4",
            Family::PQ12 => "fam12",
            Family::Hpgl15b => "fam15b",
            Family::Mod7b => "fam7b",
            Family::TwoPoint18 => "fam18",
            Family::Li22 => "fam22",
            Family::Zhou23 => "fam23",
        }
    }

    /// Number of substeps `n` of the n-point method.
    pub fn points(self) -> u32 {
        match self {
            Family::Schroder => 1,
            Family::Behl4 | Family::PQ12 | Family::Hpgl15b | Family::Mod7b => 3,
            _ => 2,
        }
    }

    /// Oracle calls (of `f` or `f'`) per iteration.
    pub fn evals_per_iteration(self) -> u32 {
        self.points() + 1
    }

    /// The order the family attains when its weight conditions hold.
    pub fn claimed_order(self) -> u32 {
        1 << self.points()
    }

    pub fn admits_simple_zero(self) -> bool {
        self != Family::Liu3
    }

    /// Weight slots the family reads, in its step order.
    pub fn weight_names(self) -> &'static [WeightName] {
        use WeightName::*;
        match self {
            Family::Schroder | Family::Li22 => &[],
            Family::Zhou1 | Family::Liu3 => &[G],
            Family::Lee2 => &[W],
            Family::Behl4 => &[S, R],
            Family::PQ12 => &[P, Q],
            Family::Hpgl15b => &[H, P, G, L],
            Family::Mod7b => &[H, P, G],
            Family::TwoPoint18 => &[P],
            Family::Zhou23 => &[Phi],
        }
    }

    /// Three-point families carry an intermediate `z` error that must itself
    /// reach order four.
    pub fn has_z_stage(self) -> bool {
        self.points() == 3
    }
}

/// Scalar parameters of the families that take them.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodParams {
    /// Shift `λ` of the two-point `W` family's denominators.
    pub lambda: Rational,
    /// `h = u/(a1 + a2 u)` of the `S`/`R` family.
    pub a1: Rational,
    pub a2: Rational,
    /// Denominator coefficient of the rational root-free step; required.
    pub r_m: Option<Rational>,
}

impl Default for MethodParams {
    fn default() -> Self {
        MethodParams { lambda: Rational::new(), a1: Rational::from(1), a2: Rational::new(), r_m: None }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.to_ascii_lowercase();
        let fam = match key.as_str() {
            "schroder" | "schröder" => Family::Schroder,
            "fam1" | "fam1_zhou" | "zhou" => Family::Zhou1,
            "fam2" | "fam2_lee" | "lee" => Family::Lee2,
            "fam3" | "fam3_liu" | "liu" => Family::Liu3,
            "fam4" | "fam4_behl" | "behl" => Family::Behl4,
            "fam12" | "fam12_pq" | "pq" => Family::PQ12,
            "fam15b" | "fam15b_hpgl" | "hpgl" => Family::Hpgl15b,
            "fam7b" => Family::Mod7b,
            "fam18" | "fam18_twopoint" | "twopoint" => Family::TwoPoint18,
            "fam22" | "fam22_li" | "li" => Family::Li22,
            "fam23" | "fam23_zhou" => Family::Zhou23,
            _ => {
                let names: Vec<_> = Family::ALL.iter().map(|f| f.name()).collect();
                return Err(format!("unknown family `{s}` (expected one of {})", names.join(", ")));
            }
        };
        Ok(fam)
    }
}
