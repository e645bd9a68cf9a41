//! Interior weights: closed forms, lower-bound recurrences, the weight table,
//! optimal retentional points, explicit optimizers, and a sampling oracle.
//!
//! Exact values are carried as [`Rational64`] and only converted to floating
//! point at API boundaries.

mod optimizer;
mod retentional;
mod sampling;

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::CellKind;
use crate::poly::SpaceKind;

pub use optimizer::{interval_optimizer, invariant_cubic_optimizer, invariant_subspace};
pub use retentional::{retentional_points, RetentionalPoints};
pub use sampling::{sample_lower_bound, sample_report, SamplingReport};

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Optimal interior weight of the interval: `(n+1)(n+2)/2` with `n = floor(k/2)`.
pub fn interval_weight(k: usize) -> Rational64 {
    let n = (k / 2) as i64;
    r((n + 1) * (n + 2), 2)
}

/// Optimal interior weight of the `D`-ball.
pub fn sphere_weight(dim: usize, k: usize) -> Rational64 {
    let n = (k / 2) as i64;
    let d = dim as i64;
    r((n / 2 + 1) * (2 * ((n + 1) / 2) + d), d)
}

/// Admissible interior weight for any star-regular cell.
pub fn star_weight(dim: usize, k: usize) -> Rational64 {
    let (k, d) = (k as i64, dim as i64);
    r((k / 2 + 1) * ((k + 1) / 2 + d), d)
}

/// Optimal weight `(D+2)/D` for quadratic spaces on star-regular cells.
pub fn quadratic_star_weight(dim: usize) -> Rational64 {
    let d = dim as i64;
    r(d + 2, d)
}

/// Optimal weight for cubic spaces on the triangle and tetrahedron.
pub fn cubic_simplex_weight(dim: usize) -> Result<Rational64> {
    match dim {
        2 => Ok(r(20, 9)),
        3 => Ok(r(11, 6)),
        _ => Err(Error::Unsupported(format!("cubic simplex weight for D = {dim}"))),
    }
}

/// Lower bound for boxes: `M_D = (1 + (D-1) M_{D-1}) / D`, `M_1` the interval weight.
pub fn box_lower_bound(dim: usize, k: usize) -> Rational64 {
    let mut m = interval_weight(k);
    for d in 2..=dim as i64 {
        m = (Rational64::from_integer(1) + Rational64::from_integer(d - 1) * m) / d;
    }
    m
}

/// Lower bound for simplices:
/// `M_D = ((D+k)/D) (1 + D ((D-1)/(D+k-1)) M_{D-1}) / (1+D)`.
pub fn simplex_lower_bound(dim: usize, k: usize) -> Rational64 {
    let kk = k as i64;
    let mut m = interval_weight(k);
    for d in 2..=dim as i64 {
        let inner = Rational64::from_integer(1) + Rational64::from_integer(d) * r(d - 1, d + kk - 1) * m;
        m = r(d + kk, d) * inner / (1 + d);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedFormExact,
    Recurrence,
    StarFormula,
    SphereFormula,
    Sampled,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::ClosedFormExact => "closed_form_exact",
            Provenance::Recurrence => "recurrence",
            Provenance::StarFormula => "star_formula",
            Provenance::SphereFormula => "sphere_formula",
            Provenance::Sampled => "sampled",
        })
    }
}

/// Row of the weight table: a canonical cell, or the family of all
/// star-regular cells of a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightTarget {
    Cell(CellKind),
    StarRegular(usize),
}

impl WeightTarget {
    pub fn name(self) -> String {
        match self {
            WeightTarget::Cell(c) => c.name(),
            WeightTarget::StarRegular(d) => format!("star{d}"),
        }
    }
}

impl FromStr for WeightTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "star1" => Ok(WeightTarget::StarRegular(1)),
            "star2" => Ok(WeightTarget::StarRegular(2)),
            "star3" => Ok(WeightTarget::StarRegular(3)),
            other => other.parse().map(WeightTarget::Cell),
        }
    }
}

/// Certified interval containing the optimal interior weight.
///
/// For star-regular rows the upper end is an admissible weight valid for every
/// such cell and the lower end is the trivial bound 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightBracket {
    #[serde(serialize_with = "ser_target")]
    pub target: WeightTarget,
    pub degree: usize,
    pub space: SpaceKind,
    #[serde(serialize_with = "ser_ratio")]
    pub lower: Rational64,
    #[serde(serialize_with = "ser_ratio")]
    pub upper: Rational64,
    pub provenance: Provenance,
}

fn ser_target<S: serde::Serializer>(t: &WeightTarget, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&t.name())
}

fn ser_ratio<S: serde::Serializer>(v: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl WeightBracket {
    fn exact(target: WeightTarget, degree: usize, space: SpaceKind, v: Rational64, provenance: Provenance) -> Self {
        Self { target, degree, space, lower: v, upper: v, provenance }
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn lower_f64(&self) -> f64 {
        to_f64(self.lower)
    }

    pub fn upper_f64(&self) -> f64 {
        to_f64(self.upper)
    }
}

pub fn to_f64(v: Rational64) -> f64 {
    *v.numer() as f64 / *v.denom() as f64
}

/// The weight table entry for a cell (or star-regular family) and degree.
pub fn tabulated_weight(target: WeightTarget, k: usize, space: SpaceKind) -> Result<WeightBracket> {
    use Provenance::*;
    let one = Rational64::from_integer(1);
    let cell = match target {
        WeightTarget::StarRegular(d) => {
            if !(1..=3).contains(&d) {
                return Err(Error::Unsupported(format!("star-regular cells of dimension {d}")));
            }
            return Ok(WeightBracket {
                target,
                degree: k,
                space,
                lower: one,
                upper: star_weight(d, k),
                provenance: StarFormula,
            });
        }
        WeightTarget::Cell(c) => c,
    };
    crate::geometry::CanonicalCell::new(cell)?;
    let bracket = match (cell, space) {
        (CellKind::Interval, _) => WeightBracket::exact(target, k, space, interval_weight(k), ClosedFormExact),
        (CellKind::Sphere(d), SpaceKind::TotalDegree) => {
            WeightBracket::exact(target, k, space, sphere_weight(d, k), SphereFormula)
        }
        (CellKind::Box(_), SpaceKind::TensorProduct) => {
            WeightBracket::exact(target, k, space, interval_weight(k), ClosedFormExact)
        }
        (CellKind::Box(d), SpaceKind::TotalDegree) => match k {
            0 | 1 => WeightBracket::exact(target, k, space, one, ClosedFormExact),
            2 | 3 => WeightBracket::exact(target, k, space, quadratic_star_weight(d), ClosedFormExact),
            _ => WeightBracket {
                target,
                degree: k,
                space,
                lower: box_lower_bound(d, k),
                upper: sphere_weight(d, k),
                provenance: Recurrence,
            },
        },
        (CellKind::Simplex(d), SpaceKind::TotalDegree) => match k {
            0 | 1 => WeightBracket::exact(target, k, space, one, ClosedFormExact),
            2 => WeightBracket::exact(target, k, space, quadratic_star_weight(d), ClosedFormExact),
            3 => WeightBracket::exact(target, k, space, cubic_simplex_weight(d)?, ClosedFormExact),
            _ => WeightBracket {
                target,
                degree: k,
                space,
                lower: simplex_lower_bound(d, k),
                upper: if d == 2 { interval_weight(k) } else { star_weight(d, k) },
                provenance: Recurrence,
            },
        },
        (c, s) => {
            return Err(Error::Unsupported(format!("weight for {} with {s:?} space", c.name())));
        }
    };
    Ok(bracket)
}

/// Table rows `k = 0..=degree_max`.
pub fn weight_table(target: WeightTarget, degree_max: usize, space: SpaceKind) -> Result<Vec<WeightBracket>> {
    (0..=degree_max).map(|k| tabulated_weight(target, k, space)).collect()
}

/// Renders a rational exactly: integers plainly, otherwise `p/q`.
pub fn format_ratio(v: Rational64) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn interval_weights() {
        assert_eq!(interval_weight(0), q(1, 1));
        assert_eq!(interval_weight(3), q(3, 1));
        assert_eq!(interval_weight(8), q(15, 1));
        let row: Vec<_> = (0..12).step_by(2).map(interval_weight).collect();
        assert_eq!(row, [1, 3, 6, 10, 15, 21].map(|v| q(v, 1)));
    }

    #[test]
    fn sphere_weights() {
        assert_eq!(sphere_weight(2, 4), q(4, 1));
        assert_eq!(sphere_weight(3, 2), q(5, 3));
        for k in 0..14 {
            assert_eq!(sphere_weight(1, k), interval_weight(k));
        }
        let row2: Vec<_> = (0..12).step_by(2).map(|k| sphere_weight(2, k)).collect();
        assert_eq!(row2, [1, 2, 4, 6, 9, 12].map(|v| q(v, 1)));
        let row3: Vec<_> = (0..12).step_by(2).map(|k| sphere_weight(3, k)).collect();
        assert_eq!(row3, vec![q(1, 1), q(5, 3), q(10, 3), q(14, 3), q(7, 1), q(9, 1)]);
    }

    #[test]
    fn star_weights() {
        assert_eq!(star_weight(2, 2), q(3, 1));
        assert_eq!(star_weight(2, 5), q(15, 2));
        assert_eq!(star_weight(3, 3), q(10, 3));
        // the formula, not the conflicting table entries 5 and 1.25
        assert_eq!(star_weight(2, 3), q(4, 1));
        assert_eq!(star_weight(3, 1), q(4, 3));
    }

    #[test]
    fn quadratic_and_cubic() {
        assert_eq!(quadratic_star_weight(1), q(3, 1));
        assert_eq!(quadratic_star_weight(2), q(2, 1));
        assert_eq!(quadratic_star_weight(3), q(5, 3));
        assert_eq!(cubic_simplex_weight(2).unwrap(), q(20, 9));
        assert_eq!(cubic_simplex_weight(3).unwrap(), q(11, 6));
        assert!(cubic_simplex_weight(4).is_err());
        assert!(cubic_simplex_weight(2).unwrap() < star_weight(2, 3));
    }

    #[test]
    fn recurrences() {
        assert_eq!(box_lower_bound(2, 4), q(7, 2));
        assert_eq!(box_lower_bound(3, 4), q(8, 3));
        for k in 0..10 {
            assert_eq!(box_lower_bound(1, k), interval_weight(k));
            assert_eq!(simplex_lower_bound(1, k), interval_weight(k));
        }
        assert_eq!(simplex_lower_bound(2, 4), q(17, 5));
        assert_eq!(simplex_lower_bound(3, 4), q(77, 30));
        assert_eq!(simplex_lower_bound(2, 6), q(36, 7));
    }

    #[test]
    fn recurrences_nonincreasing_in_dimension() {
        for k in 0..16 {
            for d in 1..6 {
                assert!(box_lower_bound(d + 1, k) <= box_lower_bound(d, k));
                assert!(simplex_lower_bound(d + 1, k) <= simplex_lower_bound(d, k));
            }
        }
    }

    #[test]
    fn tabulated_examples() {
        let t = |c: CellKind, k, s| tabulated_weight(WeightTarget::Cell(c), k, s).unwrap();
        let tri = t(CellKind::Simplex(2), 3, SpaceKind::TotalDegree);
        assert_eq!((tri.lower, tri.upper), (q(20, 9), q(20, 9)));
        assert_eq!(tri.provenance, Provenance::ClosedFormExact);
        let b = t(CellKind::Box(2), 8, SpaceKind::TotalDegree);
        assert_eq!((b.lower, b.upper), (q(8, 1), q(9, 1)));
        let tp = t(CellKind::Box(3), 5, SpaceKind::TensorProduct);
        assert_eq!((tp.lower, tp.upper), (q(6, 1), q(6, 1)));
        assert!(tabulated_weight(WeightTarget::Cell(CellKind::Simplex(2)), 2, SpaceKind::TensorProduct).is_err());
        assert!(tabulated_weight(WeightTarget::Cell(CellKind::Box(4)), 2, SpaceKind::TotalDegree).is_err());
    }

    #[test]
    fn brackets_are_ordered() {
        let targets = [
            WeightTarget::Cell(CellKind::Interval),
            WeightTarget::Cell(CellKind::Box(2)),
            WeightTarget::Cell(CellKind::Box(3)),
            WeightTarget::Cell(CellKind::Simplex(2)),
            WeightTarget::Cell(CellKind::Simplex(3)),
            WeightTarget::Cell(CellKind::Sphere(2)),
            WeightTarget::Cell(CellKind::Sphere(3)),
            WeightTarget::StarRegular(2),
            WeightTarget::StarRegular(3),
        ];
        for t in targets {
            for b in weight_table(t, 12, SpaceKind::TotalDegree).unwrap() {
                assert!(b.lower <= b.upper, "{b:?}");
                if b.provenance == Provenance::ClosedFormExact {
                    assert!(b.is_exact());
                }
            }
        }
    }

    #[test]
    fn parse_targets() {
        assert_eq!("triangle".parse::<WeightTarget>().unwrap(), WeightTarget::Cell(CellKind::Simplex(2)));
        assert_eq!("star3".parse::<WeightTarget>().unwrap(), WeightTarget::StarRegular(3));
        assert!("hexagon".parse::<WeightTarget>().is_err());
        assert_eq!(format_ratio(q(20, 9)), "20/9");
        assert_eq!(format_ratio(q(21, 1)), "21");
    }
}
