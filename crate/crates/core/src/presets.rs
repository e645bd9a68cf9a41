//! Named initial conditions and piecewise-polynomial tables.
//!
//! Every preset is given in primitive variables: `u` for scalar models,
//! `(h, v)` for shallow water, `(rho, v, p)` for gas dynamics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riemann::{FluxModel, State};

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

/// One piece of a piecewise-polynomial table: `values[v]` holds the monomial
/// coefficients of primitive variable `v` in powers of `x - x_lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TablePiece {
    pub x_lo: f64,
    pub x_hi: f64,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `max(clip_below, mean + amplitude sin(2 pi waves x))`.
    Sine {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        waves: f64,
        #[serde(default)]
        clip_below: Option<f64>,
    },
    /// `high` on `[x_lo, x_hi)`, `low` elsewhere.
    Square { low: f64, high: f64, x_lo: f64, x_hi: f64 },
    /// Two primitive states separated at `x0`.
    Riemann { x0: f64, left: Vec<f64>, right: Vec<f64> },
    /// Still water of depth `h_left | h_right` (zero gives a dry bed).
    DamBreak {
        #[serde(default = "half")]
        x0: f64,
        h_left: f64,
        h_right: f64,
    },
    Sod {
        #[serde(default = "half")]
        x0: f64,
    },
    /// Gas at rest density and pressure moving apart with `-speed | +speed`.
    DoubleRarefaction {
        #[serde(default = "half")]
        x0: f64,
        rho: f64,
        speed: f64,
        p: f64,
    },
    /// Shock entering a sinusoidal density field; positive throughout.
    ShuOsher {
        #[serde(default = "shu_osher_x0")]
        x0: f64,
    },
    /// Density wave advected at constant velocity and pressure (smooth, exact).
    DensityWave {
        #[serde(default = "one")]
        rho_mean: f64,
        #[serde(default = "half")]
        rho_amplitude: f64,
        #[serde(default = "one")]
        velocity: f64,
        #[serde(default = "one")]
        pressure: f64,
    },
    Table { pieces: Vec<TablePiece> },
}

fn shu_osher_x0() -> f64 {
    -4.0
}

impl InitialCondition {
    pub fn name(&self) -> &'static str {
        match self {
            InitialCondition::Sine { .. } => "sine",
            InitialCondition::Square { .. } => "square",
            InitialCondition::Riemann { .. } => "riemann",
            InitialCondition::DamBreak { .. } => "dam_break",
            InitialCondition::Sod { .. } => "sod",
            InitialCondition::DoubleRarefaction { .. } => "double_rarefaction",
            InitialCondition::ShuOsher { .. } => "shu_osher",
            InitialCondition::DensityWave { .. } => "density_wave",
            InitialCondition::Table { .. } => "table",
        }
    }

    /// Number of primitive variables the preset provides (`None` when it adapts).
    fn arity(&self) -> Option<usize> {
        match self {
            InitialCondition::Sine { .. } | InitialCondition::Square { .. } => Some(1),
            InitialCondition::DamBreak { .. } => Some(2),
            InitialCondition::Sod { .. }
            | InitialCondition::DoubleRarefaction { .. }
            | InitialCondition::ShuOsher { .. }
            | InitialCondition::DensityWave { .. } => Some(3),
            InitialCondition::Riemann { left, .. } => Some(left.len()),
            InitialCondition::Table { pieces } => pieces.first().map(|p| p.values.len()),
        }
    }

    /// Checks the preset against a model; the error message is suffixed to a field path.
    pub fn validate(&self, model: &FluxModel<f64>) -> std::result::Result<(), (String, String)> {
        let nv = model.nvars();
        if self.arity() != Some(nv) {
            return Err((
                String::new(),
                format!("preset {} provides {:?} variables, model needs {nv}", self.name(), self.arity()),
            ));
        }
        match self {
            InitialCondition::Riemann { left, right, .. } if left.len() != right.len() => {
                Err(("right".into(), "left and right states differ in length".into()))
            }
            InitialCondition::Table { pieces } => {
                if pieces.is_empty() {
                    return Err(("pieces".into(), "table needs at least one piece".into()));
                }
                for (i, p) in pieces.iter().enumerate() {
                    if !(p.x_hi > p.x_lo) || p.values.len() != nv {
                        return Err((format!("pieces[{i}]"), "piece needs x_hi > x_lo and one row per variable".into()));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Primitive state at `x`.
    pub fn primitive(&self, x: f64) -> Vec<f64> {
        match self {
            InitialCondition::Sine { mean, amplitude, waves, clip_below } => {
                let v = mean + amplitude * (2.0 * PI * waves * x).sin();
                vec![clip_below.map_or(v, |c| v.max(c))]
            }
            InitialCondition::Square { low, high, x_lo, x_hi } => {
                vec![if x >= *x_lo && x < *x_hi { *high } else { *low }]
            }
            InitialCondition::Riemann { x0, left, right } => if x < *x0 { left.clone() } else { right.clone() },
            InitialCondition::DamBreak { x0, h_left, h_right } => vec![if x < *x0 { *h_left } else { *h_right }, 0.0],
            InitialCondition::Sod { x0 } => {
                if x < *x0 {
                    vec![1.0, 0.0, 1.0]
                } else {
                    vec![0.125, 0.0, 0.1]
                }
            }
            InitialCondition::DoubleRarefaction { x0, rho, speed, p } => {
                vec![*rho, if x < *x0 { -speed } else { *speed }, *p]
            }
            InitialCondition::ShuOsher { x0 } => {
                if x < *x0 {
                    vec![3.857143, 2.629369, 10.333333]
                } else {
                    vec![1.0 + 0.2 * (5.0 * x).sin(), 0.0, 1.0]
                }
            }
            InitialCondition::DensityWave { rho_mean, rho_amplitude, velocity, pressure } => {
                vec![rho_mean + rho_amplitude * (2.0 * PI * x).sin(), *velocity, *pressure]
            }
            InitialCondition::Table { pieces } => {
                let piece = pieces
                    .iter()
                    .find(|p| x >= p.x_lo && x < p.x_hi)
                    .unwrap_or_else(|| if x < pieces[0].x_lo { &pieces[0] } else { &pieces[pieces.len() - 1] });
                let s = x - piece.x_lo;
                piece.values.iter().map(|c| c.iter().rev().fold(0.0, |acc, a| acc * s + a)).collect()
            }
        }
    }

    /// Conserved state at `x`.
    pub fn state(&self, model: &FluxModel<f64>, x: f64) -> State<f64> {
        to_conserved(model, &self.primitive(x))
    }

    /// Smooth presets admit convergence studies.
    pub fn is_smooth(&self) -> bool {
        matches!(self, InitialCondition::Sine { clip_below: None, .. } | InitialCondition::DensityWave { .. })
    }

    /// Exact solution by translation on a periodic domain of the given period,
    /// available for linear advection and the density wave.
    pub fn exact(&self, model: &FluxModel<f64>, x: f64, t: f64, period: f64) -> Result<State<f64>> {
        let shift = match (self, model) {
            (InitialCondition::Sine { .. }, FluxModel::Advection { a }) => a * t,
            (InitialCondition::DensityWave { velocity, .. }, FluxModel::Euler { .. }) => velocity * t,
            _ => {
                return Err(Error::Unsupported(format!("no exact solution for preset {} with this model", self.name())))
            }
        };
        let y = (x - shift).rem_euclid(period);
        Ok(self.state(model, y))
    }
}

/// Primitive to conserved variables.
pub fn to_conserved(model: &FluxModel<f64>, w: &[f64]) -> State<f64> {
    match model {
        FluxModel::Advection { .. } | FluxModel::Burgers => State::scalar(w[0]),
        FluxModel::ShallowWater { .. } => State::shallow_water(w[0], w[0] * w[1]),
        FluxModel::Euler { gamma } => State::euler(w[0], w[0] * w[1], w[2] / (gamma - 1.0) + 0.5 * w[0] * w[1] * w[1]),
    }
}
