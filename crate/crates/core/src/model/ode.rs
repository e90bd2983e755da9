//! Explicit Runge-Kutta steps over a layer function.
//!
//! One step maps `z` to `z + Σ_i w_i k_i` with `k_i = f(z + Σ_{j<i} a_ij k_j)`.
//! Order 1 is the plain residual (Euler) block.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RkOrder {
    Euler,
    Rk2,
    Rk4,
}

impl RkOrder {
    pub fn stages(self) -> usize {
        match self {
            RkOrder::Euler => 1,
            RkOrder::Rk2 => 2,
            RkOrder::Rk4 => 4,
        }
    }

    pub fn from_stages(p: usize) -> Result<Self> {
        match p {
            1 => Ok(RkOrder::Euler),
            2 => Ok(RkOrder::Rk2),
            4 => Ok(RkOrder::Rk4),
            other => Err(Error::InvalidConfig(format!(
                "unsupported Runge-Kutta order {other} (expected 1, 2 or 4)"
            ))),
        }
    }
}

impl fmt::Display for RkOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.stages())
    }
}

impl FromStr for RkOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let p = s
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::InvalidConfig(format!("bad Runge-Kutta order {s:?}")))?;
        RkOrder::from_stages(p)
    }
}

/// Butcher coefficients of an explicit method.
#[derive(Debug, Clone, PartialEq)]
pub struct Tableau {
    /// Combination weights `w_i`.
    pub weights: Vec<f64>,
    /// Strictly lower-triangular stage coefficients; `coeffs[i][j]` is `a_ij`.
    pub coeffs: Vec<Vec<f64>>,
}

impl Tableau {
    pub fn classical(order: RkOrder) -> Self {
        match order {
            RkOrder::Euler => Tableau {
                weights: vec![1.0],
                coeffs: vec![vec![]],
            },
            RkOrder::Rk2 => Tableau {
                weights: vec![0.5, 0.5],
                coeffs: vec![vec![], vec![1.0]],
            },
            RkOrder::Rk4 => Tableau {
                weights: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
                coeffs: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            },
        }
    }

    pub fn stages(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        let p = self.weights.len();
        if p == 0
            || self.coeffs.len() != p
            || self.coeffs.iter().enumerate().any(|(i, row)| row.len() > i)
        {
            return Err(Error::InvalidConfig(
                "Runge-Kutta tableau must be explicit with one weight per stage".into(),
            ));
        }
        Ok(())
    }
}

/// Where the combination weights come from.
#[derive(Debug, Clone, Copy)]
pub enum StageWeights {
    /// The tableau's fixed values.
    Fixed,
    /// A `1×p` tensor on the tape (learnable).
    Learned(Var),
}

/// `Σ_i w_i k_i` for one step from `z`; the caller adds `z` back.
pub fn rk_increment<F>(
    tape: &mut Tape,
    z: Var,
    tableau: &Tableau,
    weights: StageWeights,
    mut f: F,
) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    tableau.validate()?;
    if let StageWeights::Learned(w) = weights {
        if tape.value(w).len() != tableau.stages() {
            return Err(Error::ShapeMismatch(format!(
                "{} learned weights for a {}-stage method",
                tape.value(w).len(),
                tableau.stages()
            )));
        }
    }
    let mut stages: Vec<Var> = Vec::with_capacity(tableau.stages());
    for i in 0..tableau.stages() {
        let mut input = z;
        for (j, &a) in tableau.coeffs[i].iter().enumerate() {
            if a != 0.0 {
                let step = tape.scale(stages[j], a)?;
                input = tape.add(input, step)?;
            }
        }
        stages.push(f(tape, input)?);
    }
    let mut total: Option<Var> = None;
    for (i, &k) in stages.iter().enumerate() {
        let term = match weights {
            StageWeights::Fixed => tape.scale(k, tableau.weights[i])?,
            StageWeights::Learned(w) => tape.scale_by(k, w, i)?,
        };
        total = Some(match total {
            None => term,
            Some(t) => tape.add(t, term)?,
        });
    }
    Ok(total.expect("at least one stage"))
}

/// Full step `z + Σ_i w_i k_i`.
pub fn rk_block<F>(
    tape: &mut Tape,
    z: Var,
    tableau: &Tableau,
    weights: StageWeights,
    f: F,
) -> Result<Var>
where
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    let inc = rk_increment(tape, z, tableau, weights, f)?;
    tape.add(z, inc)
}
