use serde::{Deserialize, Serialize};

use crate::error::{FlashError, Result};

/// How much of the remaining distance to the least-squares point each step covers.
///
/// `delta = 0` stops where the Lasso would stop, `delta = 1` goes all the way to
/// the least-squares fit on the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// The same shrinkage at every step.
    Global { delta: f64 },
    /// Lasso steps everywhere except a single full step at `l_star`.
    Block { l_star: usize },
    /// Per-step values; steps past the end use 0.
    Explicit { deltas: Vec<f64> },
}

impl DeltaSchedule {
    pub fn global(delta: f64) -> Result<Self> {
        let s = DeltaSchedule::Global { delta };
        s.validate()?;
        Ok(s)
    }

    pub fn block(l_star: usize) -> Result<Self> {
        let s = DeltaSchedule::Block { l_star };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(deltas: Vec<f64>) -> Result<Self> {
        let s = DeltaSchedule::Explicit { deltas };
        s.validate()?;
        Ok(s)
    }

    pub fn lasso() -> Self {
        DeltaSchedule::Global { delta: 0.0 }
    }

    pub fn forward() -> Self {
        DeltaSchedule::Global { delta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |d: f64| (0.0..=1.0).contains(&d);
        match self {
            DeltaSchedule::Global { delta } if !in_unit(*delta) => Err(FlashError::InvalidArgument(
                format!("delta must lie in [0, 1], got {delta}"),
            )),
            DeltaSchedule::Block { l_star: 0 } => Err(FlashError::InvalidArgument(
                "block break point must be at least 1".into(),
            )),
            DeltaSchedule::Explicit { deltas } if deltas.iter().any(|d| !in_unit(*d)) => Err(
                FlashError::InvalidArgument("explicit deltas must lie in [0, 1]".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Shrinkage for logical step `l` (1-based).
    pub fn delta_at(&self, l: usize) -> f64 {
        match self {
            DeltaSchedule::Global { delta } => *delta,
            DeltaSchedule::Block { l_star } => {
                if l == *l_star {
                    1.0
                } else {
                    0.0
                }
            }
            DeltaSchedule::Explicit { deltas } => l
                .checked_sub(1)
                .and_then(|i| deltas.get(i))
                .copied()
                .unwrap_or(0.0),
        }
    }
}
