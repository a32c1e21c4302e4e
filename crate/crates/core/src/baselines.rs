//! Competing split policies: latency-optimal, edge-only, server-only and
//! seeded random splitting.

use std::fmt;
use std::io;

use thiserror::Error;

use crate::objective::{evaluate, Feasibility, Scenario, SplitPlan};
use crate::optimizer::ObjectiveSpace;
use crate::profile::CostTable;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("edge-only split needs {required} B but the edge has {available} B")]
    EdgeMemory { required: u64, available: u64 },
    #[error("random split found no feasible layer in {0} draws")]
    Exhausted(usize),
    #[error("objective space is empty")]
    EmptySpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// Latency-optimized: the feasible split with minimal latency.
    Loa,
    /// Edge computation only.
    Eco,
    /// Server computation only.
    Sco,
    /// Random splitting with a fixed seed.
    Rs(u64),
}

impl BaselineKind {
    pub fn label(&self) -> &'static str {
        match self {
            BaselineKind::Loa => "loa",
            BaselineKind::Eco => "eco",
            BaselineKind::Sco => "sco",
            BaselineKind::Rs(_) => "rs",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// Plan chosen by `kind` over `space` for a model of `total` layers.
///
/// ECO fails when the full model does not fit the edge. RS redraws infeasible
/// splits at most `total + 1` times.
pub fn run_baseline(
    kind: BaselineKind,
    space: &ObjectiveSpace,
    total: usize,
) -> Result<SplitPlan, BaselineError> {
    let plan = |x1| SplitPlan::new(x1, total).expect("x1 within range");
    match kind {
        BaselineKind::Loa => space
            .points()
            .iter()
            .min_by(|a, b| {
                a.eval
                    .y1
                    .cmp(&b.eval.y1)
                    .then(a.plan.x1().cmp(&b.plan.x1()))
            })
            .map(|p| p.plan)
            .ok_or(BaselineError::EmptySpace),
        BaselineKind::Eco => {
            if space.get(total).is_some() {
                Ok(plan(total))
            } else {
                let (required, available) = space
                    .rejected()
                    .iter()
                    .find(|(p, _)| p.x1() == total)
                    .and_then(|(_, r)| match r {
                        Feasibility::Memory {
                            required,
                            available,
                        } => Some((*required, *available)),
                        _ => None,
                    })
                    .unwrap_or((0, 0));
                Err(BaselineError::EdgeMemory {
                    required,
                    available,
                })
            }
        }
        BaselineKind::Sco => Ok(plan(0)),
        BaselineKind::Rs(seed) => {
            let mut rng = SplitMix64::new(seed);
            let attempts = total + 1;
            for _ in 0..attempts {
                let x1 = (rng.next_u64() % (total as u64 + 1)) as usize;
                if space.get(x1).is_some() {
                    return Ok(plan(x1));
                }
            }
            Err(BaselineError::Exhausted(attempts))
        }
    }
}

/// One row of the comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub approach: String,
    pub model: String,
    pub x1: usize,
    pub f1_s: f64,
    pub f2_bytes: u64,
}

impl ComparisonRow {
    pub fn new(
        approach: &str,
        model: &str,
        plan: SplitPlan,
        table: &CostTable,
        scenario: &Scenario,
    ) -> Self {
        let e = evaluate(plan, table, scenario);
        Self {
            approach: approach.to_string(),
            model: model.to_string(),
            x1: plan.x1(),
            f1_s: e.latency(),
            f2_bytes: e.memory(),
        }
    }
}

/// Writes `approach,model,x1,f1_s,f2_bytes` CSV.
pub fn write_comparison_csv<W: io::Write>(rows: &[ComparisonRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["approach", "model", "x1", "f1_s", "f2_bytes"])?;
    for r in rows {
        w.write_record([
            r.approach.clone(),
            r.model.clone(),
            r.x1.to_string(),
            r.f1_s.to_string(),
            r.f2_bytes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
