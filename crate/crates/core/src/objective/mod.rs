//! Latency and memory objectives of a split plan, plus feasibility.
//!
//! Latency is `t_edge + t_tx + t_server`; the server-to-edge return leg is not
//! modelled. Memory is the edge footprint of the first `x1` layers. The
//! optimizer minimizes the pair `(latency, -memory)`.

mod scenario;

pub use scenario::{
    DeviceSpec, LinkSpec, Scenario, ScenarioError, BITS_PER_MBPS, BYTES_PER_MB, HZ_PER_GHZ,
};

use std::fmt;

use thiserror::Error;

use crate::profile::CostTable;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("split x1={x1} outside [0, {total}]")]
    OutOfRange { x1: usize, total: usize },
    #[error("x1={x1} + x2={x2} does not equal {total} layers")]
    Unbalanced { x1: usize, x2: usize, total: usize },
}

/// `x1` leading layers on the edge, the remaining `x2` on the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitPlan {
    x1: usize,
    x2: usize,
    total: usize,
}

impl SplitPlan {
    pub fn new(x1: usize, total: usize) -> Result<Self, PlanError> {
        if x1 > total {
            return Err(PlanError::OutOfRange { x1, total });
        }
        Ok(Self {
            x1,
            x2: total - x1,
            total,
        })
    }

    pub fn from_parts(x1: usize, x2: usize, total: usize) -> Result<Self, PlanError> {
        if x1 > total || x2 > total {
            return Err(PlanError::OutOfRange { x1, total });
        }
        if x1 + x2 != total {
            return Err(PlanError::Unbalanced { x1, x2, total });
        }
        Ok(Self { x1, x2, total })
    }

    pub fn x1(&self) -> usize {
        self.x1
    }

    pub fn x2(&self) -> usize {
        self.x2
    }

    pub fn total_layers(&self) -> usize {
        self.total
    }

    /// Fraction of layers computed on the edge (0 for an empty model).
    pub fn edge_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.x1 as f64 / self.total as f64
        }
    }
}

impl fmt::Display for SplitPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.x1, self.x2)
    }
}

/// Objective-space image of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvaluationVector {
    /// Latency in seconds.
    pub y1: Seconds,
    /// Negated edge memory in bytes.
    pub y2: i64,
}

/// Total-ordered seconds so that evaluation vectors can live in sets.
#[derive(Debug, Clone, Copy)]
pub struct Seconds(pub f64);

impl PartialEq for Seconds {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Seconds {}

impl PartialOrd for Seconds {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::hash::Hash for Seconds {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl Ord for Seconds {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl EvaluationVector {
    pub fn new(latency_s: f64, memory_bytes: u64) -> Self {
        Self {
            y1: Seconds(latency_s),
            y2: -i64::try_from(memory_bytes).unwrap_or(i64::MAX),
        }
    }

    pub fn latency(&self) -> f64 {
        self.y1.0
    }

    /// Raw edge memory in bytes.
    pub fn memory(&self) -> u64 {
        self.y2.unsigned_abs()
    }
}

impl fmt::Display for EvaluationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6} s, {} B)", self.latency(), self.memory())
    }
}

/// Edge compute time of the first `x1` layers.
pub fn t_edge(table: &CostTable, x1: usize, edge: &DeviceSpec) -> f64 {
    table.edge_work(x1) as f64 / edge.capacity()
}

/// Upstream transfer time of the activation leaving layer `x1`.
pub fn t_tx(table: &CostTable, x1: usize, link: &LinkSpec) -> f64 {
    8.0 * table.tx_bytes(x1) as f64 / link.bandwidth_bps
}

/// Server compute time of the last `x2` layers.
pub fn t_server(table: &CostTable, x2: usize, server: &DeviceSpec) -> f64 {
    table.server_work(x2) as f64 / server.capacity()
}

/// The latency components of one plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyBreakdown {
    pub t_edge: f64,
    pub t_tx: f64,
    pub t_server: f64,
}

impl LatencyBreakdown {
    pub fn of(plan: SplitPlan, table: &CostTable, scenario: &Scenario) -> Self {
        let t_tx = if plan.x2() == 0 && !scenario.tx_at_full_edge {
            0.0
        } else {
            t_tx(table, plan.x1(), &scenario.link)
        };
        Self {
            t_edge: t_edge(table, plan.x1(), &scenario.edge),
            t_tx,
            t_server: t_server(table, plan.x2(), &scenario.server),
        }
    }

    pub fn total(&self) -> f64 {
        self.t_edge + self.t_tx + self.t_server
    }
}

/// End-to-end latency in seconds.
pub fn f1(plan: SplitPlan, table: &CostTable, scenario: &Scenario) -> f64 {
    LatencyBreakdown::of(plan, table, scenario).total()
}

/// Edge memory in bytes.
pub fn f2(plan: SplitPlan, table: &CostTable) -> u64 {
    table.edge_mem(plan.x1())
}

pub fn evaluate(plan: SplitPlan, table: &CostTable, scenario: &Scenario) -> EvaluationVector {
    EvaluationVector::new(f1(plan, table, scenario), f2(plan, table))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible,
    /// Plan does not match the cost table's layer count.
    LayerMismatch {
        plan_layers: usize,
        model_layers: usize,
    },
    Memory {
        required: u64,
        available: u64,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible)
    }
}

impl fmt::Display for Feasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feasibility::Feasible => write!(f, "feasible"),
            Feasibility::LayerMismatch {
                plan_layers,
                model_layers,
            } => write!(
                f,
                "plan covers {plan_layers} layers, model has {model_layers}"
            ),
            Feasibility::Memory {
                required,
                available,
            } => {
                write!(f, "edge memory {required} B exceeds storage {available} B")
            }
        }
    }
}

/// Checks the storage constraint (plan invariants hold by construction).
pub fn is_feasible(plan: SplitPlan, table: &CostTable, scenario: &Scenario) -> Feasibility {
    if plan.total_layers() != table.total_layers() {
        return Feasibility::LayerMismatch {
            plan_layers: plan.total_layers(),
            model_layers: table.total_layers(),
        };
    }
    let required = f2(plan, table);
    match scenario.edge.storage_bytes {
        Some(available) if required > available => Feasibility::Memory {
            required,
            available,
        },
        _ => Feasibility::Feasible,
    }
}
