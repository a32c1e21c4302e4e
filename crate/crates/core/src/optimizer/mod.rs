//! Bi-objective split optimization.
//!
//! The objective space of a model is finite: one point per feasible split
//! `x1 in 0..=L`. [`lmos`] traces its Pareto front with an epsilon-constraint
//! sweep: the latency bound starts at the nadir latency and steps down through
//! every distinct latency value present in the space, solving "maximize edge
//! memory subject to latency <= eps" at each level. [`brute_force_front`] is the
//! pairwise-dominance oracle the sweep is checked against.

mod rank;

pub use rank::{select, RankingStrategy};

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::objective::{evaluate, is_feasible, EvaluationVector, Feasibility, Scenario, SplitPlan};
use crate::profile::{derive_costs, CostTable, ModelProfile, ProfileError};

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("no feasible split: {0}")]
    NoFeasibleSplit(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// A plan and its objective-space image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    pub plan: SplitPlan,
    pub eval: EvaluationVector,
}

impl Point {
    pub fn new(plan: SplitPlan, eval: EvaluationVector) -> Self {
        Self { plan, eval }
    }
}

/// Every feasible split with its evaluation, ordered by `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpace {
    points: Vec<Point>,
    rejected: Vec<(SplitPlan, Feasibility)>,
}

impl ObjectiveSpace {
    /// Evaluates every split of `table`, keeping the feasible ones.
    pub fn from_table(table: &CostTable, scenario: &Scenario) -> Result<Self, OptimizeError> {
        let total = table.total_layers();
        let mut points = Vec::with_capacity(total + 1);
        let mut rejected = Vec::new();
        for x1 in 0..=total {
            let plan = SplitPlan::new(x1, total).expect("x1 within range");
            match is_feasible(plan, table, scenario) {
                Feasibility::Feasible => {
                    points.push(Point::new(plan, evaluate(plan, table, scenario)))
                }
                reason => rejected.push((plan, reason)),
            }
        }
        if points.is_empty() {
            let reason = rejected
                .first()
                .map(|(p, r)| format!("x1={}: {r}", p.x1()))
                .unwrap_or_else(|| "empty model".into());
            return Err(OptimizeError::NoFeasibleSplit(reason));
        }
        Ok(Self { points, rejected })
    }

    /// Builds a space from precomputed points (kept in `x1` order).
    pub fn from_points(mut points: Vec<Point>) -> Self {
        points.sort_by_key(|p| p.plan.x1());
        points.dedup_by_key(|p| p.plan.x1());
        Self {
            points,
            rejected: Vec::new(),
        }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Splits excluded by the storage constraint, with reasons.
    pub fn rejected(&self) -> &[(SplitPlan, Feasibility)] {
        &self.rejected
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn get(&self, x1: usize) -> Option<&Point> {
        self.points
            .binary_search_by_key(&x1, |p| p.plan.x1())
            .ok()
            .map(|i| &self.points[i])
    }
}

/// Evaluates every feasible split of `profile` under `scenario`.
pub fn enumerate_space(
    profile: &ModelProfile,
    scenario: &Scenario,
) -> Result<ObjectiveSpace, OptimizeError> {
    let table = derive_costs(profile, scenario)?;
    ObjectiveSpace::from_table(&table, scenario)
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: &EvaluationVector, b: &EvaluationVector) -> bool {
    a.y1 <= b.y1 && a.y2 <= b.y2 && (a.y1 < b.y1 || a.y2 < b.y2)
}

/// Ideal point and the lexicographic payoff-table nadir.
pub fn ideal_nadir(space: &ObjectiveSpace) -> Option<(EvaluationVector, EvaluationVector)> {
    let pts = space.points();
    let min_y1 = pts.iter().map(|p| p.eval.y1).min()?;
    let min_y2 = pts.iter().map(|p| p.eval.y2).min()?;
    let nadir_y1 = pts
        .iter()
        .filter(|p| p.eval.y2 == min_y2)
        .map(|p| p.eval.y1)
        .min()?;
    let nadir_y2 = pts
        .iter()
        .filter(|p| p.eval.y1 == min_y1)
        .map(|p| p.eval.y2)
        .min()?;
    Some((
        EvaluationVector {
            y1: min_y1,
            y2: min_y2,
        },
        EvaluationVector {
            y1: nadir_y1,
            y2: nadir_y2,
        },
    ))
}

/// Which objective the sweep optimizes; the other one is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizedObjective {
    /// Maximize edge memory subject to latency <= eps.
    #[default]
    Memory,
    /// Minimize latency subject to -memory <= eps.
    Latency,
}

/// Maximizes memory among points with latency at most `eps_latency`.
///
/// Ties on memory go to the lower latency, then to the smaller `x1`.
pub fn solve_constrained(space: &ObjectiveSpace, eps_latency: f64) -> Option<Point> {
    space
        .points()
        .iter()
        .filter(|p| p.eval.latency() <= eps_latency)
        .min_by(|a, b| {
            (a.eval.y2, a.eval.y1, a.plan.x1()).cmp(&(b.eval.y2, b.eval.y1, b.plan.x1()))
        })
        .copied()
}

/// Minimizes latency among points with `y2 <= eps_neg_memory`.
pub fn solve_constrained_latency(space: &ObjectiveSpace, eps_neg_memory: i64) -> Option<Point> {
    space
        .points()
        .iter()
        .filter(|p| p.eval.y2 <= eps_neg_memory)
        .min_by(|a, b| {
            (a.eval.y1, a.eval.y2, a.plan.x1()).cmp(&(b.eval.y1, b.eval.y2, b.plan.x1()))
        })
        .copied()
}

/// Constraint level of a sweep, in the units of the bounded objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Latency(f64),
    NegMemory(i64),
}

/// One iteration of the epsilon sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepStep {
    pub epsilon: Epsilon,
    pub solution: Option<Point>,
}

/// State carried through the epsilon sweep.
#[derive(Debug, Clone)]
pub struct EpsilonSweepState {
    pub ideal: EvaluationVector,
    pub nadir: EvaluationVector,
    pub epsilon: Epsilon,
    pub collected: Vec<Point>,
    pub steps: Vec<SweepStep>,
}

/// Runs the epsilon sweep and returns its full state.
pub fn lmos_trace(
    space: &ObjectiveSpace,
    objective: OptimizedObjective,
) -> Option<EpsilonSweepState> {
    let (ideal, nadir) = ideal_nadir(space)?;
    let mut state = match objective {
        OptimizedObjective::Memory => {
            // distinct latency levels, descending
            let mut levels: Vec<_> = space.points().iter().map(|p| p.eval.y1).collect();
            levels.sort_unstable_by(|a, b| b.cmp(a));
            levels.dedup();
            let mut state = EpsilonSweepState {
                ideal,
                nadir,
                epsilon: Epsilon::Latency(nadir.latency()),
                collected: Vec::new(),
                steps: Vec::new(),
            };
            let mut eps = nadir.y1;
            while eps >= ideal.y1 {
                state.epsilon = Epsilon::Latency(eps.0);
                let solution = solve_constrained(space, eps.0);
                state.steps.push(SweepStep {
                    epsilon: state.epsilon,
                    solution,
                });
                state.collected.extend(solution);
                match levels.iter().find(|&&l| l < eps) {
                    Some(&next) => eps = next,
                    None => break,
                }
            }
            state
        }
        OptimizedObjective::Latency => {
            let mut levels: Vec<i64> = space.points().iter().map(|p| p.eval.y2).collect();
            levels.sort_unstable_by(|a, b| b.cmp(a));
            levels.dedup();
            let mut state = EpsilonSweepState {
                ideal,
                nadir,
                epsilon: Epsilon::NegMemory(nadir.y2),
                collected: Vec::new(),
                steps: Vec::new(),
            };
            let mut eps = nadir.y2;
            while eps >= ideal.y2 {
                state.epsilon = Epsilon::NegMemory(eps);
                let solution = solve_constrained_latency(space, eps);
                state.steps.push(SweepStep {
                    epsilon: state.epsilon,
                    solution,
                });
                state.collected.extend(solution);
                match levels.iter().find(|&&l| l < eps) {
                    Some(&next) => eps = next,
                    None => break,
                }
            }
            state
        }
    };
    state.collected = non_dominated(&state.collected);
    Some(state)
}

/// Pareto front by the epsilon-constraint sweep (unranked).
pub fn lmos(space: &ObjectiveSpace) -> ParetoFront {
    lmos_with(space, OptimizedObjective::Memory)
}

pub fn lmos_with(space: &ObjectiveSpace, objective: OptimizedObjective) -> ParetoFront {
    let members = lmos_trace(space, objective)
        .map(|s| s.collected)
        .unwrap_or_default();
    ParetoFront::unranked(members)
}

/// Exact front by pairwise dominance over the whole space.
pub fn brute_force_front(space: &ObjectiveSpace) -> ParetoFront {
    let pts = space.points();
    let members = pts
        .iter()
        .filter(|p| !pts.iter().any(|q| dominates(&q.eval, &p.eval)))
        .copied()
        .collect();
    ParetoFront::unranked(members)
}

/// Drops dominated points and duplicate images (keeping the smaller `x1`).
fn non_dominated(points: &[Point]) -> Vec<Point> {
    let mut kept: Vec<Point> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(&q.eval, &p.eval)))
        .copied()
        .collect();
    let mut seen = HashSet::new();
    kept.sort_by_key(|p| (p.eval.y1, p.eval.y2, p.plan.x1()));
    kept.retain(|p| seen.insert(p.eval));
    kept
}

/// Non-dominated members sorted by latency, plus the ranked selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    members: Vec<Point>,
    selected: Option<(usize, RankingStrategy)>,
}

impl ParetoFront {
    fn unranked(members: Vec<Point>) -> Self {
        Self {
            members: non_dominated(&members),
            selected: None,
        }
    }

    pub fn members(&self) -> &[Point] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Set of member images.
    pub fn images(&self) -> HashSet<EvaluationVector> {
        self.members.iter().map(|p| p.eval).collect()
    }

    /// Applies `strategy` and records the chosen member.
    pub fn rank(mut self, strategy: RankingStrategy) -> Self {
        self.selected = select(&self, strategy).map(|p| {
            let idx = self
                .members
                .iter()
                .position(|m| m.plan == p.plan)
                .expect("selection is a member");
            (idx, strategy)
        });
        self
    }

    pub fn selected(&self) -> Option<&Point> {
        self.selected.map(|(i, _)| &self.members[i])
    }

    pub fn strategy(&self) -> Option<RankingStrategy> {
        self.selected.map(|(_, s)| s)
    }

    /// One JSON object per member: `x1, x2, f1_s, f2_bytes, selected`.
    pub fn to_json_lines(&self) -> String {
        let sel = self.selected().map(|p| p.plan);
        let mut out = String::new();
        for m in &self.members {
            let line = serde_json::json!({
                "x1": m.plan.x1(),
                "x2": m.plan.x2(),
                "f1_s": m.eval.latency(),
                "f2_bytes": m.eval.memory(),
                "selected": sel == Some(m.plan),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ParetoFront {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.members {
            writeln!(f, "x1={:<4} {}", m.plan.x1(), m.eval)?;
        }
        Ok(())
    }
}
