use std::fmt;
use std::str::FromStr;

use super::{ParetoFront, Point};

/// How the final split is picked from the front.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankingStrategy {
    /// Member with the largest edge memory (minimizes `y2`).
    PaperAsWritten,
    MinLatency,
    /// Best normalized memory gain minus normalized latency.
    #[default]
    Knee,
    /// Minimizes `lambda * y1_hat + (1 - lambda) * y2_hat` on min-max
    /// normalized objectives.
    WeightedSum(f64),
}

impl FromStr for RankingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knee" => Ok(Self::Knee),
            "paper" | "paper-as-written" => Ok(Self::PaperAsWritten),
            "min-latency" => Ok(Self::MinLatency),
            other => {
                let lambda = other
                    .strip_prefix("weighted:")
                    .or_else(|| other.strip_prefix("weighted-sum:"))
                    .ok_or_else(|| {
                        format!("unknown strategy `{other}` (knee, paper, min-latency, weighted:LAMBDA)")
                    })?;
                let lambda: f64 = lambda
                    .parse()
                    .map_err(|_| format!("bad weight `{lambda}`"))?;
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(format!("weight {lambda} outside [0, 1]"));
                }
                Ok(Self::WeightedSum(lambda))
            }
        }
    }
}

impl fmt::Display for RankingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PaperAsWritten => write!(f, "paper"),
            Self::MinLatency => write!(f, "min-latency"),
            Self::Knee => write!(f, "knee"),
            Self::WeightedSum(l) => write!(f, "weighted:{l}"),
        }
    }
}

/// Min-max normalizer; a degenerate range maps everything to 0.
struct Unit {
    lo: f64,
    span: f64,
}

impl Unit {
    fn over(values: impl Iterator<Item = f64> + Clone) -> Self {
        let lo = values.clone().fold(f64::INFINITY, f64::min);
        let hi = values.fold(f64::NEG_INFINITY, f64::max);
        Self { lo, span: hi - lo }
    }

    fn apply(&self, v: f64) -> f64 {
        if self.span > 0.0 {
            (v - self.lo) / self.span
        } else {
            0.0
        }
    }
}

/// Picks a front member; ties go to the smaller `x1`.
pub fn select(front: &ParetoFront, strategy: RankingStrategy) -> Option<Point> {
    let members = front.members();
    let lat = Unit::over(members.iter().map(|p| p.eval.latency()));
    let mem = Unit::over(members.iter().map(|p| p.eval.memory() as f64));
    let neg_mem = Unit::over(members.iter().map(|p| p.eval.y2 as f64));

    // lower cost wins
    let cost = |p: &Point| -> f64 {
        match strategy {
            RankingStrategy::PaperAsWritten => p.eval.y2 as f64,
            RankingStrategy::MinLatency => p.eval.latency(),
            RankingStrategy::Knee => {
                lat.apply(p.eval.latency()) - mem.apply(p.eval.memory() as f64)
            }
            RankingStrategy::WeightedSum(l) => {
                l * lat.apply(p.eval.latency()) + (1.0 - l) * neg_mem.apply(p.eval.y2 as f64)
            }
        }
    };

    members
        .iter()
        .min_by(|a, b| {
            let (ca, cb) = (cost(a), cost(b));
            ca.total_cmp(&cb)
                .then_with(|| match strategy {
                    // exact integer comparison for the memory extreme
                    RankingStrategy::PaperAsWritten => a.eval.y2.cmp(&b.eval.y2),
                    _ => std::cmp::Ordering::Equal,
                })
                .then_with(|| a.plan.x1().cmp(&b.plan.x1()))
        })
        .copied()
}
