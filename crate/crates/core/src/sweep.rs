//! Parameter sensitivity sweeps and per-split latency curves.

use std::fmt;
use std::io;
use std::str::FromStr;
use std::thread;

use thiserror::Error;

use crate::objective::{LatencyBreakdown, LinkSpec, Scenario, SplitPlan, BYTES_PER_MB, HZ_PER_GHZ};
use crate::optimizer::{enumerate_space, lmos, Point, RankingStrategy};
use crate::profile::{derive_costs, ModelProfile, ProfileError};

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("empty grid")]
    Empty,
    #[error("grid values must be sorted ascending")]
    Unsorted,
    #[error("{parameter} value {value} outside [{lo}, {hi}]")]
    OutOfRange {
        parameter: Parameter,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{0} takes integer values, got {1}")]
    NotInteger(Parameter, f64),
}

/// Swept parameter. Values are in Mbps, cores, GHz or MB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameter {
    Bandwidth,
    EdgeCores,
    EdgeClock,
    EdgeStorage,
    ServerCores,
    ServerClock,
}

impl Parameter {
    pub const ALL: [Parameter; 6] = [
        Parameter::Bandwidth,
        Parameter::EdgeCores,
        Parameter::EdgeClock,
        Parameter::EdgeStorage,
        Parameter::ServerCores,
        Parameter::ServerClock,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Parameter::Bandwidth => "bandwidth",
            Parameter::EdgeCores => "edge_cores",
            Parameter::EdgeClock => "edge_clock",
            Parameter::EdgeStorage => "edge_storage",
            Parameter::ServerCores => "server_cores",
            Parameter::ServerClock => "server_clock",
        }
    }

    /// Inclusive sensitivity range.
    pub fn range(&self) -> (f64, f64) {
        match self {
            Parameter::Bandwidth => (1.0, 200.0),
            Parameter::EdgeCores | Parameter::ServerCores => (1.0, 8.0),
            Parameter::EdgeClock => (1.0, 2.0),
            Parameter::EdgeStorage => (256.0, 16000.0),
            Parameter::ServerClock => (1.5, 3.2),
        }
    }

    fn is_integer(&self) -> bool {
        matches!(
            self,
            Parameter::EdgeCores | Parameter::ServerCores | Parameter::EdgeStorage
        )
    }

    /// Default grid: log-spaced bandwidth (8 points), every core count, and
    /// five evenly spaced clock or storage values.
    pub fn default_values(&self) -> Vec<f64> {
        let (lo, hi) = self.range();
        match self {
            Parameter::Bandwidth => {
                let n = 8;
                (0..n)
                    .map(|i| {
                        if i == n - 1 {
                            hi
                        } else {
                            lo * (hi / lo).powf(i as f64 / (n - 1) as f64)
                        }
                    })
                    .collect()
            }
            Parameter::EdgeCores | Parameter::ServerCores => (1..=8).map(f64::from).collect(),
            Parameter::EdgeStorage => (0..5)
                .map(|i| (lo + (hi - lo) * i as f64 / 4.0).round())
                .collect(),
            Parameter::EdgeClock | Parameter::ServerClock => {
                (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
            }
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(&self, base: &Scenario, value: f64) -> Scenario {
        let mut s = *base;
        match self {
            Parameter::Bandwidth => s.link = LinkSpec::from_mbps(value),
            Parameter::EdgeCores => s.edge.cores = value as u32,
            Parameter::EdgeClock => s.edge.clock_hz = value * HZ_PER_GHZ,
            Parameter::EdgeStorage => s.edge.storage_bytes = Some(value as u64 * BYTES_PER_MB),
            Parameter::ServerCores => s.server.cores = value as u32,
            Parameter::ServerClock => s.server.clock_hz = value * HZ_PER_GHZ,
        }
        s
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == s || p.name().replace('_', "-") == s)
            .ok_or_else(|| {
                let names: Vec<_> = Parameter::ALL.iter().map(|p| p.name()).collect();
                format!("unknown parameter `{s}` (one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGrid {
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub base: Scenario,
}

impl ParameterGrid {
    pub fn new(parameter: Parameter, values: Vec<f64>, base: Scenario) -> Result<Self, SweepError> {
        if values.is_empty() {
            return Err(SweepError::Empty);
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(SweepError::Unsorted);
        }
        let (lo, hi) = parameter.range();
        for &value in &values {
            if !(lo..=hi).contains(&value) {
                return Err(SweepError::OutOfRange {
                    parameter,
                    value,
                    lo,
                    hi,
                });
            }
            if parameter.is_integer() && value.fract() != 0.0 {
                return Err(SweepError::NotInteger(parameter, value));
            }
        }
        Ok(Self {
            parameter,
            values,
            base,
        })
    }

    pub fn with_defaults(parameter: Parameter, base: Scenario) -> Self {
        Self::new(parameter, parameter.default_values(), base).expect("default grids are valid")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub parameter: Parameter,
    pub value: f64,
    pub strategy: RankingStrategy,
    /// Selected point, or the reason no split was feasible.
    pub outcome: Result<Point, String>,
}

impl SweepRecord {
    pub fn fraction(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|p| p.plan.edge_fraction())
    }
}

fn sweep_point(
    profile: &ModelProfile,
    scenario: &Scenario,
    strategy: RankingStrategy,
) -> Result<Point, String> {
    let space = enumerate_space(profile, scenario).map_err(|e| e.to_string())?;
    lmos(&space)
        .rank(strategy)
        .selected()
        .copied()
        .ok_or_else(|| "empty front".to_string())
}

/// Plans `profile` at every grid value. Points run concurrently; output keeps
/// grid order.
pub fn run_sweep(
    profile: &ModelProfile,
    grid: &ParameterGrid,
    strategy: RankingStrategy,
) -> Vec<SweepRecord> {
    let scenarios: Vec<Scenario> = grid
        .values
        .iter()
        .map(|&v| grid.parameter.apply(&grid.base, v))
        .collect();
    let outcomes: Vec<Result<Point, String>> = thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || sweep_point(profile, s, strategy)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });
    grid.values
        .iter()
        .zip(outcomes)
        .map(|(&value, outcome)| SweepRecord {
            parameter: grid.parameter,
            value,
            strategy,
            outcome,
        })
        .collect()
}

/// Writes `parameter,value,x1,fraction,f1_s,f2_bytes,strategy`; infeasible
/// points leave the plan columns empty.
pub fn write_sweep_csv<W: io::Write>(records: &[SweepRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "parameter",
        "value",
        "x1",
        "fraction",
        "f1_s",
        "f2_bytes",
        "strategy",
    ])?;
    for r in records {
        let (x1, frac, f1, f2) = match &r.outcome {
            Ok(p) => (
                p.plan.x1().to_string(),
                p.plan.edge_fraction().to_string(),
                p.eval.latency().to_string(),
                p.eval.memory().to_string(),
            ),
            Err(_) => Default::default(),
        };
        w.write_record([
            r.parameter.name().to_string(),
            r.value.to_string(),
            x1,
            frac,
            f1,
            f2,
            r.strategy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Latency components at one split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub x1: usize,
    pub t_edge: f64,
    pub t_tx: f64,
    pub t_server: f64,
    pub total: f64,
}

/// Latency decomposition for every `x1` in `0..=L`, feasible or not.
pub fn latency_curve(
    profile: &ModelProfile,
    scenario: &Scenario,
) -> Result<Vec<CurveRow>, ProfileError> {
    let table = derive_costs(profile, scenario)?;
    let total_layers = table.total_layers();
    Ok((0..=total_layers)
        .map(|x1| {
            let plan = SplitPlan::new(x1, total_layers).expect("x1 within range");
            let b = LatencyBreakdown::of(plan, &table, scenario);
            CurveRow {
                x1,
                t_edge: b.t_edge,
                t_tx: b.t_tx,
                t_server: b.t_server,
                total: b.total(),
            }
        })
        .collect())
}

/// Writes `x1,t_edge_s,t_tx_s,t_server_s,total_s`.
pub fn write_curve_csv<W: io::Write>(rows: &[CurveRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x1", "t_edge_s", "t_tx_s", "t_server_s", "total_s"])?;
    for r in rows {
        w.write_record([
            r.x1.to_string(),
            r.t_edge.to_string(),
            r.t_tx.to_string(),
            r.t_server.to_string(),
            r.total.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::brute_force_front;
    use crate::profile::builtin_profile;

    fn fractions(model: &str, parameter: Parameter, values: Vec<f64>) -> Vec<f64> {
        let p = builtin_profile(model).unwrap();
        let grid = ParameterGrid::new(parameter, values, Scenario::default()).unwrap();
        run_sweep(&p, &grid, RankingStrategy::Knee)
            .iter()
            .map(|r| r.fraction().unwrap())
            .collect()
    }

    #[test]
    fn bandwidth_grid_cardinality() {
        let p = builtin_profile("vgg16").unwrap();
        let grid = ParameterGrid::new(
            Parameter::Bandwidth,
            vec![1.0, 5.0, 10.0, 50.0, 200.0],
            Scenario::default(),
        )
        .unwrap();
        let recs = run_sweep(&p, &grid, RankingStrategy::Knee);
        assert_eq!(recs.len(), 5);
        assert_eq!(
            recs.iter().map(|r| r.value).collect::<Vec<_>>(),
            grid.values
        );
    }

    #[test]
    fn storage_extremes() {
        let f = fractions("vgg16", Parameter::EdgeStorage, vec![256.0, 16000.0]);
        assert!(f[0] <= f[1], "{f:?}");
    }

    #[test]
    fn faster_edge_clock_keeps_more_layers() {
        let f = fractions("vgg16", Parameter::EdgeClock, vec![1.0, 2.0]);
        assert!(f[0] <= f[1], "{f:?}");
    }

    #[test]
    fn chosen_plans_lie_on_the_front() {
        let p = builtin_profile("alexnet").unwrap();
        for param in Parameter::ALL {
            let grid = ParameterGrid::with_defaults(param, Scenario::default());
            for r in run_sweep(&p, &grid, RankingStrategy::Knee) {
                let point = r.outcome.unwrap();
                let s = param.apply(&Scenario::default(), r.value);
                let space = enumerate_space(&p, &s).unwrap();
                assert!(brute_force_front(&space).images().contains(&point.eval));
            }
        }
    }

    #[test]
    fn grid_validation() {
        let base = Scenario::default();
        assert_eq!(
            ParameterGrid::new(Parameter::Bandwidth, vec![], base),
            Err(SweepError::Empty)
        );
        assert_eq!(
            ParameterGrid::new(Parameter::Bandwidth, vec![10.0, 5.0], base),
            Err(SweepError::Unsorted)
        );
        assert!(matches!(
            ParameterGrid::new(Parameter::EdgeClock, vec![0.5], base),
            Err(SweepError::OutOfRange { .. })
        ));
        assert!(matches!(
            ParameterGrid::new(Parameter::EdgeCores, vec![1.5], base),
            Err(SweepError::NotInteger(..))
        ));
    }

    #[test]
    fn default_grids() {
        let bw = Parameter::Bandwidth.default_values();
        assert_eq!(bw.len(), 8);
        assert_eq!(bw[0], 1.0);
        assert_eq!(bw[7], 200.0);
        assert_eq!(
            Parameter::EdgeStorage.default_values(),
            vec![256.0, 4192.0, 8128.0, 12064.0, 16000.0]
        );
        assert_eq!(Parameter::ServerCores.default_values().len(), 8);
        for p in Parameter::ALL {
            ParameterGrid::with_defaults(p, Scenario::default());
        }
    }

    #[test]
    fn curve_decomposes() {
        for name in crate::profile::BUILTIN_MODELS {
            let p = builtin_profile(name).unwrap();
            let rows = latency_curve(&p, &Scenario::default()).unwrap();
            assert_eq!(rows.len(), p.total_layers() + 1);
            assert_eq!(rows[0].t_edge, 0.0);
            assert_eq!(rows.last().unwrap().t_server, 0.0);
            for r in &rows {
                assert_eq!(r.total, r.t_edge + r.t_tx + r.t_server);
            }
        }
        let rows =
            latency_curve(&builtin_profile("alexnet").unwrap(), &Scenario::default()).unwrap();
        assert!(rows.windows(2).all(|w| w[0].t_edge <= w[1].t_edge));
    }

    #[test]
    fn csv_headers() {
        let p = builtin_profile("alexnet").unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&latency_curve(&p, &Scenario::default()).unwrap(), &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("x1,t_edge_s,t_tx_s,t_server_s,total_s\n"));

        let grid = ParameterGrid::with_defaults(Parameter::EdgeCores, Scenario::default());
        let mut buf = Vec::new();
        write_sweep_csv(&run_sweep(&p, &grid, RankingStrategy::Knee), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("parameter,value,x1,fraction,f1_s,f2_bytes,strategy\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
