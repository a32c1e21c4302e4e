//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

mod common;

use std::io::{Read, Write};
use std::net::{Shutdown, TcpStream};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use splitplan::baselines::{run_baseline, BaselineKind};
use splitplan::objective::{
    evaluate, f1, is_feasible, t_edge, t_server, t_tx, LatencyBreakdown, LinkSpec, Scenario,
    SplitPlan,
};
use splitplan::optimizer::{brute_force_front, dominates, enumerate_space, lmos, RankingStrategy};
use splitplan::profile::{
    builtin_profile, CostTable, LayerKind, ModelProfile, TensorShape, BUILTIN_MODELS,
};
use splitplan::splitrt::wire::{code, read_frame, write_frame, Frame, PROTOCOL_VERSION};
use splitplan::splitrt::{
    execute_monolithic, run_edge, ComputeMode, SessionOutcome, SyntheticTensor, Throttled,
};
use splitplan::sweep::{run_sweep, Parameter, ParameterGrid};

use common::{random_toy_profile, sampled_scenario, spawn_server, ten_layer_toy, toy_scenario};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    if secs < limit_s {
        Ok(format!("{detail}; {secs:.2} s"))
    } else {
        Err(format!("{detail}; took {secs:.2} s, limit {limit_s} s"))
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut cases = 0;
    for name in BUILTIN_MODELS {
        let profile = builtin_profile(name).map_err(|e| e.to_string())?;
        for i in 0..50 {
            let scenario = sampled_scenario(&mut rng);
            let space =
                enumerate_space(&profile, &scenario).map_err(|e| format!("{name}#{i}: {e}"))?;
            let fast = lmos(&space).images();
            let oracle = brute_force_front(&space).images();
            if fast != oracle {
                return Err(format!(
                    "{name} scenario #{i}: lmos {fast:?} != brute force {oracle:?}"
                ));
            }
            cases += 1;
        }
    }
    within(
        start.elapsed(),
        5.0,
        format!("{cases} model/scenario pairs identical"),
    )
}

fn dominance_and_feasibility() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut fronts = 0;
    let mut infeasible = 0;
    for case in 0..200 {
        let profile = random_toy_profile(&mut rng, 25);
        let scenario = toy_scenario(&mut rng, &profile);
        let table = CostTable::new(&profile, scenario.dtype_bytes).map_err(|e| e.to_string())?;
        let total = profile.total_layers();
        let Ok(space) = enumerate_space(&profile, &scenario) else {
            // nothing fits: every plan must indeed be infeasible
            let any = (0..=total).any(|x1| {
                is_feasible(SplitPlan::new(x1, total).unwrap(), &table, &scenario).is_feasible()
            });
            if any {
                return Err(format!(
                    "case {case}: space reported empty but a split fits"
                ));
            }
            infeasible += 1;
            continue;
        };
        let front = lmos(&space);
        for m in front.members() {
            let p = m.plan;
            if p.x1() + p.x2() != total || p.x1() > total {
                return Err(format!("case {case}: unbalanced plan {p}"));
            }
            if !is_feasible(p, &table, &scenario).is_feasible() {
                return Err(format!("case {case}: infeasible member {p}"));
            }
            if m.eval != evaluate(p, &table, &scenario) {
                return Err(format!("case {case}: stale evaluation for {p}"));
            }
            if let Some(d) = space.points().iter().find(|q| dominates(&q.eval, &m.eval)) {
                return Err(format!("case {case}: member {p} dominated by {}", d.plan));
            }
        }
        fronts += 1;
    }
    within(
        start.elapsed(),
        5.0,
        format!("{fronts} fronts clean, {infeasible} profiles with no feasible split"),
    )
}

fn baseline_fidelity() -> Outcome {
    let start = Instant::now();
    let scenario = Scenario::default();
    let expected_eco = [("alexnet", 21), ("vgg13", 32), ("vgg16", 38), ("vgg19", 44)];
    for name in BUILTIN_MODELS {
        let profile = builtin_profile(name).map_err(|e| e.to_string())?;
        let table = CostTable::new(&profile, scenario.dtype_bytes).map_err(|e| e.to_string())?;
        let space = enumerate_space(&profile, &scenario).map_err(|e| e.to_string())?;
        let total = profile.total_layers();
        let run =
            |kind| run_baseline(kind, &space, total).map_err(|e| format!("{name} {kind}: {e}"));

        let eco = run(BaselineKind::Eco)?;
        if let Some(&(_, want)) = expected_eco.iter().find(|(m, _)| *m == name) {
            if eco.x1() != want {
                return Err(format!("{name}: ECO x1 = {}, expected {want}", eco.x1()));
            }
        }
        let sco = run(BaselineKind::Sco)?;
        let sco_mem = evaluate(sco, &table, &scenario).memory();
        if sco.x1() != 0 || sco_mem != table.input_bytes() {
            return Err(format!("{name}: SCO x1 = {}, f2 = {sco_mem}", sco.x1()));
        }

        let loa = run(BaselineKind::Loa)?;
        let loa_f1 = f1(loa, &table, &scenario);
        let scan_min = space
            .points()
            .iter()
            .map(|p| p.eval.latency())
            .fold(f64::INFINITY, f64::min);
        if loa_f1 != scan_min {
            return Err(format!(
                "{name}: LOA f1 {loa_f1} != exhaustive minimum {scan_min}"
            ));
        }
        let mut others = vec![eco, sco];
        for seed in 0..8 {
            others.push(run(BaselineKind::Rs(seed))?);
        }
        let front = lmos(&space);
        for strategy in [
            RankingStrategy::Knee,
            RankingStrategy::PaperAsWritten,
            RankingStrategy::MinLatency,
            RankingStrategy::WeightedSum(0.25),
        ] {
            others.push(
                front
                    .clone()
                    .rank(strategy)
                    .selected()
                    .ok_or("empty front")?
                    .plan,
            );
        }
        if let Some(p) = others.iter().find(|p| f1(**p, &table, &scenario) < loa_f1) {
            return Err(format!("{name}: plan {p} beats LOA latency"));
        }
    }
    within(
        start.elapsed(),
        1.0,
        "ECO 21/32/38/44, SCO at input, LOA minimal".into(),
    )
}

fn sensitivity_trends() -> Outcome {
    let start = Instant::now();
    let profile = builtin_profile("vgg16").map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for parameter in Parameter::ALL {
        let grid = ParameterGrid::with_defaults(parameter, Scenario::default());
        let records = run_sweep(&profile, &grid, RankingStrategy::Knee);
        let mut fractions = Vec::with_capacity(records.len());
        for r in &records {
            fractions.push(
                r.fraction().ok_or_else(|| {
                    format!("{}={}: no feasible split", parameter.name(), r.value)
                })?,
            );
        }
        let increasing = matches!(
            parameter,
            Parameter::Bandwidth
                | Parameter::EdgeCores
                | Parameter::EdgeClock
                | Parameter::EdgeStorage
        );
        let ok = fractions.windows(2).all(|w| {
            if increasing {
                w[1] >= w[0]
            } else {
                w[1] <= w[0]
            }
        });
        let shown: Vec<String> = fractions.iter().map(|f| format!("{f:.3}")).collect();
        let line = format!(
            "{} {} [{}]",
            parameter.name(),
            if increasing {
                "non-decreasing"
            } else {
                "non-increasing"
            },
            shown.join(", ")
        );
        if ok {
            summary.push(parameter.name().to_string());
        } else {
            failures.push(line);
        }
    }
    if failures.is_empty() {
        within(
            start.elapsed(),
            10.0,
            format!("monotone in {}", summary.join(", ")),
        )
    } else {
        Err(format!("violated: {}", failures.join("; ")))
    }
}

fn latency_decomposition() -> Outcome {
    let scenario = Scenario::default();
    let mut checked = 0;
    for name in BUILTIN_MODELS {
        let profile = builtin_profile(name).map_err(|e| e.to_string())?;
        let table = CostTable::new(&profile, scenario.dtype_bytes).map_err(|e| e.to_string())?;
        let total = table.total_layers();
        for x1 in 0..=total {
            let plan = SplitPlan::new(x1, total).unwrap();
            let te = t_edge(&table, plan.x1(), &scenario.edge);
            let ts = t_server(&table, plan.x2(), &scenario.server);
            let tt = t_tx(&table, plan.x1(), &scenario.link);
            let latency = f1(plan, &table, &scenario);
            let sum = te + tt + ts;
            if (latency - sum).abs() > 1e-12 * latency.abs().max(f64::MIN_POSITIVE) {
                return Err(format!("{name} x1={x1}: f1 {latency} vs components {sum}"));
            }
            let b = LatencyBreakdown::of(plan, &table, &scenario);
            if x1 == 0 && b.t_edge != 0.0 {
                return Err(format!("{name}: t_edge(0) = {}", b.t_edge));
            }
            if x1 == total && b.t_server != 0.0 {
                return Err(format!("{name}: t_server at x2=0 is {}", b.t_server));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} splits, relative error <= 1e-12, endpoints exactly 0"
    ))
}

fn split_equivalence() -> Outcome {
    let start = Instant::now();
    let profile = ten_layer_toy();
    let scenario = Scenario {
        link: LinkSpec::from_mbps(1000.0),
        ..Scenario::default()
    };
    let expected = execute_monolithic(
        &profile,
        &SyntheticTensor::input(profile.input_shape, scenario.dtype_bytes),
    )
    .map_err(|e| e.to_string())?;
    let (addr, server) = spawn_server(profile.clone(), scenario, 11);
    for x1 in 0..=10 {
        let plan = SplitPlan::new(x1, 10).unwrap();
        let report = run_edge(addr, &profile, &scenario, plan, ComputeMode::Synthetic)
            .map_err(|e| format!("x1={x1}: {e}"))?;
        let hex: String = expected.iter().map(|b| format!("{b:02x}")).collect();
        if !report.matches || report.digest != hex {
            return Err(format!(
                "x1={x1}: digest {} != monolithic {hex}",
                report.digest
            ));
        }
    }
    let outcomes = server.join().map_err(|_| "server thread panicked")?;
    if outcomes
        .iter()
        .any(|o| !matches!(o, SessionOutcome::Completed { .. }))
    {
        return Err(format!("server sessions: {outcomes:?}"));
    }
    within(
        start.elapsed(),
        30.0,
        "11/11 splits match the monolithic digest".into(),
    )
}

fn transmission_prediction() -> Outcome {
    let start = Instant::now();
    let bps = 10e6;
    // one same-size convolution over a 1 MiB input; x1 = 1 ships 1 MiB
    let profile = ModelProfile::from_kinds(
        "wide",
        TensorShape::new(1, 512, 512),
        [LayerKind::conv(1, 1, 3, 1, 1), LayerKind::ReLU],
    )
    .map_err(|e| e.to_string())?;
    let scenario = Scenario {
        link: LinkSpec { bandwidth_bps: bps },
        ..Scenario::default()
    };
    let (addr, server) = spawn_server(profile.clone(), scenario, 1);
    let plan = SplitPlan::new(1, 2).unwrap();
    let report = run_edge(addr, &profile, &scenario, plan, ComputeMode::Synthetic)
        .map_err(|e| e.to_string())?;
    server.join().map_err(|_| "server thread panicked")?;
    let predicted = 8.0 * report.tx_bytes as f64 / bps;
    let measured = report.measured.t_tx_s;
    let tx_err = (measured - predicted).abs() / predicted;
    if report.tx_bytes < 1_000_000 || tx_err > 0.20 {
        return Err(format!(
            "{} B: measured t_tx {measured:.3} s vs 8U/B {predicted:.3} s ({:.1}% off)",
            report.tx_bytes,
            tx_err * 100.0
        ));
    }

    let payload = vec![0u8; 2_000_000];
    let mut sink = Throttled::new(std::io::sink(), bps);
    let t0 = Instant::now();
    sink.write_all(&payload).map_err(|e| e.to_string())?;
    let throughput = 8.0 * payload.len() as f64 / t0.elapsed().as_secs_f64();
    let th_err = (throughput - bps).abs() / bps;
    if th_err > 0.10 {
        return Err(format!(
            "throttle ran at {:.3} Mbps, configured 10",
            throughput / 1e6
        ));
    }
    within(
        start.elapsed(),
        60.0,
        format!(
            "t_tx {measured:.3} s vs {predicted:.3} s ({:.1}%), throttle {:.3} Mbps ({:.1}%)",
            tx_err * 100.0,
            throughput / 1e6,
            th_err * 100.0
        ),
    )
}

fn expect_error(stream: &mut TcpStream, want: u16, case: &str) -> Result<(), String> {
    match read_frame(stream) {
        Ok(Frame::Error { code, .. }) if code == want => Ok(()),
        other => Err(format!("{case}: expected ERROR {want}, got {other:?}")),
    }
}

fn protocol_robustness() -> Outcome {
    let profile = ten_layer_toy();
    let scenario = Scenario::default();
    let (addr, server) = spawn_server(profile.clone(), scenario, 4);
    let hello = |version| Frame::Hello {
        version,
        model: profile.name.clone(),
        layers: 10,
    };

    // length prefix promises 100 bytes, only 3 arrive before the write side closes
    let mut s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    s.write_all(&[100, 0, 0, 0, 1, 0, 0])
        .map_err(|e| e.to_string())?;
    s.shutdown(Shutdown::Write).map_err(|e| e.to_string())?;
    expect_error(&mut s, code::MALFORMED_FRAME, "truncated frame")?;
    let mut rest = Vec::new();
    let _ = s.read_to_end(&mut rest);

    let mut s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    write_frame(&mut s, &hello(PROTOCOL_VERSION + 1)).map_err(|e| e.to_string())?;
    expect_error(&mut s, code::BAD_VERSION, "bad version")?;

    let mut s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    write_frame(&mut s, &hello(PROTOCOL_VERSION)).map_err(|e| e.to_string())?;
    write_frame(
        &mut s,
        &Frame::Plan {
            x1: 11,
            scenario_digest: scenario.digest(),
        },
    )
    .map_err(|e| e.to_string())?;
    expect_error(&mut s, code::PLAN_OUT_OF_RANGE, "out-of-range plan")?;

    let report = run_edge(
        addr,
        &profile,
        &scenario,
        SplitPlan::new(4, 10).unwrap(),
        ComputeMode::Synthetic,
    )
    .map_err(|e| format!("server not reusable: {e}"))?;
    if !report.matches {
        return Err("follow-up session returned a wrong digest".into());
    }
    let outcomes = server.join().map_err(|_| "server thread panicked")?;
    let want = [
        SessionOutcome::Rejected {
            code: code::MALFORMED_FRAME,
        },
        SessionOutcome::Rejected {
            code: code::BAD_VERSION,
        },
        SessionOutcome::Rejected {
            code: code::PLAN_OUT_OF_RANGE,
        },
        SessionOutcome::Completed { x1: 4 },
    ];
    if outcomes != want {
        return Err(format!("server outcomes {outcomes:?}"));
    }
    Ok("ERROR 3 / 1 / 2 returned, then a clean session on the same server".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        (
            "dominance-freeness and feasibility",
            dominance_and_feasibility,
        ),
        ("baseline fidelity", baseline_fidelity),
        ("sensitivity trends", sensitivity_trends),
        ("latency decomposition", latency_decomposition),
        ("split equivalence", split_equivalence),
        ("transmission prediction", transmission_prediction),
        ("protocol robustness", protocol_robustness),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
