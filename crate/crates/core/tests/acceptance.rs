//! Acceptance criteria, one status line each. Run with `cargo test --test acceptance`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant as WallClock};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spx_core::dataflow::LogicalTimestamp;
use spx_core::netsim::{fit_lognormal, nearest_rank_percentiles, LatencyModel, LatencyTrace};
use spx_core::probe::{run_probe, ProbeConfig, ProbeServer, ServerOptions, Stall};
use spx_core::scenarios::{
    default_detectors, find_detector, run_jaywalk, run_red_light, run_traffic_jam, simulate_braking, speedup_table,
    sweep_matrix, ExecutionMode, ModeKind, ScenarioConfig, ScenarioKind, SimFile, STEP_MS,
};
use spx_core::speculation::{
    effective_forward_time, simulate_timestamp, Collator, Decision, Priority, RequestTiming, ResultSource,
};
use spx_core::{Instant, Span};

const GRID_MS: [f64; 6] = [10.0, 50.0, 100.0, 250.0, 500.0, 3000.0];
const LOCAL_MS: [f64; 3] = [100.0, 301.7, 903.5];

type Verdict = Result<String, String>;

struct Criterion {
    id: u8,
    name: &'static str,
    run: fn() -> Verdict,
    /// Set when the criterion cannot hold as stated; the reason is printed
    /// and the failure does not fail the suite.
    known_unattainable: Option<&'static str>,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "collation oracle equivalence", run: criterion_1, known_unattainable: None },
        Criterion { id: 2, name: "exactly-once and deadline soundness", run: criterion_2, known_unattainable: None },
        Criterion { id: 3, name: "fallback dominance", run: criterion_3, known_unattainable: None },
        Criterion { id: 4, name: "traffic-jam collision matrix", run: criterion_4, known_unattainable: None },
        Criterion { id: 5, name: "arbitrage delta", run: criterion_5, known_unattainable: None },
        Criterion {
            id: 6,
            name: "speedup table",
            run: criterion_6,
            known_unattainable: Some(
                "903.5/107.1 = 8.436 rounds to 8.44 but the published ratio is 8.43; truncating instead \
                 would turn 407.7/118.2 = 3.449 into 3.44 against a published 3.45",
            ),
        },
        Criterion { id: 7, name: "lognormal fit", run: criterion_7, known_unattainable: None },
        Criterion { id: 8, name: "probe loopback", run: criterion_8, known_unattainable: None },
        Criterion { id: 9, name: "kinematics", run: criterion_9, known_unattainable: None },
        Criterion { id: 10, name: "scenario claims", run: criterion_10, known_unattainable: None },
    ];

    let filter: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut hard_failures = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = WallClock::now();
        let verdict = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".to_owned()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {:>2} PASS  {} ({secs:.1}s): {detail}", c.id, c.name),
            Err(detail) => {
                println!("criterion {:>2} FAIL  {} ({secs:.1}s): {detail}", c.id, c.name);
                match c.known_unattainable {
                    Some(why) => println!("             known unattainable: {why}"),
                    None => hard_failures += 1,
                }
            }
        }
    }
    if hard_failures > 0 {
        println!("{hard_failures} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Brute-force forward point: scan every event instant in order and stop at
/// the first one where a result is in hand and either nothing better is still
/// outstanding or some deadline expires right then.
fn oracle(local_ms: f64, reqs: &[RequestTiming]) -> (Instant, ResultSource) {
    let at = |ms: f64| Instant::ZERO + Span::from_ms(ms);
    let local = at(local_ms);
    let arrivals: Vec<Option<Instant>> = reqs.iter().map(|r| r.rtt_ms.is_finite().then(|| at(r.rtt_ms))).collect();
    let deadlines: Vec<Instant> = reqs.iter().map(|r| at(r.deadline_ms)).collect();
    let mut instants: BTreeSet<Instant> = deadlines.iter().copied().collect();
    instants.insert(local);
    instants.extend(arrivals.iter().flatten());
    for tau in instants {
        let mut best: Option<i32> = (local <= tau).then_some(0);
        for (j, r) in reqs.iter().enumerate() {
            if let Some(a) = arrivals[j] {
                if a <= tau && a <= deadlines[j] {
                    best = best.max(Some(r.priority.value()));
                }
            }
        }
        let Some(best) = best else { continue };
        let outstanding_better = reqs.iter().enumerate().any(|(j, r)| {
            let unresolved = arrivals[j].is_none_or(|a| a > tau) && deadlines[j] > tau;
            unresolved && r.priority.value() > best
        });
        let expiring = deadlines.contains(&tau);
        if !outstanding_better || expiring {
            let source = if best == 0 { ResultSource::Local } else { ResultSource::Cloud(Priority::new(best)) };
            return (tau, source);
        }
    }
    unreachable!("the local result is always available eventually")
}

/// All instances: up to three requests with distinct priorities from {1,2,3}
/// in every order, latencies and deadlines from the grid.
fn grid_instances(mut visit: impl FnMut(f64, &[RequestTiming])) {
    let orders: Vec<Vec<i32>> = vec![
        vec![],
        vec![1],
        vec![2],
        vec![3],
        vec![1, 2],
        vec![2, 1],
        vec![1, 3],
        vec![3, 1],
        vec![2, 3],
        vec![3, 2],
        vec![1, 2, 3],
        vec![1, 3, 2],
        vec![2, 1, 3],
        vec![2, 3, 1],
        vec![3, 1, 2],
        vec![3, 2, 1],
    ];
    let combos: Vec<(f64, f64)> = GRID_MS.iter().flat_map(|&r| GRID_MS.iter().map(move |&d| (r, d))).collect();
    let mut reqs = Vec::with_capacity(3);
    for &local in &LOCAL_MS {
        for prios in &orders {
            let k = prios.len();
            let mut idx = vec![0usize; k];
            loop {
                reqs.clear();
                reqs.extend((0..k).map(|i| RequestTiming::new(combos[idx[i]].0, combos[idx[i]].1, prios[i])));
                visit(local, &reqs);
                // odometer over combos^k
                let mut pos = 0;
                while pos < k {
                    idx[pos] += 1;
                    if idx[pos] < combos.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
        }
    }
}

fn criterion_1() -> Verdict {
    let start = WallClock::now();
    let mut cases = 0u64;
    let mut mismatches = Vec::new();
    grid_instances(|local, reqs| {
        cases += 1;
        let expected = oracle(local, reqs);
        let closed = effective_forward_time(local, reqs);
        let replay = simulate_timestamp(Some(local), reqs);
        let got_replay = (replay.forwards.len() == 1).then(|| (replay.forwards[0].instant, replay.forwards[0].source));
        if (got_replay != Some(expected) || (closed.instant, closed.source) != expected)
            && mismatches.len() < 3 {
                mismatches.push(format!("local {local} {reqs:?}: oracle {expected:?} closed {closed:?} replay {:?}", replay.forwards));
            }
    });
    let elapsed = start.elapsed();
    check(mismatches.is_empty(), || format!("{} mismatches, e.g. {}", mismatches.len(), mismatches.join("; ")))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{cases} instances agree (state machine, closed form, brute force)"))
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Cloud(usize, usize),
    Local(usize),
    Timer(usize, usize),
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let runs = 10_000;
    let mut violations = Vec::new();
    for run in 0..runs {
        // 1-3 timestamps, 0-4 requests each, coarse times so ties are common
        let n_ts = rng.gen_range(1..=3);
        let mut collator: Collator<usize> = Collator::new();
        let mut events: Vec<(Instant, u8, u64, Ev)> = Vec::new();
        let mut specs = Vec::new();
        for t in 0..n_ts {
            let mut prios: Vec<i32> = (1..=6).collect();
            prios.shuffle(&mut rng);
            let n_req = rng.gen_range(0..=4);
            let local = (rng.gen_bool(0.9)).then(|| Instant::from_ms(rng.gen_range(0..20) as f64 * 25.0));
            let mut reqs = Vec::new();
            for &p in prios.iter().take(n_req) {
                let deadline = Instant::from_ms(rng.gen_range(1..20) as f64 * 25.0);
                let arrival = (rng.gen_bool(0.85)).then(|| Instant::from_ms(rng.gen_range(0..24) as f64 * 25.0));
                collator
                    .register_request(LogicalTimestamp(t as u64), Priority::new(p), deadline)
                    .map_err(|e| e.to_string())?;
                reqs.push((p, deadline, arrival));
            }
            for (j, &(_, deadline, arrival)) in reqs.iter().enumerate() {
                events.push((deadline, 3, rng.gen(), Ev::Timer(t, j)));
                if let Some(a) = arrival {
                    events.push((a, 0, rng.gen(), Ev::Cloud(t, j)));
                }
            }
            if let Some(l) = local {
                events.push((l, 1, rng.gen(), Ev::Local(t)));
            }
            specs.push((local, reqs));
        }
        // same-instant, same-class events in random order
        events.sort_by_key(|e| (e.0, e.1, e.2));

        let mut forwards: Vec<Vec<(Instant, ResultSource)>> = vec![Vec::new(); n_ts];
        let mut on_time_seen: Vec<Vec<i32>> = vec![Vec::new(); n_ts];
        for &(at, _, _, ev) in &events {
            let (t, decision, on_time_prio) = match ev {
                Ev::Cloud(t, j) => {
                    let (p, deadline, _) = specs[t].1[j];
                    let d = collator.on_cloud_response(LogicalTimestamp(t as u64), Priority::new(p), j);
                    if at > deadline && d.is_forward() {
                        violations.push(format!("run {run}: late response p={p} forwarded at {at}"));
                    }
                    (t, d, (at <= deadline).then_some(p))
                }
                Ev::Local(t) => (t, collator.on_local_result(LogicalTimestamp(t as u64), usize::MAX), Some(0)),
                Ev::Timer(t, j) => {
                    let p = specs[t].1[j].0;
                    (t, collator.on_timer_fire(LogicalTimestamp(t as u64), Priority::new(p)), None)
                }
            };
            if let Some(p) = on_time_prio {
                on_time_seen[t].push(p);
            }
            if let Decision::Forward { source, .. } = decision {
                let best_seen = on_time_seen[t].iter().copied().max().unwrap_or(-1);
                if source.priority().value() < best_seen {
                    violations.push(format!("run {run}: forwarded {source:?} while priority {best_seen} was on time"));
                }
                forwards[t].push((at, source));
            }
        }
        for (t, (local, reqs)) in specs.iter().enumerate() {
            let any_on_time = reqs.iter().any(|&(_, d, a)| a.is_some_and(|a| a <= d));
            let expected = usize::from(local.is_some() || any_on_time);
            if forwards[t].len() != expected {
                violations.push(format!("run {run} t{t}: {} forwards, expected {expected}", forwards[t].len()));
            }
        }
    }
    check(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("{runs} seeded orderings, zero violations"))
}

fn criterion_3() -> Verdict {
    let mut checked = 0u64;
    let mut violations = Vec::new();
    grid_instances(|local, reqs| {
        if reqs.iter().any(|r| r.deadline_ms > local) {
            return;
        }
        checked += 1;
        let local_only = Instant::from_ms(local);
        let closed = effective_forward_time(local, reqs).instant;
        let replay = simulate_timestamp(Some(local), reqs).first_forward().map(|f| f.instant);
        if closed > local_only || replay.is_none_or(|r| r > local_only) {
            violations.push(format!("local {local} {reqs:?}"));
        }
    });
    check(violations.is_empty(), || format!("{} grid violations, e.g. {}", violations.len(), violations[0]))?;

    let file = SimFile::load(config_path("traffic_jam.json")).map_err(|e| e.to_string())?;
    let sweep = file.sweep.as_ref().ok_or("config has no sweep")?;
    let detector = find_detector(&file.detectors, &sweep.detector).map_err(|e| e.to_string())?;
    let m = sweep_matrix(&sweep.speeds_mps, &sweep.response_times_s, &ModeKind::ALL, &file.scenario, detector)
        .map_err(|e| e.to_string())?;
    for &s in &sweep.speeds_mps {
        for &r in &sweep.response_times_s {
            let ours = m.cell(s, ModeKind::Ours, r).ok_or("missing cell")?.outcome.collided;
            let local = m.cell(s, ModeKind::Local, r).ok_or("missing cell")?.outcome.collided;
            let cloud = m.cell(s, ModeKind::Cloud, r).ok_or("missing cell")?.outcome.collided;
            check(!ours || local, || format!("Ours collides but Local does not at {s} m/s, {r} s"))?;
            check(ours == (local && cloud), || format!("Ours is not the better of Local and Cloud at {s} m/s, {r} s"))?;
        }
    }
    // every response within every deadline: Ours brakes exactly when Cloud does
    for &s in &sweep.speeds_mps {
        let cfg = ScenarioConfig { scenario: ScenarioKind::traffic_jam(s), ..file.scenario.clone() };
        let brake = |mode: ModeKind| -> Result<Option<f64>, String> {
            let exec = mode.with_response_time(detector, 250.0).map_err(|e| e.to_string())?;
            Ok(run_traffic_jam(&cfg, &exec).map_err(|e| e.to_string())?.brake_instant_ms)
        };
        let (ours, cloud) = (brake(ModeKind::Ours)?, brake(ModeKind::Cloud)?);
        check(ours == cloud, || format!("{s} m/s: Ours brakes at {ours:?}, Cloud at {cloud:?}"))?;
    }
    Ok(format!("{checked} grid instances forward no later than local; Ours avoids exactly when Local or Cloud does on all {} sweep cells", m.cells.len() / 3))
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn criterion_4() -> Verdict {
    // true = collision, per published cell colours; columns 0.5 0.75 1.0 1.25 1.5 3.0
    const X: bool = true;
    const O: bool = false;
    let expected: [(f64, [[bool; 6]; 3]); 5] = [
        (11.0, [[O, O, O, O, O, O], [O, O, O, O, O, O], [O, O, O, O, O, O]]),
        (18.0, [[O, O, O, O, O, O], [O, O, O, O, O, X], [O, O, O, O, O, O]]),
        (20.0, [[O, O, O, O, O, O], [O, O, O, O, X, X], [O, O, O, O, O, O]]),
        (22.0, [[X, X, X, X, X, X], [O, O, X, X, X, X], [O, O, X, X, X, X]]),
        (24.0, [[X, X, X, X, X, X], [O, X, X, X, X, X], [O, X, X, X, X, X]]),
    ];
    let start = WallClock::now();
    let file = SimFile::load(config_path("traffic_jam.json")).map_err(|e| e.to_string())?;
    let sweep = file.sweep.as_ref().ok_or("config has no sweep")?;
    let detector = find_detector(&file.detectors, &sweep.detector).map_err(|e| e.to_string())?;
    let m = sweep_matrix(&sweep.speeds_mps, &sweep.response_times_s, &sweep.modes, &file.scenario, detector)
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(m.cells.len() == 90, || format!("{} cells", m.cells.len()))?;
    let mut wrong = Vec::new();
    for (speed, rows) in expected {
        for (mode, row) in ModeKind::ALL.iter().zip(rows) {
            for (r, want) in sweep.response_times_s.iter().zip(row) {
                let got = m.cell(speed, *mode, *r).ok_or("missing cell")?.outcome.collided;
                if got != want {
                    wrong.push(format!("{speed} m/s {} {r} s", mode.as_str()));
                }
            }
        }
    }
    check(wrong.is_empty(), || format!("{} cells differ: {}", wrong.len(), wrong.join(", ")))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok("all 90 cells match".to_owned())
}

fn criterion_5() -> Verdict {
    let r101 = default_detectors().into_iter().find(|d| d.name == "DETR-ResNet-101").ok_or("no R101")?;
    let cfg = ScenarioConfig::new(ScenarioKind::traffic_jam(18.0));
    let response = |mode: ExecutionMode| -> Result<f64, String> {
        let out = run_traffic_jam(&cfg, &mode).map_err(|e| e.to_string())?;
        let f = out.frames.first().ok_or("no frames delivered")?;
        Ok(f.delivered_ms - f.capture_ms)
    };
    let local = response(ExecutionMode::Local { detector: r101.clone() })?;
    let cloud = response(ExecutionMode::Cloud { detector: r101, latency: LatencyModel::constant(68.0) })?;
    let delta = local - cloud;
    check((delta - 221.5).abs() <= 1.0, || format!("delta {delta:.3} ms"))?;
    check((delta - 222.0).abs() <= 1.0, || format!("delta {delta:.3} ms vs published 222"))?;
    Ok(format!("local {local:.1} ms, cloud {cloud:.1} ms, delta {delta:.1} ms"))
}

fn criterion_6() -> Verdict {
    let published = [2.95, 3.45, 5.86, 8.01, 8.43, 8.46];
    let rows = speedup_table(&default_detectors());
    check(rows.len() == 6, || format!("{} rows", rows.len()))?;
    let mut wrong = Vec::new();
    for (row, want) in rows.iter().zip(published) {
        // independent recomputation from the stored pair
        let ratio = ((row.local_ms / row.cloud_ms) * 100.0).round() / 100.0;
        if ratio != row.speedup {
            return Err(format!("{}: table says {} but pair gives {ratio}", row.name, row.speedup));
        }
        if (row.speedup - want).abs() > 1e-9 {
            wrong.push(format!("{} {:.2} vs published {want:.2}", row.name, row.speedup));
        }
    }
    check(wrong.is_empty(), || format!("{}/6 match; {}", 6 - wrong.len(), wrong.join(", ")))?;
    Ok("six ratios match".to_owned())
}

fn criterion_7() -> Verdict {
    let fit = fit_lognormal(68.0, 336.0).map_err(|e| e.to_string())?;
    let (p50, p90, p99) = (fit.quantile(0.5), fit.quantile(0.9), fit.quantile(0.99));
    check((p50 - 68.0).abs() < 1e-9 && (p90 - 336.0).abs() < 1e-9, || format!("analytic p50 {p50} p90 {p90}"))?;
    check((fit.mu - 4.2195).abs() < 1e-4 && (fit.sigma - 1.2466).abs() < 1e-4, || {
        format!("mu {} sigma {}", fit.mu, fit.sigma)
    })?;

    let model = fit.into_model(0);
    let mut draws: Vec<f64> = (0..1_000_000).map(|i| model.sample_rtt(i)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let q = nearest_rank_percentiles(&mut draws, &[50.0, 90.0]).map_err(|e| e.to_string())?;
    let (mc50, mc90) = (q[0], q[1]);
    check((mc50 / 68.0 - 1.0).abs() < 0.02 && (mc90 / 336.0 - 1.0).abs() < 0.02, || {
        format!("Monte-Carlo p50 {mc50:.2} p90 {mc90:.2}")
    })?;

    // the published p99 is far heavier than a two-point log-normal implies
    check((p99 - 1236.0).abs() < 1.0, || format!("implied p99 {p99:.1}"))?;
    check(p99 < 3027.0 * 0.5, || format!("implied p99 {p99:.1} unexpectedly close to 3027"))?;
    Ok(format!(
        "mu {:.4} sigma {:.4}; MC p50 {mc50:.1} p90 {mc90:.1}; implied p99 {p99:.0} ms vs measured 3027 ms (not reproduced)",
        fit.mu, fit.sigma
    ))
}

fn criterion_8() -> Verdict {
    let start = WallClock::now();
    let delay_run = std::thread::spawn(|| -> Result<(f64, usize, LatencyTrace, u64), String> {
        let server = ProbeServer::bind("127.0.0.1:0", ServerOptions { reply_delay: Duration::from_millis(50), stall: None })
            .and_then(|s| s.spawn())
            .map_err(|e| e.to_string())?;
        let mut cfg = ProbeConfig::new(server.addr().to_string());
        cfg.duration = Duration::from_secs(10);
        let report = run_probe(&cfg).map_err(|e| e.to_string())?;
        let median = report.trace.percentiles(&[50.0]).map_err(|e| e.to_string())?[0];
        Ok((median, report.trace.len(), report.trace, report.sent))
    });
    let stall_run = std::thread::spawn(|| -> Result<(usize, usize), String> {
        let stall = Stall { after_requests: 15, duration: Duration::from_secs(2) };
        let server = ProbeServer::bind("127.0.0.1:0", ServerOptions { reply_delay: Duration::ZERO, stall: Some(stall) })
            .and_then(|s| s.spawn())
            .map_err(|e| e.to_string())?;
        let mut cfg = ProbeConfig::new(server.addr().to_string());
        cfg.duration = Duration::from_secs(5);
        let report = run_probe(&cfg).map_err(|e| e.to_string())?;
        Ok((report.max_in_flight_at_decision, report.pauses.len()))
    });
    let (median, received, trace, sent) = delay_run.join().map_err(|_| "probe thread panicked")??;
    let (max_in_flight, pauses) = stall_run.join().map_err(|_| "probe thread panicked")??;

    check((50.0..=55.0).contains(&median), || format!("median {median:.3} ms"))?;
    check(received as u64 == sent && sent == 300, || format!("received {received} of {sent}"))?;
    check(pauses >= 1, || "backlog guard never engaged".to_owned())?;
    check(max_in_flight <= 31, || format!("{max_in_flight} in flight at a send decision"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("loopback.csv");
    trace.save(&path).map_err(|e| e.to_string())?;
    let loaded = LatencyTrace::load(&path).map_err(|e| e.to_string())?;
    let replay = LatencyModel::TraceReplay { trace: loaded.clone(), wrap: false };
    let replayed: Vec<f64> = (0..loaded.len() as u64).map(|i| replay.sample_rtt(i)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    // the CSV keeps microsecond resolution
    let faithful = replayed.len() == received && replayed.iter().zip(trace.rtts()).all(|(a, b)| (a - b).abs() <= 5e-4 + 1e-9);
    check(faithful, || format!("replayed {} of {received} samples faithfully", replayed.len()))?;

    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "median {median:.2} ms over {received} frames; stall: {pauses} pause(s), max in flight {max_in_flight}; replay lossless"
    ))
}

fn criterion_9() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for v in [5.0, 11.0, 18.0, 22.0, 30.0] {
        for a in [4.0, 7.5] {
            for t_r in [0.0, 500.0] {
                let closed = v * t_r / 1000.0 + v * v / (2.0 * a);
                let run = simulate_braking(v, a, Some(t_r), 1e6, STEP_MS, 60_000.0);
                let rel = (run.travel_m - closed).abs() / closed;
                worst = worst.max(rel);
                n += 1;
                check(rel <= 1e-3, || format!("v {v} a {a} t_r {t_r}: {} vs {closed}", run.travel_m))?;
            }
        }
    }
    Ok(format!("{n} combinations, worst relative error {worst:.2e}"))
}

fn criterion_10() -> Verdict {
    let detector = default_detectors().into_iter().next().ok_or("no detectors")?;
    let feed = LatencyModel::constant(68.0);
    let modes = [
        ExecutionMode::Local { detector: detector.clone() },
        ExecutionMode::Cloud { detector: detector.clone(), latency: LatencyModel::constant(68.0) },
    ];
    for mode in &modes {
        let blind = run_red_light(&ScenarioConfig::new(ScenarioKind::red_light(false)), mode, &feed).map_err(|e| e.to_string())?;
        check(blind.collided, || format!("{:?} avoided the red-light runner without the feed", mode.kind()))?;
    }
    let shared = run_red_light(&ScenarioConfig::new(ScenarioKind::red_light(true)), &modes[0], &feed).map_err(|e| e.to_string())?;
    check(!shared.collided, || "collision despite the shared feed".to_owned())?;

    let cfg = ScenarioConfig::new(ScenarioKind::jaywalk());
    let late = run_jaywalk(&cfg, false).map_err(|e| e.to_string())?;
    let cached = run_jaywalk(&cfg, true).map_err(|e| e.to_string())?;
    check(late.collided, || "500 ms local plan avoided the pedestrian".to_owned())?;
    check(!cached.collided, || "400 ms contingency plan collided".to_owned())?;
    Ok(format!(
        "red light: blind collides, feed stops {:.1} m short; jaywalk: 500 ms collides, 400 ms swerves with {:.1} m to spare",
        shared.min_gap_m, cached.min_gap_m
    ))
}
