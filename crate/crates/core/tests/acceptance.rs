//! Acceptance suite. Each criterion runs under its time budget and prints
//! one PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use agcorrect::agent::{run_react, CorrectionRecord, ReasonerPolicy, RemoteConfig, RemotePolicy, RulePolicy, ToolOutput};
use agcorrect::baseline::{predict, BaselineSource};
use agcorrect::evaluation::{ablate, metrics, AblationMode};
use agcorrect::features::{build_kg, profile_dataset, ProfileKind};
use agcorrect::ingest::{difference_cumulative, load_long_csv, CsvSchema, Entity, EntityCollection, Observation, Split};
use agcorrect::memory::{jump_distribution, JumpDistribution, PositionBiasTable};
use agcorrect::runner::{audit_leakage, load_dataset, run_season, RunConfig, RunReport};
use agcorrect::scalar::percentile;
use agcorrect::selection::dtw_distance;
use agcorrect::toolkit::{
    apply_correction, detect_phase, evaluate_trajectory, learn_bias, validate_range, verify_correction, AppliedRule,
    BiasEstimate, CorrectionInputs, Phase, PhaseEstimate, PhaseInputs, SafetyStatus, ToolName, Verdict,
};
use agcorrect::{Error, Real, Result};
use common::{fixture, spiked_config, Harness, StubMode, StubServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: Real = 1e-9;

fn close(a: Real, b: Real, what: &str) {
    assert!((a - b).abs() <= TOL, "{what}: {a} != {b}");
}

fn phase_inputs<'a>(history: &'a [Real], y_hat: Real, lookahead: Real, profile: ProfileKind) -> PhaseInputs<'a, Real> {
    PhaseInputs {
        recent: &history[history.len().saturating_sub(4)..],
        y_hat,
        horizon: 2,
        lookahead,
        history,
        profile,
        zero_floor: 1e-6,
        near_zero: 1e-3,
    }
}

fn criterion_1() {
    // Bias multiplier and its trailing-zero decay.
    let b = learn_bias(&[10.0, 10.0, 10.0], &[12.0, 12.0, 12.0], 0).unwrap();
    assert!(b.directional);
    close(b.gamma, 12.0 / 10.0, "gamma");
    close(b.gamma_decayed, 12.0 / 10.0, "gamma'");
    let b = learn_bias(&[10.0, 10.0, 10.0], &[12.0, 12.0, 12.0], 1).unwrap();
    close(b.gamma_decayed, 1.0 + 0.2 * 0.5, "gamma' k=1");
    let b = learn_bias(&[10.0, 10.0], &[12.0, 8.0], 0).unwrap();
    assert!(!b.directional);
    close(b.gamma_decayed, 1.0, "symmetric errors");

    // Phase detection constants.
    let zv = ProfileKind::ZeroValley;
    let p = detect_phase(&phase_inputs(&[0.0; 8], 0.3, 0.0, zv));
    assert_eq!(p.phase, Phase::FalseStart);
    close(p.y_phase, 0.0, "false start y_phase");
    close(p.confidence, 0.85, "false start c");
    let p = detect_phase(&phase_inputs(&[0.0; 8], 0.3, 0.3, zv));
    assert_eq!(p.phase, Phase::PreSeason);
    close(p.confidence, 0.90, "pre-season c");
    let p = detect_phase(&phase_inputs(&[0.0, 20.0, 50.0, 0.0, 0.0], 4.0, 0.0, zv));
    assert_eq!(p.phase, Phase::Ended);
    close(p.confidence, (0.75 + 0.05 * 2.0f64).min(0.95), "ended c k=2");
    let p = detect_phase(&phase_inputs(&[50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 4.0, 0.0, zv));
    close(p.confidence, 0.95, "ended c cap");
    let p = detect_phase(&phase_inputs(&[0.0, 0.0, 6.0], 4.0, 4.0, zv));
    assert_eq!(p.phase, Phase::Early);
    close(p.y_phase, 6.0, "early y_phase");
    close(p.confidence, 0.35, "early c");
    let history = [5.0, 10.0, 20.0, 40.0, 80.0, 100.0, 70.0, 50.0];
    let p = detect_phase(&phase_inputs(&history, 60.0, 40.0, zv));
    assert_eq!(p.phase, Phase::Declining);
    let delta = (50.0f64 / 100.0).powf(1.0 / 2.0);
    close(p.decay_rate.unwrap(), delta, "decay rate");
    close(p.y_phase, 50.0 * delta * delta, "declining y_phase");
    close(p.confidence, (0.4 + 0.1 * 8.0f64).min(0.85), "declining c");
    let p = detect_phase(&phase_inputs(&[0.0, 50.0, 95.0, 100.0], 120.0, 110.0, zv));
    assert_eq!(p.phase, Phase::Peak);
    close(p.confidence, 0.40, "peak c");
    let p = detect_phase(&phase_inputs(&[0.0, 100.0, 40.0, 60.0], 70.0, 80.0, zv));
    assert_eq!(p.phase, Phase::Ramping);
    close(p.confidence, 0.0, "ramping c");
    let p = detect_phase(&phase_inputs(&[10.0, 10.0, 12.0, 14.0], 15.0, 15.0, ProfileKind::PositiveFloor));
    assert_eq!(p.phase, Phase::TrendingUp);
    close(p.y_phase, 15.0, "continuous y_phase");
    let change = ((12.0 + 14.0) / 2.0 - 10.0) / 10.0;
    close(change, 0.30, "half-window change");
    close(p.confidence, 0.75f64.min(change / 0.4), "continuous c");

    // Range validation with buffer 0.5.
    let samples = [-0.3, -0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5];
    let r = validate_range(300.0, 100.0, &samples);
    assert!(!r.in_range);
    close(r.clamped_value.unwrap(), 100.0 * (1.0 + 0.5), "upper clamp");
    let r = validate_range(120.0, 100.0, &samples);
    assert!(r.in_range);
    let r = validate_range(10.0, 100.0, &samples);
    close(r.clamped_value.unwrap(), 100.0 * (1.0 - 0.3), "lower clamp");
    assert!(validate_range(900.0, 100.0, &samples[..2]).in_range);

    // Correction cascade.
    let phase = |c: Real, y: Real| PhaseEstimate {
        phase: Phase::Declining,
        y_phase: y,
        confidence: c,
        decay_rate: None,
        active_window: None,
        trailing_zeros: 0,
        rule: String::new(),
    };
    let breach = validate_range(300.0, 100.0, &samples);
    let c = apply_correction(&CorrectionInputs {
        y_raw: 300.0,
        phase: Some(&phase(0.9, 0.0)),
        bias: None,
        range: Some(&breach),
        position_bias: 0.0,
    });
    assert_eq!(c.rule, AppliedRule::PhysicalLimit);
    close(c.value, 150.0, "tier 1");
    let c = apply_correction(&CorrectionInputs {
        y_raw: 10.0,
        phase: Some(&phase(0.8, 0.0)),
        bias: None,
        range: None,
        position_bias: 0.0,
    });
    assert_eq!(c.rule, AppliedRule::PhaseBlend);
    close(c.value, 0.8 * 0.0 + 0.2 * 10.0, "tier 2");
    let bias = BiasEstimate { gamma: 1.2, gamma_decayed: 1.2, directional: true, ..BiasEstimate::neutral() };
    let c = apply_correction(&CorrectionInputs {
        y_raw: 10.0,
        phase: Some(&phase(0.3, 0.0)),
        bias: Some(&bias),
        range: None,
        position_bias: 0.0,
    });
    assert_eq!(c.rule, AppliedRule::Statistical);
    close(c.value, 10.0 * 1.2, "tier 3");

    // Trajectory band.
    let t = evaluate_trajectory(15.0, 15.0, &[10.0, 12.0, 14.0], None, 2);
    let w = (10.0 + 12.0 + 14.0) / 3.0;
    let slope = (14.0 - 10.0) / (2.0 * w);
    close(t.slope, 1.0 / 6.0, "slope");
    close(t.lo, 0.7 * 14.0f64.min(14.0 * (1.0 + slope)), "lo");
    close(t.hi, 1.3 * 14.0f64.max(14.0 * (1.0 + slope)), "hi");
    close(t.lo, 9.8, "lo value");
    close(t.hi, 21.233333333333333, "hi value");
    assert_eq!(t.verdict, Verdict::Consistent);
    assert_eq!(evaluate_trajectory(30.0, 15.0, &[10.0, 12.0, 14.0], None, 2).verdict, Verdict::TrendContradiction);

    // Memory statistics, metrics, DTW and the builtin baseline.
    let mut table = PositionBiasTable::default();
    for actual in [120.0, 130.0, 125.0] {
        table.record(20, 0.5, 100.0, actual);
    }
    close(table.position_bias(20, 0.5), 0.25, "bucket median");
    let j = jump_distribution([&[1.0, 0.5, 0.5, 1.0][..]]).unwrap();
    close(percentile(&[2.0, 0.5, 1.0], 50.0).unwrap(), 1.0, "midpoint");
    close(j.p01, 0.5 + (1.0 - 0.5) * 0.02, "jump p01");
    let m = metrics([(1.0, 0.0), (2.0, 1.0), (3.0, 2.0)], 2.0).unwrap();
    close(m.mae, 1.0, "mae");
    close(m.rmse, 1.0, "rmse");
    close(m.mase, 0.5, "mase");
    let m = metrics([(1.0, 1.0), (3.0, 1.0)], 1.0).unwrap();
    close(m.rmse, 2.0f64.sqrt(), "rmse sqrt2");
    close(dtw_distance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 3.0f64.sqrt(), "dtw");
    let entity = Entity {
        entity_id: "e".into(),
        metadata: Default::default(),
        observations: [2.0, 4.0, 6.0, 8.0, 0.0, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| Observation { week_index: i as u32, iso_week: i as u32 + 1, year: 2023, yield_value: v, filled: false })
            .collect(),
        split: Split::Test,
    };
    let raw = predict(&entity, 5, 2, BaselineSource::Builtin, &[]).unwrap();
    close(raw.q50, 5.0, "builtin q50");
    close(raw.q10, 4.0, "builtin q10");
    close(raw.q90, 6.0, "builtin q90");
}

/// Plain recursive DTW with Euclidean step cost.
fn naive_dtw(a: &[Real], b: &[Real]) -> Real {
    fn go(a: &[Real], b: &[Real], i: usize, j: usize) -> Real {
        let d = (a[i] - b[j]).powi(2);
        match (i, j) {
            (0, 0) => d,
            (0, _) => d + go(a, b, 0, j - 1),
            (_, 0) => d + go(a, b, i - 1, 0),
            _ => d + go(a, b, i - 1, j - 1).min(go(a, b, i - 1, j)).min(go(a, b, i, j - 1)),
        }
    }
    go(a, b, a.len() - 1, b.len() - 1).sqrt()
}

fn criterion_2() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let series = |rng: &mut ChaCha8Rng| -> Vec<Real> {
        let n = rng.gen_range(1..=6);
        (0..n).map(|_| rng.gen_range(0..=2) as Real).collect()
    };
    for _ in 0..500 {
        let (a, b) = (series(&mut rng), series(&mut rng));
        assert_eq!(dtw_distance(&a, &b).unwrap(), naive_dtw(&a, &b), "{a:?} vs {b:?}");
    }
}

fn random_phase(rng: &mut ChaCha8Rng) -> Option<PhaseEstimate<Real>> {
    const PHASES: [Phase; 10] = [
        Phase::PreSeason,
        Phase::FalseStart,
        Phase::Early,
        Phase::Ramping,
        Phase::Peak,
        Phase::Declining,
        Phase::Ended,
        Phase::TrendingUp,
        Phase::TrendingDown,
        Phase::Stable,
    ];
    rng.gen_bool(0.9).then(|| PhaseEstimate {
        phase: PHASES[rng.gen_range(0..PHASES.len())],
        y_phase: rng.gen_range(0.0..2.0),
        confidence: if rng.gen_bool(0.5) { rng.gen_range(0.7..1.0) } else { rng.gen_range(0.0..1.0) },
        decay_rate: None,
        active_window: None,
        trailing_zeros: 0,
        rule: String::new(),
    })
}

fn criterion_3() {
    let jumps = JumpDistribution { p01: 0.2, p05: 0.5, p10: 0.7, p90: 1.6, p95: 2.0, p99: 4.0, samples: 500 };
    let hist_max = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut warned = 0;
    for _ in 0..10_000 {
        let y_raw: Real = if rng.gen_bool(0.05) { 0.0 } else { rng.gen_range(0.0..2.0) };
        let y_star: Real = match rng.gen_range(0..4) {
            0 => rng.gen_range(-0.5..5.0),
            1 => y_raw * rng.gen_range(0.0..6.0),
            2 => y_raw * rng.gen_range(0.2..0.5),
            _ => y_raw * rng.gen_range(2.0..4.0),
        };
        let phase = random_phase(&mut rng);
        let profile = if rng.gen_bool(0.5) { ProfileKind::ZeroValley } else { ProfileKind::PositiveFloor };
        let v = verify_correction(y_star, y_raw, &jumps, phase.as_ref(), profile, hist_max);

        assert!(v.final_value <= 3.0 * hist_max, "{y_star} -> {}", v.final_value);
        let dormant = profile == ProfileKind::ZeroValley
            && phase.as_ref().is_some_and(|p| p.phase.is_dormant() && p.confidence >= 0.75);
        if dormant && y_star > 0.0 {
            assert!(v.final_value <= 0.0, "dormant {y_star} -> {}", v.final_value);
        }
        let r = if y_raw == 0.0 { 1.0 } else { y_star / y_raw };
        let warn_zone = (jumps.p01..=jumps.p05).contains(&r) || (jumps.p95..=jumps.p99).contains(&r);
        let absolute = y_star > 3.0 * hist_max || (dormant && y_star > 0.0) || y_star < 0.0;
        if warn_zone && !absolute {
            warned += 1;
            assert_eq!(v.status, SafetyStatus::Warn);
            assert_eq!(v.final_value, y_star, "warn zone modified");
        }
    }
    assert!(warned > 500, "too few warn-zone samples: {warned}");
}

/// Replies with random tool lists, sometimes garbage or NONE.
struct RandomPolicy {
    rng: ChaCha8Rng,
    allow_apply: bool,
}

impl ReasonerPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, _prompt: &str) -> Result<String> {
        if self.rng.gen_bool(0.1) {
            return Ok("TOOLS: NONE".into());
        }
        if self.rng.gen_bool(0.05) {
            return Ok("no idea".into());
        }
        let mut names: Vec<String> = Vec::new();
        for _ in 0..self.rng.gen_range(1..=5) {
            let t = ToolName::ALL[self.rng.gen_range(0..ToolName::ALL.len())];
            if t == ToolName::ApplyCorrection && !self.allow_apply {
                continue;
            }
            names.push(if self.rng.gen_bool(0.05) { "bogus_tool".into() } else { t.to_string() });
        }
        let mut reply = format!("REASON: fuzz\nTOOLS: {}", names.join(", "));
        if self.rng.gen_bool(0.3) {
            reply.push_str(&format!("\nWEIGHT: {:.2}", self.rng.gen_range(0.0..1.0)));
        }
        Ok(reply)
    }
}

fn check_loop_shape(r: &CorrectionRecord) {
    assert!(r.iterations.len() <= 10, "{} iterations", r.iterations.len());
    assert!(r.adjustments <= 2);
    let adjusts = r.events().filter(|e| matches!(e.output, ToolOutput::AdjustCorrection(_))).count();
    assert!(adjusts <= 2);
    for it in &r.iterations {
        let ev = &it.events;
        for (i, e) in ev.iter().enumerate() {
            if matches!(e.output, ToolOutput::ApplyCorrection(_) | ToolOutput::AdjustCorrection(_)) {
                let next = ev.get(i + 1).map(|n| &n.output);
                assert!(matches!(next, Some(ToolOutput::VerifyCorrection(_))), "correction not verified");
            }
        }
    }
    let applied = r.events().any(|e| matches!(e.output, ToolOutput::ApplyCorrection(_)));
    if !applied {
        assert_eq!(r.y_final.to_bits(), r.y_raw.to_bits(), "passthrough violated");
        assert_eq!(r.applied_rule, AppliedRule::None);
    }
}

fn criterion_4() {
    let h = Harness::new();
    let ids = h.test_ids();
    let env = h.env();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut applied = 0;
    for run in 0..1000 {
        let id = &ids[rng.gen_range(0..ids.len())];
        let week = rng.gen_range(5..52);
        let state = h.state(id, week);
        let mut policy = RandomPolicy { rng: ChaCha8Rng::seed_from_u64(run), allow_apply: run % 4 != 0 };
        let r = run_react(&state, &mut policy, &env);
        check_loop_shape(&r);
        if r.events().any(|e| matches!(e.output, ToolOutput::ApplyCorrection(_))) {
            applied += 1;
        }
    }
    assert!(applied > 300, "fuzzing rarely corrected: {applied}");
}

fn criterion_5() {
    let report = run_season(&spiked_config()).unwrap();
    let m = report.summary.metrics.clone().unwrap();
    let reduction = 1.0 - m.corrected.mae / m.raw.mae;
    println!("    raw MAE {:.4}, corrected MAE {:.4}, reduction {:.1}%", m.raw.mae, m.corrected.mae, 100.0 * reduction);
    assert!(reduction >= 0.30, "MAE reduction {reduction:.3} < 0.30");
}

fn criterion_6() {
    let cfg = spiked_config();
    let collection = load_dataset(&cfg.dataset).unwrap();
    let loo = ablate(&cfg, &collection, AblationMode::LeaveOneOut).unwrap();
    let only = ablate(&cfg, &collection, AblationMode::OnlyOne).unwrap();
    assert_eq!(loo.rows.len(), 6);
    assert_eq!(only.rows.len(), 6);
    assert_eq!(loo.baseline, only.baseline);
    let no_phase = loo.row("-detect_phase").unwrap().metrics.mae;
    println!("    full MAE {:.4}, -detect_phase MAE {:.4} ({:.2}x)", loo.full.mae, no_phase, no_phase / loo.full.mae);
    assert!(no_phase >= 1.5 * loo.full.mae);
    for cond in ["only find_similar", "only verify_correction"] {
        let mae = only.row(cond).unwrap().metrics.mae;
        let rel = mae / only.baseline.mae - 1.0;
        println!("    {cond} MAE {mae:.4} ({:+.1}% vs baseline)", 100.0 * rel);
        assert!(rel.abs() <= 0.05, "{cond} drifted {rel:.3} from baseline");
    }
}

fn usda_schema() -> CsvSchema {
    CsvSchema::from_pairs("entity=State,year=Year,week=Period,yield=Value,cumulative=true,fill_year=true").unwrap()
}

fn usda_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.dataset.path = Some(fixture("quickstats_corn_harvest.csv"));
    cfg.dataset.schema = usda_schema();
    cfg
}

fn criterion_7() {
    let dir = tempfile::tempdir().unwrap();
    for (name, cfg) in [("synthetic", spiked_config()), ("usda", usda_config())] {
        let mut cfg = cfg;
        cfg.output.dir = Some(dir.path().join(name));
        run_season(&cfg).unwrap();
        let start = Instant::now();
        let stored = RunReport::load(&dir.path().join(name)).unwrap();
        audit_leakage(&stored).unwrap();
        assert!(start.elapsed() < Duration::from_secs(5), "audit of {name} took {:?}", start.elapsed());
        for r in &stored.records {
            let cutoff = r.target_week - r.horizon;
            assert!(r.provenance.context_weeks.iter().all(|w| *w <= cutoff));
            assert!(r.provenance.actuals_through.is_none_or(|w| w <= cutoff));
            assert!(r.provenance.archive_through.is_none_or(|w| w < r.target_week));
        }
        let mut tampered = stored.clone();
        let r = tampered.records.iter_mut().find(|r| r.eligible).unwrap();
        r.provenance.bias_through = Some(r.target_week - 1);
        assert!(matches!(audit_leakage(&tampered), Err(Error::Leakage(_))));
    }
}

fn criterion_8() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let mut total = 0.0;
        let cumulative: Vec<Observation> = (0..rng.gen_range(1..40))
            .map(|i| {
                total += rng.gen_range(0..50) as Real * 0.25;
                Observation { week_index: i, iso_week: i + 1, year: 2022, yield_value: total, filled: false }
            })
            .collect();
        let diffs = difference_cumulative(&cumulative);
        let mut acc = 0.0;
        for (d, c) in diffs.iter().zip(&cumulative) {
            acc += d.yield_value;
            assert_eq!(acc, c.yield_value);
        }
    }

    let collection: EntityCollection = load_long_csv(&fixture("quickstats_corn_harvest.csv"), &usda_schema()).unwrap();
    assert_eq!(collection.train().count(), 2);
    assert_eq!(collection.test().count(), 2);
    let kg = build_kg(collection.train()).unwrap();
    let profile = profile_dataset(&kg, &mut RulePolicy, 7);
    assert_eq!(profile.kind, ProfileKind::ZeroValley);
    let report = run_season(&usda_config()).unwrap();
    assert_eq!(report.summary.profile.kind, ProfileKind::ZeroValley);
    assert_eq!(report.records.len(), 2 * (52 - 5));
    assert!(report.summary.metrics.is_some());
}

fn report_bytes(report: &RunReport) -> Vec<u8> {
    let mut b = report.records_jsonl().unwrap();
    b.extend(report.summary_json().unwrap());
    b
}

fn criterion_9() {
    for cfg in [spiked_config(), usda_config()] {
        let a = report_bytes(&run_season(&cfg).unwrap());
        let b = report_bytes(&run_season(&cfg).unwrap());
        assert!(a == b, "reports differ");
    }
}

fn criterion_10() {
    let prompt = std::fs::read_to_string(fixture("remote/prompt.txt")).unwrap();
    let expected = std::fs::read_to_string(fixture("remote/request.json")).unwrap();
    let response = std::fs::read_to_string(fixture("remote/response.json")).unwrap();
    let server = StubServer::start(StubMode::Reply(response));
    let mut policy = RemotePolicy::new(RemoteConfig { endpoint: server.url.clone(), ..RemoteConfig::default() }).unwrap();
    let reply = policy.decide(&prompt).unwrap();
    assert_eq!(reply, "REASON: the raw value sits before onset.\nTOOLS: detect_phase");
    let seen = server.requests();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].as_bytes(), expected.as_bytes(), "request body differs from the recorded exchange");

    let hang = StubServer::start(StubMode::Hang);
    let config = RemoteConfig { endpoint: hang.url.clone(), timeout_ms: 300, backoff_ms: 20, ..RemoteConfig::default() };
    let mut remote = RemotePolicy::new(config).unwrap();
    let h = Harness::new();
    let state = h.state("test-000", 20);
    let record = run_react(&state, &mut remote, &h.env());
    hang.settle();
    assert_eq!(remote.requests_sent(), 3);
    assert_eq!(*hang.connections.lock().unwrap(), 3, "expected one request and two retries");
    assert!(record.fallback.is_some());
    assert_eq!(record.iterations[0].policy, "rule (fallback)");
    let rule = run_react(&state, &mut RulePolicy, &h.env());
    assert_eq!(record.y_final, rule.y_final);
    let tools: BTreeSet<_> = record.tools_run();
    assert_eq!(tools, rule.tools_run());
}

fn main() {
    let criteria: [(&str, Duration, fn()); 10] = [
        ("formula conformance", Duration::from_secs(1), criterion_1),
        ("DTW oracle equivalence", Duration::from_secs(5), criterion_2),
        ("safety guarantees", Duration::from_secs(10), criterion_3),
        ("loop-shape properties", Duration::from_secs(30), criterion_4),
        ("directional end-to-end", Duration::from_secs(60), criterion_5),
        ("ablation direction", Duration::from_secs(300), criterion_6),
        ("temporal-leakage audit", Duration::from_secs(60), criterion_7),
        ("USDA-shape ingestion", Duration::from_secs(30), criterion_8),
        ("determinism", Duration::from_secs(120), criterion_9),
        ("remote-policy contract", Duration::from_secs(30), criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f));
        let elapsed = start.elapsed();
        let status = match (&outcome, elapsed <= budget) {
            (Ok(()), true) => "PASS",
            _ => "FAIL",
        };
        if status == "FAIL" {
            failed += 1;
        }
        let note = match outcome {
            Err(_) => " (assertion failed)".to_string(),
            Ok(()) if elapsed > budget => format!(" (over budget {budget:?})"),
            Ok(()) => String::new(),
        };
        println!("criterion {:>2}: {status} {name} in {:.2?}{note}", i + 1, elapsed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
