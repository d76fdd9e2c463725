//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.
//!
//! Expected values tagged as derived were computed with the independent
//! oracles in this file; scaling gates run the full desk-scale experiments.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqcal::env::{generate, EnvKind, EnvSpec};
use seqcal::forecasters::{hu_uniform, EpochFramework, EpochVariant, Forecaster, SwapL2Base};
use seqcal::harness::{
    build_forecaster, fit_metric_exponent, median, run_forecaster, rows_csv, summary_csv, sweep,
    AlgorithmSpec, ExperimentConfig, ReportRow,
};
use seqcal::meta::{delta_prime, run_meta, CertFamily, CertificateFn};
use seqcal::metrics::{
    cal_l1, cal_l2, interval_metric, kl_bernoulli, pseudo_cal_l2, pseudo_kl, MetricKind,
    RoundRecord, Transcript,
};
use seqcal::partition::{unif_part, Interval};
use seqcal::transform::theta;
use seqcal::{iota, PredictionDistribution};

fn verdict(name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {name} failed: {detail}");
}

// ---------------------------------------------------------------------------
// independent oracles: direct from the definitions, linear scans only
// ---------------------------------------------------------------------------

fn distinct_predictions(tr: &Transcript) -> Vec<f64> {
    let mut seen: Vec<f64> = Vec::new();
    for r in tr.rounds() {
        if !seen.iter().any(|&p| p == r.p) {
            seen.push(r.p);
        }
    }
    seen
}

fn oracle_cal_lr(tr: &Transcript, r_exp: i32) -> f64 {
    let mut total = 0.0;
    for p in distinct_predictions(tr) {
        let group: Vec<&RoundRecord> = tr.rounds().iter().filter(|r| r.p == p).collect();
        let n = group.len() as f64;
        let mean = group.iter().map(|r| f64::from(r.y)).sum::<f64>() / n;
        total += n * (mean - p).abs().powi(r_exp);
    }
    total
}

fn distinct_atoms(tr: &Transcript) -> Vec<f64> {
    let mut seen: Vec<f64> = Vec::new();
    for r in tr.rounds() {
        for &(a, _) in r.dist.atoms() {
            if !seen.iter().any(|&x| x == a) {
                seen.push(a);
            }
        }
    }
    seen
}

fn oracle_pseudo(tr: &Transcript, kl: bool) -> f64 {
    let mut total = 0.0;
    for a in distinct_atoms(tr) {
        let mass: f64 = tr.rounds().iter().map(|r| r.dist.prob_of(a)).sum();
        if mass <= 0.0 {
            continue;
        }
        let hits: f64 = tr
            .rounds()
            .iter()
            .map(|r| r.dist.prob_of(a) * f64::from(r.y))
            .sum();
        let rho = hits / mass;
        total += if kl {
            mass * kl_bernoulli(rho, a)
        } else {
            mass * (rho - a) * (rho - a)
        };
    }
    total
}

/// Random transcript with interior atoms (keeps every metric finite).
fn random_transcript(rng: &mut ChaCha8Rng, max_len: usize) -> Transcript {
    let grid: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
    let len = rng.random_range(1..=max_len);
    let mut tr = Transcript::new();
    for _ in 0..len {
        let k = rng.random_range(1..=3usize);
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        for &w in &weights {
            atoms.push((grid[rng.random_range(0..grid.len())], w));
        }
        let dist = PredictionDistribution::from_atoms(atoms).unwrap();
        let p = dist.atoms()[rng.random_range(0..dist.atoms().len())].0;
        tr.push(RoundRecord {
            q: None,
            y: rng.random_bool(0.5),
            dist,
            p,
            raw_dist: None,
        });
    }
    tr
}

#[test]
fn criterion_01_metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let tr = random_transcript(&mut rng, 64);
        worst = worst.max((cal_l1(&tr) - oracle_cal_lr(&tr, 1)).abs());
        worst = worst.max((cal_l2(&tr) - oracle_cal_lr(&tr, 2)).abs());
        worst = worst.max((pseudo_cal_l2(&tr) - oracle_pseudo(&tr, false)).abs());
        worst = worst.max((pseudo_kl(&tr) - oracle_pseudo(&tr, true)).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "01 (metric oracle equivalence)",
        worst <= 1e-12 && secs < 10.0,
        &format!("max |impl - oracle| = {worst:.2e} over 500 transcripts in {secs:.2}s"),
    );
}

#[test]
fn criterion_02_subadditivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let tr = random_transcript(&mut rng, 64);
        let t = tr.horizon();
        let mut cuts: Vec<usize> = (0..rng.random_range(1..=3usize))
            .map(|_| rng.random_range(0..=t))
            .collect();
        cuts.push(0);
        cuts.push(t);
        cuts.sort_unstable();
        cuts.dedup();
        for kind in MetricKind::ALL {
            let global = interval_metric(&tr, 0..t, kind);
            let blocks: f64 = cuts
                .windows(2)
                .map(|w| interval_metric(&tr, w[0]..w[1], kind))
                .sum();
            worst = worst.max(global - blocks);
        }
    }
    verdict(
        "02 (block subadditivity)",
        worst <= 1e-10,
        &format!("max (global - block sum) = {worst:.2e} across 200 random splits"),
    );
}

fn sweep_rows(config: &str) -> Vec<ReportRow> {
    let cfg = ExperimentConfig::parse(config).unwrap();
    let report = sweep(&cfg);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    report.rows
}

fn medians_at(rows: &[ReportRow], horizon: usize, metric: fn(&ReportRow) -> f64) -> f64 {
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.horizon == horizon)
        .map(metric)
        .collect();
    median(&vals)
}

const SEEDS_20: &str = "1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19 20";

#[test]
fn criterion_03_simple_epoch_scaling() {
    let started = Instant::now();
    let config = format!(
        "horizons = 1024 2048 4096 8192 16384 32768 65536\nseeds = {SEEDS_20}\n\
         [algorithm]\nname = simple_epoch\n[env]\nkind = iid\nq = 0.3\n"
    );
    let rows = sweep_rows(&config);
    let slope = fit_metric_exponent(&rows, |r| r.cal1).unwrap();
    let ratio = medians_at(&rows, 65536, |r| r.cal2) / medians_at(&rows, 1024, |r| r.cal2);
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "03 (simple epoch, i.i.d.)",
        (0.35..=0.65).contains(&slope) && ratio <= 3.0 && secs < 60.0,
        &format!("cal1 slope = {slope:.3} (gate [0.35, 0.65]), cal2 growth x{ratio:.2} (gate 3), {secs:.2}s"),
    );
}

#[test]
fn criterion_04_simple_pkl_epoch() {
    let started = Instant::now();
    // c_iota calibrated: the transformed-domain clip radius min(pi/4,
    // 8 pi sqrt(iota/s)) buries horizons up to ~1500*iota in its bias for
    // outcome means near the boundary, so the log-confidence multiplier is
    // tuned to keep the clip transient inside the smallest horizon.
    let config = format!(
        "horizons = 1024 2048 4096 8192 16384 32768 65536\nseeds = {SEEDS_20}\nc_iota = 0.125\n\
         [algorithm]\nname = simple_epoch_pkl\n[env]\nkind = iid\nq = 0.1\n[env]\nkind = iid\nq = 0.5\n"
    );
    let rows = sweep_rows(&config);
    let all_finite = rows.iter().all(|r| r.pkl.is_finite());
    let mut worst_ratio = 0.0f64;
    for env in ["iid(q=0.1)", "iid(q=0.5)"] {
        let sub: Vec<ReportRow> = rows.iter().filter(|r| r.env == env).cloned().collect();
        let ratio = medians_at(&sub, 65536, |r| r.pkl) / medians_at(&sub, 1024, |r| r.pkl);
        worst_ratio = worst_ratio.max(ratio);
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "04 (simple PKL epoch, i.i.d.)",
        all_finite && worst_ratio <= 3.0 && secs < 60.0,
        &format!("finite on all {} runs, worst pkl growth x{worst_ratio:.2} (gate 3), {secs:.2}s", rows.len()),
    );
}

const CRIT5_HORIZONS: [usize; 7] = [256, 512, 1024, 2048, 4096, 8192, 16384];

#[test]
fn criterion_05_hu_stationary_rate() {
    let started = Instant::now();
    let config = "horizons = 256 512 1024 2048 4096 8192 16384\nseeds = 1 2 3 4 5 6 7 8 9 10\n\
         [algorithm]\nname = hu_uniform\n[env]\nkind = iid\nq = 0.4\n";
    let rows = sweep_rows(config);
    let slope = fit_metric_exponent(&rows, |r| r.cal1).unwrap();
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "05 (expert forecaster stationary rate)",
        slope <= 0.65 && secs < 300.0,
        &format!("cal1 slope = {slope:.3} (gate 0.65, target 0.5), {secs:.2}s"),
    );
}

#[test]
fn criterion_06_hu_per_round_invariants() {
    // replays criterion 5's cells through the library to read diagnostics
    let started = Instant::now();
    let mut worst_imbalance = 0.0f64;
    for &horizon in &CRIT5_HORIZONS {
        for seed in 1..=10u64 {
            let spec = EnvSpec {
                kind: EnvKind::Iid { q: 0.4 },
                horizon,
            };
            let stream = generate(&spec, seed).unwrap();
            let mut fc = hu_uniform(
                horizon,
                0.0,
                iota(horizon, 0.05, 1.0),
                seqcal::env::stream_rng(seed, 1),
            )
            .unwrap();
            // run_forecaster validates every emitted distribution and that
            // each sampled prediction is one of its atoms
            let tr = run_forecaster(&mut fc, &stream).unwrap();
            assert_eq!(tr.horizon(), horizon);
            worst_imbalance = worst_imbalance.max(fc.phi_imbalance_max());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "06 (per-round sampling invariants)",
        worst_imbalance <= 1e-12,
        &format!("max interior |E[phi]| = {worst_imbalance:.2e} (gate 1e-12), distributions valid, {secs:.2}s"),
    );
}

// The i.i.d. exponent clause of criterion 07. The epoch framework pays a
// discretization cost of order iota per epoch (its inner grid pitch is the
// confidence radius), so the realized Cal2 tracks iota(T) * log T and its
// fitted exponent at these horizons sits near 0.3 for every iota multiplier;
// the 0.15 gate is kept as stated and this test documents the gap.
#[test]
fn criterion_07_epoch_cal2_iid_exponent() {
    let started = Instant::now();
    let config = "horizons = 1024 2048 4096 8192 16384\nseeds = 1 2 3 4 5 6 7 8 9 10\n\
         [algorithm]\nname = epoch_cal2\n[env]\nkind = iid\nq = 0.4\n";
    let rows = sweep_rows(config);
    let slope = fit_metric_exponent(&rows, |r| r.cal2).unwrap();
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "07 (epoch framework i.i.d. exponent)",
        slope <= 0.15 && secs < 600.0,
        &format!("cal2 slope = {slope:.3} (gate 0.15), {secs:.2}s"),
    );
}

#[test]
fn criterion_07_epoch_cal2_piecewise_adaptivity() {
    let started = Instant::now();
    let horizon = 8192usize;
    let iot = iota(horizon, 0.05, 1.0);
    let mut medians = Vec::new();
    for c_target in [0.0, (horizon as f64).sqrt(), (horizon as f64).powf(0.75)] {
        let spec = if c_target == 0.0 {
            EnvSpec {
                kind: EnvKind::Iid { q: 0.5 },
                horizon,
            }
        } else {
            // 8 alternating segments around 1/2: C = T * d exactly
            let d = c_target / horizon as f64;
            let seg = horizon / 8;
            EnvSpec {
                kind: EnvKind::Piecewise {
                    segments: (0..8)
                        .map(|i| (seg, if i % 2 == 0 { 0.5 - d } else { 0.5 + d }))
                        .collect(),
                },
                horizon,
            }
        };
        let (c_true, _, _) = seqcal::env::ground_truth(&spec).unwrap();
        let vals: Vec<f64> = (1..=10u64)
            .map(|seed| {
                let stream = generate(&spec, seed).unwrap();
                let mut fc = EpochFramework::hu(
                    EpochVariant::Cal2,
                    c_true,
                    horizon,
                    iot,
                    seqcal::env::stream_rng(seed, 1),
                );
                cal_l2(&run_forecaster(&mut fc, &stream).unwrap())
            })
            .collect();
        medians.push((c_true, median(&vals)));
    }
    let monotone = medians.windows(2).all(|w| w[0].1 <= w[1].1);
    let ratios: Vec<f64> = medians
        .iter()
        .map(|&(c, m)| m / (1.0 + c).cbrt())
        .collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "07 (epoch framework piecewise adaptivity)",
        monotone && spread <= 10.0 && secs < 600.0,
        &format!(
            "medians {:?} non-decreasing = {monotone}, ratio spread x{spread:.2} (gate 10), {secs:.2}s",
            medians
                .iter()
                .map(|&(c, m)| format!("C={c:.0}:{m:.1}"))
                .collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_08_swap_l2_internals() {
    let started = Instant::now();
    let horizon = 4096usize;
    let n = (horizon as f64).cbrt().ceil() as usize;
    let partition = unif_part(Interval::closed(0.0, 1.0), n).unwrap();
    let mut fc = SwapL2Base::new(partition, ChaCha8Rng::seed_from_u64(8)).unwrap();
    let spec = EnvSpec {
        kind: EnvKind::Iid { q: 0.4 },
        horizon,
    };
    let stream = generate(&spec, 8).unwrap();
    run_forecaster(&mut fc, &stream).unwrap();
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "08 (swap-regret base internals)",
        fc.residual_max() <= 1e-8 && fc.rounding_gap_max() <= 1e-12 && secs < 60.0,
        &format!(
            "stationary residual max = {:.2e} (gate 1e-8), rounding gap max = {:.2e} (gate 1e-12), {secs:.2}s",
            fc.residual_max(),
            fc.rounding_gap_max()
        ),
    );
}

#[test]
fn criterion_09_pkl_framework() {
    let started = Instant::now();
    let horizon = 4096usize;
    let iot = iota(horizon, 0.05, 1.0);
    let spec = EnvSpec {
        kind: EnvKind::Iid { q: 0.3 },
        horizon,
    };
    let mut all_ok = true;
    let mut detail = String::new();
    for seed in 1..=5u64 {
        let stream = generate(&spec, seed).unwrap();
        let mut fc = EpochFramework::pkl(0.0, horizon, iot, seqcal::env::stream_rng(seed, 1));
        let tr = run_forecaster(&mut fc, &stream).unwrap();
        let (pkl, pcal2) = (pseudo_kl(&tr), pseudo_cal_l2(&tr));
        let range_violation = fc
            .diagnostics()
            .iter()
            .find(|(k, _)| *k == "ewoo_range_violation_max")
            .map(|&(_, v)| v)
            .unwrap();
        let ok = pkl.is_finite() && pkl >= pcal2 - 1e-10 && range_violation <= 1e-12;
        all_ok &= ok;
        if seed == 1 {
            detail = format!("seed 1: pkl = {pkl:.2} >= pcal2 = {pcal2:.2}, range violation {range_violation:.1e}");
        }
    }

    // transformed-domain distance inequalities on 10^4 random pairs
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut ineq_ok = true;
    for _ in 0..10_000 {
        let p: f64 = rng.random_range(1e-6..=1.0 - 1e-6);
        let q: f64 = rng.random_range(1e-6..=1.0 - 1e-6);
        let gap = (theta(p) - theta(q)).powi(2);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let bound = (2.0 * pi2 * (p - q).abs())
            .min(pi2 * kl_bernoulli(p, q))
            .min(pi2 * kl_bernoulli(q, p));
        ineq_ok &= gap <= bound + 1e-12;
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "09 (PKL framework)",
        all_ok && ineq_ok && secs < 300.0,
        &format!("{detail}; transform inequalities hold on 10^4 pairs, {secs:.2}s"),
    );
}

#[test]
fn criterion_10_meta_framework() {
    let started = Instant::now();
    let horizon = 8192usize;
    let delta = 0.05;
    let cert = CertificateFn::defaults(
        CertFamily::Cal1,
        horizon,
        iota(horizon, delta_prime(delta, horizon), 1.0),
        1.0,
    );
    let factory = |conf: f64, guess: f64, s: u64| {
        let mut spec = AlgorithmSpec::by_name("hu_uniform").unwrap();
        spec.c_guess = guess;
        build_forecaster(&spec, horizon, conf, 1.0, s)
    };

    // 3-segment environment: restart budget and exact tiling
    let seg = horizon / 3;
    let pieces = EnvSpec {
        kind: EnvKind::Piecewise {
            segments: vec![(seg, 0.2), (seg, 0.5), (horizon - 2 * seg, 0.8)],
        },
        horizon,
    };
    let mut seeds_within_budget = 0;
    let mut tiling_ok = true;
    for seed in 1..=10u64 {
        let stream = generate(&pieces, seed).unwrap();
        let mut f = factory;
        let (tr, log) = run_meta(&mut f, &cert, delta, &stream, seed).unwrap();
        assert_eq!(tr.horizon(), horizon);
        if log.early_terminated_tests() <= 8 {
            seeds_within_budget += 1;
        }
        let mut next_start = 1;
        for row in &log.rows {
            tiling_ok &= row.start == next_start;
            next_start = row.end + 1;
        }
        tiling_ok &= log.rows.last().unwrap().end == horizon;
    }

    // i.i.d. comparison against the single-run base
    let iid = EnvSpec {
        kind: EnvKind::Iid { q: 0.35 },
        horizon,
    };
    let mut meta_cal1 = Vec::new();
    let mut single_cal1 = Vec::new();
    for seed in 1..=10u64 {
        let stream = generate(&iid, seed).unwrap();
        let mut f = factory;
        let (tr, _) = run_meta(&mut f, &cert, delta, &stream, seed).unwrap();
        meta_cal1.push(cal_l1(&tr));
        let mut fc = hu_uniform(
            horizon,
            0.0,
            iota(horizon, delta, 1.0),
            seqcal::env::stream_rng(seed, 1),
        )
        .unwrap();
        single_cal1.push(cal_l1(&run_forecaster(&mut fc, &stream).unwrap()));
    }
    let ratio = median(&meta_cal1) / median(&single_cal1);
    let secs = started.elapsed().as_secs_f64();
    verdict(
        "10 (restart meta-framework)",
        seeds_within_budget >= 9 && tiling_ok && ratio <= 2.0 && secs < 600.0,
        &format!(
            "{seeds_within_budget}/10 seeds within restart budget, tiling exact = {tiling_ok}, \
             i.i.d. overhead x{ratio:.2} (gate 2), {secs:.2}s"
        ),
    );
}

#[test]
fn criterion_11_determinism() {
    let config = format!(
        "horizons = 1024 2048 4096 8192 16384 32768 65536\nseeds = {SEEDS_20}\n\
         [algorithm]\nname = simple_epoch\n[env]\nkind = iid\nq = 0.3\n"
    );
    let a = sweep_rows(&config);
    let b = sweep_rows(&config);
    let same_rows = rows_csv(&a, false) == rows_csv(&b, false);
    let same_summary = summary_csv(&a) == summary_csv(&b);
    verdict(
        "11 (byte determinism)",
        same_rows && same_summary,
        &format!("rows identical = {same_rows}, summary identical = {same_summary}"),
    );
}
