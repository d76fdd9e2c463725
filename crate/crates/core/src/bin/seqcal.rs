//! Experiment runner CLI: simulate single cells, sweep grids, compute
//! metrics from transcript files, drive the restart meta-framework, and fit
//! scaling exponents from report CSVs.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqcal::env::generate;
use seqcal::harness::{
    build_forecaster, fit_exponent, median, metrics_row, rows_csv, run_cell, summary_csv, sweep,
    ExperimentConfig,
};
use seqcal::meta::{run_meta, CertificateFn};
use seqcal::metrics::{
    cal_l1, cal_l2, nonstationarity_c, pseudo_cal_l2, pseudo_kl, segment_count_k, EnvTrace,
    Transcript,
};
use seqcal::{iota, Error};

#[derive(Parser)]
#[command(name = "seqcal", about = "Sequential-prediction calibration laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config file (key = value text with [algorithm]/[env] blocks)
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path (defaults to the config's `out`, else stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock timings in the CSV (breaks byte determinism)
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single (algorithm, env, horizon, seed) cell
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Seed override (defaults to the first configured seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the full transcript to this path
        #[arg(long)]
        dump_transcript: Option<PathBuf>,
    },
    /// Run the full config grid in parallel
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write a per-(algorithm, env, horizon) summary CSV
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Compute all calibration metrics from a transcript file
    Metrics {
        /// Transcript file ("t q y p k a1 w1 ..." lines)
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Run the adaptive restart framework over the configured environment
    Meta {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Seed override (defaults to the first configured seed)
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the stitched-run metric rows to this path
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Also write the stitched transcript to this path
        #[arg(long)]
        dump_transcript: Option<PathBuf>,
    },
    /// Fit log-log scaling exponents from a rows CSV
    Fit {
        /// Rows CSV produced by `simulate`/`sweep`
        #[arg(long)]
        rows: PathBuf,
        /// Metric column to fit (cal1, cal2, pcal2, pkl)
        #[arg(long, default_value = "cal1")]
        metric: String,
    },
}

fn emit(path: Option<&PathBuf>, content: &str) -> seqcal::Result<()> {
    match path {
        Some(p) => fs::write(p, content).map_err(Error::from),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_config(args: &ConfigArgs) -> seqcal::Result<(ExperimentConfig, Option<PathBuf>)> {
    let text = fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::parse(&text)?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from));
    Ok((cfg, out))
}

fn run(cli: Cli) -> seqcal::Result<()> {
    match cli.command {
        Command::Simulate {
            cfg,
            seed,
            dump_transcript,
        } => {
            let (config, out) = load_config(&cfg)?;
            let algo = config
                .algorithms
                .first()
                .ok_or_else(|| Error::config("algorithm", "simulate needs an [algorithm] block"))?;
            let env = &config.envs[0];
            let horizon = config.horizons[0];
            let seed = seed.unwrap_or(config.seeds[0]);
            let (row, transcript) =
                run_cell(algo, env, horizon, seed, config.delta, config.c_iota)?;
            if let Some(path) = dump_transcript {
                fs::write(path, transcript.to_text())?;
            }
            emit(out.as_ref(), &rows_csv(&[row], cfg.timing))
        }
        Command::Sweep { cfg, summary } => {
            let (config, out) = load_config(&cfg)?;
            let report = sweep(&config);
            if let Some(path) = summary {
                fs::write(path, summary_csv(&report.rows))?;
            }
            let mut csv = rows_csv(&report.rows, cfg.timing);
            for (cell, err) in &report.failures {
                csv.push_str(&format!("# FAILED {cell}: {err}\n"));
            }
            emit(out.as_ref(), &csv)?;
            if let Some((cell, err)) = report.failures.first() {
                return Err(Error::Contract(format!("cell {cell}: {err}")));
            }
            Ok(())
        }
        Command::Metrics { transcript } => {
            let text = fs::read_to_string(&transcript)?;
            let tr = Transcript::from_text(&text)?;
            println!("rounds={}", tr.horizon());
            println!("cal1={}", cal_l1(&tr));
            println!("cal2={}", cal_l2(&tr));
            println!("pcal2={}", pseudo_cal_l2(&tr));
            println!("pkl={}", pseudo_kl(&tr));
            let qs: Vec<f64> = tr.rounds().iter().filter_map(|r| r.q).collect();
            if qs.len() == tr.horizon() && !qs.is_empty() {
                let trace = EnvTrace::new(qs);
                let (c, p_star) = nonstationarity_c(&trace);
                println!("c={c}");
                println!("k={}", segment_count_k(&trace));
                println!("p_star={p_star}");
            }
            Ok(())
        }
        Command::Meta {
            cfg,
            seed,
            rows,
            dump_transcript,
        } => {
            let (config, out) = load_config(&cfg)?;
            let meta_cfg = config
                .meta
                .clone()
                .ok_or_else(|| Error::config("meta", "meta needs a [meta] block"))?;
            let env = &config.envs[0];
            let horizon = config.horizons[0];
            let seed = seed.unwrap_or(config.seeds[0]);
            let spec = env.instantiate(horizon)?;
            let stream = generate(&spec, seed)?;

            let delta_prime = seqcal::meta::delta_prime(config.delta, horizon);
            let iota_prime = iota(horizon, delta_prime, config.c_iota);
            let mut cert = CertificateFn::defaults(
                meta_cfg.family,
                horizon,
                iota_prime,
                meta_cfg.cert_scale,
            );
            if let Some(a) = meta_cfg.alpha1 {
                cert.alpha1 = a;
            }
            if let Some(a) = meta_cfg.alpha2 {
                cert.alpha2 = a;
            }
            if let Some(h) = meta_cfg.h {
                cert.h = h;
            }
            let base = meta_cfg.base.clone();
            let c_iota = config.c_iota;
            let mut factory = |confidence: f64, guess: f64, child_seed: u64| {
                let mut spec = base.clone();
                spec.c_guess = guess;
                build_forecaster(&spec, horizon, confidence, c_iota, child_seed)
            };
            let (transcript, log) = run_meta(&mut factory, &cert, config.delta, &stream, seed)?;
            if let Some(path) = dump_transcript {
                fs::write(path, transcript.to_text())?;
            }
            if let Some(path) = rows {
                let label = format!("meta[{}]+{}", cert.family.name(), base.label());
                let row = metrics_row(
                    label,
                    env.label(),
                    horizon,
                    seed,
                    &transcript,
                    &stream,
                    0.0,
                );
                fs::write(path, rows_csv(&[row], false))?;
            }
            emit(out.as_ref(), &log.to_csv())
        }
        Command::Fit { rows, metric } => {
            let text = fs::read_to_string(&rows)?;
            let col = match metric.as_str() {
                "cal1" => 4,
                "cal2" => 5,
                "pcal2" => 6,
                "pkl" => 7,
                other => {
                    return Err(Error::config(
                        "metric",
                        format!("unknown metric '{other}' (cal1, cal2, pcal2, pkl)"),
                    ))
                }
            };
            // group rows by (algorithm, env), fit median-per-horizon slopes
            let mut groups: Vec<(String, String, Vec<(usize, f64)>)> = Vec::new();
            for line in text.lines().skip(1) {
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() < 11 {
                    return Err(Error::config("rows", format!("short row '{line}'")));
                }
                let horizon: usize = fields[2]
                    .parse()
                    .map_err(|_| Error::config("rows", format!("bad horizon '{}'", fields[2])))?;
                let value: f64 = fields[col]
                    .parse()
                    .map_err(|_| Error::config("rows", format!("bad value '{}'", fields[col])))?;
                let key = (fields[0].to_string(), fields[1].to_string());
                match groups
                    .iter_mut()
                    .find(|(a, e, _)| *a == key.0 && *e == key.1)
                {
                    Some((_, _, pts)) => pts.push((horizon, value)),
                    None => groups.push((key.0, key.1, vec![(horizon, value)])),
                }
            }
            println!("algorithm,env,metric,slope");
            for (algo, env, pts) in groups {
                let mut horizons: Vec<usize> = pts.iter().map(|p| p.0).collect();
                horizons.sort_unstable();
                horizons.dedup();
                let pairs: Vec<(f64, f64)> = horizons
                    .iter()
                    .map(|&h| {
                        let vals: Vec<f64> =
                            pts.iter().filter(|p| p.0 == h).map(|p| p.1).collect();
                        (h as f64, median(&vals))
                    })
                    .collect();
                let slope = fit_exponent(&pairs)?;
                println!("{algo},{env},{metric},{slope}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
