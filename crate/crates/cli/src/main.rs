use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use smoothmax::density::density_numeric;
use smoothmax::harness::{
    compare_to_theory, emit_report, fit_exponent, group_cells, predict_group, read_records_csv, run_experiment,
    DeltaSpec, ExperimentConfig, ExperimentResults, SkippedGroup,
};
use smoothmax::maxima::maximal_points;
use smoothmax::sampling::{cell_index, sample_set};
use smoothmax::theory::{verify_witness, witness_b1b1, witness_b2b2, witness_binfq};
use smoothmax::{PNorm, Point, SeedSpec, SmoothedDist};

#[derive(Parser)]
#[command(name = "smoothmax", version, about = "Maxima of smoothed random point sets in the plane")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct DistArgs {
    /// Norm of the base ball: a number >= 1 or `inf`.
    #[arg(long)]
    p: PNorm,
    /// Norm of the perturbation ball.
    #[arg(long)]
    q: PNorm,
    /// Perturbation size.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Draw points and print them as CSV.
    Sample {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw points and report the maximal ones as JSON.
    Maxima {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Numeric density at a point.
    Density {
        #[command(flatten)]
        dist: DistArgs,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        y: f64,
    },
    /// Build and verify a lower-bound witness family.
    Witness {
        #[arg(long, value_enum)]
        family: Family,
        /// Perturbation norm, used by `binfq` only.
        #[arg(long, default_value = "2")]
        q: PNorm,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo samples per region.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a grid of cells and write a report directory.
    Experiment {
        /// JSON experiment config; the other flags are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        p: Option<PNorm>,
        #[arg(long)]
        q: Option<PNorm>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        /// Use δ = n^a instead of a fixed δ.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "delta")]
        delta_power: Option<f64>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        n: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the growth exponent of one group in a records CSV.
    Fit {
        /// Records CSV written by `experiment`.
        records: PathBuf,
        #[arg(long)]
        p: PNorm,
        #[arg(long)]
        q: PNorm,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<f64>,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "delta")]
        delta_power: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a report directory from a records CSV.
    Report {
        records: PathBuf,
        /// Extra δ = n^a rules to group by; fixed δ values are found automatically.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        delta_power: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    B1b1,
    B2b2,
    Binfq,
}

fn output(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(out: Option<&PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn rule(delta: Option<f64>, delta_power: Option<f64>) -> DeltaSpec {
    match (delta, delta_power) {
        (_, Some(a)) => DeltaSpec::Power(a),
        (Some(d), None) => DeltaSpec::Fixed(d),
        (None, None) => DeltaSpec::Fixed(1.0),
    }
}

fn draw(dist: &DistArgs, n: usize, seed: u64) -> Result<(SmoothedDist, Vec<Point>)> {
    let d = SmoothedDist::new(dist.p, dist.q, dist.delta)?;
    let mut rng = SeedSpec::new(seed, cell_index(&d, n as u64), 0).rng();
    let pts = sample_set(&d, n, &mut rng)?;
    Ok((d, pts))
}

/// Fits and judges every group, as `run_experiment` does.
fn judge(records: Vec<smoothmax::harness::ExperimentRecord>, rules: &[(PNorm, PNorm, DeltaSpec)]) -> ExperimentResults {
    let mut res = ExperimentResults {
        records,
        ..Default::default()
    };
    for &(p, q, r) in rules {
        let skip = |reason: String| SkippedGroup {
            p,
            q,
            delta_spec: r,
            reason,
        };
        let cells = match group_cells(&res.records, p, q, r) {
            Ok(c) if !c.is_empty() => c,
            Ok(_) => continue,
            Err(e) => {
                res.skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let grid: Vec<u64> = cells.iter().map(|c| c.n).collect();
        match fit_exponent(&cells) {
            Ok(fit) => {
                match predict_group(p, q, r, &grid).and_then(|pred| compare_to_theory(&fit, &pred)) {
                    Ok(v) => res.verdicts.push(v),
                    Err(e) => res.skipped.push(skip(e.to_string())),
                }
                res.fits.push(fit);
            }
            Err(e) => res.skipped.push(skip(e.to_string())),
        }
        res.cells.extend(cells);
    }
    res
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { dist, n, seed, out } => {
            let (_, pts) = draw(&dist, n, seed)?;
            let mut w = output(out.as_ref())?;
            writeln!(w, "x,y")?;
            for v in pts {
                writeln!(w, "{},{}", v.x, v.y)?;
            }
            w.flush()?;
        }
        Command::Maxima { dist, n, seed, out } => {
            let (_, pts) = draw(&dist, n, seed)?;
            let m = maximal_points(&pts)?;
            emit_json(
                out.as_ref(),
                &json!({
                    "p": dist.p, "q": dist.q, "delta": dist.delta, "n": n, "seed": seed,
                    "count": m.count,
                    "maxima": m.maxima.iter().map(|v| [v.x, v.y]).collect::<Vec<_>>(),
                }),
            )?;
        }
        Command::Density { dist, x, y } => {
            let d = SmoothedDist::new(dist.p, dist.q, dist.delta)?;
            let f = density_numeric(&d, Point::try_new(x, y)?)?;
            emit_json(
                None,
                &json!({"p": dist.p, "q": dist.q, "delta": dist.delta, "x": x, "y": y, "density": f}),
            )?;
        }
        Command::Witness {
            family,
            q,
            delta,
            n,
            seed,
            samples,
            out,
        } => {
            let w = match family {
                Family::B1b1 => witness_b1b1(delta, n)?,
                Family::B2b2 => witness_b2b2(delta, n)?,
                Family::Binfq => witness_binfq(q, delta, n)?,
            };
            let report = verify_witness(&w.dist, &w, samples, seed);
            let mut value = w.to_json();
            value["report"] = serde_json::to_value(&report)?;
            emit_json(out.as_ref(), &value)?;
            if !report.pass {
                bail!("witness failed verification");
            }
        }
        Command::Experiment {
            config,
            p,
            q,
            delta,
            delta_power,
            n,
            reps,
            seed,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => {
                    let (Some(p), Some(q)) = (p, q) else {
                        bail!("either --config or both --p and --q are required");
                    };
                    ExperimentConfig {
                        pairs: vec![(p, q)],
                        delta_spec: vec![rule(delta, delta_power)],
                        n_grid: n,
                        replicates: reps,
                        master_seed: seed,
                        output_dir: None,
                        record_wall_time: false,
                    }
                }
            };
            if out.is_some() {
                cfg.output_dir = out;
            }
            cfg.validate()?;
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("report"));
            let res = run_experiment(&cfg)?;
            let files = emit_report(&dir, &res)?;
            for v in &res.verdicts {
                println!("{} {} δ={}: {}", v.p, v.q, v.delta_spec, v.message);
            }
            for s in &res.skipped {
                println!("{} {} δ={}: skipped ({})", s.p, s.q, s.delta_spec, s.reason);
            }
            println!("report written to {}", files.verdicts.parent().unwrap_or(&dir).display());
        }
        Command::Fit {
            records,
            p,
            q,
            delta,
            delta_power,
            out,
        } => {
            let file = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let recs = read_records_csv(file)?;
            let r = rule(delta, delta_power);
            let cells = group_cells(&recs, p, q, r)?;
            let fit = fit_exponent(&cells)?;
            let grid: Vec<u64> = cells.iter().map(|c| c.n).collect();
            let verdict = predict_group(p, q, r, &grid).and_then(|pred| compare_to_theory(&fit, &pred));
            let verdict = match verdict {
                Ok(v) => serde_json::to_value(v)?,
                Err(e) => json!({"error": e.to_string()}),
            };
            emit_json(
                out.as_ref(),
                &json!({"schema_version": smoothmax::harness::SCHEMA_VERSION, "fit": fit, "verdict": verdict}),
            )?;
        }
        Command::Report {
            records,
            delta_power,
            out,
        } => {
            let file = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let recs = read_records_csv(file)?;
            let pairs: BTreeSet<(String, String)> = recs.iter().map(|r| (r.p.to_string(), r.q.to_string())).collect();
            let mut rules = Vec::new();
            for (ps, qs) in &pairs {
                let (p, q): (PNorm, PNorm) = (ps.parse()?, qs.parse()?);
                let mut fixed: Vec<f64> = recs
                    .iter()
                    .filter(|r| r.p == p && r.q == q)
                    .map(|r| r.delta)
                    .collect();
                fixed.sort_by(f64::total_cmp);
                fixed.dedup();
                for d in fixed {
                    // A δ that only occurs at one n belongs to a power rule, not a fixed group.
                    let ns: BTreeSet<u64> = recs
                        .iter()
                        .filter(|r| r.p == p && r.q == q && r.delta == d)
                        .map(|r| r.n)
                        .collect();
                    if ns.len() > 1 {
                        rules.push((p, q, DeltaSpec::Fixed(d)));
                    }
                }
                rules.extend(delta_power.iter().map(|&a| (p, q, DeltaSpec::Power(a))));
            }
            let res = judge(recs, &rules);
            let files = emit_report(&out, &res)?;
            println!("report written to {}", files.verdicts.parent().unwrap_or(&out).display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
