//! Command-line front end: parses arguments, resolves systems, runs the
//! engine inside a sized worker pool and writes content-addressed outputs.

pub mod cache;
pub mod config;
pub mod verify;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use pseudorbit::bundles::{entropy_bounds, rescale_trend, suspension_entropy, HolonomyPresentation, SuspensionParams};
use pseudorbit::gallery::AdversarialPoolBuilder;
use pseudorbit::rng::PERTURBATION_STREAM;
use pseudorbit::separation::{
    estimate_from, point_table, pseudo_entropy_estimate, GridPoolBuilder, PoolBuilder, Schedule,
};

use cache::{content_hash, now_unix, write_outputs, Cache, RunRecord};
use config::load_system;

#[derive(Parser, Debug)]
#[command(
    name = "pseudorbit",
    version,
    about = "Entropy of pseudogroups from separated orbits and pseudo-orbits"
)]
pub struct Cli {
    /// 64-bit seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores). Outputs do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "pseudorbit-out")]
    pub out: PathBuf,
    /// Extra copy of the main CSV table at this path.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Levels {
    /// `gallery:<name>` (identity, rotation:<theta>, dyadic, section6) or a JSON config path.
    pub system: String,
    #[arg(long, default_value_t = 1)]
    pub n_min: usize,
    #[arg(long)]
    pub n_max: usize,
    /// Comma-separated scales.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// Grid cells for base points.
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    /// Fit every level, not only those the grid resolves.
    #[arg(long)]
    pub unresolved: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PoolKind {
    /// Exact grid orbits plus seeded perturbed copies.
    Grid,
    /// The branch-following families of the Morse-Smale pair.
    Adversarial,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Orbit entropy from greedy separated sets.
    Entropy(Levels),
    /// Pseudo-orbit entropy under a tolerance schedule, next to the orbit entropy.
    PseudoEntropy {
        #[command(flatten)]
        levels: Levels,
        /// theorem1, remark, const:<alpha> or list:<csv>.
        #[arg(long)]
        schedule: String,
        #[arg(long, value_enum, default_value = "grid")]
        pool: PoolKind,
        /// Perturbed copies per grid point.
        #[arg(long, default_value_t = 1)]
        copies: usize,
    },
    /// Invariant suites; exits nonzero when any check fails.
    Verify {
        #[arg(value_enum)]
        suite: verify::Suite,
    },
    /// Entropy bounds for a foliated bundle and generator rescaling.
    Bundles {
        /// Lengths of the generators' homotopy classes.
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<f64>,
        /// Entropy of the holonomy group.
        #[arg(long, conflicts_with = "fiber")]
        entropy: Option<f64>,
        /// Estimate the holonomy entropy from this fibre system instead.
        #[arg(long, requires = "fiber_eps")]
        fiber: Option<String>,
        #[arg(long, value_delimiter = ',')]
        fiber_eps: Option<Vec<f64>>,
        #[arg(long, default_value_t = 8)]
        fiber_n_max: usize,
        #[arg(long, default_value_t = 4096)]
        fiber_grid: usize,
        /// Rescaling parameters.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
        m: Vec<u64>,
    },
}

/// What a finished command hands back: files to write and a summary for stdout.
struct Produced {
    outputs: BTreeMap<String, String>,
    /// Name of the output whose contents go to `--csv`.
    csv: Option<String>,
    summary: String,
    ok: bool,
}

type Job = Box<dyn FnOnce() -> Result<Produced>>;

fn levels_params(l: &Levels) -> Result<(Vec<usize>, Value)> {
    if l.n_max < l.n_min {
        bail!("--n-max ({}) must be at least --n-min ({})", l.n_max, l.n_min);
    }
    if l.grid == 0 {
        bail!("--grid must be positive");
    }
    let ns: Vec<usize> = (l.n_min..=l.n_max).collect();
    let params = json!({
        "n_min": l.n_min,
        "n_max": l.n_max,
        "eps": l.eps,
        "grid": l.grid,
        "unresolved": l.unresolved,
    });
    Ok((ns, params))
}

fn pretty(v: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// Runs the command line; returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building the worker pool")?;
    pool.install(|| dispatch(&cli))
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let (command, system_key, params, work): (&str, Value, Value, Job) = match &cli.command {
        Command::Entropy(l) => {
            let system = load_system(&l.system)?;
            let (ns, params) = levels_params(l)?;
            let l = l.clone();
            (
                "entropy",
                system.key.clone(),
                params,
                Box::new(move || {
                    let table = point_table(&system.gens, &ns, &l.eps, l.grid)?;
                    let estimate = estimate_from(&table, !l.unresolved)?;
                    let summary = json!({
                        "system": system.key,
                        "estimate": estimate,
                        "rows": table.rows,
                        "perturbation_stream": PERTURBATION_STREAM,
                    });
                    let mut outputs = BTreeMap::new();
                    outputs.insert("entropy.csv".into(), table.to_csv(Some(&estimate)));
                    outputs.insert("entropy.json".into(), pretty(&summary)?);
                    Ok(Produced {
                        outputs,
                        csv: Some("entropy.csv".into()),
                        summary: format!(
                            "h = {:.4} ({}, stable = {})",
                            estimate.h, estimate.label, estimate.stable
                        ),
                        ok: true,
                    })
                }),
            )
        }
        Command::PseudoEntropy {
            levels,
            schedule,
            pool,
            copies,
        } => {
            let system = load_system(&levels.system)?;
            let (ns, mut params) = levels_params(levels)?;
            let schedule: Schedule = schedule.parse()?;
            schedule.covers(levels.n_max)?;
            params["schedule"] = json!(schedule.to_string());
            params["pool"] = json!(format!("{pool:?}").to_lowercase());
            params["copies"] = json!(copies);
            let (levels, pool, copies, seed) = (levels.clone(), *pool, *copies, cli.seed);
            (
                "pseudo-entropy",
                system.key.clone(),
                params,
                Box::new(move || {
                    let gallery_pair = match pool {
                        PoolKind::Adversarial => Some(
                            system
                                .gallery
                                .as_ref()
                                .and_then(|n| pseudorbit::gallery::build_gallery(n).ok())
                                .and_then(|s| s.pair)
                                .context("--pool adversarial needs gallery:section6")?,
                        ),
                        PoolKind::Grid => None,
                    };
                    let grid_builder = GridPoolBuilder {
                        cells: levels.grid,
                        seed,
                        copies,
                    };
                    let adversarial;
                    let builder: &dyn PoolBuilder = match &gallery_pair {
                        Some(pair) => {
                            adversarial = AdversarialPoolBuilder {
                                pair,
                                cells: levels.grid,
                            };
                            &adversarial
                        }
                        None => &grid_builder,
                    };
                    // The adversarial families must share the pair's generators.
                    let gens = gallery_pair.as_ref().map_or(&system.gens, |p| &p.gens);
                    let report =
                        pseudo_entropy_estimate(gens, &schedule, &ns, &levels.eps, builder, !levels.unresolved)?;
                    let mut outputs = BTreeMap::new();
                    outputs.insert("orbit.csv".into(), report.orbit_table.to_csv(Some(&report.orbit)));
                    outputs.insert("pseudo.csv".into(), report.pseudo_table.to_csv(Some(&report.pseudo)));
                    outputs.insert(
                        "pseudo_entropy.json".into(),
                        pretty(&json!({
                            "system": system.key,
                            "report": report,
                            "perturbation_stream": PERTURBATION_STREAM,
                        }))?,
                    );
                    Ok(Produced {
                        outputs,
                        csv: Some("pseudo.csv".into()),
                        summary: format!(
                            "h = {:.4}, h_ps = {:.4}, difference {:.4} ({})",
                            report.orbit.h, report.pseudo.h, report.difference, report.schedule
                        ),
                        ok: true,
                    })
                }),
            )
        }
        Command::Verify { suite } => {
            let (suite, seed) = (*suite, cli.seed);
            (
                "verify",
                Value::Null,
                json!({ "suite": format!("{suite:?}").to_lowercase() }),
                Box::new(move || {
                    let checks = verify::run(suite, seed);
                    let failed = checks.iter().filter(|c| !c.ok).count();
                    let mut summary = String::new();
                    for c in &checks {
                        summary.push_str(&format!(
                            "{} [{}] {}: margin {:.3e} ({})\n",
                            if c.ok { "PASS" } else { "FAIL" },
                            c.suite,
                            c.name,
                            c.margin,
                            c.detail
                        ));
                    }
                    summary.push_str(&format!("{} checks, {failed} failed", checks.len()));
                    let mut outputs = BTreeMap::new();
                    outputs.insert(
                        "verify.json".into(),
                        pretty(&json!({ "passed": failed == 0, "checks": checks }))?,
                    );
                    Ok(Produced {
                        outputs,
                        csv: None,
                        summary,
                        ok: failed == 0,
                    })
                }),
            )
        }
        Command::Bundles {
            lengths,
            entropy,
            fiber,
            fiber_eps,
            fiber_n_max,
            fiber_grid,
            m,
        } => {
            let pres = HolonomyPresentation::from_lengths(lengths.clone())?;
            let fiber_system = fiber.as_deref().map(load_system).transpose()?;
            if entropy.is_none() && fiber_system.is_none() {
                bail!("give --entropy or --fiber");
            }
            let params = json!({
                "lengths": lengths,
                "entropy": entropy,
                "fiber_eps": fiber_eps,
                "fiber_n_max": fiber_n_max,
                "fiber_grid": fiber_grid,
                "m": m,
            });
            let key = fiber_system.as_ref().map_or(Value::Null, |s| s.key.clone());
            let (entropy, fiber_eps, fiber_n_max, fiber_grid, m) =
                (*entropy, fiber_eps.clone(), *fiber_n_max, *fiber_grid, m.clone());
            (
                "bundles",
                key,
                params,
                Box::new(move || {
                    let (bounds, fiber_estimate) = match (entropy, fiber_system) {
                        (Some(h), _) => (entropy_bounds(&pres, h)?, None),
                        (None, Some(sys)) => {
                            let sp = SuspensionParams {
                                ns: (1..=fiber_n_max).collect(),
                                eps: fiber_eps.unwrap_or_default(),
                                cells: fiber_grid,
                                require_resolved: true,
                            };
                            let r = suspension_entropy(&pres, &sys.gens, &sp)?;
                            (r.bounds, Some(r.fiber))
                        }
                        (None, None) => unreachable!("checked above"),
                    };
                    let trend = rescale_trend(&pres, &m)?;
                    let summary = format!(
                        "h(F) in [{}, {}], a/b = {}, rescaled ratios {:?}",
                        bounds.lower,
                        bounds.upper,
                        bounds.ratio,
                        trend.reports.iter().map(|r| r.ratio).collect::<Vec<_>>()
                    );
                    let mut outputs = BTreeMap::new();
                    outputs.insert(
                        "bundles.json".into(),
                        pretty(&json!({
                            "bounds": bounds,
                            "fiber": fiber_estimate,
                            "rescale": trend,
                        }))?,
                    );
                    Ok(Produced {
                        outputs,
                        csv: None,
                        summary,
                        ok: true,
                    })
                }),
            )
        }
    };

    let hash = content_hash(command, &system_key, &params, cli.seed);
    let cache = Cache::new(&cli.out);
    let (outputs, csv, summary, ok) = match cache.load(&hash)? {
        Some(record) => {
            let ok = record.params.get("ok").and_then(Value::as_bool).unwrap_or(true);
            let csv = record.params.get("csv").and_then(Value::as_str).map(str::to_string);
            let summary = record
                .params
                .get("summary")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            eprintln!("cache hit {hash}");
            (record.outputs, csv, summary, ok)
        }
        None => {
            let started = now_unix();
            let produced = work()?;
            let mut recorded = params.clone();
            recorded["ok"] = json!(produced.ok);
            recorded["csv"] = json!(produced.csv);
            recorded["summary"] = json!(produced.summary);
            cache.store(&RunRecord {
                hash: hash.clone(),
                command: command.into(),
                system: system_key,
                params: recorded,
                seed: cli.seed,
                engine_version: pseudorbit::ENGINE_VERSION.into(),
                outputs: produced.outputs.clone(),
                started_unix: started,
                finished_unix: now_unix(),
            })?;
            (produced.outputs, produced.csv, produced.summary, produced.ok)
        }
    };
    write_outputs(&cli.out, &outputs)?;
    if let (Some(path), Some(name)) = (&cli.csv, csv) {
        copy_csv(path, &outputs[&name])?;
    }
    println!("{summary}");
    Ok(if ok { 0 } else { 1 })
}

fn copy_csv(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
