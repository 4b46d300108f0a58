//! Command-line entry points for the inventory-policy pipeline.
//!
//! Subcommands: `gen` (synthetic workspaces), `epoch` (gated policy
//! search on one workspace), `cbs-bench` (96-scenario stationary
//! benchmark), `eval` (holdout scoring), `theory` (guarantee
//! verification). Exit codes: 0 success, 1 validation error, 2 guarantee
//! violation, 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use invevolve::benchmark::{
    self, aggregate_csv, aggregate_markdown, aggregate_row, change_heatmap, dominance_csv,
    dominance_markdown, dominance_table, gain_structure, gain_structure_csv,
    gain_structure_markdown, gain_structure_svg, per_distribution_csv, per_distribution_markdown,
    per_distribution_rows, scenario_costs_csv, wtl_records, BenchConfig,
};
use invevolve::datagen::{self, archetypes};
use invevolve::engine::{run_workspace_epochs, tune_baselines, WorkspaceEpochOptions};
use invevolve::holdout::evaluate_on_holdout;
use invevolve::policy::PolicySpec;
use invevolve::proposer::{ExternalProposer, MutationProposer, ProposalSource, ScriptedProposer};
use invevolve::replay::CertMethod;
use invevolve::theory;
use invevolve::workspace::{read_json, workspace_from_csv, write_atomic, write_json, Workspace};
use invevolve::Error;

#[derive(Parser)]
#[command(name = "invevolve", version, about = "Lost-sales inventory policy evolution with certified deployment")]
struct Cli {
    /// Master RNG seed; every command is deterministic given it.
    #[arg(long, global = true, default_value_t = 0)]
    rng_seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic seed datasets and slice them into workspaces.
    Gen(GenArgs),
    /// Run the gated proposal search on one workspace.
    Epoch(EpochArgs),
    /// Run the 96-scenario stationary benchmark and emit its tables.
    CbsBench(BenchArgs),
    /// Score a policy file on a workspace's holdout window.
    Eval(EvalArgs),
    /// Verify the training/promotion/deployment guarantees numerically.
    Theory(TheoryArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of seed datasets from the shipped catalog.
    #[arg(long, default_value_t = 47)]
    seeds: usize,
    /// Temporal slices (workspaces) per seed dataset.
    #[arg(long, default_value_t = 10)]
    slices: usize,
    /// Output directory for workspaces.
    #[arg(long)]
    out: PathBuf,
    /// Tuning budget for the baseline policies written into each
    /// workspace (0 skips tuning).
    #[arg(long, default_value_t = 50)]
    tune_budget: usize,
    /// Convert a demand CSV (`date,demand[,note,features...]`) into a
    /// single workspace instead of generating synthetic data.
    #[arg(long)]
    from_csv: Option<PathBuf>,
    /// Lead time for CSV import.
    #[arg(long, default_value_t = 5)]
    lead_time: usize,
    /// Holding cost for CSV import.
    #[arg(long, default_value_t = 1.0)]
    holding_cost: f64,
    /// Penalty cost for CSV import.
    #[arg(long, default_value_t = 10.0)]
    penalty_cost: f64,
    /// Holdout days for CSV import.
    #[arg(long, default_value_t = 30)]
    eval_days: usize,
}

#[derive(Args)]
struct EpochArgs {
    /// Workspace directory.
    workspace: PathBuf,
    /// Proposal rounds per epoch.
    #[arg(long, short = 'j', default_value_t = 60)]
    rounds_per_epoch: usize,
    /// Improvement threshold; "auto" = 1% of the reference replay cost.
    #[arg(long, default_value = "auto")]
    epsilon: String,
    /// Joint confidence failure budget.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Discrepancy budget; "auto" reads xi_calibration.json (cold start 0).
    #[arg(long, default_value = "auto")]
    xi: String,
    /// Certificate: auto | hoeffding | blockt.
    #[arg(long, default_value = "auto")]
    cert: String,
    /// Proposal source: mutation | scripted | external.
    #[arg(long, default_value = "mutation")]
    proposer: String,
    /// Candidate list (JSON array of policy specs) for --proposer scripted.
    #[arg(long)]
    scripted_file: Option<PathBuf>,
    /// Request timeout in seconds for --proposer external.
    #[arg(long, default_value_t = 120)]
    timeout_secs: u64,
    /// Baseline tuning budget.
    #[arg(long, default_value_t = 50)]
    budget: usize,
    /// Reference baseline family; default is the lowest-cost tuned one.
    #[arg(long)]
    reference: Option<String>,
    /// Iterative refinement rounds (each appends its winner to the pool).
    #[arg(long, default_value_t = 1)]
    rounds: usize,
}

#[derive(Args)]
struct BenchArgs {
    /// Output directory for tables.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 50)]
    budget: usize,
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    /// Demand paths per scenario (costs average over them).
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Also render a simple SVG of the tuned-gain structure.
    #[arg(long, default_value_t = false)]
    svg: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Workspace directory.
    workspace: PathBuf,
    /// Policy spec JSON file to evaluate.
    #[arg(long)]
    policy: PathBuf,
    /// Baseline tuning budget.
    #[arg(long, default_value_t = 50)]
    budget: usize,
    /// Optional JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Multiplier on every Monte Carlo trial count.
    #[arg(long, default_value_t = 1.0)]
    trials_scale: f64,
    /// Directory for the JSON and Markdown reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Negative control: flips the concentration inequality so the suite
    /// must report violations. Testing hook.
    #[arg(long, hide = true, default_value_t = false)]
    negative_control: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(cli.rng_seed, args),
        Command::Epoch(args) => cmd_epoch(cli.rng_seed, args),
        Command::CbsBench(args) => cmd_cbs_bench(cli.rng_seed, args),
        Command::Eval(args) => cmd_eval(cli.rng_seed, args),
        Command::Theory(args) => cmd_theory(cli.rng_seed, args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io { .. } | Error::Json { .. } => 3,
                Error::Guarantee(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn cmd_gen(rng_seed: u64, args: GenArgs) -> Result<ExitCode, Error> {
    if let Some(csv) = &args.from_csv {
        workspace_from_csv(csv, &args.out, args.lead_time, args.holding_cost, args.penalty_cost, args.eval_days)?;
        let ws = Workspace::load_for_epoch(&args.out)?;
        write_tuned_baselines(&ws, args.tune_budget, rng_seed)?;
        println!("imported {} into workspace {}", csv.display(), args.out.display());
        return Ok(ExitCode::SUCCESS);
    }

    let catalog = archetypes::seed_configs();
    if args.seeds == 0 || args.seeds > catalog.len() {
        return Err(Error::InvalidInput(format!(
            "--seeds must be between 1 and {}, got {}",
            catalog.len(),
            args.seeds
        )));
    }
    let configs = &catalog[..args.seeds];
    let emitted: Vec<usize> = configs
        .par_iter()
        .map(|cfg| -> Result<usize, Error> {
            let dataset = datagen::gen_seed_dataset(cfg, rng_seed)?;
            let slices = datagen::slice(&dataset, args.slices, rng_seed)?;
            for slice in &slices {
                let dir = args
                    .out
                    .join(format!("ws_{:03}_{:02}", slice.seed_id, slice.slice_index));
                datagen::emit_workspace(slice, &dir, &[])?;
                if args.tune_budget > 0 {
                    let ws = Workspace::load_for_epoch(&dir)?;
                    write_tuned_baselines(&ws, args.tune_budget, rng_seed)?;
                }
            }
            Ok(slices.len())
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let total: usize = emitted.iter().sum();
    println!("wrote {total} workspaces to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_tuned_baselines(ws: &Workspace, budget: usize, seed: u64) -> Result<(), Error> {
    if budget == 0 {
        return Ok(());
    }
    let tuned = tune_baselines(ws, budget, seed ^ ws.config.seed_id as u64 ^ (ws.config.slice_start as u64) << 20)?;
    for b in &tuned {
        write_json(&ws.root.join("baseline_policies").join(format!("{}.json", b.family)), &b.policy)?;
    }
    Ok(())
}

fn parse_cert(s: &str) -> Result<Option<CertMethod>, Error> {
    match s {
        "auto" => Ok(None),
        "hoeffding" => Ok(Some(CertMethod::Hoeffding)),
        "blockt" => Ok(Some(CertMethod::BlockwiseT)),
        other => Err(Error::InvalidInput(format!("unknown certificate {other:?}"))),
    }
}

fn parse_auto_f64(s: &str, what: &str) -> Result<Option<f64>, Error> {
    if s == "auto" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| Error::InvalidInput(format!("bad {what} {s:?}: {e}")))
}

fn cmd_epoch(rng_seed: u64, args: EpochArgs) -> Result<ExitCode, Error> {
    let workspace = Workspace::load_for_epoch(&args.workspace)?;
    let opts = WorkspaceEpochOptions {
        proposal_rounds: args.rounds_per_epoch,
        epsilon: parse_auto_f64(&args.epsilon, "epsilon")?,
        delta: args.delta,
        xi: parse_auto_f64(&args.xi, "xi")?,
        cert: parse_cert(&args.cert)?,
        reference: args.reference.clone(),
        tune_budget: args.budget,
        refinement_rounds: args.rounds,
        seed: rng_seed,
    };

    let mut source: Box<dyn ProposalSource> = match args.proposer.as_str() {
        "mutation" => Box::new(MutationProposer::new(rng_seed)),
        "scripted" => {
            let path = args
                .scripted_file
                .as_ref()
                .ok_or_else(|| Error::InvalidInput("--proposer scripted needs --scripted-file".into()))?;
            let script: Vec<PolicySpec> = read_json(path)?;
            Box::new(ScriptedProposer::new(script))
        }
        "external" => Box::new(ExternalProposer::from_env(std::time::Duration::from_secs(args.timeout_secs))?),
        other => return Err(Error::InvalidInput(format!("unknown proposer {other:?}"))),
    };

    let outcome = run_workspace_epochs(&workspace, source.as_mut(), &opts)?;
    if outcome.xi_budget.cold_start {
        eprintln!("warning: no xi calibration found; cold-start budget xi = 0");
    }
    println!(
        "reference: {} (xi = {:.6}, epsilon = {:.6}, {} certificate)",
        outcome.reference.canonical_key(),
        outcome.config.xi,
        outcome.config.epsilon,
        match outcome.config.cert_method {
            CertMethod::Hoeffding => "hoeffding",
            CertMethod::BlockwiseT => "blockwise-t",
        }
    );
    let log_dir = args.workspace.join("logs");
    std::fs::create_dir_all(&log_dir).map_err(|e| Error::io(&log_dir, e))?;
    for (t, (deployed, log)) in outcome.rounds.iter().enumerate() {
        let path = log_dir.join(format!("epoch_{}.json", t + 1));
        write_json(&path, log)?;
        println!(
            "epoch {}: deployed {} ({} promotions, {} evaluations), log {}",
            t + 1,
            deployed.canonical_key(),
            log.decisions.iter().filter(|d| d.promoted).count(),
            log.evaluations_used,
            path.display()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn write_pair(dir: &Path, stem: &str, csv: &str, md: &str) -> Result<(), Error> {
    write_atomic(&dir.join(format!("{stem}.csv")), csv.as_bytes())?;
    write_atomic(&dir.join(format!("{stem}.md")), md.as_bytes())
}

fn cmd_cbs_bench(rng_seed: u64, args: BenchArgs) -> Result<ExitCode, Error> {
    let cfg = BenchConfig {
        master_seed: rng_seed,
        budget: args.budget,
        horizon: args.horizon,
        paths: args.paths,
    };
    let started = std::time::Instant::now();
    let results = benchmark::run_benchmark(&cfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let dominance = dominance_table(&results);
    write_pair(&args.out, "table_dominance", &dominance_csv(&dominance), &dominance_markdown(&dominance))?;

    let pic = wtl_records(&results, "tilted_pic");
    let tcbs = wtl_records(&results, "tilted_cbs");
    let agg = vec![aggregate_row(&tcbs), aggregate_row(&pic)];
    write_pair(&args.out, "table_wtl_aggregate", &aggregate_csv(&agg), &aggregate_markdown(&agg))?;

    let per = per_distribution_rows(&pic);
    write_pair(&args.out, "table_wtl_tilted_pic", &per_distribution_csv(&per), &per_distribution_markdown(&per))?;
    let per_tcbs = per_distribution_rows(&tcbs);
    write_pair(
        &args.out,
        "table_wtl_tilted_cbs",
        &per_distribution_csv(&per_tcbs),
        &per_distribution_markdown(&per_tcbs),
    )?;

    let gain = gain_structure(&results);
    write_pair(&args.out, "gain_structure", &gain_structure_csv(&gain), &gain_structure_markdown(&gain))?;

    let mut heat = String::from("lead_time,penalty_ratio,mean_change_pct\n");
    for (l, p, v) in change_heatmap(&pic) {
        heat.push_str(&format!("{l},{p},{v:.3}\n"));
    }
    write_atomic(&args.out.join("heatmap_tilted_pic.csv"), heat.as_bytes())?;
    write_atomic(&args.out.join("scenario_costs.csv"), scenario_costs_csv(&results).as_bytes())?;
    if args.svg {
        write_atomic(&args.out.join("gain_structure.svg"), gain_structure_svg(&gain).as_bytes())?;
    }

    println!("## Baseline dominance (lowest cost per scenario)\n");
    println!("{}", dominance_markdown(&dominance));
    println!("## Win/tie/loss vs capped base stock (+-2%)\n");
    println!("{}", aggregate_markdown(&agg));
    println!("## Tilted-PIC per distribution\n");
    println!("{}", per_distribution_markdown(&per));
    println!("## Tuned proportional gain\n");
    println!("{}", gain_structure_markdown(&gain));
    println!("96 scenarios in {:.1?}; tables under {}", started.elapsed(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(rng_seed: u64, args: EvalArgs) -> Result<ExitCode, Error> {
    let workspace = Workspace::load_full(&args.workspace)?;
    let policy: PolicySpec = read_json(&args.policy)?;
    let report = policy.check_validity_default();
    if !report.valid {
        return Err(Error::Policy(format!(
            "policy file {} is invalid: {}",
            args.policy.display(),
            report.violations.join("; ")
        )));
    }
    let baselines = tune_baselines(&workspace, args.budget, rng_seed)?;
    let report = evaluate_on_holdout(&workspace, &policy, &baselines)?;

    println!("holdout window: {} days", report.evaluation_days);
    println!("policy {}: average cost {:.6}", report.policy.canonical_key(), report.policy_cost);
    for (family, cost) in &report.baseline_costs {
        println!("  baseline {family}: {cost:.6}");
    }
    println!(
        "best baseline {} at {:.6}; relative change {:+.3}%; success: {}",
        report.best_baseline, report.best_baseline_cost, report.relative_change_pct, report.success
    );
    if let Some(out) = &args.out {
        write_json(out, &report)?;
        println!("report written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_theory(rng_seed: u64, args: TheoryArgs) -> Result<ExitCode, Error> {
    let report = theory::default_suite(args.trials_scale, rng_seed, args.negative_control)?;
    let markdown = theory::report_markdown(&report);
    println!("{markdown}");
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write_json(&out.join("guarantee_report.json"), &report)?;
        write_atomic(&out.join("guarantee_report.md"), markdown.as_bytes())?;
    }
    if report.all_hold {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("guarantee violation detected");
        Ok(ExitCode::from(2))
    }
}
