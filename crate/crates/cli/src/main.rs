use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebm_cli::{parse_scenario, run_scenario, Analysis, Scenario, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "ebm", version, about = "Extended bipartite matching models: checks, stability and backward coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in the scenario.
    Run(Common),
    /// Run one matching from the scenario input.
    Simulate(Common),
    /// Evaluate the split of the scenario input at `split`.
    EvaluateSplit(Common),
    /// Exhaustive sub-additivity check.
    VerifySubadd(Common),
    /// Exhaustive non-expansiveness check.
    VerifyNonexp(Common),
    /// Distance of two class details before and after the input.
    EvaluateNonexp(Common),
    /// Search for a consistency violation of the class rule.
    CheckConsistency(Common),
    /// Construct an erasing couple (strong, or of the `target` buffer).
    FindErasing(Common),
    /// Verify the scenario's `couple`.
    VerifyErasing(Common),
    /// Stability conditions and the integrability certificate.
    CheckStability(Common),
    /// Monte-Carlo estimate of the first return time to the empty buffer.
    EstimateTau1(Common),
    /// Backward coupling on the periodic input.
    Loynes(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for report.txt, report.json and replay scenarios.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    max_count: Option<u32>,
    /// Elementary step budget of the exhaustive checks.
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    max_backsteps: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long)]
    max_depth: Option<usize>,
}

impl Common {
    fn apply(&self, s: &mut Scenario) {
        let b = &mut s.budgets;
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { b.$f = v; })* };
        }
        set!(max_len, max_count, steps, max_backsteps, max_steps, window, runs, horizon, node_budget, max_depth);
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
    }
}

fn execute(common: &Common, only: Option<Analysis>) -> Result<i32, String> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }
    let path = &common.scenario;
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let name = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
    let mut scenario = parse_scenario(&name, &text).map_err(|e| format!("{}: {e}", path.display()))?;
    common.apply(&mut scenario);
    if let Some(a) = only {
        scenario.analyses = vec![a];
    }
    let report = run_scenario(&scenario).map_err(|e| e.to_string())?;
    print!("{}", report.text());
    if let Some(dir) = &common.out {
        report.write_to(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, only) = match &cli.command {
        Command::Run(c) => (c, None),
        Command::Simulate(c) => (c, Some(Analysis::Simulate)),
        Command::EvaluateSplit(c) => (c, Some(Analysis::EvaluateSplit)),
        Command::VerifySubadd(c) => (c, Some(Analysis::VerifySubadd)),
        Command::VerifyNonexp(c) => (c, Some(Analysis::VerifyNonexp)),
        Command::EvaluateNonexp(c) => (c, Some(Analysis::EvaluateNonexp)),
        Command::CheckConsistency(c) => (c, Some(Analysis::CheckConsistency)),
        Command::FindErasing(c) => (c, Some(Analysis::FindErasing)),
        Command::VerifyErasing(c) => (c, Some(Analysis::VerifyErasing)),
        Command::CheckStability(c) => (c, Some(Analysis::CheckStability)),
        Command::EstimateTau1(c) => (c, Some(Analysis::EstimateTau1)),
        Command::Loynes(c) => (c, Some(Analysis::Loynes)),
    };
    let code = match execute(common, only) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
