use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use drmtest_core::backtest::{klm_baseline, run_backtest, BacktestRun, Seeding, StratifiedPlan};
use drmtest_core::distortion::StepPart;
use drmtest_core::measure::PartitionRule;
use drmtest_core::partition::{cell_probabilities, mc_oracle_cell_probs, validate_partition};
use drmtest_core::{decompose, DistortionFunction, Mode, Partition, RiskMeasure};

use drmtest::config::StudyConfig;
use drmtest::formats::{self, sig};
use drmtest::harness::{self, Harness};
use drmtest::report;

#[derive(Parser)]
#[command(
    name = "drmtest",
    version,
    about = "Stratified randomized backtests of distortion risk measures"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replications
    #[arg(long, global = true)]
    reps: Option<u64>,
    /// Nominal level of the tests
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Level the rejection thresholds are built for, if not kappa
    #[arg(long, global = true)]
    construction_level: Option<f64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write machine-readable output here
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Random streams reserved per replication
    #[arg(long, global = true)]
    streams_per_replication: Option<u64>,
    /// Study configuration (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Split a distortion function into step and continuous parts
    Decompose(DecomposeArgs),
    /// Null probabilities of the breach-count cells
    Cellprobs(CellprobsArgs),
    /// Backtest a loss series against its forecasts
    Backtest(BacktestArgs),
    /// Size and power studies
    #[command(subcommand)]
    Study(Study),
}

#[derive(Args)]
struct DistortionSource {
    /// Risk measure, e.g. avar:0.025, gluevar:0.4:2/3:0.01:0.05, rvar:0.001:0.025, mixed
    #[arg(long, conflicts_with = "record")]
    measure: Option<String>,
    /// Distortion record file (`distortion v1`)
    #[arg(long)]
    record: Option<PathBuf>,
}

impl DistortionSource {
    fn load(&self) -> Result<(String, DistortionFunction, Option<RiskMeasure>)> {
        match (&self.measure, &self.record) {
            (Some(spec), _) => {
                let m: RiskMeasure = spec.parse()?;
                Ok((m.to_string(), m.distortion()?, Some(m)))
            }
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok((
                    path.display().to_string(),
                    DistortionFunction::from_record(&text)?,
                    None,
                ))
            }
            (None, None) => bail!("give --measure or --record"),
        }
    }
}

#[derive(Args)]
struct PartitionArgs {
    /// Number of inner levels
    #[arg(long)]
    m: Option<usize>,
    /// Explicit inner levels, comma separated (overrides --m)
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// equidistant or inclusive
    #[arg(long, default_value = "equidistant")]
    partition: PartitionRule,
    /// Stratum closure: auto, left, right or general
    #[arg(long, default_value = "auto")]
    mode: Mode,
}

impl PartitionArgs {
    fn build(&self, measure: Option<&RiskMeasure>) -> Result<Partition> {
        if let Some(levels) = &self.levels {
            return Ok(Partition::from_inner(levels)?);
        }
        let Some(m) = self.m else {
            bail!("give --m or --levels");
        };
        match measure {
            Some(measure) => Ok(measure.partition(m, self.partition)?),
            None => bail!("a distortion record needs explicit --levels"),
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    source: DistortionSource,
    /// Print the distortion record instead
    #[arg(long)]
    emit_record: bool,
}

#[derive(Args)]
struct CellprobsArgs {
    #[command(flatten)]
    source: DistortionSource,
    #[command(flatten)]
    partition: PartitionArgs,
    /// Also estimate by simulation with this many draws
    #[arg(long)]
    oracle: Option<usize>,
}

#[derive(Args)]
struct BacktestArgs {
    #[command(flatten)]
    source: DistortionSource,
    #[command(flatten)]
    partition: PartitionArgs,
    /// CSV with header t,loss
    #[arg(long)]
    losses: PathBuf,
    /// CSV with header t,family,param1,param2 or t,p,quantile
    #[arg(long)]
    forecasts: PathBuf,
    /// Run the non-randomized multilevel VaR baseline instead (AV@R only)
    #[arg(long)]
    baseline: bool,
    /// Replication index of the randomization
    #[arg(long, default_value_t = 0)]
    replication: u64,
    /// Write the exception indicators here
    #[arg(long)]
    indicators: Option<PathBuf>,
}

#[derive(Args, Default)]
struct GridArgs {
    /// Risk measure under test
    #[arg(long)]
    measure: Option<String>,
    /// Horizons, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Inner level counts, comma separated
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// equidistant or inclusive
    #[arg(long)]
    partition: Option<String>,
    /// Stratum closure: auto, left, right or general
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Study {
    /// Standardized N/T3/T5/ST losses against N(0,1) forecasts
    Dist {
        #[command(flatten)]
        grid: GridArgs,
        /// N, T3, T5, ST or ST:nu:gamma, comma separated
        #[arg(long, value_delimiter = ',')]
        alternatives: Option<Vec<String>>,
    },
    /// AV@R randomized backtest against the multilevel VaR baseline
    Klm {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        alternatives: Option<Vec<String>>,
    },
    /// RV@R with a sequence of lower levels
    Rvar {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        alternatives: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Write beta,test,alt,n,m,estimate for plotting
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Net asset value of the insurer model
    Alm {
        #[command(flatten)]
        grid: GridArgs,
        /// null, nb, par, logn, comma separated
        #[arg(long, value_delimiter = ',')]
        alternative: Option<Vec<String>>,
        /// Inner samples per forecast for --forecast inner-mc
        #[arg(long)]
        inner_n: Option<usize>,
        /// semi-analytic or inner-mc
        #[arg(long)]
        forecast: Option<String>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Cellprobs(a) => cmd_cellprobs(&cli.global, a),
        Command::Backtest(a) => cmd_backtest(&cli.global, a),
        Command::Study(s) => cmd_study(&cli.global, s),
    }
}

fn csv_target(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn describe_step(part: &StepPart) -> String {
    part.atoms
        .iter()
        .map(|a| format!("{}@{}", sig(a.mass, 17), sig(a.location, 17)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<()> {
    let (name, g, _) = a.source.load()?;
    if a.emit_record {
        print!("{}", g.to_record());
        return Ok(());
    }
    let d = decompose(&g);
    println!("distortion  {name}");
    println!("c_r         {}", sig(d.c_r, 17));
    println!("c_l         {}", sig(d.c_l, 17));
    println!("c_c         {}", sig(d.c_c, 17));
    println!(
        "right step  {}{}",
        describe_step(&d.right_step),
        if d.c_r == 0.0 { " (unused)" } else { "" }
    );
    println!(
        "left step   {}{}",
        describe_step(&d.left_step),
        if d.c_l == 0.0 { " (unused)" } else { "" }
    );
    println!("continuous part:");
    print!("{}", d.continuous.to_record());
    Ok(())
}

fn cmd_cellprobs(global: &Global, a: &CellprobsArgs) -> Result<()> {
    let (_, g, measure) = a.source.load()?;
    let part = a.partition.build(measure.as_ref())?;
    let mode = a.partition.mode.resolve(&g);
    let cells = cell_probabilities(&g, &part, mode)?;
    formats::write_cell_probabilities(io::stdout().lock(), &cells.p)?;
    if let Some(path) = &global.csv {
        formats::write_cell_probabilities(csv_target(path)?, &cells.p)?;
    }
    if cells.ill_conditioned {
        eprintln!("warning: some cells are below 1e-15 and were set to 0");
    }
    if let Some(n) = a.oracle {
        let mc = mc_oracle_cell_probs(&g, &part, mode, n, global.seed.unwrap_or(1))?;
        let se = mc.se.clone().unwrap_or_default();
        eprintln!("simulation check ({n} draws):");
        for (k, (p, q)) in cells.p.iter().zip(&mc.p).enumerate() {
            let s = se.get(k).copied().unwrap_or(f64::NAN);
            eprintln!(
                "  cell {k}: exact {} simulated {} (se {})",
                sig(*p, 10),
                sig(*q, 6),
                sig(s, 3)
            );
        }
    }
    Ok(())
}

fn print_run(run: &BacktestRun, mode: Mode, part: &Partition) {
    println!("n = {}, m = {}, mode = {mode}", run.n(), part.m());
    println!(
        "levels: {}",
        part.levels()
            .iter()
            .map(|v| sig(*v, 6))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!(
        "{:>5} {:>10} {:>12} {:>12}",
        "cell", "observed", "expected", "p"
    );
    for (k, (o, p)) in run.counts.iter().zip(&run.null.p).enumerate() {
        println!(
            "{k:>5} {o:>10} {:>12} {:>12}",
            sig(p * run.n() as f64, 6),
            sig(*p, 6)
        );
    }
    println!();
    println!(
        "{:>8} {:>12} {:>10} {:>12} {:>8}",
        "test", "statistic", "dof", "p-value", "reject"
    );
    for t in &run.tests {
        println!(
            "{:>8} {:>12} {:>10} {:>12} {:>8}",
            t.kind.name(),
            sig(t.statistic, 6),
            sig(t.dof, 6),
            sig(t.p_value, 6),
            if t.reject { "yes" } else { "no" }
        );
    }
    println!("level {}", run.kappa);
}

fn cmd_backtest(global: &Global, a: &BacktestArgs) -> Result<()> {
    let (_, g, measure) = a.source.load()?;
    let losses = formats::read_losses_file(&a.losses)?;
    let forecasts = formats::read_forecasts_file(&a.forecasts)?;
    let kappa = global.construction_level.or(global.kappa).unwrap_or(0.05);
    let part = a.partition.build(measure.as_ref())?;
    let (run, mode) = if a.baseline {
        let Some(RiskMeasure::Avar { alpha }) = measure else {
            bail!("the baseline backtest needs --measure avar:<alpha>");
        };
        (
            klm_baseline(&losses, &forecasts, alpha, part.m(), kappa)?,
            Mode::Left,
        )
    } else {
        let mode = a.partition.mode.resolve(&g);
        let violations = validate_partition(&g, &part, mode);
        if !violations.is_empty() {
            bail!("partition invalid for mode {mode}: {violations:?}");
        }
        let plan = StratifiedPlan::new(&g, part.clone(), mode)?;
        let mut seeding = Seeding::new(global.seed.unwrap_or(1)).replication(a.replication);
        if let Some(s) = global.streams_per_replication {
            seeding = seeding.streams_per_replication(s);
        }
        (
            run_backtest(&losses, &forecasts, &plan, kappa, &seeding)?,
            mode,
        )
    };
    print_run(&run, mode, &part);
    if let Some(path) = &global.csv {
        formats::write_test_results(csv_target(path)?, &run.tests)?;
    }
    if let Some(path) = &a.indicators {
        let mut w = csv_target(path)?;
        let header: Vec<String> = (1..=part.m() + 1).map(|j| format!("i{j}")).collect();
        writeln!(w, "t,{},breached", header.join(","))?;
        for t in 0..run.n() {
            let row: Vec<&str> = run
                .indicator_row(t)
                .iter()
                .map(|&b| if b { "1" } else { "0" })
                .collect();
            writeln!(w, "{},{},{}", t + 1, row.join(","), run.breached[t])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn study_config(global: &Global, grid: &GridArgs) -> Result<StudyConfig> {
    let mut cfg = match &global.config {
        Some(path) => StudyConfig::from_file(path)?,
        None => StudyConfig::default(),
    };
    if let Some(v) = global.seed {
        cfg.seed = v;
    }
    if let Some(v) = global.reps {
        cfg.reps = v;
    }
    if let Some(v) = global.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = global.construction_level {
        cfg.construction_level = Some(v);
    }
    if let Some(v) = global.streams_per_replication {
        cfg.streams_per_replication = v;
    }
    if let Some(v) = &grid.measure {
        cfg.measure = v.clone();
    }
    if let Some(v) = &grid.n {
        cfg.ns = v.clone();
    }
    if let Some(v) = &grid.m {
        cfg.ms = v.clone();
    }
    if let Some(v) = &grid.partition {
        cfg.partition = v.clone();
    }
    if let Some(v) = &grid.mode {
        cfg.mode = v.clone();
    }
    Ok(cfg)
}

fn cmd_study(global: &Global, study: &Study) -> Result<()> {
    let h = Harness::new(global.workers)?;
    let started = std::time::Instant::now();
    match study {
        Study::Dist { grid, alternatives } | Study::Klm { grid, alternatives } => {
            let mut cfg = study_config(global, grid)?;
            if let Some(v) = alternatives {
                cfg.alternatives = v.clone();
            }
            if matches!(study, Study::Klm { .. }) {
                let rows = harness::klm_study(&h, &cfg)?;
                print!("{}", report::render_klm(&rows));
                if let Some(path) = &global.csv {
                    report::write_klm_csv(csv_target(path)?, &rows)?;
                }
            } else {
                let out = harness::dist_study(&h, &cfg)?;
                print!("{}", report::render_tables(&out.rows, &out.failures));
                if let Some(path) = &global.csv {
                    report::write_rows_csv(csv_target(path)?, &out.rows, &out.failures)?;
                }
            }
        }
        Study::Rvar {
            grid,
            alternatives,
            betas,
            alpha,
            plot_data,
        } => {
            let mut cfg = study_config(global, grid)?;
            if let Some(v) = alternatives {
                cfg.alternatives = v.clone();
            }
            if let Some(v) = betas {
                cfg.rvar.betas = v.clone();
            }
            if let Some(v) = alpha {
                cfg.rvar.alpha = *v;
            }
            let out = harness::rvar_study(&h, &cfg)?;
            print!("{}", report::render_tables(&out.rows, &out.failures));
            if let Some(path) = &global.csv {
                report::write_rows_csv(csv_target(path)?, &out.rows, &out.failures)?;
            }
            if let Some(path) = plot_data {
                let mut w = csv_target(path)?;
                writeln!(w, "beta,test,alt,n,m,estimate")?;
                for r in &out.rows {
                    let measure: RiskMeasure = r.measure.parse()?;
                    let RiskMeasure::Rvar { beta, .. } = measure else {
                        continue;
                    };
                    writeln!(
                        w,
                        "{beta},{},{},{},{},{}",
                        r.test,
                        r.alternative,
                        r.n,
                        r.m,
                        sig(r.estimate(), 6)
                    )?;
                }
                w.flush()?;
            }
        }
        Study::Alm {
            grid,
            alternative,
            inner_n,
            forecast,
        } => {
            let mut cfg = study_config(global, grid)?;
            if let Some(v) = &grid.measure {
                cfg.alm.measure = v.clone();
            }
            if grid.n.is_none() && global.config.is_none() {
                cfg.ns = vec![250, 500, 1000, 2000];
            }
            if let Some(v) = alternative {
                cfg.alm.claims = v.clone();
            }
            if let Some(v) = inner_n {
                cfg.alm.inner_n = *v;
            }
            if let Some(v) = forecast {
                cfg.alm.forecast = v.clone();
            }
            let out = harness::alm_study(&h, &cfg)?;
            print!("{}", report::render_tables(&out.rows, &out.failures));
            if let Some(path) = &global.csv {
                report::write_rows_csv(csv_target(path)?, &out.rows, &out.failures)?;
            }
        }
    }
    eprintln!(
        "finished in {:.1} s on {} worker(s)",
        started.elapsed().as_secs_f64(),
        h.workers()
    );
    Ok(())
}
