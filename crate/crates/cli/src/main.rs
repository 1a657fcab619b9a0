//! `sojourn`: fit factor models to duration data, simulate, run studies,
//! solve semi-Markov chains and emit plot-ready diagnostics.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sojourn_core::estimation::grid::{fit_grid, FamilyChoice, GridSearch, ShiftRange};
use sojourn_core::{
    ASolver, DataFormat, DurationDataset, ExecMode, FamilyParams, FitResult, SampleBatch, SmmSpec,
    SolveMethod, StudyConfig, TSearch,
};

#[derive(Parser)]
#[command(
    name = "sojourn",
    version,
    about = "Discrete sojourn-time modelling toolkit"
)]
struct Cli {
    /// Run bulk work on the current thread only
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a factor model, searching shifts and supports
    Fit(FitArgs),
    /// Draw a seeded sample from a factor model
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo estimation study
    Study(StudyArgs),
    /// Stationary distribution of a semi-Markov chain spec
    Smm(SmmArgs),
    /// Empirical diagnostics and fit overlays as plot data
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Linear,
    Poly,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    /// One integer per line
    Lines,
    /// First numeric column of a CSV
    CsvColumn,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Lines => DataFormat::Lines,
            FormatArg::CsvColumn => DataFormat::CsvColumn,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Duration data file
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = FamilyArg::Poly)]
    family: FamilyArg,
    /// Polynomial degree
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Support candidates run from max(sample) to max(sample) + margin
    #[arg(long, default_value_t = 200)]
    t_margin: usize,
    /// "auto" (0 plus the three largest feasible) or a comma list like "0,2,3"
    #[arg(long, default_value = "auto")]
    shift_range: String,
    #[arg(long, value_enum, default_value_t = FormatArg::Lines)]
    format: FormatArg,
    /// Directory for fit.json and grid.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = FamilyArg::Linear)]
    family: FamilyArg,
    /// Factor coefficient
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Polynomial centre (poly only)
    #[arg(long)]
    c: Option<f64>,
    /// Polynomial degree
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Support size
    #[arg(short = 'T', long = "support")]
    support: usize,
    #[arg(long, default_value_t = 0)]
    shift: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for sample.txt; omit to print to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Known-support bias/variance study, steep slope
    LinearA01,
    /// Support recovery with a max-anchored candidate range
    LinearA01UnknownT,
    /// PMF-distance study, steep slope, grid coefficient solver
    L1Strong,
    /// PMF-distance study, shallow slope, grid coefficient solver
    L1Weak,
    /// Cubic factor model bias/variance study
    PolyCubic,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    /// Override the preset trial count
    #[arg(long)]
    trials: Option<usize>,
    /// Override the preset sizes, e.g. "10,100,1000"
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ten times the trials plus a 50000 row where sensible; hours, not minutes
    #[arg(long)]
    full_scale: bool,
    /// Directory for study.csv and study.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Auto,
    Direct,
    Power,
}

#[derive(Args)]
struct SmmArgs {
    /// Chain spec: {"states", "T", "rho", "jump"} or {... "A"} as JSON
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Directory for pi.csv and smm.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Duration data file
    data: PathBuf,
    /// fit.json from a previous `fit`; adds QQ and overlay tables
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Lines)]
    format: FormatArg,
    /// Directory for rho.csv, pmf.csv and, with --fit, qq.csv and overlay.csv
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum CliError {
    /// Bad input: missing or malformed data, unusable flags (exit 2).
    Data(String),
    /// Numeric failure inside a solver or study (exit 3).
    Solver(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(m) | CliError::Solver(m) => f.write_str(m),
        }
    }
}

fn data_err(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn solver_err(e: impl fmt::Display) -> CliError {
    CliError::Solver(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("SOJOURN_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok());
    sojourn_core::init_thread_pool(threads);
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };

    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args, mode),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Study(args) => cmd_study(args, mode),
        Command::Smm(args) => cmd_smm(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sojourn: {e}");
            match e {
                CliError::Data(_) => ExitCode::from(2),
                CliError::Solver(_) => ExitCode::from(3),
            }
        }
    }
}

fn load_dataset(path: &Path, format: FormatArg) -> Result<DurationDataset, CliError> {
    DurationDataset::from_path(path, format.into())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(dir).map_err(data_err)?;
    File::create(dir.join(name))
        .map(BufWriter::new)
        .map_err(data_err)
}

fn parse_shift_range(text: &str) -> Result<ShiftRange, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(ShiftRange::Auto);
    }
    let shifts = text
        .split(',')
        .map(|tok| tok.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            CliError::Data(format!(
                "--shift-range must be \"auto\" or a comma list, got {text:?}"
            ))
        })?;
    Ok(ShiftRange::Fixed(shifts))
}

fn cmd_fit(args: FitArgs, mode: ExecMode) -> Result<(), CliError> {
    let ds = load_dataset(&args.data, args.format)?;
    let family = match args.family {
        FamilyArg::Linear => FamilyChoice::Linear,
        FamilyArg::Poly => FamilyChoice::Poly { n: args.n },
    };
    let shifts = parse_shift_range(&args.shift_range)?;
    let search: GridSearch =
        fit_grid(&ds.values, family, args.t_margin, &shifts, mode).map_err(solver_err)?;
    let best = &search.best;

    let mut grid = out_file(&args.out, "grid.csv")?;
    search.write_cells_csv(&mut grid).map_err(data_err)?;
    let mut fit = out_file(&args.out, "fit.json")?;
    let doc = serde_json::json!({
        "dataset": ds.name,
        "n_observations": ds.n(),
        "fit": best,
    });
    writeln!(
        fit,
        "{}",
        serde_json::to_string_pretty(&doc).expect("fit serialises")
    )
    .map_err(data_err)?;

    let c_part = best
        .c_hat
        .map(|c| format!(", c {c:.4}"))
        .unwrap_or_default();
    println!(
        "{}: n {}, shift {}, T {}, a {:.6e}{}, loglik {:.4}",
        ds.name,
        ds.n(),
        best.shift_hat,
        best.t_hat,
        best.a_hat,
        c_part,
        best.loglik
    );
    if best.grid_edge {
        eprintln!("warning: support search ended on the largest candidate; raise --t-margin to explore further");
    }
    if best.degenerate {
        eprintln!("warning: sample is a single repeated value; fit degenerated to a point mass");
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let truth = match args.family {
        FamilyArg::Linear => FamilyParams::Linear {
            a: args.a,
            t_max: args.support,
            shift: args.shift,
        },
        FamilyArg::Poly => {
            let c = args
                .c
                .ok_or_else(|| CliError::Data("--family poly needs --c".into()))?;
            FamilyParams::Poly {
                a: args.a,
                c,
                n: args.n,
                t_max: args.support,
                shift: args.shift,
            }
        }
    };
    if args.count == 0 {
        return Err(CliError::Data("--count must be at least 1".into()));
    }
    let batch = SampleBatch::from_family(&truth, args.count, args.seed).map_err(solver_err)?;
    match &args.out {
        Some(dir) => {
            let mut w = out_file(dir, "sample.txt")?;
            for v in batch.values() {
                writeln!(w, "{v}").map_err(data_err)?;
            }
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for v in batch.values() {
                writeln!(w, "{v}").map_err(data_err)?;
            }
        }
    }
    Ok(())
}

fn preset_config(preset: PresetArg) -> StudyConfig {
    let linear = |a: f64| FamilyParams::Linear {
        a,
        t_max: 10,
        shift: 0,
    };
    match preset {
        PresetArg::LinearA01 => {
            StudyConfig::new(linear(-0.1), vec![10, 100, 1000, 5000], 1000, 314)
        }
        PresetArg::LinearA01UnknownT => {
            let mut cfg = StudyConfig::new(linear(-0.1), vec![5000], 100, 314);
            cfg.t_search = TSearch::MaxAnchored { margin: 200 };
            cfg
        }
        PresetArg::L1Strong | PresetArg::L1Weak => {
            let a = if matches!(preset, PresetArg::L1Strong) {
                -0.1
            } else {
                -0.0111
            };
            let mut cfg = StudyConfig::new(linear(a), vec![5, 20, 100, 1000], 1000, 314);
            cfg.t_search = TSearch::FixedRange { lo: 10, hi: 20 };
            cfg.a_solver = ASolver::GridA {
                points: 200,
                zero_margin: 1e-4,
            };
            cfg.compute_l1 = true;
            cfg
        }
        PresetArg::PolyCubic => {
            let truth = FamilyParams::Poly {
                a: -1.0 / 378.0,
                c: 5.0,
                n: 3,
                t_max: 10,
                shift: 0,
            };
            StudyConfig::new(truth, vec![100, 1000, 5000], 200, 314)
        }
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|tok| tok.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| {
            CliError::Data(format!(
                "--sizes must be a comma list of integers, got {text:?}"
            ))
        })
}

fn cmd_study(args: StudyArgs, mode: ExecMode) -> Result<(), CliError> {
    let mut cfg = preset_config(args.preset);
    if args.full_scale {
        cfg.trials *= 10;
        if matches!(args.preset, PresetArg::LinearA01 | PresetArg::PolyCubic) {
            cfg.sizes.push(50_000);
        }
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = &args.sizes {
        cfg.sizes = parse_sizes(s)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let result = sojourn_core::run_study(&cfg, mode).map_err(solver_err)?;

    let mut csv = out_file(&args.out, "study.csv")?;
    result.write_csv(&mut csv).map_err(data_err)?;
    let mut json = out_file(&args.out, "study.json")?;
    writeln!(json, "{}", result.to_json()).map_err(data_err)?;

    for row in &result.rows {
        let extras = [
            row.p_t_correct.map(|p| format!("P(T ok) {p:.3}")),
            row.l1_mean.map(|l| format!("l1 {l:.4}")),
        ]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>()
        .join(", ");
        println!(
            "n {:>6}: bias {:+.3e}, var {:.3e}, 1/FI {:.3e}{}{}",
            row.n,
            row.bias_a,
            row.var_a,
            row.inv_fisher_a,
            if extras.is_empty() { "" } else { ", " },
            extras
        );
    }
    Ok(())
}

fn cmd_smm(args: SmmArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.spec.display())))?;
    let spec = SmmSpec::from_json(&text).map_err(data_err)?;
    let method = match args.method {
        MethodArg::Auto => SolveMethod::Auto,
        MethodArg::Direct => SolveMethod::Direct,
        MethodArg::Power => SolveMethod::Power,
    };
    let st = spec.stationary_with(method).map_err(solver_err)?;

    let mut pi = out_file(&args.out, "pi.csv")?;
    st.write_csv(&mut pi).map_err(data_err)?;
    let mut json = out_file(&args.out, "smm.json")?;
    let doc = serde_json::json!({
        "states": spec.states(),
        "T": (0..spec.states()).map(|i| spec.t_of_state(i)).collect::<Vec<_>>(),
        "result": st,
    });
    writeln!(
        json,
        "{}",
        serde_json::to_string_pretty(&doc).expect("summary serialises")
    )
    .map_err(data_err)?;

    println!(
        "{} states, residual {:.2e}{}",
        spec.states(),
        st.residual,
        st.iterations
            .map(|it| format!(", {it} power sweeps"))
            .unwrap_or_default()
    );
    for (i, occ) in st.occupancy.iter().enumerate() {
        println!("state {}: occupancy {:.6}", i + 1, occ);
    }
    Ok(())
}

fn load_fit(path: &Path) -> Result<FitResult, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    // either the fit.json wrapper or a bare result object
    if let Ok(doc) = serde_json::from_str::<serde_json::Value>(&text) {
        if let Some(inner) = doc.get("fit") {
            return serde_json::from_value(inner.clone()).map_err(data_err);
        }
    }
    serde_json::from_str(&text).map_err(data_err)
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.data, args.format)?;
    let fit = args.fit.as_deref().map(load_fit).transpose()?;
    let bundle = ds.diagnose(fit.as_ref());

    let mut rho = out_file(&args.out, "rho.csv")?;
    bundle.write_rho_csv(&mut rho).map_err(data_err)?;
    let mut pmf = out_file(&args.out, "pmf.csv")?;
    bundle.write_pmf_csv(&mut pmf).map_err(data_err)?;
    if fit.is_some() {
        let mut qq = out_file(&args.out, "qq.csv")?;
        bundle.write_qq_csv(&mut qq).map_err(data_err)?;
        let mut overlay = out_file(&args.out, "overlay.csv")?;
        bundle.write_overlay_csv(&mut overlay).map_err(data_err)?;
    }

    println!(
        "{}: n {}, min {}, max {}, mean {:.4}, variance {:.4}",
        ds.name,
        ds.n(),
        ds.min(),
        ds.max(),
        ds.mean(),
        ds.variance()
    );
    Ok(())
}
