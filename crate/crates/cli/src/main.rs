use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcm_core::pipeline::commands::{self, Run};
use gcm_core::pipeline::RunConfig;
use gcm_core::GcmError;
use toml::{Table, Value};

#[derive(Parser)]
#[command(name = "gcm", version, about = "Quantum and classical chaos in the J=0 geometric collective model")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config key of the same name.
#[derive(Args)]
struct Common {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory ([output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sets both [stats] seed and [classical] seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// use | refresh | off
    #[arg(long, global = true)]
    cache: Option<String>,
    #[arg(long = "A", global = true, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long = "B", global = true, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long = "C", global = true)]
    c: Option<f64>,
    #[arg(long = "K", global = true)]
    k: Option<f64>,
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    hbar: Option<f64>,
    /// 2d-even | 2d-odd | 5d; repeat or comma-separate for several.
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Vec<String>,
    #[arg(long, global = true)]
    dimension: Option<i64>,
    #[arg(long, global = true)]
    a_osc: Option<f64>,
    #[arg(long, global = true)]
    c_shift: Option<f64>,
    /// dimension | tail | none
    #[arg(long, global = true)]
    certify: Option<String>,
    #[arg(long, global = true)]
    bin_size: Option<i64>,
    #[arg(long, global = true)]
    shift: Option<i64>,
    #[arg(long, global = true)]
    unfold_degree: Option<i64>,
    #[arg(long, global = true)]
    error_trials: Option<i64>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels of every configured scheme.
    Spectrum,
    /// Brody parameter against energy.
    Brody {
        /// External level list (one energy per line, or a spectrum CSV).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        histogram_energy: Option<f64>,
        #[arg(long)]
        histogram_width: Option<f64>,
    },
    /// Classical regular fraction along an energy list.
    Classical {
        #[command(flatten)]
        cl: ClassicalFlags,
    },
    /// Regular fraction over a B x E grid.
    FregMap {
        #[command(flatten)]
        cl: ClassicalFlags,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b_grid: Vec<f64>,
    },
    /// Joins a Brody curve with an f_reg curve on energy.
    Compare {
        brody: PathBuf,
        freg: PathBuf,
        /// Energy window `lo,hi` for the correlation.
        #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
        /// Largest accepted energy distance between joined points.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Probability densities of selected eigenstates.
    Density {
        #[arg(long, value_delimiter = ',')]
        levels: Vec<i64>,
        #[arg(long)]
        grid: Option<i64>,
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Bias and spread of the Brody fit on synthetic samples.
    BiasStudy {
        #[arg(long, value_delimiter = ',')]
        bias_omegas: Vec<f64>,
        #[arg(long)]
        bias_trials: Option<i64>,
    },
}

#[derive(Args)]
struct ClassicalFlags {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    energies: Vec<f64>,
    #[arg(long)]
    count: Option<i64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    step_tol: Option<f64>,
}

struct Overrides(Table);

impl Overrides {
    fn set(&mut self, section: &str, key: &str, v: Option<impl Into<Value>>) {
        if let Some(v) = v {
            let sec = self.0.entry(section).or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = sec {
                t.insert(key.into(), v.into());
            }
        }
    }

    fn list<T: Clone + Into<Value>>(&mut self, section: &str, key: &str, v: &[T]) {
        if !v.is_empty() {
            self.set(section, key, Some(Value::Array(v.iter().cloned().map(Into::into).collect())));
        }
    }
}

/// Prints a summary line; a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn path_value(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn build_config(cli: &Cli) -> Result<RunConfig, GcmError> {
    let c = &cli.common;
    let base = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| GcmError::Config(format!("cannot read {}: {e}", path.display())))?;
            text.parse::<Table>().map_err(|e| GcmError::Config(e.to_string()))?
        }
        None => Table::new(),
    };
    let mut o = Overrides(base);
    if c.hbar.is_some() || c.kappa.is_some() {
        if let Some(Value::Table(m)) = o.0.get_mut("model") {
            m.remove("hbar");
            m.remove("kappa");
        }
    }
    o.set("model", "A", c.a);
    o.set("model", "B", c.b);
    o.set("model", "C", c.c);
    o.set("model", "K", c.k);
    o.set("model", "kappa", c.kappa);
    o.set("model", "hbar", c.hbar);
    o.list("basis", "schemes", &c.scheme);
    o.set("basis", "dimension", c.dimension);
    o.set("basis", "a_osc", c.a_osc);
    o.set("basis", "c_shift", c.c_shift);
    o.set("basis", "certify", c.certify.clone());
    o.set("stats", "bin_size", c.bin_size);
    o.set("stats", "shift", c.shift);
    o.set("stats", "unfold_degree", c.unfold_degree);
    o.set("stats", "error_trials", c.error_trials);
    o.set("stats", "seed", c.seed.map(|s| s as i64));
    o.set("classical", "seed", c.seed.map(|s| s as i64));
    o.set("output", "dir", path_value(&c.out));
    o.set("output", "cache_dir", path_value(&c.cache_dir));
    o.set("output", "cache", c.cache.clone());
    o.set("output", "threads", c.threads.map(|t| t as i64));
    match &cli.command {
        Command::Brody { histogram_energy, histogram_width, .. } => {
            o.set("stats", "histogram_energy", *histogram_energy);
            o.set("stats", "histogram_width", *histogram_width);
        }
        Command::Classical { cl } | Command::FregMap { cl, .. } => {
            o.list("classical", "energies", &cl.energies);
            o.set("classical", "count", cl.count);
            o.set("classical", "t_max", cl.t_max);
            o.set("classical", "step_tol", cl.step_tol);
            if let Command::FregMap { b_grid, .. } = &cli.command {
                o.list("classical", "b_grid", b_grid);
            }
        }
        Command::Density { levels, grid, margin } => {
            o.list("density", "levels", levels);
            o.set("density", "grid", *grid);
            o.set("density", "margin", *margin);
        }
        Command::BiasStudy { bias_omegas, bias_trials } => {
            o.list("stats", "bias_omegas", bias_omegas);
            o.set("stats", "bias_trials", *bias_trials);
        }
        Command::Spectrum | Command::Compare { .. } => {}
    }
    if !o.0.contains_key("model") {
        return Err(GcmError::Config("no [model] section: pass --config or --A/--B/--kappa".into()));
    }
    RunConfig::from_toml(&toml::to_string(&o.0).map_err(|e| GcmError::Config(e.to_string()))?)
}

fn name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Spectrum => "spectrum",
        Command::Brody { .. } => "brody",
        Command::Classical { .. } => "classical",
        Command::FregMap { .. } => "freg-map",
        Command::Compare { .. } => "compare",
        Command::Density { .. } => "density",
        Command::BiasStudy { .. } => "bias-study",
    }
}

fn run(cli: Cli) -> Result<(), GcmError> {
    let cfg = build_config(&cli)?;
    if cfg.output.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.output.threads)
            .build_global()
            .map_err(|e| GcmError::Config(e.to_string()))?;
    }
    let mut run = Run::new(cfg, name(&cli.command));
    match &cli.command {
        Command::Spectrum => {
            for s in commands::cmd_spectrum(&mut run)? {
                say!("{}: {} levels, {} certified", s.scheme, s.levels.len(), s.converged_count);
            }
        }
        Command::Brody { input, .. } => {
            for c in commands::cmd_brody(&mut run, input.as_deref())? {
                say!("{} Brody points", c.points.len());
            }
        }
        Command::Classical { .. } => {
            for p in commands::cmd_classical(&mut run)? {
                say!("E={} f_reg={:.4} +- {:.4}", p.energy, p.f_reg, p.sigma);
            }
        }
        Command::FregMap { .. } => {
            let cells = commands::cmd_freg_map(&mut run)?;
            let failed = cells.iter().filter(|c| c.error.is_some()).count();
            say!("{} cells, {failed} failed", cells.len());
        }
        Command::Compare { brody, freg, window, tolerance } => {
            let w = window.as_ref().map(|w| (w[0], w[1]));
            let c = commands::cmd_compare(&mut run, brody, freg, w, *tolerance)?;
            say!("{} joined points, pearson = {}", c.points.len(), c.pearson);
        }
        Command::Density { .. } => {
            let levels = run.cfg.density.levels.clone();
            for g in commands::cmd_density(&mut run, &levels)? {
                say!("{} level {}: E={} integral={:.6}", g.scheme, g.level_index, g.energy, g.riemann_sum());
            }
        }
        Command::BiasStudy { .. } => {
            for r in commands::cmd_bias_study(&mut run)? {
                say!("omega={} mean={:.4} std={:.4} bias={:+.4}", r.omega_true, r.mean, r.std, r.bias());
            }
        }
    }
    let manifest = run.finish()?;
    say!("manifest: {}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
