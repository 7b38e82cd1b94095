//! `deepvarwt` command-line tool.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data errors, 3 for
//! numerical failures. Failures print one line on stderr.

mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use deepvarwt::diagnostics;
use deepvarwt::evaluation;
use deepvarwt::forecaster::{self, IntervalSpec};
use deepvarwt::io::{self, ForecastDocument};
use deepvarwt::simulation::{self, TrendSource};
use deepvarwt::trainer::{self, TrainConfig};
use deepvarwt::{Error, ErrorClass, ModelArchive, Result, SimSpec, TimeSeriesFrame};

use config::RunConfig;

const THREADS_VAR: &str = "DEEPVARWT_THREADS";
const ACF_MAX_LAG: usize = 20;

#[derive(Debug, Parser)]
#[command(
    name = "deepvarwt",
    version,
    about = "VAR with an LSTM trend: simulate, fit, forecast, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw series from a VAR with trend.
    Simulate(Common),
    /// Fit a model to a series CSV.
    Fit(Common),
    /// Forecast from a fitted model.
    Forecast(Common),
    /// Rolling-origin forecast evaluation.
    Evaluate(Common),
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Top-level seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Series CSV with header `t,y_1,...,y_m`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Trend CSV with header `t,mu_1,...,mu_m`.
    #[arg(long)]
    trend: Option<PathBuf>,
    /// Forecast horizon; for `evaluate`, steps 1..=n.
    #[arg(long)]
    horizon: Option<usize>,
    /// VAR lag order.
    #[arg(long)]
    lag: Option<usize>,
    /// Model archive (defaults to `<out>/model.json`).
    #[arg(long)]
    model: Option<PathBuf>,
}

/// Resolved settings shared by all commands.
struct Run {
    args: Common,
    config: RunConfig,
    seed: u64,
}

impl Run {
    fn new(args: Common) -> Result<Self> {
        let mut config = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let seed = args.seed.or(config.seed).unwrap_or(0);
        config.seed = Some(seed);
        config.train.seed = seed;
        if let Some(p) = args.lag {
            config.train.p = p;
        }
        if let Some(h) = args.horizon {
            if h == 0 {
                return Err(Error::HorizonZero);
            }
            config.forecast.horizon = h;
            config.evaluate.horizons = (1..=h).collect();
        }
        std::fs::create_dir_all(&args.out)?;
        Ok(Self { args, config, seed })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.args.out.join(name)
    }

    fn data(&self) -> Result<TimeSeriesFrame> {
        let path = self
            .args
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("--data <csv> is required".into()))?;
        io::ingest_csv(path)
    }

    fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.out(name))?))
    }

    /// Records the command, seed and effective configuration next to the
    /// artifacts.
    fn write_manifest(&self, command: &str, artifacts: &[&str]) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            version: &'a str,
            seed: u64,
            artifacts: &'a [&'a str],
            config: &'a RunConfig,
        }
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            artifacts,
            config: &self.config,
        };
        let mut w = self.writer("run.json")?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        std::io::Write::write_all(&mut w, b"\n")?;
        Ok(())
    }

    fn sim_spec(&self, len: usize, trend_offset: f64) -> Result<SimSpec> {
        let section = &self.config.simulate;
        let causal = section.parameters()?;
        let mut spec = SimSpec::new(causal, len, self.seed);
        spec.replications = section.replications;
        spec.init = section.init_mode();
        spec.trend = section.trend_source(self.seed, self.args.trend.as_deref())?;
        if trend_offset != 0.0 {
            let trend = spec.resolve_trend()?.map(|v| v + trend_offset);
            spec.trend = TrendSource::Values(trend);
        }
        Ok(spec)
    }
}

fn simulate(run: &Run) -> Result<()> {
    let spec = run.sim_spec(run.config.simulate.len, 0.0)?;
    let frames = simulation::simulate(&spec)?;
    let mut names = Vec::new();
    for (k, frame) in frames.iter().enumerate() {
        let name = if frames.len() == 1 {
            "series.csv".to_string()
        } else {
            format!("series_{:03}.csv", k + 1)
        };
        io::write_series_csv(run.out(&name), frame)?;
        names.push(name);
    }
    io::write_trend_csv(run.out("trend.csv"), &spec.resolve_trend()?)?;
    names.push("trend.csv".into());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    run.write_manifest("simulate", &refs)?;
    println!(
        "simulated {} series of length {} into {}",
        frames.len(),
        spec.len,
        run.args.out.display()
    );
    Ok(())
}

fn fit(run: &Run) -> Result<()> {
    let y = run.data()?;
    let train: &TrainConfig = &run.config.train;
    let mut log = csv_writer(run.writer("training_log.csv")?);
    log.write_record(["iteration", "loglik", "rc1", "rc2", "spectral_radius"])?;
    let mut log_err = None;
    let model = trainer::fit_with_log(&y, train, |r| {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        if let Err(e) = log.write_record([
            r.iteration.to_string(),
            r.loglik.to_string(),
            opt(r.rc1),
            opt(r.rc2),
            r.spectral_radius.to_string(),
        ]) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    log.flush()?;

    let p = model.lag_order();
    let residuals = model.residuals(&y)?;
    io::write_residuals_csv(run.out("residuals.csv"), &y.time()[p..], &residuals)?;
    io::write_trend_csv(run.out("trend.csv"), &model.trend(y.len()))?;
    let maxlag = ACF_MAX_LAG.min(residuals.rows().saturating_sub(1));
    diagnostics::write_acf(
        run.writer("acf.csv")?,
        &diagnostics::acf(&residuals, maxlag),
    )?;
    let (theoretical, empirical) = diagnostics::qq_pairs(&residuals);
    diagnostics::write_qq(run.writer("qq.csv")?, &theoretical, &empirical)?;
    let (loglik, iterations, converged) =
        (model.final_loglik, model.iterations_used, model.converged);
    ModelArchive::new(model, train.clone()).save(run.out("model.json"))?;
    run.write_manifest(
        "fit",
        &[
            "model.json",
            "residuals.csv",
            "trend.csv",
            "training_log.csv",
            "acf.csv",
            "qq.csv",
        ],
    )?;
    println!("fitted: loglik {loglik:.6}, {iterations} updates, converged {converged}");
    Ok(())
}

fn forecast(run: &Run) -> Result<()> {
    let path = run
        .args
        .model
        .clone()
        .unwrap_or_else(|| run.out("model.json"));
    let archive = ModelArchive::load(&path)?;
    let y = run.data()?;
    let section = &run.config.forecast;
    let interval = IntervalSpec {
        level: section.level,
        round_z: section.round_z,
    };
    let result = forecaster::forecast(&archive.model, &y, section.horizon, interval)?;
    io::write_forecast_csv(run.out("forecast.csv"), &result)?;
    ForecastDocument::new(&result, archive.seed, section.level).save(run.out("forecast.json"))?;
    run.write_manifest("forecast", &["forecast.csv", "forecast.json"])?;
    println!(
        "forecast {} steps for {} series",
        result.horizon(),
        result.points.cols()
    );
    Ok(())
}

fn evaluate(run: &Run) -> Result<()> {
    let metrics = run.config.evaluate.metrics();
    metrics.validate()?;
    let mut artifacts = vec!["eval_summary.csv", "eval_scores.csv"];
    let y = match &run.args.data {
        Some(_) => run.data()?,
        None => {
            let len = metrics.window + metrics.max_horizon() + metrics.origins - 1;
            let mut spec = run.sim_spec(len, run.config.evaluate.stand_in_level)?;
            spec.replications = 1;
            let frame = simulation::simulate(&spec)?.remove(0);
            io::write_series_csv(run.out("stand_in.csv"), &frame)?;
            artifacts.push("stand_in.csv");
            frame
        }
    };
    let report = evaluation::evaluate(&y, &run.config.train, &metrics)?;
    evaluation::write_summary(run.writer("eval_summary.csv")?, &report)?;
    evaluation::write_scores(run.writer("eval_scores.csv")?, &report)?;
    run.write_manifest("evaluate", &artifacts)?;
    println!(
        "evaluated {} origins x {} horizons for {} series",
        metrics.origins,
        metrics.horizons.len(),
        report.series.len()
    );
    Ok(())
}

fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{THREADS_VAR} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!(
                "{}",
                one_line(text.lines().next().unwrap_or("invalid arguments"))
            );
            return ExitCode::from(1);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Simulate(a) => simulate(&Run::new(a)?),
        Command::Fit(a) => fit(&Run::new(a)?),
        Command::Forecast(a) => forecast(&Run::new(a)?),
        Command::Evaluate(a) => evaluate(&Run::new(a)?),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::from(exit_code(e.class()))
        }
    }
}
