use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use specaus_core::estimate::fit_all;
use specaus_core::svar::{check_stability, simulate, SeriesSample};
use specaus_core::FrequencyGrid;

use crate::analyze;
use crate::config::{load_model_file, AnalysisConfig, Resolved};
use crate::error::{io_at, CliError};
use crate::preprocess::{self, Table};

pub const FIT_SCHEMA: &str = "specaus-fit/1";

/// Overrides given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub grid: Option<usize>,
    pub length: Option<usize>,
    pub model: Option<PathBuf>,
}

pub fn load(config: &Path, ov: &Overrides) -> Result<Resolved, CliError> {
    let mut cfg = AnalysisConfig::load(config)?;
    if let Some(a) = ov.alpha {
        cfg.confidence = a;
    }
    if let Some(n) = ov.grid {
        cfg.grid.count = Some(n);
        if cfg.grid.angles.is_some() {
            return Err(CliError::Validation("--grid conflicts with explicit angles in the config".into()));
        }
    }
    cfg.resolve()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_at(path))
}

fn read_sample(path: &Path) -> Result<SeriesSample, CliError> {
    let f = File::open(path).map_err(io_at(path))?;
    SeriesSample::read_csv(f).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(w).map_err(io_at(path))?;
    w.flush().map_err(io_at(path))
}

pub fn cmd_simulate(r: &Resolved, ov: &Overrides, output: &Path) -> Result<(), CliError> {
    let spec = match &ov.model {
        Some(p) => load_model_file(p)?,
        None => r
            .config
            .model
            .clone()
            .ok_or_else(|| CliError::Validation("simulate needs a [model] section or --model".into()))?,
    };
    let model = spec.build(&r.graph, &r.contemp)?;
    let stability = check_stability(&model)?;
    eprintln!(
        "stable: {}  spectral radius: {:.6}  coefficient-sum condition: {}",
        stability.stable, stability.spectral_radius, stability.sum_condition
    );
    let t_len = ov
        .length
        .or(r.config.simulation.length)
        .ok_or_else(|| CliError::Validation("simulate needs --length or simulation.length".into()))?;
    if t_len == 0 {
        return Err(CliError::Validation("length must be positive".into()));
    }
    let seed = ov.seed.or(r.config.seed).unwrap_or(0);
    let q = r.lags.q();
    let mut w = create(output)?;
    let sample = simulate(&model, t_len, q, r.config.simulation.burn_in, seed)?;
    sample.write_csv(&mut w)?;
    w.flush().map_err(io_at(output))?;
    log::info!("wrote {} rows to {}", sample.len(), output.display());
    Ok(())
}

pub fn cmd_preprocess(r: &Resolved, input: &Path, output: &Path) -> Result<(), CliError> {
    let table = Table::from_sample(&read_sample(input)?);
    let out = preprocess::apply(&table, &r.config.preprocess)?;
    let mut w = create(output)?;
    out.into_sample()?.write_csv(&mut w)?;
    w.flush().map_err(io_at(output))
}

fn fit(r: &Resolved, input: &Path) -> Result<specaus_core::estimate::ModelFit, CliError> {
    let sample = read_sample(input)?;
    let fit = fit_all(&sample, &r.lags, &r.graph, &r.contemp)?;
    for w in &fit.warnings {
        log::warn!("{w}");
    }
    Ok(fit)
}

pub fn cmd_fit(r: &Resolved, input: &Path, output: &Path) -> Result<(), CliError> {
    let fit = fit(r, input)?;
    let mut doc = fit.to_json();
    doc["schema"] = FIT_SCHEMA.into();
    doc["lags"] = serde_json::to_value(fit.lags.to_named(&r.graph)).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(output, &doc)
}

/// Writes the JSON record to `output` and the CSV table next to it.
pub fn cmd_analyze(r: &Resolved, input: &Path, output: &Path) -> Result<(), CliError> {
    if r.queries.is_empty() {
        return Err(CliError::Validation("analyze: the config has no queries".into()));
    }
    let csv_path = output.with_extension("csv");
    if csv_path == output {
        return Err(CliError::Validation("analyze: output must not end in .csv".into()));
    }
    let fit = fit(r, input)?;
    let grid: &FrequencyGrid = &r.grid;
    let out = analyze::run(&fit, r, r.config.confidence, grid.angles());
    let doc = serde_json::to_value(&out).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(output, &doc)?;
    let mut w = create(&csv_path)?;
    analyze::write_csv(&out, &mut w)?;
    w.flush().map_err(io_at(&csv_path))
}
