use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hysterlab::epnn::{simulate_denormalized, Architecture, ModelFile, MODEL_FORMAT_VERSION};
use hysterlab::excitation::SignalDescriptor;
use hysterlab::signals::{estimate_rate, normalize, split, write_csv, TimeSeriesPair};
use hysterlab::training::{self, hybrid_train, Metrics, Phase, TrainingConfig, TrainingTrace};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::manifest::{load_datasets, load_series, read_json, read_model_spec, resolve, Manifest};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Test MSE ratio against the companion run at which the report flags it.
pub const COMPANION_FLAG_RATIO: f64 = 100.0;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn config_hash(config: &TrainingConfig) -> String {
    sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::file(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::file(path, e))
}

fn with_rate(series: TimeSeriesPair, arch: &Architecture) -> TimeSeriesPair {
    if arch.rate_input && series.xdot().is_none() {
        estimate_rate(&series)
    } else {
        series
    }
}

fn csv_bytes(header: &[String], series: &TimeSeriesPair) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    for line in header {
        out.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    write_csv(series, &mut out)?;
    Ok(out)
}

pub struct GenerateArgs<'a> {
    pub spec: &'a Path,
    pub signal: &'a Path,
    pub out: &'a Path,
    pub with_xdot: bool,
}

pub fn generate(args: GenerateArgs) -> Result<(), CliError> {
    let spec = read_model_spec(args.spec)?;
    spec.validate().map_err(|e| CliError::at(args.spec)(e.into()))?;
    let descriptor: SignalDescriptor = read_json(args.signal)?;
    let base = args.signal.parent().unwrap_or(Path::new("."));
    let mut series = descriptor.synthesize(Some(base)).map_err(|e| CliError::at(args.signal)(e.into()))?;
    if spec.needs_rate() || args.with_xdot {
        series = estimate_rate(&series);
    }
    let y = spec.simulate(&series)?;
    let series = series.with_y(y)?;
    let spec_bytes = fs::read(args.spec).map_err(|e| CliError::file(args.spec, e))?;
    let signal_bytes = fs::read(args.signal).map_err(|e| CliError::file(args.signal, e))?;
    let header = vec![
        format!("tool_version: {TOOL_VERSION}"),
        format!("spec_sha256: {}", sha256_hex(&spec_bytes)),
        format!("signal_sha256: {}", sha256_hex(&signal_bytes)),
    ];
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(args.out, &csv_bytes(&header, &series)?)?;
    println!("wrote {} samples to {}", series.len(), args.out.display());
    Ok(())
}

pub struct TrainArgs<'a> {
    pub manifest: &'a Path,
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
}

/// Files written by a training run.
pub struct TrainOutputs {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub report: PathBuf,
}

pub fn train(args: TrainArgs) -> Result<TrainOutputs, CliError> {
    let manifest: Manifest = read_json(args.manifest)?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let arch = manifest.arch;
    arch.validate().map_err(|e| CliError::at(args.manifest)(e.into()))?;
    let datasets: Vec<PathBuf> = manifest.dataset.paths().iter().map(|p| resolve(base, p)).collect();
    let mut config = match &manifest.config {
        Some(p) => {
            let path = resolve(base, p);
            let text = fs::read_to_string(&path).map_err(|e| CliError::file(&path, e))?;
            TrainingConfig::from_json(&text).map_err(|e| CliError::at(&path)(e.into()))?
        }
        None => TrainingConfig::default(),
    };
    let companion = manifest.companion_report.as_ref().map(|p| resolve(base, p));
    if let Some(p) = &companion {
        if !p.exists() {
            return Err(CliError::file(p, "companion report not found"));
        }
    }
    let series = load_datasets(&datasets, arch.rate_input)?;

    let seed = args.seed.unwrap_or(manifest.seed);
    config.ga.seed = seed;
    config.validate()?;
    let hash = config_hash(&config);
    let out_dir = match args.out {
        Some(dir) => dir.to_path_buf(),
        None => resolve(base, &manifest.output_dir),
    };

    let (norm, scales) = normalize(&series);
    let (train_norm, test_norm) = split(&norm, manifest.split).map_err(|e| CliError::at(args.manifest)(e.into()))?;
    let (train_raw, _) = split(&series, manifest.split)?;
    let k = train_raw.len();

    let started = Instant::now();
    let (params, trace) = hybrid_train(&arch, &train_norm, &config)?;
    let seconds = started.elapsed().as_secs_f64();

    let train_metrics = training::evaluate(&params, &arch, &train_raw, &scales)?;
    let test_metrics = training::evaluate_from(&params, &arch, &series, &scales, k)?;
    let test_norm_mse = training::heldout_mse(&params, &arch, &train_norm, &test_norm)?;

    let model = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        seed,
        config_hash: hash.clone(),
        arch,
        scales,
        params,
    };

    create_dir(&out_dir)?;
    let outputs = TrainOutputs {
        model: out_dir.join("model.json"),
        trace: out_dir.join("trace.csv"),
        report: out_dir.join("report.txt"),
    };
    write_file(&outputs.model, (model.to_json() + "\n").as_bytes())?;
    write_file(&outputs.trace, trace_csv(&trace, seed, &hash).as_bytes())?;

    let gain2 = scales.y.gain * scales.y.gain;
    let mut report = String::new();
    let mut line = |key: &str, value: String| writeln!(report, "{key}: {value}").unwrap();
    line("tool_version", TOOL_VERSION.into());
    line("seed", seed.to_string());
    line("config_hash", hash.clone());
    line("datasets", datasets.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "));
    line("arch", format!("n_stop={} n_tanh={} rate_input={}", arch.n_stop, arch.n_tanh, arch.rate_input));
    line("inner_parameters", arch.inner_len().to_string());
    line("output_parameters", arch.output_len().to_string());
    line("nominal_parameter_count", arch.nominal_count().to_string());
    line("samples_train", k.to_string());
    line("samples_test", (series.len() - k).to_string());
    line("epochs_ga", trace.epochs_in(Phase::Ga).to_string());
    line("epochs_sgd", trace.epochs_in(Phase::Sgd).to_string());
    line(
        "sgd_status",
        trace.sgd_status.map_or("not run".to_string(), |s| format!("{s:?}")),
    );
    line("training_seconds", format!("{seconds:.3}"));
    line("train_mse", train_metrics.mse.to_string());
    line("train_mse_normalized", (train_metrics.mse / gain2).to_string());
    line("train_max_relative_error", train_metrics.max_relative_error.to_string());
    line("test_mse", test_metrics.mse.to_string());
    line("test_mse_normalized", test_norm_mse.to_string());
    line("test_max_relative_error", test_metrics.max_relative_error.to_string());
    if let Some(path) = &companion {
        let other = companion_test_mse(path)?;
        let ratio = test_metrics.mse / other;
        line("companion_report", path.display().to_string());
        line("companion_test_mse", other.to_string());
        line("test_mse_ratio_vs_companion", ratio.to_string());
        line("companion_flag", (ratio >= COMPANION_FLAG_RATIO).to_string());
    }
    write_file(&outputs.report, report.as_bytes())?;

    println!(
        "trained seed {seed}: train mse {} test mse {} ({} GA + {} SGD epochs)",
        train_metrics.mse,
        test_metrics.mse,
        trace.epochs_in(Phase::Ga),
        trace.epochs_in(Phase::Sgd)
    );
    println!("wrote {}", out_dir.display());
    Ok(outputs)
}

fn trace_csv(trace: &TrainingTrace, seed: u64, hash: &str) -> String {
    let mut s = format!("# tool_version: {TOOL_VERSION}\n# seed: {seed}\n# config_hash: {hash}\nepoch,phase,mse\n");
    for e in &trace.entries {
        writeln!(s, "{},{},{}", e.epoch, e.phase.tag(), e.best_mse).unwrap();
    }
    s
}

/// Reads a `key: value` report and returns its `test_mse`.
pub fn report_value(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .find(|(k, _)| *k == key)
        .and_then(|(_, v)| v.trim().parse().ok())
}

fn companion_test_mse(path: &Path) -> Result<f64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    report_value(&text, "test_mse").ok_or_else(|| CliError::file(path, "no `test_mse` line"))
}

pub struct SimulateArgs<'a> {
    pub model: &'a Path,
    pub input: &'a Path,
    pub out: &'a Path,
    pub loop_export: bool,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let model = ModelFile::load(args.model)?;
    let series = with_rate(load_series(args.input)?, &model.arch);
    let sim = simulate_denormalized(&model.params, &model.arch, &series, &model.scales)
        .map_err(|e| CliError::at(args.input)(e.into()))?;
    for w in &sim.warnings {
        eprintln!("warning: {w}");
    }
    let mut s = model_header(&model);
    if args.loop_export {
        s.push_str("x,y_pred\n");
        for (x, y) in series.x().iter().zip(&sim.y) {
            writeln!(s, "{x},{y}").unwrap();
        }
    } else {
        s.push_str("t,x,y_pred\n");
        for ((t, x), y) in series.t().iter().zip(series.x()).zip(&sim.y) {
            writeln!(s, "{t},{x},{y}").unwrap();
        }
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_file(args.out, s.as_bytes())?;
    println!("wrote {} predictions to {}", sim.y.len(), args.out.display());
    Ok(())
}

fn model_header(model: &ModelFile) -> String {
    format!(
        "# tool_version: {TOOL_VERSION}\n# seed: {}\n# config_hash: {}\n",
        model.seed, model.config_hash
    )
}

pub struct EvaluateArgs<'a> {
    pub model: &'a Path,
    pub data: &'a Path,
    pub split: Option<f64>,
    pub out: Option<&'a Path>,
}

/// One scored stretch of the data.
pub struct Scope {
    pub name: &'static str,
    pub start: usize,
    pub metrics: Metrics,
}

pub fn evaluate(args: EvaluateArgs) -> Result<Vec<Scope>, CliError> {
    let model = ModelFile::load(args.model)?;
    let series = with_rate(load_series(args.data)?, &model.arch);
    if series.y().is_none() {
        return Err(CliError::file(args.data, "evaluation data has no `y` column"));
    }
    let (arch, params, scales) = (&model.arch, &model.params, &model.scales);
    let scopes = match args.split {
        Some(f) => {
            let (train_raw, _) = split(&series, f).map_err(|e| CliError::at(args.data)(e.into()))?;
            let k = train_raw.len();
            vec![
                Scope { name: "train", start: 0, metrics: training::evaluate(params, arch, &train_raw, scales)? },
                Scope { name: "test", start: k, metrics: training::evaluate_from(params, arch, &series, scales, k)? },
            ]
        }
        None => vec![Scope { name: "all", start: 0, metrics: training::evaluate(params, arch, &series, scales)? }],
    };

    let gain2 = scales.y.gain * scales.y.gain;
    let mut table = model_header(&model);
    table.push_str("scope,samples,mse,mse_normalized,max_relative_error\n");
    for s in &scopes {
        let m = &s.metrics;
        println!(
            "{}: samples {} mse {} mse_normalized {} max_relative_error {}",
            s.name,
            m.errors.len(),
            m.mse,
            m.mse / gain2,
            m.max_relative_error
        );
        writeln!(table, "{},{},{},{},{}", s.name, m.errors.len(), m.mse, m.mse / gain2, m.max_relative_error).unwrap();
    }
    if let Some(dir) = args.out {
        create_dir(dir)?;
        write_file(&dir.join("metrics.csv"), table.as_bytes())?;
        let y = series.y().unwrap();
        let mut errors = model_header(&model);
        errors.push_str("scope,index,t,y,y_pred,error,relative_error\n");
        for s in &scopes {
            for (i, (e, r)) in s.metrics.errors.iter().zip(&s.metrics.relative_errors).enumerate() {
                let k = s.start + i;
                writeln!(errors, "{},{k},{},{},{},{e},{r}", s.name, series.t()[k], y[k], y[k] + e).unwrap();
            }
        }
        write_file(&dir.join("errors.csv"), errors.as_bytes())?;
    }
    Ok(scopes)
}
