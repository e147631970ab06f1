//! Study runners and the run manifest.
//!
//! [`run`] executes one configured study inside its output directory and
//! always leaves a `manifest.json` behind (fault-lab runs name it after the
//! dataset file), including when the study fails.

use std::fs::File;
use std::io::BufReader;
use std::path::{Component, Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{
    ConfigError, DistCase, DistParams, FaultLabParams, FaultMode, MlParams, MlTask, StabilityMode,
    StabilityParams, StudyConfig, StudyKind,
};
use crate::dist::{
    self, generate_random_loads, read_random_loads, read_shape, run_monte_carlo, run_time_series,
    synthetic_load_shape, synthetic_pv_shape, synthetic_storage_shape, write_hours_csv,
    write_meters_csv, write_random_loads, write_runs_csv, write_shape, write_stats_csv, DistError,
    Feeder, LoadShape, LoadSource, Meter, TimeSeriesInputs,
};
use crate::fault_lab::{
    self, enumerate_train_cases, sample_test_cases, write_dataset, Case1System, FaultLabError,
};
use crate::lightning::{
    read_events, run_study, summary_text, write_events, EventRow, ImpactClass, LightningConfig,
    LightningError,
};
use crate::ml::{
    agreement, one_hot, save_model, Agreement, Classifier, Dataset, KnnModel, MinMaxScaler,
    MlError, MlpClassifier, MlpTrainConfig, SavedModel, SvmConfig, SvmModel,
};
use crate::report::{self, histogram_svg, line_svg, scatter_svg, ReportError, Series, Style};
use crate::stability::{
    self, cct_equal_area, grid, simulate, sweep, write_sweep_csv, write_trace_csv, FaultEvent,
    OperatingPoint, SimOptions, StabilityError, Verdict,
};

pub const TOOL: &str = "gridstudies";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    FaultLab(#[from] FaultLabError),
    #[error(transparent)]
    Lightning(#[from] LightningError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("thread pool: {0}")]
    Threads(String),
    #[error("{0}")]
    Input(String),
}

impl StudyError {
    /// 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StudyError + '_ {
    move |source| StudyError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub study: StudyKind,
    /// SHA-256 of the resolved configuration as TOML.
    pub config_sha256: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<OutputFile>,
    pub config: StudyConfig,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.status == "ok"
    }
}

pub fn config_hash(config: &StudyConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

/// Files written by a study, all directly inside one directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, StudyError> {
        std::fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_of(&self, name: &str) -> Result<PathBuf, StudyError> {
        let p = Path::new(name);
        let plain = p.components().count() == 1
            && matches!(p.components().next(), Some(Component::Normal(_)));
        if !plain {
            return Err(StudyError::Input(format!(
                "output name {name:?} must be a plain file name"
            )));
        }
        Ok(self.root.join(p))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), StudyError> {
        let path = self.path_of(name)?;
        std::fs::write(&path, bytes).map_err(io_err(&path))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Renders into memory with `f` and writes the result.
    pub fn write_with<E>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>,
    ) -> Result<(), StudyError>
    where
        StudyError: From<E>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn listing(&self) -> Vec<OutputFile> {
        self.files
            .iter()
            .map(|name| OutputFile {
                name: name.clone(),
                bytes: std::fs::metadata(self.root.join(name)).map_or(0, |m| m.len()),
            })
            .collect()
    }
}

fn manifest_name(config: &StudyConfig) -> String {
    match (&config.study, &config.fault_lab) {
        (StudyKind::FaultLab, Some(p)) => {
            let file = fault_file_name(p);
            let stem = Path::new(&file)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(file.clone());
            format!("{stem}.manifest.json")
        }
        _ => "manifest.json".into(),
    }
}

/// Runs the configured study and writes its manifest. On failure the
/// manifest records the error and the files written so far.
pub fn run(config: &StudyConfig) -> Result<RunManifest, StudyError> {
    let mut config = config.clone();
    config.resolve();
    config.validate()?;
    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut out = OutputDir::create(&config.out)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let result = builder
        .build()
        .map_err(|e| StudyError::Threads(e.to_string()))
        .and_then(|pool| pool.install(|| dispatch(&config, &mut out)));

    let manifest = RunManifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        study: config.study,
        config_sha256: config_hash(&config),
        seed: config.seed,
        threads: config.threads,
        started_unix_s: started,
        wall_clock_s: clock.elapsed().as_secs_f64(),
        status: if result.is_ok() { "ok" } else { "error" }.into(),
        error: result.as_ref().err().map(|e| e.to_string()),
        outputs: out.listing(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = out.path_of(&manifest_name(&config))?;
    std::fs::write(&path, text + "\n").map_err(io_err(&path))?;
    result.map(|_| manifest)
}

fn dispatch(config: &StudyConfig, out: &mut OutputDir) -> Result<(), StudyError> {
    let seed = config.seed;
    match config.study {
        StudyKind::FaultLab => {
            run_fault_lab(config.fault_lab.as_ref().expect("resolved"), seed, out)
        }
        StudyKind::Lightning => {
            run_lightning(config.lightning.as_ref().expect("resolved"), seed, out)
        }
        StudyKind::Dist => run_dist(config.dist.as_ref().expect("resolved"), seed, out),
        StudyKind::Stability => run_stability(config.stability.as_ref().expect("resolved"), out),
        StudyKind::Ml => run_ml(config.ml.as_ref().expect("resolved"), seed, out),
    }
}

fn fault_file_name(p: &FaultLabParams) -> String {
    p.file.clone().unwrap_or_else(|| {
        match p.mode {
            FaultMode::Train => "train.csv",
            FaultMode::Test => "test.csv",
        }
        .into()
    })
}

pub fn run_fault_lab(p: &FaultLabParams, seed: u64, out: &mut OutputDir) -> Result<(), StudyError> {
    let sys = Case1System::new(p.system.clone());
    let cases = match p.mode {
        FaultMode::Train => enumerate_train_cases(),
        FaultMode::Test => sample_test_cases(seed, p.r_max)?,
    };
    let rows = sys.build_dataset(&cases)?;
    out.write_with(&fault_file_name(p), |b| write_dataset(&rows, b))
}

fn histogram(
    out: &mut OutputDir,
    file: &str,
    name: &str,
    values: &[f64],
    bins: usize,
    style: Style,
) -> Result<(), StudyError> {
    let (svg, _) = histogram_svg(name, values, bins, &style)?;
    out.write(file, svg.as_bytes())
}

pub fn run_lightning(
    cfg: &LightningConfig,
    seed: u64,
    out: &mut OutputDir,
) -> Result<(), StudyError> {
    let r = run_study(cfg, seed)?;
    out.write_with("events.csv", |b| write_events(&r.events, b))?;
    out.write("summary.txt", summary_text(&r).as_bytes())?;
    let col = |f: fn(&crate::lightning::StrokeSample) -> f64| -> Vec<f64> {
        r.events.iter().map(|e| f(&e.sample)).collect()
    };
    let bins = 40;
    histogram(
        out,
        "peak.svg",
        "Stroke peak",
        &col(|s| s.ip_ka),
        bins,
        Style::new("Stroke peak current", "Peak current (kA)", "Strokes"),
    )?;
    histogram(
        out,
        "front.svg",
        "Front time",
        &col(|s| s.tf_us),
        bins,
        Style::new("Front time", "Front time (us)", "Strokes"),
    )?;
    histogram(
        out,
        "tail.svg",
        "Time to half peak",
        &col(|s| s.th_us),
        bins,
        Style::new("Time to half peak", "Time to half peak (us)", "Strokes"),
    )?;
    histogram(
        out,
        "angle.svg",
        "Phase angle",
        &col(|s| s.phase_angle_deg),
        bins,
        Style::new("Phase angle at impact", "Angle (deg)", "Strokes"),
    )?;
    let groups: Vec<Series> = ImpactClass::all()[1..]
        .iter()
        .map(|&c| {
            let pts = r
                .events
                .iter()
                .filter(|e| e.class == c)
                .map(|e| (e.sample.x_along_m, e.sample.y_lateral_m))
                .collect();
            Series::new(&format!("{} ({})", c.wire_label(), c.place_label()), pts)
        })
        .collect();
    if groups.iter().any(|g| !g.points.is_empty()) {
        let svg = scatter_svg(
            &groups,
            &Style::new(
                "Strokes to the line",
                "Along the line (m)",
                "Lateral offset (m)",
            ),
        )?;
        out.write("impacts.svg", svg.as_bytes())?;
    }
    Ok(())
}

fn read_file(path: &Path) -> Result<BufReader<File>, StudyError> {
    File::open(path).map(BufReader::new).map_err(io_err(path))
}

fn time_series_inputs(
    p: &DistParams,
    feeder: &Feeder,
    seed: u64,
) -> Result<TimeSeriesInputs, StudyError> {
    let load_shapes = if p.load_shapes.is_empty() {
        feeder
            .loads
            .iter()
            .enumerate()
            .map(|(k, l)| {
                synthetic_load_shape(&l.name, p.hours, k as f64, seed.wrapping_add(k as u64))
            })
            .collect()
    } else {
        p.load_shapes
            .iter()
            .zip(&feeder.loads)
            .map(|(path, l)| Ok(read_shape(&l.name, read_file(path)?)?.normalized()))
            .collect::<Result<Vec<LoadShape>, StudyError>>()?
    };
    let pv_shape = match &p.pv_shape {
        Some(path) => read_shape("pv", read_file(path)?)?.normalized(),
        None => synthetic_pv_shape(p.hours, seed ^ 0x5056),
    };
    let strategy = if p.case == DistCase::A4 { 2 } else { 1 };
    let storage_shape = match &p.storage_shape {
        Some(path) => read_shape("storage", read_file(path)?)?,
        None => synthetic_storage_shape(strategy, p.hours),
    };
    Ok(TimeSeriesInputs {
        load_shapes,
        pv_shape: Some(pv_shape),
        storage_shape: Some(storage_shape),
    })
}

fn meter_lines(name: &str, m: &Meter) -> Vec<(String, String)> {
    let cols = dist::METER_COLUMNS;
    let vals = [
        m.kwh,
        m.kvarh,
        m.peak_kw,
        m.peak_kva,
        m.losses_kwh,
        m.losses_kvarh,
        m.peak_losses_kw,
    ];
    cols.iter()
        .zip(vals)
        .map(|(c, v)| (format!("{name} {c}"), format!("{v:.2}")))
        .collect()
}

fn text_block(lines: &[(String, String)]) -> String {
    let refs: Vec<(&str, &str)> = lines
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    report::summary_lines(&refs)
}

pub fn run_dist(p: &DistParams, seed: u64, out: &mut OutputDir) -> Result<(), StudyError> {
    let mut feeder = p.feeder.clone();
    if p.case.is_time_series() {
        if matches!(p.case, DistCase::A2 | DistCase::A3 | DistCase::A4) {
            feeder.pv_kw = Some(p.pv_kw);
        }
        if matches!(p.case, DistCase::A3 | DistCase::A4) {
            feeder.storage = Some(p.storage.clone());
        }
        let inputs = time_series_inputs(p, &feeder, seed)?;
        for s in &inputs.load_shapes {
            out.write_with(&format!("shape_{}.csv", s.name), |b| write_shape(s, b))?;
        }
        if feeder.pv_kw.is_some() {
            let s = inputs.pv_shape.as_ref().expect("set above");
            out.write_with("shape_pv.csv", |b| write_shape(s, b))?;
        }
        if feeder.storage.is_some() {
            let s = inputs.storage_shape.as_ref().expect("set above");
            out.write_with("shape_storage.csv", |b| write_shape(s, b))?;
        }
        let r = run_time_series(&feeder, &inputs, 0, p.hours, None)?;
        out.write_with("hours.csv", |b| write_hours_csv(&r.hours, b))?;
        let mut meters = vec![("Source".to_string(), r.source_meter)];
        for (l, m) in feeder.lines.iter().zip(&r.line_meters) {
            meters.push((l.name.clone(), *m));
        }
        out.write_with("meters.csv", |b| write_meters_csv(&meters, b))?;
        let mut lines = vec![
            ("Case".to_string(), p.case.to_string()),
            ("Hours".to_string(), p.hours.to_string()),
        ];
        for (name, m) in &meters {
            lines.extend(meter_lines(name, m));
        }
        out.write("summary.txt", text_block(&lines).as_bytes())?;

        let hour = |f: fn(&dist::HourRecord) -> f64| -> Vec<(f64, f64)> {
            r.hours.iter().map(|h| (h.hour as f64, f(h))).collect()
        };
        let mut power = vec![
            Series::new("Source kW", hour(|h| h.source_kw)),
            Series::new("Source kvar", hour(|h| h.source_kvar)),
        ];
        if feeder.pv_kw.is_some() {
            power.push(Series::new("PV kW", hour(|h| h.pv_kw)));
        }
        if feeder.storage.is_some() {
            power.push(Series::new("Storage kW", hour(|h| h.storage_kw)));
        }
        let svg = line_svg(
            &power,
            &Style::new(
                &format!("Case {} source power", p.case),
                "Hour",
                "Power (kW, kvar)",
            ),
        )?;
        out.write("power.svg", svg.as_bytes())?;
        let svg = line_svg(
            &[Series::new("Load 3 voltage", hour(|h| h.load3_v_pu))],
            &Style::new(
                &format!("Case {} voltage at the last load", p.case),
                "Hour",
                "Voltage (pu)",
            ),
        )?;
        out.write("voltage.svg", svg.as_bytes())?;
        let svg = line_svg(
            &[Series::new("Losses kW", hour(|h| h.losses_kw))],
            &Style::new(&format!("Case {} losses", p.case), "Hour", "Losses (kW)"),
        )?;
        out.write("losses.svg", svg.as_bytes())?;
        return Ok(());
    }

    let with_gen = matches!(p.case, DistCase::B2 | DistCase::B4);
    let gen = with_gen.then_some(p.gen_kw);
    let source = match p.case {
        DistCase::B1 | DistCase::B2 => LoadSource::Internal { seed },
        _ => {
            let names: Vec<String> = feeder.loads.iter().map(|l| l.name.clone()).collect();
            let table = match &p.random_loads {
                Some(path) => read_random_loads(&names, read_file(path)?)?,
                None => generate_random_loads(&feeder, p.runs, seed, gen),
            };
            out.write_with("random_loads.csv", |b| {
                write_random_loads(&feeder, &table, b)
            })?;
            LoadSource::External(table)
        }
    };
    let r = run_monte_carlo(&feeder, p.runs, &source, gen)?;
    out.write_with("runs.csv", |b| write_runs_csv(&feeder, &r.runs, b))?;
    out.write_with("stats.csv", |b| write_stats_csv(&r.table, b))?;
    let mut lines = vec![
        ("Case".to_string(), p.case.to_string()),
        ("Runs".to_string(), p.runs.to_string()),
    ];
    for (name, s) in &r.table {
        lines.push((format!("{name} mean kW"), format!("{:.2}", s.mean_kw)));
        lines.push((format!("{name} mean kvar"), format!("{:.2}", s.mean_kvar)));
        lines.push((format!("{name} std kW"), format!("{:.2}", s.std_kw)));
        lines.push((format!("{name} std kvar"), format!("{:.2}", s.std_kvar)));
    }
    out.write("summary.txt", text_block(&lines).as_bytes())?;

    for (k, l) in feeder.loads.iter().enumerate() {
        let v: Vec<f64> = r.runs.iter().map(|run| run.loads[k].re).collect();
        histogram(
            out,
            &format!("{}_kW.svg", l.name),
            &l.name,
            &v,
            p.bins,
            Style::new(
                &format!("Case {} {} phase-A power", p.case, l.name),
                "Active power (kW)",
                "Runs",
            ),
        )?;
    }
    for (k, l) in feeder.lines.iter().enumerate() {
        let v: Vec<f64> = r.runs.iter().map(|run| run.lines[k].re).collect();
        histogram(
            out,
            &format!("{}_kW.svg", l.name),
            &l.name,
            &v,
            p.bins,
            Style::new(
                &format!("Case {} {} sending phase-A power", p.case, l.name),
                "Active power (kW)",
                "Runs",
            ),
        )?;
    }
    let v: Vec<f64> = r.runs.iter().map(|run| run.source.re).collect();
    histogram(
        out,
        "Source_kW.svg",
        "Source",
        &v,
        p.bins,
        Style::new(
            &format!("Case {} source phase-A power", p.case),
            "Active power (kW)",
            "Runs",
        ),
    )
}

pub fn run_stability(p: &StabilityParams, out: &mut OutputDir) -> Result<(), StudyError> {
    let model = &p.model;
    let opts = SimOptions {
        dt: p.dt_s,
        ..SimOptions::default()
    };
    match p.mode {
        StabilityMode::Single => {
            let pf = model.pu_from_mw(p.p_mw);
            if pf > 1.0 {
                return Err(StudyError::Input(format!(
                    "{} MW exceeds the {} MVA rating",
                    p.p_mw, model.s_base_mva
                )));
            }
            let op = OperatingPoint::from_power_factor(pf);
            let fault = FaultEvent::at_transformer(0.1, p.duration_ms * 1e-3);
            let (trace, verdict) = simulate(model, &op, &fault, &opts)?;
            out.write_with("trace.csv", |b| write_trace_csv(&trace, b))?;
            let mut lines = vec![
                ("Power (MW)".to_string(), format!("{}", p.p_mw)),
                ("Power factor".to_string(), format!("{pf:.4}")),
                (
                    "Fault duration (ms)".to_string(),
                    format!("{}", p.duration_ms),
                ),
                (
                    "Verdict".to_string(),
                    match verdict {
                        Verdict::Stable => "the system is stable",
                        Verdict::Unstable => "the system is unstable",
                    }
                    .to_string(),
                ),
            ];
            match cct_equal_area(model, &op) {
                Ok(c) if c.t_crit.is_finite() => lines.push((
                    "Critical clearing time (ms)".into(),
                    format!("{:.2}", c.t_crit * 1e3),
                )),
                Ok(_) => lines.push(("Critical clearing time (ms)".into(), "unbounded".into())),
                Err(e) => lines.push(("Critical clearing time (ms)".into(), format!("none ({e})"))),
            }
            out.write("summary.txt", text_block(&lines).as_bytes())?;
            let pts = |v: &[f64], scale: f64| -> Vec<(f64, f64)> {
                trace
                    .t
                    .iter()
                    .zip(v)
                    .map(|(t, y)| (*t, y * scale))
                    .collect()
            };
            let svg = line_svg(
                &[Series::new(
                    "Rotor angle",
                    pts(&trace.delta, 180.0 / std::f64::consts::PI),
                )],
                &Style::new(
                    &format!("Rotor angle, {} MW, {} ms fault", p.p_mw, p.duration_ms),
                    "Time (s)",
                    "Angle (deg)",
                ),
            )?;
            out.write("delta.svg", svg.as_bytes())?;
            let svg = line_svg(
                &[Series::new("Electrical power", pts(&trace.pe, 1.0))],
                &Style::new("Electrical power", "Time (s)", "Power (pu)"),
            )?;
            out.write("power.svg", svg.as_bytes())?;
        }
        StabilityMode::Sweep => {
            let d = p.durations_ms;
            let f = p.power_factors;
            let rows = sweep(
                model,
                &grid(d[0], d[1], d[2]),
                &grid(f[0], f[1], f[2]),
                &opts,
            )?;
            out.write_with("sweep.csv", |b| write_sweep_csv(&rows, b))?;
            let unstable = rows.iter().filter(|r| r.stability == 1).count();
            let lines = vec![
                ("Grid points".to_string(), rows.len().to_string()),
                ("Stable".to_string(), (rows.len() - unstable).to_string()),
                ("Unstable".to_string(), unstable.to_string()),
            ];
            out.write("summary.txt", text_block(&lines).as_bytes())?;
            let group = |code: u32| -> Vec<(f64, f64)> {
                rows.iter()
                    .filter(|r| r.stability == code)
                    .map(|r| (r.duration_ms, r.power_mw))
                    .collect()
            };
            let svg = scatter_svg(
                &[
                    Series::new("Stable", group(0)),
                    Series::new("Unstable", group(1)),
                ],
                &Style::new("Stability map", "Fault duration (ms)", "Power (MW)"),
            )?;
            out.write("stability_map.svg", svg.as_bytes())?;
        }
    }
    Ok(())
}

/// Per-column min-max scaling fitted on the training part.
fn scaled(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, MinMaxScaler), MlError> {
    let s = MinMaxScaler::fit(&train.features)?;
    let map = |d: &Dataset| {
        Dataset::new(
            s.transform_all(&d.features),
            d.labels.clone(),
            d.feature_names.clone(),
            &d.label_name,
        )
    };
    Ok((map(train)?, map(test)?, s))
}

fn score(model: &impl Classifier, test: &Dataset) -> Result<Agreement, MlError> {
    agreement(&model.predict_all(&test.features), &test.labels)
}

/// Line-stroke events as a flashover dataset: angle, peak, front and tail
/// plus one-hot Wire and Tower columns. Failed simulations are dropped.
pub fn lightning_dataset(rows: &[EventRow]) -> Result<Dataset, MlError> {
    let line: Vec<&EventRow> = rows
        .iter()
        .filter(|r| r.class.is_line() && r.flashover.is_some())
        .collect();
    let wires: Vec<&str> = line.iter().map(|r| r.class.wire_label()).collect();
    let places: Vec<&str> = line.iter().map(|r| r.class.place_label()).collect();
    let (wire_names, wire_cols) = one_hot(&wires);
    let (place_names, place_cols) = one_hot(&places);
    let mut names: Vec<String> = ["PhaseAngle", "StrokePeak", "FrontTime", "HalfPeak"]
        .map(String::from)
        .to_vec();
    names.extend(wire_names.iter().map(|n| format!("Wire.{n}")));
    names.extend(place_names.iter().map(|n| format!("Tower.{n}")));
    let features = line
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut f = vec![r.phase_angle_deg, r.ip_ka, r.tf_us, r.th_us];
            f.extend(&wire_cols[k]);
            f.extend(&place_cols[k]);
            f
        })
        .collect();
    let labels = line
        .iter()
        .map(|r| u32::from(r.flashover == Some(true)))
        .collect();
    Dataset::new(features, labels, names, "Flashover")
}

fn agreement_row(task: &str, model: &str, a: &Agreement, n: usize) -> [String; 5] {
    [
        task.into(),
        model.into(),
        n.to_string(),
        format!("{:.6}", a.false_frac),
        format!("{:.6}", a.true_frac),
    ]
}

pub fn run_ml(p: &MlParams, seed: u64, out: &mut OutputDir) -> Result<(), StudyError> {
    let mut table: Vec<[String; 5]> = Vec::new();
    let mut lines: Vec<(String, String)> = Vec::new();
    let all = p.task == MlTask::All;

    if all || p.task == MlTask::Fault {
        let sys = Case1System::new(Default::default());
        let train_rows = sys.build_dataset(&enumerate_train_cases())?;
        let train = fault_lab::to_ml_dataset(&train_rows, p.fault_features)?;
        let mut curves = Vec::new();
        for &r in &p.fault_r_max {
            let test_rows = sys.build_dataset(&sample_test_cases(seed, r)?)?;
            let test = fault_lab::to_ml_dataset(&test_rows, p.fault_features)?;
            let mut pts = Vec::new();
            for k in 1..=p.k_max {
                let m = KnnModel::fit(&train, k)?;
                let a = score(&m, &test)?;
                let task = format!("fault r_max={r}");
                table.push(agreement_row(&task, &format!("knn k={k}"), &a, test.len()));
                lines.push((
                    format!("Fault kNN agreement (r_max = {r} ohm, k = {k})"),
                    format!("{:.6}", a.true_frac),
                ));
                pts.push((k as f64, a.true_frac));
            }
            curves.push(Series::new(&format!("r_max = {r} ohm"), pts));
        }
        let svg = line_svg(
            &curves,
            &Style::new("Fault classification", "k", "Agreement"),
        )?;
        out.write("fault_knn.svg", svg.as_bytes())?;
        let m = KnnModel::fit(&train, 1)?;
        out.write("fault_knn.json", save_model(&SavedModel::Knn(m)).as_bytes())?;
    }

    if all || p.task == MlTask::Lightning {
        let rows = match &p.lightning_events {
            Some(path) => read_events(read_file(path)?)?,
            None => {
                let cfg = LightningConfig {
                    n: p.lightning_n,
                    ..Default::default()
                };
                run_study(&cfg, seed)?
                    .events
                    .iter()
                    .map(|e| e.row())
                    .collect()
            }
        };
        let data = lightning_dataset(&rows)?;
        let (train, test) = data.split(p.train_fraction, seed)?;
        let (train, test, scaler) = scaled(&train, &test)?;
        let svm = SvmModel::train(
            &train,
            &SvmConfig {
                c: p.svm_c,
                ..Default::default()
            },
        )?;
        let a = score(&svm, &test)?;
        table.push(agreement_row("lightning", "svm", &a, test.len()));
        lines.push((
            "Lightning SVM agreement".into(),
            format!("{:.6}", a.true_frac),
        ));
        out.write(
            "lightning_svm.json",
            save_model(&SavedModel::Svm(svm)).as_bytes(),
        )?;
        out.write(
            "lightning_scaler.json",
            serde_json::to_string_pretty(&scaler)
                .expect("scaler serializes")
                .as_bytes(),
        )?;
    }

    if all || p.task == MlTask::Stability {
        let model = stability::SmibModel::default();
        let rows = sweep(
            &model,
            &stability::default_durations_ms(),
            &stability::default_power_factors(),
            &SimOptions::default(),
        )?;
        let data = stability::to_ml_dataset(&rows)?;
        let (train, test) = data.split(p.train_fraction, seed)?;
        let cfg = MlpTrainConfig {
            epochs: p.epochs,
            learning_rate: p.learning_rate,
            ..Default::default()
        };
        let (mlp, _) = MlpClassifier::train(&train, &p.hidden, seed, &cfg)?;
        let (single, _) = MlpClassifier::train(&train, &[1], seed, &cfg)?;
        let (strain, stest, scaler) = scaled(&train, &test)?;
        let svm = SvmModel::train(
            &strain,
            &SvmConfig {
                c: p.svm_c,
                ..Default::default()
            },
        )?;
        let hidden: Vec<String> = p.hidden.iter().map(|h| h.to_string()).collect();
        let mlp_name = format!("mlp {}", hidden.join("-"));
        let results = [
            ("svm", score(&svm, &stest)?),
            (mlp_name.as_str(), score(&mlp, &test)?),
            ("mlp 1", score(&single, &test)?),
        ];
        for (name, a) in &results {
            table.push(agreement_row("stability", name, a, test.len()));
            lines.push((
                format!("Stability {name} agreement"),
                format!("{:.6}", a.true_frac),
            ));
        }
        for k in 1..=p.k_max {
            let m = KnnModel::fit(&strain, k)?;
            let a = score(&m, &stest)?;
            table.push(agreement_row(
                "stability",
                &format!("knn k={k}"),
                &a,
                test.len(),
            ));
            lines.push((
                format!("Stability kNN agreement (k = {k})"),
                format!("{:.6}", a.true_frac),
            ));
        }
        out.write(
            "stability_svm.json",
            save_model(&SavedModel::Svm(svm)).as_bytes(),
        )?;
        out.write(
            "stability_scaler.json",
            serde_json::to_string_pretty(&scaler)
                .expect("scaler serializes")
                .as_bytes(),
        )?;
        out.write(
            "stability_mlp.json",
            save_model(&SavedModel::Mlp(mlp)).as_bytes(),
        )?;
        out.write_with("stability_test.csv", |b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["Power", "Duration", "Stability"])?;
            for (f, l) in test.features.iter().zip(&test.labels) {
                w.write_record([
                    format!("{:.1}", f[0]),
                    format!("{:.2}", f[1]),
                    l.to_string(),
                ])?;
            }
            w.flush()
        })?;
    }

    out.write_with("agreement.csv", |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["Task", "Model", "TestRows", "FALSE", "TRUE"])?;
        for r in &table {
            w.write_record(r)?;
        }
        w.flush()
    })?;
    out.write("summary.txt", text_block(&lines).as_bytes())
}

impl From<csv::Error> for StudyError {
    fn from(e: csv::Error) -> Self {
        StudyError::Input(format!("csv: {e}"))
    }
}

impl From<std::io::Error> for StudyError {
    fn from(e: std::io::Error) -> Self {
        StudyError::Input(format!("io: {e}"))
    }
}
