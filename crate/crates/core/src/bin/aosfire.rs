//! Command-line entry point: simulate flights, integrate, correct, detect,
//! evaluate, and run parameter sweeps. Summaries go to stdout as JSON, logs
//! to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use aos_thermal::aos::{Capture, IntegralImage, SaGrid};
use aos_thermal::correction::{
    correct_analytic, correct_external, BackendEndpoint, CorrectionInput, PixelFlag, DEFAULT_MIN_VISIBILITY,
};
use aos_thermal::dataset::{write_flight, Dataset, RunManifest, RUN_FILE};
use aos_thermal::detect::{detect_hotspots, DEFAULT_THRESHOLD_C};
use aos_thermal::eval::{rmse, run_sweep, write_csv_file, Regime, SweepConfig};
use aos_thermal::forest::VisibilityMask;
use aos_thermal::plot::{density_chart, method_heatmap};
use aos_thermal::raster::{read_raster, write_raster};
use aos_thermal::sim::{simulate_flight, FlightConfig, FrameSet};
use aos_thermal::{Error, Result};

#[derive(Parser)]
#[command(name = "aosfire", version, about = "Thermal synthetic-aperture imaging of fires under forest canopy")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Render a simulated flight into a dataset directory.
    Simulate(SimulateArgs),
    /// Integrate a dataset into occlusion-suppressed integral images.
    Integrate(IntegrateArgs),
    /// Recover surface temperatures from an integral image.
    Correct(CorrectArgs),
    /// Threshold hotspot detection on a raster.
    Detect(DetectArgs),
    /// RMSE of a prediction against ground truth.
    Evaluate(EvaluateArgs),
    /// Parameter sweep with CSV results and plots.
    Sweep(SweepArgs),
    /// Re-run a run.json manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct SimulateArgs {
    /// Flight parameters (JSON); defaults apply to missing fields.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Which waypoints to render.
    #[arg(long, value_enum, default_value_t = FramesArg::All)]
    frames: FramesArg,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
enum FramesArg {
    All,
    Center,
    Cross,
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize, Deserialize)]
enum SaArg {
    #[value(name = "2d")]
    #[serde(rename = "2d")]
    TwoD,
    #[value(name = "1d-row")]
    #[serde(rename = "1d-row")]
    OneDRow,
    #[value(name = "1d-col")]
    #[serde(rename = "1d-col")]
    OneDCol,
}

#[derive(Args, Serialize, Deserialize)]
struct IntegrateArgs {
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = SaArg::TwoD)]
    sa: SaArg,
    /// Window side in waypoints (default: the whole grid along each strip axis).
    #[arg(long)]
    window: Option<u32>,
    /// Waypoints between window placements; without it a single centered window is used.
    #[arg(long)]
    stride: Option<u32>,
    /// Let windows extend past the capture border.
    #[arg(long)]
    pad: bool,
    /// Strip position for 1D apertures (default: the central row or column).
    #[arg(long)]
    strip: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize, Deserialize)]
enum BackendArg {
    Analytic,
    External,
}

#[derive(Args, Serialize, Deserialize)]
struct CorrectArgs {
    /// Integral image (TGR1).
    #[arg(long)]
    sigma: PathBuf,
    /// Aggregated visibility (TGR1).
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Ambient temperature (default: the integral's header value).
    #[arg(long)]
    ambient: Option<f32>,
    /// Canopy reference temperature (default: ambient + sun absorption / 2).
    #[arg(long)]
    vegetation: Option<f32>,
    #[arg(long, default_value_t = 0.0)]
    sun_absorption: f32,
    #[arg(long, default_value_t = DEFAULT_MIN_VISIBILITY)]
    min_visibility: f32,
    #[arg(long, value_enum, default_value_t = BackendArg::Analytic)]
    backend: BackendArg,
    /// External backend program.
    #[arg(long)]
    backend_cmd: Option<PathBuf>,
    /// Argument passed to the backend before `--request` (repeatable).
    #[arg(long = "backend-arg", allow_hyphen_values = true)]
    backend_args: Vec<String>,
    #[arg(long, default_value_t = 60)]
    timeout_s: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize)]
struct DetectArgs {
    raster: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_C)]
    threshold: f32,
    /// Drop regions smaller than this many pixels.
    #[arg(long, default_value_t = 1)]
    min_area: usize,
}

#[derive(Args, Serialize, Deserialize)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Serialize, Deserialize)]
struct SweepArgs {
    /// Sweep configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use a 7x7 aperture.
    #[arg(long)]
    fast: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize, Deserialize)]
struct RerunArgs {
    manifest: PathBuf,
    /// Write outputs here instead of the manifest's output location.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn manifest(command: &Command, seeds: Vec<u64>, inputs: Vec<String>, outputs: Vec<String>) -> Result<RunManifest> {
    let name = match command {
        Command::Simulate(_) => "simulate",
        Command::Integrate(_) => "integrate",
        Command::Correct(_) => "correct",
        Command::Detect(_) => "detect",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
        Command::Rerun(_) => "rerun",
    };
    let mut m = RunManifest::new(name, json!({ "command": command }));
    m.seeds = seeds;
    m.inputs = inputs;
    m.outputs = outputs;
    Ok(m)
}

fn simulate(a: &SimulateArgs, command: &Command, resolved: Option<FlightConfig>) -> Result<serde_json::Value> {
    let cfg: FlightConfig = match (resolved, &a.params) {
        (Some(cfg), _) => cfg,
        (None, Some(p)) => read_json(p)?,
        (None, None) => FlightConfig::default(),
    };
    let frames = match a.frames {
        FramesArg::All => FrameSet::All,
        FramesArg::Center => FrameSet::CenterOnly,
        FramesArg::Cross => FrameSet::CenterCross,
    };
    let flight = simulate_flight(&cfg, frames)?;
    create_dir(&a.out)?;
    let written = write_flight(&flight, &a.out)?;
    let mut m = manifest(
        command,
        vec![cfg.seed],
        a.params.iter().map(|p| p.display().to_string()).collect(),
        written,
    )?;
    // resolved parameters, so the manifest stands on its own
    m.parameters["resolved"] = serde_json::to_value(&cfg)?;
    m.write(a.out.join(RUN_FILE))?;
    Ok(json!({
        "out": a.out,
        "frames": flight.capture.frames.len(),
        "grid": [cfg.grid.n, cfg.grid.m],
        "trees": flight.scene.trees().len(),
        "ground_res_m": flight.layout.ground_res_m,
        "mean_visibility": flight.center_frame().mask.as_ref().and_then(|m| m.mean()),
    }))
}

fn write_integral(dir: &Path, stem: &str, integral: &IntegralImage, mask: Option<&VisibilityMask>) -> Result<Vec<String>> {
    let mut names = vec![format!("sigma{stem}.tgr"), format!("count{stem}.tgr")];
    write_raster(&integral.sigma, dir.join(&names[0]))?;
    write_raster(&integral.counts_raster(), dir.join(&names[1]))?;
    if let Some(m) = mask {
        names.push(format!("f{stem}.tgr"));
        write_raster(m.raster(), dir.join(&names[2]))?;
    }
    Ok(names)
}

fn integrate(a: &IntegrateArgs, command: &Command) -> Result<serde_json::Value> {
    let ds = Dataset::load(&a.dataset)?;
    let g = ds.grid;
    let (capture, full): (Capture, SaGrid) = match a.sa {
        SaArg::TwoD => (ds.capture.clone(), g),
        SaArg::OneDRow => {
            let m = a.strip.unwrap_or(g.m / 2);
            (ds.capture.row(m), SaGrid { m: 1, ..g })
        }
        SaArg::OneDCol => {
            let n = a.strip.unwrap_or(g.n / 2);
            (ds.capture.col(n), SaGrid { n: 1, ..g })
        }
    };
    // strips keep their single row or column; other axes take the window side
    let side = |len: u32| if len == 1 { 1 } else { a.window.unwrap_or(len) };
    let window = SaGrid {
        n: side(capture.cols),
        m: side(capture.rows),
        ..full
    };
    let placements = match a.stride {
        Some(k) => {
            let step = |len: u32| if len == 1 { 1 } else { k };
            capture.placements(&window, [step(capture.cols), step(capture.rows)], a.pad)?
        }
        None => {
            let c = full.center_index();
            let wc = window.center_index();
            vec![aos_thermal::aos::WindowPlacement {
                origin: [c[0] as i64 - wc[0] as i64, c[1] as i64 - wc[1] as i64],
                center: c,
            }]
        }
    };
    create_dir(&a.out)?;
    let mut outputs = Vec::new();
    let mut summary = Vec::new();
    let single = a.stride.is_none();
    for p in &placements {
        let integral = capture.integrate_window(&window, p, 0.0)?;
        let mask = capture.integrate_window_mask(&window, p, 0.0)?;
        let stem = if single {
            String::new()
        } else {
            format!("_n{:02}_m{:02}", p.center[0], p.center[1])
        };
        let names = write_integral(&a.out, &stem, &integral, mask.as_ref())?;
        summary.push(json!({
            "center": p.center,
            "files": names,
            "valid_pixels": integral.sigma.valid_count(),
        }));
        outputs.extend(names);
    }
    let m = manifest(command, Vec::new(), vec![a.dataset.display().to_string()], outputs)?;
    m.write(a.out.join(RUN_FILE))?;
    Ok(json!({
        "window": [window.n, window.m],
        "integrals": summary,
    }))
}

fn correct(a: &CorrectArgs, command: &Command) -> Result<serde_json::Value> {
    let summary = correct_impl(a)?;
    let mut inputs = vec![a.sigma.display().to_string()];
    inputs.extend(a.mask.iter().map(|p| p.display().to_string()));
    let m = manifest(command, Vec::new(), inputs, vec![a.out.display().to_string()])?;
    m.write(a.out.with_extension("run.json"))?;
    Ok(summary)
}

fn correct_impl(a: &CorrectArgs) -> Result<serde_json::Value> {
    let sigma = read_raster(&a.sigma)?;
    let mask = a
        .mask
        .as_ref()
        .map(|p| read_raster(p).and_then(VisibilityMask::new))
        .transpose()?;
    let ambient = a.ambient.unwrap_or(sigma.ambient_c());
    let mut input = CorrectionInput::new(&sigma, ambient).with_sun_absorption(a.sun_absorption);
    if let Some(m) = &mask {
        input = input.with_visibility(m);
    }
    if let Some(tv) = a.vegetation {
        input = input.with_vegetation(tv);
    }
    match a.backend {
        BackendArg::Analytic => {
            let out = correct_analytic(&input, a.min_visibility)?;
            write_raster(&out.raster, &a.out)?;
            Ok(json!({
                "backend": "analytic",
                "out": a.out,
                "vegetation_c": input.vegetation_reference_c(),
                "low_confidence": out.count(PixelFlag::LowConfidence),
                "clamped": out.count(PixelFlag::Clamped),
                "no_data": out.count(PixelFlag::NoData),
            }))
        }
        BackendArg::External => {
            let program = a
                .backend_cmd
                .clone()
                .ok_or_else(|| Error::Param("--backend external needs --backend-cmd".into()))?;
            let endpoint = BackendEndpoint {
                args: a.backend_args.clone(),
                timeout_s: a.timeout_s as f64,
                ..BackendEndpoint::new(program)
            };
            let out = correct_external(&input, &endpoint)?;
            write_raster(&out, &a.out)?;
            Ok(json!({ "backend": "external", "out": a.out }))
        }
    }
}

fn detect(a: &DetectArgs) -> Result<serde_json::Value> {
    let r = read_raster(&a.raster)?;
    let hotspots: Vec<_> = detect_hotspots(&r, a.threshold)
        .into_iter()
        .filter(|h| h.area_px >= a.min_area)
        .map(|h| {
            json!({
                "area_px": h.area_px,
                "area_m2": h.area_m2,
                "centroid_px": h.centroid_px,
                "centroid_m": h.centroid_m,
                "mean_c": h.mean_c,
                "max_c": h.max_c,
                "bbox": h.bbox,
            })
        })
        .collect();
    Ok(serde_json::Value::Array(hotspots))
}

fn evaluate(a: &EvaluateArgs) -> Result<serde_json::Value> {
    let pred = read_raster(&a.pred)?;
    let truth = read_raster(&a.truth)?;
    let mut out = serde_json::Map::new();
    for (name, regime) in [("full", Regime::Full), ("fire", Regime::Fire)] {
        let v = match rmse(&pred, &truth, Some(regime.mask())) {
            Ok(s) => serde_json::to_value(s)?,
            Err(Error::EmptySelection(_)) => serde_json::Value::Null,
            Err(e) => return Err(e),
        };
        out.insert(name.to_string(), v);
    }
    Ok(serde_json::Value::Object(out))
}

fn sweep(a: &SweepArgs, command: &Command) -> Result<serde_json::Value> {
    let mut cfg: SweepConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SweepConfig::default(),
    };
    if a.fast {
        cfg = cfg.fast();
    }
    let report = run_sweep(&cfg)?;
    create_dir(&a.out)?;
    let mut outputs = vec!["results.csv".to_string(), "failures.json".to_string()];
    write_csv_file(&report.records, a.out.join("results.csv"))?;
    let failures = serde_json::to_string_pretty(&report.failures)? + "\n";
    fs::write(a.out.join("failures.json"), failures).map_err(|e| Error::Io {
        path: a.out.join("failures.json"),
        source: e,
    })?;
    for (name, regime) in [("full", Regime::Full), ("fire", Regime::Fire)] {
        for (kind, svg) in [
            ("rmse", density_chart(&report.records, regime)),
            ("heatmap", method_heatmap(&report.records, regime)),
        ] {
            let file = format!("{kind}_{name}.svg");
            fs::write(a.out.join(&file), svg).map_err(|e| Error::Io {
                path: a.out.join(&file),
                source: e,
            })?;
            outputs.push(file);
        }
    }
    let m = manifest(
        command,
        cfg.seeds.clone(),
        a.config.iter().map(|p| p.display().to_string()).collect(),
        outputs,
    )?;
    m.write(a.out.join(RUN_FILE))?;
    Ok(json!({
        "records": report.records.len(),
        "failures": report.failures.len(),
        "out": a.out,
    }))
}

fn rerun(a: &RerunArgs) -> Result<serde_json::Value> {
    let m = RunManifest::read(&a.manifest)?;
    let mut command: Command = serde_json::from_value(m.parameters["command"].clone())?;
    let resolved: Option<FlightConfig> = match m.parameters.get("resolved") {
        Some(v) => Some(serde_json::from_value(v.clone())?),
        None => None,
    };
    if let Some(out) = &a.out {
        match &mut command {
            Command::Simulate(c) => c.out = out.clone(),
            Command::Integrate(c) => c.out = out.clone(),
            Command::Correct(c) => c.out = out.clone(),
            Command::Sweep(c) => c.out = out.clone(),
            Command::Detect(_) | Command::Evaluate(_) | Command::Rerun(_) => {}
        }
    }
    match &command {
        Command::Rerun(_) => Err(Error::Param("a rerun manifest cannot point at another rerun".into())),
        Command::Simulate(c) => simulate(c, &command, resolved),
        other => run(other),
    }
}

fn run(command: &Command) -> Result<serde_json::Value> {
    match command {
        Command::Simulate(a) => simulate(a, command, None),
        Command::Integrate(a) => integrate(a, command),
        Command::Correct(a) => correct(a, command),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a, command),
        Command::Rerun(a) => rerun(a),
    }
}

/// Prints the summary; a closed stdout (e.g. piped into `head`) is not an error.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = std::panic::catch_unwind(|| run(&cli.command));
    match result {
        Ok(Ok(summary)) => {
            emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            if let Error::Backend { diagnostics, .. } = &e {
                if !diagnostics.is_empty() {
                    eprintln!("backend diagnostics:\n{diagnostics}");
                }
            }
            emit(&json!({ "error": e.to_string(), "exit_code": code }).to_string());
            ExitCode::from(code as u8)
        }
        Err(_) => ExitCode::from(5),
    }
}
