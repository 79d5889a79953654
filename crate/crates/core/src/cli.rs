//! `beamlab` command-line front end: run configuration, command dispatch and
//! report emission.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discretization::{SemiDiscreteSystem, StateVector};
use crate::dynamics::{default_window, fit_decay, random_initial, simulate, DecayFit};
use crate::error::{Error, Result};
use crate::model::{classify, closed_form_mode, dispersion_gap, BeamConfig, DampingPattern, LayerParams, ModeFamily, StabilityStatus, StabilityVerdict};
use crate::spectral::{full_spectrum, mode_residual, resolvent_sweep_with, Spacing, SpectrumReport, SweepOptions, SWEEP_CAVEAT};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const THREADS_ENV: &str = "BEAMLAB_THREADS";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const SMOOTHNESS_NOTE: &str = "random initial data uses a smoothness knob as a stand-in for smooth data in the generator domain";

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerSection {
    pub rho: f64,
    #[serde(rename = "E")]
    pub young: f64,
    #[serde(rename = "G")]
    pub shear: f64,
    #[serde(rename = "I")]
    pub inertia: f64,
    #[serde(rename = "h")]
    pub thickness: f64,
}

impl Default for LayerSection {
    fn default() -> Self {
        let u = LayerParams::unit();
        Self {
            rho: u.rho,
            young: u.young,
            shear: u.shear,
            inertia: u.inertia,
            thickness: u.thickness,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamSection {
    #[serde(rename = "L")]
    pub length: f64,
    pub top: LayerSection,
    pub bottom: LayerSection,
    pub rho2: f64,
    pub h2: f64,
}

impl Default for BeamSection {
    fn default() -> Self {
        let d = BeamConfig::desk_default();
        Self {
            length: d.length(),
            top: LayerSection::default(),
            bottom: LayerSection::default(),
            rho2: d.params().rho2,
            h2: d.params().h2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub n_elements: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self { n_elements: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub dt: f64,
    pub t_final: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
    pub seed: u64,
    pub smoothness: u32,
    /// `random` or `mode:<family>:<n>`.
    pub initial: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 10.0,
            lambda_min: one(),
            lambda_max: 40.0,
            n_points: 64,
            spacing: Spacing::Log,
            seed: 0,
            smoothness: 2,
            initial: "random".to_string(),
        }
    }
}

/// Everything one invocation needs. Omitted sections and keys take the
/// desk defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub beam: BeamSection,
    pub damping: DampingPattern,
    pub mesh: MeshSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            beam: BeamSection::default(),
            damping: DampingPattern::none(),
            mesh: MeshSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// Initial state selector for `simulate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Random,
    Mode(ModeFamily, u32),
}

impl std::str::FromStr for InitialState {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(InitialState::Random);
        }
        let bad = || Error::validation("experiment.initial", format!("expected `random` or `mode:<T2.3|T2.4|T2.5>:<n>`, got `{s}`"));
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("mode"), Some(id), Some(n), None) => {
                let family = ModeFamily::from_tag(id).map_err(|_| bad())?;
                let n: u32 = n.parse().map_err(|_| bad())?;
                if n == 0 {
                    return Err(bad());
                }
                Ok(InitialState::Mode(family, n))
            }
            _ => Err(bad()),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn beam_config(&self) -> Result<BeamConfig> {
        let layer = |s: &LayerSection| LayerParams {
            rho: s.rho,
            young: s.young,
            shear: s.shear,
            inertia: s.inertia,
            thickness: s.thickness,
        };
        let b = &self.beam;
        BeamConfig::new(layer(&b.top), layer(&b.bottom), b.rho2, b.h2, b.length).map_err(|e| match e {
            Error::Validation { field, reason } => Error::Validation {
                field: format!("beam.{field}"),
                reason,
            },
            other => other,
        })
    }

    pub fn initial(&self) -> Result<InitialState> {
        self.experiment.initial.parse()
    }

    /// Re-checks every module precondition the commands rely on.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("unsupported version {} (this build reads {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        self.beam_config()?;
        self.damping.validate().map_err(|e| match e {
            Error::Validation { field, reason } => Error::Validation {
                field: format!("damping.{field}"),
                reason,
            },
            other => other,
        })?;
        if self.mesh.n_elements < 2 {
            return Err(Error::validation("mesh.n_elements", format!("need at least 2, got {}", self.mesh.n_elements)));
        }
        let x = &self.experiment;
        if !(x.dt > 0.0 && x.dt.is_finite()) {
            return Err(Error::validation("experiment.dt", format!("must be positive and finite, got {}", x.dt)));
        }
        if !(x.t_final > 0.0 && x.t_final.is_finite()) {
            return Err(Error::validation("experiment.t_final", format!("must be positive and finite, got {}", x.t_final)));
        }
        if !(x.lambda_min > 0.0 && x.lambda_max > x.lambda_min && x.lambda_max.is_finite()) {
            return Err(Error::validation(
                "experiment.lambda_min",
                format!("need 0 < lambda_min < lambda_max, got [{}, {}]", x.lambda_min, x.lambda_max),
            ));
        }
        if x.n_points < 8 {
            return Err(Error::validation("experiment.n_points", format!("need at least 8, got {}", x.n_points)));
        }
        self.initial()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Classify,
    Simulate,
    Spectrum,
    Resolvent,
    VerifyMode,
    Report,
}

#[derive(Debug, Parser)]
#[command(name = "beamlab", version, about = "Stability experiments for damped three-layer sandwich beams")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// JSON run configuration; built-in desk defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file. CSV commands write a JSON sidecar next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub elements: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    #[arg(long = "lambda-min")]
    pub lambda_min: Option<f64>,
    #[arg(long = "lambda-max")]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Mode family for verify-mode: T2.3, T2.4 or T2.5.
    #[arg(long)]
    pub theorem: Option<String>,
    /// Inclusive range of mode numbers, e.g. `1..3`.
    #[arg(long = "n-range")]
    pub n_range: Option<String>,
    /// `random` or `mode:<id>:<n>`.
    #[arg(long)]
    pub initial: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Args {
    /// Config file (or defaults) with command-line overrides applied and
    /// re-validated.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.elements {
            cfg.mesh.n_elements = v;
        }
        let x = &mut cfg.experiment;
        if let Some(v) = self.dt {
            x.dt = v;
        }
        if let Some(v) = self.t_final {
            x.t_final = v;
        }
        if let Some(v) = self.lambda_min {
            x.lambda_min = v;
        }
        if let Some(v) = self.lambda_max {
            x.lambda_max = v;
        }
        if let Some(v) = self.points {
            x.n_points = v;
        }
        if let Some(v) = self.seed {
            x.seed = v;
        }
        if let Some(v) = &self.initial {
            x.initial = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_n_range(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::validation("n-range", format!("expected `a..b` with 1 <= a <= b, got `{s}`"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

/// Worker count from `BEAMLAB_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::validation(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// `out.csv -> out.json`; a `.json` output gets `.summary.json` instead.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let side = out.with_extension("json");
    if side == out {
        out.with_extension("summary.json")
    } else {
        side
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub beam: BeamConfig,
    pub damping: DampingPattern,
    pub n_elements: usize,
}

impl ConfigEcho {
    fn new(cfg: &BeamConfig, damping: &DampingPattern, n_elements: usize) -> Self {
        Self {
            beam: *cfg,
            damping: *damping,
            n_elements,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub command: String,
    pub config: ConfigEcho,
    pub initial: String,
    pub seed: u64,
    pub smoothness: u32,
    pub dt: f64,
    pub t_final: f64,
    pub steps: usize,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub total_dissipation: f64,
    pub balance_residual: f64,
    pub relative_drift: f64,
    pub max_increase: f64,
    pub decay_fit: Option<DecayFit>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub schema_version: u32,
    pub command: String,
    pub config: ConfigEcho,
    pub n_eigenvalues: usize,
    pub spectral_abscissa: f64,
    pub max_modulus: f64,
    pub tol_axis_rel: f64,
    pub tol_axis: f64,
    pub n_imaginary_axis_eigs: usize,
    pub imaginary_axis_eigs: Vec<Complex64>,
    pub conjugate_pairing_error: f64,
}

impl SpectrumSummary {
    fn new(s: &SpectrumReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: "spectrum".into(),
            config: ConfigEcho::new(&s.config, &s.damping, s.n_elements),
            n_eigenvalues: s.eigenvalues.len(),
            spectral_abscissa: s.spectral_abscissa,
            max_modulus: s.max_modulus,
            tol_axis_rel: s.tol_axis_rel,
            tol_axis: s.tol_axis,
            n_imaginary_axis_eigs: s.imaginary_axis_eigs.len(),
            imaginary_axis_eigs: s.imaginary_axis_eigs.clone(),
            conjugate_pairing_error: s.conjugate_pairing_error(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub command: String,
    pub config: ConfigEcho,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
    pub band: (f64, f64),
    pub band_points: usize,
    pub fitted_exponent: f64,
    pub r2: f64,
    pub pointwise_exponent: f64,
    pub pointwise_r2: f64,
    pub n_peaks: usize,
    pub tol_axis: f64,
    pub min_pole_distance: f64,
    pub axis_eigs_in_range: usize,
    pub caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCheck {
    pub n: u32,
    pub lambda: f64,
    pub dispersion_gap: f64,
    pub residual_coarse: f64,
    pub residual_fine: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyModeSummary {
    pub schema_version: u32,
    pub command: String,
    pub config: ConfigEcho,
    pub theorem: ModeFamily,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub modes: Vec<ModeCheck>,
}

/// One report section: either the payload or the error that stopped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section<T> {
    Ok(T),
    Skipped(String),
    Error(String),
}

impl<T> Section<T> {
    fn failed(&self) -> bool {
        matches!(self, Section::Error(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub run_config: RunConfig,
    pub classify: Section<StabilityVerdict>,
    pub spectrum: Section<SpectrumSummary>,
    pub simulation: Section<SimulationSummary>,
    pub sweep: Section<SweepSummary>,
}

struct Ctx<'a> {
    args: &'a Args,
    cfg: RunConfig,
    beam: BeamConfig,
    stdout: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn system(&self, n_elements: usize) -> Result<SemiDiscreteSystem> {
        SemiDiscreteSystem::new(&self.beam, &self.cfg.damping, n_elements)
    }

    fn emit_json(&mut self, json: &str) -> Result<()> {
        match &self.args.out {
            Some(p) => write_atomic(p, json.as_bytes())?,
            None => self.stdout.write_all(json.as_bytes())?,
        }
        Ok(())
    }

    /// CSV to `--out` plus sidecar JSON; without `--out` only the JSON goes
    /// to standard output.
    fn emit_csv_and_json(&mut self, csv: &[u8], json: &str) -> Result<()> {
        match &self.args.out {
            Some(p) => {
                write_atomic(p, csv)?;
                write_atomic(&sidecar_path(p), json.as_bytes())?;
            }
            None => self.stdout.write_all(json.as_bytes())?,
        }
        Ok(())
    }
}

fn initial_state(sys: &SemiDiscreteSystem, cfg: &RunConfig, beam: &BeamConfig) -> Result<StateVector> {
    match cfg.initial()? {
        InitialState::Random => random_initial(sys, cfg.experiment.seed, cfg.experiment.smoothness),
        InitialState::Mode(family, n) => {
            let mode = closed_form_mode(family, n, beam)?;
            let q = sys.interpolate_profiles(&mode.profiles);
            Ok(StateVector {
                p: vec![0.0; q.len()],
                q,
            })
        }
    }
}

fn run_simulation(cx: &Ctx<'_>) -> Result<(SimulationSummary, Vec<u8>)> {
    let sys = cx.system(cx.cfg.mesh.n_elements)?;
    let u0 = initial_state(&sys, &cx.cfg, &cx.beam)?;
    let x = &cx.cfg.experiment;
    let trace = simulate(&sys, &u0, x.dt, x.t_final)?;
    let damped = !cx.cfg.damping.is_zero();
    let decay_fit = if damped {
        fit_decay(&trace, default_window(x.t_final)).ok()
    } else {
        None
    };
    let mut notes = Vec::new();
    if matches!(cx.cfg.initial()?, InitialState::Random) {
        notes.push(SMOOTHNESS_NOTE.to_string());
    }
    if decay_fit.is_some() {
        notes.push("decay fit is exploratory: a truncated system decays exponentially".to_string());
    }
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let summary = SimulationSummary {
        schema_version: SCHEMA_VERSION,
        command: "simulate".into(),
        config: ConfigEcho::new(&cx.beam, &cx.cfg.damping, cx.cfg.mesh.n_elements),
        initial: x.initial.clone(),
        seed: x.seed,
        smoothness: x.smoothness,
        dt: x.dt,
        t_final: x.t_final,
        steps: trace.len() - 1,
        energy_initial: trace.initial_energy(),
        energy_final: trace.final_energy(),
        total_dissipation: trace.total_dissipation(),
        balance_residual: trace.balance_residual(),
        relative_drift: trace.relative_drift(),
        max_increase: trace.max_increase(),
        decay_fit,
        notes,
    };
    Ok((summary, csv))
}

fn run_sweep(cx: &Ctx<'_>, sys: &SemiDiscreteSystem, spectrum: SpectrumReport) -> Result<(SweepSummary, Vec<u8>)> {
    let x = &cx.cfg.experiment;
    let opts = SweepOptions {
        spacing: x.spacing,
        threads: threads_from_env()?,
    };
    let sw = resolvent_sweep_with(sys, spectrum, x.lambda_min, x.lambda_max, x.n_points, opts)?;
    let mut csv = Vec::new();
    sw.write_csv(&mut csv)?;
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        command: "resolvent".into(),
        config: ConfigEcho::new(&cx.beam, &cx.cfg.damping, cx.cfg.mesh.n_elements),
        lambda_min: x.lambda_min,
        lambda_max: x.lambda_max,
        n_points: x.n_points,
        spacing: sw.spacing,
        band: sw.band,
        band_points: sw.band_points,
        fitted_exponent: sw.fitted_exponent,
        r2: sw.r2,
        pointwise_exponent: sw.pointwise_exponent,
        pointwise_r2: sw.pointwise_r2,
        n_peaks: sw.peak_lambdas.len(),
        tol_axis: sw.tol_axis,
        min_pole_distance: sw.min_pole_distance,
        axis_eigs_in_range: sw.axis_eigs_in_range,
        caveat: SWEEP_CAVEAT.to_string(),
    };
    Ok((summary, csv))
}

fn cmd_verify_mode(cx: &mut Ctx<'_>) -> Result<()> {
    let tag = cx
        .args
        .theorem
        .as_deref()
        .ok_or_else(|| Error::validation("theorem", "verify-mode needs --theorem T2.3|T2.4|T2.5"))?;
    let family = ModeFamily::from_tag(tag)?;
    let (lo, hi) = match &cx.args.n_range {
        Some(s) => parse_n_range(s)?,
        None => (1, 3),
    };
    let n_coarse = cx.cfg.mesh.n_elements;
    let n_fine = 2 * n_coarse;
    let coarse = cx.system(n_coarse)?;
    let fine = cx.system(n_fine)?;
    let mut modes = Vec::new();
    for n in lo..=hi {
        let mode = closed_form_mode(family, n, &cx.beam)?;
        let rc = mode_residual(&coarse, &mode)?;
        let rf = mode_residual(&fine, &mode)?;
        modes.push(ModeCheck {
            n,
            lambda: mode.lambda,
            dispersion_gap: dispersion_gap(family, n, &cx.beam),
            residual_coarse: rc,
            residual_fine: rf,
            ratio: rc / rf,
        });
    }
    let mut csv = String::from("n,lambda,dispersion_gap,residual_coarse,residual_fine,ratio\n");
    for m in &modes {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.n, m.lambda, m.dispersion_gap, m.residual_coarse, m.residual_fine, m.ratio
        ));
    }
    let summary = VerifyModeSummary {
        schema_version: SCHEMA_VERSION,
        command: "verify-mode".into(),
        config: ConfigEcho::new(&cx.beam, &cx.cfg.damping, n_coarse),
        theorem: family,
        n_coarse,
        n_fine,
        modes,
    };
    cx.emit_csv_and_json(csv.as_bytes(), &to_json(&summary))
}

fn cmd_report(cx: &mut Ctx<'_>) -> Result<bool> {
    let verdict = classify(&cx.beam, &cx.cfg.damping);
    let sys = cx.system(cx.cfg.mesh.n_elements);
    let spectrum = sys.as_ref().map_err(|e| e.to_string()).and_then(|s| full_spectrum(s).map_err(|e| e.to_string()));
    let spectrum_section = match &spectrum {
        Ok(s) => Section::Ok(SpectrumSummary::new(s)),
        Err(e) => Section::Error(e.clone()),
    };
    let simulation = match run_simulation(cx) {
        Ok((s, _)) => Section::Ok(s),
        Err(e) => Section::Error(e.to_string()),
    };
    let sweep = if verdict.status == StabilityStatus::Unstable {
        Section::Skipped("verdict is Unstable: imaginary-axis eigenvalues make the resolvent unbounded".into())
    } else if cx.cfg.damping.is_zero() {
        Section::Skipped("undamped system: the whole spectrum lies on the imaginary axis".into())
    } else {
        match (&sys, spectrum) {
            (Ok(sys), Ok(spec)) => match run_sweep(cx, sys, spec) {
                Ok((s, _)) => Section::Ok(s),
                Err(e) => Section::Error(e.to_string()),
            },
            _ => Section::Skipped("spectrum unavailable".into()),
        }
    };
    let report = FullReport {
        schema_version: SCHEMA_VERSION,
        tool: "beamlab".into(),
        tool_version: TOOL_VERSION.into(),
        run_config: cx.cfg.clone(),
        classify: Section::Ok(verdict),
        spectrum: spectrum_section,
        simulation,
        sweep,
    };
    // classify cannot fail, so the report always has at least one section.
    let all_failed = report.classify.failed() && report.spectrum.failed() && report.simulation.failed() && report.sweep.failed();
    cx.emit_json(&to_json(&report))?;
    Ok(!all_failed)
}

fn dispatch(cx: &mut Ctx<'_>) -> Result<()> {
    match cx.args.command {
        Command::Classify => {
            let verdict = classify(&cx.beam, &cx.cfg.damping);
            cx.emit_json(&to_json(&verdict))
        }
        Command::Simulate => {
            let (summary, csv) = run_simulation(cx)?;
            cx.emit_csv_and_json(&csv, &to_json(&summary))
        }
        Command::Spectrum => {
            let s = full_spectrum(&cx.system(cx.cfg.mesh.n_elements)?)?;
            let mut csv = Vec::new();
            s.write_csv(&mut csv)?;
            cx.emit_csv_and_json(&csv, &to_json(&SpectrumSummary::new(&s)))
        }
        Command::Resolvent => {
            let sys = cx.system(cx.cfg.mesh.n_elements)?;
            let spectrum = full_spectrum(&sys)?;
            let (summary, csv) = run_sweep(cx, &sys, spectrum)?;
            cx.emit_csv_and_json(&csv, &to_json(&summary))
        }
        Command::VerifyMode => cmd_verify_mode(cx),
        Command::Report => {
            if cmd_report(cx)? {
                Ok(())
            } else {
                Err(Error::Solver("every report section failed".into()))
            }
        }
    }
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation { .. } | Error::Config(_) | Error::Precondition(_) | Error::TooLarge { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    // Sequential dense kernels keep results bit-identical across runs;
    // sweeps parallelize over grid points instead.
    faer::set_global_parallelism(faer::Par::Seq);
    let prepared = args.run_config().and_then(|cfg| Ok((cfg.beam_config()?, cfg)));
    let (beam, cfg) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let _ = writeln!(stderr, "beamlab: config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut cx = Ctx {
        args: &args,
        cfg,
        beam,
        stdout,
    };
    match dispatch(&mut cx) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let code = exit_code(&e);
            let kind = if code == EXIT_CONFIG { "config error" } else { "error" };
            let _ = writeln!(stderr, "beamlab: {kind}: {e}");
            code
        }
    }
}
