//! Config-driven experiment runner used by the `bohrlab` binary.
//!
//! A run reads one TOML config, executes one named experiment and writes
//! `report.json`, the experiment CSVs and a separate `timings.json` into an
//! output directory. Everything except `timings.json` is a pure function of
//! the config and the seed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::almost_periodicity::{
    certify_bohr, equicontinuity_modulus, CertificateStatus, CertifyOptions, Gauge, DEFAULT_COLLAPSE_RATIO,
    DEFAULT_LADDER_DEPTH, DEFAULT_MAX_GAUGE,
};
use crate::ergodic::{
    folner_ratio, haar_solve_finite, random_start, shulman_constant, uniform_convergence_probe,
    unique_ergodicity_probe, write_series_csv, FolnerSequence, HaarOptions, Normalization, ShulmanVerdict,
    TestFamily, TestFunction, DEFAULT_HAAR_MAX_ITERATIONS, DEFAULT_HAAR_TOLERANCE, ORACLE_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::orbit_algebra::{algebra_check, build_orbit_net, default_defect_threshold, diamond_table};
use crate::semigroup::{Element, FiniteTable, QuasiHaar, Semigroup, WindowSpec, ZBar};
use crate::space::{binary_point, epsilon_net, orbit, ActionSystem, Point, Space};
use crate::tags::Tag;

/// The named experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Certify,
    Equicontinuity,
    Diamond,
    Haar,
    UniqueErgodicity,
    FolnerUniform,
    ShulmanJr,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Certify => "certify",
            ExperimentKind::Equicontinuity => "equicontinuity",
            ExperimentKind::Diamond => "diamond",
            ExperimentKind::Haar => "haar",
            ExperimentKind::UniqueErgodicity => "unique-ergodicity",
            ExperimentKind::FolnerUniform => "folner-uniform",
            ExperimentKind::ShulmanJr => "shulman-jr",
        }
    }
}

/// A scalar or a list in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// `[0.25]`-style coordinates, or one of `"zero"`, `"generic"`, `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasepointSpec {
    Coords(Vec<f64>),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_semigroup")]
    pub semigroup: String,
    #[serde(default = "default_space")]
    pub space: String,
    #[serde(default)]
    pub basepoint: Option<BasepointSpec>,
}

fn default_semigroup() -> String {
    "zplus:d=1".into()
}

fn default_space() -> String {
    "torus:k=1,alpha=golden".into()
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            semigroup: default_semigroup(),
            space: default_space(),
            basepoint: None,
        }
    }
}

/// Experiment parameters. Each experiment reads the subset it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub eps: OneOrMany<f64>,
    /// Window size parameters (box width, cutoff, ...), strictly increasing.
    pub windows: Option<Vec<u64>>,
    pub max_gauge: u64,
    pub ladder_depth: u32,
    pub collapse_ratio: f64,
    pub defect_threshold: Option<f64>,
    /// Følner kinds: `cube`, `gridcube`, `jr` or `auto` (cubes of the semigroup).
    pub folner: OneOrMany<String>,
    pub schedule: Vec<u64>,
    /// Number of sampled basepoints, added after `system.basepoint`.
    pub basepoints: usize,
    /// `characters`, `landmarks` or `auto`.
    pub family: String,
    pub k_max: i64,
    pub landmarks: usize,
    pub landmark_radius: Option<f64>,
    /// `sup` or `bounded_lipschitz`.
    pub normalization: Normalization,
    pub tolerance: f64,
    /// `cos:k=1`, `sin:k=2`, or `cos:k=1;0` on a 2-torus.
    pub phi: String,
    pub target: f64,
    /// Built-in finite table name or CSV path for `haar`.
    pub table: String,
    pub starts: usize,
    pub haar_tolerance: f64,
    pub max_iterations: usize,
    pub n_max: u64,
    pub ratio_n_max: u64,
    pub dim: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            eps: OneOrMany::One(0.1),
            windows: None,
            max_gauge: DEFAULT_MAX_GAUGE,
            ladder_depth: DEFAULT_LADDER_DEPTH,
            collapse_ratio: DEFAULT_COLLAPSE_RATIO,
            defect_threshold: None,
            folner: OneOrMany::One("auto".into()),
            schedule: vec![100, 1000, 10000],
            basepoints: 10,
            family: "auto".into(),
            k_max: 8,
            landmarks: 16,
            landmark_radius: None,
            normalization: Normalization::Sup,
            tolerance: 1e-2,
            phi: "cos:k=1".into(),
            target: 0.0,
            table: "cyclic5".into(),
            starts: 5,
            haar_tolerance: DEFAULT_HAAR_TOLERANCE,
            max_iterations: DEFAULT_HAAR_MAX_ITERATIONS,
            n_max: 200,
            ratio_n_max: 1000,
            dim: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence. Not echoed.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub params: Params,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that does not need the experiment to run.
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let bad = |msg: String| Err(Error::Config(msg));
        let eps = p.eps.to_vec();
        if eps.is_empty() || eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return bad(format!("eps must be positive: {eps:?}"));
        }
        if let Some(w) = &p.windows {
            if w.is_empty() || w[0] == 0 || w.windows(2).any(|x| x[1] <= x[0]) {
                return bad(format!("windows must be positive and strictly increasing: {w:?}"));
            }
        }
        if p.schedule.is_empty() || p.schedule[0] == 0 || p.schedule.windows(2).any(|x| x[1] <= x[0]) {
            return bad(format!("schedule must be positive and strictly increasing: {:?}", p.schedule));
        }
        if !(p.tolerance > 0.0) || !(p.haar_tolerance > 0.0) || !(p.collapse_ratio > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if p.k_max < 1 || p.n_max < 2 || p.ratio_n_max < 1 || p.dim == 0 || p.max_gauge == 0 {
            return bad("k_max, dim and max_gauge must be at least 1 and n_max at least 2".into());
        }
        if !matches!(p.family.as_str(), "auto" | "characters" | "landmarks") {
            return bad(format!("unknown test family {:?}", p.family));
        }
        for f in p.folner.to_vec() {
            if f != "auto" {
                FolnerSequence::parse(&f).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        parse_phi(&p.phi).map_err(|e| Error::Config(e.to_string()))?;
        if self.experiment != ExperimentKind::Haar && self.experiment != ExperimentKind::ShulmanJr {
            self.system()?;
        }
        Ok(())
    }

    fn system(&self) -> Result<(ActionSystem, Option<WindowSpec>)> {
        ActionSystem::from_tags(&self.system.semigroup, &self.system.space).map_err(|e| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        })
    }
}

/// One file written by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub bytes: u64,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub experiment: &'static str,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub system: Option<String>,
    /// All validation checks of the experiment held.
    pub passed: bool,
    pub result: Value,
    pub artifacts: Vec<Artifact>,
}

/// A finished run plus its wall-clock time, which goes to `timings.json`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub seconds: f64,
}

/// Process exit code for an error: 2 config, 3 precondition or validation,
/// 4 numeric non-convergence, 1 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::NonConvergence { .. } => 4,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        _ => 3,
    }
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Output {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(Artifact {
            file: name.into(),
            bytes: 0,
        });
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn finish(mut self) -> Result<Vec<Artifact>> {
        for a in &mut self.artifacts {
            a.bytes = fs::metadata(self.dir.join(&a.file))?.len();
        }
        Ok(self.artifacts)
    }
}

/// Runs one experiment, writing all outputs into `out_dir`.
///
/// A run whose validation checks fail still writes its outputs and then
/// returns a precondition error. Non-convergence writes
/// `residual_history.csv` before returning.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let start = Instant::now();
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        artifacts: Vec::new(),
    };
    let (system, result) = match execute(cfg, &mut out) {
        Ok(v) => v,
        Err(Error::NonConvergence {
            iterations,
            residual,
            residual_history,
        }) => {
            write_residuals(&mut out, &residual_history)?;
            return Err(Error::NonConvergence {
                iterations,
                residual,
                residual_history,
            });
        }
        Err(e) => return Err(e),
    };
    let passed = result.get("passed").and_then(Value::as_bool).unwrap_or(true);
    let report = RunReport {
        experiment: cfg.experiment.name(),
        seed: cfg.seed,
        config: cfg.clone(),
        system,
        passed,
        result,
        artifacts: out.finish()?,
    };
    let mut w = BufWriter::new(File::create(out_dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let seconds = start.elapsed().as_secs_f64();
    let mut t = BufWriter::new(File::create(out_dir.join("timings.json"))?);
    serde_json::to_writer_pretty(&mut t, &json!({ "experiment": report.experiment, "seconds": seconds }))?;
    t.write_all(b"\n")?;
    t.flush()?;
    if !passed {
        return Err(Error::Precondition(format!(
            "{} validation failed; see {}",
            report.experiment,
            out_dir.join("report.json").display()
        )));
    }
    Ok(RunOutcome { report, seconds })
}

fn write_residuals(out: &mut Output, history: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out.create("residual_history.csv")?);
    w.write_record(["iteration", "residual"])?;
    for (i, r) in history.iter().enumerate() {
        w.write_record([i.to_string(), format!("{r:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cfg: &ExperimentConfig, out: &mut Output) -> Result<(Option<String>, Value)> {
    match cfg.experiment {
        ExperimentKind::Haar => return Ok((None, haar(cfg, out)?)),
        ExperimentKind::ShulmanJr => return Ok((None, shulman(cfg, out)?)),
        _ => {}
    }
    let (sys, tag_window) = cfg.system()?;
    let name = Some(sys.name());
    let result = match cfg.experiment {
        ExperimentKind::Certify => certify(cfg, &sys, tag_window, out)?,
        ExperimentKind::Equicontinuity => equicontinuity(cfg, &sys, tag_window, out)?,
        ExperimentKind::Diamond => diamond(cfg, &sys, tag_window, out)?,
        ExperimentKind::UniqueErgodicity => unique_ergodicity(cfg, &sys, out)?,
        ExperimentKind::FolnerUniform => folner_uniform(cfg, &sys, out)?,
        ExperimentKind::Haar | ExperimentKind::ShulmanJr => unreachable!("handled above"),
    };
    Ok((name, result))
}

/// Independent random streams derived from the seed.
fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const STREAM_BASEPOINT: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_FAMILY: u64 = 3;
const STREAM_STARTS: u64 = 4;

fn resolve_basepoint(spec: &BasepointSpec, space: &Space, seed: u64) -> Result<Point> {
    let p = match spec {
        BasepointSpec::Name(n) => match n.as_str() {
            "generic" => space.sample(&mut rng(seed, STREAM_BASEPOINT)),
            "inf" if *space == Space::ZBarPlus => Point::ZBar(ZBar::Inf),
            "zero" => zero_point(space)?,
            other => return Err(Error::Config(format!("unknown basepoint {other:?}"))),
        },
        BasepointSpec::Coords(c) => match space {
            Space::Torus { k } if c.len() == *k => Point::torus(c.clone()),
            Space::BinaryCircle if c.len() == 1 => binary_point(c[0]),
            Space::ZBarPlus if c.len() == 1 && c[0] >= 0.0 && c[0].fract() == 0.0 => {
                Point::ZBar(ZBar::Fin(c[0] as u64))
            }
            Space::Finite { n, .. } if c.len() == 1 && c[0] >= 0.0 && c[0].fract() == 0.0 && (c[0] as usize) < *n => {
                Point::Finite(c[0] as usize)
            }
            _ => return Err(Error::Config(format!("basepoint {c:?} does not fit {}", space.tag()))),
        },
    };
    space.check(&p).map_err(|e| Error::Config(e.to_string()))?;
    Ok(p)
}

fn zero_point(space: &Space) -> Result<Point> {
    Ok(match space {
        Space::Torus { k } => Point::torus(vec![0.0; *k]),
        Space::BinaryCircle => binary_point(0.0),
        Space::ZBarPlus => Point::ZBar(ZBar::Fin(0)),
        Space::Finite { .. } => Point::Finite(0),
        Space::Product(parts) => Point::Product(parts.iter().map(zero_point).collect::<Result<_>>()?),
    })
}

/// The configured basepoint, or `zero` (a seeded generic point on the binary
/// circle, where zero is a fixed point).
fn basepoint(cfg: &ExperimentConfig, space: &Space) -> Result<Point> {
    match &cfg.system.basepoint {
        Some(spec) => resolve_basepoint(spec, space, cfg.seed),
        None if *space == Space::BinaryCircle => {
            resolve_basepoint(&BasepointSpec::Name("generic".into()), space, cfg.seed)
        }
        None => zero_point(space),
    }
}

/// `system.basepoint` (if set) followed by `params.basepoints` sampled points.
fn basepoint_list(cfg: &ExperimentConfig, space: &Space) -> Result<Vec<Point>> {
    let mut pts = Vec::new();
    if let Some(spec) = &cfg.system.basepoint {
        pts.push(resolve_basepoint(spec, space, cfg.seed)?);
    }
    let mut r = rng(cfg.seed, STREAM_SAMPLES);
    pts.extend((0..cfg.params.basepoints).map(|_| space.sample(&mut r)));
    Ok(pts)
}

fn windows(cfg: &ExperimentConfig, sg: &Semigroup, tag_window: Option<WindowSpec>, default: &[u64]) -> Vec<WindowSpec> {
    if matches!(sg, Semigroup::Finite(_)) {
        return vec![WindowSpec::All];
    }
    match (&cfg.params.windows, tag_window) {
        (Some(w), _) => w.iter().map(|&s| sg.default_window(s)).collect(),
        (None, Some(w)) => vec![w],
        (None, None) => default.iter().map(|&s| sg.default_window(s)).collect(),
    }
}

fn gauge_fields(g: &Option<Gauge>) -> (String, String) {
    match g {
        None => ("none".into(), String::new()),
        Some(Gauge::Box { side }) => ("box".into(), side.to_string()),
        Some(Gauge::Prefix { len }) => ("prefix".into(), len.to_string()),
        Some(Gauge::WholeSemigroup) => ("whole_semigroup".into(), String::new()),
    }
}

fn status_name(s: CertificateStatus) -> &'static str {
    match s {
        CertificateStatus::CertifiedAtResolution => "CertifiedAtResolution",
        CertificateStatus::RefutedAtResolution => "RefutedAtResolution",
        CertificateStatus::Inconclusive => "Inconclusive",
    }
}

fn certify(cfg: &ExperimentConfig, sys: &ActionSystem, tag_window: Option<WindowSpec>, out: &mut Output) -> Result<Value> {
    let p = &cfg.params;
    let x = basepoint(cfg, &sys.space)?;
    let schedule = windows(cfg, &sys.semigroup, tag_window, &[1024, 2048, 4096]);
    let opts = CertifyOptions {
        max_gauge: p.max_gauge,
        ladder_depth: p.ladder_depth,
        collapse_ratio: p.collapse_ratio,
    };
    let mut rows = Vec::new();
    for eps in p.eps.to_vec() {
        let cert = certify_bohr(sys, &x, eps, &schedule, &opts)?;
        let tag = format!("eps{eps}");
        out.json(&format!("certificate_{tag}.json"), &cert)?;
        cert.defect_table.write_csv(out.create(&format!("defects_{tag}.csv"))?)?;
        let mut w = csv::Writer::from_writer(out.create(&format!("gauges_{tag}.csv"))?);
        w.write_record(["window", "gauge", "size", "members"])?;
        for ((win, g), m) in schedule.iter().zip(&cert.gauge_history).zip(&cert.member_counts) {
            let (kind, size) = gauge_fields(g);
            w.write_record([win.size_parameter().to_string(), kind, size, m.to_string()])?;
        }
        w.flush()?;
        rows.push(json!({
            "eps": eps,
            "status": status_name(cert.status),
            "reason": cert.reason,
            "gauge_history": cert.gauge_history,
            "member_counts": cert.member_counts,
            "delta_hat": cert.equicontinuity.delta_hat,
        }));
    }
    Ok(json!({ "basepoint": x, "certificates": rows }))
}

fn equicontinuity(
    cfg: &ExperimentConfig,
    sys: &ActionSystem,
    tag_window: Option<WindowSpec>,
    out: &mut Output,
) -> Result<Value> {
    let x = basepoint(cfg, &sys.space)?;
    let schedule = windows(cfg, &sys.semigroup, tag_window, &[1024, 2048, 4096]);
    let mut w = csv::Writer::from_writer(out.create("equicontinuity.csv")?);
    w.write_record(["eps", "window", "delta_hat", "net_size", "sample_size"])?;
    let mut per_eps = Vec::new();
    for eps in cfg.params.eps.to_vec() {
        let mut deltas = Vec::new();
        for win in &schedule {
            let pts = orbit(sys, &x, win)?.points();
            let net = epsilon_net(&sys.space, &pts, eps)?;
            let est = equicontinuity_modulus(sys, &net, eps, win, cfg.params.ladder_depth)?;
            w.write_record([
                format!("{eps:e}"),
                win.size_parameter().to_string(),
                format!("{:e}", est.delta_hat),
                net.len().to_string(),
                est.sample_size.to_string(),
            ])?;
            deltas.push(est.delta_hat);
        }
        let nonshrinking = deltas.windows(2).all(|d| d[1] >= d[0]);
        per_eps.push(json!({ "eps": eps, "delta_hat": deltas, "nonshrinking": nonshrinking }));
    }
    w.flush()?;
    let windows: Vec<u64> = schedule.iter().map(WindowSpec::size_parameter).collect();
    Ok(json!({ "basepoint": x, "windows": windows, "estimates": per_eps }))
}

/// At most `cap` evenly spaced elements of a window, always keeping the first.
fn strided(mut elems: Vec<Element>, cap: usize) -> Vec<Element> {
    if elems.len() <= cap {
        return elems;
    }
    let step = elems.len().div_ceil(cap);
    let last = elems.pop();
    let mut picked: Vec<Element> = elems.into_iter().step_by(step).collect();
    picked.extend(last);
    picked
}

fn diamond(cfg: &ExperimentConfig, sys: &ActionSystem, tag_window: Option<WindowSpec>, out: &mut Output) -> Result<Value> {
    let eps = cfg.params.eps.to_vec()[0];
    let y = basepoint(cfg, &sys.space)?;
    let window = windows(cfg, &sys.semigroup, tag_window, &[10000])
        .pop()
        .expect("at least one window");
    let net = build_orbit_net(sys, &y, eps, &window)?;
    let mut w = csv::Writer::from_writer(out.create("net.csv")?);
    w.write_record(["i", "representative", "point"])?;
    for (i, (g, p)) in net.representatives.iter().zip(&net.points).enumerate() {
        w.write_record([i.to_string(), g.coordinate_fields().join(";"), p.coordinate_fields().join(";")])?;
    }
    w.flush()?;
    let table = diamond_table(sys, net)?;
    table.write_csv(out.create("diamond.csv")?)?;
    let report = algebra_check(&table)?;

    let probes = strided(sys.semigroup.enumerate_window(&window)?, 64);
    let mut consistency: f64 = 0.0;
    let mut w = csv::Writer::from_writer(out.create("translation_consistency.csv")?);
    w.write_record(["g", "i", "defect"])?;
    for g in &probes {
        for (i, x) in table.net.points.iter().enumerate() {
            let d = table.translation_consistency(g, x)?;
            consistency = consistency.max(d);
            w.write_record([g.coordinate_fields().join(";"), i.to_string(), format!("{d:e}")])?;
        }
    }
    w.flush()?;

    let threshold = cfg.params.defect_threshold.unwrap_or_else(|| default_defect_threshold(eps));
    let passed = report.lifted.max() <= threshold && report.snapped.max() <= threshold && consistency <= 2.0 * eps;
    Ok(json!({
        "eps": eps,
        "window": window.size_parameter(),
        "net_size": table.len(),
        "lifted": report.lifted,
        "snapped": report.snapped,
        "max_snap_defect": report.max_snap_defect,
        "translation_consistency": consistency,
        "defect_threshold": threshold,
        "passed": passed,
    }))
}

fn haar(cfg: &ExperimentConfig, out: &mut Output) -> Result<Value> {
    let p = &cfg.params;
    let table = match FiniteTable::builtin(&p.table) {
        Some(t) => t,
        None => FiniteTable::from_path(&p.table).map_err(|e| Error::Config(e.to_string()))?,
    };
    let base_opts = HaarOptions {
        tolerance: p.haar_tolerance,
        max_iterations: p.max_iterations,
        start: None,
    };
    let sol = haar_solve_finite(&table, &base_opts)?;
    let mut r = rng(cfg.seed, STREAM_STARTS);
    let mut start_gap: f64 = 0.0;
    for _ in 0..p.starts {
        let opts = HaarOptions {
            start: Some(random_start(table.len(), &mut r)),
            ..base_opts.clone()
        };
        let other = haar_solve_finite(&table, &opts)?;
        for (a, b) in other.weights.iter().zip(&sol.weights) {
            start_gap = start_gap.max((a - b).abs());
        }
    }
    let mut w = csv::Writer::from_writer(out.create("haar.csv")?);
    w.write_record(["element", "weight", "oracle_weight"])?;
    for ((name, a), b) in sol.carrier.iter().zip(&sol.weights).zip(&sol.oracle_weights) {
        w.write_record([name.clone(), format!("{a:e}"), format!("{b:e}")])?;
    }
    w.flush()?;
    write_residuals(out, &sol.residual_history)?;
    let passed = sol.agrees_with_oracle() && start_gap <= ORACLE_TOLERANCE;
    Ok(json!({
        "table": table.name(),
        "carrier": sol.carrier,
        "weights": sol.weights,
        "oracle_weights": sol.oracle_weights,
        "oracle_gap": sol.oracle_gap,
        "residual": sol.residual,
        "iterations": sol.iterations,
        "starts": p.starts,
        "start_gap": start_gap,
        "passed": passed,
    }))
}

fn folner_kinds(cfg: &ExperimentConfig, sg: &Semigroup) -> Result<Vec<FolnerSequence>> {
    cfg.params
        .folner
        .to_vec()
        .iter()
        .map(|f| if f == "auto" { FolnerSequence::cubes_for(sg) } else { FolnerSequence::parse(f) })
        .collect()
}

fn write_basepoints(out: &mut Output, pts: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out.create("basepoints.csv")?);
    w.write_record(["basepoint", "point"])?;
    for (i, x) in pts.iter().enumerate() {
        w.write_record([i.to_string(), x.coordinate_fields().join(";")])?;
    }
    w.flush()?;
    Ok(())
}

fn test_family(cfg: &ExperimentConfig, space: &Space) -> Result<TestFamily> {
    let p = &cfg.params;
    let mut r = rng(cfg.seed, STREAM_FAMILY);
    let radius = p.landmark_radius.unwrap_or(0.25 * space.diameter().max(1e-9));
    match p.family.as_str() {
        "characters" => match space {
            Space::Torus { k } => Ok(TestFamily::characters(*k, p.k_max)),
            Space::BinaryCircle => Ok(TestFamily::characters(1, p.k_max)),
            other => Err(Error::Config(format!("characters need a torus, not {}", other.tag()))),
        },
        "landmarks" => TestFamily::landmarks(space, p.landmarks, radius, &mut r),
        _ => TestFamily::default_for(space, p.k_max, &mut r),
    }
}

fn unique_ergodicity(cfg: &ExperimentConfig, sys: &ActionSystem, out: &mut Output) -> Result<Value> {
    let p = &cfg.params;
    let pts = basepoint_list(cfg, &sys.space)?;
    write_basepoints(out, &pts)?;
    let fam = test_family(cfg, &sys.space)?;
    let mu = QuasiHaar::for_semigroup(&sys.semigroup);
    let mut rows = Vec::new();
    let mut passed = true;
    for folner in folner_kinds(cfg, &sys.semigroup)? {
        let rep = unique_ergodicity_probe(sys, &pts, &folner, &fam, &p.schedule, &mu, p.normalization, p.tolerance)?;
        let mut w = csv::Writer::from_writer(out.create(&format!("diameter_{}.csv", folner.name()))?);
        w.write_record(["n", "diameter", "i", "j"])?;
        for r in &rep.rows {
            w.write_record([r.n.to_string(), format!("{:e}", r.diameter), r.pair.0.to_string(), r.pair.1.to_string()])?;
        }
        w.flush()?;
        passed &= rep.consistent;
        rows.push(rep);
    }
    // The verdict is data here: a non-uniquely-ergodic control is expected to
    // be inconsistent, so it does not fail the run.
    Ok(json!({
        "family_size": fam.members.len(),
        "normalization": p.normalization,
        "reports": rows,
        "consistent": passed,
    }))
}

fn parse_phi(s: &str) -> Result<TestFunction> {
    let t = Tag::parse(s)?;
    let k: Vec<i64> = match t.params.get("k") {
        None => vec![1],
        Some(v) => v
            .split(';')
            .map(|x| x.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("bad frequency in {s:?}: {e}")))?,
    };
    match t.name.as_str() {
        "cos" => Ok(TestFunction::Cos { k }),
        "sin" => Ok(TestFunction::Sin { k }),
        other => Err(Error::InvalidInput(format!("unknown test function {other:?}"))),
    }
}

fn folner_uniform(cfg: &ExperimentConfig, sys: &ActionSystem, out: &mut Output) -> Result<Value> {
    let p = &cfg.params;
    let pts = basepoint_list(cfg, &sys.space)?;
    write_basepoints(out, &pts)?;
    let phi = parse_phi(&p.phi)?;
    let mu = QuasiHaar::for_semigroup(&sys.semigroup);
    let mut per_kind = Vec::new();
    let mut passed = true;
    for folner in folner_kinds(cfg, &sys.semigroup)? {
        let rows = uniform_convergence_probe(sys, &pts, &folner, &phi, p.target, &p.schedule, &mu)?;
        let series: Vec<(u64, f64, Option<usize>)> =
            rows.iter().map(|r| (r.n, r.deviation, Some(r.basepoint))).collect();
        write_series_csv(out.create(&format!("deviation_{}.csv", folner.name()))?, &series)?;
        let averages: Vec<(u64, f64, Option<usize>)> = rows
            .iter()
            .flat_map(|r| r.averages.iter().enumerate().map(move |(i, a)| (r.n, *a, Some(i))))
            .collect();
        write_series_csv(out.create(&format!("averages_{}.csv", folner.name()))?, &averages)?;
        let deviations: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
        let nonincreasing = deviations.windows(2).all(|d| d[1] <= d[0]);
        let last = *deviations.last().expect("schedule is nonempty");
        passed &= nonincreasing && last <= p.tolerance;
        per_kind.push(json!({
            "folner": folner.name(),
            "schedule": p.schedule,
            "deviation": deviations,
            "nonincreasing": nonincreasing,
            "final_deviation": last,
        }));
    }
    Ok(json!({
        "phi": phi.name(),
        "target": p.target,
        "tolerance": p.tolerance,
        "basepoints": pts.len(),
        "sequences": per_kind,
        "uniform": passed,
    }))
}

fn shulman(cfg: &ExperimentConfig, out: &mut Output) -> Result<Value> {
    let p = &cfg.params;
    let mut reports = Vec::new();
    for folner in [FolnerSequence::Cube { dim: p.dim }, FolnerSequence::Jr] {
        let rep = shulman_constant(&folner, p.n_max)?;
        let mut w = csv::Writer::from_writer(out.create(&format!("shulman_{}.csv", folner.name()))?);
        w.write_record(["n", "c_n"])?;
        for (n, c) in &rep.constants {
            w.write_record([n.to_string(), format!("{c:e}")])?;
        }
        w.flush()?;
        reports.push(json!({
            "folner": rep.folner,
            "max_constant": rep.max_constant,
            "last_constant": rep.constants.last().map(|c| c.1),
            "verdict": rep.verdict,
            "tempered_looking": rep.verdict == ShulmanVerdict::BoundedLooking,
        }));
    }
    let sg = Semigroup::ZPlus { dim: 1 };
    let mu = QuasiHaar::Counting;
    let one = Element::n(1);
    let mut w = csv::Writer::from_writer(out.create("folner_ratio_jr.csv")?);
    w.write_record(["n", "ratio", "exact"])?;
    let mut max_gap: f64 = 0.0;
    for n in 1..=p.ratio_n_max {
        let ratio = folner_ratio(&sg, &mu, &crate::ergodic::jr_sequence(n)?, &one)?;
        let exact = 2.0 / (n as f64 + 1.0);
        max_gap = max_gap.max((ratio - exact).abs());
        w.write_record([n.to_string(), format!("{ratio:e}"), format!("{exact:e}")])?;
    }
    w.flush()?;
    Ok(json!({
        "n_max": p.n_max,
        "shulman": reports,
        "jr_ratio_n_max": p.ratio_n_max,
        "jr_ratio_max_gap": max_gap,
    }))
}

/// Stable, sorted listing of everything a config can name.
pub fn list_systems() -> String {
    let mut lines = vec![
        "action doubling (semigroup zplus:d=1, space binary circle)".to_string(),
        "action finite:<action csv> (semigroup finite:<table>)".to_string(),
        "action finite:contract<n> (semigroup zplus:d=1)".to_string(),
        "action finite:cycle<n> (semigroup zplus:d=1)".to_string(),
        "action torus:k=1,alpha=golden (semigroup zplus:d=1)".to_string(),
        "action torus:k=1,alpha=silver (semigroup zplus:d=1)".to_string(),
        "action torus:k=2,alpha=golden/silver (semigroup zplus:d=1)".to_string(),
        "action torus:k=<k>,alpha=<a1/../ak;...> (one row per generator of zplus:d or rplusgrid:d)".to_string(),
        "action zbarplus-space (semigroup zbarplus, translation)".to_string(),
        "experiment certify".to_string(),
        "experiment diamond".to_string(),
        "experiment equicontinuity".to_string(),
        "experiment folner-uniform".to_string(),
        "experiment haar".to_string(),
        "experiment shulman-jr".to_string(),
        "experiment unique-ergodicity".to_string(),
        "folner cube[:d=<d>]".to_string(),
        "folner gridcube[:d=<d>,h=<step>]".to_string(),
        "folner jr".to_string(),
        "semigroup finite:<table csv>".to_string(),
        "semigroup finite:cyclic<n>".to_string(),
        "semigroup finite:truncadd<m>".to_string(),
        "semigroup finite:trunczbar<n>".to_string(),
        "semigroup matnn:n=<n>[,max=<m>]".to_string(),
        "semigroup rplusgrid:h=<step>[,d=<d>,T=<horizon>]".to_string(),
        "semigroup zbarplus[:N=<cutoff>]".to_string(),
        "semigroup zplus:d=<d>[,W=<width>]".to_string(),
        "space binary circle (via action doubling)".to_string(),
        "space finite:<n points>".to_string(),
        "space torus:k=<k>".to_string(),
        "space zbarplus-space".to_string(),
        "test-family characters (tori, |k|_inf <= k_max)".to_string(),
        "test-family landmarks (min(1, d(x, p) / r) at sampled p)".to_string(),
    ];
    lines.sort();
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_sorted_and_names_the_basics() {
        let s = list_systems();
        let lines: Vec<&str> = s.lines().collect();
        let mut sorted = lines.clone();
        sorted.sort();
        assert_eq!(lines, sorted);
        for needle in ["zbarplus", "jr", "torus:k=1,alpha=golden"] {
            assert!(s.contains(needle), "{needle}");
        }
    }

    #[test]
    fn config_errors_are_exit_2() {
        for text in [
            "experiment = \"nope\"",
            "experiment = \"certify\"\nbogus = 1",
            "experiment = \"certify\"\n[system]\nspace = \"klein-bottle\"",
            "experiment = \"certify\"\n[params]\nwindows = [64, 32]",
            "experiment = \"folner-uniform\"\n[params]\nschedule = [10, 10]",
            "experiment = \"certify\"\n[params]\neps = -0.1",
        ] {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(exit_code(&err), 2, "{text}: {err}");
        }
    }

    #[test]
    fn scalar_or_list_eps() {
        let a = ExperimentConfig::from_toml("experiment = \"certify\"\n[params]\neps = 0.2").unwrap();
        let b = ExperimentConfig::from_toml("experiment = \"certify\"\n[params]\neps = [0.2, 0.1]").unwrap();
        assert_eq!(a.params.eps.to_vec(), vec![0.2]);
        assert_eq!(b.params.eps.to_vec(), vec![0.2, 0.1]);
    }

    #[test]
    fn basepoints_resolve_per_space() {
        let zb = resolve_basepoint(&BasepointSpec::Coords(vec![3.0]), &Space::ZBarPlus, 0).unwrap();
        assert_eq!(zb, Point::ZBar(ZBar::Fin(3)));
        let inf = resolve_basepoint(&BasepointSpec::Name("inf".into()), &Space::ZBarPlus, 0).unwrap();
        assert_eq!(inf, Point::ZBar(ZBar::Inf));
        assert!(resolve_basepoint(&BasepointSpec::Coords(vec![0.1, 0.2]), &Space::Torus { k: 1 }, 0).is_err());
        let g1 = resolve_basepoint(&BasepointSpec::Name("generic".into()), &Space::Torus { k: 2 }, 7).unwrap();
        let g2 = resolve_basepoint(&BasepointSpec::Name("generic".into()), &Space::Torus { k: 2 }, 7).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn strided_keeps_ends() {
        let v: Vec<Element> = (0..100).map(Element::n).collect();
        let s = strided(v, 10);
        assert!(s.len() <= 11);
        assert_eq!(s[0], Element::n(0));
        assert_eq!(*s.last().unwrap(), Element::n(99));
    }

    #[test]
    fn haar_run_writes_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml("experiment = \"haar\"\nseed = 3\n[params]\ntable = \"cyclic5\"").unwrap();
        let outcome = run(&cfg, dir.path()).unwrap();
        assert!(outcome.report.passed);
        let w = outcome.report.result["weights"].as_array().unwrap();
        assert!(w.iter().all(|v| (v.as_f64().unwrap() - 0.2).abs() < 1e-12));
        for a in &outcome.report.artifacts {
            assert!(a.bytes > 0, "{}", a.file);
            assert!(dir.path().join(&a.file).exists());
        }
        assert!(dir.path().join("timings.json").exists());
    }

    #[test]
    fn nonconvergence_is_exit_4_with_history() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml(
            "experiment = \"haar\"\n[params]\ntable = \"truncadd5\"\nmax_iterations = 2",
        )
        .unwrap();
        let err = run(&cfg, dir.path()).unwrap_err();
        assert_eq!(exit_code(&err), 4);
        let hist = fs::read_to_string(dir.path().join("residual_history.csv")).unwrap();
        assert_eq!(hist.lines().count(), 4);
    }
}
