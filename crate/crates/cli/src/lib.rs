//! Batch runner: reads an experiment description, runs it with a fixed
//! root seed and writes CSV artifacts, a JSON summary and a manifest with
//! content hashes.

use std::fs;
use std::path::{Path, PathBuf};

use oulevy::levy::log_moment_finite;
use oulevy::occupation::{default_schedule, ergodic_ratio, l2_diagnostics, local_time_estimate};
use oulevy::ou::{check_existence_criterion, simulate_path, ExistenceVerdict, OuModel};
use oulevy::passage::{creep_jump_statistics, first_passage_mc, hadjiev_laplace, PassageOptions};
use oulevy::rng::SeedStreams;
use oulevy::spectral::{adaptive_grid, invert_to_density, linspace, CfEvaluator};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model: OuModel,
    pub experiment: Experiment,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawChoice {
    Invariant,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        horizon: f64,
        dt: Option<f64>,
        #[serde(default = "one")]
        paths: usize,
    },
    Density {
        law: LawChoice,
        /// Required for the transition law.
        t: Option<f64>,
        y_min: f64,
        y_max: f64,
        points: usize,
    },
    Localtime {
        horizon: f64,
        dt: Option<f64>,
        #[serde(default = "one")]
        paths: usize,
        level: f64,
        /// Times at which `L_ε` is reported; default ten equal steps.
        times: Option<Vec<f64>>,
        schedule: Option<Vec<f64>>,
    },
    Ergodic {
        level: f64,
        horizons: Vec<f64>,
        epsilon: f64,
        paths: usize,
        dt: Option<f64>,
    },
    Passage {
        level: f64,
        horizon: f64,
        dt: Option<f64>,
        paths: usize,
        #[serde(default = "yes")]
        bridge_correction: bool,
        /// θ values for the Laplace transform (drivers without positive jumps).
        thetas: Option<Vec<f64>>,
    },
    Check,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::Density { .. } => "density",
            Experiment::Localtime { .. } => "localtime",
            Experiment::Ergodic { .. } => "ergodic",
            Experiment::Passage { .. } => "passage",
            Experiment::Check => "check",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] oulevy::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 config error, 2 precondition refusal, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(e) if e.is_invalid() => 1,
            CliError::Core(e) if e.is_refusal() => 2,
            CliError::Core(_) | CliError::Io(_) => 3,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical serialisation. The output directory is
    /// left out so relocated runs of the same experiment share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = PathBuf::new();
        sha256_hex(c.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let pos_opt = |v: Option<f64>| v.is_none_or(pos);
        match &self.experiment {
            Experiment::Simulate { horizon, dt, paths } => {
                if !pos(*horizon) || !pos_opt(*dt) || *paths == 0 {
                    return bad("simulate: horizon, dt and paths must be positive");
                }
            }
            Experiment::Density { law, t, y_min, y_max, points } => {
                if !(y_min < y_max) || *points < 2 {
                    return bad("density: need y_min < y_max and at least two points");
                }
                if *law == LawChoice::Transition && !t.is_some_and(pos) {
                    return bad("density: the transition law needs t > 0");
                }
            }
            Experiment::Localtime { horizon, dt, paths, times, schedule, .. } => {
                if !pos(*horizon) || !pos_opt(*dt) || *paths == 0 {
                    return bad("localtime: horizon, dt and paths must be positive");
                }
                if times.as_ref().is_some_and(|ts| ts.is_empty() || ts.iter().any(|t| !pos(*t) || *t > *horizon)) {
                    return bad("localtime: times must lie in (0, horizon]");
                }
                if schedule.as_ref().is_some_and(|s| s.len() < 3 || s.iter().any(|e| !pos(*e))) {
                    return bad("localtime: schedule needs at least three positive levels");
                }
            }
            Experiment::Ergodic { horizons, epsilon, paths, dt, .. } => {
                if horizons.is_empty() || horizons.iter().any(|t| !pos(*t)) || !pos(*epsilon) || *paths < 2 || !pos_opt(*dt) {
                    return bad("ergodic: horizons, epsilon, dt must be positive and paths >= 2");
                }
            }
            Experiment::Passage { horizon, dt, paths, thetas, .. } => {
                if !pos(*horizon) || !pos_opt(*dt) || *paths == 0 {
                    return bad("passage: horizon, dt and paths must be positive");
                }
                if thetas.as_ref().is_some_and(|ts| ts.iter().any(|t| !pos(*t))) {
                    return bad("passage: thetas must be positive");
                }
            }
            Experiment::Check => {}
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// An artifact written by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub seed: u64,
    pub config_hash: String,
    pub versions: Value,
    pub artifacts: Vec<Artifact>,
}

/// Outcome of a run: human-readable lines and the summary document.
#[derive(Debug, Clone)]
pub struct Report {
    pub lines: Vec<String>,
    pub summary: Value,
    pub manifest: Manifest,
    pub output: PathBuf,
}

struct Sink {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Sink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact { file: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn csv(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }
}

fn verdict_line(v: &ExistenceVerdict) -> String {
    match v {
        ExistenceVerdict::GaussianCase => "gaussian-case".into(),
        ExistenceVerdict::JumpCase { alpha, c, .. } => format!("jump-case(α={alpha:.4}, c={c:.4})"),
        ExistenceVerdict::Fails { reason } => format!("fails ({reason})"),
        ExistenceVerdict::Undetermined { reason } => format!("undetermined ({reason})"),
    }
}

/// Run an experiment, writing artifacts to `config.output`.
pub fn run(config: &ExperimentConfig) -> Result<Report, CliError> {
    config.validate()?;
    let dir = config.output.clone();
    fs::create_dir_all(&dir)?;
    let mut sink = Sink { dir: dir.clone(), artifacts: Vec::new() };
    let model = &config.model;
    let streams = SeedStreams::new(config.seed);
    let config_hash = config.hash();
    let model_hash = sha256_hex(toml::to_string(model).expect("model serialises").as_bytes());
    let mut lines = Vec::new();
    let summary = match &config.experiment {
        Experiment::Simulate { horizon, dt, paths } => {
            let dt = dt.unwrap_or_else(|| model.default_dt());
            let mut finals = Vec::new();
            let mut warnings = Vec::new();
            for k in 0..*paths {
                let p = simulate_path(model, *horizon, dt, streams.stream(k as u64))?;
                sink.csv(&format!("path_{k:04}.csv"), |w| p.write_csv(w, &model_hash[..16]))?;
                if !p.jumps.is_empty() {
                    sink.csv(&format!("jumps_{k:04}.csv"), |w| p.write_jumps_csv(w))?;
                }
                finals.push(p.final_value());
                warnings = p.warnings.clone();
            }
            lines.push(format!("simulated {paths} path(s) to t = {horizon} with dt = {dt}"));
            json!({ "paths": paths, "dt": dt, "final_values": finals, "warnings": warnings })
        }
        Experiment::Density { law, t, y_min, y_max, points } => {
            let eval = match law {
                LawChoice::Invariant => CfEvaluator::invariant(model)?,
                LawChoice::Transition => CfEvaluator::transition(model, t.expect("validated"))?,
            };
            let ys = linspace(*y_min, *y_max, *points);
            let grid = adaptive_grid(&eval, &ys)?;
            let table = invert_to_density(&grid, &ys)?;
            sink.csv("cf.csv", |w| grid.write_csv(w))?;
            sink.csv("density.csv", |w| table.write_csv(w))?;
            lines.push(format!(
                "density on [{y_min}, {y_max}]: mass {:.6}, max negativity {:.2e}, cutoff {:.3}",
                table.total_mass, table.max_negativity, table.cutoff
            ));
            json!({
                "total_mass": table.total_mass,
                "max_negativity": table.max_negativity,
                "cutoff": table.cutoff,
                "spacing": table.spacing,
                "nodes": grid.grid.len(),
            })
        }
        Experiment::Localtime { horizon, dt, paths, level, times, schedule } => {
            let dt = dt.unwrap_or_else(|| model.default_dt());
            let times = times.clone().unwrap_or_else(|| (1..=10).map(|k| horizon * k as f64 / 10.0).collect());
            let schedule = match schedule {
                Some(s) => s.clone(),
                None => default_schedule(model, *horizon)?,
            };
            let mut ests = Vec::new();
            for k in 0..*paths {
                let p = simulate_path(model, *horizon, dt, streams.stream(k as u64))?;
                let est = local_time_estimate(&p, *level, &times, &schedule)?;
                sink.csv(&format!("localtime_{k:04}.csv"), |w| est.write_csv(w))?;
                ests.push(est);
            }
            let converged = ests.iter().filter(|e| e.converged).count();
            let l2 = l2_diagnostics(&ests)?;
            lines.push(format!("local time at x = {level}: {converged}/{paths} path(s) converged"));
            json!({
                "level": level,
                "schedule": schedule,
                "converged_paths": converged,
                "l2_diagnostics": l2,
                "path_diagnostics": ests.iter().map(|e| e.diagnostics.clone()).collect::<Vec<_>>(),
            })
        }
        Experiment::Ergodic { level, horizons, epsilon, paths, dt } => {
            let est = ergodic_ratio(model, *level, horizons, *epsilon, *paths, *dt, streams)?;
            sink.csv("ergodic.csv", |w| est.write_csv(w))?;
            lines.push(format!("f({level}) = {:.6} from the invariant density", est.f_ref));
            for ((t, r), s) in est.horizons.iter().zip(&est.ratios).zip(&est.stderr) {
                lines.push(format!("t = {t}: L/t = {r:.6} ± {s:.6}"));
            }
            serde_json::to_value(&est).expect("serialisable")
        }
        Experiment::Passage { level, horizon, dt, paths, bridge_correction, thetas } => {
            let opts = PassageOptions {
                horizon: *horizon,
                dt: dt.unwrap_or_else(|| model.default_dt()),
                paths: *paths,
                bridge_correction: *bridge_correction,
            };
            let res = first_passage_mc(model, *level, opts, streams)?;
            sink.csv("passage.csv", |w| res.write_csv(w))?;
            let stats = match creep_jump_statistics(&res) {
                Ok(s) => serde_json::to_value(s).expect("serialisable"),
                Err(e) => json!({ "unavailable": e.to_string() }),
            };
            lines.push(format!(
                "passage above {level}: {} uncensored of {paths}, creep fraction {:.4}",
                res.summary.uncensored, res.summary.creep_fraction
            ));
            let mut out = json!({ "summary": res.summary, "creep_jump": stats, "warnings": res.warnings });
            if let Some(ts) = thetas {
                let h = hadjiev_laplace(model, *level, ts)?;
                sink.csv("laplace.csv", |w| h.write_csv(w, Some(&res)))?;
                for (t, v) in h.thetas.iter().zip(&h.values) {
                    let (m, s) = res.laplace_mc(*t);
                    lines.push(format!("θ = {t}: transform {v:.6}, Monte Carlo {m:.6} ± {s:.6}"));
                }
                out["laplace"] = json!({ "thetas": h.thetas, "values": h.values, "shape_violations": h.shape_violations() });
            }
            out
        }
        Experiment::Check => {
            let verdict = check_existence_criterion(model)?;
            let lm = log_moment_finite(model.driver().jumps())?;
            let lm_text = match lm.status {
                oulevy::levy::LogMomentStatus::Finite => "satisfied",
                oulevy::levy::LogMomentStatus::Infinite => "violated",
                oulevy::levy::LogMomentStatus::Undetermined => "undetermined",
            };
            lines.push(format!("local-time criterion: {}; log-moment condition: {lm_text}", verdict_line(&verdict)));
            json!({ "existence": verdict, "log_moment": lm })
        }
    };
    let summary_doc = json!({ "experiment": config.experiment.name(), "seed": config.seed, "result": summary });
    sink.write("summary.json", (serde_json::to_string_pretty(&summary_doc).expect("json") + "\n").as_bytes())?;
    let manifest = Manifest {
        experiment: config.experiment.name().into(),
        seed: config.seed,
        config_hash,
        versions: json!({ "oulevy": oulevy::VERSION, "oulevy-cli": env!("CARGO_PKG_VERSION") }),
        artifacts: sink.artifacts.clone(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("json") + "\n")?;
    Ok(Report { lines, summary: summary_doc, manifest, output: dir })
}
