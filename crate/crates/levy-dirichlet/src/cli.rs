//! Experiment driver: flat JSON configuration with `--key value`
//! overrides, one subcommand per invocation, and machine-readable outputs
//! (`results.jsonl`, `summary.csv`, `manifest.json`).

use crate::blyth::{blyth_sequence, default_eta, prior_from_root, transient_lower_bound, DEFAULT_TIME_NODES, DEFAULT_T_MAX};
use crate::classify::{classify_exponent, potential_closed_form, potential_numeric, PotentialKind, Verdict};
use crate::density::{check_tail_mass, transition_density, PriorSpec, TAIL_MASS_LIMIT};
use crate::dirichlet::{bgx_bridge, calibrate_normalization, reference_kappa};
use crate::error::{Error, Result};
use crate::levy_model::{ExponentKind, LevyExponent, ModelSpec, RadialTable};
use crate::paths::{ks_against_density, return_statistics, sample_increments};
use crate::risk::{bayes_risk_difference, default_method, kl_risk_with, verify_theorem1, Method, MonteCarlo, Predictive};
use crate::spectral_core::{Field, GridSpec};
use crate::variational::{dv_kl, i_function_estimate, rate_function_probe};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Classify,
    Potential,
    Density,
    Risk,
    RiskDiff,
    VerifyTheorem1,
    DvKl,
    RateProbe,
    Blyth,
    LowerBound,
    Simulate,
    BgxBridge,
    Calibrate,
}

impl Subcommand {
    fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

/// Keys accepted in a configuration document or as overrides.
pub const KNOWN_KEYS: &[&str] = &[
    "alpha", "c", "dim", "expect", "extent", "family_size", "gamma", "grid_n", "h_list", "horizon", "kappa", "kind",
    "mean_p", "mean_q", "method", "model", "n_list", "nodes", "out", "paths", "predictive", "prior", "radius",
    "samples", "seed", "step", "step_size", "steps", "t", "t_max", "table", "tau2", "theta", "tolerance", "v",
    "var_p", "var_q", "x",
];

/// Flat experiment configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: Map<String, Value>,
}

fn normalize_key(k: &str) -> String {
    k.trim_start_matches("--").replace('-', "_")
}

fn field_error(key: &str, expected: &str, got: &Value) -> Error {
    Error::Config(format!("field `{key}`: expected {expected}, got {got}"))
}

impl Config {
    /// Reads an optional JSON object and applies overrides on top. Override
    /// values parse as JSON when possible and fall back to strings.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))? {
                    Value::Object(m) => m.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect(),
                    _ => return Err(Error::Config("config document must be a JSON object".into())),
                }
            }
            None => Map::new(),
        };
        for (k, v) in overrides {
            let parsed = serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.clone()));
            values.insert(normalize_key(k), parsed);
        }
        let cfg = Self { values };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a configuration from key/value pairs.
    pub fn from_pairs(pairs: &[(&str, Value)]) -> Result<Self> {
        let values = pairs.iter().map(|(k, v)| (normalize_key(k), v.clone())).collect();
        let cfg = Self { values };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let unknown: Vec<&str> = self.values.keys().map(String::as_str).filter(|k| !KNOWN_KEYS.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown fields: {}", unknown.join(", "))));
        }
        Ok(())
    }

    pub fn values(&self) -> &Map<String, Value> {
        &self.values
    }

    /// SHA-256 of the canonical JSON of every key except `out`.
    pub fn hash(&self) -> String {
        let mut m = self.values.clone();
        m.remove("out");
        let text = serde_json::to_string(&m).unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| field_error(key, "a number", v)),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| field_error(key, "a nonnegative integer", v)),
        }
    }

    fn usize(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.to_lowercase())),
            Some(v) => Err(field_error(key, "a string", v)),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let bad = |v: &Value| field_error(key, "a comma-separated list of numbers", v);
        match self.get(key) {
            None => Ok(None),
            Some(v @ Value::String(s)) => {
                s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad(v))).collect::<Result<_>>().map(Some)
            }
            Some(v @ Value::Array(a)) => a.iter().map(|x| x.as_f64().ok_or_else(|| bad(v))).collect::<Result<_>>().map(Some),
            Some(Value::Number(n)) => Ok(n.as_f64().map(|x| vec![x])),
            Some(v) => Err(bad(v)),
        }
    }

    fn point(&self, key: &str, d: usize, default: Vec<f64>) -> Result<Vec<f64>> {
        let p = self.list(key)?.unwrap_or(default);
        if p.len() != d {
            return Err(Error::Config(format!("field `{key}`: expected {d} coordinates, got {}", p.len())));
        }
        Ok(p)
    }

    fn dim(&self) -> Result<usize> {
        let d = self.usize("dim", 1)?;
        if !(1..=3).contains(&d) {
            return Err(Error::Config(format!("field `dim`: expected 1, 2 or 3, got {d}")));
        }
        Ok(d)
    }

    fn kind(&self) -> Result<String> {
        Ok(match (self.string("model")?, self.string("kind")?) {
            (Some(m), _) => m,
            (None, Some(k)) => k,
            (None, None) => "gaussian".into(),
        })
    }

    fn exponent(&self) -> Result<LevyExponent<f64>> {
        let d = self.dim()?;
        let c = match (self.f64_opt("c")?, self.f64_opt("v")?) {
            (Some(c), _) => c,
            (None, Some(v)) => v,
            (None, None) => 1.0,
        };
        let exponent = match self.kind()?.as_str() {
            "gaussian" => LevyExponent::gaussian(d, c),
            "cauchy" => LevyExponent::cauchy(d, c),
            "stable" => {
                let a = self.f64("alpha", 1.0)?;
                if a == 2.0 {
                    LevyExponent::gaussian(d, 2.0 * c)
                } else {
                    LevyExponent::stable(d, c, a)
                }
            }
            "tabulated" => {
                let path = self.string("table")?.ok_or_else(|| Error::Config("field `table`: required for tabulated models".into()))?;
                let table = RadialTable::from_path(Path::new(&path)).map_err(|e| Error::Config(format!("field `table`: {e}")))?;
                LevyExponent::tabulated(d, c, table)
            }
            other => return Err(Error::Config(format!("field `model`: unknown kind `{other}`"))),
        };
        exponent.map_err(|e| Error::Config(e.to_string()))
    }

    fn model(&self) -> Result<ModelSpec<f64>> {
        let e = self.exponent()?;
        let theta = self.point("theta", e.d, vec![0.0; e.d])?;
        ModelSpec::new(e, theta).map_err(|e| Error::Config(e.to_string()))
    }

    fn grid(&self, exponent: &LevyExponent<f64>) -> Result<GridSpec<f64>> {
        let gaussian = matches!(exponent.kind, ExponentKind::Gaussian);
        let base = GridSpec::default_for(exponent.d, gaussian)?;
        let n = self.usize("grid_n", base.n)?;
        let l = self.f64("extent", base.l)?;
        let grid = GridSpec::new(exponent.d, n, l).map_err(|e| Error::Config(e.to_string()))?;
        check_tail_mass(exponent, 1.0, &grid, TAIL_MASS_LIMIT)
            .map_err(|e| Error::Config(format!("field `extent`: {e}; widen the box")))?;
        Ok(grid)
    }

    fn prior(&self, grid: &GridSpec<f64>) -> Result<PriorSpec<f64>> {
        let d = grid.d;
        let tau2 = self.f64("tau2", 1.0)?;
        match self.string("prior")?.as_deref().unwrap_or("gaussian") {
            "gaussian" => Ok(PriorSpec::gaussian(d, tau2)),
            "gaussian-grid" | "gaussian_grid" => PriorSpec::gaussian_grid(*grid, tau2),
            "cauchy" => Ok(PriorSpec::cauchy(d, self.f64("gamma", 1.0)?)),
            other => Err(Error::Config(format!("field `prior`: unknown prior `{other}`"))),
        }
    }

    fn kappa(&self) -> Result<f64> {
        match self.f64_opt("kappa")? {
            Some(k) if k > 0.0 => Ok(k),
            Some(k) => Err(Error::Config(format!("field `kappa`: must be positive, got {k}"))),
            None => reference_kappa(),
        }
    }

    fn method(&self, d: usize) -> Result<Method> {
        match self.string("method")?.as_deref() {
            None => Ok(default_method(d)),
            Some("quadrature") => Ok(Method::Quadrature),
            Some("monte-carlo" | "monte_carlo" | "mc") => Ok(Method::MonteCarlo),
            Some(other) => Err(Error::Config(format!("field `method`: unknown method `{other}`"))),
        }
    }

    fn mc(&self) -> Result<MonteCarlo> {
        Ok(MonteCarlo { samples: self.usize("samples", 4000)?, seed: self.u64("seed", 0)? })
    }

    fn expect(&self) -> Result<Option<Expect>> {
        match self.string("expect")? {
            None => Ok(None),
            Some(s) => Expect::from_str(&s, true).map(Some).map_err(|_| {
                Error::Config(format!("field `expect`: expected decay, bounded, recurrent or transient, got `{s}`"))
            }),
        }
    }
}

/// Expected outcome checked by `--expect`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Expect {
    Decay,
    Bounded,
    Recurrent,
    Transient,
}

/// Records produced by one experiment, and whether its tolerances held.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub records: Vec<Value>,
    pub passed: bool,
    pub kappa: Option<f64>,
    pub grid_hash: Option<String>,
    /// Human-readable lines printed to stdout.
    pub report: Vec<String>,
}

fn to_value<S: Serialize>(s: &S) -> Value {
    serde_json::to_value(s).unwrap_or(Value::Null)
}

fn verdict_matches(expect: Option<Expect>, verdict: Verdict) -> bool {
    match expect {
        Some(Expect::Recurrent) => verdict == Verdict::Recurrent,
        Some(Expect::Transient) => verdict == Verdict::Transient,
        _ => true,
    }
}

/// Runs one subcommand and returns its records without touching disk.
pub fn execute(cmd: Subcommand, cfg: &Config) -> Result<Outcome> {
    let expect = cfg.expect()?;
    let mut out = Outcome { passed: true, ..Default::default() };
    match cmd {
        Subcommand::Classify => {
            let e = cfg.exponent()?;
            let r = classify_exponent(&e)?;
            out.report.push(format!("{}: {}", e.label(), r.verdict));
            out.report.push("k\tepsilon\tI_k".into());
            for (k, v) in r.criterion_values.iter().enumerate() {
                out.report.push(format!("{}\t{:.6e}\t{:.10e}", k + 1, 0.5f64.powi(k as i32 + 1), v));
            }
            out.passed = verdict_matches(expect, r.verdict);
            let mut v = to_value(&r);
            v["model"] = json!(e.label());
            out.records.push(v);
        }
        Subcommand::Potential => {
            let m = cfg.model()?;
            let d = m.d();
            let x = cfg.point("x", d, (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect())?;
            let est = potential_numeric(&m, &x, cfg.f64("t_max", 1e3)?)?;
            let kind = match &m.exponent.kind {
                ExponentKind::Gaussian => Some(PotentialKind::Gaussian),
                _ if m.exponent.is_cauchy() => Some(PotentialKind::Cauchy),
                _ => None,
            };
            let mut v = to_value(&est);
            if let Some(kind) = kind {
                let rel: Vec<f64> = x.iter().zip(&m.theta).map(|(a, b)| a - b).collect();
                let closed = potential_closed_form(kind, d, &rel)? / m.exponent.c;
                v["closed_form"] = if closed.is_finite() { json!(closed) } else { json!("inf") };
                if let (Some(num), true) = (est.value, closed.is_finite()) {
                    let err = (num / closed - 1.0).abs();
                    v["relative_error"] = json!(err);
                    out.passed &= err < cfg.f64("tolerance", 0.01)?;
                }
            }
            out.report.push(format!("{}: {:?} {:?}", m.exponent.label(), est.verdict, est.value));
            out.passed &= verdict_matches(expect, est.verdict);
            v["model"] = json!(m.exponent.label());
            out.records.push(v);
        }
        Subcommand::Density => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let f = transition_density(&m, cfg.f64("t", 1.0)?, &grid)?;
            out.grid_hash = Some(grid.hash());
            out.records.push(json!({
                "model": m.exponent.label(),
                "mass": f.integral(),
                "min": f.min(),
                "max": f.max(),
                "grid_hash": grid.hash(),
            }));
            out.report.push(format!("mass {:.12} max {:.6e}", f.integral(), f.max()));
            if grid.d == 1 {
                out.records[0]["values"] = json!(f.values);
            }
        }
        Subcommand::Risk => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let predictive = match cfg.string("predictive")?.as_deref().unwrap_or("uniform") {
                "uniform" => Predictive::UniformBayes,
                "plug-in" | "plug_in" | "plugin" => Predictive::PlugInMLE,
                "proper" => Predictive::ProperBayes(cfg.prior(&grid)?),
                other => return Err(Error::Config(format!("field `predictive`: unknown predictive `{other}`"))),
            };
            let theta = m.theta.clone();
            let r = kl_risk_with(&ModelSpec::centered(m.exponent.clone()), &theta, &predictive, &grid, cfg.method(grid.d)?, cfg.mc()?)?;
            out.grid_hash = Some(grid.hash());
            out.report.push(format!("risk {:.8} ± {:.2e}", r.value, r.std_error));
            let mut v = to_value(&r);
            v["model"] = json!(m.exponent.label());
            v["theta"] = json!(theta);
            out.records.push(v);
        }
        Subcommand::RiskDiff => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let prior = cfg.prior(&grid)?;
            let r = bayes_risk_difference(&m, &prior, &grid, cfg.method(grid.d)?, cfg.mc()?)?;
            out.grid_hash = Some(grid.hash());
            out.report.push(format!("risk difference {:.8} ± {:.2e}", r.value, r.std_error));
            let mut v = to_value(&r);
            v["model"] = json!(m.exponent.label());
            v["prior"] = json!(prior.label());
            out.records.push(v);
        }
        Subcommand::VerifyTheorem1 => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let prior = cfg.prior(&grid)?;
            let kappa = cfg.kappa()?;
            let r = verify_theorem1(&m, &prior, &grid, kappa, cfg.method(grid.d)?, cfg.mc()?)?;
            let tol = cfg.f64("tolerance", if matches!(m.exponent.kind, ExponentKind::Gaussian) { 0.02 } else { 0.05 })?;
            out.passed = r.relative_gap < tol;
            out.kappa = Some(kappa);
            out.grid_hash = Some(grid.hash());
            out.report.push(format!("lhs {:.8} rhs {:.8} relative gap {:.4}", r.lhs, r.rhs, r.relative_gap));
            out.records.push(to_value(&r));
        }
        Subcommand::DvKl => {
            let grid = GridSpec::new(1, cfg.usize("grid_n", 4096)?, cfg.f64("extent", 40.0)?)?;
            let (mp, vp) = (cfg.f64("mean_p", 0.0)?, cfg.f64("var_p", 2.0)?);
            let (mq, vq) = (cfg.f64("mean_q", 1.0)?, cfg.f64("var_q", 2.0)?);
            let p = Field::from_fn(grid, |x| crate::density::gaussian_pdf(x, &[mp], vp)).normalized()?;
            let q = Field::from_fn(grid, |x| crate::density::gaussian_pdf(x, &[mq], vq)).normalized()?;
            let r = dv_kl(&p, &q, &Field::constant(grid, 0.0), cfg.usize("steps", 500)?, cfg.f64("step_size", 1.0)?)?;
            out.passed = r.invariant_holds();
            out.grid_hash = Some(grid.hash());
            out.report.push(format!("bound {:.8} kl {:.8}", r.bound, r.kl));
            out.records.push(json!({
                "bound": r.bound,
                "kl": r.kl,
                "max_excess": r.max_excess,
                "invariant_holds": r.invariant_holds(),
                "trace": r.trace,
            }));
        }
        Subcommand::RateProbe => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let prior = cfg.prior(&grid)?;
            let kappa = cfg.kappa()?;
            let c = m.exponent.c;
            let h_list = cfg.list("h_list")?.unwrap_or_else(|| vec![2.0 * c, c, c / 2.0, c / 4.0]);
            let probes = rate_function_probe(&m, &prior, &h_list, &grid, kappa, cfg.usize("steps", 500)?)?;
            out.kappa = Some(kappa);
            out.grid_hash = Some(grid.hash());
            for p in &probes {
                out.report.push(format!("h {:.4} sup {:.8} scaled {:.8}", p.h, p.sup, p.scaled));
                for cell in &p.cells {
                    out.records.push(json!({ "h": cell.h, "eps": cell.eps, "phi": cell.phi, "record": "cell" }));
                }
                out.records.push(json!({ "h": p.h, "sup": p.sup, "scaled": p.scaled, "best_eps": p.best_eps, "record": "summary",
                    "note": "the 10% threshold at h = c/4 is a chosen acceptance level; no convergence rate is known" }));
            }
            if let Some(size) = cfg.get("family_size").map(|_| cfg.usize("family_size", 0)).transpose()? {
                let est = i_function_estimate(&m, &prior, size, &grid, kappa)?;
                out.report.push(format!("I estimate {:.8} of {:.8}", est.value, est.rhs));
                let mut v = to_value(&est);
                v["record"] = json!("rate_function");
                out.records.push(v);
            }
        }
        Subcommand::Blyth | Subcommand::LowerBound => {
            let m = cfg.model()?;
            let grid = cfg.grid(&m.exponent)?;
            let kappa = cfg.kappa()?;
            let default_n = if cmd == Subcommand::Blyth { vec![1.0, 10.0, 100.0, 1000.0] } else { vec![1.0, 10.0, 100.0] };
            let n_list: Vec<u64> = cfg.list("n_list")?.unwrap_or(default_n).iter().map(|&n| n as u64).collect();
            let steps = blyth_sequence(&m, &default_eta(&grid), &n_list, kappa)?;
            out.kappa = Some(kappa);
            out.grid_hash = Some(grid.hash());
            if cmd == Subcommand::Blyth {
                let energies: Vec<f64> = steps.iter().map(|s| s.energy).collect();
                let (first, last) = (energies[0], energies[energies.len() - 1]);
                let monotone = energies.windows(2).all(|w| w[1] <= w[0]);
                out.passed = match expect {
                    Some(Expect::Decay) => monotone && last <= first / 10.0,
                    Some(Expect::Bounded) => energies.iter().all(|&e| e > first / 10.0),
                    _ => true,
                };
                for s in &steps {
                    out.report.push(format!("n {} energy {:.8e}", s.n, s.energy));
                    out.records.push(json!({
                        "n": s.n, "alpha": s.alpha, "energy": s.energy, "residual": s.residual, "iterations": s.iterations,
                        "solver": "preconditioned conjugate gradient",
                    }));
                }
            } else {
                let t_max = cfg.f64("t_max", DEFAULT_T_MAX)?;
                let nodes = cfg.usize("nodes", DEFAULT_TIME_NODES)?;
                for s in &steps {
                    let lb = transient_lower_bound(&m, &prior_from_root(&s.root)?, &grid, kappa, t_max, nodes)?;
                    out.passed &= lb.holds();
                    out.report.push(format!("n {} bound {:.8e} energy {:.8e}", s.n, lb.bound, lb.energy));
                    let mut v = to_value(&lb);
                    v["n"] = json!(s.n);
                    out.records.push(v);
                }
            }
        }
        Subcommand::Simulate => {
            let e = cfg.exponent()?;
            let seed = cfg.u64("seed", 0)?;
            let stats = return_statistics(
                &e,
                cfg.f64("horizon", 1e4)?,
                cfg.f64("step", 1.0)?,
                cfg.f64("radius", 1.0)?,
                cfg.usize("paths", 200)?,
                seed,
            )?;
            let t = cfg.f64("t", 1.0)?;
            let samples = sample_increments(&e, t, cfg.usize("samples", 10_000)?, seed)?;
            let ks_grid = GridSpec::new(1, 1 << 16, 400.0)?;
            let ks = ks_against_density(&samples, &e, t, &ks_grid)?;
            let all_positive = stats.decades.iter().all(|d| d.mean > 0.0);
            out.passed = match expect {
                Some(Expect::Recurrent) => all_positive,
                Some(Expect::Transient) => stats.final_share() < 0.1,
                _ => true,
            };
            for d in &stats.decades {
                out.report.push(format!("({:.0}, {:.0}] {:.4} ± {:.4}", d.start, d.end, d.mean, d.std_error));
                let mut v = to_value(d);
                v["record"] = json!("decade");
                out.records.push(v);
            }
            out.records.push(json!({
                "record": "summary", "model": e.label(), "total": stats.total(), "final_share": stats.final_share(), "ks": ks,
            }));
            out.report.push(format!("final share {:.4} KS {:.4}", stats.final_share(), ks));
            out.records.push(json!({ "record": "occupation", "per_path": stats.per_path }));
        }
        Subcommand::BgxBridge => {
            let (v, tau2, d) = (cfg.f64("v", 1.0)?, cfg.f64("tau2", 1.0)?, cfg.dim()?);
            let value = bgx_bridge(v, tau2, d);
            out.report.push(format!("{value:.15}"));
            out.records.push(json!({ "v": v, "tau2": tau2, "dim": d, "value": value }));
        }
        Subcommand::Calibrate => {
            let grid = GridSpec::new(1, cfg.usize("grid_n", 4096)?, cfg.f64("extent", 40.0)?)?;
            let cal = calibrate_normalization(cfg.f64("v", 1.0)?, cfg.f64("tau2", 1.0)?, &grid)?;
            out.kappa = Some(cal.kappa);
            out.grid_hash = Some(grid.hash());
            out.report.push(format!("kappa {:.15}", cal.kappa));
            out.records.push(to_value(&cal));
        }
    }
    Ok(out)
}

/// Optional config path and `--key value` pairs.
pub type ParsedArgs = (Option<PathBuf>, Vec<(String, String)>);

/// Splits `--key value` pairs; `--config PATH` is returned separately.
pub fn parse_overrides(args: &[String]) -> Result<ParsedArgs> {
    let mut config = None;
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(Error::Config(format!("unexpected argument `{a}`; use --key value")));
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| Error::Config(format!("flag `--{key}` needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        if key == "config" {
            config = Some(PathBuf::from(value));
        } else {
            pairs.push((key, value));
        }
    }
    Ok((config, pairs))
}

fn scalar_columns(records: &[Value]) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        if let Value::Object(m) = r {
            for (k, v) in m {
                if !(v.is_array() || v.is_object()) && !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
    }
    cols
}

fn csv_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) if s.contains(',') || s.contains('"') => format!("\"{}\"", s.replace('"', "\"\"")),
        Some(Value::String(s)) => s.clone(),
        Some(v) => v.to_string(),
    }
}

/// Writes `results.jsonl` and `summary.csv`, each record carrying the
/// config hash, seed and κ.
pub fn write_results(dir: &Path, cmd: Subcommand, cfg: &Config, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let hash = cfg.hash();
    let seed = cfg.u64("seed", 0)?;
    let records: Vec<Value> = outcome
        .records
        .iter()
        .map(|r| {
            let mut m = match r {
                Value::Object(m) => m.clone(),
                other => Map::from_iter([("value".to_string(), other.clone())]),
            };
            m.insert("subcommand".into(), json!(cmd.name()));
            m.insert("config_hash".into(), json!(hash));
            m.insert("seed".into(), json!(seed));
            m.insert("kappa".into(), json!(outcome.kappa));
            Value::Object(m)
        })
        .collect();
    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(dir.join("results.jsonl"))?);
    for r in &records {
        writeln!(jsonl, "{}", serde_json::to_string(r)?)?;
    }
    jsonl.flush()?;
    let cols = scalar_columns(&records);
    let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("summary.csv"))?);
    writeln!(csv, "{}", cols.join(","))?;
    for r in &records {
        let row: Vec<String> = cols.iter().map(|c| csv_cell(r.get(c))).collect();
        writeln!(csv, "{}", row.join(","))?;
    }
    csv.flush()?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

/// Full driver: loads the configuration, runs the experiment, writes the
/// outputs and the manifest, and returns the process exit code.
pub fn run(cmd: Subcommand, args: &[String]) -> i32 {
    let start = Instant::now();
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let cfg = match parse_overrides(args).and_then(|(path, pairs)| Config::load(path.as_deref(), &pairs)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let dir = PathBuf::from(cfg.string("out").ok().flatten().unwrap_or_else(|| "out".into()));
    let result = execute(cmd, &cfg);
    let (code, outcome, message) = match result {
        Ok(o) => {
            for line in &o.report {
                println!("{line}");
            }
            (if o.passed { EXIT_OK } else { EXIT_TOLERANCE }, o, None)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code(&e), Outcome::default(), Some(e.to_string()))
        }
    };
    if code == EXIT_CONFIG {
        return code;
    }
    if let Err(e) = write_results(&dir, cmd, &cfg, &outcome) {
        eprintln!("error: writing results: {e}");
        return EXIT_NUMERIC;
    }
    let manifest = json!({
        "subcommand": cmd.name(),
        "config": cfg.values(),
        "config_hash": cfg.hash(),
        "seed": cfg.u64("seed", 0).unwrap_or(0),
        "kappa": outcome.kappa,
        "grid_hash": outcome.grid_hash,
        "exit_code": code,
        "error": message,
        "started_unix": started,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|s| std::fs::write(dir.join("manifest.json"), s).map_err(Error::from));
    if let Err(e) = written {
        eprintln!("error: writing manifest: {e}");
        return EXIT_NUMERIC;
    }
    code
}
