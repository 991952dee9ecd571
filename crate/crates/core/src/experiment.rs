//! Config-driven experiment runner behind the `anderson-lab` binary.
//!
//! Every command reads an optional JSON config of the form
//!
//! ```json
//! { "distribution": { "kind": "bernoulli", "p": 0.5, "v0": 0.0, "v1": 1.0 },
//!   "seed": 7,
//!   "params": { ... } }
//! ```
//!
//! and writes CSV tables plus `manifest.json` into the output directory.
//! A written manifest is itself a valid config, so rerunning it reproduces
//! every output byte for byte, at any thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fit::{fit_line, median};
use crate::green::{classify, green_abs, green_direct, singularity_implies_deviation, Verdict};
use crate::interp::{chebyshev_like_nodes, lebesgue_constant, sine_product_sum, uniform_bound_scan, DEFAULT_THETA};
use crate::ldt::{eigenvalue_separation_check, fit_eta};
use crate::lyapunov::{
    craig_simon_scan, craig_simon_window, estimate_gamma_mc, estimate_gamma_trajectory, gamma_grid, linspace,
    GammaCurve, LyapunovEstimate, Method,
};
use crate::model::{sample_potential, spectrum_support, Distribution};
use crate::rng::{derive_seed, CounterStream};
use crate::spectrum::{
    decay_vs_lyapunov, eigensystem, localization_profile, n_growth_scan, sule_check, BoxOperator, Checker,
    EigenSystem, NGrowthConfig,
};
use crate::transfer::{det_prefixes, det_values, ScaledScalar};
use crate::tridiag::{gershgorin, sturm_count};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_COMMENT: &[u8] = b"# manifest: manifest.json\n";

// sub-streams of the master seed
const STREAM_SAMPLES: u64 = 1;
const STREAM_ETA: u64 = 2;
const STREAM_GAMMA_POINT: u64 = 3;
const STREAM_CRAIG_SIMON: u64 = 4;
const STREAM_WITNESS: u64 = 5;
const STREAM_EIGEN_BOXES: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Gamma,
    Ldt,
    GreenCheck,
    Localize,
    Sule,
    Dynamics,
    InterpCheck,
    UniformCs,
    NGrowth,
    Separation,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Gamma,
        Command::Ldt,
        Command::GreenCheck,
        Command::Localize,
        Command::Sule,
        Command::Dynamics,
        Command::InterpCheck,
        Command::UniformCs,
        Command::NGrowth,
        Command::Separation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Gamma => "gamma",
            Command::Ldt => "ldt",
            Command::GreenCheck => "green-check",
            Command::Localize => "localize",
            Command::Sule => "sule",
            Command::Dynamics => "dynamics",
            Command::InterpCheck => "interp-check",
            Command::UniformCs => "uniform-cs",
            Command::NGrowth => "n-growth",
            Command::Separation => "separation",
        }
    }

    fn needs_distribution(self) -> bool {
        self != Command::InterpCheck
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command {s:?}")))
    }
}

/// Where the config comes from.
#[derive(Debug, Clone, Default)]
pub enum ConfigSource {
    /// All defaults; only valid for commands that need no distribution.
    #[default]
    Defaults,
    File(PathBuf),
    Inline(String),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub config: ConfigSource,
    pub out: PathBuf,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Size of the worker pool; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Overrides `params.q_max` of `interp-check`.
    pub q_max: Option<u64>,
}

impl RunOptions {
    pub fn new(command: Command, config: ConfigSource, out: impl Into<PathBuf>) -> Self {
        Self {
            command,
            config,
            out: out.into(),
            seed: None,
            threads: None,
            q_max: None,
        }
    }
}

/// One threshold test. Checks tied to an acceptance criterion decide the
/// `--assert` exit status; the others are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u8>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: String,
    pub version: String,
    pub distribution: Option<Distribution>,
    pub seed: u64,
    pub params: serde_json::Value,
    /// Estimated quantities the run depended on (ν̂, ε0, δ0, η̂, ...).
    pub derived: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    /// File name to SHA-256 hex digest.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub manifest: ExperimentManifest,
}

impl Outcome {
    pub fn checks(&self) -> &[Check] {
        &self.manifest.checks
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.manifest.checks.iter().find(|c| c.name == name)
    }

    /// True when every criterion-bound check passed.
    pub fn assertions_pass(&self) -> bool {
        self.manifest.checks.iter().filter(|c| c.criterion.is_some()).all(|c| c.passed)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "P: DeserializeOwned + Default"))]
struct Config<P> {
    #[serde(default)]
    command: Option<String>,
    // manifest fields, accepted so that a manifest can be rerun as a config
    #[serde(default)]
    #[allow(dead_code)]
    version: Option<serde_json::Value>,
    #[serde(default)]
    #[allow(dead_code)]
    derived: Option<serde_json::Value>,
    #[serde(default)]
    #[allow(dead_code)]
    checks: Option<serde_json::Value>,
    #[serde(default)]
    #[allow(dead_code)]
    outputs: Option<serde_json::Value>,
    #[serde(default)]
    distribution: Option<Distribution>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    params: P,
}

// ---------------------------------------------------------------------------
// output plumbing

trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:.16e}")
    }
}

impl Cell for Option<f64> {
    fn cell(&self) -> String {
        self.map(|x| x.cell()).unwrap_or_default()
    }
}

impl Cell for Option<usize> {
    fn cell(&self) -> String {
        self.map(|x| x.to_string()).unwrap_or_default()
    }
}

macro_rules! plain_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_cell!(usize, u64, i64, bool, &str, String);

macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$(Cell::cell(&$x)),*] };
}

struct Ctx<'a> {
    dist: Option<&'a Distribution>,
    seed: u64,
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
    derived: BTreeMap<String, f64>,
    checks: Vec<Check>,
}

impl Ctx<'_> {
    fn dist(&self) -> &Distribution {
        self.dist.expect("distribution presence is checked before dispatch")
    }

    fn stream(&self, tag: u64) -> u64 {
        derive_seed(self.seed, tag)
    }

    fn derive(&mut self, key: &str, value: f64) {
        self.derived.insert(key.to_string(), value);
    }

    fn check(&mut self, name: &str, criterion: Option<u8>, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.to_string(),
            criterion,
            passed,
            detail,
        });
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.outputs.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    fn write_csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        wtr.write_record(header)?;
        for r in &rows {
            wtr.write_record(r)?;
        }
        let mut bytes = wtr.into_inner().map_err(|e| Error::io(self.dir.join(name), e.into_error()))?;
        bytes.extend_from_slice(MANIFEST_COMMENT);
        self.write_bytes(name, &bytes)
    }

    fn write_curve(&mut self, name: &str, curve: &GammaCurve) -> Result<()> {
        let rows = curve.estimates().iter().map(estimate_row).collect();
        self.write_csv(name, &["energy", "gamma_hat", "stderr", "n", "m"], rows)
    }
}

fn estimate_row(e: &LyapunovEstimate) -> Vec<String> {
    row![e.energy, e.gamma_hat, e.stderr, e.n, e.m]
}

fn read_config(source: &ConfigSource) -> Result<(String, String)> {
    match source {
        ConfigSource::Defaults => Ok(("<defaults>".into(), "{}".into())),
        ConfigSource::Inline(text) => Ok(("<inline>".into(), text.clone())),
        ConfigSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok((path.display().to_string(), text))
        }
    }
}

/// Runs one command end to end: parse, execute, write tables and manifest.
pub fn run(opts: &RunOptions) -> Result<Outcome> {
    match opts.command {
        Command::Gamma => execute(opts, gamma),
        Command::Ldt => execute(opts, ldt),
        Command::GreenCheck => execute(opts, green_check),
        Command::Localize => execute(opts, localize),
        Command::Sule => execute(opts, sule),
        Command::Dynamics => execute(opts, dynamics),
        Command::InterpCheck => execute(opts, |ctx, p: &mut InterpParams| {
            if let Some(q) = opts.q_max {
                p.q_max = q;
            }
            interp_check(ctx, p)
        }),
        Command::UniformCs => execute(opts, uniform_cs),
        Command::NGrowth => execute(opts, n_growth),
        Command::Separation => execute(opts, separation),
    }
}

fn execute<P, F>(opts: &RunOptions, body: F) -> Result<Outcome>
where
    P: DeserializeOwned + Serialize + Default + Send,
    F: FnOnce(&mut Ctx, &mut P) -> Result<()> + Send,
{
    let (origin, text) = read_config(&opts.config)?;
    let cfg: Config<P> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    if let Some(name) = &cfg.command {
        if name != opts.command.name() {
            return Err(Error::Config(format!(
                "{origin}: config is for command {name:?}, not {:?}",
                opts.command.name()
            )));
        }
    }
    if opts.command.needs_distribution() && cfg.distribution.is_none() {
        return Err(Error::Config(format!("{origin}: missing field `distribution`")));
    }
    if let Some(d) = &cfg.distribution {
        d.validate()
            .map_err(|e| Error::Config(format!("{origin}: field `distribution`: {e}")))?;
    }
    if opts.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    std::fs::create_dir_all(&opts.out).map_err(|e| Error::io(&opts.out, e))?;

    let mut params = cfg.params;
    let mut ctx = Ctx {
        dist: cfg.distribution.as_ref(),
        seed: opts.seed.unwrap_or(cfg.seed),
        dir: opts.out.clone(),
        outputs: BTreeMap::new(),
        derived: BTreeMap::new(),
        checks: Vec::new(),
    };
    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(|| body(&mut ctx, &mut params))?,
        None => body(&mut ctx, &mut params)?,
    }

    let manifest = ExperimentManifest {
        command: opts.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        distribution: cfg.distribution.clone(),
        seed: ctx.seed,
        params: serde_json::to_value(&params)?,
        derived: ctx.derived,
        checks: ctx.checks,
        outputs: ctx.outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    let path = opts.out.join(MANIFEST_FILE);
    std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
    Ok(Outcome {
        out_dir: opts.out.clone(),
        manifest,
    })
}

/// Reads a manifest written by [`run`].
pub fn read_manifest(dir: &Path) -> Result<ExperimentManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// shared parameter blocks

/// Monte Carlo γ̂ grid used as the reference curve by most commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceCurve {
    /// Defaults to the bottom of the almost-sure spectrum.
    pub lo: Option<f64>,
    /// Defaults to the top of the almost-sure spectrum.
    pub hi: Option<f64>,
    pub points: usize,
    pub n: usize,
    pub m: usize,
}

impl Default for ReferenceCurve {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            points: 25,
            n: 2000,
            m: 200,
        }
    }
}

impl ReferenceCurve {
    fn grid(&self, dist: &Distribution) -> Result<Vec<f64>> {
        let (lo, hi) = spectrum_support(dist)?.hull();
        Ok(linspace(self.lo.unwrap_or(lo), self.hi.unwrap_or(hi), self.points))
    }

    /// Built from the master seed, so it equals the `gamma` command's curve
    /// for the same grid and seed.
    fn build(&self, ctx: &mut Ctx) -> Result<GammaCurve> {
        let curve = gamma_grid(ctx.dist(), &self.grid(ctx.dist())?, self.n, self.m, ctx.seed)?;
        ctx.derive("nu_hat", curve.nu_hat());
        ctx.write_curve("reference_gamma.csv", &curve)?;
        Ok(curve)
    }
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "fails"
    }
}

// ---------------------------------------------------------------------------
// gamma

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaParams {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: usize,
    /// Explicit ascending grid; overrides `lo`, `hi` and `points`.
    pub energies: Option<Vec<f64>>,
    pub n: usize,
    pub m: usize,
    pub method: Method,
}

impl Default for GammaParams {
    fn default() -> Self {
        Self {
            lo: None,
            hi: None,
            points: 25,
            energies: None,
            n: 2000,
            m: 200,
            method: Method::Mc,
        }
    }
}

fn gamma(ctx: &mut Ctx, p: &mut GammaParams) -> Result<()> {
    let dist = ctx.dist().clone();
    let grid = match &p.energies {
        Some(e) => e.clone(),
        None => {
            let (lo, hi) = spectrum_support(&dist)?.hull();
            linspace(p.lo.unwrap_or(lo), p.hi.unwrap_or(hi), p.points)
        }
    };
    let curve = match p.method {
        Method::Mc => gamma_grid(&dist, &grid, p.n, p.m, ctx.seed)?,
        Method::Trajectory => {
            let estimates = grid
                .par_iter()
                .enumerate()
                .map(|(i, &e)| estimate_gamma_trajectory(&dist, e, p.n, derive_seed(ctx.seed, i as u64)))
                .collect::<Result<Vec<_>>>()?;
            GammaCurve::from_estimates(estimates)?
        }
    };
    ctx.write_curve("gamma.csv", &curve)?;
    let lower = curve
        .estimates()
        .iter()
        .map(|e| e.gamma_hat - 3.0 * e.stderr)
        .fold(f64::INFINITY, f64::min);
    ctx.derive("nu_hat", curve.nu_hat());
    ctx.derive("max_gamma", curve.max_gamma());
    ctx.derive("min_lower_3se", lower);
    ctx.check(
        "lyapunov-positivity",
        Some(1),
        lower > 0.0,
        format!("min(gamma_hat - 3 stderr) = {lower:.6e} over {} energies", grid.len()),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ldt

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdtParams {
    pub energy: f64,
    /// `eps = eps_factor · γ̂(E)` unless `eps` is given.
    pub eps_factor: f64,
    pub eps: Option<f64>,
    pub n_list: Vec<usize>,
    pub m: usize,
    /// Length of the windows behind the reference `γ̂(E)`.
    pub gamma_n: usize,
    /// Sample count behind `γ̂(E)`; defaults to `10 m`.
    pub gamma_m: Option<usize>,
}

impl Default for LdtParams {
    fn default() -> Self {
        Self {
            energy: 0.5,
            eps_factor: 0.25,
            eps: None,
            n_list: vec![25, 50, 100, 150, 200],
            m: 20_000,
            gamma_n: 2000,
            gamma_m: None,
        }
    }
}

fn ldt(ctx: &mut Ctx, p: &mut LdtParams) -> Result<()> {
    let dist = ctx.dist().clone();
    let gamma_m = *p.gamma_m.get_or_insert(10 * p.m);
    let g = estimate_gamma_mc(&dist, p.energy, p.gamma_n, gamma_m, ctx.stream(STREAM_GAMMA_POINT))?;
    let eps = p.eps.unwrap_or(p.eps_factor * g.gamma_hat);
    ctx.derive("gamma_hat", g.gamma_hat);
    ctx.derive("gamma_stderr", g.stderr);
    ctx.derive("eps", eps);
    let (fit, stats) = fit_eta(&dist, p.energy, eps, &p.n_list, p.m, g.gamma_hat, ctx.stream(STREAM_SAMPLES))?;
    let rows = stats
        .iter()
        .map(|s| {
            row![
                s.energy,
                s.eps,
                s.n,
                s.m,
                s.count_minus,
                s.count_plus,
                s.p_hat_minus,
                s.p_hat_plus,
                s.p_hat_total(),
                s.ci95
            ]
        })
        .collect();
    ctx.write_csv(
        "ldt.csv",
        &[
            "energy",
            "eps",
            "n",
            "m",
            "count_minus",
            "count_plus",
            "p_hat_minus",
            "p_hat_plus",
            "p_hat_total",
            "ci95",
        ],
        rows,
    )?;
    let excluded = fit.excluded.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    ctx.write_csv(
        "eta.csv",
        &["eps", "eta_hat", "intercept", "r2", "points", "excluded"],
        vec![row![fit.eps, fit.eta_hat, fit.intercept, fit.r2, fit.n_list.len() - fit.excluded.len(), excluded]],
    )?;
    ctx.derive("eta_hat", fit.eta_hat);
    ctx.derive("eta_r2", fit.r2);
    ctx.check(
        "ldt-decay",
        Some(2),
        fit.eta_hat > 0.0 && fit.r2 >= 0.95,
        format!("eta_hat = {:.6e}, r2 = {:.4}", fit.eta_hat, fit.r2),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// green-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenParams {
    pub instances: usize,
    pub max_size: usize,
    /// Minimum distance of the test energy from every box eigenvalue.
    pub min_gap: f64,
    /// Number of singular boxes fed to the deviation-set witness.
    pub witnesses: usize,
    pub witness_n_min: usize,
    pub witness_n_max: usize,
    /// `ε0 = eps0_factor · ν̂`.
    pub eps0_factor: f64,
    pub reference: ReferenceCurve,
}

impl Default for GreenParams {
    fn default() -> Self {
        Self {
            instances: 100,
            max_size: 300,
            min_gap: 1e-6,
            witnesses: 1000,
            witness_n_min: 10,
            witness_n_max: 100,
            eps0_factor: 0.1,
            reference: ReferenceCurve::default(),
        }
    }
}

struct OracleRow {
    size: usize,
    energy: f64,
    x: i64,
    y: i64,
    log_ratio: f64,
    log_direct: f64,
    gap: f64,
}

const ENERGY_REDRAWS: usize = 1000;

fn oracle_instance(dist: &Distribution, key: u64, max_size: usize, min_gap: f64) -> Result<OracleRow> {
    let mut s = CounterStream::new(key);
    let size = s.next_range(1, max_size as i64) as usize;
    let w = sample_potential(dist, 0, size as i64 - 1, derive_seed(key, 1))?;
    let (lo, hi) = gershgorin(w.values());
    let mut energy = None;
    for _ in 0..ENERGY_REDRAWS {
        let e = lo + (hi - lo) * s.next_f64();
        if sturm_count(w.values(), e + min_gap) == sturm_count(w.values(), e - min_gap) {
            energy = Some(e);
            break;
        }
    }
    let energy = energy.ok_or_else(|| Error::InsufficientSignal("no energy clear of the box spectrum".into()))?;
    let x = s.next_range(0, size as i64 - 1);
    let y = s.next_range(0, size as i64 - 1);
    let b = size as i64 - 1;
    let log_ratio = green_abs(&w, 0, b, energy, x, y)?.ln_abs();
    let log_direct = green_direct(&w, 0, b, energy, x, y)?.abs().ln();
    Ok(OracleRow {
        size,
        energy,
        x,
        y,
        log_ratio,
        log_direct,
        gap: crate::transfer::log_gap(log_ratio, log_direct),
    })
}

const WITNESS_BATCH: usize = 2048;
const WITNESS_MAX_ATTEMPTS: usize = 1 << 22;

fn green_check(ctx: &mut Ctx, p: &mut GreenParams) -> Result<()> {
    let dist = ctx.dist().clone();
    if p.max_size == 0 || p.witness_n_min < 2 || p.witness_n_min > p.witness_n_max {
        return Err(Error::param("need max_size >= 1 and 2 <= witness_n_min <= witness_n_max"));
    }
    let base = ctx.stream(STREAM_SAMPLES);
    let oracle = (0..p.instances)
        .into_par_iter()
        .map(|i| oracle_instance(&dist, derive_seed(base, i as u64), p.max_size, p.min_gap))
        .collect::<Result<Vec<_>>>()?;
    let worst = oracle.iter().map(|r| r.gap).fold(0.0, f64::max);
    let rows = oracle
        .iter()
        .enumerate()
        .map(|(i, r)| row![i, r.size, r.energy, r.x, r.y, r.log_ratio, r.log_direct, r.gap])
        .collect();
    ctx.write_csv(
        "green_oracle.csv",
        &["instance", "size", "energy", "x", "y", "log_abs_ratio", "log_abs_direct", "gap"],
        rows,
    )?;
    ctx.derive("max_log_gap", worst);
    ctx.check(
        "green-oracle",
        Some(3),
        worst <= 1e-8,
        format!("max relative log gap {worst:.3e} over {} boxes", oracle.len()),
    );

    let curve = p.reference.build(ctx)?;
    let eps0 = p.eps0_factor * curve.nu_hat();
    ctx.derive("eps0", eps0);
    let (elo, ehi) = curve.hull();
    let wbase = ctx.stream(STREAM_WITNESS);
    let mut rows = Vec::new();
    let mut failures = 0usize;
    let mut attempts = 0usize;
    while rows.len() < p.witnesses {
        if attempts >= WITNESS_MAX_ATTEMPTS {
            return Err(Error::InsufficientSignal(format!(
                "only {} singular boxes in {attempts} attempts",
                rows.len()
            )));
        }
        let batch = (attempts..attempts + WITNESS_BATCH)
            .into_par_iter()
            .map(|a| -> Result<Option<Vec<String>>> {
                let key = derive_seed(wbase, a as u64);
                let mut s = CounterStream::new(key);
                let n = s.next_range(p.witness_n_min as i64, p.witness_n_max as i64);
                let w = sample_potential(&dist, -n, n, derive_seed(key, 1))?;
                let e = elo + (ehi - elo) * s.next_f64();
                let c = curve.gamma_at(e)? - 8.0 * eps0;
                let v = classify(&w, 0, n, c, e)?;
                if v.verdict == Verdict::Regular {
                    return Ok(None);
                }
                let wit = singularity_implies_deviation(&w, 0, n, e, eps0, &curve)?;
                Ok(Some(row![
                    v.x,
                    v.n,
                    v.c,
                    v.energy,
                    v.left_log,
                    v.right_log,
                    "singular",
                    v.resonant,
                    wit.minus_full,
                    wit.plus_left,
                    wit.plus_right,
                    wit.plus_left_inner,
                    wit.plus_right_inner,
                    wit.is_nonempty()
                ]))
            })
            .collect::<Result<Vec<_>>>()?;
        attempts += WITNESS_BATCH;
        for r in batch.into_iter().flatten() {
            if rows.len() == p.witnesses {
                break;
            }
            failures += usize::from(r[13] != "true");
            rows.push(r);
        }
    }
    let count = rows.len();
    ctx.write_csv(
        "witness.csv",
        &[
            "x",
            "n",
            "c",
            "E",
            "left_log",
            "right_log",
            "verdict",
            "resonant",
            "minus_full",
            "plus_left",
            "plus_right",
            "plus_left_inner",
            "plus_right_inner",
            "nonempty",
        ],
        rows,
    )?;
    ctx.check(
        "singularity-witness",
        Some(11),
        failures == 0,
        format!("{failures} empty witnesses among {count} singular boxes"),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// localize

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeParams {
    pub size: usize,
    pub seeds: usize,
    /// Small random boxes for the eigensolver self-checks.
    pub eigen_boxes: usize,
    pub eigen_max_dim: usize,
    /// Write the first box's eigenvectors as raw little-endian f64.
    pub dump_vectors: bool,
    pub reference: ReferenceCurve,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self {
            size: 1001,
            seeds: 20,
            eigen_boxes: 50,
            eigen_max_dim: 60,
            dump_vectors: false,
            reference: ReferenceCurve::default(),
        }
    }
}

/// Self-consistency of one eigensystem against determinants and Sturm counts.
pub struct EigenAudit {
    pub dim: usize,
    pub diameter: f64,
    pub max_residual: f64,
    pub orthogonality: f64,
    pub trace_defect: f64,
    pub sturm_mismatches: usize,
    pub product_gap: f64,
}

impl EigenAudit {
    pub fn passes(&self) -> bool {
        self.max_residual <= 1e-8 * self.diameter.max(f64::MIN_POSITIVE)
            && self.orthogonality <= 1e-9
            && self.trace_defect <= 1e-9 * self.dim as f64
            && self.sturm_mismatches == 0
            && self.product_gap <= 1e-6
    }
}

fn sign_changes(seq: &[ScaledScalar]) -> usize {
    let mut last = 0i8;
    let mut changes = 0;
    for s in seq.iter().filter(|s| !s.is_zero()) {
        if last != 0 && s.sign != last {
            changes += 1;
        }
        last = s.sign;
    }
    changes
}

/// Compares the eigensystem with `det(H - E)` at `probes` random energies.
pub fn eigen_audit(es: &EigenSystem, probes: usize, key: u64) -> EigenAudit {
    let diag = es.diagonal();
    let (lo, hi) = gershgorin(diag);
    let (lo, hi) = (lo - 1.0, hi + 1.0);
    let mut s = CounterStream::new(key);
    let mut sturm_mismatches = 0;
    let mut product_gap: f64 = 0.0;
    for _ in 0..probes {
        let e = lo + (hi - lo) * s.next_f64();
        let prefixes = det_prefixes(diag, e);
        sturm_mismatches += usize::from(sign_changes(&prefixes) != sturm_count(diag, e));
        let product = es
            .values()
            .iter()
            .fold(ScaledScalar::ONE, |acc, &ej| acc.mul(ScaledScalar::from_f64(ej - e)));
        product_gap = product_gap.max(product.log_gap(det_values(diag, e)));
    }
    EigenAudit {
        dim: es.dim(),
        diameter: es.diameter(),
        max_residual: es.max_residual(),
        orthogonality: es.orthogonality_defect(),
        trace_defect: es.trace_defect(),
        sturm_mismatches,
        product_gap,
    }
}

const AUDIT_PROBES: usize = 8;

fn localize(ctx: &mut Ctx, p: &mut LocalizeParams) -> Result<()> {
    let dist = ctx.dist().clone();
    if p.size < 3 || p.seeds == 0 || p.eigen_max_dim == 0 {
        return Err(Error::param("localize needs size >= 3, seeds >= 1, eigen_max_dim >= 1"));
    }

    let ebase = ctx.stream(STREAM_EIGEN_BOXES);
    let audits = (0..p.eigen_boxes)
        .into_par_iter()
        .map(|b| -> Result<EigenAudit> {
            let key = derive_seed(ebase, b as u64);
            let dim = CounterStream::new(key).next_range(1, p.eigen_max_dim as i64);
            let w = sample_potential(&dist, 0, dim - 1, derive_seed(key, 1))?;
            let es = eigensystem(&BoxOperator::from_window(&w, 0, dim - 1)?);
            Ok(eigen_audit(&es, AUDIT_PROBES, derive_seed(key, 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    let bad = audits.iter().filter(|a| !a.passes()).count();
    let rows = audits
        .iter()
        .enumerate()
        .map(|(i, a)| {
            row![
                i,
                a.dim,
                a.diameter,
                a.max_residual,
                a.orthogonality,
                a.trace_defect,
                a.sturm_mismatches,
                a.product_gap,
                a.passes()
            ]
        })
        .collect();
    ctx.write_csv(
        "eigen_checks.csv",
        &[
            "box",
            "dim",
            "diameter",
            "max_residual",
            "orthogonality",
            "trace_defect",
            "sturm_mismatches",
            "product_gap",
            "passed",
        ],
        rows,
    )?;
    ctx.check(
        "eigensolver",
        Some(5),
        bad == 0,
        format!("{bad} of {} random boxes fail the eigensolver audit", audits.len()),
    );

    let curve = p.reference.build(ctx)?;
    let base = ctx.stream(STREAM_SAMPLES);
    let b = p.size as i64 - 1;
    let mut profile_rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..p.seeds {
        let w = sample_potential(&dist, 0, b, derive_seed(base, k as u64))?;
        let es = eigensystem(&BoxOperator::from_window(&w, 0, b)?);
        summary_rows.push(row![
            k,
            es.dim(),
            es.max_residual(),
            es.orthogonality_defect(),
            es.trace_defect()
        ]);
        if k == 0 && p.dump_vectors {
            dump_vectors(ctx, &es)?;
        }
        let (j0, j1) = (es.dim() / 3, 2 * es.dim() / 3);
        let profiles = (j0..j1)
            .into_par_iter()
            .map(|j| localization_profile(&es, j))
            .collect::<Result<Vec<_>>>()?;
        for prof in &profiles {
            let ratio = match prof.alpha_hat {
                Some(_) => Some(decay_vs_lyapunov(prof, &curve)?),
                None => None,
            };
            if let Some(r) = ratio.as_ref().filter(|r| !r.boundary) {
                ratios.push(r.ratio);
            }
            profile_rows.push(row![
                k,
                prof.j,
                prof.energy,
                prof.center,
                prof.alpha_hat,
                prof.fit_r2,
                ratio.as_ref().map(|r| r.gamma_hat),
                ratio.as_ref().map(|r| r.ratio),
                ratio.as_ref().is_some_and(|r| r.boundary)
            ]);
        }
    }
    ctx.write_csv(
        "eigen_summary.csv",
        &["seed", "dim", "max_residual", "orthogonality", "trace_defect"],
        summary_rows,
    )?;
    ctx.write_csv(
        "profiles.csv",
        &["seed", "j", "energy", "center", "alpha_hat", "fit_r2", "gamma_hat", "ratio", "boundary"],
        profile_rows,
    )?;
    let med = median(&ratios).unwrap_or(f64::NAN);
    ctx.derive("median_ratio", med);
    ctx.check(
        "decay-matches-lyapunov",
        Some(6),
        (0.7..=1.3).contains(&med),
        format!("median alpha/gamma = {med:.4} over {} eigenpairs", ratios.len()),
    );
    Ok(())
}

#[derive(Serialize)]
struct VectorDump {
    file: &'static str,
    dtype: &'static str,
    order: &'static str,
    shape: [usize; 2],
    first_site: i64,
    rows: &'static str,
}

fn dump_vectors(ctx: &mut Ctx, es: &EigenSystem) -> Result<()> {
    ctx.write_bytes("eigenvectors.bin", &es.vectors_le_bytes())?;
    let sidecar = VectorDump {
        file: "eigenvectors.bin",
        dtype: "float64-le",
        order: "row-major",
        shape: [es.dim(), es.dim()],
        first_site: es.start(),
        rows: "eigenvectors in ascending eigenvalue order, see eigenvalues.csv",
    };
    let mut bytes = serde_json::to_vec_pretty(&sidecar)?;
    bytes.push(b'\n');
    ctx.write_bytes("eigenvectors.json", &bytes)?;
    let rows = es.values().iter().enumerate().map(|(j, &e)| row![j, e]).collect();
    ctx.write_csv("eigenvalues.csv", &["j", "energy"], rows)
}

// ---------------------------------------------------------------------------
// sule

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuleParams {
    pub size: usize,
    pub seeds: usize,
    /// `α = alpha_factor · ν̂` unless `alpha` is given.
    pub alpha_factor: f64,
    pub alpha: Option<f64>,
    pub eps: f64,
    pub reference: ReferenceCurve,
}

impl Default for SuleParams {
    fn default() -> Self {
        Self {
            size: 1001,
            seeds: 10,
            alpha_factor: 0.5,
            alpha: None,
            eps: 0.1,
            reference: ReferenceCurve::default(),
        }
    }
}

fn sule(ctx: &mut Ctx, p: &mut SuleParams) -> Result<()> {
    let dist = ctx.dist().clone();
    if p.size == 0 || p.seeds == 0 {
        return Err(Error::param("sule needs size >= 1 and seeds >= 1"));
    }
    let curve = p.reference.build(ctx)?;
    let alpha = p.alpha.unwrap_or(p.alpha_factor * curve.nu_hat());
    ctx.derive("alpha", alpha);
    let base = ctx.stream(STREAM_SAMPLES);
    let b = p.size as i64 - 1;
    let mut rows = Vec::new();
    let mut logs = Vec::new();
    for k in 0..p.seeds {
        let w = sample_potential(&dist, 0, b, derive_seed(base, k as u64))?;
        let es = eigensystem(&BoxOperator::from_window(&w, 0, b)?);
        let report = sule_check(&es, alpha, p.eps)?;
        if k == 0 {
            let detail = report
                .rows
                .iter()
                .map(|r| row![r.j, r.energy, r.center, r.center_rel, r.log_c])
                .collect();
            ctx.write_csv("sule_rows.csv", &["j", "energy", "center", "center_rel", "log_c"], detail)?;
        }
        logs.push(report.log_max_c);
        rows.push(row![k, alpha, p.eps, report.max_c, report.log_max_c]);
    }
    ctx.write_csv("sule.csv", &["seed", "alpha", "eps", "max_c", "log_max_c"], rows)?;
    let med = median(&logs).unwrap_or(f64::NAN);
    // C within [0.5, 1.5] times the median
    let stable = logs.iter().all(|l| l.is_finite() && *l - med <= 1.5f64.ln() && med - *l <= 2f64.ln());
    ctx.derive("median_log_max_c", med);
    ctx.check(
        "sule-stability",
        None,
        stable,
        format!("log max C median {med:.4}, stability {}", pass_fail(stable)),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// dynamics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsParams {
    pub size: usize,
    pub seeds: usize,
    /// Defaults to the box center.
    pub y0: Option<i64>,
    /// Defaults to the largest radius inside the box.
    pub radius: Option<i64>,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            size: 1001,
            seeds: 10,
            y0: None,
            radius: None,
        }
    }
}

fn dynamics(ctx: &mut Ctx, p: &mut DynamicsParams) -> Result<()> {
    use crate::dynamics::{correlator_sweep, dynamical_decay_fit, probe_times, unitarity_defect};
    let dist = ctx.dist().clone();
    if p.size < 2 || p.seeds == 0 {
        return Err(Error::param("dynamics needs size >= 2 and seeds >= 1"));
    }
    let b = p.size as i64 - 1;
    let y0 = *p.y0.get_or_insert(b / 2);
    let radius = *p.radius.get_or_insert(y0.min(b - y0));
    let base = ctx.stream(STREAM_SAMPLES);
    let xs: Vec<i64> = (y0 - radius..=y0 + radius).collect();
    let mut fit_rows = Vec::new();
    let mut corr_rows = Vec::new();
    let (mut fits_ok, mut bound_ok, mut unitary_ok) = (true, true, true);
    let mut worst_unitarity: f64 = 0.0;
    let (mut dyn_alphas, mut eig_alphas, mut mid_alphas) = (Vec::new(), Vec::new(), Vec::new());
    for k in 0..p.seeds {
        let w = sample_potential(&dist, 0, b, derive_seed(base, k as u64))?;
        let es = eigensystem(&BoxOperator::from_window(&w, 0, b)?);
        let (fit, _) = dynamical_decay_fit(&es, y0, radius)?;
        let sweep = correlator_sweep(&es, y0, &xs)?;
        let excess = sweep.iter().map(|c| c.grid_max - c.q).fold(f64::NEG_INFINITY, f64::max);
        let unitarity = unitarity_defect(&es, y0, &probe_times(&es))?;
        worst_unitarity = worst_unitarity.max(unitarity);
        fits_ok &= fit.alpha_dyn > 0.0 && fit.r2 >= 0.8;
        dyn_alphas.push(fit.alpha_dyn);
        let profiles = (0..es.dim())
            .into_par_iter()
            .map(|j| localization_profile(&es, j))
            .collect::<Result<Vec<_>>>()?;
        eig_alphas.extend(profiles.iter().filter_map(|prof| prof.alpha_hat));
        mid_alphas.extend(profiles[es.dim() / 3..2 * es.dim() / 3].iter().filter_map(|prof| prof.alpha_hat));
        bound_ok &= excess <= 1e-12;
        unitary_ok &= unitarity <= 1e-8;
        corr_rows.extend(sweep.iter().map(|c| row![k, c.x, c.y, c.q, c.grid_max]));
        fit_rows.push(row![
            k,
            fit.y0,
            fit.radius,
            fit.alpha_dyn,
            fit.c_dyn,
            fit.r2,
            fit.points,
            excess,
            unitarity
        ]);
    }
    ctx.write_csv("correlator.csv", &["seed", "x", "y", "q", "grid_max"], corr_rows)?;
    ctx.write_csv(
        "dynamics.csv",
        &[
            "seed",
            "y0",
            "radius",
            "alpha_dyn",
            "c_dyn",
            "r2",
            "points",
            "max_grid_excess",
            "unitarity_defect",
        ],
        fit_rows,
    )?;
    ctx.derive("max_unitarity_defect", worst_unitarity);
    let med_dyn = median(&dyn_alphas).unwrap_or(f64::NAN);
    let med_eig = median(&eig_alphas).unwrap_or(f64::NAN);
    ctx.derive("median_alpha_dyn", med_dyn);
    ctx.derive("median_alpha_eigen", med_eig);
    ctx.derive("median_alpha_eigen_middle_third", median(&mid_alphas).unwrap_or(f64::NAN));
    let ratio = med_dyn / med_eig;
    ctx.check(
        "dynamical-vs-eigen-decay",
        None,
        (0.5..=2.0).contains(&ratio),
        format!("median alpha_dyn {med_dyn:.4e} vs median eigenfunction alpha {med_eig:.4e}"),
    );
    let ok = fits_ok && bound_ok && unitary_ok;
    ctx.check(
        "dynamical-localization",
        Some(10),
        ok,
        format!(
            "decay fits {}, correlator bound {}, unitarity {} (worst {worst_unitarity:.2e})",
            pass_fail(fits_ok),
            pass_fail(bound_ok),
            pass_fail(unitary_ok)
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// interp-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpParams {
    pub q_max: u64,
    pub x_per_pair: usize,
    pub theta: f64,
    pub n_list: Vec<usize>,
    /// Lebesgue grid points per node count.
    pub density_factor: usize,
}

impl Default for InterpParams {
    fn default() -> Self {
        Self {
            q_max: 100,
            x_per_pair: 100,
            theta: DEFAULT_THETA,
            n_list: (3..=9).map(|k| 1usize << k).collect(),
            density_factor: 50,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn interp_check(ctx: &mut Ctx, p: &mut InterpParams) -> Result<()> {
    if p.q_max < 2 {
        return Err(Error::param("q_max must be at least 2"));
    }
    let pairs: Vec<(u64, u64)> = (2..=p.q_max)
        .flat_map(|q| (1..q).filter(move |&pp| gcd(pp, q) == 1).map(move |pp| (pp, q)))
        .collect();
    let base = ctx.stream(STREAM_SAMPLES);
    let summaries = pairs
        .par_iter()
        .map(|&(pp, q)| -> Result<(u64, u64, f64, f64, usize, usize)> {
            let mut s = CounterStream::new(derive_seed(base, (q << 32) | pp));
            let (mut lo, mut hi, mut bad, mut degenerate) = (f64::INFINITY, f64::NEG_INFINITY, 0, 0);
            for _ in 0..p.x_per_pair {
                let r = sine_product_sum(pp, q, s.next_f64())?;
                lo = lo.min(r.sum);
                hi = hi.max(r.sum);
                bad += usize::from(!r.within_bounds(q));
                degenerate += usize::from(r.degenerate);
            }
            Ok((pp, q, lo, hi, bad, degenerate))
        })
        .collect::<Result<Vec<_>>>()?;
    let violations: usize = summaries.iter().map(|s| s.4).sum();
    let rows = summaries
        .iter()
        .map(|&(pp, q, lo, hi, bad, deg)| {
            use crate::interp::SineProductSum as S;
            row![pp, q, p.x_per_pair, lo, hi, S::lower_bound(q), S::upper_bound(q), bad, deg]
        })
        .collect();
    ctx.write_csv(
        "sine_sums.csv",
        &["p", "q", "samples", "min_sum", "max_sum", "lower_bound", "upper_bound", "violations", "degenerate"],
        rows,
    )?;
    ctx.check(
        "sine-product-bounds",
        Some(9),
        violations == 0,
        format!("{violations} violations over {} coprime pairs", pairs.len()),
    );

    let mut lambdas = Vec::with_capacity(p.n_list.len());
    let mut rows = Vec::new();
    for &n in &p.n_list {
        let nodes = chebyshev_like_nodes(n, p.theta)?;
        let lambda = lebesgue_constant(&nodes, p.density_factor.max(10) * n.max(1))?;
        lambdas.push(lambda);
        rows.push(row![n, p.theta, nodes.nodes.len(), lambda, lambda / n as f64, nodes.outside_sharp_regime()]);
    }
    ctx.write_csv(
        "lebesgue.csv",
        &["n", "theta", "nodes", "lambda", "lambda_over_n", "outside_sharp_regime"],
        rows,
    )?;
    if p.n_list.len() >= 2 {
        let ln_n: Vec<f64> = p.n_list.iter().map(|&n| (n as f64).ln()).collect();
        let ln_l: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        let fit = fit_line(&ln_n, &ln_l)?;
        let per_n: Vec<f64> = lambdas.iter().zip(&p.n_list).map(|(l, &n)| l / n as f64).collect();
        let spread = per_n.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            / per_n.iter().cloned().fold(f64::INFINITY, f64::min);
        ctx.derive("lebesgue_exponent", fit.slope);
        ctx.derive("lebesgue_per_n_spread", spread);
        ctx.check(
            "lebesgue-linear-growth",
            Some(8),
            (0.85..=1.15).contains(&fit.slope) && spread <= 5.0,
            format!("exponent {:.4}, max/min lambda/n {spread:.3}", fit.slope),
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// uniform-cs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniformParams {
    pub windows: usize,
    pub n_values: Vec<usize>,
    /// Extra lengths `n_max+1 ..= n_max+horizon` that must also be clean.
    pub horizon: usize,
    pub eps0_factor: f64,
    /// Defaults to the largest `δ` whose γ̂ variation is at most `ε0`, halved.
    pub delta0: Option<f64>,
    /// Interval `[a, a+length]`; defaults to the reference curve hull.
    pub a: Option<f64>,
    pub length: Option<f64>,
    pub craig_simon: bool,
    /// `ε(E) = cs_eps_factor · γ̂(E)` for the pointwise scan.
    pub cs_eps_factor: f64,
    pub cs_n_values: Vec<usize>,
    pub cs_grid_points: usize,
    pub reference: ReferenceCurve,
}

impl Default for UniformParams {
    fn default() -> Self {
        Self {
            windows: 5,
            n_values: vec![50, 100, 200, 400, 800, 1600],
            horizon: 8,
            eps0_factor: 0.1,
            delta0: None,
            a: None,
            length: None,
            craig_simon: true,
            cs_eps_factor: 0.2,
            cs_n_values: vec![50, 100, 200, 400, 800],
            cs_grid_points: 101,
            reference: ReferenceCurve::default(),
        }
    }
}

fn uniform_cs(ctx: &mut Ctx, p: &mut UniformParams) -> Result<()> {
    let dist = ctx.dist().clone();
    let n_max = *p.n_values.iter().max().ok_or_else(|| Error::param("n_values is empty"))?;
    let curve = p.reference.build(ctx)?;
    let eps0 = p.eps0_factor * curve.nu_hat();
    let delta0 = *p.delta0.get_or_insert_with(|| curve.auto_delta0(eps0));
    let (lo, hi) = curve.hull();
    let a = *p.a.get_or_insert(lo);
    let length = *p.length.get_or_insert(hi - a);
    ctx.derive("eps0", eps0);
    ctx.derive("delta0", delta0);

    let mut all_n = p.n_values.clone();
    all_n.extend(n_max + 1..=n_max + p.horizon);
    let base = ctx.stream(STREAM_SAMPLES);
    let mut rows = Vec::new();
    let mut clean_windows = 0;
    for win in 0..p.windows {
        let scan = uniform_bound_scan(&dist, derive_seed(base, win as u64), a, length, delta0, eps0, &all_n, &curve)?;
        clean_windows += usize::from(scan.iter().filter(|r| r.n >= n_max).all(|r| r.violations == 0));
        rows.extend(scan.iter().map(|r| row![win, r.n, r.k, r.grid_points, r.violations, r.max_log_excess]));
    }
    ctx.write_csv(
        "uniform.csv",
        &["window", "n", "K", "grid_points", "violations", "max_log_excess"],
        rows,
    )?;
    ctx.check(
        "uniform-upper-bound",
        Some(7),
        clean_windows == p.windows && p.windows >= 1,
        format!(
            "{clean_windows} of {} windows clean from n = {n_max} through the {}-length horizon",
            p.windows, p.horizon
        ),
    );

    if p.craig_simon && !p.cs_n_values.is_empty() {
        let cs_max = *p.cs_n_values.iter().max().unwrap_or(&0);
        let w = craig_simon_window(&dist, cs_max, ctx.stream(STREAM_CRAIG_SIMON))?;
        let grid = linspace(lo, hi, p.cs_grid_points);
        let factor = p.cs_eps_factor;
        let scan = craig_simon_scan(&w, &grid, &p.cs_n_values, &curve, |_, g| factor * g)?;
        let rows = scan
            .iter()
            .map(|r| {
                row![
                    r.n,
                    r.energies,
                    r.violations[0],
                    r.violations[1],
                    r.violations[2],
                    r.violations[3],
                    r.violation_fraction(),
                    r.max_excess
                ]
            })
            .collect();
        ctx.write_csv(
            "craig_simon.csv",
            &["n", "energies", "v_0_n", "v_minus_n_0", "v_n1_2n1", "v_2n1_3n1", "fraction", "max_excess"],
            rows,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// n-growth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NGrowthParams {
    pub l_values: Vec<i64>,
    pub checkers: Vec<Checker>,
    pub n_max: usize,
    pub horizon: usize,
    pub eps0_factor: f64,
    /// Estimated at `eta_energy` with `ε0` when absent.
    pub eta: Option<f64>,
    pub eta_energy: f64,
    pub eta_n_list: Vec<usize>,
    pub eta_m: usize,
    /// Defaults to `η/2`.
    pub delta0: Option<f64>,
    pub k: f64,
    pub budget: usize,
    pub grid_points: usize,
    pub reference: ReferenceCurve,
}

impl Default for NGrowthParams {
    fn default() -> Self {
        Self {
            l_values: vec![100, -100, 1000, -1000, 10_000, -10_000],
            checkers: vec![Checker::N1, Checker::N2, Checker::N3],
            n_max: 150,
            horizon: 8,
            eps0_factor: 0.1,
            eta: None,
            eta_energy: 0.5,
            eta_n_list: vec![25, 50, 100, 150, 200],
            eta_m: 20_000,
            delta0: None,
            k: 4.0,
            budget: 64,
            grid_points: 201,
            reference: ReferenceCurve::default(),
        }
    }
}

fn n_growth(ctx: &mut Ctx, p: &mut NGrowthParams) -> Result<()> {
    let dist = ctx.dist().clone();
    let curve = p.reference.build(ctx)?;
    let eps0 = p.eps0_factor * curve.nu_hat();
    let eta = match p.eta {
        Some(e) => e,
        None => {
            let g = curve.gamma_at(p.eta_energy)?;
            let (fit, _) = fit_eta(&dist, p.eta_energy, eps0, &p.eta_n_list, p.eta_m, g, ctx.stream(STREAM_ETA))?;
            ctx.derive("eta_r2", fit.r2);
            p.eta = Some(fit.eta_hat);
            fit.eta_hat
        }
    };
    if !(eta > 0.0) {
        return Err(Error::InsufficientSignal(format!("eta = {eta} is not positive")));
    }
    let delta0 = *p.delta0.get_or_insert(eta / 2.0);
    ctx.derive("eps0", eps0);
    ctx.derive("eta", eta);
    ctx.derive("delta0", delta0);
    let (lo, hi) = curve.hull();
    let cfg = NGrowthConfig {
        n_max: p.n_max,
        horizon: p.horizon,
        eps0,
        eta,
        delta0,
        k: p.k,
        budget: p.budget,
        grid: linspace(lo, hi, p.grid_points),
        gamma_ref: curve,
    };
    let seed = ctx.stream(STREAM_SAMPLES);
    let mut rows = Vec::new();
    let mut frac_rows = Vec::new();
    for &checker in &p.checkers {
        let report = n_growth_scan(&dist, seed, &p.l_values, checker, &cfg)?;
        let name = format!("{checker:?}");
        rows.extend(
            report
                .rows
                .iter()
                .map(|r| row![name.as_str(), r.l, r.ln2, r.n_hat, r.within, r.budget_exceeded]),
        );
        frac_rows.extend(report.fractions.iter().map(|&(l, f)| row![name.as_str(), l, f]));
        if let Some(&(l, f)) = report.fractions.last() {
            ctx.check(
                &format!("n-growth-{}", name.to_lowercase()),
                Some(12),
                f >= 0.9,
                format!("{name}: fraction with N <= ln^2|l| at |l| = {l} is {f:.3}"),
            );
        }
    }
    ctx.write_csv("ngrowth.csv", &["checker", "l", "ln2", "n_hat", "within", "budget_exceeded"], rows)?;
    ctx.write_csv("ngrowth_fractions.csv", &["checker", "abs_l", "fraction"], frac_rows)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// separation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationParams {
    pub n_list: Vec<usize>,
    pub k: f64,
    /// `ε = eps_factor · ν̂` unless `eps` is given.
    pub eps_factor: f64,
    pub eps: Option<f64>,
    pub m: usize,
    pub budget: usize,
    pub reference: ReferenceCurve,
}

impl Default for SeparationParams {
    fn default() -> Self {
        Self {
            n_list: vec![50, 100, 200],
            k: 4.0,
            eps_factor: 0.25,
            eps: None,
            m: 200,
            budget: 64,
            reference: ReferenceCurve::default(),
        }
    }
}

fn separation(ctx: &mut Ctx, p: &mut SeparationParams) -> Result<()> {
    let dist = ctx.dist().clone();
    let curve = p.reference.build(ctx)?;
    let eps = *p.eps.get_or_insert(p.eps_factor * curve.nu_hat());
    ctx.derive("eps", eps);
    let base = ctx.stream(STREAM_SAMPLES);
    let reports = p
        .n_list
        .iter()
        .map(|&n| eigenvalue_separation_check(&dist, n, eps, p.k, p.m, &curve, derive_seed(base, n as u64), p.budget))
        .collect::<Result<Vec<_>>>()?;
    let rows = reports
        .iter()
        .map(|r| {
            row![
                r.n,
                r.k,
                r.eps,
                r.trials,
                r.budget,
                r.tests,
                r.test_violations,
                r.trial_violations,
                r.test_rate,
                r.trial_rate
            ]
        })
        .collect();
    ctx.write_csv(
        "separation.csv",
        &[
            "n",
            "K",
            "eps",
            "trials",
            "budget",
            "tests",
            "test_violations",
            "trial_violations",
            "test_rate",
            "trial_rate",
        ],
        rows,
    )?;
    let rates: Vec<f64> = reports.iter().filter_map(|r| r.test_rate).collect();
    let monotone = rates.windows(2).all(|w| w[1] <= w[0]);
    ctx.check(
        "separation-rate-decreasing",
        None,
        monotone,
        format!("test violation rates {rates:?}"),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inline(cmd: Command, json: &str, dir: &Path) -> RunOptions {
        RunOptions::new(cmd, ConfigSource::Inline(json.into()), dir)
    }

    const BERNOULLI: &str = r#""distribution": {"kind": "bernoulli", "p": 0.5, "v0": 0.0, "v1": 1.0}"#;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("gama".parse::<Command>().is_err());
    }

    #[test]
    fn one_point_gamma_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let json = format!(r#"{{ {BERNOULLI}, "seed": 3, "params": {{"energies": [0.5], "n": 10, "m": 10}} }}"#);
        let a = run(&inline(Command::Gamma, &json, &dir.path().join("a"))).unwrap();
        let b = run(&inline(Command::Gamma, &json, &dir.path().join("b"))).unwrap();
        assert_eq!(a.manifest.outputs, b.manifest.outputs);
        let text = std::fs::read_to_string(dir.path().join("a/gamma.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "energy,gamma_hat,stderr,n,m");
        assert!(lines[1].starts_with("5.0000000000000000e-1,"));
        assert!(lines[2].starts_with('#'));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn missing_distribution_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&inline(Command::Gamma, r#"{"seed": 1}"#, dir.path())).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("distribution"));
    }

    #[test]
    fn malformed_config_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let json = format!("{{ {BERNOULLI},\n \"params\": {{\"pointz\": 3}} }}");
        let err = run(&inline(Command::Gamma, &json, dir.path())).unwrap_err().to_string();
        assert!(err.contains("pointz") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn manifest_reruns_as_config() {
        let dir = tempfile::tempdir().unwrap();
        let json = format!(r#"{{ {BERNOULLI}, "seed": 9, "params": {{"lo": 0.0013503421142259647, "hi": 0.3, "points": 3, "n": 20, "m": 5}} }}"#);
        let first = run(&inline(Command::Gamma, &json, &dir.path().join("a"))).unwrap();
        let mut opts = RunOptions::new(
            Command::Gamma,
            ConfigSource::File(dir.path().join("a").join(MANIFEST_FILE)),
            dir.path().join("b"),
        );
        opts.threads = Some(1);
        let second = run(&opts).unwrap();
        assert_eq!(first.manifest, second.manifest);
        assert_eq!(read_manifest(&dir.path().join("b")).unwrap(), second.manifest);
    }

    #[test]
    fn seed_override_and_wrong_command() {
        let dir = tempfile::tempdir().unwrap();
        let json = format!(r#"{{ {BERNOULLI}, "seed": 9, "params": {{"points": 2, "n": 10, "m": 4}} }}"#);
        let mut opts = inline(Command::Gamma, &json, dir.path());
        opts.seed = Some(11);
        assert_eq!(run(&opts).unwrap().manifest.seed, 11);
        let json = format!(r#"{{ "command": "ldt", {BERNOULLI} }}"#);
        assert!(run(&inline(Command::Gamma, &json, dir.path())).is_err());
    }

    #[test]
    fn small_interp_check() {
        let dir = tempfile::tempdir().unwrap();
        let mut opts = RunOptions::new(Command::InterpCheck, ConfigSource::Defaults, dir.path());
        opts.q_max = Some(20);
        let out = run(&opts).unwrap();
        assert!(out.check("sine-product-bounds").unwrap().passed);
        assert_eq!(out.manifest.params["q_max"], 20);
    }

    #[test]
    fn sign_change_count() {
        let seq = [1.0, -2.0, 0.0, 3.0, 4.0, -1.0].map(ScaledScalar::from_f64);
        assert_eq!(sign_changes(&seq), 3);
    }
}
