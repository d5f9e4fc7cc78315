//! Declarative experiments: a flat TOML config selects the potential,
//! grid, data, time ladder and studies; running it yields a manifest with
//! every fitted number keyed by study, per-study CSV tables and plot data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::harmonic::{lattice_invariant_weight, HarmonicPair};
use crate::heatflow::{
    invariant_measure_drift, l1_contraction_check, l2_decay_study, lower_bound_functionals, weighted_dirichlet_decay, DecayStudy,
    TimeLadder,
};
use crate::inequalities::{beta_one_counterexample, counterexample_half_width, relative_gap, Inequality, InequalityContext};
use crate::operator::{SchrodingerOperator, SpectralDecomposition};
use crate::potential::{Potential, PotentialKind};
use crate::profiles::{Profile, RandomFamily};
use crate::ratefit::{DecaySeries, FitResult};
use crate::waveflow::{
    diffusion_comparator, energy_lower_bound, energy_report, front_margin, gaussian_local_energy, lemma_profile_gap_sup,
    lemma_time_derivative_sup, matsumura_check, matsumura_single_mode, DiffusionOptions, ModalWaveEvolver,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Harmonic,
    Spectrum,
    HeatDecay,
    WaveDecay,
    Diffusion,
    LowerBound,
    Matsumura,
    Inequality,
    Gaussian,
    Beta1,
}

impl Study {
    pub const ALL: [Study; 10] = [
        Study::Harmonic,
        Study::Spectrum,
        Study::HeatDecay,
        Study::WaveDecay,
        Study::Diffusion,
        Study::LowerBound,
        Study::Matsumura,
        Study::Inequality,
        Study::Gaussian,
        Study::Beta1,
    ];

    fn needs_spectrum(self) -> bool {
        matches!(
            self,
            Study::Spectrum | Study::HeatDecay | Study::WaveDecay | Study::Diffusion | Study::LowerBound | Study::Matsumura
        )
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Study::ALL.into_iter().find(|k| k.to_string() == s).ok_or_else(|| Error::Config(format!("unknown study `{s}`")))
    }
}

fn d_name() -> String {
    "experiment".into()
}
fn d_profile() -> String {
    "bump".into()
}
fn d_velocity() -> String {
    "zero".into()
}
fn d_seed() -> u64 {
    1
}
fn d_t0() -> f64 {
    1.0
}
fn d_ratio() -> f64 {
    1.25
}
fn d_betas() -> Vec<f64> {
    vec![0.0, 0.5, 0.9]
}
fn d_radii() -> Vec<f64> {
    vec![1.0]
}
fn d_family() -> usize {
    200
}
fn d_n_list() -> Vec<f64> {
    vec![8.0, 16.0, 32.0, 64.0]
}
fn d_matsumura_samples() -> usize {
    20
}
fn d_matsumura_t_max() -> f64 {
    1e3
}
fn d_gaussian_t_max() -> f64 {
    1e4
}
fn d_true() -> bool {
    true
}
fn d_class_tol() -> f64 {
    1e-3
}
fn d_beta1_spacing() -> f64 {
    0.25
}

/// Flat experiment description. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_name")]
    pub name: String,
    /// Potential name (`bump`, `inv4`, `invpow:A`, `scaled:C:NAME`) or
    /// `file:PATH` for a two-column `x,v` CSV.
    pub potential: String,
    pub half_width: f64,
    pub nodes: usize,
    /// Initial position (or heat datum).
    #[serde(default = "d_profile")]
    pub profile: String,
    /// Initial velocity.
    #[serde(default = "d_velocity")]
    pub velocity: String,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_t0")]
    pub t0: f64,
    #[serde(default = "d_ratio")]
    pub ratio: f64,
    /// Ladder length; by default the ladder spans `[t0, t_max]`.
    #[serde(default)]
    pub count: Option<usize>,
    /// Last time of the parabolic studies; default `(L/8)²`.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Fit window; default the last decade below `t_max`.
    #[serde(default)]
    pub fit_window: Option<[f64; 2]>,
    pub studies: Vec<Study>,
    #[serde(default = "d_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "d_radii")]
    pub radii: Vec<f64>,
    /// Test functions per family in inequality sweeps.
    #[serde(default = "d_family")]
    pub family_size: usize,
    #[serde(default = "d_n_list")]
    pub n_list: Vec<f64>,
    #[serde(default = "d_beta1_spacing")]
    pub beta1_spacing: f64,
    #[serde(default = "d_matsumura_samples")]
    pub matsumura_samples: usize,
    #[serde(default = "d_matsumura_t_max")]
    pub matsumura_t_max: f64,
    #[serde(default = "d_gaussian_t_max")]
    pub gaussian_t_max: f64,
    /// Also run the heat study with `V ≡ 0` on the same grid.
    #[serde(default)]
    pub free_control: bool,
    /// Grow `L` (keeping `h`) when a guard fails instead of erroring.
    #[serde(default = "d_true")]
    pub auto_enlarge: bool,
    #[serde(default = "d_class_tol")]
    pub class_tol: f64,
    /// Keep only eigenpairs that still matter at the first ladder time.
    /// Much cheaper for late-time ladders; not allowed for studies that
    /// integrate from `t = 0`.
    #[serde(default)]
    pub partial_spectrum: bool,
    #[serde(default)]
    pub output: Option<String>,
    /// Checks of the form `study.key ~ target +- tol`, `study.key <= bound`
    /// or `study.key >= bound`.
    #[serde(default, rename = "assert")]
    pub assertions: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width, self.nodes)
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or((self.half_width / 8.0).powi(2))
    }

    pub fn ladder(&self) -> Result<TimeLadder> {
        match self.count {
            Some(c) => TimeLadder::new(self.t0, self.ratio, c),
            None => TimeLadder::spanning(self.t0, self.t_max(), self.ratio),
        }
    }

    pub fn window(&self) -> (f64, f64) {
        match self.fit_window {
            Some([a, b]) => (a, b),
            None => {
                let t1 = self.ladder().map(|l| l.last()).unwrap_or(self.t_max()).min(self.t_max());
                (t1 / 10.0, t1)
            }
        }
    }

    pub fn assertions(&self) -> Result<Vec<Assertion>> {
        self.assertions.iter().map(|s| s.parse()).collect()
    }

    /// Parses every spec without running anything.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut notes = Vec::new();
        let grid = self.grid()?;
        let kind = potential_kind(&self.potential)?;
        let v = Potential::new(kind, &grid)?;
        let class = v.require_class(self.class_tol)?;
        notes.push(format!("potential {} in class: moment {:.6e}, sup {:.6e}", self.potential, class.moment, class.sup));
        self.profile.parse::<Profile>()?;
        self.velocity.parse::<Profile>()?;
        let ladder = self.ladder()?;
        notes.push(format!("ladder: {} times in [{}, {}]", ladder.count, ladder.t0, ladder.last()));
        if self.studies.is_empty() {
            return Err(Error::Config("no studies requested".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(0.0..1.0).contains(*b)) {
            return Err(Error::Config(format!("β = {b} outside [0, 1)")));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::Config(format!("radius {r} must be positive")));
        }
        let (a, b) = self.window();
        if !(a > 0.0 && b > a) {
            return Err(Error::Config(format!("fit window [{a}, {b}] is empty")));
        }
        if self.partial_spectrum {
            if let Some(s) = self.studies.iter().find(|s| matches!(s, Study::LowerBound | Study::Matsumura)) {
                return Err(Error::Config(format!("study `{s}` needs the full spectrum; drop partial_spectrum")));
            }
        }
        self.assertions()?;
        Ok(notes)
    }
}

/// Resolves a potential spec, reading `file:PATH` tables.
pub fn potential_kind(spec: &str) -> Result<PotentialKind> {
    match spec.strip_prefix("file:") {
        Some(path) => Ok(PotentialKind::Sampled { table: read_potential_csv(Path::new(path))? }),
        None => spec.parse(),
    }
}

/// Two columns `x,v` with a header row.
pub fn read_potential_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), i + 2)))?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{} row {}: column {} is not a number", path.display(), i + 2, j + 1)))
        };
        rows.push((num(0)?, num(1)?));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Within { target: f64, tol: f64 },
    AtMost(f64),
    AtLeast(f64),
}

/// `study.key ~ target +- tol`, `study.key <= b`, `study.key >= b`.
///
/// For keys ending in `.exponent` the check uses the whole confidence
/// interval, read from the sibling `.half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub key: String,
    pub check: Comparison,
}

impl FromStr for Assertion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("assertion `{s}`: {why}"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad("expected a number"));
        let (key, check) = if let Some((k, rest)) = s.split_once("<=") {
            (k, Comparison::AtMost(num(rest)?))
        } else if let Some((k, rest)) = s.split_once(">=") {
            (k, Comparison::AtLeast(num(rest)?))
        } else if let Some((k, rest)) = s.split_once('~') {
            let (t, tol) = rest.split_once("+-").ok_or_else(|| bad("expected `~ target +- tol`"))?;
            (k, Comparison::Within { target: num(t)?, tol: num(tol)? })
        } else {
            return Err(bad("expected `~`, `<=` or `>=`"));
        };
        let key = key.trim();
        if !key.contains('.') {
            return Err(bad("key must be `study.quantity`"));
        }
        Ok(Assertion { key: key.to_string(), check })
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.check {
            Comparison::Within { target, tol } => write!(f, "{} ~ {target} +- {tol}", self.key),
            Comparison::AtMost(b) => write!(f, "{} <= {b}", self.key),
            Comparison::AtLeast(b) => write!(f, "{} >= {b}", self.key),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionOutcome {
    pub assertion: String,
    pub value: Option<f64>,
    pub half_width: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn evaluate(&self, values: &BTreeMap<String, BTreeMap<String, f64>>) -> AssertionOutcome {
        let (study, key) = self.key.split_once('.').unwrap_or((&self.key, ""));
        let record = values.get(study);
        let value = record.and_then(|r| r.get(key)).copied();
        let half_width = key
            .strip_suffix(".exponent")
            .or_else(|| (key == "exponent").then_some(""))
            .and_then(|stem| {
                let hw = if stem.is_empty() { "half_width".to_string() } else { format!("{stem}.half_width") };
                record.and_then(|r| r.get(&hw)).copied()
            })
            .unwrap_or(0.0);
        let passed = value.is_some_and(|v| match self.check {
            Comparison::Within { target, tol } => (v - target).abs() + half_width <= tol,
            Comparison::AtMost(b) => v + half_width <= b,
            Comparison::AtLeast(b) => v - half_width >= b,
        });
        AssertionOutcome { assertion: self.to_string(), value, half_width, passed }
    }
}

/// A guard that fired and what was done about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardEntry {
    pub study: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub name: String,
    /// Seconds since the Unix epoch; the only field that differs between
    /// identical runs.
    pub generated_at: u64,
    pub config: ExperimentConfig,
    pub grid: Grid,
    pub guards: Vec<GuardEntry>,
    /// Named results per study.
    pub values: BTreeMap<String, BTreeMap<String, f64>>,
    /// Every power fit, keyed `study.series`.
    pub fits: BTreeMap<String, FitResult>,
    pub assertions: Vec<AssertionOutcome>,
    pub passed: bool,
}

impl Manifest {
    pub fn value(&self, study: &str, key: &str) -> Option<f64> {
        self.values.get(study)?.get(key).copied()
    }

    pub fn failing(&self) -> Vec<&str> {
        self.assertions.iter().filter(|a| !a.passed).map(|a| a.assertion.as_str()).collect()
    }
}

/// Column table written as one CSV per study.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(&self.columns).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.rows {
            // `{:?}` on f64 is the shortest string that round-trips.
            w.write_record(r.iter().map(|v| format!("{v:?}"))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A two-column series for plotting, with its fit line when there is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub fit: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentBundle {
    pub manifest: Manifest,
    pub tables: BTreeMap<String, Table>,
    pub plots: Vec<PlotSeries>,
}

impl ExperimentBundle {
    pub fn empty(config: ExperimentConfig, grid: Grid) -> Self {
        Self {
            manifest: Manifest {
                schema_version: SCHEMA_VERSION,
                name: config.name.clone(),
                generated_at: now(),
                config,
                grid,
                guards: Vec::new(),
                values: BTreeMap::new(),
                fits: BTreeMap::new(),
                assertions: Vec::new(),
                passed: true,
            },
            tables: BTreeMap::new(),
            plots: Vec::new(),
        }
    }

    /// Writes `manifest.json` and one `<study>.csv` per table.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        for (name, t) in &self.tables {
            t.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }
}

fn now() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes `<name>.dat` and, for fitted series, `<name>.fit.dat` with the
/// fit line over its window. Returns the paths written.
pub fn emit_plotdata(bundle: &ExperimentBundle, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    if bundle.plots.is_empty() {
        return Ok(out);
    }
    std::fs::create_dir_all(dir)?;
    for s in &bundle.plots {
        let mut text = format!("# {} x y\n", s.name);
        for (x, y) in s.x.iter().zip(&s.y) {
            text.push_str(&format!("{x:?} {y:?}\n"));
        }
        let p = dir.join(format!("{}.dat", s.name));
        std::fs::write(&p, text)?;
        out.push(p);
        if let Some(f) = &s.fit {
            let mut text = format!("# {} fit exponent {:?} amplitude {:?}\n", s.name, f.exponent, f.amplitude);
            let [a, b] = f.window;
            for j in 0..=32 {
                let t = a * (b / a).powf(j as f64 / 32.0);
                text.push_str(&format!("{t:?} {:?}\n", f.amplitude * t.powf(f.exponent)));
            }
            let p = dir.join(format!("{}.fit.dat", s.name));
            std::fs::write(&p, text)?;
            out.push(p);
        }
    }
    Ok(out)
}

/// Accumulates one study's numbers.
struct Record<'b> {
    study: String,
    bundle: &'b mut ExperimentBundle,
}

impl Record<'_> {
    fn put(&mut self, key: &str, v: f64) {
        self.bundle.manifest.values.entry(self.study.clone()).or_default().insert(key.to_string(), v);
    }

    fn flag(&mut self, key: &str, b: bool) {
        self.put(key, if b { 1.0 } else { 0.0 });
    }

    fn fit(&mut self, series: &str, f: &FitResult) {
        self.put(&format!("{series}.exponent"), f.exponent);
        self.put(&format!("{series}.half_width"), f.half_width);
        self.put(&format!("{series}.amplitude"), f.amplitude);
        self.bundle.manifest.fits.insert(format!("{}.{series}", self.study), *f);
    }

    fn decay(&mut self, series: &str, d: &DecayStudy, plot: &str) {
        self.fit(series, &d.fit);
        if let Some(t) = d.target {
            self.put(&format!("{series}.target"), t);
        }
        if let Some(c) = d.constant {
            self.put(&format!("{series}.constant"), c);
        }
        self.plot(plot, &d.series, Some(d.fit));
    }

    fn plot(&mut self, name: &str, s: &DecaySeries, fit: Option<FitResult>) {
        self.bundle.plots.push(PlotSeries { name: name.to_string(), x: s.t.clone(), y: s.y.clone(), fit });
    }

    fn table(&mut self, t: Table) {
        self.bundle.tables.insert(self.study.clone(), t);
    }

    fn guard(&mut self, message: String) {
        self.bundle.manifest.guards.push(GuardEntry { study: self.study.clone(), message });
    }
}

/// Shared state built once per run.
struct Lab {
    config: ExperimentConfig,
    grid: Grid,
    potential: Potential,
    pair: HarmonicPair,
    dec: Option<SpectralDecomposition>,
    cutoff: Option<f64>,
    u0: Field,
    u1: Field,
    times: Vec<f64>,
    window: (f64, f64),
}

/// Grows the domain (keeping the spacing) until the parabolic and
/// propagation guards hold, or reports why it cannot.
fn plan_domain(config: &ExperimentConfig, guards: &mut Vec<GuardEntry>) -> Result<ExperimentConfig> {
    let mut cfg = config.clone();
    let h = 2.0 * cfg.half_width / (cfg.nodes - 1) as f64;
    let ladder = cfg.ladder()?;
    let mut need = 0.0f64;
    let parabolic = cfg.studies.iter().any(|s| matches!(s, Study::HeatDecay | Study::WaveDecay | Study::Diffusion | Study::LowerBound));
    if parabolic {
        // Samples fitted or integrated must satisfy t <= (L/8)².
        let last = ladder.last().min(cfg.t_max.unwrap_or(f64::INFINITY)).max(cfg.window().1);
        need = need.max(8.0 * last.sqrt());
    }
    let waves = cfg.studies.iter().any(|s| matches!(s, Study::WaveDecay | Study::Diffusion | Study::LowerBound));
    if waves {
        let r0 = cfg.profile.parse::<Profile>()?.support_radius().max(cfg.velocity.parse::<Profile>()?.support_radius());
        need = need.max(r0 + ladder.last().min(front_margin()) + h);
    }
    if need > cfg.half_width * (1.0 + 1e-12) {
        let msg = format!("half-width {} too small for the requested times; need {need:.3}", cfg.half_width);
        if !cfg.auto_enlarge {
            return Err(Error::DomainTooSmall { t: ladder.last(), required_half_width: need });
        }
        let cells = (need / h).ceil() as usize;
        cfg.half_width = cells as f64 * h;
        cfg.nodes = 2 * cells + 1;
        guards.push(GuardEntry { study: "planner".into(), message: format!("{msg}; enlarged to L = {} with n = {}", cfg.half_width, cfg.nodes) });
    }
    Ok(cfg)
}

/// Checks the config and the guards without running studies.
pub fn validate(config: &ExperimentConfig) -> Result<Vec<String>> {
    let mut notes = config.validate()?;
    let mut guards = Vec::new();
    let planned = plan_domain(config, &mut guards)?;
    notes.extend(guards.into_iter().map(|g| g.message));
    if planned.half_width != config.half_width {
        notes.push(format!("planned grid: L = {}, n = {}", planned.half_width, planned.nodes));
    }
    Ok(notes)
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentBundle> {
    config.validate()?;
    let mut guards = Vec::new();
    let cfg = plan_domain(config, &mut guards)?;
    let grid = cfg.grid()?;
    let potential = Potential::new(potential_kind(&cfg.potential)?, &grid)?;
    let class = potential.require_class(cfg.class_tol)?;
    let pair = HarmonicPair::solve(&potential)?;
    let times = cfg.ladder()?.times();
    let cutoff = cfg.partial_spectrum.then(|| spectral_cutoff(times[0]));
    if let Some(c) = cutoff {
        guards.push(GuardEntry { study: "planner".into(), message: format!("partial spectrum below λ = {c:.6e}") });
    }
    let dec = if cfg.studies.iter().any(|s| s.needs_spectrum()) { Some(decompose(&potential, cutoff)?) } else { None };
    let u0 = cfg.profile.parse::<Profile>()?.sample(&grid);
    let u1 = cfg.velocity.parse::<Profile>()?.sample(&grid);
    let window = cfg.window();
    let mut bundle = ExperimentBundle::empty(config.clone(), grid);
    bundle.manifest.guards = guards;
    let lab = Lab { config: cfg, grid, potential, pair, dec, cutoff, u0, u1, times, window };
    {
        let mut r = Record { study: "potential".into(), bundle: &mut bundle };
        r.put("moment", class.moment);
        r.put("sup", class.sup);
        r.put("tail_estimate", class.tail_estimate);
        r.put("half_width", lab.grid.half_width());
        r.put("nodes", lab.grid.len() as f64);
    }
    let mut studies = lab.config.studies.clone();
    studies.sort();
    studies.dedup();
    for s in studies {
        let mut r = Record { study: s.to_string(), bundle: &mut bundle };
        run_study(&lab, s, &mut r)?;
    }
    let checks = config.assertions()?;
    let outcomes: Vec<_> = checks.iter().map(|a| a.evaluate(&bundle.manifest.values)).collect();
    bundle.manifest.passed = outcomes.iter().all(|o| o.passed);
    bundle.manifest.assertions = outcomes;
    Ok(bundle)
}

/// Cutoff whose discarded heat modes are below the truncation tolerance
/// from `t_first` on, with a little slack.
pub fn spectral_cutoff(t_first: f64) -> f64 {
    1.05 * (1.0 / crate::heatflow::TRUNCATION_TOL).ln() / t_first
}

fn decompose(potential: &Potential, cutoff: Option<f64>) -> Result<SpectralDecomposition> {
    let op = SchrodingerOperator::assemble(potential);
    match cutoff {
        Some(c) => op.decompose_below(c),
        None => op.decompose(),
    }
}

fn spectrum(lab: &Lab) -> &SpectralDecomposition {
    lab.dec.as_ref().expect("decomposition built for spectral studies")
}

fn run_study(lab: &Lab, study: Study, r: &mut Record<'_>) -> Result<()> {
    match study {
        Study::Harmonic => harmonic_study(lab, r),
        Study::Spectrum => spectrum_study(lab, r),
        Study::HeatDecay => heat_study(lab, r),
        Study::WaveDecay => wave_study(lab, r),
        Study::Diffusion => diffusion_study(lab, r),
        Study::LowerBound => lower_bound_study(lab, r),
        Study::Matsumura => matsumura_study(lab, r),
        Study::Inequality => inequality_study(lab, r),
        Study::Gaussian => gaussian_study(lab, r),
        Study::Beta1 => beta1_study(lab, r),
    }
}

/// `√(1+x²)(π/2 + arctan x)`, the increasing harmonic function of
/// `(1+x²)^{-2}` with Wronskian `π`.
pub fn inverse_quartic_psi1(x: f64) -> f64 {
    (1.0 + x * x).sqrt() * (std::f64::consts::FRAC_PI_2 + x.atan())
}

fn harmonic_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let p = &lab.pair;
    let a = p.asymptotics_report();
    r.put("k_v", p.k_v);
    r.put("wronskian_variation", p.wronskian_variation());
    r.put("psi1_slope_at_l", a.psi1_slope_at_l);
    r.put("sup_psi1_prime", a.sup_psi1_prime);
    r.put("sup_psi1_prime.deviation", (a.sup_psi1_prime - p.k_v).abs() / p.k_v);
    r.put("psi1_slope.deviation", (a.psi1_slope_at_l / p.k_v - 1.0).abs());
    r.put("tail_moment", a.tail_moment);
    let (lo, hi) = p.bracket_comparability();
    r.put("bracket_comparability.min", lo);
    r.put("bracket_comparability.max", hi);
    r.put("product_bound", p.product_bound());
    if lab.potential.kind() == &PotentialKind::InverseQuartic {
        let exact = lab.grid.sample(inverse_quartic_psi1);
        let rel = (&p.psi1 - &exact).max_abs() / exact.max_abs();
        r.put("psi1_closed_form.relative_error", rel);
        r.put("k_v.error", (p.k_v - std::f64::consts::PI).abs());
    }
    let mut t = Table::new(&["x", "psi1", "psi2", "psi_v", "wronskian"]);
    for i in 0..lab.grid.len() {
        t.push(vec![lab.grid.x(i), p.psi1.get(i), p.psi2.get(i), p.psi_v.get(i), p.wronskian_profile.get(i)]);
    }
    r.table(t);
    Ok(())
}

fn spectrum_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let op = SchrodingerOperator::assemble(&lab.potential);
    let stride = (dec.len() / 200).max(1);
    r.put("modes", dec.len() as f64);
    r.put("lambda_min", dec.eigenvalues()[0]);
    r.put("lambda_max", *dec.eigenvalues().last().unwrap());
    r.put("max_residual", dec.max_residual(&op, stride)?);
    r.put("orthogonality_defect", dec.orthogonality_defect(stride));
    if dec.is_complete() {
        r.put("trace_defect", (dec.eigenvalues().iter().sum::<f64>() - op.trace()).abs() / op.trace());
    }
    let mut t = Table::new(&["k", "lambda"]);
    for (k, l) in dec.eigenvalues().iter().enumerate() {
        t.push(vec![k as f64, *l]);
    }
    r.table(t);
    Ok(())
}

fn heat_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let f = &lab.u0;
    let win = Some(lab.window);
    let l2 = l2_decay_study(Some(&lab.pair), dec, f, &lab.times, win)?;
    r.decay("l2", &l2, "l2_decay");
    let mut table = Table::new(&["t", "l2"]);
    let mut cols = vec![l2.series.y.clone()];
    for &b in &lab.config.betas {
        let d = weighted_dirichlet_decay(&lab.pair, &lab.potential, dec, f, b, &lab.times, win)?;
        r.decay(&format!("dirichlet_b{b}"), &d, &format!("weighted_dirichlet_b{b}"));
        table.columns.push(format!("dirichlet_b{b}"));
        cols.push(d.series.y);
    }
    if lab.config.free_control {
        let free = Potential::zero(&lab.grid);
        let fdec = decompose(&free, lab.cutoff)?;
        let z = l2_decay_study(None, &fdec, f, &lab.times, win)?;
        r.decay("free_l2", &z, "l2_decay_free");
        table.columns.push("free_l2".into());
        cols.push(z.series.y);
    }
    // Mass and contraction against the lattice-harmonic weight, on the
    // parabolic window only.
    let t_guard = (lab.grid.half_width() / 8.0).powi(2);
    let guarded: Vec<f64> = lab.times.iter().copied().filter(|t| *t <= t_guard).collect();
    let w = lattice_invariant_weight(&lab.potential);
    let mass = f.weighted_l1(&w)?;
    if mass > 0.0 && !guarded.is_empty() {
        let drift = invariant_measure_drift(&w, dec, f, &guarded)?;
        r.put("mass_drift.max_relative", drift.max_abs() / mass);
        let c = l1_contraction_check(&w, dec, f, &guarded)?;
        r.put("l1_contraction.max_excess", c.max().max(0.0) / mass);
        let c2 = l1_contraction_check(&w, dec, &f.map_with_x(|x, v| if x > 0.0 { -v } else { v }), &guarded)?;
        r.put("l1_contraction_signed.max_excess", c2.max().max(0.0) / mass);
    }
    for (j, t) in lab.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(cols.iter().map(|c| c[j]));
        table.push(row);
    }
    r.table(table);
    Ok(())
}

fn wave_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let ev = ModalWaveEvolver::new(dec, &lab.u0, &lab.u1)?;
    let betas = &lab.config.betas;
    let radii = &lab.config.radii;
    let reports = crate::par::map_range(lab.times.len(), |j| {
        let s = ev.evolve(lab.times[j])?;
        energy_report(&lab.potential, Some(&lab.pair), &s, radii, betas)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut cols: Vec<(String, Vec<f64>, Option<f64>)> = vec![("energy".into(), reports.iter().map(|e| e.total).collect(), Some(-2.5))];
    for (i, &rad) in radii.iter().enumerate() {
        cols.push((format!("local_r{rad}"), reports.iter().map(|e| e.local[i].value).collect(), Some(-3.0)));
    }
    for (i, &b) in betas.iter().enumerate() {
        let target = Some(-(5.0 + b) / 2.0);
        cols.push((format!("bracket_b{b}"), reports.iter().map(|e| e.bracket_weighted[i].value).collect(), target));
        cols.push((format!("product_b{b}"), reports.iter().map(|e| e.product_weighted[i].value).collect(), target));
    }
    let monotone = reports.windows(2).all(|w| w[1].total <= w[0].total * (1.0 + 1e-12));
    r.flag("energy_nonincreasing", monotone);
    let mut table = Table::new(&["t"]);
    for (name, y, target) in &cols {
        let series = DecaySeries::new(lab.times.clone(), y.clone())?;
        let fit = crate::ratefit::fit_power(&series, Some(lab.window))?;
        r.decay(name, &DecayStudy { series, fit, target: *target, constant: None }, &format!("wave_{name}"));
        table.columns.push(name.clone());
    }
    let (lo, hi) = lab.pair.product_comparability();
    r.put("product_comparability.min", lo);
    r.put("product_comparability.max", hi);
    let late: Vec<f64> = lab.times.iter().copied().filter(|t| *t >= 1.0).collect();
    if late.is_empty() {
        return Err(Error::InvalidParameter("wave study needs ladder times t >= 1".into()));
    }
    r.put("lemma_time_derivative.sup", lemma_time_derivative_sup(dec, &lab.u0, &late)?);
    r.put("lemma_profile_gap.sup", lemma_profile_gap_sup(dec, &(&lab.u0 + &lab.u1), &late)?);
    for (j, t) in lab.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(cols.iter().map(|c| c.1[j]));
        table.push(row);
    }
    r.table(table);
    Ok(())
}

fn diffusion_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let opts = DiffusionOptions { window: Some(lab.window), betas: lab.config.betas.clone(), radii: lab.config.radii.clone() };
    let d = diffusion_comparator(dec, &lab.potential, &lab.pair, &lab.u0, &lab.u1, &lab.times, &opts)?;
    r.decay("difference", &d.difference, "diffusion_difference");
    r.decay("profile", &d.profile, "diffusion_profile");
    let mut table = Table::new(&["t", "difference", "profile"]);
    let mut cols = vec![d.difference.series.y.clone(), d.profile.series.y.clone()];
    for (b, s) in &d.energy {
        let plot = if *b == 0.0 { "diffusion_energy".to_string() } else { format!("diffusion_energy_b{b}") };
        r.decay(&format!("energy_b{b}"), s, &plot);
        table.columns.push(format!("energy_b{b}"));
        cols.push(s.series.y.clone());
    }
    for (rad, s) in &d.local {
        r.decay(&format!("local_r{rad}"), s, &format!("diffusion_local_r{rad}"));
        table.columns.push(format!("local_r{rad}"));
        cols.push(s.series.y.clone());
    }
    r.put("weighted_mass", d.weighted_mass);
    r.put("weight_comparability.min", d.weight_comparability.0);
    r.put("weight_comparability.max", d.weight_comparability.1);
    for (j, t) in lab.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(cols.iter().map(|c| c[j]));
        table.push(row);
    }
    r.table(table);
    Ok(())
}

fn lower_bound_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let mut table = Table::new(&["t"]);
    let mut cols = Vec::new();
    let heat = lower_bound_functionals(&lab.pair, dec, &(&lab.u0 + &lab.u1), &lab.times)?;
    r.flag("heat.holder_consistent", heat.holder_consistent);
    r.put("heat.mass", heat.conserved_mass);
    let wave = energy_lower_bound(dec, &lab.u0, &lab.u1, &lab.times)?;
    r.flag("wave.bracketed", wave.bracketed);
    let all = heat.ratios.iter().map(|x| ("heat", x)).chain(wave.ratios.iter().map(|x| ("wave", x)));
    for (flow, ratio) in all {
        let key = format!("{flow}.{}", ratio.name);
        r.put(&format!("{key}.final_ratio"), ratio.final_ratio());
        r.put(&format!("{key}.tail_spread"), crate::ratefit::tail_spread(&ratio.ratio.y, 3));
        r.put(&format!("{key}.log_slope"), ratio.growth.slope);
        r.flag(&format!("{key}.converged"), ratio.converged());
        r.plot(&format!("lower_bound_{flow}_{}", ratio.name), &ratio.ratio, None);
        table.columns.push(key);
        cols.push(ratio.ratio.y.clone());
    }
    for (name, up) in ["weighted_l2_sq", "weighted_energy"].iter().zip(&wave.upper) {
        r.put(&format!("wave.{name}.upper"), *up.y.last().unwrap_or(&f64::NAN));
        table.columns.push(format!("wave.{name}.upper"));
        cols.push(up.y.clone());
    }
    for (j, t) in lab.times.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(cols.iter().map(|c| c[j]));
        table.push(row);
    }
    r.table(table);
    Ok(())
}

fn matsumura_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let dec = spectrum(lab);
    let times = TimeLadder::spanning(1.0, lab.config.matsumura_t_max, lab.config.ratio)?.times();
    let family = RandomFamily::new(lab.config.seed, lab.config.matsumura_samples).fields(&lab.grid);
    let mut sups = [0.0f64; 3];
    let mut table = Table::new(&["sample", "sup1", "sup2", "sup3"]);
    for (i, g) in family.iter().enumerate() {
        let rep = matsumura_check(dec, g, &times)?;
        for (s, x) in sups.iter_mut().zip(rep.ratio_sup) {
            *s = s.max(x);
        }
        table.push(vec![i as f64, rep.ratio_sup[0], rep.ratio_sup[1], rep.ratio_sup[2]]);
    }
    for (k, s) in sups.iter().enumerate() {
        r.put(&format!("ratio_sup_{}", k + 1), *s);
    }
    r.flag("all_finite", sups.iter().all(|s| s.is_finite()));
    // Closed-form cross-check on a few eigenmodes.
    let mut worst = 0.0f64;
    for k in [0, dec.len() / 3, dec.len() - 1] {
        let rep = matsumura_check(dec, &dec.mode(k), &times)?;
        for (j, &t) in times.iter().enumerate() {
            let (l, rh) = matsumura_single_mode(dec.eigenvalues()[k], t);
            for i in 0..3 {
                worst = worst.max((rep.lhs[i][j] - l[i]).abs()).max((rep.rhs[i][j] - rh[i]).abs());
            }
        }
    }
    r.put("single_mode.max_error", worst);
    r.table(table);
    Ok(())
}

/// Smallest family width, in grid cells.
const MIN_CELLS_PER_WIDTH: f64 = 5.0;

fn inequality_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let ctx = InequalityContext::new(&lab.potential, &lab.pair)?;
    let n = lab.config.family_size;
    let family = |seed: u64| {
        let f = RandomFamily::new(seed, n);
        // Narrow members must span enough cells for the discrete gradient.
        let need = MIN_CELLS_PER_WIDTH * lab.grid.spacing();
        let w_min = if need > f.width_min * (1.0 + 1e-9) { need } else { f.width_min };
        f.clone().with_geometry(f.center_spread, w_min, f.width_max.max(w_min))
    };
    let a = family(lab.config.seed);
    if a.width_min > RandomFamily::new(0, 0).width_min {
        r.guard(format!("coarse grid: family widths raised to at least {}", a.width_min));
    }
    let first = a.fields(&lab.grid);
    let second = family(lab.config.seed.wrapping_add(1_000_003)).fields(&lab.grid);
    let mut table = Table::new(&["inequality", "beta", "family", "sup", "constant", "violations"]);
    for (idx, which) in Inequality::ALL.into_iter().enumerate() {
        let betas = if which.takes_beta() { lab.config.betas.clone() } else { vec![0.0] };
        for b in betas {
            let key = if which.takes_beta() { format!("{which}_b{b}") } else { which.to_string() };
            let a = ctx.sweep(which, b, "first", &first)?;
            let c = ctx.sweep(which, b, "second", &second)?;
            r.put(&format!("{key}.sup"), a.sup.max(c.sup));
            r.put(&format!("{key}.violations"), (a.violations + c.violations) as f64);
            r.put(&format!("{key}.family_gap"), relative_gap(a.sup, c.sup));
            if let Some(k) = a.constant {
                r.put(&format!("{key}.constant"), k);
            }
            for (fi, s) in [&a, &c].into_iter().enumerate() {
                table.push(vec![idx as f64, b, fi as f64, s.sup, s.constant.unwrap_or(f64::NAN), s.violations as f64]);
            }
        }
    }
    r.table(table);
    Ok(())
}

fn gaussian_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let times = TimeLadder::spanning(1.0, lab.config.gaussian_t_max, lab.config.ratio)?.times();
    let mut table = Table::new(&["radius", "t", "dx", "dt", "dt_reduced"]);
    for &rad in &lab.config.radii {
        let g = gaussian_local_energy(rad, &times, 4001)?;
        let last = |s: &DecaySeries| *s.y.last().unwrap();
        r.put(&format!("r{rad}.dx"), last(&g.dx));
        r.put(&format!("r{rad}.dx.relative_error"), (last(&g.dx) / g.dx_limit - 1.0).abs());
        r.put(&format!("r{rad}.dt"), last(&g.dt));
        r.put(&format!("r{rad}.dt.relative_error"), (last(&g.dt) / g.dt_limit - 1.0).abs());
        r.put(&format!("r{rad}.dt_reduced.relative_error"), (last(&g.dt_reduced) / g.dt_limit - 1.0).abs());
        r.put(&format!("r{rad}.dx_limit"), g.dx_limit);
        r.put(&format!("r{rad}.dt_limit"), g.dt_limit);
        r.plot(&format!("gaussian_dx_r{rad}"), &g.dx, None);
        r.plot(&format!("gaussian_dt_r{rad}"), &g.dt, None);
        for (j, t) in times.iter().enumerate() {
            table.push(vec![rad, *t, g.dx.y[j], g.dt.y[j], g.dt_reduced.y[j]]);
        }
    }
    r.table(table);
    Ok(())
}

fn beta1_study(lab: &Lab, r: &mut Record<'_>) -> Result<()> {
    let n_max = lab.config.n_list.iter().copied().fold(0.0, f64::max);
    let l = counterexample_half_width(lab.pair.k_v, n_max);
    let grid = Grid::with_spacing(l.ceil(), lab.config.beta1_spacing)?;
    r.guard(format!("counterexample grid L = {}, h = {}", grid.half_width(), grid.spacing()));
    let v = Potential::new(lab.potential.kind().clone(), &grid)?;
    let pair = HarmonicPair::solve(&v)?;
    let ctx = InequalityContext::new(&v, &pair)?;
    let rep = beta_one_counterexample(&ctx, &lab.config.n_list)?;
    r.fit("l2", &rep.l2_fit);
    r.fit("s_norm", &rep.s_norm_fit);
    r.fit("weighted_vs_log_n", &rep.weighted_log_fit);
    r.flag("ratio_increasing", rep.ratio_increasing);
    let mut t = Table::new(&["n", "l2", "s_norm", "weighted", "ratio"]);
    for row in &rep.rows {
        t.push(vec![row.n, row.l2, row.s_norm, row.weighted, row.ratio]);
    }
    r.table(t);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(studies: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            "potential = \"inv4\"\nhalf_width = 40.0\nnodes = 401\nstudies = [{studies}]\nt_max = 25.0\n"
        ))
        .unwrap()
    }

    #[test]
    fn parse_errors_carry_positions() {
        let err = ExperimentConfig::from_toml("potential = \"inv4\"\nhalf_width = \"wide\"\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(ExperimentConfig::from_toml("potential = \"inv4\"\nhalf_width = 1.0\nnodes = 11\nstudies = []\nbogus = 1\n").is_err());
    }

    #[test]
    fn zero_potential_rejected_at_validation() {
        let mut c = small("\"harmonic\"");
        c.potential = "zero".into();
        assert!(matches!(c.validate(), Err(Error::ClassViolation(_))));
    }

    #[test]
    fn assertions_parse_and_evaluate() {
        let a: Assertion = "heat-decay.l2.exponent ~ -0.75 +- 0.05".parse().unwrap();
        let mut v = BTreeMap::new();
        v.insert("heat-decay".to_string(), BTreeMap::from([("l2.exponent".to_string(), -0.76), ("l2.half_width".to_string(), 0.03)]));
        assert!(a.evaluate(&v).passed);
        v.get_mut("heat-decay").unwrap().insert("l2.half_width".into(), 0.05);
        assert!(!a.evaluate(&v).passed);
        let b: Assertion = "x.y <= 2".parse().unwrap();
        assert!(!b.evaluate(&v).passed);
        assert!("nonsense".parse::<Assertion>().is_err());
        assert_eq!(b.to_string().parse::<Assertion>().unwrap(), b);
    }

    #[test]
    fn harmonic_run_reports_wronskian() {
        let mut c = small("\"harmonic\"");
        c.assertions = vec!["harmonic.k_v ~ 3.14159265 +- 1e-2".into()];
        let b = run(&c).unwrap();
        assert!(b.manifest.passed, "{:?}", b.manifest.assertions);
        assert_eq!(b.tables["harmonic"].rows.len(), 401);
    }

    #[test]
    fn planner_enlarges_or_refuses() {
        let mut c = small("\"heat-decay\"");
        c.t_max = Some(100.0);
        c.fit_window = Some([10.0, 100.0]);
        let mut g = Vec::new();
        let p = plan_domain(&c, &mut g).unwrap();
        assert!(p.half_width >= 80.0 && g.len() == 1);
        assert!((2.0 * p.half_width / (p.nodes - 1) as f64 - 0.2).abs() < 1e-12);
        c.auto_enlarge = false;
        assert!(matches!(plan_domain(&c, &mut g), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn empty_bundle_writes_no_plots() {
        let c = small("\"harmonic\"");
        let b = ExperimentBundle::empty(c, Grid::new(1.0, 3).unwrap());
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plotdata(&b, dir.path()).unwrap().is_empty());
    }

    #[test]
    fn study_names_round_trip() {
        for s in Study::ALL {
            assert_eq!(s.to_string().parse::<Study>().unwrap(), s);
        }
        assert_eq!(Study::Beta1.to_string(), "beta1");
    }
}
