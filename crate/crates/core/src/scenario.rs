//! Declarative scenarios: TOML config in, CSV tables and plot scripts out.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ed::{self, ExactDynamics, Model};
use crate::error::{Error, Result};
use crate::fermion::{XYDynamics, XYParams};
use crate::grid::{self, linspace, Dynamics, Grid, Measure, Parties};
use crate::hilbert::{Boundary, ChainSpec, PureState};
use crate::linalg::{c, C64};
use crate::magnon::{
    self, HarperMap, HarperParams, HeisenbergOneMagnon, HeisenbergParams, OneMagnonDynamics, TwoMagnonDynamics,
    TwoMagnonSector,
};
use crate::measures;
use crate::qdp::{
    self, ExactProcess, Process, QdpKind, QdpSpec, SurfaceKind, SurfaceRequest, XHeisenbergProcess, ZOneMagnonProcess,
};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Slack on `p + q <= 1` for grid cells of the mixture landscape.
const PQ_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub chain: ChainConfig,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qdp: Option<QdpConfig>,
    pub grid: GridConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub boundary: Boundary,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n: 20,
            boundary: Boundary::Periodic,
        }
    }
}

/// A single value or a list to sweep over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    One(f64),
    Many(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::One(x) => vec![*x],
            Sweep::Many(v) => v.clone(),
        }
    }
}

impl From<f64> for Sweep {
    fn from(x: f64) -> Self {
        Sweep::One(x)
    }
}

fn one() -> Sweep {
    Sweep::One(1.0)
}

fn zero() -> Sweep {
    Sweep::One(0.0)
}

fn default_eta() -> i64 {
    1
}

fn default_pq_steps() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Heisenberg {
        #[serde(default = "one")]
        j: Sweep,
        #[serde(default = "one")]
        delta: Sweep,
    },
    Harper {
        g: Sweep,
        tau: Sweep,
        #[serde(default = "default_eta")]
        eta: i64,
    },
    Xy {
        jx: Sweep,
        jy: Sweep,
        #[serde(default = "zero")]
        h: Sweep,
    },
    /// `p W + q |111><111| + (1 - p - q) |000><000|` on three qubits. Missing
    /// axes cover `[0, 1]` with `steps` points.
    PqMixture {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<Sweep>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<Sweep>,
        #[serde(default = "default_pq_steps")]
        steps: usize,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Heisenberg { j: one(), delta: one() }
    }
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Heisenberg { .. } => "heisenberg",
            ModelConfig::Harper { .. } => "harper",
            ModelConfig::Xy { .. } => "xy",
            ModelConfig::PqMixture { .. } => "pq_mixture",
        }
    }
}

/// Initial state, written as `alpha |first> + beta |second>`. The named pairs
/// use `alpha = beta = 1/sqrt 2`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    /// `(|10..0> + |010..0>) / sqrt 2`.
    #[default]
    OneMagnonPair,
    /// `(|00..0> + |110..0>) / sqrt 2`.
    VacuumTwoMagnonPair,
    OneMagnon {
        alpha: [f64; 2],
        beta: [f64; 2],
    },
    VacuumTwoMagnon {
        alpha: [f64; 2],
        beta: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    OneMagnon,
    VacuumTwoMagnon,
}

impl InitialConfig {
    fn pair(&self) -> (PairKind, C64, C64) {
        let s = c(FRAC_1_SQRT_2, 0.0);
        match *self {
            InitialConfig::OneMagnonPair => (PairKind::OneMagnon, s, s),
            InitialConfig::VacuumTwoMagnonPair => (PairKind::VacuumTwoMagnon, s, s),
            InitialConfig::OneMagnon { alpha, beta } => {
                (PairKind::OneMagnon, c(alpha[0], alpha[1]), c(beta[0], beta[1]))
            }
            InitialConfig::VacuumTwoMagnon { alpha, beta } => {
                (PairKind::VacuumTwoMagnon, c(alpha[0], alpha[1]), c(beta[0], beta[1]))
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            InitialConfig::OneMagnonPair => "one_magnon_pair",
            InitialConfig::VacuumTwoMagnonPair => "vacuum_two_magnon_pair",
            InitialConfig::OneMagnon { .. } => "one_magnon",
            InitialConfig::VacuumTwoMagnon { .. } => "vacuum_two_magnon",
        }
    }
}

/// The local process; its epoch comes from `grid.t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum QdpConfig {
    Projective {
        site: usize,
        axis: [f64; 3],
    },
    Kick {
        site: usize,
        gamma: [f64; 2],
        delta: [f64; 2],
    },
    EpochKick {
        site: usize,
        axis: [f64; 3],
    },
}

impl QdpConfig {
    pub fn spec(&self) -> Result<QdpSpec> {
        match *self {
            QdpConfig::Projective { site, axis } => QdpSpec::new(site, 0.0, QdpKind::Projective { axis }),
            QdpConfig::Kick { site, gamma, delta } => QdpSpec::new(site, 0.0, QdpKind::Kick { gamma, delta }),
            QdpConfig::EpochKick { site, axis } => QdpSpec::new(site, 0.0, QdpKind::EpochKick { axis }),
        }
    }

    fn describe(&self) -> String {
        let v = |xs: &[f64]| xs.iter().map(|x| format_g12(*x)).collect::<Vec<_>>().join("/");
        match self {
            QdpConfig::Projective { site, axis } => format!("qdp=projective site={site} axis={}", v(axis)),
            QdpConfig::Kick { site, gamma, delta } => {
                format!("qdp=kick site={site} gamma={} delta={}", v(gamma), v(delta))
            }
            QdpConfig::EpochKick { site, axis } => format!("qdp=epoch_kick site={site} axis={}", v(axis)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Range {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.steps)
    }

    fn check(&self, field: &str) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::Config(format!("{field}: bounds must be finite")));
        }
        if self.steps == 0 {
            return Err(Error::Config(format!("{field}.steps must be at least 1")));
        }
        if self.stop < self.start || (self.steps > 1 && self.stop == self.start) {
            return Err(Error::Config(format!("{field}: stop must exceed start")));
        }
        if self.start < 0.0 {
            return Err(Error::Config(format!("{field}.start must be non-negative")));
        }
        Ok(())
    }
}

/// Which implementation evaluates the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Closed forms where they cover the request, exact evolution otherwise.
    #[default]
    Auto,
    Analytic,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t: Range,
    /// Epochs of the process; ignored without `[qdp]`.
    pub t0: Range,
    /// Measure names, optionally prefixed `delta_` and suffixed `@parties`.
    pub measures: Vec<String>,
    /// Party groups such as `1:2` or `2:1,3`; `nn` means every nearest
    /// neighbour pair (or consecutive triple for `tmi`).
    pub parties: Vec<String>,
    pub backend: Engine,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t: Range {
                start: 0.0,
                stop: 10.0,
                steps: 201,
            },
            t0: Range {
                start: 0.0,
                stop: 5.0,
                steps: 101,
            },
            measures: vec!["concurrence".into(), "mutual_information".into()],
            parties: vec!["nn".into()],
            backend: Engine::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum PartySet {
    Nn,
    Explicit(Parties),
}

impl PartySet {
    fn label(&self) -> String {
        match self {
            PartySet::Nn => "nn".into(),
            PartySet::Explicit(p) => p.label(),
        }
    }

    fn groups(&self, measure: Measure, n: usize) -> Vec<Parties> {
        match self {
            PartySet::Nn if measure == Measure::Tmi => (1..=n - 2).map(|j| Parties::triple(j, j + 1, j + 2)).collect(),
            PartySet::Nn => grid::nearest_neighbours(n - 1),
            PartySet::Explicit(p) => vec![p.clone()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Request {
    measure: Measure,
    kind: SurfaceKind,
    parties: PartySet,
}

impl Request {
    fn label(&self) -> String {
        match self.kind {
            SurfaceKind::Delta => format!("delta_{}", self.measure),
            SurfaceKind::Tilde => self.measure.to_string(),
        }
    }

    fn stem(&self) -> String {
        format!("{}__{}", self.label(), self.parties.label())
    }
}

fn parse_party_set(s: &str) -> Result<PartySet> {
    if s.trim() == "nn" {
        Ok(PartySet::Nn)
    } else {
        s.parse().map(PartySet::Explicit)
    }
}

fn check_arity(measure: Measure, parties: &Parties) -> Result<()> {
    let ok = match (measure, parties) {
        (Measure::Tmi, Parties::Three(..)) => true,
        (Measure::Tmi, _) | (_, Parties::Three(..)) => false,
        (Measure::MutualInformation | Measure::Negativity, _) => true,
        (_, Parties::Two(a, b)) => a.len() == 1 && b.len() == 1,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "grid.measures: {measure} cannot be evaluated on parties {parties}"
        )))
    }
}

impl ScenarioConfig {
    pub fn chain_spec(&self) -> Result<ChainSpec> {
        ChainSpec::periodic(self.chain.n).map_err(|e| Error::Config(format!("chain.n: {e}")))
    }

    fn requests(&self) -> Result<Vec<Request>> {
        let default_parties = self
            .grid
            .parties
            .iter()
            .map(|p| parse_party_set(p).map_err(|e| Error::Config(format!("grid.parties: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::new();
        for entry in &self.grid.measures {
            let (name, pinned) = match entry.split_once('@') {
                Some((m, p)) => (m, Some(p)),
                None => (entry.as_str(), None),
            };
            let (kind, base) = match name.trim().strip_prefix("delta_") {
                Some(rest) => (SurfaceKind::Delta, rest),
                None => (SurfaceKind::Tilde, name.trim()),
            };
            let measure: Measure = base.parse().map_err(|e| Error::Config(format!("grid.measures: {e}")))?;
            if kind == SurfaceKind::Delta && self.qdp.is_none() {
                return Err(Error::Config(format!("grid.measures: `{entry}` needs a [qdp] section")));
            }
            let sets = match pinned {
                Some(p) => vec![parse_party_set(p).map_err(|e| Error::Config(format!("grid.measures: {e}")))?],
                None => default_parties.clone(),
            };
            for parties in sets {
                out.push(Request { measure, kind, parties });
            }
        }
        Ok(out)
    }

    /// Checks every invariant that does not need the dynamics.
    pub fn validate(&self) -> Result<()> {
        self.grid.t.check("grid.t")?;
        self.grid.t0.check("grid.t0")?;
        if let ModelConfig::PqMixture { p, q, steps } = &self.model {
            if self.qdp.is_some() {
                return Err(Error::Config("qdp: not available for the pq_mixture model".into()));
            }
            if *steps < 2 && (p.is_none() || q.is_none()) {
                return Err(Error::Config("model.steps must be at least 2".into()));
            }
            let axis = |s: &Option<Sweep>, field: &str| -> Result<f64> {
                let vals = s.as_ref().map(Sweep::values).unwrap_or_else(|| vec![0.0]);
                if vals.is_empty() || vals.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::Config(format!("model.{field}: values must lie in [0, 1]")));
                }
                Ok(vals.iter().copied().fold(0.0, f64::max))
            };
            let (pmax, qmax) = (axis(p, "p")?, axis(q, "q")?);
            if p.is_some() && q.is_some() && pmax + qmax > 1.0 + PQ_SLACK {
                return Err(Error::Config(format!(
                    "model.p + model.q must not exceed 1, got {}",
                    pmax + qmax
                )));
            }
            return Ok(());
        }
        let chain = self.chain_spec()?;
        let (_, a, b) = self.initial.pair();
        let norm = a.norm_sqr() + b.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "initial: |alpha|^2 + |beta|^2 = {norm}, expected 1"
            )));
        }
        if let Some(q) = &self.qdp {
            let spec = q.spec().map_err(|e| Error::Config(format!("qdp: {e}")))?;
            chain
                .check_site(spec.site)
                .map_err(|e| Error::Config(format!("qdp.site: {e}")))?;
        }
        self.variants()?;
        let requests = self.requests()?;
        if requests.is_empty() {
            return Err(Error::Config("grid.measures: nothing to compute".into()));
        }
        let mut stems = std::collections::HashSet::new();
        for r in &requests {
            if !stems.insert(r.stem()) {
                return Err(Error::Config(format!("grid.measures: `{}` requested twice", r.stem())));
            }
            if r.parties == PartySet::Nn && chain.n_sites() < 3 {
                return Err(Error::Config("grid.parties: nn needs at least three sites".into()));
            }
            for g in r.parties.groups(r.measure, chain.n_sites()) {
                check_arity(r.measure, &g)?;
                g.check(&chain)
                    .map_err(|e| Error::Config(format!("grid.parties: {e}")))?;
            }
        }
        Ok(())
    }

    /// TOML text that parses back to `self`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// First 16 hex digits of the SHA-256 of the config without its output
    /// directory.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = OutputConfig::default();
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    fn variants(&self) -> Result<Vec<Variant>> {
        let bad = |field: &str, e: Error| Error::Config(format!("model.{field}: {e}"));
        let expand = |axes: &[(&str, &Sweep)]| -> Result<Vec<(Vec<f64>, String, String)>> {
            let mut out = vec![(Vec::new(), Vec::<String>::new(), Vec::<String>::new())];
            for (name, sweep) in axes {
                let vals = sweep.values();
                if vals.is_empty() {
                    return Err(Error::Config(format!("model.{name}: empty list")));
                }
                let swept = vals.len() > 1;
                out = out
                    .into_iter()
                    .flat_map(|(v, l, p)| {
                        vals.iter().map(move |&x| {
                            let mut v = v.clone();
                            let mut l = l.clone();
                            let mut p = p.clone();
                            v.push(x);
                            if swept {
                                l.push(format!("{name}{}", format_g12(x)));
                            }
                            p.push(format!("{name}={}", format_g12(x)));
                            (v, l, p)
                        })
                    })
                    .collect();
            }
            Ok(out.into_iter().map(|(v, l, p)| (v, l.join("_"), p.join(" "))).collect())
        };
        let mut out = Vec::new();
        match &self.model {
            ModelConfig::Heisenberg { j, delta } => {
                for (v, label, params) in expand(&[("j", j), ("delta", delta)])? {
                    let p = HeisenbergParams::new(v[0], v[1]).map_err(|e| bad("j", e))?;
                    out.push(Variant::new(Some(Model::Heisenberg(p)), label, params));
                }
            }
            ModelConfig::Harper { g, tau, eta } => {
                for (v, label, params) in expand(&[("g", g), ("tau", tau)])? {
                    let p = HarperParams::new(v[0], v[1], *eta).map_err(|e| bad("tau", e))?;
                    out.push(Variant::new(
                        Some(Model::Harper(p)),
                        label,
                        format!("{params} eta={eta}"),
                    ));
                }
            }
            ModelConfig::Xy { jx, jy, h } => {
                for (v, label, params) in expand(&[("jx", jx), ("jy", jy), ("h", h)])? {
                    let p = XYParams::new(v[0], v[1], v[2]).map_err(|e| bad("jx", e))?;
                    out.push(Variant::new(Some(Model::Xy(p)), label, params));
                }
            }
            ModelConfig::PqMixture { .. } => out.push(Variant::new(None, String::new(), String::new())),
        }
        Ok(out)
    }
}

struct Variant {
    model: Option<Model>,
    label: String,
    params: String,
}

impl Variant {
    fn new(model: Option<Model>, label: String, params: String) -> Self {
        Self { model, label, params }
    }
}

/// Parses and validates a TOML scenario. Syntax errors carry line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text).map_err(|e| e.context(path.display().to_string()))
}

/// One cell of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRecord {
    pub row: f64,
    pub col: f64,
    pub value: f64,
}

/// A measure over (row, column) cells, written to `<stem>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub stem: String,
    pub measure: String,
    pub model: String,
    pub params: String,
    pub row_name: String,
    pub col_name: String,
    pub records: Vec<GridRecord>,
}

impl Table {
    fn from_grid(
        stem: String,
        measure: String,
        model: &str,
        params: String,
        axes: (&str, &str),
        grid: &Grid,
    ) -> Result<Self> {
        let mut records = Vec::with_capacity(grid.values.len());
        for (r, &row) in grid.rows.iter().enumerate() {
            for (k, &col) in grid.cols.iter().enumerate() {
                records.push(GridRecord {
                    row,
                    col,
                    value: grid.get(r, k),
                });
            }
        }
        let table = Self {
            stem,
            measure,
            model: model.to_string(),
            params,
            row_name: axes.0.to_string(),
            col_name: axes.1.to_string(),
            records,
        };
        table.check_finite()?;
        Ok(table)
    }

    fn check_finite(&self) -> Result<()> {
        match self.records.iter().find(|r| !r.value.is_finite()) {
            Some(r) => Err(Error::domain(format!(
                "{}: non-finite value at ({}, {})",
                self.stem, r.row, r.col
            ))),
            None => Ok(()),
        }
    }

    /// Cell value, if present.
    pub fn value(&self, row: f64, col: f64) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.row == row && r.col == col)
            .map(|r| r.value)
    }

    pub fn min(&self) -> f64 {
        self.records.iter().map(|r| r.value).fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.records.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV text with the `# hash, model, params` header.
    pub fn to_csv(&self, hash: &str) -> String {
        let mut s = format!(
            "# {hash}, {}, {} axes={}:{}\nrow,col,value\n",
            self.model, self.params, self.row_name, self.col_name
        );
        for r in &self.records {
            let _ = writeln!(s, "{},{},{}", format_g12(r.row), format_g12(r.col), format_g12(r.value));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutput {
    pub hash: String,
    pub tables: Vec<Table>,
}

impl ScenarioOutput {
    pub fn table(&self, stem: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.stem == stem)
    }
}

/// `%.12g`: twelve significant digits, trailing zeros removed.
pub fn format_g12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        trim_zeros(format!("{v:.*}", (11 - exp) as usize))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Runs every model variant and measure of a validated config.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let hash = config.hash()?;
    let mut tables = Vec::new();
    let variants = config.variants()?;
    let multi = variants.len() > 1;
    for v in &variants {
        let ctx = format!("{} {}", config.model.name(), v.params);
        let mut out = match v.model {
            None => vec![pq_table(config)?],
            Some(model) => run_model(config, &model, &v.params).map_err(|e| e.context(ctx))?,
        };
        if multi {
            for t in &mut out {
                t.stem = format!("{}__{}", t.stem, v.label);
            }
        }
        tables.extend(out);
    }
    Ok(ScenarioOutput { hash, tables })
}

fn pq_table(config: &ScenarioConfig) -> Result<Table> {
    let ModelConfig::PqMixture { p, q, steps } = &config.model else {
        unreachable!("pq table for another model")
    };
    let axis = |s: &Option<Sweep>| {
        s.as_ref()
            .map(Sweep::values)
            .unwrap_or_else(|| linspace(0.0, 1.0, *steps))
    };
    let (ps, qs) = (axis(p), axis(q));
    let rows: Vec<Vec<GridRecord>> = ps
        .par_iter()
        .map(|&p| {
            qs.iter()
                .filter(|&&q| p + q <= 1.0 + PQ_SLACK)
                .map(|&q| {
                    let rho = measures::build_pq_mixture(p, q)?;
                    Ok(GridRecord {
                        row: p,
                        col: q,
                        value: measures::tmi(&rho, &[1], &[2], &[3])?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let table = Table {
        stem: "tmi__pq".into(),
        measure: "tmi".into(),
        model: "pq_mixture".into(),
        params: "parties=1-2-3".into(),
        row_name: "p".into(),
        col_name: "q".into(),
        records: rows.into_iter().flatten().collect(),
    };
    table.check_finite()?;
    Ok(table)
}

fn run_model(config: &ScenarioConfig, model: &Model, model_params: &str) -> Result<Vec<Table>> {
    let chain = config.chain_spec()?;
    let n = chain.n_sites();
    let requests = config.requests()?;
    let times = config.grid.t.points();
    let base = format!("N={n} {model_params} init={}", config.initial.name());
    let name = config.model.name();
    match &config.qdp {
        None => {
            let groups: Vec<Parties> = requests.iter().flat_map(|r| r.parties.groups(r.measure, n)).collect();
            let dynamics = dynamics(model, chain, &config.initial, config.grid.backend, &groups)?;
            requests
                .iter()
                .map(|r| {
                    let groups = r.parties.groups(r.measure, n);
                    let mut grid =
                        grid::measure_grid(&*dynamics, r.measure, &groups, &times).map_err(|e| e.context(r.stem()))?;
                    grid.rows = groups.iter().map(|g| g.sites()[0] as f64).collect();
                    let params = format!("{base} parties={}", r.parties.label());
                    Table::from_grid(r.stem(), r.label(), name, params, ("site", "t"), &grid)
                })
                .collect()
        }
        Some(q) => {
            let process = process(model, chain, &config.initial, config.grid.backend, q)?;
            let mut surface_requests = Vec::new();
            let mut stems = Vec::new();
            for r in &requests {
                for g in r.parties.groups(r.measure, n) {
                    stems.push(match r.parties {
                        PartySet::Nn => format!("{}__{}", r.label(), g.label()),
                        PartySet::Explicit(_) => r.stem(),
                    });
                    surface_requests.push(SurfaceRequest {
                        measure: r.measure,
                        parties: g,
                        kind: r.kind,
                    });
                }
            }
            let epochs = config.grid.t0.points();
            let result = qdp::delta_surfaces(&*process, &surface_requests, &times, &epochs)?;
            result
                .surfaces
                .iter()
                .zip(stems)
                .map(|(s, stem)| {
                    let params = format!("{base} {} parties={}", q.describe(), s.request.parties.label());
                    Table::from_grid(stem, s.request.measure_label(), name, params, ("t0", "t"), &s.grid)
                })
                .collect()
        }
    }
}

/// Whether the free-fermion closed forms cover every group.
fn xy_covers(groups: &[Parties], n: usize) -> bool {
    groups.iter().all(|g| match g {
        Parties::Two(a, b) => a.len() == 1 && b.len() == 1 && b[0] == a[0] + 1 && b[0] <= n,
        Parties::Three(..) => false,
    })
}

fn full_state(chain: &ChainSpec, initial: &InitialConfig) -> Result<PureState> {
    match initial.pair() {
        (PairKind::OneMagnon, a, b) => ed::pair_state(chain, a, b),
        (PairKind::VacuumTwoMagnon, a, b) => ed::vacuum_pair_state(chain, a, b),
    }
}

fn dynamics(
    model: &Model,
    chain: ChainSpec,
    initial: &InitialConfig,
    engine: Engine,
    groups: &[Parties],
) -> Result<Box<dyn Dynamics>> {
    let (kind, a, b) = initial.pair();
    let analytic = engine != Engine::Exact
        && match (model, kind) {
            (Model::Heisenberg(_), _) | (Model::Harper(_), PairKind::OneMagnon) => true,
            (Model::Xy(_), PairKind::OneMagnon) => xy_covers(groups, chain.n_sites()),
            _ => false,
        };
    if !analytic {
        if engine == Engine::Analytic {
            return Err(Error::unsupported(
                "no closed form covers this model, state and parties",
            ));
        }
        return Ok(Box::new(ExactDynamics::new(
            ed::propagator(model, &chain)?,
            full_state(&chain, initial)?,
        )?));
    }
    Ok(match (model, kind) {
        (Model::Heisenberg(p), PairKind::OneMagnon) => Box::new(OneMagnonDynamics::new(
            HeisenbergOneMagnon { chain, params: *p },
            magnon::one_magnon_pair_state(chain, a, b)?,
        )?),
        (Model::Heisenberg(p), PairKind::VacuumTwoMagnon) => Box::new(TwoMagnonDynamics::new(
            Arc::new(TwoMagnonSector::new(&chain, p)?),
            magnon::vacuum_two_magnon_pair_state(chain, a, b)?,
        )?),
        (Model::Harper(p), _) => Box::new(OneMagnonDynamics::new(
            HarperMap::new(&chain, p),
            magnon::one_magnon_pair_state(chain, a, b)?,
        )?),
        (Model::Xy(p), _) => Box::new(XYDynamics::new(chain, *p, a, b)),
    })
}

fn process(
    model: &Model,
    chain: ChainSpec,
    initial: &InitialConfig,
    engine: Engine,
    config: &QdpConfig,
) -> Result<Box<dyn Process>> {
    let (kind, a, b) = initial.pair();
    let spec = config.spec()?;
    let axis = match spec.kind {
        QdpKind::Projective { axis } => Some(axis),
        _ => None,
    };
    if engine != Engine::Exact && kind == PairKind::OneMagnon {
        let init = || magnon::one_magnon_pair_state(chain, a, b);
        match (model, axis) {
            (Model::Heisenberg(p), Some(qdp::Z_AXIS)) => {
                return Ok(Box::new(ZOneMagnonProcess::new(
                    HeisenbergOneMagnon { chain, params: *p },
                    init()?,
                    spec.site,
                )?))
            }
            (Model::Harper(p), Some(qdp::Z_AXIS)) => {
                return Ok(Box::new(ZOneMagnonProcess::new(
                    HarperMap::new(&chain, p),
                    init()?,
                    spec.site,
                )?))
            }
            (Model::Heisenberg(p), Some(qdp::X_AXIS)) => {
                return Ok(Box::new(XHeisenbergProcess::new(
                    Arc::new(TwoMagnonSector::new(&chain, p)?),
                    init()?,
                    spec.site,
                )?))
            }
            _ => {}
        }
    }
    if engine == Engine::Analytic {
        return Err(Error::unsupported("no closed form covers this process"));
    }
    Ok(Box::new(ExactProcess::new(
        ed::propagator(model, &chain)?,
        full_state(&chain, initial)?,
        spec,
    )?))
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `<stem>.csv` and `<stem>.py` for every table; returns the CSV paths.
pub fn emit_outputs(output: &ScenarioOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::with_capacity(output.tables.len());
    for table in &output.tables {
        let csv = dir.join(format!("{}.csv", table.stem));
        fs::write(&csv, table.to_csv(&output.hash)).map_err(io_error(&csv))?;
        let script = dir.join(format!("{}.py", table.stem));
        fs::write(&script, plot_script(&table.stem)).map_err(io_error(&script))?;
        written.push(csv);
    }
    Ok(written)
}

/// Writes a plot script next to every CSV in `dir`; returns the script paths.
pub fn emit_plot_scripts(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut stems: Vec<String> = fs::read_dir(dir)
        .map_err(io_error(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    stems.sort();
    stems
        .into_iter()
        .map(|stem| {
            let path = dir.join(format!("{stem}.py"));
            fs::write(&path, plot_script(&stem)).map_err(io_error(&path))?;
            Ok(path)
        })
        .collect()
}

const PLOT_TEMPLATE: &str = r##"import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
STEM = "@STEM@"

with open(os.path.join(HERE, STEM + ".csv")) as f:
    header = f.readline().lstrip("#").strip()
    data = list(csv.DictReader(f))
_, model, params = [s.strip() for s in header.split(",", 2)]
fields = dict(kv.split("=", 1) for kv in params.split() if "=" in kv)
row_name, col_name = fields.get("axes", "row:col").split(":")
label = STEM.split("__")[0]

r = [float(d["row"]) for d in data]
c = [float(d["col"]) for d in data]
v = [float(d["value"]) for d in data]
rows, cols = sorted(set(r)), sorted(set(c))

fig, ax = plt.subplots(figsize=(6, 4.5))
if not v:
    ax.text(0.5, 0.5, "no data", ha="center", va="center")
elif len(rows) == 1:
    ax.plot(c, v)
    ax.set_xlabel(col_name)
    ax.set_ylabel(label)
else:
    if len(v) == len(rows) * len(cols):
        ri = {x: i for i, x in enumerate(rows)}
        ci = {x: i for i, x in enumerate(cols)}
        z = [[0.0] * len(cols) for _ in rows]
        for a, b, w in zip(r, c, v):
            z[ri[a]][ci[b]] = w
        mesh = ax.pcolormesh(cols, rows, z, shading="nearest", cmap="viridis")
    else:
        mesh = ax.tripcolor(c, r, v, cmap="viridis")
    fig.colorbar(mesh, ax=ax, label=label)
    ax.set_xlabel(col_name)
    ax.set_ylabel(row_name)
ax.set_title(model + " " + STEM)
fig.tight_layout()
fig.savefig(os.path.join(HERE, STEM + ".png"), dpi=150)
"##;

/// Matplotlib script that renders `<stem>.csv` from its own directory.
pub fn plot_script(stem: &str) -> String {
    PLOT_TEMPLATE.replace("@STEM@", stem)
}
