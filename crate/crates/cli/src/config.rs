//! Experiment configuration: flat `key = value` sections.
//!
//! Grammar, one construct per line:
//!
//! ```text
//! # comment            (also `;`)
//! [section]            section names: flow initial solver budget diagnostics output sweep
//! key = value          lists are comma separated; `inf` is accepted for exponents
//! ```
//!
//! Keys may not repeat within a section and unknown sections or keys are
//! rejected. Every error names the file and line.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use smix_core::diagnostics::FitWindow;
use smix_core::flow::VelocityProtocol;
use smix_core::initial::InitialCondition;
use smix_core::kr::KrMethod;
use smix_core::solver::{AdvectionPath, Scheme, SolverConfig};

use crate::error::{CliError, CliResult};

const SECTIONS: [&str; 7] = ["flow", "initial", "solver", "budget", "diagnostics", "output", "sweep"];

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// Source line; 0 for values set by `--override`.
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub path: String,
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str, path: &str) -> CliResult<Self> {
        let err = |line: usize, message: String| CliError::ConfigAt { path: path.to_string(), line, message };
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') || s.starts_with(';') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(err(line, format!("unterminated section header {s:?}")));
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(line, format!("unknown section [{name}]; expected one of {}", SECTIONS.join(", "))));
                }
                if let Some(prev) = sections.iter().find(|x| x.name == name) {
                    return Err(err(line, format!("section [{name}] repeats (first at line {})", prev.line)));
                }
                sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return Err(err(line, format!("expected `key = value`, got {s:?}")));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                return Err(err(line, format!("invalid key {key:?}")));
            }
            let Some(section) = sections.last_mut() else {
                return Err(err(line, "key outside of any section".to_string()));
            };
            if let Some(prev) = section.entries.iter().find(|e| e.key == key) {
                return Err(err(line, format!("key {key:?} repeats (first at line {})", prev.line)));
            }
            section.entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line });
        }
        Ok(Document { path: path.to_string(), sections })
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> CliResult<()> {
        let bad = || CliError::Config(format!("override {spec:?} must look like section.key=value"));
        let (lhs, value) = spec.split_once('=').ok_or_else(bad)?;
        let (section, key) = lhs.trim().split_once('.').ok_or_else(bad)?;
        let (section, key) = (section.trim(), key.trim());
        if !SECTIONS.contains(&section) {
            return Err(CliError::Config(format!("override names unknown section [{section}]")));
        }
        let pos = match self.sections.iter().position(|s| s.name == section) {
            Some(p) => p,
            None => {
                self.sections.push(Section { name: section.to_string(), line: 0, entries: Vec::new() });
                self.sections.len() - 1
            }
        };
        let entries = &mut self.sections[pos].entries;
        match entries.iter_mut().find(|e| e.key == key) {
            Some(e) => {
                e.value = value.trim().to_string();
                e.line = 0;
            }
            None => entries.push(Entry { key: key.to_string(), value: value.trim().to_string(), line: 0 }),
        }
        Ok(())
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Typed access to one section; remembers which keys were read so the rest
/// can be reported as unknown.
struct Reader<'a> {
    path: &'a str,
    section: Option<&'a Section>,
    name: &'a str,
    used: BTreeSet<&'a str>,
}

impl<'a> Reader<'a> {
    fn new(doc: &'a Document, name: &'a str) -> Self {
        Reader { path: &doc.path, section: doc.section(name), name, used: BTreeSet::new() }
    }

    fn error_at(&self, line: usize, key: &str, message: String) -> CliError {
        if line == 0 {
            CliError::Config(format!("override {}.{key}: {message}", self.name))
        } else {
            CliError::ConfigAt { path: self.path.to_string(), line, message: format!("{key}: {message}") }
        }
    }

    fn header_error(&self, message: String) -> CliError {
        match self.section {
            Some(s) if s.line > 0 => CliError::ConfigAt { path: self.path.to_string(), line: s.line, message },
            _ => CliError::Config(message),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Entry> {
        self.used.insert(key);
        self.section?.entries.iter().find(|e| e.key == key)
    }

    fn parse<T>(&mut self, key: &'a str, what: &str, f: impl Fn(&str) -> Option<T>) -> CliResult<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .ok_or_else(|| self.error_at(e.line, key, format!("cannot parse {:?} as {what}", e.value))),
        }
    }

    fn f64(&mut self, key: &'a str) -> CliResult<Option<f64>> {
        self.parse(key, "a number", |s| s.parse::<f64>().ok().filter(|v| !v.is_nan()))
    }

    fn f64_list(&mut self, key: &'a str) -> CliResult<Option<Vec<f64>>> {
        self.parse(key, "a comma-separated list of numbers", |s| {
            s.split(',').map(|t| t.trim().parse::<f64>().ok().filter(|v| !v.is_nan())).collect()
        })
    }

    fn usize(&mut self, key: &'a str) -> CliResult<Option<usize>> {
        self.parse(key, "a nonnegative integer", |s| s.parse::<usize>().ok())
    }

    fn u64(&mut self, key: &'a str) -> CliResult<Option<u64>> {
        self.parse(key, "an unsigned integer", |s| s.parse::<u64>().ok())
    }

    fn bool(&mut self, key: &'a str) -> CliResult<Option<bool>> {
        self.parse(key, "true or false", |s| s.parse::<bool>().ok())
    }

    fn string(&mut self, key: &'a str) -> Option<String> {
        self.raw(key).map(|e| e.value.clone())
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> CliResult<T> {
        v.ok_or_else(|| self.header_error(format!("[{}] needs `{key}`", self.name)))
    }

    fn check(&self, key: &'a str, ok: bool, message: &str) -> CliResult<()> {
        if ok {
            return Ok(());
        }
        let line = self.section.and_then(|s| s.entries.iter().find(|e| e.key == key)).map_or(0, |e| e.line);
        Err(self.error_at(line, key, message.to_string()))
    }

    fn finish(self) -> CliResult<()> {
        if let Some(s) = self.section {
            if let Some(e) = s.entries.iter().find(|e| !self.used.contains(e.key.as_str())) {
                return Err(self.error_at(e.line, &e.key, format!("unknown key in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeChoice {
    /// Integrating-factor RK4 for `κ > 0`, semi-Lagrangian for `κ = 0`.
    Auto,
    Fixed(Scheme),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSection {
    /// One grid size for every diffusivity, or one per entry of `kappas`.
    pub n: Vec<usize>,
    pub dt: f64,
    pub kappas: Vec<f64>,
    pub horizon: f64,
    pub diagnostic_cadence: usize,
    pub snapshot_cadence: Option<usize>,
    pub scheme: SchemeChoice,
    pub dealias: bool,
    pub q: f64,
    pub advection: AdvectionPath,
    pub allow_underresolved: bool,
    pub resolution_guard: bool,
}

impl SolverSection {
    /// Grid size of the `index`-th diffusivity.
    pub fn n_at(&self, index: usize) -> usize {
        if self.n.len() == 1 {
            self.n[0]
        } else {
            self.n[index]
        }
    }

    /// Solver settings for the `index`-th diffusivity of the list.
    pub fn run_config(&self, index: usize) -> SolverConfig {
        let mut c = SolverConfig::new(self.n_at(index), self.dt, self.kappas[index]);
        if let SchemeChoice::Fixed(s) = self.scheme {
            c.scheme = s;
        }
        c.dealias = self.dealias;
        c.diagnostic_cadence = self.diagnostic_cadence;
        c.snapshot_cadence = self.snapshot_cadence;
        c.q = self.q;
        c.advection = self.advection;
        c.allow_underresolved = self.allow_underresolved;
        c.resolution_guard = self.resolution_guard;
        c
    }

    /// The section restricted to one diffusivity.
    pub fn single(&self, index: usize) -> SolverSection {
        SolverSection { n: vec![self.n_at(index)], kappas: vec![self.kappas[index]], ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetSection {
    pub p: f64,
    pub s: f64,
    pub horizon: f64,
    /// Rescale the flow so the budget equals one.
    pub normalize: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsSection {
    pub norms: Vec<String>,
    pub deltas: Vec<f64>,
    pub window: FitWindow,
    pub kr_method: KrMethod,
    pub kr_coarse: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            norms: vec!["l2".into(), "h1neg".into()],
            deltas: vec![0.1],
            window: FitWindow::default(),
            kr_method: KrMethod::ExactFlow,
            kr_coarse: 32,
            epsilon: 1e-3,
            alpha: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Snapshots,
}

impl OutputFormat {
    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Snapshots => "snapshots",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub directory: Option<String>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: None, formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepMode {
    Run,
    /// No simulation: rates follow `D(κ) = prefactor·log^{−β}(1/κ)`.
    Synthetic { beta: f64, prefactor: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub flow: VelocityProtocol,
    pub initial: InitialCondition,
    pub solver: SolverSection,
    pub budget: Option<BudgetSection>,
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
    pub sweep: SweepMode,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &str) -> CliResult<Self> {
        Self::from_document(&Document::parse(text, path)?)
    }

    pub fn from_document(doc: &Document) -> CliResult<Self> {
        let flow = parse_flow(doc)?;
        let initial = parse_initial(doc)?;
        let solver = parse_solver(doc)?;
        let budget = parse_budget(doc)?;
        let diagnostics = parse_diagnostics(doc)?;
        let output = parse_output(doc)?;
        let sweep = parse_sweep(doc)?;
        let cfg = ExperimentConfig { flow, initial, solver, budget, diagnostics, output, sweep };
        Ok(cfg)
    }

    /// Replaces every seed (flow phases and random initial data).
    pub fn set_seed(&mut self, seed: u64) {
        if let smix_core::flow::FlowKind::AlternatingSine { phases: smix_core::flow::PhaseSchedule::Seeded { seed: s }, .. } =
            &mut self.flow.kind
        {
            *s = seed;
        }
        if let InitialCondition::RandomModes { seed: s, .. } = &mut self.initial {
            *s = seed;
        }
    }

    pub fn seed(&self) -> Option<u64> {
        if let smix_core::flow::FlowKind::AlternatingSine { phases: smix_core::flow::PhaseSchedule::Seeded { seed }, .. } =
            &self.flow.kind
        {
            return Some(*seed);
        }
        match self.initial {
            InitialCondition::RandomModes { seed, .. } => Some(seed),
            _ => None,
        }
    }

    /// The flow actually used, normalised to a unit budget if requested.
    pub fn protocol(&self) -> CliResult<VelocityProtocol> {
        match self.budget {
            Some(b) if b.normalize => Ok(smix_core::flow::normalize_to_budget(&self.flow, b.p, b.s, b.horizon)?.0),
            _ => Ok(self.flow.clone()),
        }
    }

    /// Canonical text; parsing it gives back an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = self.flow.config_block();
        s.push_str("\n[initial]\n");
        match &self.initial {
            InitialCondition::SineX => s.push_str("kind = sine-x\n"),
            InitialCondition::TwoModes => s.push_str("kind = two-modes\n"),
            InitialCondition::RandomModes { seed, kmax } => {
                let _ = write!(s, "kind = random-modes\nseed = {seed}\nkmax = {kmax}\n");
            }
        }
        let v = &self.solver;
        let _ = write!(
            s,
            "\n[solver]\nn = {}\ndt = {}\nkappa = {}\nhorizon = {}\ndiagnostic_cadence = {}\nsnapshot_cadence = {}\nscheme = {}\ndealias = {}\nq = {:?}\nadvection = {}\nallow_underresolved = {}\nresolution_guard = {}\n",
            v.n.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            join(&[v.dt]),
            join(&v.kappas),
            join(&[v.horizon]),
            v.diagnostic_cadence,
            v.snapshot_cadence.map_or("none".to_string(), |c| c.to_string()),
            match v.scheme {
                SchemeChoice::Auto => "auto",
                SchemeChoice::Fixed(s) => s.name(),
            },
            v.dealias,
            v.q,
            match v.advection {
                AdvectionPath::Auto => "auto",
                AdvectionPath::Modal => "modal",
                AdvectionPath::Pseudospectral => "pseudospectral",
            },
            v.allow_underresolved,
            v.resolution_guard,
        );
        if let Some(b) = self.budget {
            let _ = write!(s, "\n[budget]\np = {:?}\ns = {:?}\nhorizon = {:?}\nnormalize = {}\n", b.p, b.s, b.horizon, b.normalize);
        }
        let d = &self.diagnostics;
        let window = match d.window {
            FitWindow::Full => "full".to_string(),
            FitWindow::Explicit { start, end } => format!("{start:?},{end:?}"),
            FitWindow::Late { .. } => "late".to_string(),
        };
        let _ = write!(
            s,
            "\n[diagnostics]\nnorms = {}\ndeltas = {}\nfit_window = {window}\n",
            d.norms.join(","),
            join(&d.deltas)
        );
        if let FitWindow::Late { efoldings, min_r_squared } = d.window {
            let _ = write!(s, "efoldings = {efoldings:?}\nmin_r_squared = {min_r_squared:?}\n");
        }
        let _ = write!(
            s,
            "kr_method = {}\nkr_coarse = {}\nepsilon = {:?}\nalpha = {:?}\n",
            match d.kr_method {
                KrMethod::ExactFlow => "exact-flow",
                KrMethod::Entropic => "entropic",
            },
            d.kr_coarse,
            d.epsilon,
            d.alpha
        );
        s.push_str("\n[output]\n");
        if let Some(dir) = &self.output.directory {
            let _ = writeln!(s, "directory = {dir}");
        }
        let formats: Vec<&str> = self.output.formats.iter().map(|f| f.name()).collect();
        let _ = writeln!(s, "formats = {}", formats.join(","));
        match self.sweep {
            SweepMode::Run => s.push_str("\n[sweep]\nmode = run\n"),
            SweepMode::Synthetic { beta, prefactor } => {
                let _ = write!(s, "\n[sweep]\nmode = synthetic\nsynthetic_beta = {beta:?}\nsynthetic_prefactor = {prefactor:?}\n");
            }
        }
        s
    }
}

fn parse_flow(doc: &Document) -> CliResult<VelocityProtocol> {
    let Some(section) = doc.section("flow") else {
        return Err(CliError::Config(format!("{}: missing [flow] section", doc.path)));
    };
    let entries = section.entries.iter().map(|e| (e.key.as_str(), e.value.as_str()));
    VelocityProtocol::from_entries(entries).map_err(|err| {
        let message = match &err {
            smix_core::Error::Config(m) | smix_core::Error::Domain(m) => m.clone(),
            other => other.to_string(),
        };
        // anchor at the key the message starts with, else at the header
        let line = section
            .entries
            .iter()
            .find(|e| message.starts_with(&format!("{}:", e.key)) || message.contains(&format!("{:?}", e.key)))
            .map_or(section.line, |e| e.line);
        if line == 0 {
            CliError::Config(format!("[flow]: {message}"))
        } else {
            CliError::ConfigAt { path: doc.path.clone(), line, message: format!("[flow] {message}") }
        }
    })
}

fn parse_initial(doc: &Document) -> CliResult<InitialCondition> {
    let mut r = Reader::new(doc, "initial");
    let kind = r.string("kind").unwrap_or_else(|| "sine-x".into());
    let seed = r.u64("seed")?;
    let kmax = r.usize("kmax")?;
    let ic = match kind.as_str() {
        "sine-x" => InitialCondition::SineX,
        "two-modes" => InitialCondition::TwoModes,
        "random-modes" => {
            let kmax = kmax.unwrap_or(4);
            r.check("kmax", kmax >= 1 && kmax <= 64, "must lie in 1..=64")?;
            InitialCondition::RandomModes { seed: seed.unwrap_or(0), kmax: kmax as u32 }
        }
        other => {
            r.check("kind", false, &format!("unknown initial condition {other:?} (sine-x, two-modes, random-modes)"))?;
            unreachable!()
        }
    };
    if !matches!(ic, InitialCondition::RandomModes { .. }) {
        r.check("seed", seed.is_none(), "only random-modes takes a seed")?;
        r.check("kmax", kmax.is_none(), "only random-modes takes kmax")?;
    }
    r.finish()?;
    Ok(ic)
}

fn parse_solver(doc: &Document) -> CliResult<SolverSection> {
    let mut r = Reader::new(doc, "solver");
    if r.section.is_none() {
        return Err(CliError::Config(format!("{}: missing [solver] section", doc.path)));
    }
    let n = r.parse("n", "a comma-separated list of grid sizes", |s| {
        s.split(',').map(|t| t.trim().parse::<usize>().ok()).collect::<Option<Vec<usize>>>()
    })?;
    let n = r.require("n", n)?;
    r.check("n", n.iter().all(|n| *n >= 8 && n.is_power_of_two()), "grid sizes must be powers of two, at least 8")?;
    let dt = r.f64("dt")?;
    let dt = r.require("dt", dt)?;
    r.check("dt", dt > 0.0 && dt.is_finite(), "must be positive")?;
    let kappas = r.f64_list("kappa")?;
    let kappas = r.require("kappa", kappas)?;
    r.check("kappa", kappas.iter().all(|k| *k >= 0.0 && k.is_finite()), "diffusivities must be nonnegative")?;
    r.check("n", n.len() == 1 || n.len() == kappas.len(), "give one grid size or one per kappa")?;
    let horizon = r.f64("horizon")?;
    let horizon = r.require("horizon", horizon)?;
    r.check("horizon", horizon >= 0.0 && horizon.is_finite(), "must be nonnegative")?;
    let diagnostic_cadence = r.usize("diagnostic_cadence")?.unwrap_or(10);
    r.check("diagnostic_cadence", diagnostic_cadence >= 1, "must be at least 1")?;
    let snapshot_cadence = match r.string("snapshot_cadence").as_deref() {
        None | Some("none") => None,
        Some(_) => {
            r.used.remove("snapshot_cadence");
            let c = r.usize("snapshot_cadence")?.expect("present");
            r.check("snapshot_cadence", c >= 1, "must be at least 1 or `none`")?;
            Some(c)
        }
    };
    let scheme = match r.string("scheme").as_deref() {
        None | Some("auto") => SchemeChoice::Auto,
        Some("integrating-factor-rk4") | Some("if-rk4") => SchemeChoice::Fixed(Scheme::IntegratingFactorRk4),
        Some("semi-lagrangian") => SchemeChoice::Fixed(Scheme::SemiLagrangian),
        Some(other) => {
            r.check("scheme", false, &format!("unknown scheme {other:?} (auto, integrating-factor-rk4, semi-lagrangian)"))?;
            unreachable!()
        }
    };
    let dealias = r.bool("dealias")?.unwrap_or(true);
    let q = r.f64("q")?.unwrap_or(4.0);
    r.check("q", q >= 1.0, "must be at least 1")?;
    let advection = match r.string("advection").as_deref() {
        None | Some("auto") => AdvectionPath::Auto,
        Some("modal") => AdvectionPath::Modal,
        Some("pseudospectral") => AdvectionPath::Pseudospectral,
        Some(other) => {
            r.check("advection", false, &format!("unknown advection path {other:?} (auto, modal, pseudospectral)"))?;
            unreachable!()
        }
    };
    let allow_underresolved = r.bool("allow_underresolved")?.unwrap_or(false);
    let resolution_guard = r.bool("resolution_guard")?.unwrap_or(true);
    r.finish()?;
    Ok(SolverSection {
        n,
        dt,
        kappas,
        horizon,
        diagnostic_cadence,
        snapshot_cadence,
        scheme,
        dealias,
        q,
        advection,
        allow_underresolved,
        resolution_guard,
    })
}

fn parse_budget(doc: &Document) -> CliResult<Option<BudgetSection>> {
    let mut r = Reader::new(doc, "budget");
    if r.section.is_none() {
        return Ok(None);
    }
    let p = r.f64("p")?.unwrap_or(f64::INFINITY);
    r.check("p", p >= 1.0, "must lie in [1, inf]")?;
    let s = r.f64("s")?.unwrap_or(f64::INFINITY);
    r.check("s", s >= 1.0, "must lie in [1, inf]")?;
    let horizon = r.f64("horizon")?;
    let horizon = r.require("horizon", horizon)?;
    r.check("horizon", horizon > 0.0 && horizon.is_finite(), "must be positive")?;
    let normalize = r.bool("normalize")?.unwrap_or(true);
    r.finish()?;
    Ok(Some(BudgetSection { p, s, horizon, normalize }))
}

fn parse_diagnostics(doc: &Document) -> CliResult<DiagnosticsSection> {
    let mut r = Reader::new(doc, "diagnostics");
    let mut d = DiagnosticsSection::default();
    if let Some(norms) = r.string("norms") {
        d.norms = norms.split(',').map(|s| s.trim().to_string()).collect();
        let known = ["l2", "lq", "h1neg", "grad_l2", "grad_l1"];
        let bad = d.norms.iter().find(|n| !known.contains(&n.as_str())).cloned();
        r.check("norms", bad.is_none(), &format!("unknown norm {:?} ({})", bad.unwrap_or_default(), known.join(", ")))?;
    }
    if let Some(deltas) = r.f64_list("deltas")? {
        r.check("deltas", deltas.iter().all(|x| *x > 0.0 && x.is_finite()), "must be positive")?;
        d.deltas = deltas;
    }
    let efoldings = r.f64("efoldings")?;
    let min_r2 = r.f64("min_r_squared")?;
    match r.string("fit_window").as_deref() {
        None | Some("late") => {
            let e = efoldings.unwrap_or(2.0);
            let m = min_r2.unwrap_or(0.95);
            r.check("efoldings", e > 0.0, "must be positive")?;
            r.check("min_r_squared", (0.0..=1.0).contains(&m), "must lie in [0, 1]")?;
            d.window = FitWindow::Late { efoldings: e, min_r_squared: m };
        }
        Some("full") => d.window = FitWindow::Full,
        Some(other) => {
            let parts: Vec<Option<f64>> = other.split(',').map(|t| t.trim().parse::<f64>().ok()).collect();
            match parts.as_slice() {
                [Some(a), Some(b)] if a < b => d.window = FitWindow::Explicit { start: *a, end: *b },
                _ => r.check("fit_window", false, "expected late, full or `start,end` with start < end")?,
            }
        }
    }
    if !matches!(d.window, FitWindow::Late { .. }) {
        r.check("efoldings", efoldings.is_none(), "only applies to the late window")?;
        r.check("min_r_squared", min_r2.is_none(), "only applies to the late window")?;
    }
    match r.string("kr_method").as_deref() {
        None | Some("exact-flow") | Some("exact") => {}
        Some("entropic") => d.kr_method = KrMethod::Entropic,
        Some(other) => r.check("kr_method", false, &format!("unknown method {other:?} (exact-flow, entropic)"))?,
    }
    if let Some(m) = r.usize("kr_coarse")? {
        r.check("kr_coarse", m.is_power_of_two() && m <= 64, "must be a power of two up to 64")?;
        d.kr_coarse = m;
    }
    if let Some(e) = r.f64("epsilon")? {
        r.check("epsilon", e > 0.0, "must be positive")?;
        d.epsilon = e;
    }
    if let Some(a) = r.f64("alpha")? {
        r.check("alpha", a > 0.0 && a < 1.0, "must lie in (0, 1)")?;
        d.alpha = a;
    }
    r.finish()?;
    Ok(d)
}

fn parse_output(doc: &Document) -> CliResult<OutputSection> {
    let mut r = Reader::new(doc, "output");
    let mut o = OutputSection::default();
    o.directory = r.string("directory");
    if let Some(list) = r.string("formats") {
        let mut formats = Vec::new();
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let f = match item {
                "csv" => OutputFormat::Csv,
                "json" => OutputFormat::Json,
                "snapshots" => OutputFormat::Snapshots,
                other => {
                    r.check("formats", false, &format!("unknown format {other:?} (csv, json, snapshots)"))?;
                    unreachable!()
                }
            };
            if !formats.contains(&f) {
                formats.push(f);
            }
        }
        o.formats = formats;
    }
    r.finish()?;
    Ok(o)
}

fn parse_sweep(doc: &Document) -> CliResult<SweepMode> {
    let mut r = Reader::new(doc, "sweep");
    let beta = r.f64("synthetic_beta")?;
    let prefactor = r.f64("synthetic_prefactor")?;
    let mode = match r.string("mode").as_deref() {
        None | Some("run") => {
            r.check("synthetic_beta", beta.is_none(), "only applies to mode = synthetic")?;
            r.check("synthetic_prefactor", prefactor.is_none(), "only applies to mode = synthetic")?;
            SweepMode::Run
        }
        Some("synthetic") => {
            let beta = beta.unwrap_or(1.0);
            let prefactor = prefactor.unwrap_or(1.0);
            r.check("synthetic_prefactor", prefactor > 0.0, "must be positive")?;
            SweepMode::Synthetic { beta, prefactor }
        }
        Some(other) => {
            r.check("mode", false, &format!("unknown sweep mode {other:?} (run, synthetic)"))?;
            unreachable!()
        }
    };
    r.finish()?;
    Ok(mode)
}

#[cfg(test)]
mod tests;
