//! Line-oriented run configuration.
//!
//! ```text
//! # comment
//! seed = 7
//!
//! [problem]
//! moments = 0.4427, 0.2787, 0.2024
//! radius = 0.01
//!
//! [closure]
//! k2 = 10
//! ```
//!
//! Keys before the first section header are global. Unknown sections and
//! keys are rejected. Overrides (`KEY=VALUE` or `SECTION.KEY=VALUE`) resolve
//! a bare key against the active subcommand's section first, then the
//! shared `[problem]` section, then the global keys.

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}] (valid: {valid})")]
    UnknownSection {
        line: usize,
        name: String,
        valid: String,
    },
    #[error("{}unknown key '{key}' in [{section}] (valid keys: {valid})", at(*.line))]
    UnknownKey {
        line: usize,
        section: Section,
        key: String,
        valid: String,
    },
    #[error("{}key '{key}': cannot read '{value}' as {expected}", at(*.line))]
    Type {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{}key '{key}': {constraint}", at(*.line))]
    Constraint {
        line: usize,
        key: String,
        constraint: String,
    },
}

fn at(line: usize) -> String {
    if line == 0 {
        "override: ".to_string()
    } else {
        format!("line {line}: ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Global,
    Problem,
    Solve,
    Slater,
    Discrete,
    Closure,
    Mdp,
}

impl Section {
    pub const ALL: [Section; 7] = [
        Section::Global,
        Section::Problem,
        Section::Solve,
        Section::Slater,
        Section::Discrete,
        Section::Closure,
        Section::Mdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Section::Global => "global",
            Section::Problem => "problem",
            Section::Solve => "solve",
            Section::Slater => "slater",
            Section::Discrete => "discrete",
            Section::Closure => "closure",
            Section::Mdp => "mdp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Global => &["epsilon", "seed", "output", "threads"],
            Section::Problem => &[
                "moments",
                "radius",
                "lower",
                "upper",
                "nodes",
                "slater_degree",
                "slater_grid",
            ],
            Section::Solve => &[
                "epsilons",
                "stopping",
                "block",
                "iterations",
                "eta1",
                "eta2",
                "diameter",
            ],
            Section::Slater => &["samples"],
            Section::Discrete => &["states", "weights", "moments", "radius"],
            Section::Closure => &[
                "k1",
                "k2",
                "m0",
                "d0",
                "order",
                "kappa",
                "support_max",
                "parity_only",
                "t_end",
                "dt",
                "ssa_trajectories",
                "exact",
            ],
            Section::Mdp => &[
                "capacity",
                "lambda",
                "v",
                "p",
                "h",
                "ell1",
                "ell2",
                "n",
                "theta",
                "zeta",
                "grid_ns",
                "grid_na",
                "outer_k",
                "inner_iters",
                "eta1",
                "eta2",
                "inner_epsilon",
            ],
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Slater,
    Discrete,
    Closure,
    Mdp,
}

impl Subcommand {
    pub fn section(self) -> Section {
        match self {
            Subcommand::Solve => Section::Solve,
            Subcommand::Slater => Section::Slater,
            Subcommand::Discrete => Section::Discrete,
            Subcommand::Closure => Section::Closure,
            Subcommand::Mdp => Section::Mdp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingRule {
    APriori,
    APosteriori,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiameterRule {
    HalfSquaredNorm,
    HalfNorm,
}

/// Moment problem shared by `solve` and `slater`. Defaults to the moments
/// of the density `1 / (ln 2 (1 + x))` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub moments: Vec<f64>,
    pub radius: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub nodes: usize,
    pub slater_degree: usize,
    pub slater_grid: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let l = std::f64::consts::LN_2;
        Self {
            moments: vec![
                (1.0 - l) / l,
                (4f64.ln() - 1.0) / 4f64.ln(),
                (5.0 - 64f64.ln()) / 64f64.ln(),
            ],
            radius: vec![0.01],
            lower: 0.0,
            upper: 1.0,
            nodes: 2049,
            slater_degree: 5,
            slater_grid: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub epsilons: Vec<f64>,
    pub stopping: StoppingRule,
    pub block: usize,
    pub iterations: usize,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub diameter: DiameterRule,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.1, 0.01],
            stopping: StoppingRule::APriori,
            block: 50,
            iterations: 1000,
            eta1: None,
            eta2: None,
            diameter: DiameterRule::HalfSquaredNorm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlaterConfig {
    pub samples: usize,
}

impl Default for SlaterConfig {
    fn default() -> Self {
        Self { samples: 512 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteConfig {
    pub states: Vec<f64>,
    /// Uniform reference when empty.
    pub weights: Vec<f64>,
    pub moments: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Default for DiscreteConfig {
    fn default() -> Self {
        Self {
            states: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            weights: Vec::new(),
            moments: vec![0.45, 0.28],
            radius: vec![0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosureRunConfig {
    pub k1: f64,
    pub k2: f64,
    pub m0: u64,
    pub d0: u64,
    pub order: usize,
    pub kappa: f64,
    /// `M0 + 2 D0` when absent.
    pub support_max: Option<u64>,
    pub parity_only: bool,
    pub t_end: f64,
    pub dt: f64,
    pub ssa_trajectories: usize,
    pub exact: bool,
}

impl Default for ClosureRunConfig {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            m0: 10,
            d0: 0,
            order: 2,
            kappa: 0.01,
            support_max: None,
            parity_only: false,
            t_end: 5.0,
            dt: 0.05,
            ssa_trajectories: 100_000,
            exact: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdpConfig {
    pub capacity: f64,
    pub lambda: f64,
    pub v: f64,
    pub p: f64,
    pub h: f64,
    /// The four standard scenarios run when both are absent.
    pub ell1: Option<f64>,
    pub ell2: Option<f64>,
    pub n: usize,
    pub theta: f64,
    pub zeta: f64,
    pub grid_ns: usize,
    pub grid_na: usize,
    pub outer_k: usize,
    pub inner_iters: usize,
    pub eta1: f64,
    pub eta2: f64,
    /// Certified inner solves at this accuracy instead of a fixed budget.
    pub inner_epsilon: Option<f64>,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            capacity: 1.0,
            lambda: 0.5,
            v: 1.0,
            p: 0.5,
            h: 0.1,
            ell1: None,
            ell2: None,
            n: 10,
            theta: 3.0,
            zeta: 10f64.powf(-1.5),
            grid_ns: 101,
            grid_na: 101,
            outer_k: 1000,
            inner_iters: 1500,
            eta1: 1e-3,
            eta2: 1e-3,
            inner_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    pub config_path: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Overrides the per-subcommand accuracy when present.
    pub epsilon: Option<f64>,
    pub seed: u64,
    /// `None` defers to the environment.
    pub threads: Option<usize>,
    pub problem: ProblemConfig,
    pub solve: SolveConfig,
    pub slater: SlaterConfig,
    pub discrete: DiscreteConfig,
    pub closure: ClosureRunConfig,
    pub mdp: MdpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            config_path: None,
            output: None,
            epsilon: None,
            seed: 7,
            threads: None,
            problem: ProblemConfig::default(),
            solve: SolveConfig::default(),
            slater: SlaterConfig::default(),
            discrete: DiscreteConfig::default(),
            closure: ClosureRunConfig::default(),
            mdp: MdpConfig::default(),
        }
    }
}

/// One `--set` assignment after section resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub section: Section,
    pub key: String,
    pub value: String,
}

type Parsed<T> = std::result::Result<T, ConfigError>;

struct Value<'a> {
    key: &'a str,
    raw: &'a str,
    line: usize,
}

impl Value<'_> {
    fn type_error(&self, expected: &'static str) -> ConfigError {
        ConfigError::Type {
            line: self.line,
            key: self.key.to_string(),
            value: self.raw.to_string(),
            expected,
        }
    }

    fn constraint(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::Constraint {
            line: self.line,
            key: self.key.to_string(),
            constraint: msg.into(),
        }
    }

    fn real(&self) -> Parsed<f64> {
        let x: f64 = self
            .raw
            .parse()
            .map_err(|_| self.type_error("a real number"))?;
        if !x.is_finite() {
            return Err(self.type_error("a finite real number"));
        }
        Ok(x)
    }

    fn positive(&self) -> Parsed<f64> {
        let x = self.real()?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.constraint(format!("must be > 0, got {x}")))
        }
    }

    fn nonnegative(&self) -> Parsed<f64> {
        let x = self.real()?;
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(self.constraint(format!("must be >= 0, got {x}")))
        }
    }

    fn integer(&self) -> Parsed<u64> {
        self.raw
            .parse()
            .map_err(|_| self.type_error("a nonnegative integer"))
    }

    fn count(&self) -> Parsed<usize> {
        self.raw
            .parse()
            .map_err(|_| self.type_error("a nonnegative integer"))
    }

    fn at_least(&self, min: usize) -> Parsed<usize> {
        let n = self.count()?;
        if n >= min {
            Ok(n)
        } else {
            Err(self.constraint(format!("must be at least {min}, got {n}")))
        }
    }

    fn boolean(&self) -> Parsed<bool> {
        match self.raw {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.type_error("a boolean (true/false)")),
        }
    }

    fn list(&self) -> Parsed<Vec<f64>> {
        let items: Vec<f64> = self
            .raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| self.type_error("a comma-separated list of real numbers"))?;
        if items.is_empty() {
            return Err(self.type_error("a nonempty list"));
        }
        Ok(items)
    }

    fn positive_list(&self) -> Parsed<Vec<f64>> {
        let items = self.list()?;
        if items.iter().any(|x| *x <= 0.0) {
            return Err(self.constraint("every entry must be > 0"));
        }
        Ok(items)
    }

    fn nonnegative_list(&self) -> Parsed<Vec<f64>> {
        let items = self.list()?;
        if items.iter().any(|x| *x < 0.0) {
            return Err(self.constraint("every entry must be >= 0"));
        }
        Ok(items)
    }
}

impl RunConfig {
    /// Assigns one key. `line` is 0 for command-line overrides.
    pub fn set(&mut self, section: Section, key: &str, raw: &str, line: usize) -> Parsed<()> {
        let v = Value { key, raw, line };
        match (section, key) {
            (Section::Global, "epsilon") => self.epsilon = Some(v.positive()?),
            (Section::Global, "seed") => self.seed = v.integer()?,
            (Section::Global, "output") => {
                if raw.is_empty() {
                    return Err(v.constraint("path must not be empty"));
                }
                self.output = Some(PathBuf::from(raw));
            }
            (Section::Global, "threads") => self.threads = Some(v.count()?),

            (Section::Problem, "moments") => self.problem.moments = v.list()?,
            (Section::Problem, "radius") => self.problem.radius = v.nonnegative_list()?,
            (Section::Problem, "lower") => self.problem.lower = v.real()?,
            (Section::Problem, "upper") => self.problem.upper = v.real()?,
            (Section::Problem, "nodes") => {
                let n = v.at_least(3)?;
                if n % 2 == 0 {
                    return Err(v.constraint("Simpson rule needs an odd node count"));
                }
                self.problem.nodes = n;
            }
            (Section::Problem, "slater_degree") => self.problem.slater_degree = v.at_least(1)?,
            (Section::Problem, "slater_grid") => self.problem.slater_grid = v.at_least(2)?,

            (Section::Solve, "epsilons") => self.solve.epsilons = v.positive_list()?,
            (Section::Solve, "stopping") => {
                self.solve.stopping = match raw {
                    "apriori" => StoppingRule::APriori,
                    "aposteriori" => StoppingRule::APosteriori,
                    "fixed" => StoppingRule::Fixed,
                    _ => return Err(v.type_error("one of apriori, aposteriori, fixed")),
                }
            }
            (Section::Solve, "block") => self.solve.block = v.at_least(1)?,
            (Section::Solve, "iterations") => self.solve.iterations = v.count()?,
            (Section::Solve, "eta1") => self.solve.eta1 = Some(v.positive()?),
            (Section::Solve, "eta2") => self.solve.eta2 = Some(v.positive()?),
            (Section::Solve, "diameter") => {
                self.solve.diameter = match raw {
                    "half_squared_norm" => DiameterRule::HalfSquaredNorm,
                    "half_norm" => DiameterRule::HalfNorm,
                    _ => return Err(v.type_error("one of half_squared_norm, half_norm")),
                }
            }

            (Section::Slater, "samples") => self.slater.samples = v.at_least(2)?,

            (Section::Discrete, "states") => self.discrete.states = v.list()?,
            (Section::Discrete, "weights") => self.discrete.weights = v.positive_list()?,
            (Section::Discrete, "moments") => self.discrete.moments = v.list()?,
            (Section::Discrete, "radius") => self.discrete.radius = v.nonnegative_list()?,

            (Section::Closure, "k1") => self.closure.k1 = v.positive()?,
            (Section::Closure, "k2") => self.closure.k2 = v.nonnegative()?,
            (Section::Closure, "m0") => self.closure.m0 = v.integer()?,
            (Section::Closure, "d0") => self.closure.d0 = v.integer()?,
            (Section::Closure, "order") => {
                let n = v.count()?;
                if !(2..=3).contains(&n) {
                    return Err(v.constraint(format!("must be 2 or 3, got {n}")));
                }
                self.closure.order = n;
            }
            (Section::Closure, "kappa") => self.closure.kappa = v.positive()?,
            (Section::Closure, "support_max") => self.closure.support_max = Some(v.integer()?),
            (Section::Closure, "parity_only") => self.closure.parity_only = v.boolean()?,
            (Section::Closure, "t_end") => self.closure.t_end = v.nonnegative()?,
            (Section::Closure, "dt") => self.closure.dt = v.positive()?,
            (Section::Closure, "ssa_trajectories") => self.closure.ssa_trajectories = v.count()?,
            (Section::Closure, "exact") => self.closure.exact = v.boolean()?,

            (Section::Mdp, "capacity") => self.mdp.capacity = v.positive()?,
            (Section::Mdp, "lambda") => self.mdp.lambda = v.positive()?,
            (Section::Mdp, "v") => self.mdp.v = v.positive()?,
            (Section::Mdp, "p") => self.mdp.p = v.positive()?,
            (Section::Mdp, "h") => self.mdp.h = v.positive()?,
            (Section::Mdp, "ell1") => self.mdp.ell1 = Some(v.nonnegative()?),
            (Section::Mdp, "ell2") => self.mdp.ell2 = Some(v.nonnegative()?),
            (Section::Mdp, "n") => {
                let n = v.at_least(2)?;
                if n % 2 == 1 {
                    return Err(v.constraint(format!("basis size must be even, got {n}")));
                }
                self.mdp.n = n;
            }
            (Section::Mdp, "theta") => self.mdp.theta = v.positive()?,
            (Section::Mdp, "zeta") => self.mdp.zeta = v.positive()?,
            (Section::Mdp, "grid_ns") => self.mdp.grid_ns = v.at_least(2)?,
            (Section::Mdp, "grid_na") => self.mdp.grid_na = v.at_least(2)?,
            (Section::Mdp, "outer_k") => self.mdp.outer_k = v.count()?,
            (Section::Mdp, "inner_iters") => self.mdp.inner_iters = v.at_least(1)?,
            (Section::Mdp, "eta1") => self.mdp.eta1 = v.positive()?,
            (Section::Mdp, "eta2") => self.mdp.eta2 = v.positive()?,
            (Section::Mdp, "inner_epsilon") => self.mdp.inner_epsilon = Some(v.positive()?),

            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    section,
                    key: key.to_string(),
                    valid: section.keys().join(", "),
                })
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, ov: &Override) -> Parsed<()> {
        self.set(ov.section, &ov.key, &ov.value, 0)
    }

    /// Accuracy for single-run subcommands.
    pub fn effective_epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(0.01)
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Parses a configuration file; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Parsed<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut section = Section::Global;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = strip_comment(raw).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("unterminated section header '{s}'"),
            })?;
            let name = name.trim();
            section = Section::from_name(name).ok_or_else(|| ConfigError::UnknownSection {
                line,
                name: name.to_string(),
                valid: Section::ALL.map(Section::name).join(", "),
            })?;
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected 'key = value', got '{s}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                message: "missing key before '='".into(),
            });
        }
        cfg.set(section, key, value.trim(), line)?;
    }
    Ok(cfg)
}

/// Parses `KEY=VALUE` or `SECTION.KEY=VALUE` for the given subcommand.
pub fn parse_override(text: &str, active: Subcommand) -> Parsed<Override> {
    let (lhs, value) = text.split_once('=').ok_or_else(|| ConfigError::Syntax {
        line: 0,
        message: format!("override '{text}' is not of the form KEY=VALUE"),
    })?;
    let lhs = lhs.trim();
    let value = value.trim().to_string();
    if let Some((sec, key)) = lhs.split_once('.') {
        let section =
            Section::from_name(sec.trim()).ok_or_else(|| ConfigError::UnknownSection {
                line: 0,
                name: sec.trim().to_string(),
                valid: Section::ALL.map(Section::name).join(", "),
            })?;
        let key = key.trim();
        if !section.keys().contains(&key) {
            return Err(ConfigError::UnknownKey {
                line: 0,
                section,
                key: key.to_string(),
                valid: section.keys().join(", "),
            });
        }
        return Ok(Override {
            section,
            key: key.to_string(),
            value,
        });
    }
    let mut order = vec![active.section()];
    if matches!(active, Subcommand::Solve | Subcommand::Slater) {
        order.push(Section::Problem);
    }
    order.push(Section::Global);
    let section = order
        .iter()
        .copied()
        .find(|s| s.keys().contains(&lhs))
        .ok_or_else(|| ConfigError::UnknownKey {
            line: 0,
            section: active.section(),
            key: lhs.to_string(),
            valid: order
                .iter()
                .flat_map(|s| s.keys().iter().copied())
                .collect::<Vec<_>>()
                .join(", "),
        })?;
    Ok(Override {
        section,
        key: lhs.to_string(),
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.closure.kappa, 0.01);
        assert_eq!(cfg.mdp.theta, 3.0);
        assert_eq!(cfg.mdp.n, 10);
        assert_eq!(cfg.mdp.eta1, 1e-3);
        assert!((cfg.mdp.zeta - 0.0316227766).abs() < 1e-9);
    }

    #[test]
    fn global_epsilon() {
        let cfg = parse_config("epsilon=0.01").unwrap();
        assert_eq!(cfg.epsilon, Some(0.01));
    }

    #[test]
    fn negative_epsilon_names_key() {
        let err = parse_config("epsilon=-1").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epsilon") && msg.contains("> 0"), "{msg}");
        assert!(matches!(err, ConfigError::Constraint { line: 1, .. }));
    }

    #[test]
    fn sections_and_comments() {
        let text =
            "# header\nseed = 3 ; trailing\n\n[closure]\nk2 = 10\norder=3\n[mdp]\nell1 = 0.5\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.closure.k2, 10.0);
        assert_eq!(cfg.closure.order, 3);
        assert_eq!(cfg.mdp.ell1, Some(0.5));
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = parse_config("[closure]\nkappa=0.1\nbogus=1").unwrap_err();
        match &err {
            ConfigError::UnknownKey { line, valid, .. } => {
                assert_eq!(*line, 3);
                assert!(valid.contains("kappa"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_reports_line() {
        let err = parse_config("\n[mdp]\nn = ten").unwrap_err();
        assert!(matches!(err, ConfigError::Type { line: 3, .. }));
        assert!(err.to_string().starts_with("line 3"));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse_config("[solve"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[nope]"),
            Err(ConfigError::UnknownSection { .. })
        ));
        assert!(matches!(
            parse_config("justakey"),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(
            parse_config("=3"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn override_resolution() {
        let o = parse_override("kappa=0.1", Subcommand::Closure).unwrap();
        assert_eq!(o.section, Section::Closure);
        let o = parse_override("radius=0.005", Subcommand::Solve).unwrap();
        assert_eq!(o.section, Section::Problem);
        let o = parse_override("seed=9", Subcommand::Mdp).unwrap();
        assert_eq!(o.section, Section::Global);
        let o = parse_override("mdp.n = 6", Subcommand::Solve).unwrap();
        assert_eq!(
            (o.section, o.key.as_str(), o.value.as_str()),
            (Section::Mdp, "n", "6")
        );
        assert!(parse_override("kappa=0.1", Subcommand::Mdp).is_err());
        assert!(parse_override("kappa", Subcommand::Closure).is_err());

        let mut cfg = RunConfig::default();
        cfg.apply(&parse_override("n=7", Subcommand::Mdp).unwrap())
            .unwrap_err();
        cfg.apply(&parse_override("n=6", Subcommand::Mdp).unwrap())
            .unwrap();
        assert_eq!(cfg.mdp.n, 6);
    }

    #[test]
    fn lists_parse() {
        let cfg = parse_config("[problem]\nmoments = 0.5, 0.3\nradius=0.01,0.02").unwrap();
        assert_eq!(cfg.problem.moments, vec![0.5, 0.3]);
        assert_eq!(cfg.problem.radius, vec![0.01, 0.02]);
        assert!(parse_config("[problem]\nmoments = 0.5,,0.3").is_err());
        assert!(parse_config("[problem]\nnodes = 2048").is_err());
    }
}
