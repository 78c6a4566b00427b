//! Batch front end behind the `carleson` binary.
//!
//! Reports are `key: value` lines in a fixed order with rationals as `p/q`
//! and cubes as `level:j1,j2`, so identical inputs give identical bytes.
//!
//! Exit codes: 0 pass, 1 input or validation error, 2 hypothesis violation
//! (or an oracle counterexample), 3 an audit that ran but did not pass.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use crate::christ::{audit_christ_properties, build_christ_tree};
use crate::error::{Error, Result};
use crate::extrapolation::{audit_bound, bad_set, build_stopping_family, local_excess};
use crate::generate::{generate, Kind, Params};
use crate::io;
use crate::measures::{carleson_constant, top_constant, TreeMeasure};
use crate::oracle;
use crate::rational::{format_rational, is_positive, parse_rational, Rational};
use crate::sawtooth::{reduce_to_dyadic, verify_set_identity};
use crate::tree::{CubeId, NodeId, WeightedTree};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_AUDIT_FAILED: i32 = 3;

fn rational_arg(s: &str) -> std::result::Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn cube_arg(s: &str) -> std::result::Result<CubeId, String> {
    io::parse_cube(s).map_err(|e| e.to_string())
}

#[derive(Parser, Clone, Debug)]
#[command(name = "carleson", version, about = "Stopping-time constructions and Carleson audits with exact arithmetic")]
pub struct RunConfig {
    #[command(subcommand)]
    pub mode: Mode,
    /// Dimension (generators, sawtooth, Christ audits).
    #[arg(long = "d", global = true)]
    pub d: Option<usize>,
    /// Tree depth; maximum depth for Christ trees.
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Stopping threshold, as p/q.
    #[arg(long, global = true, value_parser = rational_arg)]
    pub delta: Option<Rational>,
    /// The constant C of the hypothesis nu(U) <= C sigma.
    #[arg(long, global = true, value_parser = rational_arg)]
    pub capc: Option<Rational>,
    /// Generator seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Append one line per construction step to the report.
    #[arg(long, global = true)]
    pub trace: bool,
    /// Write the report (or generated file) here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Debug)]
pub enum Mode {
    /// Carleson and top-layer constants of a tree measure.
    Analyze {
        measure: PathBuf,
        #[command(flatten)]
        christ: ChristSource,
    },
    /// Build the generations and audit the extrapolation bound.
    Extrapolate {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[command(flatten)]
        christ: ChristSource,
    },
    /// Check the sawtooth set identity and the atomic-to-tree reduction.
    Sawtooth {
        /// Atomic measure nu.
        #[arg(long)]
        atoms: PathBuf,
        /// Atomic measure mu (default: empty).
        #[arg(long)]
        mu_atoms: Option<PathBuf>,
        /// Disjoint cube family (default: empty).
        #[arg(long)]
        family: Option<PathBuf>,
        /// Base cube as level:j1,j2 (default: the unit cube).
        #[arg(long, value_parser = cube_arg)]
        cube: Option<CubeId>,
    },
    /// Build Christ cubes on a metric space and audit their constants.
    Christ {
        metric: PathBuf,
        /// Scale ratio N: level j has scale 2^(-N j).
        #[arg(long, default_value_t = 1)]
        scale: u32,
        /// Also write a christ-ref measure file with every node at mass 0.
        #[arg(long)]
        template: Option<PathBuf>,
    },
    /// Exhaustive checks on trees of at most 31 nodes.
    Oracle {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        nu: Option<PathBuf>,
        #[command(flatten)]
        christ: ChristSource,
    },
    /// Write a seeded random tree measure.
    Generate {
        /// product, subtree-singular or cascade.
        #[arg(long)]
        kind: Kind,
        /// product: target Carleson constant.
        #[arg(long, value_parser = rational_arg)]
        target: Option<Rational>,
        /// subtree-singular: cube holding the mass, level:j1,j2.
        #[arg(long, value_parser = cube_arg)]
        node: Option<CubeId>,
        /// cascade: even splits.
        #[arg(long)]
        uniform: bool,
    },
}

/// Where `christ-ref` measure files get their tree from.
#[derive(clap::Args, Clone, Debug, Default)]
pub struct ChristSource {
    /// Metric space the christ-ref measures refer to.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub scale: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub report: String,
}

const DEFAULT_CHRIST_DEPTH: u32 = 12;

struct Report(String);

impl Report {
    fn new(mode: &str) -> Self {
        let mut r = Report(String::new());
        r.line("mode", mode);
        r
    }

    fn line(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key}: {value}");
    }

    fn rational(&mut self, key: &str, value: &Rational) {
        self.line(key, format_rational(value));
    }

    fn raw(&mut self, text: &str) {
        self.0.push_str(text);
        self.0.push('\n');
    }
}

fn labels(tree: &WeightedTree, nodes: impl IntoIterator<Item = NodeId>) -> String {
    let parts: Vec<String> = nodes.into_iter().map(|v| tree.label(v).to_string()).collect();
    format!("{{{}}}", parts.join(" "))
}

fn require<'a, T>(value: &'a Option<T>, flag: &str, mode: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Precondition(format!("{mode} needs --{flag}")))
}

fn delta_of(config: &RunConfig, mode: &str) -> Result<Rational> {
    let delta = require(&config.delta, "delta", mode)?.clone();
    if !is_positive(&delta) {
        return Err(Error::Domain("--delta must be positive".into()));
    }
    Ok(delta)
}

fn christ_tree(source: &ChristSource, depth: Option<u32>) -> Result<Option<Arc<WeightedTree>>> {
    let Some(path) = &source.metric else { return Ok(None) };
    let space = io::parse_metric(&io::read_text(path)?)?;
    let tree = build_christ_tree(&space, source.scale, depth.unwrap_or(DEFAULT_CHRIST_DEPTH))?;
    Ok(Some(Arc::new(tree.to_weighted_tree()?.0)))
}

fn load_measure(path: &Path, christ: Option<&Arc<WeightedTree>>) -> Result<TreeMeasure> {
    let text = io::read_text(path)?;
    io::parse_measure(&text, christ).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Load `mu` and `nu` onto one shared tree.
fn load_pair(mu: &Path, nu: &Path, christ: Option<&Arc<WeightedTree>>) -> Result<(TreeMeasure, TreeMeasure)> {
    let mu = load_measure(mu, christ)?;
    let nu_text = io::read_text(nu)?;
    let file = io::parse_measure_file(&nu_text).map_err(|e| Error::Parse(format!("{}: {e}", nu.display())))?;
    let tree = mu.shared_tree().clone();
    let expected = io::measure_file_tree(&file, christ)?;
    if expected.len() != tree.len() || expected.kind() != tree.kind() {
        return Err(Error::Domain("mu and nu files describe different trees".into()));
    }
    let nu = io::measure_from_file(&file, tree)?;
    Ok((mu, nu))
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    match &config.mode {
        Mode::Analyze { measure, christ } => analyze(config, measure, christ),
        Mode::Extrapolate { mu, nu, christ } => extrapolate(config, mu, nu, christ),
        Mode::Sawtooth {
            atoms,
            mu_atoms,
            family,
            cube,
        } => sawtooth(config, atoms, mu_atoms.as_deref(), family.as_deref(), cube.as_ref()),
        Mode::Christ { metric, scale, template } => christ(config, metric, *scale, template.as_deref()),
        Mode::Oracle { mu, nu, christ } => oracle_mode(config, mu, nu.as_deref(), christ),
        Mode::Generate {
            kind,
            target,
            node,
            uniform,
        } => {
            let d = config.d.unwrap_or(1);
            let depth = *require(&config.depth, "depth", "generate")?;
            if depth == 0 {
                return Err(Error::Domain("--depth must be at least 1".into()));
            }
            let params = Params {
                kind: *kind,
                d,
                depth,
                target: target.clone(),
                node: node.clone(),
                uniform: *uniform,
            };
            let m = generate(&params, config.seed.unwrap_or(0))?;
            Ok(Outcome {
                status: EXIT_PASS,
                report: io::measure_to_json(&m),
            })
        }
    }
}

fn analyze(config: &RunConfig, path: &Path, source: &ChristSource) -> Result<Outcome> {
    let christ = christ_tree(source, config.depth)?;
    let m = load_measure(path, christ.as_ref())?;
    let tree = m.tree();
    let c1 = carleson_constant(&m);
    let c2 = top_constant(&m);
    let mut r = Report::new("analyze");
    r.line("nodes", tree.len());
    r.line("depth", tree.depth());
    r.rational("theta", tree.theta());
    r.rational("total_mass", m.total());
    r.rational("c1", &c1.value);
    r.line("c1_argmax", tree.label(c1.argmax));
    r.rational("c2", &c2.value);
    r.line("c2_argmax", tree.label(c2.argmax));
    if let Some(delta) = &config.delta {
        r.line("bad_set", labels(tree, bad_set(&m, delta)));
    }
    Ok(Outcome {
        status: EXIT_PASS,
        report: r.0,
    })
}

fn extrapolate(config: &RunConfig, mu: &Path, nu: &Path, source: &ChristSource) -> Result<Outcome> {
    let delta = delta_of(config, "extrapolate")?;
    let capc = require(&config.capc, "capc", "extrapolate")?.clone();
    let christ = christ_tree(source, config.depth)?;
    let (mu, nu) = load_pair(mu, nu, christ.as_ref())?;
    let tree = mu.tree();
    let mut r = Report::new("extrapolate");
    r.rational("delta", &delta);
    r.rational("capc", &capc);
    let audit = match audit_bound(&mu, &nu, &delta, &capc) {
        Ok(a) => a,
        Err(Error::HypothesisViolation {
            node,
            region_mass,
            allowed,
        }) => {
            r.line("hypothesis", "violated");
            r.line("violating_cube", node);
            r.line("region_mass", region_mass);
            r.line("allowed", allowed);
            r.line("pass", false);
            return Ok(Outcome {
                status: EXIT_HYPOTHESIS,
                report: r.0,
            });
        }
        Err(e) => return Err(e),
    };
    r.line("hypothesis", "holds on constructed families");
    r.rational("theta", &audit.theta);
    r.rational("c1_mu", &audit.c1_mu);
    r.rational("c2_nu", &audit.c2_nu);
    r.rational("measured_c1_nu", &audit.measured_c1_nu);
    r.line("measured_argmax", tree.label(audit.measured_argmax));
    r.rational("predicted_bound", &audit.predicted_bound);
    r.rational("bound_with_root_term", &audit.bound_with_root_term);
    r.rational("bad_part", &audit.bad_part);
    r.rational("good_part", &audit.good_part);
    r.rational("witness_cover_mass", &audit.witness_cover_mass);
    r.line("roots_checked", audit.roots_checked);
    r.line("partition_identity", audit.partition_identity);
    r.line("bad_part_inequality", audit.bad_part_inequality);
    r.line("witness_cover_inequality", audit.witness_cover_inequality);
    r.line("good_part_inequality", audit.good_part_inequality);
    r.line("witnesses_found", audit.witnesses_found);
    r.line("predicted_bound_holds", audit.predicted_bound_holds);
    r.line("root_term_bound_holds", audit.root_term_bound_holds);
    let dec = &audit.root_decomposition;
    r.line("bad_set", labels(tree, dec.bad.iter().copied()));
    for (n, generation) in dec.generations.iter().enumerate() {
        r.line(&format!("G_{n}"), labels(tree, generation.iter().copied()));
    }
    for v in dec.processed() {
        r.rational(&format!("region_mass {}", tree.label(v)), &dec.region_mass[&v]);
    }
    for (v, family) in &dec.families {
        r.line(&format!("family {}", tree.label(*v)), labels(tree, family.iter()));
    }
    for (m, w) in &dec.witnesses {
        r.line(&format!("witness {}", tree.label(*m)), tree.label(*w));
    }
    r.line("pass", audit.pass);
    if config.trace {
        for line in dec.trace_lines(tree) {
            r.raw(&format!("trace: {line}"));
        }
    }
    Ok(Outcome {
        status: if audit.pass { EXIT_PASS } else { EXIT_AUDIT_FAILED },
        report: r.0,
    })
}

fn sawtooth(
    config: &RunConfig,
    atoms: &Path,
    mu_atoms: Option<&Path>,
    family: Option<&Path>,
    cube: Option<&CubeId>,
) -> Result<Outcome> {
    let nu = io::parse_atoms(&io::read_text(atoms)?)?;
    let mu = match mu_atoms {
        Some(p) => io::parse_atoms(&io::read_text(p)?)?,
        None => Default::default(),
    };
    let cubes = match family {
        Some(p) => io::parse_family(&io::read_text(p)?)?,
        None => Vec::new(),
    };
    let d = nu
        .atoms
        .first()
        .or(mu.atoms.first())
        .map(|a| a.x.len())
        .or(config.d)
        .or(cube.map(|c| c.dim()))
        .unwrap_or(1);
    let q = cube.cloned().unwrap_or_else(|| CubeId::root(d));
    let depth = *require(&config.depth, "depth", "sawtooth")?;
    let identity = verify_set_identity(&q, &cubes, &nu)?;
    let reduction = reduce_to_dyadic(&mu, &nu, &q, depth)?;
    let mut r = Report::new("sawtooth");
    r.line("cube", &q);
    r.line("family_size", cubes.len());
    r.line("atoms_checked", identity.checked);
    r.line("disagreements", identity.disagreements.len());
    r.line("frontier_atoms", identity.frontier.len());
    r.line("set_identity", identity.holds());
    let tree = reduction.nu.tree();
    let boxes = tree.nodes().filter(|&v| tree.label(v).is_subcube_of(&q)).count();
    r.line("boxes_matched", boxes);
    r.rational("mu_mass", reduction.mu.total());
    r.rational("nu_mass_kept", reduction.nu.total());
    r.rational("nu_mass_dropped", &reduction.dropped_nu_mass);
    r.line("truncation_bound_holds", reduction.truncation_bound_holds);
    r.line("pass", identity.holds());
    Ok(Outcome {
        status: if identity.holds() { EXIT_PASS } else { EXIT_AUDIT_FAILED },
        report: r.0,
    })
}

fn christ(config: &RunConfig, metric: &Path, scale: u32, template: Option<&Path>) -> Result<Outcome> {
    let space = io::parse_metric(&io::read_text(metric)?)?;
    let d = config.d.unwrap_or(1) as u32;
    let tree = build_christ_tree(&space, scale, config.depth.unwrap_or(DEFAULT_CHRIST_DEPTH))?;
    let audit = audit_christ_properties(&tree, &space, d);
    let (weighted, _) = tree.to_weighted_tree()?;
    let mut r = Report::new("christ");
    r.line("points", space.len());
    r.line("scale_ratio", scale);
    r.line("levels", tree.levels().len());
    for (j, level) in tree.levels().iter().enumerate() {
        let cells: Vec<String> = level
            .iter()
            .map(|c| {
                let ids: Vec<&str> = c.points.iter().map(|&p| space.ids()[p].as_str()).collect();
                format!("{}@{}", ids.join(","), space.ids()[c.center])
            })
            .collect();
        r.line(&format!("level {j}"), cells.join(" | "));
    }
    r.rational("diam_ratio", &audit.diam_ratio);
    r.line("c0", audit.c0.as_ref().map(format_rational).unwrap_or_else(|| "none".into()));
    r.rational("c2", &audit.c2);
    r.line("c1", audit.c1.as_ref().map(format_rational).unwrap_or_else(|| "none".into()));
    r.line("c1_samples", audit.c1_samples);
    r.line("partition", audit.partition);
    r.line("nesting", audit.nesting);
    r.line("separation", audit.separation);
    r.line("sigma_consistent", audit.sigma_consistent);
    r.line("tree_nodes", weighted.len());
    r.line("tree_depth", weighted.depth());
    r.rational("theta", weighted.theta());
    let ok = audit.partition && audit.nesting && audit.separation && audit.sigma_consistent;
    r.line("pass", ok);
    if let Some(path) = template {
        let zero = TreeMeasure::zero(Arc::new(weighted));
        io::write_text(path, &io::measure_to_json_with_dimension(&zero, d as usize))?;
    }
    Ok(Outcome {
        status: if ok { EXIT_PASS } else { EXIT_AUDIT_FAILED },
        report: r.0,
    })
}

/// Families of the root checked against the naive local excess.
const EXCESS_FAMILY_LIMIT: usize = 1000;

fn oracle_mode(config: &RunConfig, mu: &Path, nu: Option<&Path>, source: &ChristSource) -> Result<Outcome> {
    let delta = delta_of(config, "oracle")?;
    let christ = christ_tree(source, config.depth)?;
    let (mu, nu) = match nu {
        Some(nu) => {
            let (a, b) = load_pair(mu, nu, christ.as_ref())?;
            (a, Some(b))
        }
        None => (load_measure(mu, christ.as_ref())?, None),
    };
    let tree = mu.tree();
    if tree.len() > oracle::NODE_CAP {
        return Err(Error::Size(format!(
            "tree has {} nodes; oracle mode stops at {}",
            tree.len(),
            oracle::NODE_CAP
        )));
    }
    let root = tree.root();
    let families = oracle::enumerate_families(root, tree)?;
    let mut r = Report::new("oracle");
    r.line("nodes", tree.len());
    r.line("antichains_strict", families.len());
    r.line("antichains_including_scope", families.len() + 1);

    let fast1 = carleson_constant(&mu);
    let fast2 = top_constant(&mu);
    let (naive1, arg1) = oracle::naive_carleson_constant(&mu);
    let (naive2, arg2) = oracle::naive_top_constant(&mu);
    let c1_agrees = naive1 == fast1.value && arg1 == fast1.argmax;
    let c2_agrees = naive2 == fast2.value && arg2 == fast2.argmax;
    let mut excess_pairs = 0;
    let mut excess_agrees = true;
    for f in families.iter().take(EXCESS_FAMILY_LIMIT) {
        let members: Vec<NodeId> = f.iter().collect();
        for v in tree.nodes() {
            excess_pairs += 1;
            excess_agrees &= local_excess(&mu, v, f)? == oracle::naive_local_excess(&mu, v, &members);
        }
    }
    let bad_agrees = oracle::naive_bad_set(&mu, &delta) == bad_set(&mu, &delta).into_iter().collect::<Vec<_>>();
    r.line("c1_agrees", c1_agrees);
    r.line("c2_agrees", c2_agrees);
    r.line("bad_set_agrees", bad_agrees);
    r.line("local_excess_pairs", excess_pairs);
    r.line("local_excess_agrees", excess_agrees);

    let mut good = 0;
    let mut minimal = 0;
    for v in tree.nodes() {
        if mu.mass(v) >= &(&delta * tree.sigma(v)) {
            continue;
        }
        good += 1;
        let family = build_stopping_family(&mu, v, &delta)?.family;
        match oracle::explain_non_minimality(&mu, v, &delta, &family)? {
            None => minimal += 1,
            Some(why) => r.line(&format!("not_minimal {}", tree.label(v)), why),
        }
    }
    r.line("minimal_families", format!("{minimal}/{good}"));
    let mut status = if c1_agrees && c2_agrees && bad_agrees && excess_agrees && minimal == good {
        EXIT_PASS
    } else {
        EXIT_AUDIT_FAILED
    };

    if let Some(nu) = &nu {
        let capc = require(&config.capc, "capc", "oracle with --nu")?;
        let check = oracle::exhaustive_hypothesis_check(&mu, nu, &delta, capc)?;
        r.line("pairs_checked", check.pairs_checked);
        r.line("admissible_pairs", check.admissible_pairs);
        match &check.counterexample {
            None => r.line("hypothesis", "holds"),
            Some(ce) => {
                r.line("hypothesis", "violated");
                r.line("counterexample_cube", tree.label(ce.q));
                r.line("counterexample_family", labels(tree, ce.family.iter()));
                r.rational("region_mass", &ce.region_mass);
                r.rational("allowed", &ce.allowed);
                status = EXIT_HYPOTHESIS;
            }
        }
    }
    r.line("pass", status == EXIT_PASS);
    Ok(Outcome { status, report: r.0 })
}

/// Parse arguments, run, write the report; returns the exit status.
pub fn main_entry() -> i32 {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(outcome) => {
            let written = match &config.out {
                Some(path) => io::write_text(path, &outcome.report),
                None => {
                    print!("{}", outcome.report);
                    Ok(())
                }
            };
            match written {
                Ok(()) => outcome.status,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::HypothesisViolation { .. } => EXIT_HYPOTHESIS,
                _ => EXIT_ERROR,
            }
        }
    }
}
