use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use topofilter::filter::{
    check_refinement, check_support_properties, enumerate_filters, point_filter, search_refinement, support,
};
use topofilter::flows::{
    check_flow_conditions, check_flow_transport, lemacon_construct, step3_composition_check, ConditionsConfig, Flow, RecipeConfig, Region,
    TransportConfig,
};
use topofilter::io::{ingest, topology_document, FilterDoc, Ingested, IngestOptions};
use topofilter::metric::transport::TransportConfig as SequenceTransport;
use topofilter::metric::{check_bound, classify_sequence, transport_via_sequences, axpy, ClassifyConfig, ConeGenerator, MapSpec};
use topofilter::pair::{check_uniformity, Commutation, PairFilter, PairSpace};
use topofilter::report::{CheckRecord, RunConfig, SuiteReport};
use topofilter::snowflake::{check_poly_derivable, parse_rational, separate_polynomials, verify_separation, ArcMode, Polynomial, ScalarMap, Separation, SeparationConfig};
use topofilter::suite::run_suite;
use topofilter::topology::{enumerate_topologies, FiniteTopology, Mask, PointSet};

/// Workbench for filters on finite spaces and their metric analogues.
#[derive(Parser)]
#[command(name = "topofilter", version)]
struct Cli {
    /// Base seed for every sampled check.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the default sample count of sampled checks.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Numeric tolerance for angle and residual checks.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Also write the JSON output to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Admit the improper filter (value 1 on the empty set).
    #[arg(long = "improper-filters", global = true)]
    improper: bool,
    /// Record wall-clock time per check. Reports then differ between runs.
    #[arg(long, global = true)]
    timings: bool,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest point count for exhaustive finite sweeps.
    #[arg(long = "max-points", global = true, default_value_t = 4)]
    max_points: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an input document and run the matching checks.
    #[command(subcommand)]
    Check(CheckCmd),
    /// List every topology on n points, or every filter of a topology.
    #[command(subcommand)]
    Enumerate(EnumerateCmd),
    /// Run a named verification suite.
    Suite { name: String },
    /// Directional filters, cones and transport in Euclidean space.
    #[command(subcommand)]
    Geom(GeomCmd),
    /// Separation and derivability on snowflaked lines.
    #[command(subcommand)]
    Snowflake(SnowflakeCmd),
    /// Flow conditions and the recipes built from them.
    #[command(subcommand)]
    Flow(FlowCmd),
}

#[derive(Subcommand)]
enum CheckCmd {
    Topology { file: PathBuf },
    Map { file: PathBuf },
    Filter { file: PathBuf },
    Refinement { file: PathBuf },
    /// The principal filter of a relation, on the discrete square unless a topology is given.
    Uniformity {
        file: PathBuf,
        #[arg(long)]
        topology: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum EnumerateCmd {
    Topologies {
        #[arg(long)]
        points: usize,
        #[arg(long)]
        t0: bool,
    },
    Filters { file: PathBuf },
}

#[derive(Subcommand)]
enum GeomCmd {
    /// Classify a sequence document against its `(x, u)`.
    Classify { file: PathBuf },
    /// Membership of `y` in `V⁺(x, u, ε, σ)`.
    Cone {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y: Vec<f64>,
    },
    /// Image direction of `μ_{x,u}` under a map, against the Jacobian.
    Transport {
        /// A map name such as `cubic`, or a JSON object like `{"name":"sine-shear","k":0.5}`.
        #[arg(long)]
        map: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        trials: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Graph,
    Line,
}

#[derive(Subcommand)]
enum SnowflakeCmd {
    Separate {
        /// Coefficients from degree 0, e.g. `0,1,1/2`.
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long)]
        m: u32,
        #[arg(long, value_enum, default_value = "graph")]
        mode: Mode,
    },
    Derive {
        /// A scalar map name such as `sin`, or a JSON object.
        #[arg(long)]
        map: String,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        #[arg(long)]
        m: u32,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    Conditions {
        file: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
    },
    Lemacon {
        file: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
    },
    Step3 {
        file: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
    },
    Transport {
        file: PathBuf,
        #[arg(long)]
        map: String,
    },
}

enum Output {
    Report(SuiteReport),
    Document(Value),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build()?;
    let output = pool.install(|| dispatch(cli))?;
    let (text, ok) = match &output {
        Output::Report(r) => (r.to_json()?, r.passed()),
        Output::Document(v) => (serde_json::to_string_pretty(v)? + "\n", true),
    };
    print!("{text}");
    if let Some(path) = &cli.out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn config(cli: &Cli) -> RunConfig {
    RunConfig {
        seed: cli.seed,
        samples: cli.samples,
        tol: cli.tol,
        improper: cli.improper,
        max_points: cli.max_points,
        timings: cli.timings,
        out: cli.out.clone(),
    }
}

fn options(cli: &Cli) -> IngestOptions {
    IngestOptions { improper: cli.improper }
}

fn report(cli: &Cli, name: &str, records: Vec<CheckRecord>) -> Result<Output> {
    let cfg = config(cli);
    cfg.validate()?;
    let r = SuiteReport::new(name, cfg, records);
    r.validate()?;
    Ok(Output::Report(r))
}

fn load(cli: &Cli, path: &Path, want: &str) -> Result<Ingested> {
    let doc = ingest(path, options(cli))?;
    if doc.kind() != want {
        bail!("{}: expected a `{want}` document, found `{}`", path.display(), doc.kind());
    }
    Ok(doc)
}

fn dispatch(cli: &Cli) -> Result<Output> {
    match &cli.command {
        Command::Suite { name } => Ok(Output::Report(run_suite(name, &config(cli))?)),
        Command::Check(c) => check(cli, c),
        Command::Enumerate(e) => enumerate(cli, e),
        Command::Geom(g) => geom(cli, g),
        Command::Snowflake(s) => snowflake(cli, s),
        Command::Flow(f) => flow(cli, f),
    }
}

fn pairs_of(n: usize, m: Mask) -> Vec<[usize; 2]> {
    PointSet(m).indices().into_iter().map(|i| [i / n, i % n]).collect()
}

fn check(cli: &Cli, cmd: &CheckCmd) -> Result<Output> {
    match cmd {
        CheckCmd::Topology { file } => {
            let Ingested::Topology(t) = load(cli, file, "topology")? else { unreachable!() };
            let details = json!({ "points": t.n(), "opens": t.opens_as_lists(), "t0": t.is_t0(), "t0_witness": t.t0_witness() });
            report(cli, "check/topology", vec![CheckRecord::pass("topology", "def:finite-topology", details)])
        }
        CheckCmd::Map { file } => {
            let Ingested::Map(f) = load(cli, file, "map")? else { unreachable!() };
            let witness = f.discontinuity_witness().map(|w| json!({ "open": w.indices(), "preimage": PointSet(f.preimage(w.0)).indices() }));
            report(cli, "check/map", vec![CheckRecord::from_witness("continuity", "def:pushforward", witness, json!({ "image": f.image() }))])
        }
        CheckCmd::Filter { file } => {
            let Ingested::Filter(doc) = load(cli, file, "filter")? else { unreachable!() };
            let record = match doc {
                FilterDoc::Indicator(mu) => {
                    let s = support(&mu);
                    let supports: Vec<Vec<usize>> = s.iter().map(|&m| PointSet(m).indices()).collect();
                    let details = json!({ "support": supports, "kernel": PointSet(mu.kernel()).indices(), "proper": mu.is_proper() });
                    let witness = check_support_properties(mu.topology(), &s).err().map(|v| json!(format!("{v:?}")));
                    CheckRecord::from_witness("support", "prop:prop23", witness, details)
                }
                FilterDoc::Graded(g) => CheckRecord::pass("graded-axioms", "def:dfiltbc", json!({ "values": g.values().to_f64() })),
            };
            report(cli, "check/filter", vec![record])
        }
        CheckCmd::Refinement { file } => {
            let Ingested::Refinement(r) = load(cli, file, "refinement")? else { unreachable!() };
            let witness = check_refinement(&r).err().map(|v| json!(v.to_string()));
            let search = search_refinement(r.topology(), !cli.improper)?;
            let details = json!({ "points": r.topology().n(), "blocked_points": search.blocked });
            report(cli, "check/refinement", vec![CheckRecord::from_witness("refinement", "def:def27", witness, details)])
        }
        CheckCmd::Uniformity { file, topology } => {
            let Ingested::Relation { points, set } = load(cli, file, "relation")? else { unreachable!() };
            let base = match topology {
                Some(p) => {
                    let Ingested::Topology(t) = load(cli, p, "topology")? else { unreachable!() };
                    if t.n() != points {
                        bail!("relation has {points} points but the topology has {}", t.n());
                    }
                    t
                }
                None => Arc::new(FiniteTopology::discrete(points)),
            };
            let space = PairSpace::new(base)?;
            let omega = PairFilter::principal(space, set.0);
            let r = check_uniformity(&omega);
            let show = |w: Option<PointSet>| w.map(|s| json!(pairs_of(points, s.0)));
            let records = vec![
                CheckRecord::from_witness("finer-than-diagonal", "def:uniformity", show(r.finer_than_diagonal), Value::Null),
                CheckRecord::from_witness("half-composition", "def:uniformity", show(r.half_composition), Value::Null),
                CheckRecord::from_witness("symmetric", "def:uniformity", show(r.symmetric), Value::Null),
            ];
            report(cli, "check/uniformity", records)
        }
    }
}

fn enumerate(cli: &Cli, cmd: &EnumerateCmd) -> Result<Output> {
    match cmd {
        EnumerateCmd::Topologies { points, t0 } => {
            let ts = enumerate_topologies(*points, *t0)?;
            let docs: Vec<Value> = ts.iter().map(topology_document).collect();
            Ok(Output::Document(json!({ "points": points, "t0": t0, "count": docs.len(), "topologies": docs })))
        }
        EnumerateCmd::Filters { file } => {
            let Ingested::Topology(t) = load(cli, file, "topology")? else { unreachable!() };
            let proper = !cli.improper;
            let filters = enumerate_filters(&t, proper)?;
            let points: Vec<_> = (0..t.n()).map(|x| point_filter(&t, x)).collect::<Result<_, _>>()?;
            let docs: Vec<Value> = filters
                .iter()
                .map(|f| {
                    let values: Vec<u8> = f.values().iter().map(|&b| u8::from(b)).collect();
                    let point = points.iter().position(|p| p == f);
                    json!({ "values": values, "kernel": PointSet(f.kernel()).indices(), "point_filter_of": point })
                })
                .collect();
            Ok(Output::Document(json!({ "opens": t.opens_as_lists(), "proper": proper, "count": docs.len(), "filters": docs })))
        }
    }
}

fn map_spec(s: &str) -> Result<MapSpec> {
    let v: Value = if s.trim_start().starts_with('{') { serde_json::from_str(s)? } else { json!({ "name": s }) };
    let f: MapSpec = serde_json::from_value(v).with_context(|| format!("unknown map `{s}`"))?;
    f.validate()?;
    Ok(f)
}

fn scalar_map(s: &str) -> Result<ScalarMap> {
    let v: Value = if s.trim_start().starts_with('{') { serde_json::from_str(s)? } else { json!({ "name": s }) };
    serde_json::from_value(v).with_context(|| format!("unknown scalar map `{s}`"))
}

fn polynomial(s: &str) -> Result<Polynomial> {
    let coeffs = s.split(',').map(|c| parse_rational(c.trim())).collect::<Result<Vec<_>, _>>()?;
    Ok(Polynomial::new(coeffs))
}

fn geom(cli: &Cli, cmd: &GeomCmd) -> Result<Output> {
    match cmd {
        GeomCmd::Classify { file } => {
            let Ingested::Sequence(s) = load(cli, file, "sequence")? else { unreachable!() };
            let v = classify_sequence(&s.points, &s.x, &s.u, &ClassifyConfig::default())?;
            let details = serde_json::to_value(&v)?;
            let witness = v.disagreement.then(|| details.clone());
            report(cli, "geom/classify", vec![CheckRecord::from_witness("classify", "prop:convergence", witness, details)])
        }
        GeomCmd::Cone { x, u, eps, sigma, y } => {
            let g = ConeGenerator::new(x.clone(), u.clone(), *eps, *sigma)?;
            if y.len() != x.len() {
                bail!("y has {} coordinates, x has {}", y.len(), x.len());
            }
            let member = topofilter::metric::v_plus_contains(&g, y);
            let (gap, lambda) = g.witness(y);
            let mut details = json!({ "member": member, "distance_to_segment": gap, "lambda": lambda });
            let mut witness = None;
            if member {
                let ok = check_bound(x, &axpy(x, lambda, u), y, *sigma)?;
                details["bound_holds"] = json!(ok);
                witness = (!ok).then(|| details.clone());
            }
            report(cli, "geom/cone", vec![CheckRecord::from_witness("membership", "eq:bound", witness, details)])
        }
        GeomCmd::Transport { map, x, u, trials } => {
            let f = map_spec(map)?;
            let cfg = SequenceTransport { seed: cli.seed, ..Default::default() };
            let t = transport_via_sequences(&f, x, u, *trials, &cfg)?;
            let details = serde_json::to_value(&t)?;
            let witness = (t.residual > cli.tol).then(|| json!({ "residual": t.residual, "tol": cli.tol }));
            report(cli, "geom/transport", vec![CheckRecord::from_witness("transport", "thm:derivative", witness, details).sampled(cli.seed, *trials)])
        }
    }
}

fn snowflake(cli: &Cli, cmd: &SnowflakeCmd) -> Result<Output> {
    match cmd {
        SnowflakeCmd::Separate { p, q, m, mode } => {
            let (p, q) = (polynomial(p)?, polynomial(q)?);
            let mode = match mode {
                Mode::Graph => ArcMode::Graph,
                Mode::Line => ArcMode::Line,
            };
            let s = separate_polynomials(&p, &q, *m, mode, &SeparationConfig::default())?;
            let details = json!({ "p": p.to_string(), "q": q.to_string(), "m": m, "result": serde_json::to_value(&s)? });
            let record = match &s {
                Separation::Equal => CheckRecord::pass("separation", "prop:snowflake", details),
                Separation::Separated(w) => {
                    let verified = verify_separation(&p, &q, *m, mode, w)?;
                    CheckRecord::from_witness("separation", "prop:snowflake", (!verified).then(|| json!({ "verified": false })), details)
                }
                Separation::NotSeparated { .. } => CheckRecord::fail("separation", "prop:snowflake", details["result"].clone(), details),
            };
            report(cli, "snowflake/separate", vec![record])
        }
        SnowflakeCmd::Derive { map, x, p, m } => {
            let f = scalar_map(map)?;
            let r = check_poly_derivable(&f, *x, &polynomial(p)?, *m)?;
            let details = serde_json::to_value(&r)?;
            let witness = (!r.matches).then(|| details.clone());
            report(cli, "snowflake/derive", vec![CheckRecord::from_witness("derivability", "thm:derivable", witness, details)])
        }
    }
}

fn load_flow(cli: &Cli, file: &Path) -> Result<Flow> {
    let Ingested::Flow(f) = load(cli, file, "flow")? else { unreachable!() };
    Ok(f)
}

fn conditions(cli: &Cli, flow: &Flow, region: &Region) -> Result<topofilter::flows::FlowConditionsReport> {
    let cfg = ConditionsConfig { samples: cli.samples.unwrap_or(2_000), seed: cli.seed, ..Default::default() };
    Ok(check_flow_conditions(flow, region, &cfg)?)
}

fn implication(id: &str, anchor: &str, violations: usize, inconclusive: usize, witnesses: Value, details: Value) -> CheckRecord {
    if violations > 0 {
        CheckRecord::fail(id, anchor, witnesses, details)
    } else if inconclusive > 0 {
        CheckRecord::inconclusive(id, anchor, details)
    } else {
        CheckRecord::pass(id, anchor, details)
    }
}

fn flow(cli: &Cli, cmd: &FlowCmd) -> Result<Output> {
    let samples = cli.samples.unwrap_or(10_000);
    match cmd {
        FlowCmd::Conditions { file, half_width } => {
            let flow = load_flow(cli, file)?;
            let r = conditions(cli, &flow, &Region::cube(flow.dim(), *half_width))?;
            let details = serde_json::to_value(&r)?;
            let mut records = Vec::new();
            for (id, ok) in [("a-identity", r.identity), ("b-equicontinuous", r.equicontinuous), ("c-lipschitz", r.lipschitz), ("d-local-group", r.local_group), ("e-chain", r.chain)] {
                let witness = (!ok).then(|| json!({ "condition": id }));
                records.push(CheckRecord::from_witness(id, "thm:trad2", witness, Value::Null).sampled(cli.seed, r.samples));
            }
            records[0].details = details;
            report(cli, "flow/conditions", records)
        }
        FlowCmd::Lemacon { file, eps, mu } => {
            let flow = load_flow(cli, file)?;
            let cfg = RecipeConfig::new(flow.dim(), samples, cli.seed);
            let r = lemacon_construct(&flow, &conditions(cli, &flow, &cfg.region)?, *eps, *mu, &cfg)?;
            let details = json!({ "eps_prime": r.eps_prime, "mu_prime": r.mu_prime, "lambda0": r.lambda0, "eps1": r.eps1, "inconclusive": r.check.inconclusive });
            let rec = implication("lemacon", "lem:lemacon", r.check.violations, r.check.inconclusive, serde_json::to_value(&r.check.witnesses)?, details);
            report(cli, "flow/lemacon", vec![rec.sampled(cli.seed, samples)])
        }
        FlowCmd::Step3 { file, eps, mu } => {
            let flow = load_flow(cli, file)?;
            let cfg = RecipeConfig::new(flow.dim(), samples, cli.seed);
            let r = step3_composition_check(&flow, &conditions(cli, &flow, &cfg.region)?, *eps, *mu, &cfg)?;
            let details = json!({ "eps_prime": r.eps_prime, "mu_prime": r.mu_prime, "c": r.c, "m_sup": r.m_sup, "inconclusive": r.check.inconclusive });
            let rec = implication("step3", "thm:trad2:step3", r.check.violations, r.check.inconclusive, serde_json::to_value(&r.check.witnesses)?, details);
            report(cli, "flow/step3", vec![rec.sampled(cli.seed, samples)])
        }
        FlowCmd::Transport { file, map } => {
            let flow = load_flow(cli, file)?;
            let f = map_spec(map)?;
            let cfg = TransportConfig { samples: cli.samples.unwrap_or(4_000), seed: cli.seed, ..Default::default() };
            let r = check_flow_transport(&f, &flow, &Region::cube(flow.dim(), 1.0), &cfg)?;
            let details = json!({ "map": f.name(), "distortion": r.distortion, "mu": r.mu, "forward": r.forward_checked, "backward": r.backward_checked });
            let rec = match r.verdict {
                Commutation::Commute => CheckRecord::pass("transport", "lem:lem3", details),
                Commutation::Inconclusive { .. } => CheckRecord::inconclusive("transport", "lem:lem3", details),
                Commutation::Counterexample(w) => CheckRecord::fail("transport", "lem:lem3", serde_json::to_value(&w)?, details),
            };
            report(cli, "flow/transport", vec![rec.sampled(cli.seed, cfg.samples)])
        }
    }
}
