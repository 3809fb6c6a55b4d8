//! JSON documents with a `kind` field, decoded into validated objects.
//!
//! ```json
//! {"kind": "topology", "points": 2, "opens": [[], [1], [0, 1]]}
//! {"kind": "map", "source": "sierpinski.json", "target": {"points": 1, "opens": [[], [0]]}, "image": [0, 0]}
//! {"kind": "filter", "topology": "sierpinski.json", "values": [0, 1, 1]}
//! {"kind": "refinement", "topology": "t.json", "points": [["f0.json"], [[0, 1, 1]]]}
//! {"kind": "relation", "points": 3, "pairs": [[0, 1], [1, 2]]}
//! {"kind": "flow", "flow": {"name": "rotation", "omega": 1.0}, "domain": [-1, 1]}
//! {"kind": "sequence", "x": [0, 0], "u": [1, 0], "points": [[1, 0], [0.5, 0]]}
//! ```
//!
//! Topologies and filters may be given inline or as paths relative to the
//! referring file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_rational::BigRational;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{check_filter_axioms, FilterError, IndicatorFilter, Refinement};
use crate::flows::{Flow, FlowError, FlowSpec};
use crate::graded::{check_graded_axioms, GradedError, GradedFilter, Grades};
use crate::metric::MetricError;
use crate::pair::relation;
use crate::snowflake::parse_rational;
use crate::topology::{validate_topology, FiniteTopology, MapError, PointMap, PointSet, TopologyError};

/// Documents larger than this are rejected before parsing.
pub const MAX_DOCUMENT_BYTES: usize = 1 << 22;
const MAX_INCLUDE_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema violation at `{field}` (line {line}, column {column}): {message}")]
    Schema { field: String, line: usize, column: usize, message: String },
    #[error("unknown kind `{0}`")]
    UnknownKind(String),
    #[error("at `{field}`: {error}")]
    Topology { field: String, error: TopologyError },
    #[error("at `{field}`: {error}")]
    Map { field: String, error: MapError },
    #[error("at `{field}`: {error}")]
    Filter { field: String, error: FilterError },
    #[error("at `{field}`: {error}")]
    Graded { field: String, error: GradedError },
    #[error("at `{field}`: {error}")]
    Flow { field: String, error: FlowError },
    #[error("at `{field}`: {error}")]
    Metric { field: String, error: MetricError },
    #[error("at `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl IngestError {
    fn at(self, prefix: &str) -> Self {
        let join = |f: String| if f.is_empty() || f == "." { prefix.to_string() } else { format!("{prefix}.{f}") };
        match self {
            IngestError::Topology { field, error } => IngestError::Topology { field: join(field), error },
            IngestError::Map { field, error } => IngestError::Map { field: join(field), error },
            IngestError::Filter { field, error } => IngestError::Filter { field: join(field), error },
            IngestError::Graded { field, error } => IngestError::Graded { field: join(field), error },
            IngestError::Invalid { field, message } => IngestError::Invalid { field: join(field), message },
            IngestError::Schema { field, line, column, message } => IngestError::Schema { field: join(field), line, column, message },
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestOptions {
    /// Allow `μ(∅) = 1`.
    pub improper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterDoc {
    Indicator(IndicatorFilter),
    Graded(GradedFilter),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDoc {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Topology(Arc<FiniteTopology>),
    Map(PointMap),
    Filter(FilterDoc),
    Refinement(Refinement),
    Relation { points: usize, set: PointSet },
    Flow(Flow),
    Sequence(SequenceDoc),
}

impl Ingested {
    pub fn kind(&self) -> &'static str {
        match self {
            Ingested::Topology(_) => "topology",
            Ingested::Map(_) => "map",
            Ingested::Filter(_) => "filter",
            Ingested::Refinement(_) => "refinement",
            Ingested::Relation { .. } => "relation",
            Ingested::Flow(_) => "flow",
            Ingested::Sequence(_) => "sequence",
        }
    }
}

#[derive(Deserialize)]
struct KindProbe {
    kind: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyBody {
    #[serde(default, rename = "kind")]
    _kind: Option<String>,
    points: usize,
    opens: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TopologyRef {
    Path(String),
    Inline(TopologyBody),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapBody {
    #[serde(rename = "kind")]
    _kind: String,
    source: TopologyRef,
    target: TopologyRef,
    image: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Grade {
    Int(u64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterBody {
    #[serde(default, rename = "kind")]
    _kind: Option<String>,
    topology: TopologyRef,
    values: Vec<Grade>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FilterRef {
    Path(String),
    Values(Vec<Grade>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RefinementBody {
    #[serde(rename = "kind")]
    _kind: String,
    topology: TopologyRef,
    points: Vec<Vec<FilterRef>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationBody {
    #[serde(rename = "kind")]
    _kind: String,
    points: usize,
    pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowBody {
    #[serde(rename = "kind")]
    _kind: String,
    flow: FlowSpec,
    #[serde(default = "unit_domain")]
    domain: [f64; 2],
}

fn unit_domain() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceBody {
    #[serde(rename = "kind")]
    _kind: String,
    x: Vec<f64>,
    u: Vec<f64>,
    points: Vec<Vec<f64>>,
}

struct Ctx<'a> {
    base: Option<&'a Path>,
    options: IngestOptions,
    depth: usize,
}

fn line_col(text: &str, e: &serde_json::Error) -> (usize, usize) {
    if e.line() > 0 {
        (e.line(), e.column())
    } else {
        let lines = text.lines().count().max(1);
        (lines, 0)
    }
}

fn decode<T: DeserializeOwned>(text: &str) -> Result<T, IngestError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = line_col(text, &inner);
        IngestError::Schema { field, line, column, message: inner.to_string() }
    })?;
    de.end().map_err(|e| IngestError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
    Ok(value)
}

/// Decodes a document from text; relative paths are resolved against `base`
/// and rejected when it is `None`.
pub fn ingest_str(text: &str, base: Option<&Path>, options: IngestOptions) -> Result<Ingested, IngestError> {
    ingest_in(text, &Ctx { base, options, depth: 0 })
}

pub fn ingest(path: &Path, options: IngestOptions) -> Result<Ingested, IngestError> {
    let text = read(path)?;
    ingest_str(&text, path.parent(), options)
}

fn read(path: &Path) -> Result<String, IngestError> {
    let io = |message: String| IngestError::Io { path: path.display().to_string(), message };
    let meta = std::fs::metadata(path).map_err(|e| io(e.to_string()))?;
    if meta.len() as usize > MAX_DOCUMENT_BYTES {
        return Err(io(format!("file exceeds {MAX_DOCUMENT_BYTES} bytes")));
    }
    std::fs::read_to_string(path).map_err(|e| io(e.to_string()))
}

fn ingest_in(text: &str, ctx: &Ctx<'_>) -> Result<Ingested, IngestError> {
    if text.len() > MAX_DOCUMENT_BYTES {
        return Err(IngestError::Invalid { field: String::new(), message: format!("document exceeds {MAX_DOCUMENT_BYTES} bytes") });
    }
    let probe: KindProbe = serde_json::from_str::<serde_json::Value>(text)
        .map_err(|e| IngestError::Parse { line: e.line(), column: e.column(), message: e.to_string() })
        .and_then(|_| decode(text))?;
    match probe.kind.as_str() {
        "topology" => Ok(Ingested::Topology(build_topology(decode(text)?)?)),
        "map" => build_map(decode(text)?, ctx).map(Ingested::Map),
        "filter" => build_filter(decode(text)?, ctx).map(Ingested::Filter),
        "refinement" => build_refinement(decode(text)?, ctx).map(Ingested::Refinement),
        "relation" => {
            let b: RelationBody = decode(text)?;
            if b.points > crate::pair::MAX_BASE_POINTS {
                return Err(IngestError::Topology {
                    field: "points".into(),
                    error: TopologyError::SizeLimitExceeded { n: b.points, limit: crate::pair::MAX_BASE_POINTS },
                });
            }
            let set = relation(b.points, &b.pairs).map_err(|error| {
                let k = b.pairs.iter().position(|&(x, y)| x >= b.points || y >= b.points).unwrap_or(0);
                IngestError::Topology { field: format!("pairs[{k}]"), error }
            })?;
            Ok(Ingested::Relation { points: b.points, set: PointSet(set) })
        }
        "flow" => {
            let b: FlowBody = decode(text)?;
            Flow::new(b.flow, b.domain[0], b.domain[1]).map(Ingested::Flow).map_err(|error| IngestError::Flow { field: "flow".into(), error })
        }
        "sequence" => {
            let b: SequenceBody = decode(text)?;
            crate::metric::check_dims(&b.x, &b.u).map_err(|error| IngestError::Metric { field: "u".into(), error })?;
            if let Some(k) = b.points.iter().position(|p| p.len() != b.x.len()) {
                let error = MetricError::DimensionMismatch { got: b.points[k].len(), expected: b.x.len() };
                return Err(IngestError::Metric { field: format!("points[{k}]"), error });
            }
            if let Some(k) = b.points.iter().position(|p| p.iter().any(|a| !a.is_finite())) {
                return Err(IngestError::Invalid { field: format!("points[{k}]"), message: "non-finite coordinate".into() });
            }
            Ok(Ingested::Sequence(SequenceDoc { x: b.x, u: b.u, points: b.points }))
        }
        other => Err(IngestError::UnknownKind(other.into())),
    }
}

fn build_topology(b: TopologyBody) -> Result<Arc<FiniteTopology>, IngestError> {
    validate_topology(b.points, &b.opens).map(Arc::new).map_err(|error| {
        let field = match error {
            TopologyError::IndexOutOfRange { index, .. } => b
                .opens
                .iter()
                .enumerate()
                .find_map(|(i, s)| s.iter().position(|&p| p == index).map(|j| format!("opens[{i}][{j}]")))
                .unwrap_or_else(|| "opens".into()),
            TopologyError::TooManyPoints { .. } => "points".into(),
            _ => "opens".into(),
        };
        IngestError::Topology { field, error }
    })
}

fn include(path: &str, ctx: &Ctx<'_>) -> Result<(String, PathBuf), IngestError> {
    let base = ctx
        .base
        .ok_or_else(|| IngestError::Invalid { field: String::new(), message: format!("cannot resolve `{path}` without a base directory") })?;
    if ctx.depth >= MAX_INCLUDE_DEPTH {
        return Err(IngestError::Invalid { field: String::new(), message: format!("includes nested deeper than {MAX_INCLUDE_DEPTH}") });
    }
    let full = base.join(path);
    Ok((read(&full)?, full))
}

fn resolve_topology(r: TopologyRef, ctx: &Ctx<'_>) -> Result<Arc<FiniteTopology>, IngestError> {
    match r {
        TopologyRef::Inline(b) => build_topology(b),
        TopologyRef::Path(p) => {
            let (text, full) = include(&p, ctx)?;
            let sub = Ctx { base: full.parent(), options: ctx.options, depth: ctx.depth + 1 };
            match ingest_in(&text, &sub)? {
                Ingested::Topology(t) => Ok(t),
                other => Err(IngestError::Invalid { field: String::new(), message: format!("`{p}` holds a {}, not a topology", other.kind()) }),
            }
        }
    }
}

fn build_map(b: MapBody, ctx: &Ctx<'_>) -> Result<PointMap, IngestError> {
    let source = resolve_topology(b.source, ctx).map_err(|e| e.at("source"))?;
    let target = resolve_topology(b.target, ctx).map_err(|e| e.at("target"))?;
    PointMap::new(source, target, b.image).map_err(|error| {
        let field = match error {
            MapError::ImageOutOfRange { point, .. } => format!("image[{point}]"),
            _ => "image".into(),
        };
        IngestError::Map { field, error }
    })
}

fn grades(values: &[Grade]) -> Result<Result<Vec<bool>, Grades>, IngestError> {
    if values.iter().all(|g| matches!(g, Grade::Int(0 | 1))) {
        return Ok(Ok(values.iter().map(|g| matches!(g, Grade::Int(1))).collect()));
    }
    if values.iter().any(|g| matches!(g, Grade::Text(_))) {
        let exact: Result<Vec<BigRational>, IngestError> = values
            .iter()
            .enumerate()
            .map(|(i, g)| match g {
                Grade::Int(k) => Ok(BigRational::from_integer((*k).into())),
                Grade::Text(s) => parse_rational(s).map_err(|e| IngestError::Invalid { field: format!("values[{i}]"), message: e.to_string() }),
                Grade::Float(_) => Err(IngestError::Invalid { field: format!("values[{i}]"), message: "cannot mix exact and float grades".into() }),
            })
            .collect();
        return Ok(Err(Grades::Exact(exact?)));
    }
    Ok(Err(Grades::Float(
        values
            .iter()
            .map(|g| match g {
                Grade::Int(k) => *k as f64,
                Grade::Float(v) => *v,
                Grade::Text(_) => unreachable!("handled above"),
            })
            .collect(),
    )))
}

fn build_values(topology: Arc<FiniteTopology>, values: &[Grade], ctx: &Ctx<'_>) -> Result<FilterDoc, IngestError> {
    let proper = !ctx.options.improper;
    match grades(values)? {
        Ok(bits) => check_filter_axioms(topology, bits, proper)
            .map(FilterDoc::Indicator)
            .map_err(|error| IngestError::Filter { field: "values".into(), error }),
        Err(g) => check_graded_axioms(topology, g, proper)
            .map(FilterDoc::Graded)
            .map_err(|error| IngestError::Graded { field: "values".into(), error }),
    }
}

fn build_filter(b: FilterBody, ctx: &Ctx<'_>) -> Result<FilterDoc, IngestError> {
    let t = resolve_topology(b.topology, ctx).map_err(|e| e.at("topology"))?;
    build_values(t, &b.values, ctx)
}

fn build_refinement(b: RefinementBody, ctx: &Ctx<'_>) -> Result<Refinement, IngestError> {
    let t = resolve_topology(b.topology, ctx).map_err(|e| e.at("topology"))?;
    let mut assignment = Vec::with_capacity(b.points.len());
    for (x, refs) in b.points.into_iter().enumerate() {
        let mut set = Vec::with_capacity(refs.len());
        for (k, r) in refs.into_iter().enumerate() {
            let field = format!("points[{x}][{k}]");
            let doc = match r {
                FilterRef::Values(v) => build_values(t.clone(), &v, ctx).map_err(|e| e.at(&field))?,
                FilterRef::Path(p) => {
                    let (text, full) = include(&p, ctx).map_err(|e| e.at(&field))?;
                    let sub = Ctx { base: full.parent(), options: ctx.options, depth: ctx.depth + 1 };
                    match ingest_in(&text, &sub).map_err(|e| e.at(&field))? {
                        Ingested::Filter(f) => f,
                        other => return Err(IngestError::Invalid { field, message: format!("`{p}` holds a {}, not a filter", other.kind()) }),
                    }
                }
            };
            match doc {
                FilterDoc::Indicator(f) => set.push(f),
                FilterDoc::Graded(_) => return Err(IngestError::Invalid { field, message: "refinements take 0/1 filters".into() }),
            }
        }
        assignment.push(set);
    }
    Refinement::new(t, assignment).map_err(|error| IngestError::Filter { field: "points".into(), error })
}

/// Serialises a topology in the ingest format.
pub fn topology_document(t: &FiniteTopology) -> serde_json::Value {
    serde_json::json!({ "kind": "topology", "points": t.n(), "opens": t.opens_as_lists() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn opts() -> IngestOptions {
        IngestOptions::default()
    }

    #[test]
    fn sierpinski_topology() {
        let doc = r#"{"kind": "topology", "points": 2, "opens": [[], [1], [0, 1]]}"#;
        match ingest_str(doc, None, opts()).unwrap() {
            Ingested::Topology(t) => assert_eq!(*t, FiniteTopology::sierpinski()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_is_located() {
        let doc = r#"{"kind": "topology", "points": 2, "opens": [[], [0], [0, 2]]}"#;
        match ingest_str(doc, None, opts()) {
            Err(IngestError::Topology { field, error: TopologyError::IndexOutOfRange { index: 2, n: 2 } }) => assert_eq!(field, "opens[2][1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_carry_path_and_line() {
        let doc = "{\"kind\": \"topology\",\n \"points\": 2,\n \"opens\": [[], [\"a\"]]}";
        match ingest_str(doc, None, opts()) {
            Err(IngestError::Schema { field, line, .. }) => {
                assert_eq!(field, "opens[1][0]");
                assert_eq!(line, 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ingest_str("{\"kind\": ", None, opts()), Err(IngestError::Parse { .. })));
        assert!(matches!(ingest_str(r#"{"kind": "torus"}"#, None, opts()), Err(IngestError::UnknownKind(_))));
        assert!(matches!(ingest_str(r#"{"kind": "topology", "points": 1, "opens": [[], [0]], "extra": 1}"#, None, opts()), Err(IngestError::Schema { .. })));
    }

    #[test]
    fn discontinuous_map_loads_with_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = std::fs::File::create(dir.path().join("s.json")).unwrap();
        write!(f, r#"{{"kind": "topology", "points": 2, "opens": [[], [1], [0, 1]]}}"#).unwrap();
        let map = dir.path().join("swap.json");
        std::fs::write(&map, r#"{"kind": "map", "source": "s.json", "target": "s.json", "image": [1, 0]}"#).unwrap();
        match ingest(&map, opts()).unwrap() {
            Ingested::Map(m) => assert_eq!(m.discontinuity_witness(), Some(PointSet(0b10))),
            other => panic!("{other:?}"),
        }
        let bad = r#"{"kind": "map", "source": "s.json", "target": "s.json", "image": [0, 5]}"#;
        match ingest_str(bad, Some(dir.path()), opts()) {
            Err(IngestError::Map { field, .. }) => assert_eq!(field, "image[1]"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ingest_str(bad, None, opts()), Err(IngestError::Invalid { .. })));
    }

    #[test]
    fn filters_indicator_graded_and_exact() {
        let t = r#"{"points": 2, "opens": [[], [1], [0, 1]]}"#;
        let doc = format!(r#"{{"kind": "filter", "topology": {t}, "values": [0, 1, 1]}}"#);
        assert!(matches!(ingest_str(&doc, None, opts()).unwrap(), Ingested::Filter(FilterDoc::Indicator(_))));
        let doc = format!(r#"{{"kind": "filter", "topology": {t}, "values": [0, 0.5, 1]}}"#);
        assert!(matches!(ingest_str(&doc, None, opts()).unwrap(), Ingested::Filter(FilterDoc::Graded(_))));
        let doc = format!(r#"{{"kind": "filter", "topology": {t}, "values": [0, "1/3", 1]}}"#);
        assert!(matches!(ingest_str(&doc, None, opts()).unwrap(), Ingested::Filter(FilterDoc::Graded(_))));
        let doc = format!(r#"{{"kind": "filter", "topology": {t}, "values": [1, 1, 1]}}"#);
        assert!(matches!(ingest_str(&doc, None, opts()), Err(IngestError::Filter { error: FilterError::ImproperFilter, .. })));
        assert!(ingest_str(&doc, None, IngestOptions { improper: true }).is_ok());
        let doc = format!(r#"{{"kind": "filter", "topology": {t}, "values": [0, 1, 0]}}"#);
        assert!(matches!(ingest_str(&doc, None, opts()), Err(IngestError::Filter { error: FilterError::AxiomA, .. })));
    }

    #[test]
    fn refinement_relation_flow_sequence() {
        let doc = r#"{"kind": "refinement", "topology": {"points": 2, "opens": [[], [1], [0, 1]]}, "points": [[[0, 0, 1]], [[0, 1, 1]]]}"#;
        match ingest_str(doc, None, opts()).unwrap() {
            Ingested::Refinement(r) => assert_eq!(r.at(0).len(), 1),
            other => panic!("{other:?}"),
        }
        let doc = r#"{"kind": "relation", "points": 3, "pairs": [[0, 1], [1, 2]]}"#;
        assert!(matches!(ingest_str(doc, None, opts()).unwrap(), Ingested::Relation { points: 3, .. }));
        let doc = r#"{"kind": "relation", "points": 3, "pairs": [[0, 1], [1, 3]]}"#;
        assert!(matches!(ingest_str(doc, None, opts()), Err(IngestError::Topology { field, .. }) if field == "pairs[1]"));
        let doc = r#"{"kind": "flow", "flow": {"name": "translation", "u": [1, 0]}}"#;
        assert!(matches!(ingest_str(doc, None, opts()).unwrap(), Ingested::Flow(_)));
        let doc = r#"{"kind": "flow", "flow": {"name": "rotation"}, "domain": [0, 1]}"#;
        assert!(matches!(ingest_str(doc, None, opts()), Err(IngestError::Flow { .. })));
        let doc = r#"{"kind": "sequence", "x": [0, 0], "u": [1, 0], "points": [[1, 0], [0.5]]}"#;
        assert!(matches!(ingest_str(doc, None, opts()), Err(IngestError::Metric { field, .. }) if field == "points[1]"));
    }

    #[test]
    fn topology_document_round_trips() {
        for t in crate::topology::enumerate_topologies(3, false).unwrap() {
            match ingest_str(&topology_document(&t).to_string(), None, opts()).unwrap() {
                Ingested::Topology(u) => assert_eq!(*u, t),
                other => panic!("{other:?}"),
            }
        }
    }
}
