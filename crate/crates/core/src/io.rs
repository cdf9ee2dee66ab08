//! JSON, JSONL and CSV formats.
//!
//! Trees: `{"vertices": [ids], "edges": [[u, v, ρ]], "leaves": [ids]}` with
//! `leaves` optional. Laws: `{"labels": [ids], "probs": [2^n values]}` in
//! table order. A document is rational when every value is a `"p/q"` string
//! and float when every value is a JSON number; mixing the two is an error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::distribution::JointDistribution;
use crate::error::{Error, Result};
use crate::metrics::MetricSeries;
use crate::scalar::{parse_rational, Exact, Scalar};
use crate::tree::{InfoFlowTree, TreeSpec, VertexId};

/// Requested numeric mode; `Auto` follows the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Auto,
    Rational,
    Float,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Mode::Auto),
            "rational" => Ok(Mode::Rational),
            "float" => Ok(Mode::Float),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}`"))),
        }
    }
}

/// A value in either numeric mode.
#[derive(Debug, Clone, PartialEq)]
pub enum Numeric<R, F> {
    Rational(R),
    Float(F),
}

pub type AnyTree = Numeric<InfoFlowTree<Exact>, InfoFlowTree<f64>>;
pub type AnyDist = Numeric<JointDistribution<Exact>, JointDistribution<f64>>;

/// Tree or law, told apart by the presence of `edges`.
#[derive(Debug, Clone)]
pub enum Document {
    Tree(AnyTree),
    Dist(AnyDist),
}

/// Mode of a list of values. An empty list counts as rational.
pub fn detect_mode<'a>(values: impl IntoIterator<Item = &'a Value>) -> Result<Mode> {
    let (mut strings, mut numbers) = (0usize, 0usize);
    for v in values {
        match v {
            Value::String(_) => strings += 1,
            Value::Number(_) => numbers += 1,
            other => return Err(Error::Parse(format!("expected \"p/q\" or a number, found {other}"))),
        }
    }
    match (strings, numbers) {
        (_, 0) => Ok(Mode::Rational),
        (0, _) => Ok(Mode::Float),
        _ => Err(Error::Parse(
            "rational strings and float numbers are mixed in one document".into(),
        )),
    }
}

fn resolve(requested: Mode, values: &[&Value]) -> Result<Mode> {
    let found = detect_mode(values.iter().copied())?;
    Ok(if requested == Mode::Auto { found } else { requested })
}

/// Reads a value of either mode into `S`, converting across modes when a
/// mode was forced.
pub fn scalar_from_json<S: Scalar>(value: &Value) -> Result<S> {
    S::from_json(value).or_else(|_| match value {
        Value::String(s) => S::from_f64(parse_rational(s)?.to_f64()),
        Value::Number(n) => S::from_f64(
            n.as_f64()
                .ok_or_else(|| Error::Parse(format!("number {n} out of range")))?,
        ),
        other => Err(Error::Parse(format!("expected \"p/q\" or a number, found {other}"))),
    })
}

fn field<'a>(doc: &'a Value, key: &str) -> Result<&'a Value> {
    doc.get(key)
        .ok_or_else(|| Error::Parse(format!("missing field `{key}`")))
}

fn array<'a>(doc: &'a Value, key: &str) -> Result<&'a Vec<Value>> {
    field(doc, key)?
        .as_array()
        .ok_or_else(|| Error::Parse(format!("field `{key}` must be an array")))
}

fn vertex(v: &Value) -> Result<VertexId> {
    v.as_u64()
        .and_then(|x| u32::try_from(x).ok())
        .map(VertexId)
        .ok_or_else(|| Error::Parse(format!("vertex id must be a u32, found {v}")))
}

fn vertex_list(doc: &Value, key: &str) -> Result<Vec<VertexId>> {
    array(doc, key)?.iter().map(vertex).collect()
}

fn edge_triples(doc: &Value) -> Result<Vec<[&Value; 3]>> {
    array(doc, "edges")?
        .iter()
        .map(|e| match e.as_array().map(Vec::as_slice) {
            Some([u, v, r]) => Ok([u, v, r]),
            _ => Err(Error::Parse(format!("edge must be [u, v, rho], found {e}"))),
        })
        .collect()
}

/// Unvalidated tree description; structural problems are left for
/// [`crate::tree::validate`].
pub fn tree_spec_from_json<S: Scalar>(doc: &Value) -> Result<TreeSpec<S>> {
    let edges = edge_triples(doc)?
        .into_iter()
        .map(|[u, v, r]| Ok((vertex(u)?, vertex(v)?, scalar_from_json(r)?)))
        .collect::<Result<_>>()?;
    let leaves = match doc.get("leaves") {
        None | Some(Value::Null) => None,
        Some(_) => Some(vertex_list(doc, "leaves")?),
    };
    Ok(TreeSpec {
        vertices: vertex_list(doc, "vertices")?,
        edges,
        leaves,
    })
}

/// Mode a tree document resolves to under `requested`.
pub fn tree_mode(doc: &Value, requested: Mode) -> Result<Mode> {
    let rhos: Vec<&Value> = edge_triples(doc)?.into_iter().map(|[_, _, r]| r).collect();
    resolve(requested, &rhos)
}

pub fn tree_from_json(doc: &Value, requested: Mode) -> Result<AnyTree> {
    Ok(match tree_mode(doc, requested)? {
        Mode::Float => Numeric::Float(InfoFlowTree::new(tree_spec_from_json(doc)?)?),
        _ => Numeric::Rational(InfoFlowTree::new(tree_spec_from_json(doc)?)?),
    })
}

/// Leaves are always written, so a reread tree keeps its leaf order.
pub fn tree_to_json<S: Scalar>(tree: &InfoFlowTree<S>) -> Value {
    let spec = tree.to_spec();
    let mut doc = json!({
        "vertices": spec.vertices,
        "edges": spec.edges.iter().map(|(u, v, r)| json!([u, v, r.to_json()])).collect::<Vec<_>>(),
    });
    if let Some(leaves) = spec.leaves {
        doc["leaves"] = json!(leaves);
    }
    doc
}

pub fn dist_from_json(doc: &Value, requested: Mode) -> Result<AnyDist> {
    let labels = vertex_list(doc, "labels")?;
    let probs = array(doc, "probs")?;
    let refs: Vec<&Value> = probs.iter().collect();
    fn build<S: Scalar>(labels: Vec<VertexId>, probs: &[Value]) -> Result<JointDistribution<S>> {
        JointDistribution::new(labels, probs.iter().map(scalar_from_json).collect::<Result<_>>()?)
    }
    Ok(match resolve(requested, &refs)? {
        Mode::Float => Numeric::Float(build(labels, probs)?),
        _ => Numeric::Rational(build(labels, probs)?),
    })
}

pub fn dist_to_json<S: Scalar>(dist: &JointDistribution<S>) -> Value {
    json!({
        "mode": S::MODE,
        "labels": dist.labels(),
        "probs": dist.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
    })
}

pub fn document_from_json(doc: &Value, requested: Mode) -> Result<Document> {
    if doc.get("edges").is_some() {
        Ok(Document::Tree(tree_from_json(doc, requested)?))
    } else if doc.get("probs").is_some() {
        Ok(Document::Dist(dist_from_json(doc, requested)?))
    } else {
        Err(Error::Parse("document has neither `edges` nor `probs`".into()))
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Text form of a scalar in reports: `p/q` or the shortest decimal that
/// reads back to the same `f64`.
pub fn format_scalar<S: Scalar>(x: &S) -> String {
    match x.to_json() {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// CSV with header `metric,t,value`, rows in input order.
pub fn write_series_csv<W: Write, S: Scalar>(out: W, series: &[MetricSeries<S>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "t", "value"])?;
    for s in series {
        for (t, value) in &s.values {
            w.write_record([s.metric.as_str(), &t.to_string(), &format_scalar(value)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub metric: String,
    pub t: usize,
    pub value: String,
}

impl SeriesRow {
    pub fn value_as<S: Scalar>(&self) -> Result<S> {
        if self.value.contains('/') {
            scalar_from_json(&Value::String(self.value.clone()))
        } else {
            let x: f64 = self
                .value
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{}`", self.value)))?;
            S::from_f64(x)
        }
    }
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["metric", "t", "value"] {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Regroups CSV rows into series by metric, preserving row order.
pub fn series_from_rows<S: Scalar>(rows: &[SeriesRow], n: usize) -> Result<Vec<MetricSeries<S>>> {
    let mut out: Vec<MetricSeries<S>> = Vec::new();
    for row in rows {
        let value = row.value_as::<S>()?;
        match out.iter_mut().find(|s| s.metric == row.metric) {
            Some(s) => s.values.push((row.t, value)),
            None => out.push(MetricSeries {
                metric: row.metric.clone(),
                n,
                values: vec![(row.t, value)],
            }),
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(out: W, records: &[T]) -> Result<()> {
    let mut out = BufWriter::new(out);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Blank lines are skipped.
pub fn read_jsonl<R: Read, T: DeserializeOwned>(input: R) -> Result<Vec<T>> {
    BufReader::new(input)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|line| Ok(serde_json::from_str(&line?)?))
        .collect()
}

/// Output layout for record lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Jsonl,
}

impl ReportFormat {
    /// From a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("jsonl") => ReportFormat::Jsonl,
            _ => ReportFormat::Json,
        }
    }
}

/// Writes metric series in any of the three layouts.
pub fn emit_series<S: Scalar>(path: &Path, series: &[MetricSeries<S>], format: ReportFormat) -> Result<()> {
    let file = File::create(path)?;
    match format {
        ReportFormat::Csv => write_series_csv(file, series),
        ReportFormat::Json => write_json(path, &json!(series.iter().map(series_to_json).collect::<Vec<_>>())),
        ReportFormat::Jsonl => write_jsonl(file, &series.iter().map(series_to_json).collect::<Vec<_>>()),
    }
}

pub fn series_to_json<S: Scalar>(series: &MetricSeries<S>) -> Value {
    json!({
        "metric": series.metric,
        "n": series.n,
        "mode": S::MODE,
        "values": series.values.iter().map(|(t, v)| json!([t, v.to_json()])).collect::<Vec<_>>(),
    })
}

/// Writes serializable records as a JSON array or as JSONL.
pub fn emit_records<T: Serialize>(path: &Path, records: &[T], format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Jsonl => write_jsonl(File::create(path)?, records),
        ReportFormat::Json => write_json(path, &serde_json::to_value(records)?),
        ReportFormat::Csv => Err(Error::InvalidArgument(
            "CSV output is only available for metric series".into(),
        )),
    }
}
