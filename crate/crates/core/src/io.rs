//! File formats: sample CSV in, JSON and OFF out.
//!
//! JSON numbers are written with 17 significant digits, so every `f64`
//! survives a round trip unchanged. Non-finite values become `null`.

use std::fs;
use std::path::Path;

use serde::ser::{Serialize, Serializer};
use serde::Deserialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::geometry::{dot, Facet, Polytope};
use crate::region::{Region, Sample};
use crate::risk::WeightVector;
use crate::solver::SolveOutcome;

/// An `f64` serialised with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

struct Digits<'a>(&'a serde_json::Value);

impl Serialize for Digits<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::{SerializeMap, SerializeSeq};
        use serde_json::Value;
        match self.0 {
            Value::Number(x) if x.is_f64() => Num(x.as_f64().unwrap_or(f64::NAN)).serialize(s),
            Value::Array(a) => {
                let mut seq = s.serialize_seq(Some(a.len()))?;
                for v in a {
                    seq.serialize_element(&Digits(v))?;
                }
                seq.end()
            }
            Value::Object(o) => {
                let mut map = s.serialize_map(Some(o.len()))?;
                for (k, v) in o {
                    map.serialize_entry(k, &Digits(v))?;
                }
                map.end()
            }
            other => other.serialize(s),
        }
    }
}

/// Pretty JSON of any serialisable value, floats written as by [`Num`].
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&Digits(&v))?)
}

/// A parsed sample together with its header, if the file had one.
#[derive(Debug, Clone)]
pub struct SampleTable {
    pub sample: Sample,
    pub header: Option<Vec<String>>,
}

fn parse_cell(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses CSV text: one observation per row, a non-numeric first row is a header.
pub fn parse_sample_str(text: &str) -> Result<SampleTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.iter().any(|f| parse_cell(f).is_none()) {
            header = Some(rec.iter().map(str::to_owned).collect::<Vec<_>>());
            width = Some(rec.len());
            continue;
        }
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRow {
                row: line,
                expected,
                found: rec.len(),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, f)| {
                parse_cell(f).ok_or_else(|| Error::BadCell {
                    row: line,
                    col: col + 1,
                    value: f.to_owned(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Domain("sample file has no data rows".into()));
    }
    Ok(SampleTable {
        sample: Sample::new(rows)?,
        header,
    })
}

pub fn parse_sample_csv(path: impl AsRef<Path>) -> Result<Sample> {
    read_sample_table(path).map(|t| t.sample)
}

pub fn read_sample_table(path: impl AsRef<Path>) -> Result<SampleTable> {
    parse_sample_str(&fs::read_to_string(path)?)
}

/// A JSON array of weights.
pub fn read_weights_json(path: impl AsRef<Path>) -> Result<WeightVector> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Two-column CSV of `(t, r(t))` knots.
pub fn read_generator_csv(path: impl AsRef<Path>) -> Result<Vec<(f64, f64)>> {
    let table = read_sample_table(path)?;
    if table.sample.d() != 2 {
        return Err(Error::Domain(format!(
            "generator file needs two columns, found {}",
            table.sample.d()
        )));
    }
    Ok(table.sample.rows().map(|r| (r[0], r[1])).collect())
}

#[derive(serde::Serialize)]
struct FacetOut {
    normal: Vec<Num>,
    intercept: Num,
    vertices: Vec<usize>,
}

#[derive(serde::Serialize)]
struct RegionOut<'a> {
    dim: usize,
    affine_dim: usize,
    exact: bool,
    rounds: usize,
    warning: Option<&'a str>,
    weights: Vec<Num>,
    vertices: Vec<Vec<Num>>,
    facets: Vec<FacetOut>,
    seed: Option<u64>,
    timings_ms: Option<Num>,
}

/// Region as JSON: vertices, facets and construction metadata.
pub fn region_json(region: &Region, seed: Option<u64>, millis: Option<f64>) -> Result<String> {
    let p = &region.polytope;
    let out = RegionOut {
        dim: p.dim,
        affine_dim: p.affine_dim,
        exact: region.exact,
        rounds: region.rounds,
        warning: region.warning.as_deref(),
        weights: nums(region.weights.as_slice()),
        vertices: p.vertices.iter().map(|v| nums(v)).collect(),
        facets: p
            .facets
            .iter()
            .map(|f| FacetOut {
                normal: nums(&f.normal),
                intercept: Num(f.intercept),
                vertices: f.vertex_ids.clone(),
            })
            .collect(),
        seed,
        timings_ms: millis.map(Num),
    };
    Ok(serde_json::to_string_pretty(&out)?)
}

#[derive(Deserialize)]
struct FacetIn {
    normal: Vec<f64>,
    intercept: f64,
    vertices: Vec<usize>,
}

#[derive(Deserialize)]
struct RegionIn {
    dim: usize,
    affine_dim: usize,
    vertices: Vec<Vec<f64>>,
    facets: Vec<FacetIn>,
}

/// Reads the polytope part of [`region_json`] output.
pub fn parse_region_json(text: &str) -> Result<Polytope> {
    let r: RegionIn = serde_json::from_str(text)?;
    let scale = r
        .vertices
        .iter()
        .flatten()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(Polytope {
        dim: r.dim,
        affine_dim: r.affine_dim,
        vertices: r.vertices,
        facets: r
            .facets
            .into_iter()
            .map(|f| Facet {
                normal: f.normal,
                intercept: f.intercept,
                vertex_ids: f.vertices,
                neighbor_ids: Vec::new(),
            })
            .collect(),
        scale,
    })
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Object File Format mesh of a full-dimensional 3-d polytope.
///
/// Face vertices run counter-clockwise seen from outside.
pub fn polytope_off(p: &Polytope) -> Result<String> {
    if p.dim != 3 {
        return Err(Error::Format(format!("OFF needs a 3-d polytope, got dimension {}", p.dim)));
    }
    if p.is_degenerate() {
        return Err(Error::Format("OFF needs a full-dimensional polytope".into()));
    }
    let mut s = format!("OFF\n{} {} 0\n", p.vertices.len(), p.facets.len());
    for v in &p.vertices {
        s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]));
    }
    for f in &p.facets {
        let pts: Vec<&Vec<f64>> = f.vertex_ids.iter().map(|&i| &p.vertices[i]).collect();
        let k = pts.len() as f64;
        let centre: Vec<f64> = (0..3).map(|j| pts.iter().map(|v| v[j]).sum::<f64>() / k).collect();
        let outward: Vec<f64> = f.normal.iter().map(|x| -x).collect();
        let u: Vec<f64> = pts[0].iter().zip(&centre).map(|(a, c)| a - c).collect();
        let w = cross(&outward, &u);
        let mut order: Vec<(f64, usize)> = f
            .vertex_ids
            .iter()
            .map(|&i| {
                let r: Vec<f64> = p.vertices[i].iter().zip(&centre).map(|(a, c)| a - c).collect();
                (dot(&r, &w).atan2(dot(&r, &u)), i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        s.push_str(&order.len().to_string());
        for (_, i) in order {
            s.push_str(&format!(" {i}"));
        }
        s.push('\n');
    }
    Ok(s)
}

#[derive(serde::Serialize)]
struct ActiveOut {
    normal: Vec<Num>,
    intercept: Num,
}

#[derive(serde::Serialize)]
struct RegionSummaryOut {
    n_vertices: usize,
    n_facets: usize,
    exact: bool,
}

#[derive(serde::Serialize)]
struct TimingsOut {
    region: Num,
    solve: Num,
    total: Num,
}

#[derive(serde::Serialize)]
struct SolveOut<'a> {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    active_facet: Option<ActiveOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Num>,
    certified: bool,
    region: RegionSummaryOut,
    iterations: usize,
    timings_ms: TimingsOut,
    seed: Option<u64>,
    trace: &'a [String],
}

/// Wall-clock split of a run, in milliseconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct Timings {
    pub region_ms: f64,
    pub solve_ms: f64,
    pub total_ms: f64,
}

/// Output formats of [`emit_result`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            other => Err(Error::Format(other.to_owned())),
        }
    }
}

/// Solver outcome as JSON; `x`, `value` and the active facet are omitted
/// unless the status is finite.
pub fn emit_result(out: &SolveOutcome, format: Format, timings: Timings, seed: Option<u64>) -> Result<String> {
    match format {
        Format::Json => {
            let doc = SolveOut {
                status: out.status.as_str(),
                x: out.x.as_deref().map(nums),
                value: out.value.map(Num),
                active_facet: out.active_facet.as_ref().map(|f| ActiveOut {
                    normal: nums(&f.normal),
                    intercept: Num(f.intercept),
                }),
                lambda: out.lambda.map(Num),
                certified: out.certified,
                region: RegionSummaryOut {
                    n_vertices: out.region.n_vertices,
                    n_facets: out.region.n_facets,
                    exact: out.region.exact,
                },
                iterations: out.iterations,
                timings_ms: TimingsOut {
                    region: Num(timings.region_ms),
                    solve: Num(timings.solve_ms),
                    total: Num(timings.total_ms),
                },
                seed,
                trace: &out.trace,
            };
            Ok(serde_json::to_string_pretty(&doc)?)
        }
    }
}
