//! JSON documents for observables, channels, universes and verdicts.
//!
//! Complex matrices are nested arrays of `[re, im]` pairs. Every document
//! carries a mandatory `version` field. Unbiased qubit observables may be
//! written as `{"kind": "observable", "bloch": [x, y, z]}`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::galois::Universe;
use crate::linops::{ComplexMatrix, HermitianOperator, C64};
use crate::qmodel::{Channel, Instrument, ModelError, Observable, QObject, StochasticMatrix, UnbiasedQubitObservable};
use crate::relations::{Answer, RelationVerdict, Witness};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("schema error in `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("stale universe file: relation hash {found} does not match objects ({expected})")]
    StaleHash { expected: String, found: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Schema(e.to_string())
    }
}

fn field(field: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Field { field: field.into(), message: message.into() }
}

pub type MatrixDoc = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_doc(m: &ComplexMatrix) -> MatrixDoc {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn matrix_from_doc(doc: &MatrixDoc, name: &str) -> Result<ComplexMatrix, IoError> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if let Some(r) = doc.iter().position(|row| row.len() != cols) {
        return Err(field(format!("{name}[{r}]"), format!("row has {} entries, expected {cols}", doc[r].len())));
    }
    let data = doc.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    ComplexMatrix::from_vec(rows, cols, data).map_err(|e| field(name, e.to_string()))
}

fn hermitian_from_doc(doc: &MatrixDoc, name: &str, dim: usize) -> Result<HermitianOperator, IoError> {
    let m = matrix_from_doc(doc, name)?;
    if m.rows() != dim || m.cols() != dim {
        return Err(field(name, format!("expected {dim}×{dim}, got {}×{}", m.rows(), m.cols())));
    }
    HermitianOperator::new(m).map_err(|e| field(name, e.to_string()))
}

/// One observable or channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObjectDoc {
    Observable {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        outcomes: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        effects: Option<Vec<MatrixDoc>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bloch: Option<[f64; 3]>,
    },
    Channel {
        dim_in: usize,
        dim_out: usize,
        choi: MatrixDoc,
    },
}

impl ObjectDoc {
    pub fn from_observable(a: &Observable) -> Self {
        ObjectDoc::Observable {
            dim: Some(a.dim()),
            outcomes: Some(a.outcomes().to_vec()),
            effects: Some(a.effects().iter().map(|e| matrix_to_doc(e.matrix())).collect()),
            bloch: None,
        }
    }

    pub fn from_channel(c: &Channel) -> Self {
        ObjectDoc::Channel { dim_in: c.dim_in(), dim_out: c.dim_out(), choi: matrix_to_doc(c.choi().matrix()) }
    }

    pub fn from_object(o: &QObject) -> Self {
        match o {
            QObject::Observable(a) => Self::from_observable(a),
            QObject::Channel(c) => Self::from_channel(c),
        }
    }

    pub fn to_object(&self) -> Result<QObject, IoError> {
        match self {
            ObjectDoc::Observable { bloch: Some(v), dim, outcomes, effects } => {
                if effects.is_some() || outcomes.is_some() || dim.is_some_and(|d| d != 2) {
                    return Err(field("bloch", "the Bloch shorthand excludes dim ≠ 2, outcomes and effects"));
                }
                let a = UnbiasedQubitObservable::new(*v).map_err(|e| field("bloch", e.to_string()))?;
                Ok(QObject::Observable(a.to_observable()))
            }
            ObjectDoc::Observable { dim, outcomes, effects, bloch: None } => {
                let Some(effects) = effects else { return Err(field("effects", "missing (or give `bloch`)")) };
                let Some(first) = effects.first() else { return Err(field("effects", "empty list")) };
                let d = dim.unwrap_or(first.len());
                let ops = effects
                    .iter()
                    .enumerate()
                    .map(|(i, e)| hermitian_from_doc(e, &format!("effects[{i}]"), d))
                    .collect::<Result<Vec<_>, _>>()?;
                let labels = match outcomes {
                    Some(o) if o.len() != ops.len() => {
                        return Err(field("outcomes", format!("{} labels for {} effects", o.len(), ops.len())))
                    }
                    Some(o) => o.clone(),
                    None => (0..ops.len()).map(|i| i.to_string()).collect(),
                };
                Ok(QObject::Observable(Observable::new(labels, ops).map_err(|e| field("effects", e.to_string()))?))
            }
            ObjectDoc::Channel { dim_in, dim_out, choi } => {
                let j = hermitian_from_doc(choi, "choi", dim_in * dim_out)?;
                Ok(QObject::Channel(Channel::from_choi(*dim_in, *dim_out, j).map_err(|e| field("choi", e.to_string()))?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectFile {
    pub version: u32,
    #[serde(flatten)]
    pub object: ObjectDoc,
}

fn check_version(v: u32) -> Result<(), IoError> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(IoError::Version(v))
    }
}

/// Reads the `version` field first so that old documents fail with a version error.
fn version_of(text: &str) -> Result<u32, IoError> {
    let v: Value = serde_json::from_str(text)?;
    let Some(n) = v.get("version") else { return Err(field("version", "missing")) };
    n.as_u64().and_then(|n| u32::try_from(n).ok()).ok_or_else(|| field("version", "not a non-negative integer"))
}

pub fn parse_object(text: &str) -> Result<QObject, IoError> {
    check_version(version_of(text)?)?;
    let f: ObjectFile = serde_json::from_str(text)?;
    f.object.to_object()
}

pub fn object_to_string(o: &QObject, indent: Option<usize>) -> String {
    let f = ObjectFile { version: FORMAT_VERSION, object: ObjectDoc::from_object(o) };
    to_string(&f, indent)
}

/// Serializes with the given indentation, compact when `None`.
pub fn to_string<T: Serialize>(v: &T, indent: Option<usize>) -> String {
    match indent {
        None => serde_json::to_string(v).expect("serializable"),
        Some(n) => {
            let pad = vec![b' '; n];
            let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
            let mut out = Vec::new();
            let mut ser = serde_json::Serializer::with_formatter(&mut out, fmt);
            v.serialize(&mut ser).expect("serializable");
            String::from_utf8(out).expect("utf-8 output")
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::File { path: path.display().to_string(), source })
}

pub fn load_object(path: &Path) -> Result<QObject, IoError> {
    parse_object(&read_text(path)?)
}

/// Finite universe with an optional precomputed compatibility matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniverseFile {
    pub version: u32,
    pub observables: Vec<ObjectDoc>,
    pub channels: Vec<ObjectDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Vec<Vec<Answer>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
}

/// Loaded universe contents.
#[derive(Debug, Clone, PartialEq)]
pub struct UniverseData {
    pub observables: Vec<Observable>,
    pub channels: Vec<Channel>,
    pub relation: Option<Vec<Answer>>,
}

/// SHA-256 over the canonical serialization of the object lists.
pub fn universe_hash(observables: &[Observable], channels: &[Channel]) -> String {
    let obs: Vec<ObjectDoc> = observables.iter().map(ObjectDoc::from_observable).collect();
    let chans: Vec<ObjectDoc> = channels.iter().map(ObjectDoc::from_channel).collect();
    let canonical = serde_json::to_string(&json!({ "observables": obs, "channels": chans })).expect("serializable");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

impl UniverseFile {
    pub fn from_universe(u: &Universe) -> Self {
        let nc = u.channels().len();
        let relation = u.relation().chunks(nc.max(1)).map(<[Answer]>::to_vec).collect();
        UniverseFile {
            version: FORMAT_VERSION,
            observables: u.observables().iter().map(ObjectDoc::from_observable).collect(),
            channels: u.channels().iter().map(ObjectDoc::from_channel).collect(),
            relation: (!u.observables().is_empty()).then_some(relation),
            hash: Some(universe_hash(u.observables(), u.channels())),
        }
    }

    pub fn load(&self) -> Result<UniverseData, IoError> {
        check_version(self.version)?;
        let observables = self
            .observables
            .iter()
            .enumerate()
            .map(|(i, d)| match d.to_object() {
                Ok(QObject::Observable(a)) => Ok(a),
                Ok(_) => Err(field(format!("observables[{i}]"), "expected an observable")),
                Err(e) => Err(field(format!("observables[{i}]"), e.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(i, d)| match d.to_object() {
                Ok(QObject::Channel(c)) => Ok(c),
                Ok(_) => Err(field(format!("channels[{i}]"), "expected a channel")),
                Err(e) => Err(field(format!("channels[{i}]"), e.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let relation = match &self.relation {
            None => None,
            Some(rows) => {
                let expected = universe_hash(&observables, &channels);
                match &self.hash {
                    None => return Err(field("hash", "required alongside `relation`")),
                    Some(h) if *h != expected => return Err(IoError::StaleHash { expected, found: h.clone() }),
                    Some(_) => {}
                }
                if rows.len() != observables.len() {
                    return Err(field("relation", format!("{} rows for {} observables", rows.len(), observables.len())));
                }
                if let Some(r) = rows.iter().position(|r| r.len() != channels.len()) {
                    return Err(field(format!("relation[{r}]"), format!("expected {} entries", channels.len())));
                }
                Some(rows.concat())
            }
        };
        Ok(UniverseData { observables, channels, relation })
    }
}

pub fn parse_universe(text: &str) -> Result<UniverseData, IoError> {
    check_version(version_of(text)?)?;
    let f: UniverseFile = serde_json::from_str(text)?;
    f.load()
}

pub fn stochastic_json(m: &StochasticMatrix) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.n_to()).map(|t| (0..m.n_from()).map(|f| m.get(t, f)).collect()).collect();
    json!(rows)
}

pub fn instrument_json(inst: &Instrument) -> Value {
    json!({
        "dim_in": inst.dim_in(),
        "dim_out": inst.dim_out(),
        "outcomes": inst.outcomes(),
        "blocks": inst.blocks().iter().map(|b| matrix_to_doc(b.matrix())).collect::<Vec<_>>(),
    })
}

pub fn witness_json(w: &Witness) -> Value {
    match w {
        Witness::Stochastic(m) => json!({ "stochastic": stochastic_json(m) }),
        Witness::Channel(c) => json!({ "channel": ObjectDoc::from_channel(c) }),
        Witness::ObservableMixture(parts) => json!({
            "observable_mixture": parts
                .iter()
                .map(|p| json!({ "index": p.index, "weight": p.weight, "map": stochastic_json(&p.map) }))
                .collect::<Vec<_>>()
        }),
        Witness::ChannelMixture(parts) => json!({
            "channel_mixture": parts
                .iter()
                .map(|p| json!({ "index": p.index, "weight": p.weight, "map": ObjectDoc::from_channel(&p.map) }))
                .collect::<Vec<_>>()
        }),
        Witness::Instrument(inst) => json!({ "instrument": instrument_json(inst) }),
        Witness::Joint { joint, margin_a, margin_b } => json!({
            "joint": {
                "observable": ObjectDoc::from_observable(joint),
                "margin_a": stochastic_json(margin_a),
                "margin_b": stochastic_json(margin_b),
            }
        }),
    }
}

/// Verdict with its witness or certificate and the residuals it was accepted with.
pub fn verdict_json(v: &RelationVerdict) -> Value {
    json!({
        "answer": v.answer,
        "witness": v.witness.as_ref().map(witness_json),
        "certificate": v.certificate,
        "diagnostics": v.diagnostics,
    })
}
