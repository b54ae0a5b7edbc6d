//! Spec documents: canonical JSON carrier of a composition.
//!
//! Objects are written with sorted keys and floats in shortest round-trip
//! form, so `serialize(parse(text))` reproduces canonical text byte for byte.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::bench::reference::{ReferenceBest, ReferenceMethod};
use crate::composition::{CompositionSpec, TermSpec};
use crate::error::{Error, Result};
use crate::mdrf::{CodomainDistribution, FieldSpec};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metadata {
    /// How the spec was built, e.g. `{"builder": "first_order", "r": 20}`.
    pub recipe: Option<Map<String, Value>>,
    /// Target variance shares by term index.
    pub targets: Option<Vec<(usize, f64)>>,
    pub reference_best: Option<ReferenceBest>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        self.recipe.is_none() && self.targets.is_none() && self.reference_best.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecDocument {
    pub spec: CompositionSpec,
    pub metadata: Metadata,
}

impl SpecDocument {
    pub fn new(spec: CompositionSpec) -> Self {
        Self {
            spec,
            metadata: Metadata::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDocument {
    format_version: u64,
    n_vars: usize,
    w0: f64,
    global_seed: u64,
    terms: Vec<WireTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<WireMetadata>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTerm {
    weight: f64,
    field: WireField,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireField {
    field_id: u64,
    active_vars: Vec<usize>,
    resolution: Vec<u32>,
    shift: Vec<f64>,
    smooth_exponent: f64,
    codomain: WireCodomain,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireCodomain {
    values: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recipe: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    targets: Option<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_best: Option<WireReference>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireReference {
    value: f64,
    point: Vec<f64>,
    certified: bool,
    method: String,
}

fn method_from_str(s: &str) -> Option<ReferenceMethod> {
    [
        ReferenceMethod::Constant,
        ReferenceMethod::SeparableScan,
        ReferenceMethod::BranchAndBound,
        ReferenceMethod::Multistart,
    ]
    .into_iter()
    .find(|m| m.as_str() == s)
}

fn to_wire(doc: &SpecDocument) -> WireDocument {
    let spec = &doc.spec;
    let terms = spec
        .terms()
        .iter()
        .map(|t| WireTerm {
            weight: t.weight,
            field: WireField {
                field_id: t.field.field_id(),
                active_vars: t.field.active_vars().to_vec(),
                resolution: t.field.resolution().to_vec(),
                shift: t.field.shift().to_vec(),
                smooth_exponent: t.field.smooth_exponent(),
                codomain: WireCodomain {
                    values: t.field.codomain().values().to_vec(),
                    probs: t.field.codomain().probs().to_vec(),
                },
            },
        })
        .collect();
    let m = &doc.metadata;
    let metadata = (!m.is_empty()).then(|| WireMetadata {
        recipe: m.recipe.clone(),
        targets: m.targets.clone(),
        reference_best: m.reference_best.as_ref().map(|r| WireReference {
            value: r.value,
            point: r.point.clone(),
            certified: r.certified,
            method: r.method.as_str().to_string(),
        }),
    });
    WireDocument {
        format_version: FORMAT_VERSION,
        n_vars: spec.n_vars(),
        w0: spec.w0(),
        global_seed: spec.global_seed(),
        terms,
        metadata,
    }
}

/// Prefixes the path of an invariant violation raised by a constructor.
fn at(prefix: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Invalid { path, message } => Error::Invalid {
            path: format!("{prefix}.{path}"),
            message,
        },
        other => other,
    }
}

fn from_wire(wire: WireDocument) -> Result<SpecDocument> {
    let mut terms = Vec::with_capacity(wire.terms.len());
    for (k, t) in wire.terms.into_iter().enumerate() {
        let prefix = format!("terms[{k}].field");
        let codomain_prefix = format!("{prefix}.codomain");
        let codomain = CodomainDistribution::new(t.field.codomain.values, t.field.codomain.probs)
            .map_err(at(&codomain_prefix))?;
        let field = FieldSpec::new(
            t.field.field_id,
            t.field.active_vars,
            t.field.resolution,
            t.field.shift,
            codomain,
            t.field.smooth_exponent,
        )
        .map_err(at(&prefix))?;
        terms.push(TermSpec {
            weight: t.weight,
            field,
        });
    }
    let spec = CompositionSpec::new(wire.n_vars, wire.w0, terms, wire.global_seed)?;
    let mut metadata = Metadata::default();
    if let Some(m) = wire.metadata {
        metadata.recipe = m.recipe;
        if let Some(targets) = m.targets {
            if let Some((i, _)) = targets
                .iter()
                .enumerate()
                .find(|(_, (k, _))| *k >= spec.terms().len())
            {
                return Err(Error::invalid(
                    format!("metadata.targets[{i}]"),
                    format!("term index out of range for {} terms", spec.terms().len()),
                ));
            }
            metadata.targets = Some(targets);
        }
        if let Some(r) = m.reference_best {
            let method = method_from_str(&r.method).ok_or_else(|| {
                Error::invalid(
                    "metadata.reference_best.method",
                    format!("unknown method {:?}", r.method),
                )
            })?;
            if r.point.len() != spec.n_vars() {
                return Err(Error::invalid(
                    "metadata.reference_best.point",
                    format!(
                        "expected {} coordinates, got {}",
                        spec.n_vars(),
                        r.point.len()
                    ),
                ));
            }
            metadata.reference_best = Some(ReferenceBest {
                value: r.value,
                point: r.point,
                certified: r.certified,
                method,
            });
        }
    }
    Ok(SpecDocument { spec, metadata })
}

/// Canonical JSON text of a document, with trailing newline.
pub fn serialize_document(doc: &SpecDocument) -> String {
    // Round-tripping through `Value` sorts every object's keys.
    let value =
        serde_json::to_value(to_wire(doc)).expect("spec documents contain only finite numbers");
    let mut text = serde_json::to_string_pretty(&value).expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn serialize(spec: &CompositionSpec) -> String {
    serialize_document(&SpecDocument::new(spec.clone()))
}

pub fn parse_document(text: &str) -> Result<SpecDocument> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value.get("format_version") {
        None => {
            return Err(Error::Parse {
                path: "format_version".into(),
                message: "missing field".into(),
            })
        }
        Some(v) if v.as_u64() != Some(FORMAT_VERSION) => {
            return Err(Error::Parse {
                path: "format_version".into(),
                message: format!("unsupported format version {v}, expected {FORMAT_VERSION}"),
            })
        }
        Some(_) => {}
    }
    let wire: WireDocument = serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })?;
    from_wire(wire)
}

pub fn parse(text: &str) -> Result<CompositionSpec> {
    parse_document(text).map(|d| d.spec)
}

/// Hex SHA-256 of the canonical serialization.
pub fn content_hash(spec: &CompositionSpec) -> String {
    hash_text(&serialize(spec))
}

pub fn hash_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
