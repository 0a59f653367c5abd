//! Structured-text schema for bundle specs and intersection data.
//!
//! Files are TOML tables. Rationals are strings `"p"`, `"p/q"` or decimals;
//! complex rationals are strings such as `"1/2-3i"`.

use crate::error::CliError;
use parh_core::filtered::{
    Candidate, ComponentPairings, ComponentSpec, Crossing, FilteredSpec, Grading, IntersectionData, ModelBlock,
};
use parh_core::rational::{fmt_cq, fmt_q, parse_cq, parse_q, CQ, Q};
use parh_core::weights::{ResidueDatum, WeightSet};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Version accepted by the parser and written by the serializer.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightText {
    pub weight: String,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueText {
    pub weight: String,
    pub eigenvalue: String,
    pub jordan_type: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingText {
    pub degree: u64,
    pub characters: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentText {
    pub label: String,
    #[serde(default = "zero_text")]
    pub anchor: String,
    pub weights: Vec<WeightText>,
    /// Omitted means semisimple residues with eigenvalue zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residues: Option<Vec<ResidueText>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<GradingText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockText {
    #[serde(default)]
    pub irregular: Vec<String>,
    pub weight: String,
    #[serde(default = "zero_text")]
    pub eigenvalue: String,
    pub jordan_type: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub character: Option<u64>,
}

/// On-disk form of a [`FilteredSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecText {
    pub schema_version: u32,
    pub label: String,
    pub rank: usize,
    #[serde(default = "zero_text")]
    pub lambda: String,
    pub components: Vec<ComponentText>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub blocks: Vec<BlockText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GysinText {
    pub weight: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairingText {
    pub label: String,
    pub hil: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hihil: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1_hi_lattice: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gysin: Vec<GysinText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankText {
    pub ci: String,
    pub cj: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossingText {
    pub i: usize,
    pub j: usize,
    pub cl: String,
    pub ranks: Vec<RankText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionText {
    pub block: usize,
    pub jordan_type: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtherWeightsText {
    pub component: usize,
    pub weights: Vec<WeightText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateText {
    pub selection: Vec<SelectionText>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_degree: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub other_weights: Vec<OtherWeightsText>,
}

/// On-disk form of [`IntersectionData`] plus optional stability candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionText {
    pub schema_version: u32,
    pub dim_x: u32,
    pub deg_l_lattice: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ch2_lattice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1sq_lattice: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_lattice_degrees: Option<Vec<String>>,
    pub components: Vec<PairingText>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub crossings: Vec<CrossingText>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateText>,
}

fn zero_text() -> String {
    "0".into()
}

/// Parsed intersection file.
#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub data: IntersectionData,
    pub candidates: Vec<Candidate>,
}

fn field_err(path: &str, field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema { path: path.into(), detail: format!("{field}: {msg}") }
}

fn rat(path: &str, field: &str, text: &str) -> Result<Q, CliError> {
    parse_q(text).map_err(|e| field_err(path, field, e))
}

fn crat(path: &str, field: &str, text: &str) -> Result<CQ, CliError> {
    parse_cq(text).map_err(|e| field_err(path, field, e))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), detail: e.to_string() })
}

fn check_version(path: &str, v: u32) -> Result<(), CliError> {
    if v != SCHEMA_VERSION {
        return Err(CliError::SchemaVersion { path: path.into(), found: v, expected: SCHEMA_VERSION });
    }
    Ok(())
}

fn weight_pairs(path: &str, field: &str, ws: &[WeightText]) -> Result<Vec<(Q, usize)>, CliError> {
    ws.iter()
        .enumerate()
        .map(|(k, w)| Ok((rat(path, &format!("{field}[{k}].weight"), &w.weight)?, w.multiplicity)))
        .collect()
}

fn weight_texts(w: &WeightSet) -> Vec<WeightText> {
    w.entries().iter().map(|e| WeightText { weight: fmt_q(&e.weight), multiplicity: e.multiplicity }).collect()
}

impl SpecText {
    /// Parses TOML text; `path` labels diagnostics.
    pub fn from_toml(text: &str, path: &str) -> Result<Self, CliError> {
        let raw: SpecText = toml::from_str(text).map_err(|e| CliError::Schema { path: path.into(), detail: e.to_string() })?;
        check_version(path, raw.schema_version)?;
        Ok(raw)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec text is serializable")
    }

    /// Builds the validated spec; invariant failures name the component or block.
    pub fn to_spec(&self, path: &str) -> Result<FilteredSpec, CliError> {
        let invariant = |field: String, e: &dyn KindError| CliError::Invariant {
            path: path.into(),
            field,
            kind: e.kind(),
            detail: e.to_string(),
        };
        let mut comps = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let field = format!("components[{i}]");
            let anchor = rat(path, &format!("{field}.anchor"), &c.anchor)?;
            let ws = WeightSet::new(c.label.clone(), weight_pairs(path, &format!("{field}.weights"), &c.weights)?, anchor)
                .map_err(|e| invariant(format!("{field}.weights"), &e))?;
            let grading = c.grading.as_ref().map(|g| Grading { degree: g.degree, characters: g.characters.clone() });
            let comp = match &c.residues {
                None if grading.is_none() => ComponentSpec::semisimple(ws),
                None => {
                    let sem = ComponentSpec::semisimple(ws.clone());
                    ComponentSpec::new(ws, sem.residues, grading).map_err(|e| invariant(field.clone(), &e))?
                }
                Some(rs) => {
                    let mut res = Vec::with_capacity(rs.len());
                    for (k, r) in rs.iter().enumerate() {
                        let f = format!("{field}.residues[{k}]");
                        let d = ResidueDatum::new(
                            rat(path, &format!("{f}.weight"), &r.weight)?,
                            crat(path, &format!("{f}.eigenvalue"), &r.eigenvalue)?,
                            r.jordan_type.clone(),
                        )
                        .map_err(|e| invariant(f.clone(), &e))?;
                        res.push(d);
                    }
                    ComponentSpec::new(ws, res, grading).map_err(|e| invariant(field.clone(), &e))?
                }
            };
            comps.push(comp);
        }
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (k, b) in self.blocks.iter().enumerate() {
            let f = format!("blocks[{k}]");
            let irregular =
                b.irregular.iter().enumerate().map(|(j, t)| crat(path, &format!("{f}.irregular[{j}]"), t)).collect::<Result<Vec<_>, _>>()?;
            let mut block = ModelBlock::new(
                irregular,
                rat(path, &format!("{f}.weight"), &b.weight)?,
                crat(path, &format!("{f}.eigenvalue"), &b.eigenvalue)?,
                b.jordan_type.clone(),
            )
            .map_err(|e| invariant(f.clone(), &e))?;
            block.character = b.character;
            blocks.push(block);
        }
        let lambda = crat(path, "lambda", &self.lambda)?;
        FilteredSpec::new(self.label.clone(), self.rank, lambda, comps, blocks).map_err(|e| invariant("spec".into(), &e))
    }

    /// Canonical text form of a validated spec.
    pub fn from_spec(s: &FilteredSpec) -> Self {
        SpecText {
            schema_version: SCHEMA_VERSION,
            label: s.label.clone(),
            rank: s.rank,
            lambda: fmt_cq(&s.lambda),
            components: s
                .components
                .iter()
                .map(|c| {
                    let semisimple = c.grading.is_none() && *c == ComponentSpec::semisimple(c.weights.clone());
                    ComponentText {
                        label: c.label().to_string(),
                        anchor: fmt_q(c.weights.window_anchor()),
                        weights: weight_texts(&c.weights),
                        residues: (!semisimple).then(|| {
                            c.residues
                                .iter()
                                .map(|r| ResidueText {
                                    weight: fmt_q(&r.weight),
                                    eigenvalue: fmt_cq(&r.eigenvalue),
                                    jordan_type: r.jordan_type.clone(),
                                })
                                .collect()
                        }),
                        grading: c.grading.as_ref().map(|g| GradingText { degree: g.degree, characters: g.characters.clone() }),
                    }
                })
                .collect(),
            blocks: s
                .blocks
                .iter()
                .map(|b| BlockText {
                    irregular: b.irregular.iter().map(fmt_cq).collect(),
                    weight: fmt_q(&b.weight),
                    eigenvalue: fmt_cq(&b.eigenvalue),
                    jordan_type: b.jordan_type.clone(),
                    character: b.character,
                })
                .collect(),
        }
    }
}

/// Errors that carry a machine-readable kind.
trait KindError: std::fmt::Display {
    fn kind(&self) -> &'static str;
}

impl KindError for parh_core::filtered::FilteredError {
    fn kind(&self) -> &'static str {
        parh_core::filtered::FilteredError::kind(self)
    }
}

impl KindError for parh_core::weights::WeightError {
    fn kind(&self) -> &'static str {
        parh_core::weights::WeightError::kind(self)
    }
}

impl IntersectionText {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, CliError> {
        let raw: IntersectionText = toml::from_str(text).map_err(|e| CliError::Schema { path: path.into(), detail: e.to_string() })?;
        check_version(path, raw.schema_version)?;
        Ok(raw)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("intersection text is serializable")
    }

    /// Builds the intersection data and checks it against `spec`.
    pub fn to_intersection(&self, spec: &FilteredSpec, path: &str) -> Result<Intersection, CliError> {
        let opt = |field: &str, t: &Option<String>| t.as_deref().map(|t| rat(path, field, t)).transpose();
        let mut components = Vec::with_capacity(self.components.len());
        for (i, c) in self.components.iter().enumerate() {
            let f = format!("components[{i}]");
            let mut gysin = BTreeMap::new();
            for (k, g) in c.gysin.iter().enumerate() {
                let w = rat(path, &format!("{f}.gysin[{k}].weight"), &g.weight)?;
                let v = rat(path, &format!("{f}.gysin[{k}].value"), &g.value)?;
                if gysin.insert(w, v).is_some() {
                    return Err(field_err(path, &format!("{f}.gysin[{k}]"), "weight listed twice"));
                }
            }
            components.push(ComponentPairings {
                label: c.label.clone(),
                hil: rat(path, &format!("{f}.hil"), &c.hil)?,
                hihil: opt(&format!("{f}.hihil"), &c.hihil)?,
                c1_hi_lattice: opt(&format!("{f}.c1_hi_lattice"), &c.c1_hi_lattice)?,
                gysin,
            });
        }
        let mut crossings = Vec::with_capacity(self.crossings.len());
        for (k, c) in self.crossings.iter().enumerate() {
            let f = format!("crossings[{k}]");
            let ranks = c
                .ranks
                .iter()
                .enumerate()
                .map(|(j, r)| {
                    Ok((rat(path, &format!("{f}.ranks[{j}].ci"), &r.ci)?, rat(path, &format!("{f}.ranks[{j}].cj"), &r.cj)?, r.rank))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            crossings.push(Crossing { i: c.i, j: c.j, cl: rat(path, &format!("{f}.cl"), &c.cl)?, ranks });
        }
        let block_lattice_degrees = self
            .block_lattice_degrees
            .as_ref()
            .map(|v| v.iter().enumerate().map(|(k, t)| rat(path, &format!("block_lattice_degrees[{k}]"), t)).collect::<Result<Vec<_>, _>>())
            .transpose()?;
        let data = IntersectionData {
            dim_x: self.dim_x,
            deg_l_lattice: rat(path, "deg_l_lattice", &self.deg_l_lattice)?,
            ch2_lattice: opt("ch2_lattice", &self.ch2_lattice)?,
            c1sq_lattice: opt("c1sq_lattice", &self.c1sq_lattice)?,
            components,
            crossings,
            block_lattice_degrees,
        };
        data.validate_against(spec).map_err(|e| CliError::Invariant {
            path: path.into(),
            field: "intersection".into(),
            kind: e.kind(),
            detail: e.to_string(),
        })?;
        let mut candidates = Vec::with_capacity(self.candidates.len());
        for (k, c) in self.candidates.iter().enumerate() {
            let f = format!("candidates[{k}]");
            let mut other_weights = BTreeMap::new();
            for (j, o) in c.other_weights.iter().enumerate() {
                other_weights.insert(o.component, weight_pairs(path, &format!("{f}.other_weights[{j}].weights"), &o.weights)?);
            }
            candidates.push(Candidate {
                selection: c.selection.iter().map(|s| (s.block, s.jordan_type.clone())).collect(),
                lattice_degree: opt(&format!("{f}.lattice_degree"), &c.lattice_degree)?,
                other_weights,
            });
        }
        Ok(Intersection { data, candidates })
    }
}

/// Reads and validates a spec file.
pub fn parse_spec(path: &Path) -> Result<(FilteredSpec, String), CliError> {
    let text = read(path)?;
    let p = path.display().to_string();
    let spec = SpecText::from_toml(&text, &p)?.to_spec(&p)?;
    Ok((spec, text))
}

/// Reads an intersection file and checks it against `spec`.
pub fn parse_intersection(path: &Path, spec: &FilteredSpec) -> Result<(Intersection, String), CliError> {
    let text = read(path)?;
    let p = path.display().to_string();
    let ix = IntersectionText::from_toml(&text, &p)?.to_intersection(spec, &p)?;
    Ok((ix, text))
}

/// Canonical TOML of a spec; `parse ∘ serialize` is the identity on validated specs.
pub fn serialize_spec(s: &FilteredSpec) -> String {
    SpecText::from_spec(s).to_toml()
}
