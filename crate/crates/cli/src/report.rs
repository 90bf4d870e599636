//! Self-describing run reports.
//!
//! Every stage emits one `Envelope`: enough context to rebuild the field and
//! frame (`FieldDesc`), the convention knobs that fix what the numbers mean,
//! the headline counts, and re-checkable witnesses.  `replay` consumes the
//! same structure and verifies every witness without re-running the search.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use r2cs_core::conic::GroupElement;
use r2cs_core::field::FieldElement;
use r2cs_core::linset::EquivWitness;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDesc {
    pub p: u64,
    pub e: u32,
    pub n: u32,
    /// Prime-field coefficients of the modulus, ascending degree.
    pub modulus: Vec<u64>,
    /// Element key of the frame constant eta.
    pub eta: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Conventions {
    pub counting: String,
    pub equivalence: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Envelope {
    pub version: String,
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<FieldDesc>,
    pub elapsed_ms: u64,
    pub conventions: Conventions,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    pub witnesses: Witnesses,
}

/// Projective row vector as element keys (see `FieldElement::key`).
pub type VecKeys = [u32; 3];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapWitness {
    /// Power of the q-Frobenius applied before the collineation.
    pub frobenius: u32,
    pub matrix: [VecKeys; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassWitness {
    /// Generators of the class representative; the first is always x.
    pub generators: Vec<VecKeys>,
    /// Number of classified sets in the class.
    pub size: u64,
    /// Canonical point ids of the class.
    pub canonical: Vec<u64>,
    /// Maps the representative onto the canonical point set.
    pub witness: MapWitness,
    /// 1 when the representative lies on a line, 2 when it spans the plane.
    pub host_dimension: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyMatch {
    pub family: String,
    /// Generators of the family linear set.
    pub generators: Vec<VecKeys>,
    /// Index into `classes` of the equivalent class.
    pub class_index: usize,
    /// Maps the family set onto that class's canonical point set.
    pub witness: MapWitness,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witnesses {
    Bounds {
        n: u32,
        feasible_q: Vec<u64>,
    },
    Sublines {
        host: String,
        /// Passing (b, mu) element-key pairs, sorted.
        pairs: Vec<[u32; 2]>,
    },
    Subplanes {
        /// Generator pair of one internal subplane, when any exists: the
        /// second generators of two sublines through x spanning it.
        found: Option<[VecKeys; 2]>,
        /// Semilinear equivalence classes (classification fields only).
        classes: Vec<ClassWitness>,
        /// Indices of the classes realized inside the family linear set.
        embedded: Vec<usize>,
    },
    RankSets {
        rank: u8,
        classes: Vec<ClassWitness>,
        #[serde(skip_serializing_if = "Vec::is_empty", default)]
        family_matches: Vec<FamilyMatch>,
    },
    Verify {
        family: String,
        checks: Vec<Check>,
    },
}

pub fn element_of(key: u32, size: u64) -> Option<FieldElement> {
    if key == 0 {
        Some(FieldElement::ZERO)
    } else if (key as u64) < size {
        Some(FieldElement::from_log(key - 1))
    } else {
        None
    }
}

pub fn vec_keys(v: [FieldElement; 3]) -> VecKeys {
    [v[0].key(), v[1].key(), v[2].key()]
}

pub fn vec_elements(k: VecKeys, size: u64) -> Option<[FieldElement; 3]> {
    Some([
        element_of(k[0], size)?,
        element_of(k[1], size)?,
        element_of(k[2], size)?,
    ])
}

pub fn map_witness(w: &EquivWitness) -> MapWitness {
    MapWitness {
        frobenius: w.frobenius,
        matrix: [
            vec_keys(w.map.m[0]),
            vec_keys(w.map.m[1]),
            vec_keys(w.map.m[2]),
        ],
    }
}

pub fn equiv_witness(w: &MapWitness, size: u64) -> Option<EquivWitness> {
    Some(EquivWitness {
        frobenius: w.frobenius,
        map: GroupElement {
            m: [
                vec_elements(w.matrix[0], size)?,
                vec_elements(w.matrix[1], size)?,
                vec_elements(w.matrix[2], size)?,
            ],
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Text,
}

pub fn render(env: &Envelope, format: Format) -> serde_json::Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(env)?;
            s.push('\n');
            s
        }
        Format::Csv => to_csv(env),
        Format::Text => to_text(env),
    })
}

fn field_csv(field: &Option<FieldDesc>) -> (String, String) {
    match field {
        Some(f) => (
            "p,e,n,".into(),
            format!("{},{},{},", f.p, f.e, f.n),
        ),
        None => (String::new(), String::new()),
    }
}

/// One row per run, field columns first, counts in key order.  The count
/// tables for a (q, n) grid assemble by concatenating rows.
fn to_csv(env: &Envelope) -> String {
    match &env.witnesses {
        Witnesses::Bounds { n, feasible_q } => {
            let mut out = String::from("n,q\n");
            for q in feasible_q {
                out.push_str(&format!("{n},{q}\n"));
            }
            out
        }
        Witnesses::Verify { family, checks } => {
            let mut out = String::from("family,check,pass\n");
            for c in checks {
                out.push_str(&format!("{family},{},{}\n", c.name, c.pass));
            }
            out
        }
        _ => {
            let (fh, fv) = field_csv(&env.field);
            let mut header = format!("stage,{fh}");
            let mut row = format!("{},{fv}", env.stage);
            let mut first = true;
            for (k, v) in &env.counts {
                if !first {
                    header.push(',');
                    row.push(',');
                }
                first = false;
                header.push_str(k);
                row.push_str(&v.to_string());
            }
            header.push('\n');
            row.push('\n');
            header + &row
        }
    }
}

fn to_text(env: &Envelope) -> String {
    let mut out = String::new();
    out.push_str(&format!("stage: {} (r2cs {})\n", env.stage, env.version));
    if let Some(f) = &env.field {
        out.push_str(&format!(
            "field: p={} e={} n={} modulus={:?} eta_key={}\n",
            f.p, f.e, f.n, f.modulus, f.eta
        ));
    }
    out.push_str(&format!("elapsed_ms: {}\n", env.elapsed_ms));
    out.push_str(&format!("counting: {}\n", env.conventions.counting));
    out.push_str(&format!("equivalence: {}\n", env.conventions.equivalence));
    for n in &env.notes {
        out.push_str(&format!("note: {n}\n"));
    }
    for (k, v) in &env.counts {
        out.push_str(&format!("{k}: {v}\n"));
    }
    match &env.witnesses {
        Witnesses::Bounds { n, feasible_q } => {
            let qs: Vec<String> = feasible_q.iter().map(|q| q.to_string()).collect();
            out.push_str(&format!("feasible q (n={}): {}\n", n, qs.join(" ")));
        }
        Witnesses::Sublines { host, pairs } => {
            out.push_str(&format!("host: {host}\npairs: {}\n", pairs.len()));
        }
        Witnesses::Subplanes {
            found,
            classes,
            embedded,
        } => {
            out.push_str(&format!("subplane witness: {}\n", found.is_some()));
            if !classes.is_empty() {
                out.push_str(&format!(
                    "classes: {} ({} embedded in the family set)\n",
                    classes.len(),
                    embedded.len()
                ));
            }
        }
        Witnesses::RankSets {
            rank,
            classes,
            family_matches,
        } => {
            out.push_str(&format!("rank: {rank}\nclasses: {}\n", classes.len()));
            for m in family_matches {
                out.push_str(&format!(
                    "family match: {} ~ class {}\n",
                    m.family, m.class_index
                ));
            }
        }
        Witnesses::Verify { family, checks } => {
            for c in checks {
                out.push_str(&format!(
                    "{family}.{}: {} ({})\n",
                    c.name,
                    if c.pass { "pass" } else { "FAIL" },
                    c.detail
                ));
            }
        }
    }
    out
}
