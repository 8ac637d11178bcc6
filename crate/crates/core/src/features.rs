//! Feature matrix files.
//!
//! ```text
//! # cepairs feature matrix v1
//! # basis_digest=5f1c0e9a7b3d2c11
//! # gamma=10
//! # m=300
//! # seed=7
//! # standardized=true
//! id,label,weight,f0,f1,...,f299
//! pair00001,1,1,0.0132,...
//! ```
//!
//! The label column holds 1, -1, 0 or nothing for unlabelled pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::data::{CausalLabel, PairCollection};
use crate::error::{Error, Result};
use crate::rff::{basis_digest, featurize, BasisSpec, FeatureVector, RffBasis};

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub label: Option<CausalLabel>,
    pub weight: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub basis: BasisSpec,
    pub standardized: bool,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn digest(&self) -> u64 {
        basis_digest(self.basis.gamma, self.basis.m, self.basis.seed)
    }

    pub fn vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            values: self.rows[i].values.clone(),
            basis_id: self.digest(),
        }
    }
}

/// Featurizes every pair of `c` in parallel, keeping collection order.
pub fn featurize_collection(c: &PairCollection, basis: &RffBasis, pre_standardize: bool) -> Result<FeatureMatrix> {
    let rows = c
        .pairs()
        .par_iter()
        .map(|p| {
            featurize(p, basis, pre_standardize).map(|f| FeatureRow {
                id: p.id().to_string(),
                label: p.label(),
                weight: p.weight(),
                values: f.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        basis: basis.spec(),
        standardized: pre_standardize,
        rows,
    })
}

pub fn write_feature_matrix(path: impl AsRef<Path>, fm: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let w = &mut out;
    // Writing to a String cannot fail.
    let _ = writeln!(w, "# cepairs feature matrix v1");
    let _ = writeln!(w, "# basis_digest={:016x}", fm.digest());
    let _ = writeln!(w, "# gamma={}", fm.basis.gamma);
    let _ = writeln!(w, "# m={}", fm.basis.m);
    let _ = writeln!(w, "# seed={}", fm.basis.seed);
    let _ = writeln!(w, "# standardized={}", fm.standardized);
    w.push_str("id,label,weight");
    for j in 0..fm.basis.m {
        let _ = write!(w, ",f{j}");
    }
    w.push('\n');
    for row in &fm.rows {
        if row.id.contains(',') {
            return Err(Error::InvalidConfig(format!("pair id {:?} contains a comma", row.id)));
        }
        let label = row.label.map(|l| l.code().to_string()).unwrap_or_default();
        let _ = write!(w, "{},{label},{}", row.id, row.weight);
        for v in &row.values {
            let _ = write!(w, ",{v}");
        }
        w.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_feature_matrix(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut gamma = None;
    let mut m = None;
    let mut seed = None;
    let mut digest = None;
    let mut standardized = true;
    let mut header_seen = false;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.trim().split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "gamma" => gamma = Some(v.parse::<f64>().map_err(|_| err(ln, format!("bad gamma {v:?}")))?),
                    "m" => m = Some(v.parse::<usize>().map_err(|_| err(ln, format!("bad m {v:?}")))?),
                    "seed" => seed = Some(v.parse::<u64>().map_err(|_| err(ln, format!("bad seed {v:?}")))?),
                    "basis_digest" => {
                        digest = Some(u64::from_str_radix(v, 16).map_err(|_| err(ln, format!("bad digest {v:?}")))?)
                    }
                    "standardized" => {
                        standardized = v.parse().map_err(|_| err(ln, format!("bad flag {v:?}")))?
                    }
                    _ => {}
                }
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if !line.starts_with("id,label,weight") {
                return Err(err(ln, "expected header id,label,weight,f0,...".into()));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let label = match fields.next().map(str::trim) {
            None => return Err(err(ln, "missing label column".into())),
            Some("") => None,
            Some(tok) => Some(
                tok.parse::<i64>()
                    .ok()
                    .and_then(CausalLabel::from_code)
                    .ok_or_else(|| err(ln, format!("bad label {tok:?}")))?,
            ),
        };
        let wtok = fields.next().ok_or_else(|| err(ln, "missing weight column".into()))?;
        let weight: f64 = wtok.trim().parse().map_err(|_| err(ln, format!("bad weight {wtok:?}")))?;
        let values = fields
            .map(|t| t.trim().parse::<f64>().map_err(|_| err(ln, format!("bad feature {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            id,
            label,
            weight,
            values,
        });
    }
    let (Some(gamma), Some(m), Some(seed)) = (gamma, m, seed) else {
        return Err(err(1, "preamble must record gamma, m and seed".into()));
    };
    let fm = FeatureMatrix {
        basis: BasisSpec { gamma, m, seed },
        standardized,
        rows,
    };
    if let Some(d) = digest {
        if d != fm.digest() {
            return Err(Error::BasisMismatch {
                expected: fm.digest(),
                found: d,
            });
        }
    }
    if let Some(r) = fm.rows.iter().find(|r| r.values.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "row {} has {} features, expected {m}",
            r.id,
            r.values.len()
        )));
    }
    Ok(fm)
}
