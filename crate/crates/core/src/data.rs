//! Sample-set types, text ingestion of pair corpora, standardization and
//! swap augmentation.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth relation of a pair. The numeric codes are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CausalLabel {
    XcausesY,
    YcausesX,
    NonCausal,
}

impl CausalLabel {
    pub fn code(self) -> i8 {
        match self {
            CausalLabel::XcausesY => 1,
            CausalLabel::YcausesX => -1,
            CausalLabel::NonCausal => 0,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(CausalLabel::XcausesY),
            -1 => Some(CausalLabel::YcausesX),
            0 => Some(CausalLabel::NonCausal),
            _ => None,
        }
    }

    /// Label of the pair with its variables exchanged.
    pub fn swapped(self) -> Self {
        match self {
            CausalLabel::XcausesY => CausalLabel::YcausesX,
            CausalLabel::YcausesX => CausalLabel::XcausesY,
            CausalLabel::NonCausal => CausalLabel::NonCausal,
        }
    }

    pub fn is_causal(self) -> bool {
        self != CausalLabel::NonCausal
    }
}

impl fmt::Display for CausalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// One sample set `{(x_j, y_j)}` drawn from a joint distribution.
///
/// Construction validates that both columns have the same length (at least
/// two), that every value is finite and that the weight is nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalPair {
    id: String,
    x: Vec<f64>,
    y: Vec<f64>,
    weight: f64,
    label: Option<CausalLabel>,
}

impl CausalPair {
    pub fn new(id: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
            });
        }
        if x.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: x.len(),
            });
        }
        let id = id.into();
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("pair {id}")));
        }
        Ok(Self {
            id,
            x,
            y,
            weight: 1.0,
            label: None,
        })
    }

    pub fn with_label(mut self, label: CausalLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pair {}: weight must be a finite nonnegative number, got {weight}",
                self.id
            )));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn label(&self) -> Option<CausalLabel> {
        self.label
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Exchanges x and y, negating a directional label. The id gains a
    /// `-swap` suffix.
    pub fn swap(&self) -> Self {
        Self {
            id: format!("{}-swap", self.id),
            x: self.y.clone(),
            y: self.x.clone(),
            weight: self.weight,
            label: self.label.map(CausalLabel::swapped),
        }
    }
}

/// Ordered pairs with unique ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairCollection {
    pairs: Vec<CausalPair>,
    provenance: String,
}

impl PairCollection {
    pub fn new(pairs: Vec<CausalPair>, provenance: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(pairs.len());
        for p in &pairs {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicateId(p.id.clone()));
            }
        }
        Ok(Self {
            pairs,
            provenance: provenance.into(),
        })
    }

    pub fn pairs(&self) -> &[CausalPair] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<CausalPair> {
        self.pairs
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CausalPair> {
        self.pairs.iter()
    }

    /// Number of pairs carrying `label`.
    pub fn count_label(&self, label: CausalLabel) -> usize {
        self.pairs.iter().filter(|p| p.label == Some(label)).count()
    }
}

impl<'a> IntoIterator for &'a PairCollection {
    type Item = &'a CausalPair;
    type IntoIter = std::slice::Iter<'a, CausalPair>;

    fn into_iter(self) -> Self::IntoIter {
        self.pairs.iter()
    }
}

/// Output of [`standardize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Standardized {
    pub values: Vec<f64>,
    /// Set when the input was constant; `values` is then all zeros.
    pub degenerate: bool,
}

/// Mean and population standard deviation, accumulated over the values in
/// sorted order so the result depends only on the multiset of inputs.
pub(crate) fn mean_popstd(v: &[f64]) -> (f64, f64) {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let mut dev: Vec<f64> = sorted.iter().map(|&s| (s - mean) * (s - mean)).collect();
    dev.sort_unstable_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Rescales to zero mean and unit population variance.
pub fn standardize(v: &[f64]) -> Standardized {
    if v.is_empty() {
        return Standardized {
            values: Vec::new(),
            degenerate: true,
        };
    }
    let (mean, std) = mean_popstd(v);
    if !(std > 0.0) {
        return Standardized {
            values: vec![0.0; v.len()],
            degenerate: true,
        };
    }
    Standardized {
        values: v.iter().map(|&s| (s - mean) / std).collect(),
        degenerate: false,
    }
}

/// Free-function form of [`CausalPair::swap`].
pub fn swap(p: &CausalPair) -> CausalPair {
    p.swap()
}

/// Appends a swapped copy of every pair after the originals.
pub fn augment_with_swaps(c: &PairCollection) -> Result<PairCollection> {
    let mut pairs = Vec::with_capacity(2 * c.len());
    pairs.extend(c.pairs.iter().cloned());
    pairs.extend(c.pairs.iter().map(CausalPair::swap));
    PairCollection::new(pairs, format!("{} +swaps", c.provenance))
}

fn parse_line_pair(path: &Path, line_no: usize, line: &str) -> Result<Option<(f64, f64)>> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut fields = trimmed.split_whitespace();
    let parse_err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg,
    };
    let mut next = || -> Result<f64> {
        let tok = fields
            .next()
            .ok_or_else(|| parse_err("expected at least 2 numeric columns".into()))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(format!("non-numeric token {tok:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(format!("non-finite value {tok:?}")));
        }
        Ok(v)
    };
    let x = next()?;
    let y = next()?;
    Ok(Some((x, y)))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a whitespace-separated text file; columns 1 and 2 become x and y.
pub fn load_pair_file(path: impl AsRef<Path>) -> Result<CausalPair> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some((a, b)) = parse_line_pair(path, i + 1, line)? {
            x.push(a);
            y.push(b);
        }
    }
    CausalPair::new(file_stem(path), x, y)
}

/// Writes one `x y` row per observation using shortest round-trip notation.
pub fn write_pair_file(path: impl AsRef<Path>, pair: &CausalPair) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (a, b) in pair.x.iter().zip(&pair.y) {
        writeln!(w, "{a} {b}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row of a meta file.
#[derive(Clone, Debug, PartialEq)]
struct MetaRow {
    id: String,
    cause: u32,
    effect: u32,
    weight: f64,
}

fn parse_meta(path: &Path) -> Result<Vec<MetaRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let f: Vec<&str> = trimmed.split_whitespace().collect();
        let int = |s: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| err(format!("expected a column index, got {s:?}")))
        };
        // Four columns: id cause effect weight. Six columns is the native
        // Tuebingen layout with column ranges: id c_first c_last e_first e_last weight.
        let (cause, effect, weight_tok) = match f.len() {
            4 => (int(f[1])?, int(f[2])?, f[3]),
            6 => {
                let (c0, c1, e0, e1) = (int(f[1])?, int(f[2])?, int(f[3])?, int(f[4])?);
                if c0 != c1 || e0 != e1 {
                    log::warn!("{}: skipping multivariate pair {}", path.display(), f[0]);
                    continue;
                }
                (c0, e0, f[5])
            }
            n => return Err(err(format!("expected 4 or 6 fields, got {n}"))),
        };
        let weight: f64 = weight_tok
            .parse()
            .map_err(|_| err(format!("non-numeric weight {weight_tok:?}")))?;
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(err(format!("invalid weight {weight_tok:?}")));
        }
        rows.push(MetaRow {
            id: f[0].to_string(),
            cause,
            effect,
            weight,
        });
    }
    Ok(rows)
}

fn meta_label(cause: u32, effect: u32) -> Option<CausalLabel> {
    match (cause, effect) {
        (1, 2) => Some(CausalLabel::XcausesY),
        (2, 1) => Some(CausalLabel::YcausesX),
        // Extension used by generated corpora: no causal link between the columns.
        (0, 0) => Some(CausalLabel::NonCausal),
        _ => None,
    }
}

fn pair_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if path.is_file() && name.starts_with("pair") && name.ends_with(".txt") && name != "pairmeta.txt" {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every `pair*.txt` in `dir`, labelled from `meta` when given.
///
/// With a meta file the collection holds exactly the meta rows whose
/// columns are `(1,2)`, `(2,1)` or `(0,0)`; other rows are skipped with a
/// warning. Meta id `0001` matches the file `pair0001.txt` (or `0001.txt`).
pub fn load_collection(dir: impl AsRef<Path>, meta: Option<&Path>) -> Result<PairCollection> {
    let dir = dir.as_ref();
    let files = pair_files(dir)?;
    let provenance = dir.display().to_string();
    let Some(meta) = meta else {
        let pairs = files
            .par_iter()
            .map(load_pair_file)
            .collect::<Result<Vec<_>>>()?;
        return PairCollection::new(pairs, provenance);
    };

    let by_stem: std::collections::HashMap<String, &PathBuf> =
        files.iter().map(|p| (file_stem(p), p)).collect();
    let mut selected = Vec::new();
    for row in parse_meta(meta)? {
        let Some(label) = meta_label(row.cause, row.effect) else {
            log::warn!(
                "{}: skipping pair {} (columns {} -> {})",
                meta.display(),
                row.id,
                row.cause,
                row.effect
            );
            continue;
        };
        let path = by_stem
            .get(&format!("pair{}", row.id))
            .or_else(|| by_stem.get(&row.id))
            .ok_or_else(|| Error::MissingPairFile(row.id.clone()))?;
        selected.push(((*path).clone(), label, row.weight));
    }
    selected.sort_by(|a, b| a.0.cmp(&b.0));
    let pairs = selected
        .par_iter()
        .map(|(path, label, weight)| -> Result<CausalPair> {
            load_pair_file(path)?.with_label(*label).with_weight(*weight)
        })
        .collect::<Result<Vec<_>>>()?;
    PairCollection::new(pairs, format!("{provenance} (meta {})", meta.display()))
}

/// Meta-file id for a pair: its id without a leading `pair`.
pub fn meta_id(pair_id: &str) -> &str {
    pair_id.strip_prefix("pair").unwrap_or(pair_id)
}

/// Writes a collection as `pair<id>.txt` files plus `pairmeta.txt` in `dir`.
/// Unlabelled pairs are written without a meta row.
pub fn write_collection(dir: impl AsRef<Path>, c: &PairCollection) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    c.pairs
        .par_iter()
        .map(|p| write_pair_file(dir.join(format!("pair{}.txt", meta_id(&p.id))), p))
        .collect::<Result<()>>()?;
    let meta_path = dir.join("pairmeta.txt");
    let file = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let mut w = BufWriter::new(file);
    for p in &c.pairs {
        let Some(label) = p.label else { continue };
        let (cause, effect) = match label {
            CausalLabel::XcausesY => (1, 2),
            CausalLabel::YcausesX => (2, 1),
            CausalLabel::NonCausal => (0, 0),
        };
        writeln!(w, "{} {cause} {effect} {}", meta_id(&p.id), p.weight)
            .map_err(|e| Error::io(&meta_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&meta_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn reads_first_two_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = load_pair_file(write(dir.path(), "pair0001.txt", "1.0 2.0\n3.0 4.0")).unwrap();
        assert_eq!(p.x(), &[1.0, 3.0]);
        assert_eq!(p.y(), &[2.0, 4.0]);
        assert_eq!(p.id(), "pair0001");
        assert_eq!(p.weight(), 1.0);
        assert_eq!(p.label(), None);

        let p = load_pair_file(write(dir.path(), "b.txt", "1 2 9\n3 4 9\n")).unwrap();
        assert_eq!(p.x(), &[1.0, 3.0]);
        assert_eq!(p.y(), &[2.0, 4.0]);
    }

    #[test]
    fn comments_tabs_and_scientific_notation() {
        let dir = tempfile::tempdir().unwrap();
        let body = "# header\n1e-3\t2.5E2\n\n  -4 5.0  \r\n";
        let p = load_pair_file(write(dir.path(), "c.txt", body)).unwrap();
        assert_eq!(p.x(), &[1e-3, -4.0]);
        assert_eq!(p.y(), &[250.0, 5.0]);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let one = load_pair_file(write(dir.path(), "one.txt", "1 2\n"));
        assert!(matches!(one, Err(Error::TooFewSamples { got: 1, .. })));
        let bad = load_pair_file(write(dir.path(), "bad.txt", "1 2\n3 abc\n"));
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
        let short = load_pair_file(write(dir.path(), "short.txt", "1 2\n3\n"));
        assert!(matches!(short, Err(Error::Parse { line: 2, .. })));
        let inf = load_pair_file(write(dir.path(), "inf.txt", "1 2\n3 inf\n"));
        assert!(matches!(inf, Err(Error::Parse { .. })));
        assert!(load_pair_file(dir.path().join("missing.txt")).unwrap_err().is_io());
    }

    #[test]
    fn pair_invariants() {
        assert!(CausalPair::new("a", vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(CausalPair::new("a", vec![f64::NAN, 2.0], vec![1.0, 2.0]).is_err());
        let p = CausalPair::new("a", vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(p.clone().with_weight(-1.0).is_err());
        assert!(PairCollection::new(vec![p.clone(), p], "t").is_err());
    }

    #[test]
    fn collection_with_meta() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "pair0001.txt", "1 2\n3 4\n");
        write(dir.path(), "pair0002.txt", "1 2\n3 5\n");
        write(dir.path(), "pair0052.txt", "1 2 3 4\n3 5 6 7\n");
        let meta = write(
            dir.path(),
            "pairmeta.txt",
            "0001 1 2 0.5\n0002 2 1 1.0\n0052 1 4 1.0\n",
        );
        let c = load_collection(dir.path(), Some(&meta)).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.pairs()[0].id(), "pair0001");
        assert_eq!(c.pairs()[0].label(), Some(CausalLabel::XcausesY));
        assert_eq!(c.pairs()[0].weight(), 0.5);
        assert_eq!(c.pairs()[1].label(), Some(CausalLabel::YcausesX));

        let all = load_collection(dir.path(), None).unwrap();
        assert_eq!(all.len(), 3);
        assert!(all.iter().all(|p| p.label().is_none() && p.weight() == 1.0));
    }

    #[test]
    fn native_tuebingen_meta_layout() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "pair0001.txt", "1 2\n3 4\n");
        write(dir.path(), "pair0002.txt", "1 2 3\n3 5 6\n");
        let meta = write(dir.path(), "pairmeta.txt", "0001 2 2 1 1 0.25\n0002 1 1 2 3 1\n");
        let c = load_collection(dir.path(), Some(&meta)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.pairs()[0].label(), Some(CausalLabel::YcausesX));
        assert_eq!(c.pairs()[0].weight(), 0.25);
    }

    #[test]
    fn meta_without_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let meta = write(dir.path(), "pairmeta.txt", "0009 1 2 1\n");
        assert!(matches!(
            load_collection(dir.path(), Some(&meta)),
            Err(Error::MissingPairFile(id)) if id == "0009"
        ));
    }

    #[test]
    fn empty_dir_gives_empty_collection() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_collection(dir.path(), None).unwrap().is_empty());
    }

    #[test]
    fn standardize_examples() {
        let s = standardize(&[1.0, 2.0, 3.0]);
        let r = 1.224_744_871_391_589;
        assert!(!s.degenerate);
        for (got, want) in s.values.iter().zip([-r, 0.0, r]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        let c = standardize(&[5.0, 5.0, 5.0]);
        assert!(c.degenerate);
        assert_eq!(c.values, vec![0.0; 3]);
        let again = standardize(&s.values);
        for (a, b) in again.values.iter().zip(&s.values) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn swap_labels() {
        let p = CausalPair::new("p", vec![1.0, 2.0], vec![3.0, 5.0])
            .unwrap()
            .with_label(CausalLabel::XcausesY);
        let s = p.swap();
        assert_eq!(s.label(), Some(CausalLabel::YcausesX));
        assert_eq!(s.id(), "p-swap");
        assert_eq!(s.x(), p.y());
        let n = p.clone().with_label(CausalLabel::NonCausal);
        assert_eq!(n.swap().label(), Some(CausalLabel::NonCausal));
        let back = s.swap();
        assert_eq!((back.x(), back.y(), back.label()), (p.x(), p.y(), p.label()));
    }

    #[test]
    fn augmentation_layout() {
        let pairs: Vec<_> = (0..5)
            .map(|i| {
                CausalPair::new(format!("p{i}"), vec![0.0, i as f64 + 1.0], vec![1.0, 2.0])
                    .unwrap()
                    .with_label(CausalLabel::XcausesY)
            })
            .collect();
        let c = PairCollection::new(pairs, "t").unwrap();
        let a = augment_with_swaps(&c).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a.count_label(CausalLabel::XcausesY), 5);
        assert_eq!(a.count_label(CausalLabel::YcausesX), 5);
        assert_eq!(&a.pairs()[..5], c.pairs());
        assert_eq!(a.pairs()[5].id(), "p0-swap");
        assert!(augment_with_swaps(&PairCollection::default()).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn standardize_moments(v in proptest::collection::vec(-1e6f64..1e6, 2..200)) {
            let s = standardize(&v);
            prop_assume!(!s.degenerate);
            let n = v.len() as f64;
            let mean = s.values.iter().sum::<f64>() / n;
            let sd = (s.values.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() <= 1e-10);
            prop_assert!((sd - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn pair_file_round_trip(rows in proptest::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 2..50)) {
            let dir = tempfile::tempdir().unwrap();
            let (x, y): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            let p = CausalPair::new("pair1", x, y).unwrap();
            let path = dir.path().join("pair1.txt");
            write_pair_file(&path, &p).unwrap();
            let q = load_pair_file(&path).unwrap();
            for (a, b) in p.x().iter().chain(p.y()).zip(q.x().iter().chain(q.y())) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs());
            }
        }
    }
}
