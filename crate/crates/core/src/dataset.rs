//! Experiment datasets: the Friedman #1 simulator, Iris parsing and
//! binarization, and deterministic train/test splits.
//!
//! Datasets are immutable after construction; splitting returns a copy
//! with the index partition attached. Generation and splitting draw from
//! [`SplitMix64`](crate::rng::SplitMix64) only, so a `(seed, n)` pair
//! reproduces bit-identical data everywhere.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use thiserror::Error;

use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("csv parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("missing required column {0}")]
    MissingColumn(&'static str),
    #[error("empty input")]
    Empty,
    #[error("train_n must satisfy 1 <= train_n < n, got {train_n} of {n}")]
    BadSplit { train_n: usize, n: usize },
    #[error("dataset has no column named {0}")]
    NoSuchFeature(String),
}

/// Index partition into train and test rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Where a dataset came from, for manifests and reproducibility checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Friedman { n: usize, seed: u64, noise_sd: f64 },
    File { checksum: u64 },
    InMemory,
}

/// Which rows an operation should look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Train,
    Test,
    All,
}

/// Named feature matrix with a target column and an optional split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub split: Option<Split>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn d(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Row indices selected by `part`; with no split attached, everything
    /// counts as training data.
    pub fn indices(&self, part: SplitPart) -> Vec<usize> {
        match (&self.split, part) {
            (Some(s), SplitPart::Train) => s.train.clone(),
            (Some(s), SplitPart::Test) => s.test.clone(),
            (None, SplitPart::Test) => Vec::new(),
            _ => (0..self.n()).collect(),
        }
    }

    pub fn is_binary_target(&self) -> bool {
        self.y.iter().all(|&v| v == 0.0 || v == 1.0)
    }
}

/// The Friedman #1 mean function
/// `mu(x) = 10 sin(pi x1 x2) + 20 (x3 - 1/2)^2 + 10 x4 + 5 x5`.
pub fn friedman_mu(x: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), 5);
    10.0 * libm::sin(core::f64::consts::PI * x[0] * x[1])
        + 20.0 * (x[2] - 0.5) * (x[2] - 0.5)
        + 10.0 * x[3]
        + 5.0 * x[4]
}

/// Simulates `n` observations with `x ~ U[0,1]^5` i.i.d. and
/// `y = mu(x) + noise_sd * N(0,1)`.
///
/// Draw order per row: the five uniforms, then one normal deviate; the
/// Box-Muller spare carries across rows.
pub fn friedman_generate(n: usize, seed: u64, noise_sd: f64) -> Dataset {
    let mut rng = SplitMix64::new(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..5).map(|_| rng.next_f64()).collect();
        let noise = rng.next_normal();
        y.push(friedman_mu(&row) + noise_sd * noise);
        x.push(row);
    }
    Dataset {
        feature_names: (1..=5).map(|i| format!("x{i}")).collect(),
        x,
        y,
        split: None,
        provenance: Provenance::Friedman { n, seed, noise_sd },
    }
}

/// FNV-1a over raw bytes; used for file checksums in manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

const IRIS_COLUMNS: [&str; 4] = ["SepalLength", "SepalWidth", "PetalLength", "PetalWidth"];
const IRIS_EXPECTED_ROWS: usize = 150;

/// Parses Iris CSV text with columns SepalLength, SepalWidth, PetalLength,
/// PetalWidth (a species column, and anything else, is ignored).
///
/// Returns the dataset plus non-fatal warnings; a row count other than 150
/// warns rather than fails. The target column is initialized to
/// SepalLength; [`iris_binarize`] turns it into the binary task.
pub fn parse_iris_csv(text: &str) -> Result<(Dataset, Vec<String>), DataError> {
    let checksum = fnv1a64(text.as_bytes());
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::Empty)?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    let mut col_of = [0usize; 4];
    for (slot, want) in col_of.iter_mut().zip(IRIS_COLUMNS) {
        *slot = names
            .iter()
            .position(|n| *n == want)
            .ok_or(DataError::MissingColumn(want))?;
    }
    let mut x = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let mut row = Vec::with_capacity(4);
        for &c in &col_of {
            let field = fields.get(c).ok_or_else(|| DataError::Parse {
                line: lineno + 1,
                reason: "too few fields".to_string(),
            })?;
            let v: f64 = field.parse().map_err(|_| DataError::Parse {
                line: lineno + 1,
                reason: format!("not a number: {field:?}"),
            })?;
            row.push(v);
        }
        x.push(row);
    }
    if x.is_empty() {
        return Err(DataError::Empty);
    }
    let mut warnings = Vec::new();
    if x.len() != IRIS_EXPECTED_ROWS {
        warnings.push(format!(
            "expected {IRIS_EXPECTED_ROWS} iris rows, found {}",
            x.len()
        ));
    }
    let y = x.iter().map(|r| r[0]).collect();
    Ok((
        Dataset {
            feature_names: IRIS_COLUMNS.iter().map(|s| s.to_string()).collect(),
            x,
            y,
            split: None,
            provenance: Provenance::File { checksum },
        },
        warnings,
    ))
}

/// Binarizes the Iris task: `y_i = 1` iff SepalLength_i strictly exceeds
/// the mean sepal length over all rows; features become
/// (SepalWidth, PetalLength, PetalWidth).
pub fn iris_binarize(ds: &Dataset) -> Result<Dataset, DataError> {
    let sl = ds
        .feature_names
        .iter()
        .position(|n| n == "SepalLength")
        .ok_or_else(|| DataError::NoSuchFeature("SepalLength".to_string()))?;
    if ds.n() == 0 {
        return Err(DataError::Empty);
    }
    let mean = ds.x.iter().map(|r| r[sl]).sum::<f64>() / ds.n() as f64;
    let keep: Vec<usize> =
        (0..ds.feature_names.len()).filter(|&i| i != sl).collect();
    Ok(Dataset {
        feature_names: keep.iter().map(|&i| ds.feature_names[i].clone()).collect(),
        x: ds.x.iter().map(|r| keep.iter().map(|&i| r[i]).collect()).collect(),
        y: ds.x.iter().map(|r| if r[sl] > mean { 1.0 } else { 0.0 }).collect(),
        split: ds.split.clone(),
        provenance: ds.provenance.clone(),
    })
}

/// Attaches a seeded split: a Fisher-Yates shuffle of `0..n`, first
/// `train_n` indices train, the rest test.
pub fn split_dataset(ds: &Dataset, train_n: usize, seed: u64) -> Result<Dataset, DataError> {
    let n = ds.n();
    if train_n < 1 || train_n >= n {
        return Err(DataError::BadSplit { train_n, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let test = order.split_off(train_n);
    let mut out = ds.clone();
    out.split = Some(Split { train: order, test });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mu_at_center() {
        // 10 sin(pi/4) + 0 + 5 + 2.5
        let v = friedman_mu(&[0.5, 0.5, 0.5, 0.5, 0.5]);
        assert!((v - 14.571067811865475).abs() < 1e-12, "{v}");
    }

    #[test]
    fn mu_vanishing_point() {
        assert_eq!(friedman_mu(&[0.0, 0.0, 0.5, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn zero_noise_reproduces_mu_exactly() {
        let ds = friedman_generate(50, 9, 0.0);
        for (row, &y) in ds.x.iter().zip(&ds.y) {
            assert_eq!(y.to_bits(), friedman_mu(row).to_bits());
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = friedman_generate(100, 7, 1.0);
        let b = friedman_generate(100, 7, 1.0);
        assert_eq!(a, b);
        let c = friedman_generate(100, 8, 1.0);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn friedman_marginals_look_uniform() {
        let ds = friedman_generate(10_000, 123, 1.0);
        for j in 0..5 {
            let col: Vec<f64> = ds.x.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            assert!((0.4..=0.6).contains(&mean), "feature {j} mean {mean}");
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    fn tiny_iris_csv() -> String {
        let mut s = String::from("SepalLength,SepalWidth,PetalLength,PetalWidth,Species\n");
        s.push_str("5.0,3.0,1.4,0.2,setosa\n");
        s.push_str("6.0,2.7,4.1,1.3,versicolor\n");
        s.push_str("7.0,3.1,5.5,2.0,virginica\n");
        s.push_str("6.0,2.9,4.5,1.5,versicolor\n");
        s
    }

    #[test]
    fn iris_parse_shapes_and_warning() {
        let (ds, warnings) = parse_iris_csv(&tiny_iris_csv()).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.d(), 4);
        assert_eq!(warnings.len(), 1, "row-count warning expected");
        assert!(matches!(ds.provenance, Provenance::File { .. }));
    }

    #[test]
    fn iris_parse_rejects_garbage() {
        assert!(parse_iris_csv("").is_err());
        assert!(parse_iris_csv("a,b,c\n1,2,3\n").is_err());
        let bad = "SepalLength,SepalWidth,PetalLength,PetalWidth\n1,2,three,4\n";
        assert!(matches!(parse_iris_csv(bad), Err(DataError::Parse { line: 2, .. })));
    }

    #[test]
    fn binarize_strict_inequality_and_features() {
        let (ds, _) = parse_iris_csv(&tiny_iris_csv()).unwrap();
        let b = iris_binarize(&ds).unwrap();
        // mean sepal length = 6.0; rows equal to the mean map to 0
        assert_eq!(b.y, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(b.d(), 3);
        assert_eq!(b.feature_names, vec!["SepalWidth", "PetalLength", "PetalWidth"]);
        assert!(b.is_binary_target());
        // exact recount: class 1 is precisely the rows strictly above the mean
        let ones = b.y.iter().filter(|&&v| v == 1.0).count();
        let above = ds.x.iter().filter(|r| r[0] > 6.0).count();
        assert_eq!(ones, above);
    }

    #[test]
    fn split_partitions_indices() {
        let ds = friedman_generate(150, 3, 1.0);
        let s = split_dataset(&ds, 105, 11).unwrap();
        let split = s.split.as_ref().unwrap();
        assert_eq!(split.train.len(), 105);
        assert_eq!(split.test.len(), 45);
        let mut all: Vec<usize> =
            split.train.iter().chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..150).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seed_deterministic() {
        let ds = friedman_generate(40, 3, 1.0);
        let a = split_dataset(&ds, 30, 5).unwrap();
        let b = split_dataset(&ds, 30, 5).unwrap();
        assert_eq!(a.split, b.split);
        let c = split_dataset(&ds, 30, 6).unwrap();
        assert_ne!(a.split, c.split);
    }

    #[test]
    fn split_boundaries() {
        let ds = friedman_generate(10, 3, 1.0);
        let s = split_dataset(&ds, 9, 0).unwrap();
        assert_eq!(s.split.unwrap().test.len(), 1);
        assert!(split_dataset(&ds, 0, 0).is_err());
        assert!(split_dataset(&ds, 10, 0).is_err());
    }

    #[test]
    fn indices_without_split_treat_everything_as_train() {
        let ds = friedman_generate(5, 1, 0.0);
        assert_eq!(ds.indices(SplitPart::Train).len(), 5);
        assert!(ds.indices(SplitPart::Test).is_empty());
        assert_eq!(ds.indices(SplitPart::All).len(), 5);
    }

    #[test]
    fn fnv_checksum_known_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
