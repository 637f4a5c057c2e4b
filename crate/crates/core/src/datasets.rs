//! Seeded bulk generation of `(probabilities, negativity)` records and
//! their CSV / binary encodings.
//!
//! Binary layout (little-endian): 8 magic bytes `CNEGDATA`, version `u32`,
//! seed `u64`, count `u64`, then 11 `f64` per record (`p11 … p34`,
//! negativity). CSV: one `# collneg-dataset …` comment line carrying the
//! header fields, the column row [`CSV_HEADER`], then one record per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::measurement::{CollectiveMeasurement, MeasurementError, RANGE_TOLERANCE};
use crate::states::{self, StateError};

pub const DATASET_MAGIC: &[u8; 8] = b"CNEGDATA";
pub const DATASET_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "p11,p22,p33,p44,p13,p24,p14,p12,p23,p34,negativity";
const BINARY_HEADER_LEN: usize = 8 + 4 + 8 + 8;
const RECORD_LEN: usize = 11 * 8;

/// Description of everything that shapes a generated record. Changing any
/// of it must bump [`DATASET_VERSION`].
const GENERATOR_DESCRIPTION: &str = "chacha8 seed_from_u64+stream=index; draws r1..r4 then (xi,alpha,psi,chi)x6; \
     rho44=1-sum; six-block unitary offsets 2,1,0,2,1,2; rho4=rho(x)SWAP rho SWAP; \
     tetrahedral POVM; singlet on qubits 2,3; order 11,22,33,44,13,24,14,12,23,34";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unrecognized dataset: {0}")]
    Format(String),
    #[error("unsupported dataset version {0}")]
    Version(u32),
    #[error("dataset truncated: header declares {declared} records, found {found}")]
    Truncated { declared: u64, found: u64 },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("record {index}: {message}")]
    InvalidRecord { index: u64, message: String },
    #[error("generating record {index}: {source}")]
    Generation {
        index: u64,
        #[source]
        source: GenerationError,
    },
    #[error("split fraction {0} must lie strictly between 0 and 1")]
    SplitFraction(f64),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
}

/// Ten collective probabilities in feature order plus the exact negativity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetRecord {
    pub index: u64,
    pub p: [f64; 10],
    pub n_a: f64,
}

impl DatasetRecord {
    fn validate(&self) -> Result<(), DatasetError> {
        let in_range = |v: f64| v.is_finite() && (-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&v);
        if let Some(k) = self.p.iter().position(|&v| !in_range(v)) {
            return Err(DatasetError::InvalidRecord {
                index: self.index,
                message: format!("probability {} = {} outside [0, 1]", k + 1, self.p[k]),
            });
        }
        if !in_range(self.n_a) {
            return Err(DatasetError::InvalidRecord {
                index: self.index,
                message: format!("negativity {} outside [0, 1]", self.n_a),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u32,
    pub seed: u64,
    pub count: u64,
    /// Fingerprint of the generator parameters for this version.
    pub digest: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DatasetRecord>,
}

/// First 8 bytes of the SHA-256 of the generator description.
pub fn generator_digest() -> u64 {
    let hash = Sha256::digest(GENERATOR_DESCRIPTION.as_bytes());
    u64::from_le_bytes(hash[..8].try_into().expect("8 bytes"))
}

/// Record `index` of the dataset seeded with `seed`.
pub fn generate_record(seed: u64, index: u64) -> Result<DatasetRecord, DatasetError> {
    let wrap = |source: GenerationError| DatasetError::Generation { index, source };
    let rho = states::random_state(&mut states::state_rng(seed, index));
    let n_a = states::negativity(&rho).map_err(|e| wrap(e.into()))?;
    let p = CollectiveMeasurement::shared()
        .all_probabilities(&rho)
        .map_err(|e| wrap(e.into()))?;
    Ok(DatasetRecord { index, p, n_a })
}

/// Generates `n` records on `threads` workers (0 = all cores). The output
/// does not depend on the worker count.
pub fn generate(n: u64, seed: u64, threads: usize) -> Result<Dataset, DatasetError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DatasetError::ThreadPool(e.to_string()))?;
    let records = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| generate_record(seed, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Dataset {
        header: DatasetHeader {
            version: DATASET_VERSION,
            seed,
            count: n,
            digest: generator_digest(),
        },
        records,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn encode(&self, format: DatasetFormat) -> Vec<u8> {
        match format {
            DatasetFormat::Binary => self.to_binary(),
            DatasetFormat::Csv => self.to_csv().into_bytes(),
        }
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(BINARY_HEADER_LEN + RECORD_LEN * self.records.len());
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&self.header.version.to_le_bytes());
        out.extend_from_slice(&self.header.seed.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u64).to_le_bytes());
        for r in &self.records {
            for v in r.p.iter().chain(std::iter::once(&r.n_a)) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Values use Rust's shortest round-trip formatting, so decoding is exact.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + 220 * self.records.len());
        let h = &self.header;
        let _ = writeln!(
            out,
            "# collneg-dataset version={} seed={} count={} digest={:016x}",
            h.version,
            h.seed,
            self.records.len(),
            h.digest
        );
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            for v in &r.p {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", r.n_a);
        }
        out
    }

    /// Decodes either format, detected from the leading bytes.
    pub fn decode(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.starts_with(DATASET_MAGIC) {
            Self::from_binary(bytes)
        } else if bytes.starts_with(b"# collneg-dataset") || bytes.starts_with(CSV_HEADER.as_bytes()) {
            let text = std::str::from_utf8(bytes).map_err(|_| DatasetError::Format("CSV is not UTF-8".into()))?;
            Self::from_csv(text)
        } else {
            Err(DatasetError::Format("neither binary magic nor CSV header found".into()))
        }
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, DatasetError> {
        if bytes.len() < BINARY_HEADER_LEN || !bytes.starts_with(DATASET_MAGIC) {
            return Err(DatasetError::Format("missing binary header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let version = u32_at(8);
        if version != DATASET_VERSION {
            return Err(DatasetError::Version(version));
        }
        let seed = u64_at(12);
        let count = u64_at(20);
        let body = &bytes[BINARY_HEADER_LEN..];
        let found = (body.len() / RECORD_LEN) as u64;
        if body.len() % RECORD_LEN != 0 || found != count {
            return Err(DatasetError::Truncated { declared: count, found });
        }
        let records = body
            .chunks_exact(RECORD_LEN)
            .enumerate()
            .map(|(i, chunk)| {
                let mut vals = chunk
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
                let p = std::array::from_fn(|_| vals.next().expect("10 values"));
                let record = DatasetRecord {
                    index: i as u64,
                    p,
                    n_a: vals.next().expect("11th value"),
                };
                record.validate().map(|_| record)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            header: DatasetHeader {
                version,
                seed,
                count,
                digest: generator_digest(),
            },
            records,
        })
    }

    pub fn from_csv(text: &str) -> Result<Self, DatasetError> {
        let mut header = DatasetHeader {
            version: DATASET_VERSION,
            seed: 0,
            count: 0,
            digest: generator_digest(),
        };
        let mut declared = None;
        let mut saw_columns = false;
        let mut records = Vec::new();
        for (line_no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for (key, value) in crate::models::metrics::parse_key_values(comment) {
                    let bad = || DatasetError::Malformed {
                        line: line_no,
                        message: format!("bad `{key}` value"),
                    };
                    match key {
                        "version" => {
                            let v: u32 = value.parse().map_err(|_| bad())?;
                            if v != DATASET_VERSION {
                                return Err(DatasetError::Version(v));
                            }
                            header.version = v;
                        }
                        "seed" => header.seed = value.parse().map_err(|_| bad())?,
                        "count" => declared = Some(value.parse::<u64>().map_err(|_| bad())?),
                        "digest" => header.digest = u64::from_str_radix(value, 16).map_err(|_| bad())?,
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_columns {
                if line != CSV_HEADER {
                    return Err(DatasetError::Malformed {
                        line: line_no,
                        message: format!("expected column header `{CSV_HEADER}`"),
                    });
                }
                saw_columns = true;
                continue;
            }
            let values = line
                .split(',')
                .map(|tok| tok.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DatasetError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
            if values.len() != 11 {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: format!("expected 11 columns, found {}", values.len()),
                });
            }
            let record = DatasetRecord {
                index: records.len() as u64,
                p: std::array::from_fn(|k| values[k]),
                n_a: values[10],
            };
            record.validate()?;
            records.push(record);
        }
        if !saw_columns {
            return Err(DatasetError::Format("missing CSV column header".into()));
        }
        let found = records.len() as u64;
        if let Some(declared) = declared {
            if declared != found {
                return Err(DatasetError::Truncated { declared, found });
            }
        }
        header.count = found;
        Ok(Self { header, records })
    }

    pub fn save(&self, path: &Path, format: DatasetFormat) -> Result<(), DatasetError> {
        fs::write(path, self.encode(format)).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let bytes = fs::read(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::decode(&bytes)
    }
}

/// Seeded permutation split; the first `round(n·fraction)` shuffled records
/// form the training part.
pub fn split(
    records: &[DatasetRecord],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>), DatasetError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DatasetError::SplitFraction(fraction));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (records.len() as f64 * fraction).round() as usize;
    let train = order[..n_train].iter().map(|&i| records[i]).collect();
    let test = order[n_train..].iter().map(|&i| records[i]).collect();
    Ok((train, test))
}

/// `records × b` matrix of the first `b` probabilities.
pub fn feature_matrix(records: &[DatasetRecord], b: usize) -> Array2<f64> {
    Array2::from_shape_fn((records.len(), b), |(i, j)| records[i].p[j])
}

pub fn negativities(records: &[DatasetRecord]) -> Vec<f64> {
    records.iter().map(|r| r.n_a).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_is_header_only() {
        let ds = generate(0, 5, 1).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.to_binary().len(), BINARY_HEADER_LEN);
        let csv = ds.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(Dataset::decode(csv.as_bytes()).unwrap(), ds);
    }

    #[test]
    fn records_are_index_keyed() {
        let ds = generate(20, 99, 2).unwrap();
        for r in &ds.records {
            assert_eq!(*r, generate_record(99, r.index).unwrap());
            r.validate().unwrap();
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let ds = generate(50, 3, 1).unwrap();
        assert_eq!(Dataset::decode(&ds.to_binary()).unwrap(), ds);
        assert_eq!(Dataset::decode(ds.to_csv().as_bytes()).unwrap(), ds);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let bytes = generate(3, 3, 1).unwrap().to_binary();
        assert!(matches!(
            Dataset::decode(&bytes[..bytes.len() - 8]),
            Err(DatasetError::Truncated { declared: 3, found: 2 })
        ));
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(matches!(Dataset::decode(&wrong_version), Err(DatasetError::Version(9))));
        assert!(matches!(Dataset::decode(b"garbage"), Err(DatasetError::Format(_))));
    }

    #[test]
    fn malformed_csv_rows_are_rejected() {
        let good = generate(2, 1, 1).unwrap().to_csv();
        let short = good.replace(",0.", ";0.");
        assert!(matches!(Dataset::decode(short.as_bytes()), Err(DatasetError::Malformed { .. })));
        let bad_number = format!("{CSV_HEADER}\n0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,x,0.0\n");
        assert!(matches!(
            Dataset::decode(bad_number.as_bytes()),
            Err(DatasetError::Malformed { line: 2, .. })
        ));
        let out_of_range = format!("{CSV_HEADER}\n0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,1.5\n");
        assert!(matches!(
            Dataset::decode(out_of_range.as_bytes()),
            Err(DatasetError::InvalidRecord { index: 0, .. })
        ));
        let missing_row = good.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(matches!(
            Dataset::decode(missing_row.as_bytes()),
            Err(DatasetError::Truncated { declared: 2, found: 1 })
        ));
        let other_version = good.replace("version=1", "version=7");
        assert!(matches!(Dataset::decode(other_version.as_bytes()), Err(DatasetError::Version(7))));
    }

    #[test]
    fn split_partitions() {
        let records: Vec<DatasetRecord> = (0..1000)
            .map(|i| DatasetRecord { index: i, p: [0.25; 10], n_a: 0.0 })
            .collect();
        let (train, test) = split(&records, 0.8, 17).unwrap();
        assert_eq!((train.len(), test.len()), (800, 200));
        let mut all: Vec<u64> = train.iter().chain(&test).map(|r| r.index).collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        let (again, _) = split(&records, 0.8, 17).unwrap();
        assert_eq!(train, again);
        assert!(matches!(split(&records, 1.0, 1), Err(DatasetError::SplitFraction(_))));
        assert!(matches!(split(&records, 0.0, 1), Err(DatasetError::SplitFraction(_))));
    }

    #[test]
    fn feature_matrix_slices_prefix() {
        let ds = generate(4, 8, 1).unwrap();
        let m = feature_matrix(&ds.records, 7);
        assert_eq!(m.dim(), (4, 7));
        assert_eq!(m[[2, 6]], ds.records[2].p[6]);
    }
}
