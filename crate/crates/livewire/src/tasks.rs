//! Synthetic tasks with known relational ground truth, plus CSV
//! ingestion. All generators are pure functions of (config, seed).

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::propagation::Batch;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("correlated pairs must name distinct, in-range groups")]
    BadPairs,
    #[error("noise level must lie in [0, 1), got {0}")]
    BadNoise(f64),
    #[error("shots must be positive")]
    ZeroShots,
    #[error("novel_support must equal shots * novel_classes ({expected}), got {got}")]
    SupportSizeMismatch { expected: usize, got: usize },
    #[error("protocol needs at least 2 base classes and 1 novel class")]
    BadClassCounts,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected {expected} columns, found {got}")]
    ColumnCount {
        path: String,
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{path}:{line}: column '{column}': cannot parse '{value}' as a number")]
    BadNumber {
        path: String,
        line: usize,
        column: String,
        value: String,
    },
    #[error("{path}: header must end with a 'label' column")]
    BadHeader { path: String },
    #[error("{path}:{line}: unknown label '{label}' for this schema")]
    UnknownLabel {
        path: String,
        line: usize,
        label: String,
    },
    #[error("csv has no data rows")]
    Empty,
}

/// In-memory labeled dataset in stable row order.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_width(&self) -> usize {
        self.inputs.first().map_or(0, |r| r.len())
    }

    /// One-hot batch over the rows `order[start..end]`, targets widened
    /// to `target_width` (>= n_classes) so extended output layers can
    /// reuse the same data.
    pub fn batch_of(&self, rows: &[usize], target_width: usize) -> Batch {
        Batch {
            inputs: rows.iter().map(|&r| self.inputs[r].clone()).collect(),
            targets: rows
                .iter()
                .map(|&r| {
                    let mut t = vec![0.0; target_width];
                    t[self.labels[r]] = 1.0;
                    t
                })
                .collect(),
        }
    }

    /// Split into consecutive batches in row order; a trailing batch
    /// smaller than 2 is dropped (train mode needs batch statistics).
    pub fn sequential_batches(&self, batch_size: usize, target_width: usize) -> Vec<Batch> {
        let order: Vec<usize> = (0..self.len()).collect();
        order
            .chunks(batch_size)
            .filter(|chunk| chunk.len() >= 2 || batch_size == 1)
            .map(|chunk| self.batch_of(chunk, target_width))
            .collect()
    }
}

/// Inputs engineered so two distant feature groups co-activate exactly
/// when they form a correlated pair. Values are emitted in standardized
/// units: background noise is a rejection-sampled standard normal
/// confined to (-1, 1) and scaled by `noise`, strong groups draw from
/// N(3, 0.3) confined to (2, 4). With the event threshold at one unit,
/// precisely the active pair's groups fire on every sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoincidenceTask {
    pub n_groups: usize,
    pub group_width: usize,
    pub correlated_pairs: Vec<(usize, usize)>,
    pub noise: f64,
    pub seed: u64,
}

impl CoincidenceTask {
    pub fn validate(&self) -> Result<(), TaskError> {
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(TaskError::BadNoise(self.noise));
        }
        let mut used = vec![false; self.n_groups];
        for &(a, b) in &self.correlated_pairs {
            if a >= self.n_groups || b >= self.n_groups || a == b || used[a] || used[b] {
                return Err(TaskError::BadPairs);
            }
            used[a] = true;
            used[b] = true;
        }
        if self.correlated_pairs.is_empty() || self.group_width == 0 {
            return Err(TaskError::BadPairs);
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.n_groups * self.group_width
    }

    /// The input-layer group of a feature column.
    pub fn group_of(&self, column: usize) -> usize {
        column / self.group_width
    }
}

/// Per-sample generation record: which correlated pair was active.
#[derive(Clone, Debug)]
pub struct CoincidenceRecord {
    pub active_pair: Vec<usize>,
}

fn draw_in(rng: &mut ChaCha8Rng, dist: &Normal<f64>, lo: f64, hi: f64) -> f64 {
    loop {
        let v = dist.sample(rng);
        if v > lo && v < hi {
            return v;
        }
    }
}

/// Generate `n` samples; the label is the index of the active pair.
pub fn gen_coincidence(
    task: &CoincidenceTask,
    n: usize,
) -> Result<(Dataset, CoincidenceRecord), TaskError> {
    task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let strong = Normal::new(3.0, 0.3).expect("valid");
    let unit = Normal::new(0.0, 1.0).expect("valid");
    let width = task.input_width();
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut active_pair = Vec::with_capacity(n);
    for _ in 0..n {
        let pair_idx = rng.gen_range(0..task.correlated_pairs.len());
        let (ga, gb) = task.correlated_pairs[pair_idx];
        let mut row = vec![0.0; width];
        for (col, value) in row.iter_mut().enumerate() {
            let g = col / task.group_width;
            *value = if g == ga || g == gb {
                draw_in(&mut rng, &strong, 2.0, 4.0)
            } else if task.noise > 0.0 {
                task.noise * draw_in(&mut rng, &unit, -1.0, 1.0)
            } else {
                0.0
            };
        }
        inputs.push(row);
        labels.push(pair_idx);
        active_pair.push(pair_idx);
    }
    Ok((
        Dataset {
            inputs,
            labels,
            n_classes: task.correlated_pairs.len(),
        },
        CoincidenceRecord { active_pair },
    ))
}

/// Gaussian-cluster few-shot protocol: base classes are trained in
/// full, novel classes appear only as a handful of support shots.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FewShotProtocol {
    pub base_classes: usize,
    pub novel_classes: usize,
    /// Support samples per novel class; small by design.
    pub shots: usize,
    pub base_train: usize,
    pub base_test: usize,
    pub novel_support: usize,
    pub novel_query: usize,
    pub seed: u64,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    #[serde(default = "default_cluster_std")]
    pub cluster_std: f64,
    #[serde(default = "default_center_separation")]
    pub center_separation: f64,
}

fn default_input_dim() -> usize {
    8
}

fn default_cluster_std() -> f64 {
    0.5
}

fn default_center_separation() -> f64 {
    3.0
}

impl FewShotProtocol {
    pub fn validate(&self) -> Result<(), TaskError> {
        if self.shots == 0 {
            return Err(TaskError::ZeroShots);
        }
        if self.base_classes < 2 || self.novel_classes == 0 {
            return Err(TaskError::BadClassCounts);
        }
        let expected = self.shots * self.novel_classes;
        if self.novel_support != expected {
            return Err(TaskError::SupportSizeMismatch {
                expected,
                got: self.novel_support,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FewShotData {
    pub base_train: Dataset,
    pub base_test: Dataset,
    /// Labels base_classes..base_classes + novel_classes.
    pub novel_support: Dataset,
    pub novel_query: Dataset,
}

/// Draw cluster centers (base classes first, novel classes from
/// held-out draws), rejecting any center closer than
/// `center_separation` to an accepted one, then sample each split
/// round-robin over its classes.
pub fn gen_fewshot(protocol: &FewShotProtocol) -> Result<FewShotData, TaskError> {
    protocol.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let total_classes = protocol.base_classes + protocol.novel_classes;
    let d = protocol.input_dim;
    let spread = 4.0 * protocol.center_separation.max(1.0);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(total_classes);
    while centers.len() < total_classes {
        let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-spread..spread)).collect();
        let min_dist = centers
            .iter()
            .map(|other| {
                c.iter()
                    .zip(other)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        if min_dist >= protocol.center_separation {
            centers.push(c);
        }
    }

    let noise = Normal::new(0.0, protocol.cluster_std).expect("valid");
    let mut draw_split = |classes: std::ops::Range<usize>, total: usize| -> Dataset {
        let class_count = classes.len();
        let mut inputs = Vec::with_capacity(total);
        let mut labels = Vec::with_capacity(total);
        for i in 0..total {
            let class = classes.start + (i % class_count);
            let row: Vec<f64> = centers[class]
                .iter()
                .map(|&c| c + noise.sample(&mut rng))
                .collect();
            inputs.push(row);
            labels.push(class);
        }
        Dataset {
            inputs,
            labels,
            n_classes: total_classes,
        }
    };

    let base_train = draw_split(0..protocol.base_classes, protocol.base_train);
    let base_test = draw_split(0..protocol.base_classes, protocol.base_test);
    let novel_support = draw_split(
        protocol.base_classes..total_classes,
        protocol.novel_support,
    );
    let novel_query = draw_split(protocol.base_classes..total_classes, protocol.novel_query);
    Ok(FewShotData {
        base_train,
        base_test,
        novel_support,
        novel_query,
    })
}

/// Per-column standardization parameters fitted on a training split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Fitted on the training split: column statistics plus the sorted
/// label vocabulary. Pass it back in to standardize an eval split the
/// same way; unknown eval labels are an error.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    pub stats: Option<ColumnStats>,
    pub labels: Option<Vec<String>>,
}

/// Load a CSV (UTF-8, comma separators, header row, last column
/// `label`, numeric features). With an empty schema the split is
/// treated as training data: statistics are fitted here and returned.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<(Dataset, CsvSchema), TaskError> {
    let display = path.display().to_string();
    let body = fs::read_to_string(path).map_err(|source| TaskError::Io {
        path: display.clone(),
        source,
    })?;
    load_csv_str(&body, &display, schema)
}

pub fn load_csv_str(
    body: &str,
    origin: &str,
    schema: &CsvSchema,
) -> Result<(Dataset, CsvSchema), TaskError> {
    let mut lines = body.lines().enumerate();
    let (_, header) = lines.next().ok_or(TaskError::Empty)?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 || *columns.last().unwrap() != "label" {
        return Err(TaskError::BadHeader {
            path: origin.to_string(),
        });
    }
    let n_features = columns.len() - 1;

    let mut raw: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(TaskError::ColumnCount {
                path: origin.to_string(),
                line: line_no,
                expected: columns.len(),
                got: cells.len(),
            });
        }
        let mut row = Vec::with_capacity(n_features);
        for (k, cell) in cells[..n_features].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| TaskError::BadNumber {
                path: origin.to_string(),
                line: line_no,
                column: columns[k].to_string(),
                value: cell.to_string(),
            })?;
            row.push(v);
        }
        raw.push(row);
        raw_labels.push(cells[n_features].to_string());
    }
    if raw.is_empty() {
        return Err(TaskError::Empty);
    }

    let vocab: Vec<String> = match &schema.labels {
        Some(v) => v.clone(),
        None => {
            let mut v: Vec<String> = raw_labels.clone();
            v.sort();
            v.dedup();
            v
        }
    };
    let mut labels = Vec::with_capacity(raw_labels.len());
    for (i, l) in raw_labels.iter().enumerate() {
        match vocab.binary_search(l).ok().or_else(|| {
            // vocab provided by the caller may be unsorted
            vocab.iter().position(|v| v == l)
        }) {
            Some(k) => labels.push(k),
            None => {
                return Err(TaskError::UnknownLabel {
                    path: origin.to_string(),
                    line: i + 2,
                    label: l.clone(),
                })
            }
        }
    }

    let stats = match &schema.stats {
        Some(s) => s.clone(),
        None => {
            let n = raw.len() as f64;
            let mut means = vec![0.0; n_features];
            let mut stds = vec![0.0; n_features];
            for row in &raw {
                for (k, &v) in row.iter().enumerate() {
                    means[k] += v;
                }
            }
            for m in means.iter_mut() {
                *m /= n;
            }
            for row in &raw {
                for (k, &v) in row.iter().enumerate() {
                    stds[k] += (v - means[k]) * (v - means[k]);
                }
            }
            for s in stds.iter_mut() {
                *s = (*s / n).sqrt();
            }
            ColumnStats { means, stds }
        }
    };

    let inputs: Vec<Vec<f64>> = raw
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &v)| {
                    if stats.stds[k] > 1e-12 {
                        (v - stats.means[k]) / stats.stds[k]
                    } else {
                        v - stats.means[k]
                    }
                })
                .collect()
        })
        .collect();

    Ok((
        Dataset {
            inputs,
            labels,
            n_classes: vocab.len(),
        },
        CsvSchema {
            stats: Some(stats),
            labels: Some(vocab),
        },
    ))
}
