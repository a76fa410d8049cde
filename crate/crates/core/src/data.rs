//! Datasets: dense row-major features, task-typed labels, CSV I/O,
//! standardization and seeded synthetic instances.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Size(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Rows selected by `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }
}

/// Supervised task, which fixes the label type and the loss family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl Task {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::Parameter(format!(
                "unknown task `{other}` (expected regression, binary or multiclass)"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Real(Vec<f64>),
    /// Stored as 0.0 / 1.0.
    Binary(Vec<f64>),
    Classes { labels: Vec<usize>, num_classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Real(y) | Labels::Binary(y) => y.len(),
            Labels::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Real(_) => Task::Regression,
            Labels::Binary(_) => Task::Binary,
            Labels::Classes { .. } => Task::Multiclass,
        }
    }

    fn select(&self, indices: &[usize]) -> Labels {
        match self {
            Labels::Real(y) => Labels::Real(indices.iter().map(|&i| y[i]).collect()),
            Labels::Binary(y) => Labels::Binary(indices.iter().map(|&i| y[i]).collect()),
            Labels::Classes { labels, num_classes } => Labels::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                num_classes: *num_classes,
            },
        }
    }

    fn as_f64(&self, i: usize) -> f64 {
        match self {
            Labels::Real(y) | Labels::Binary(y) => y[i],
            Labels::Classes { labels, .. } => labels[i] as f64,
        }
    }
}

/// Features, labels and optional group membership for parity metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Labels,
    groups: Option<Vec<String>>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Labels) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Size(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(k) = features.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite feature at row {}, column {}",
                k / features.cols().max(1),
                k % features.cols().max(1)
            )));
        }
        match &labels {
            Labels::Real(y) => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Data(format!("non-finite label at row {i}")));
                }
            }
            Labels::Binary(y) => {
                if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::Data(format!("binary label {} at row {i} is not 0 or 1", y[i])));
                }
            }
            Labels::Classes { labels, num_classes } => {
                if *num_classes < 2 {
                    return Err(Error::Data(format!("need at least 2 classes, got {num_classes}")));
                }
                if let Some(i) = labels.iter().position(|&c| c >= *num_classes) {
                    return Err(Error::Data(format!(
                        "class {} at row {i} out of range for {num_classes} classes",
                        labels[i]
                    )));
                }
            }
        }
        let feature_names = (0..features.cols()).map(|j| format!("x{j}")).collect();
        Ok(Dataset { features, labels, groups: None, feature_names })
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self> {
        if groups.len() != self.len() {
            return Err(Error::Size(format!("{} groups for {} rows", groups.len(), self.len())));
        }
        self.groups = Some(groups);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.dim() {
            return Err(Error::Size(format!("{} names for {} features", names.len(), self.dim())));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of features `d`.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// `C` for multiclass data, 1 otherwise.
    pub fn num_classes(&self) -> usize {
        match &self.labels {
            Labels::Classes { num_classes, .. } => *num_classes,
            _ => 1,
        }
    }

    pub fn task(&self) -> Task {
        self.labels.task()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &Labels {
        &self.labels
    }

    pub fn groups(&self) -> Option<&[String]> {
        self.groups.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows selected by `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: self.labels.select(indices),
            groups: self
                .groups
                .as_ref()
                .map(|g| indices.iter().map(|&i| g[i].clone()).collect()),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Seeded random split into `(train, test)` with `round(test_fraction * n)`
    /// test rows.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::Parameter(format!(
                "test fraction must lie in [0, 1), got {test_fraction}"
            )));
        }
        let n = self.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        let n_test = (test_fraction * n as f64).round() as usize;
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Column roles for [`load_csv`]; every other column is a numeric feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub label_column: String,
    pub group_column: Option<String>,
    pub task: Task,
}

impl CsvSchema {
    pub fn new(task: Task) -> Self {
        CsvSchema { label_column: "label".into(), group_column: None, task }
    }
}

/// Loads a headed, comma-separated file. Row numbers in errors count data
/// rows from 1 (the header is not a row).
///
/// Binary labels may be written as 0/1 or -1/+1; multiclass labels are
/// nonnegative integers and `C` is one more than the largest observed.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let label_idx = find(&schema.label_column).ok_or_else(|| {
        Error::Schema(format!(
            "label column `{}` not found in {} (columns: {})",
            schema.label_column,
            path.display(),
            headers.join(", ")
        ))
    })?;
    let group_idx = match &schema.group_column {
        Some(name) => Some(find(name).ok_or_else(|| {
            Error::Schema(format!("group column `{name}` not found in {}", path.display()))
        })?),
        None => None,
    };
    let feature_idx: Vec<usize> =
        (0..headers.len()).filter(|&j| j != label_idx && Some(j) != group_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::Schema(format!("{} has no feature columns", path.display())));
    }

    let parse = |cell: &str, row: usize, col: usize| -> Result<f64> {
        cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            row,
            column: headers[col].clone(),
            message: format!("`{cell}` is not a finite number"),
        })
    };

    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    let mut groups = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for &j in &feature_idx {
            data.push(parse(&record[j], row, j)?);
        }
        raw_labels.push((parse(&record[label_idx], row, label_idx)?, row));
        if let Some(g) = group_idx {
            groups.push(record[g].to_owned());
        }
    }
    let n = raw_labels.len();
    if n == 0 {
        return Err(Error::Data(format!("{} has no data rows", path.display())));
    }
    let label_err = |row: usize, message: String| Error::Parse {
        row,
        column: schema.label_column.clone(),
        message,
    };
    let labels = match schema.task {
        Task::Regression => Labels::Real(raw_labels.iter().map(|&(v, _)| v).collect()),
        Task::Binary => {
            let mut y = Vec::with_capacity(n);
            for &(v, row) in &raw_labels {
                y.push(match v {
                    v if v == 1.0 => 1.0,
                    v if v == 0.0 || v == -1.0 => 0.0,
                    v => return Err(label_err(row, format!("binary label {v} is not 0/1 or -1/+1"))),
                });
            }
            Labels::Binary(y)
        }
        Task::Multiclass => {
            let mut y = Vec::with_capacity(n);
            for &(v, row) in &raw_labels {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(label_err(row, format!("class label {v} is not a nonnegative integer")));
                }
                y.push(v as usize);
            }
            let num_classes = y.iter().max().map_or(0, |m| m + 1);
            Labels::Classes { labels: y, num_classes }
        }
    };
    let names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    let dataset = Dataset::new(Matrix::new(n, feature_idx.len(), data)?, labels)?.with_feature_names(names)?;
    match group_idx {
        Some(_) => dataset.with_groups(groups),
        None => Ok(dataset),
    }
}

/// Writes features, then the label column, then the group column if any.
/// Floats use the shortest representation that parses back exactly.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, schema: &CsvSchema) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = dataset.feature_names().to_vec();
    header.push(schema.label_column.clone());
    let group_name = schema.group_column.clone().unwrap_or_else(|| "group".into());
    if dataset.groups().is_some() {
        header.push(group_name);
    }
    writer.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut record: Vec<String> = dataset.features().row(i).iter().map(|v| v.to_string()).collect();
        record.push(dataset.labels().as_f64(i).to_string());
        if let Some(groups) = dataset.groups() {
            record.push(groups[i].clone());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Per-column training mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardizationStats {
    /// Constant columns get standard deviation 1 so they map to zeros.
    pub fn fit(features: &Matrix) -> Self {
        let (n, d) = (features.rows(), features.cols());
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, x) in mean.iter_mut().zip(features.row(i)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((v, x), m) in var.iter_mut().zip(features.row(i)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n.max(1) as f64).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        StandardizationStats { mean, std }
    }

    pub fn apply(&self, features: &Matrix) -> Result<Matrix> {
        if features.cols() != self.mean.len() {
            return Err(Error::Size(format!(
                "stats fitted on {} columns, data has {}",
                self.mean.len(),
                features.cols()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            for ((x, m), s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Ok(out)
    }
}

/// Standardizes both sets with statistics estimated on `train`.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, StandardizationStats)> {
    if train.dim() != test.dim() {
        return Err(Error::Size(format!(
            "train has {} features, test has {}",
            train.dim(),
            test.dim()
        )));
    }
    let stats = StandardizationStats::fit(train.features());
    let mut tr = train.clone();
    tr.features = stats.apply(train.features())?;
    let mut te = test.clone();
    te.features = stats.apply(test.features())?;
    Ok((tr, te, stats))
}

/// Parameters of a seeded synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub task: Task,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Regression: standard deviation of additive label noise. Classification:
    /// standard deviation of noise added to the logits before sampling.
    pub noise: f64,
    /// Classes for multiclass data.
    pub num_classes: usize,
    /// Scale of the ground-truth parameter; 0 gives `w = 0`.
    pub truth_scale: f64,
    /// Number of groups; rows of group `k` have their first feature shifted
    /// by `k / 2`. Zero disables the group column.
    pub groups: usize,
}

impl SyntheticSpec {
    pub fn new(task: Task, n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec { task, n, d, seed, noise: 0.1, num_classes: 3, truth_scale: 1.0, groups: 0 }
    }

    fn param_dim(&self) -> usize {
        match self.task {
            Task::Multiclass => self.num_classes * self.d,
            _ => self.d,
        }
    }

    /// The ground-truth parameter (`C x d` row-major for multiclass).
    pub fn truth(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        (0..self.param_dim())
            .map(|_| self.truth_scale * rng.sample::<f64, _>(StandardNormal) / (self.d as f64).sqrt())
            .collect()
    }
}

/// Standard normal features with labels drawn from the matching model at
/// the seeded ground truth.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.n < 2 || spec.d < 1 {
        return Err(Error::Size(format!("need n >= 2 and d >= 1, got n={}, d={}", spec.n, spec.d)));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::Parameter(format!("noise must be nonnegative, got {}", spec.noise)));
    }
    if spec.task == Task::Multiclass && spec.num_classes < 2 {
        return Err(Error::Parameter(format!("need at least 2 classes, got {}", spec.num_classes)));
    }
    let truth = spec.truth();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let (n, d) = (spec.n, spec.d);
    let mut features = Matrix::zeros(n, d);
    let mut groups = Vec::new();
    for i in 0..n {
        for x in features.row_mut(i) {
            *x = rng.sample(StandardNormal);
        }
        if spec.groups > 0 {
            let k = i % spec.groups;
            features.row_mut(i)[0] += 0.5 * k as f64;
            groups.push(format!("g{k}"));
        }
    }
    let noise = |rng: &mut ChaCha8Rng| spec.noise * rng.sample::<f64, _>(StandardNormal);
    let labels = match spec.task {
        Task::Regression => Labels::Real(
            (0..n).map(|i| crate::linalg::dot(features.row(i), &truth) + noise(&mut rng)).collect(),
        ),
        Task::Binary => {
            let logits: Vec<f64> = (0..n).map(|i| crate::linalg::dot(features.row(i), &truth) + noise(&mut rng)).collect();
            Labels::Binary(
                logits
                    .iter()
                    .map(|&z| if rng.random::<f64>() < sigmoid(z) { 1.0 } else { 0.0 })
                    .collect(),
            )
        }
        Task::Multiclass => {
            let c = spec.num_classes;
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let logits: Vec<f64> = (0..c)
                    .map(|k| crate::linalg::dot(&truth[k * d..(k + 1) * d], features.row(i)) + noise(&mut rng))
                    .collect();
                let lse = crate::linalg::logsumexp(&logits);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut label = c - 1;
                for (k, z) in logits.iter().enumerate() {
                    acc += (z - lse).exp();
                    if u < acc {
                        label = k;
                        break;
                    }
                }
                labels.push(label);
            }
            Labels::Classes { labels, num_classes: c }
        }
    };
    let dataset = Dataset::new(features, labels)?;
    if spec.groups > 0 {
        dataset.with_groups(groups)
    } else {
        Ok(dataset)
    }
}

/// The distinct group names in sorted order.
pub fn group_names(groups: &[String]) -> Vec<String> {
    groups.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
