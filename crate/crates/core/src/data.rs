//! Toy grid datasets, latent prior draws and CSV persistence.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{invalid, Error, Result};
use crate::gmm::{CovarianceMode, GmmModel};
use crate::scalar::Scalar;

/// Square grid of isotropic Gaussian modes centered on the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyGmmSpec {
    pub grid_side: usize,
    pub spacing: f64,
    pub mode_std: f64,
    /// Added to every center coordinate.
    pub center_offset: f64,
}

impl Default for ToyGmmSpec {
    fn default() -> Self {
        Self {
            grid_side: 5,
            spacing: 1.0,
            mode_std: 0.05,
            center_offset: 0.0,
        }
    }
}

impl ToyGmmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 {
            return Err(invalid("grid_side must be at least 1"));
        }
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(invalid("spacing must be positive"));
        }
        if !(self.mode_std > 0.0) || !self.mode_std.is_finite() {
            return Err(invalid("mode_std must be positive"));
        }
        if !self.center_offset.is_finite() {
            return Err(invalid("center_offset must be finite"));
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.grid_side * self.grid_side
    }

    /// Grid centers, row-major over (x index, y index).
    pub fn centers<T: Scalar>(&self) -> Tensor<T> {
        let g = self.grid_side;
        let half = (g as f64 - 1.0) / 2.0;
        let coord = |i: usize| T::of((i as f64 - half) * self.spacing + self.center_offset);
        let data = (0..g)
            .flat_map(|i| (0..g).flat_map(move |j| [coord(i), coord(j)]))
            .collect();
        Tensor::from_parts(vec![g * g, 2], data)
    }

    /// The equal-weight ground-truth mixture.
    pub fn mixture<T: Scalar>(&self) -> Result<GmmModel<T>> {
        self.validate()?;
        let centers = self.centers::<T>();
        let k = self.n_modes();
        let var = T::of(self.mode_std * self.mode_std);
        GmmModel::new(
            vec![T::one(); k],
            (0..k).map(|i| centers.row(i).to_vec()).collect(),
            vec![vec![var, T::zero(), T::zero(), var]; k],
            CovarianceMode::Full,
        )
    }
}

/// Samples with the id of the component that generated each one.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    samples: Tensor<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(samples: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if samples.shape().len() != 2 || samples.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                op: "labeled_dataset",
                lhs: samples.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        Ok(Self { samples, labels })
    }

    pub fn samples(&self) -> &Tensor<T> {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn into_parts(self) -> (Tensor<T>, Vec<usize>) {
        (self.samples, self.labels)
    }
}

/// Draws `n` labeled points from the grid mixture, returning it alongside.
pub fn make_grid_dataset<T: Scalar>(
    spec: &ToyGmmSpec,
    n: usize,
    seed: u64,
) -> Result<(LabeledDataset<T>, GmmModel<T>)> {
    if n == 0 {
        return Err(invalid("make_grid_dataset: n must be at least 1"));
    }
    let gmm = spec.mixture::<T>()?;
    let (samples, labels) = gmm.sample(n, seed);
    Ok((LabeledDataset::new(samples, labels)?, gmm))
}

/// `n x m` matrix of independent standard normal draws.
pub fn sample_prior<T: Scalar>(n: usize, m: usize, seed: u64) -> Tensor<T> {
    sample_prior_with(n, m, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sample_prior_with<T: Scalar>(n: usize, m: usize, rng: &mut impl Rng) -> Tensor<T> {
    let data = (0..n * m)
        .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Tensor::from_parts(vec![n, m], data)
}

/// Writes `x0,...,x{d-1}[,label]` rows with shortest round-trip floats.
pub fn write_csv<T: Scalar, W: Write>(
    out: W,
    samples: &Tensor<T>,
    labels: Option<&[usize]>,
) -> Result<()> {
    if samples.shape().len() != 2 {
        return Err(invalid("write_csv: samples must be a matrix"));
    }
    if let Some(l) = labels {
        if l.len() != samples.rows() {
            return Err(Error::ShapeMismatch {
                op: "write_csv",
                lhs: samples.shape().to_vec(),
                rhs: vec![l.len()],
            });
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let d = samples.cols();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(csv_io)?;
    let mut record = Vec::with_capacity(d + 1);
    for i in 0..samples.rows() {
        record.clear();
        record.extend(samples.row(i).iter().map(|v| v.to_string()));
        if let Some(l) = labels {
            record.push(l[i].to_string());
        }
        w.write_record(&record).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Matrix and optional label column read from CSV.
pub type CsvTable<T> = (Tensor<T>, Option<Vec<usize>>);

/// Parses the format produced by [`write_csv`]; `source` names the input in errors.
pub fn read_csv<T: Scalar, R: Read>(input: R, source: &Path) -> Result<CsvTable<T>> {
    let parse_err = |line: u64, detail: String| Error::Parse {
        path: source.to_path_buf(),
        line,
        detail,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = r.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let has_labels = header.iter().next_back() == Some("label");
    let d = header.len() - usize::from(has_labels);
    if d == 0 {
        return Err(parse_err(1, "header names no data columns".into()));
    }
    for (j, name) in header.iter().take(d).enumerate() {
        if name != format!("x{j}") {
            return Err(parse_err(1, format!("unexpected column name {name:?}")));
        }
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        for field in rec.iter().take(d) {
            let v: T = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("invalid number {field:?}")))?;
            data.push(v);
        }
        if has_labels {
            let field = &rec[d];
            let l: usize = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("invalid label {field:?}")))?;
            labels.push(l);
        }
        rows += 1;
    }
    let samples = Tensor::from_parts(vec![rows, d], data);
    Ok((samples, has_labels.then_some(labels)))
}

pub fn save_csv<T: Scalar>(path: &Path, samples: &Tensor<T>, labels: Option<&[usize]>) -> Result<()> {
    let file = File::create(path)?;
    write_csv(std::io::BufWriter::new(file), samples, labels)
}

pub fn load_csv<T: Scalar>(path: &Path) -> Result<CsvTable<T>> {
    let file = File::open(path)?;
    read_csv(std::io::BufReader::new(file), &PathBuf::from(path))
}
