//! Plain-text artifact formats. Floats are written with Rust's shortest
//! round-trip formatting so files reload bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcmc::PosteriorChain;
use crate::prediction::PredictiveSummary;

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::Reader::from_path(path)?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn parse(field: &str, path: &Path) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("{}: cannot parse `{field}` as a number", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Rows of a dataset file.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRows {
    pub fixed_inputs: DMatrix<f64>,
    pub fixed_outputs: DVector<f64>,
    /// True locations of the uncertain points.
    pub uncertain_truth: DMatrix<f64>,
    pub uncertain_outputs: DVector<f64>,
    pub prior_means: DMatrix<f64>,
    pub prior_stds: DMatrix<f64>,
}

/// `role, x_0.., y, prior_mean_0.., prior_std_0..`; prior columns are empty
/// on fixed rows and `x` holds the true location on uncertain rows.
pub fn write_dataset(path: &Path, rows: &DatasetRows) -> Result<()> {
    let d = rows.fixed_inputs.ncols().max(rows.uncertain_truth.ncols());
    let mut w = writer(path)?;
    let mut header = vec!["role".to_string()];
    header.extend((0..d).map(|j| format!("x_{j}")));
    header.push("y".into());
    header.extend((0..d).map(|j| format!("prior_mean_{j}")));
    header.extend((0..d).map(|j| format!("prior_std_{j}")));
    w.write_record(&header)?;
    for i in 0..rows.fixed_inputs.nrows() {
        let mut rec = vec!["fixed".to_string()];
        rec.extend(rows.fixed_inputs.row(i).iter().map(|v| num(*v)));
        rec.push(num(rows.fixed_outputs[i]));
        rec.extend(std::iter::repeat_n(String::new(), 2 * d));
        w.write_record(&rec)?;
    }
    for i in 0..rows.uncertain_truth.nrows() {
        let mut rec = vec!["uncertain".to_string()];
        rec.extend(rows.uncertain_truth.row(i).iter().map(|v| num(*v)));
        rec.push(num(rows.uncertain_outputs[i]));
        rec.extend(rows.prior_means.row(i).iter().map(|v| num(*v)));
        rec.extend(rows.prior_stds.row(i).iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<DatasetRows> {
    let mut r = reader(path)?;
    let header = r.headers()?.clone();
    let d = header.iter().filter(|h| h.starts_with("x_")).count();
    if header.len() != 2 + 3 * d || d == 0 {
        return Err(Error::invalid(format!("{}: unexpected dataset header", path.display())));
    }
    let (mut fx, mut fy, mut ux, mut uy, mut pm, mut ps) = (vec![], vec![], vec![], vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        let x: Vec<f64> = (1..=d).map(|k| parse(&rec[k], path)).collect::<Result<_>>()?;
        let y = parse(&rec[d + 1], path)?;
        match &rec[0] {
            "fixed" => {
                fx.extend(x);
                fy.push(y);
            }
            "uncertain" => {
                ux.extend(x);
                uy.push(y);
                for k in 0..d {
                    pm.push(parse(&rec[d + 2 + k], path)?);
                    ps.push(parse(&rec[2 * d + 2 + k], path)?);
                }
            }
            other => return Err(Error::invalid(format!("{}: unknown role `{other}`", path.display()))),
        }
    }
    Ok(DatasetRows {
        fixed_inputs: DMatrix::from_row_slice(fy.len(), d, &fx),
        fixed_outputs: DVector::from_vec(fy),
        uncertain_truth: DMatrix::from_row_slice(uy.len(), d, &ux),
        uncertain_outputs: DVector::from_vec(uy),
        prior_means: DMatrix::from_row_slice(pm.len() / d, d, &pm),
        prior_stds: DMatrix::from_row_slice(ps.len() / d, d, &ps),
    })
}

/// `sample_index, log_posterior, x_u_{i}_{j}...`, coordinates in row-major order.
pub fn write_chain(path: &Path, chain: &PosteriorChain) -> Result<()> {
    let (n_u, d) = chain.samples.first().map(|s| s.shape()).unwrap_or((0, 0));
    let mut w = writer(path)?;
    let mut header = vec!["sample_index".to_string(), "log_posterior".to_string()];
    for i in 0..n_u {
        header.extend((0..d).map(|j| format!("x_u_{i}_{j}")));
    }
    w.write_record(&header)?;
    for (k, (s, lp)) in chain.samples.iter().zip(&chain.log_posterior_values).enumerate() {
        let mut rec = vec![k.to_string(), num(*lp)];
        for i in 0..n_u {
            rec.extend(s.row(i).iter().map(|v| num(*v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads chain samples back as `n_u × d` matrices, along with their log posteriors.
pub fn read_chain(path: &Path, n_u: usize, d: usize) -> Result<(Vec<DMatrix<f64>>, Vec<f64>)> {
    let mut r = reader(path)?;
    if r.headers()?.len() != 2 + n_u * d {
        return Err(Error::invalid(format!(
            "{}: expected {} coordinates per sample",
            path.display(),
            n_u * d
        )));
    }
    let mut samples = Vec::new();
    let mut lps = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        lps.push(parse(&rec[1], path)?);
        let vals: Vec<f64> = (2..2 + n_u * d).map(|k| parse(&rec[k], path)).collect::<Result<_>>()?;
        samples.push(DMatrix::from_row_slice(n_u, d, &vals));
    }
    Ok((samples, lps))
}

/// `x_0.., marginal_mean, marginal_variance, band_lo, band_hi` with the band at ±2 std.
pub fn write_prediction(path: &Path, summary: &PredictiveSummary) -> Result<()> {
    let d = summary.test_inputs.ncols();
    let (lo, hi) = summary.band();
    let mut w = writer(path)?;
    let mut header: Vec<String> = (0..d).map(|j| format!("x_{j}")).collect();
    header.extend(["marginal_mean", "marginal_variance", "band_lo", "band_hi"].map(String::from));
    w.write_record(&header)?;
    for t in 0..summary.n_test() {
        let mut rec: Vec<String> = summary.test_inputs.row(t).iter().map(|v| num(*v)).collect();
        rec.extend([summary.marginal_mean[t], summary.marginal_variance[t], lo[t], hi[t]].map(num));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Prediction file contents: test inputs, marginal means and variances.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRows {
    pub test_inputs: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
}

pub fn read_prediction(path: &Path) -> Result<PredictionRows> {
    let mut r = reader(path)?;
    let width = r.headers()?.len();
    if width < 5 {
        return Err(Error::invalid(format!("{}: unexpected prediction header", path.display())));
    }
    let d = width - 4;
    let (mut xs, mut mean, mut var) = (vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        for k in 0..d {
            xs.push(parse(&rec[k], path)?);
        }
        mean.push(parse(&rec[d], path)?);
        var.push(parse(&rec[d + 1], path)?);
    }
    Ok(PredictionRows {
        test_inputs: DMatrix::from_row_slice(mean.len(), d, &xs),
        mean: DVector::from_vec(mean),
        variance: DVector::from_vec(var),
    })
}

pub fn write_kde(path: &Path, grid: &[f64], prior: &[f64], posterior: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["grid", "prior_density", "posterior_density"])?;
    for k in 0..grid.len() {
        w.write_record([grid[k], prior[k], posterior[k]].map(num))?;
    }
    w.flush()?;
    Ok(())
}

/// Completion state of each pipeline stage and the files it produced.
#[derive(Clone, Debug, Default)]
pub struct Manifest {
    entries: Vec<(String, String, Vec<String>)>,
}

impl Manifest {
    pub fn record(&mut self, stage: &str, status: &str, artifacts: Vec<String>) {
        self.entries.push((stage.to_string(), status.to_string(), artifacts));
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(|(_, s, _)| s == "ok")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let status = if self.is_complete() { "complete" } else { "incomplete" };
        writeln!(out, "status {status}")?;
        for (stage, st, files) in &self.entries {
            writeln!(out, "stage {stage} {st}")?;
            for f in files {
                writeln!(out, "  {f}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
