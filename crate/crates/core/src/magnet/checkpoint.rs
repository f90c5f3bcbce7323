//! JSON checkpoints holding every tensor, the optimiser state and the
//! hyperparameters. Floats are written in round-trip form, so a reload is
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{MagnetHyperparams, ModelState, Moments};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RealTensor {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComplexTensor {
    rows: usize,
    cols: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    hyperparams: MagnetHyperparams,
    input_dim: usize,
    seed: u64,
    epochs_done: u64,
    adam_steps: u64,
    filters: Vec<Vec<ComplexTensor>>,
    filter_first: Vec<Vec<ComplexTensor>>,
    filter_second: Vec<Vec<ComplexTensor>>,
    head_weight: RealTensor,
    head_weight_first: RealTensor,
    head_weight_second: RealTensor,
    head_bias: [f64; 2],
    head_bias_first: [f64; 2],
    head_bias_second: [f64; 2],
}

fn real_out(m: &DMatrix<f64>) -> RealTensor {
    RealTensor {
        rows: m.nrows(),
        cols: m.ncols(),
        data: m.as_slice().to_vec(),
    }
}

fn real_in(t: RealTensor) -> Result<DMatrix<f64>> {
    if t.data.len() != t.rows * t.cols {
        return Err(Error::Checkpoint(format!("tensor {}x{} has {} values", t.rows, t.cols, t.data.len())));
    }
    Ok(DMatrix::from_vec(t.rows, t.cols, t.data))
}

fn complex_out(m: &DMatrix<Complex64>) -> ComplexTensor {
    ComplexTensor {
        rows: m.nrows(),
        cols: m.ncols(),
        re: m.iter().map(|z| z.re).collect(),
        im: m.iter().map(|z| z.im).collect(),
    }
}

fn complex_in(t: ComplexTensor) -> Result<DMatrix<Complex64>> {
    if t.re.len() != t.rows * t.cols || t.im.len() != t.re.len() {
        return Err(Error::Checkpoint(format!("complex tensor {}x{} has wrong length", t.rows, t.cols)));
    }
    let data = t.re.into_iter().zip(t.im).map(|(re, im)| Complex64::new(re, im)).collect();
    Ok(DMatrix::from_vec(t.rows, t.cols, data))
}

fn layers_out<F: Fn(&Moments<DMatrix<Complex64>>) -> &DMatrix<Complex64>>(
    moments: &[Vec<Moments<DMatrix<Complex64>>>],
    pick: F,
) -> Vec<Vec<ComplexTensor>> {
    moments.iter().map(|l| l.iter().map(|m| complex_out(pick(m))).collect()).collect()
}

fn layers_in(layers: Vec<Vec<ComplexTensor>>) -> Result<Vec<Vec<DMatrix<Complex64>>>> {
    layers.into_iter().map(|l| l.into_iter().map(complex_in).collect()).collect()
}

pub fn write_checkpoint<W: Write>(state: &ModelState, hp: &MagnetHyperparams, out: W) -> Result<()> {
    let file = CheckpointFile {
        format_version: FORMAT_VERSION,
        hyperparams: hp.clone(),
        input_dim: state.input_dim,
        seed: state.seed,
        epochs_done: state.epochs_done,
        adam_steps: state.adam_steps,
        filters: state.filters.iter().map(|l| l.iter().map(complex_out).collect()).collect(),
        filter_first: layers_out(&state.filter_moments, |m| &m.first),
        filter_second: layers_out(&state.filter_moments, |m| &m.second),
        head_weight: real_out(&state.head_weight),
        head_weight_first: real_out(&state.head_weight_moments.first),
        head_weight_second: real_out(&state.head_weight_moments.second),
        head_bias: state.head_bias,
        head_bias_first: state.head_bias_moments.first,
        head_bias_second: state.head_bias_moments.second,
    };
    serde_json::to_writer(out, &file)?;
    Ok(())
}

pub fn read_checkpoint<R: std::io::Read>(input: R) -> Result<(ModelState, MagnetHyperparams)> {
    let file: CheckpointFile = serde_json::from_reader(input)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {}", file.format_version)));
    }
    let filters = layers_in(file.filters)?;
    let first = layers_in(file.filter_first)?;
    let second = layers_in(file.filter_second)?;
    if first.len() != filters.len() || second.len() != filters.len() {
        return Err(Error::Checkpoint("moment layers do not match filters".into()));
    }
    let filter_moments = first
        .into_iter()
        .zip(second)
        .map(|(f, s)| f.into_iter().zip(s).map(|(first, second)| Moments { first, second }).collect())
        .collect();
    let state = ModelState {
        input_dim: file.input_dim,
        filters,
        head_weight: real_in(file.head_weight)?,
        head_bias: file.head_bias,
        filter_moments,
        head_weight_moments: Moments {
            first: real_in(file.head_weight_first)?,
            second: real_in(file.head_weight_second)?,
        },
        head_bias_moments: Moments {
            first: file.head_bias_first,
            second: file.head_bias_second,
        },
        adam_steps: file.adam_steps,
        epochs_done: file.epochs_done,
        seed: file.seed,
    };
    state.check_shapes().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok((state, file.hyperparams))
}

pub fn save_checkpoint(path: &Path, state: &ModelState, hp: &MagnetHyperparams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(state, hp, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelState, MagnetHyperparams)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_checkpoint(BufReader::new(File::open(path)?))
}
