//! Combined-cycle power plant data: loader and GP-mean surrogate benchmark.
//!
//! Expects a CSV with header `AT,V,AP,RH,PE`. Features are standardised
//! (sample sd); the target `PE` is centred.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::Deserialize;

use crate::benchlab::functions::{BenchmarkFunction, Objective};
use crate::error::{Error, Result};
use crate::gp::{GpPosterior, KernelSpec};
use crate::points::PointSet;
use crate::seed::{stream_rng, Stream};

pub const CCPP_ROWS: usize = 9568;
pub const DEFAULT_TRAIN: usize = 7568;
pub const DEFAULT_CANDIDATES: usize = 2000;
pub const THRESHOLD: f64 = -15.0;
pub const INPUT_SD: f64 = 0.125;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    #[serde(rename = "AT")]
    at: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "AP")]
    ap: f64,
    #[serde(rename = "RH")]
    rh: f64,
    #[serde(rename = "PE")]
    pe: f64,
}

#[derive(Clone, Debug)]
pub struct CcppData {
    /// Standardised features, one row per record.
    pub features: PointSet,
    /// Centred target.
    pub target: Vec<f64>,
}

pub fn load_ccpp(path: &Path, expected_rows: Option<usize>) -> Result<CcppData> {
    let file = std::fs::File::open(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
    read_ccpp(file, expected_rows)
}

pub fn read_ccpp<R: Read>(reader: R, expected_rows: Option<usize>) -> Result<CcppData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut raw = Vec::new();
    let mut pe = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let r = row.map_err(|e| Error::Dataset(format!("record {}: {e}", i + 1)))?;
        let vals = [r.at, r.v, r.ap, r.rh, r.pe];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!("record {}: non-finite value", i + 1)));
        }
        raw.extend_from_slice(&vals[..4]);
        pe.push(r.pe);
    }
    let n = pe.len();
    if let Some(want) = expected_rows {
        if n != want {
            return Err(Error::Dataset(format!("expected {want} rows, found {n}")));
        }
    }
    if n < 2 {
        return Err(Error::Dataset("need at least two rows".into()));
    }
    for k in 0..4 {
        let col: Vec<f64> = (0..n).map(|i| raw[4 * i + k]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        if sd == 0.0 {
            return Err(Error::Dataset(format!("feature {k} is constant")));
        }
        for i in 0..n {
            raw[4 * i + k] = (raw[4 * i + k] - mean) / sd;
        }
    }
    let mean_pe = pe.iter().sum::<f64>() / n as f64;
    Ok(CcppData {
        features: PointSet::from_flat(4, raw)?,
        target: pe.iter().map(|v| v - mean_pe).collect(),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct CcppSetup {
    pub train: usize,
    pub candidates: usize,
    pub seed: u64,
}

impl Default for CcppSetup {
    fn default() -> Self {
        CcppSetup {
            train: DEFAULT_TRAIN,
            candidates: DEFAULT_CANDIDATES,
            seed: 0,
        }
    }
}

/// Random split into a surrogate training set and a disjoint candidate set.
/// The surrogate's posterior mean becomes the objective.
pub fn ccpp_benchmark(data: &CcppData, setup: CcppSetup) -> Result<BenchmarkFunction> {
    let n = data.target.len();
    if setup.train == 0 || setup.candidates == 0 || setup.train + setup.candidates > n {
        return Err(Error::param(
            "ccpp",
            format!("train + candidates must be positive and at most {n}"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(setup.seed, Stream::Split, 0, 0));
    let train = &order[..setup.train];
    let mut cand = order[setup.train..setup.train + setup.candidates].to_vec();
    cand.sort_unstable();

    let kernel = KernelSpec::new(300.0, 2.0)?;
    let noise = 0.5;
    let surrogate = GpPosterior::fit(
        kernel,
        noise,
        data.features.select(train),
        train.iter().map(|&i| data.target[i]).collect(),
    )?;
    Ok(BenchmarkFunction {
        name: "ccpp".into(),
        objective: Objective::Surrogate(Arc::new(surrogate)),
        candidates: data.features.select(&cand),
        grid: None,
        kernel,
        noise_variance: noise,
        threshold: THRESHOLD,
        gamma_shift: (5.0, 0.03),
        gaussian_sd: INPUT_SD,
    })
}
