//! Uniformly sampled state trajectories and their CSV form
//! (`t,x1,...,xm`, 17 significant digits).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// n x m, one row per sample.
    pub states: DMatrix<f64>,
    pub dt: f64,
    pub noisy: bool,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: DMatrix<f64>, dt: f64, noisy: bool) -> Self {
        debug_assert_eq!(times.len(), states.nrows());
        Self {
            times,
            states,
            dt,
            noisy,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(w, &self.times, &self.states)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Reads a trajectory; the step is inferred from the time column and
    /// must be uniform.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::Parse("expected header `t,x1,...,xm`".into()));
        }
        let m = headers.len() - 1;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{s}`")))
            };
            times.push(parse(&rec[0])?);
            for j in 1..=m {
                values.push(parse(&rec[j])?);
            }
        }
        let n = times.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("trajectory contains non-finite values".into()));
        }
        let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Parse("times must be strictly increasing".into()));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs() * 1e-3) {
                return Err(Error::Parse("times are not uniformly spaced".into()));
            }
        }
        let states = DMatrix::from_row_slice(n, m, &values);
        Ok(Self::new(times, states, dt, false))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Writes `t,x1,...,xm` rows for an arbitrary matrix.
pub fn write_matrix_csv<W: Write>(w: W, times: &[f64], states: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=states.ncols()).map(|j| format!("x{j}")));
    wtr.write_record(&header)?;
    for (i, t) in times.iter().enumerate() {
        let mut row = vec![format!("{t:.16e}")];
        row.extend(states.row(i).iter().map(|v| format!("{v:.16e}")));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
