use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::sample_sd;
use crate::seed;
use crate::trajectory::Trajectory;

/// Signal-to-noise ratio in decibels, or noiseless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snr {
    Db(f64),
    Infinite,
}

impl Snr {
    /// Noise standard deviation as a fraction of the signal standard deviation.
    pub fn noise_fraction(self) -> f64 {
        match self {
            Snr::Db(db) => 10f64.powf(-db / 20.0),
            Snr::Infinite => 0.0,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
            return Ok(Snr::Infinite);
        }
        t.parse::<f64>()
            .map(Snr::Db)
            .map_err(|_| Error::Parse(format!("bad SNR `{s}`")))
    }
}

impl std::fmt::Display for Snr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Snr::Db(db) => write!(f, "{db}"),
            Snr::Infinite => f.write_str("inf"),
        }
    }
}

impl serde::Serialize for Snr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Snr::Db(db) => s.serialize_f64(*db),
            Snr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> serde::Deserialize<'de> for Snr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(Snr::Db(v)),
            Raw::Num(v) if v == f64::INFINITY => Ok(Snr::Infinite),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("bad SNR {v}"))),
            Raw::Text(t) => Snr::parse(&t).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr: Snr,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr: Snr, seed: u64) -> Result<Self> {
        if let Snr::Db(db) = snr {
            if !(1.0..=61.0).contains(&db) {
                return Err(Error::InvalidArgument(format!(
                    "SNR must lie in [1, 61] dB or be infinite, got {db}"
                )));
            }
        }
        Ok(Self { snr, seed })
    }
}

/// Adds zero-mean Gaussian noise to each column with standard deviation
/// `sd(column) * 10^(-snr/20)`.
pub fn add_noise(traj: &Trajectory, spec: &NoiseSpec) -> Result<Trajectory> {
    if traj.noisy {
        return Err(Error::InvalidArgument(
            "trajectory already carries noise".into(),
        ));
    }
    let mut out = traj.clone();
    out.noisy = true;
    let frac = spec.snr.noise_fraction();
    if frac == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(spec.seed);
    for (j, mut col) in out.states.column_iter_mut().enumerate() {
        let sd = sample_sd(traj.states.column(j).as_slice()) * frac;
        if sd == 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, sd).expect("finite positive sd");
        for v in col.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn clean(n: usize) -> Trajectory {
        let states = DMatrix::from_fn(n, 2, |i, j| {
            ((i as f64) * 0.01 * (j + 1) as f64).sin() * (j + 1) as f64 * 3.0
        });
        Trajectory::new(
            (0..n).map(|i| i as f64 * 0.01).collect(),
            states,
            0.01,
            false,
        )
    }

    #[test]
    fn infinite_snr_is_identity() {
        let t = clean(100);
        let out = add_noise(&t, &NoiseSpec::new(Snr::Infinite, 3).unwrap()).unwrap();
        assert_eq!(out.states, t.states);
        assert_eq!(out.times, t.times);
    }

    #[test]
    fn twenty_db_is_a_tenth() {
        assert!((Snr::Db(20.0).noise_fraction() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn empirical_noise_level_and_mean() {
        let n = 100_000;
        let t = clean(n);
        let out = add_noise(&t, &NoiseSpec::new(Snr::Db(49.0), 11).unwrap()).unwrap();
        for j in 0..2 {
            let target = sample_sd(t.states.column(j).as_slice()) * 10f64.powf(-49.0 / 20.0);
            let diff: Vec<f64> = (0..n)
                .map(|i| out.states[(i, j)] - t.states[(i, j)])
                .collect();
            let sd = sample_sd(&diff);
            assert!((sd / target - 1.0).abs() < 0.05, "sd ratio {}", sd / target);
            let mean = crate::linalg::mean(&diff);
            assert!(mean.abs() < 3.0 * target / (n as f64).sqrt());
        }
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let t = clean(500);
        let a = add_noise(&t, &NoiseSpec::new(Snr::Db(30.0), 1).unwrap()).unwrap();
        let b = add_noise(&t, &NoiseSpec::new(Snr::Db(30.0), 1).unwrap()).unwrap();
        let c = add_noise(&t, &NoiseSpec::new(Snr::Db(30.0), 2).unwrap()).unwrap();
        assert_eq!(a.states, b.states);
        assert_ne!(a.states, c.states);
        assert!(a.noisy);
    }

    #[test]
    fn rejects_out_of_range_and_double_noise() {
        assert!(NoiseSpec::new(Snr::Db(0.5), 0).is_err());
        let t = clean(10);
        let noisy = add_noise(&t, &NoiseSpec::new(Snr::Db(30.0), 0).unwrap()).unwrap();
        assert!(add_noise(&noisy, &NoiseSpec::new(Snr::Db(30.0), 0).unwrap()).is_err());
    }
}
