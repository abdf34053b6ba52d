//! Dormand-Prince 5(4) with embedded error control. The benchmark systems
//! are autonomous, so the stage times are not needed.

use nalgebra::DMatrix;

use super::DynamicalSystem;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps_per_interval: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            max_steps_per_interval: 100_000,
        }
    }
}

/// Advances `y` from `t0` to `t1` in place. `h` carries the step-size guess
/// between calls.
pub fn integrate_interval<F>(
    f: &F,
    y: &mut [f64],
    t0: f64,
    t1: f64,
    h: &mut f64,
    opts: &Rk45Options,
) -> Result<()>
where
    F: Fn(&[f64], &mut [f64]),
{
    let m = y.len();
    let mut k = vec![vec![0.0; m]; 7];
    let mut stage = vec![0.0; m];
    let mut y_new = vec![0.0; m];
    let mut t = t0;
    f(y, &mut k[0]);
    let mut steps = 0;
    while t < t1 {
        let span = t1 - t;
        let last = *h >= span;
        let step = if last { span } else { *h };
        for s in 1..7 {
            for i in 0..m {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += step * A[s][j] * kj[i];
                }
                stage[i] = acc;
            }
            f(&stage, &mut k[s]);
            if s == 6 {
                y_new.copy_from_slice(&stage);
            }
        }
        let mut err_sq = 0.0;
        for i in 0..m {
            let e: f64 = (0..7).map(|s| E[s] * k[s][i]).sum::<f64>() * step;
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / sc).powi(2);
        }
        let err = (err_sq / m as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: "state became non-finite".into(),
            });
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + step };
            y.copy_from_slice(&y_new);
            // first-same-as-last
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).min(5.0)
            };
            if !last || grow < 1.0 {
                *h = step * grow.max(0.2);
            }
        } else {
            *h = step * (0.9 * err.powf(-0.2)).max(0.2);
        }
        if *h <= 1e-14 * t1.abs().max(1.0) {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("step size underflow (h = {:e})", *h),
            });
        }
        steps += 1;
        if steps > opts.max_steps_per_interval {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: "too many steps".into(),
            });
        }
    }
    Ok(())
}

/// Integrates `sys` from `ic` at `t = 0` and samples `n` points `dt` apart.
pub fn simulate(sys: &DynamicalSystem, ic: &[f64], dt: f64, n: usize) -> Result<Trajectory> {
    simulate_with(sys, ic, dt, n, &Rk45Options::default())
}

pub fn simulate_with(
    sys: &DynamicalSystem,
    ic: &[f64],
    dt: f64,
    n: usize,
    opts: &Rk45Options,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 2 samples, got {n}"
        )));
    }
    if ic.len() != sys.dim {
        return Err(Error::DimensionMismatch {
            expected: sys.dim,
            actual: ic.len(),
        });
    }
    if ic.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "initial condition is not finite".into(),
        ));
    }
    let m = sys.dim;
    let f = |x: &[f64], dx: &mut [f64]| sys.rhs(x, dx);
    let mut states = DMatrix::zeros(n, m);
    let mut y = ic.to_vec();
    let mut h = dt;
    for j in 0..m {
        states[(0, j)] = y[j];
    }
    for i in 1..n {
        let t0 = (i - 1) as f64 * dt;
        let t1 = i as f64 * dt;
        integrate_interval(&f, &mut y, t0, t1, &mut h, opts)?;
        for j in 0..m {
            states[(i, j)] = y[j];
        }
    }
    let times = (0..n).map(|i| i as f64 * dt).collect();
    Ok(Trajectory::new(times, states, dt, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::builtin_system;

    fn rk4_reference(
        sys: &DynamicalSystem,
        ic: &[f64],
        dt: f64,
        n: usize,
        sub: usize,
    ) -> Vec<Vec<f64>> {
        let h = dt / sub as f64;
        let m = ic.len();
        let mut y = ic.to_vec();
        let mut out = vec![y.clone()];
        let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + s * y).collect()
        };
        for _ in 1..n {
            for _ in 0..sub {
                let k1 = sys.eval(&y);
                let k2 = sys.eval(&add(&y, &k1, h / 2.0));
                let k3 = sys.eval(&add(&y, &k2, h / 2.0));
                let k4 = sys.eval(&add(&y, &k3, h));
                for i in 0..m {
                    y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            out.push(y.clone());
        }
        out
    }

    #[test]
    fn lorenz_matches_fine_rk4() {
        let sys = builtin_system("lorenz").unwrap();
        let traj = simulate(&sys, &[1.0, 1.0, 1.0], 0.001, 1000).unwrap();
        let reference = rk4_reference(&sys, &[1.0, 1.0, 1.0], 0.001, 1000, 100);
        let mut worst: f64 = 0.0;
        for (i, row) in reference.iter().enumerate() {
            for j in 0..3 {
                worst = worst.max((traj.states[(i, j)] - row[j]).abs());
            }
        }
        assert!(worst < 1e-6, "max abs error {worst}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        let sys = DynamicalSystem::lorenz(0.0, 0.0, 0.0);
        let traj = simulate(&sys, &[3.0, 0.0, 0.0], 0.01, 50).unwrap();
        for i in 0..50 {
            assert_eq!(traj.states[(i, 0)], 3.0);
            assert_eq!(traj.states[(i, 1)], 0.0);
        }
    }

    #[test]
    fn two_samples() {
        let sys = builtin_system("rossler").unwrap();
        let traj = simulate(&sys, &[1.0, 2.0, 3.0], 0.01, 2).unwrap();
        assert_eq!(traj.states.nrows(), 2);
        assert_eq!(traj.times, vec![0.0, 0.01]);
    }

    #[test]
    fn divergence_is_an_error() {
        // dx/dt = x^2 blows up at t = 1 from x(0) = 1
        let sys = DynamicalSystem {
            name: "blowup".into(),
            dim: 1,
            params: vec![],
            equations: vec![vec![(crate::library::TermDescriptor::power(1, 0, 2), 1.0)]],
            ic_ranges: vec![(0.0, 1.0)],
            default_dt: 0.01,
        };
        assert!(matches!(
            simulate(&sys, &[1.0], 0.01, 200),
            Err(Error::IntegrationFailure { .. })
        ));
    }

    #[test]
    fn bad_arguments() {
        let sys = builtin_system("lorenz").unwrap();
        assert!(simulate(&sys, &[1.0, 1.0], 0.01, 10).is_err());
        assert!(simulate(&sys, &[1.0, 1.0, 1.0], 0.0, 10).is_err());
        assert!(simulate(&sys, &[1.0, 1.0, 1.0], 0.01, 1).is_err());
    }
}
