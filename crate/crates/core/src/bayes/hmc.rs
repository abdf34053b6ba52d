//! Static-trajectory HMC with a dense Gaussian metric, jittered path length
//! and dual-averaging step-size adaptation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Energy error above which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

pub trait Target {
    fn dim(&self) -> usize;
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

impl Target for super::posterior::LinearPosterior {
    fn dim(&self) -> usize {
        super::posterior::LinearPosterior::dim(self)
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        super::posterior::LinearPosterior::log_density_grad(self, theta, grad)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HmcSettings {
    pub iters: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    /// Half-width of the uniform initialisation box in whitened coordinates.
    pub init_radius: f64,
}

/// Target seen through the affine map `theta = centre + L u`.
pub struct Whitened<'a, T: Target> {
    target: &'a T,
    centre: DVector<f64>,
    l: DMatrix<f64>,
}

impl<'a, T: Target> Whitened<'a, T> {
    pub fn new(target: &'a T, centre: DVector<f64>, l: DMatrix<f64>) -> Self {
        Self { target, centre, l }
    }

    pub fn identity(target: &'a T) -> Self {
        let d = target.dim();
        Self::new(target, DVector::zeros(d), DMatrix::identity(d, d))
    }

    pub fn to_theta(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.centre + &self.l * u
    }

    /// Log density and gradient with respect to `u`.
    pub fn eval(&self, u: &DVector<f64>, grad: &mut DVector<f64>) -> f64 {
        let theta = self.to_theta(u);
        let mut g = vec![0.0; theta.len()];
        let lp = self.target.log_density_grad(theta.as_slice(), &mut g);
        grad.copy_from(&(self.l.transpose() * DVector::from_vec(g)));
        lp
    }
}

/// State carried along a trajectory.
#[derive(Debug, Clone)]
pub struct Phase {
    pub u: DVector<f64>,
    pub p: DVector<f64>,
    pub lp: f64,
    pub grad: DVector<f64>,
}

impl Phase {
    pub fn hamiltonian(&self) -> f64 {
        -self.lp + 0.5 * self.p.norm_squared()
    }
}

/// `steps` leapfrog steps of size `eps`.
pub fn leapfrog<T: Target>(w: &Whitened<T>, start: &Phase, eps: f64, steps: usize) -> Phase {
    let mut s = start.clone();
    for _ in 0..steps {
        s.p.axpy(0.5 * eps, &s.grad, 1.0);
        s.u.axpy(eps, &s.p, 1.0);
        s.lp = w.eval(&s.u, &mut s.grad);
        s.p.axpy(0.5 * eps, &s.grad, 1.0);
        if !s.lp.is_finite() {
            break;
        }
    }
    s
}

struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_eps_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps0: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps_bar: 0.0,
            m: 0.0,
            target,
        }
    }

    fn update(&mut self, accept: f64) -> f64 {
        self.m += 1.0;
        let eta = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept);
        let log_eps = self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar;
        let w = self.m.powf(-Self::KAPPA);
        self.log_eps_bar = w * log_eps + (1.0 - w) * self.log_eps_bar;
        log_eps.exp()
    }

    fn final_eps(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

fn momentum(dim: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Doubles or halves a unit step until the one-step acceptance crosses 1/2.
fn initial_step<T: Target>(w: &Whitened<T>, start: &Phase, rng: &mut ChaCha8Rng) -> f64 {
    let mut eps = 1.0;
    let mut s = start.clone();
    s.p = momentum(start.u.len(), rng);
    let h0 = s.hamiltonian();
    let log_ratio = |eps: f64| {
        let e = h0 - leapfrog(w, &s, eps, 1).hamiltonian();
        if e.is_finite() {
            e
        } else {
            f64::NEG_INFINITY
        }
    };
    let up = log_ratio(eps) > 0.5f64.ln();
    for _ in 0..50 {
        let r = log_ratio(eps);
        if up != (r > 0.5f64.ln()) {
            break;
        }
        eps = if up { eps * 2.0 } else { eps / 2.0 };
    }
    eps
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Post-warmup draws in the original parameterisation, one row per iteration.
    pub draws: DMatrix<f64>,
    pub divergences: usize,
    pub step_size: f64,
    pub mean_accept: f64,
}

pub fn run_chain<T: Target>(
    w: &Whitened<T>,
    settings: &HmcSettings,
    rng: &mut ChaCha8Rng,
) -> ChainOutput {
    let d = w.target.dim();
    let r = settings.init_radius;
    let u0 = DVector::from_fn(d, |_, _| rng.random_range(-r..r));
    let mut grad = DVector::zeros(d);
    let lp = w.eval(&u0, &mut grad);
    let mut cur = Phase {
        u: u0,
        p: DVector::zeros(d),
        lp,
        grad,
    };
    let mut eps = initial_step(w, &cur, rng);
    let mut adapt = DualAveraging::new(eps, settings.target_accept);
    let kept = settings.iters - settings.warmup;
    let mut draws = DMatrix::zeros(kept, d);
    let mut divergences = 0;
    let mut accept_sum = 0.0;
    for it in 0..settings.iters {
        cur.p = momentum(d, rng);
        let h0 = cur.hamiltonian();
        let steps = rng.random_range(1..=settings.max_leapfrog);
        let prop = leapfrog(w, &cur, eps, steps);
        let h1 = prop.hamiltonian();
        let delta = h1 - h0;
        let divergent = !delta.is_finite() || delta > DIVERGENCE_THRESHOLD;
        let accept = if divergent {
            0.0
        } else {
            (-delta).exp().min(1.0)
        };
        if !divergent && rng.random::<f64>() < accept {
            cur = prop;
        }
        if it < settings.warmup {
            eps = adapt.update(accept);
            if it + 1 == settings.warmup {
                eps = adapt.final_eps();
            }
        } else {
            divergences += usize::from(divergent);
            accept_sum += accept;
            let theta = w.to_theta(&cur.u);
            draws.set_row(it - settings.warmup, &theta.transpose());
        }
    }
    ChainOutput {
        draws,
        divergences,
        step_size: eps,
        mean_accept: if kept > 0 {
            accept_sum / kept as f64
        } else {
            0.0
        },
    }
}
