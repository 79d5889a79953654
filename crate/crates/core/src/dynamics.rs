//! Implicit-midpoint time stepping with an exact discrete energy balance,
//! energy traces and log-log decay fits.

use std::f64::consts::PI;
use std::io::Write;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{FieldFunctions, SemiDiscreteSystem, StateVector};
use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky};

/// Implicit midpoint stepper for a fixed `dt`.
///
/// In second-order form one step solves
/// `(M + dt/2 D + dt^2/4 K) p+ = M p - dt K q - dt/2 D p - dt^2/4 K p`
/// and sets `q+ = q + dt/2 (p + p+)`. The matrix on the left is SPD and is
/// factored once per `(system, dt)`.
pub struct MidpointStepper<'a> {
    sys: &'a SemiDiscreteSystem,
    dt: f64,
    factor: Cholesky,
}

/// Result of one step: the new state and `dt * p_mid^T D p_mid`.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: StateVector,
    pub dissipated: f64,
}

impl<'a> MidpointStepper<'a> {
    pub fn new(sys: &'a SemiDiscreteSystem, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::validation("dt", format!("must be finite and > 0, got {dt}")));
        }
        let n = sys.n_q();
        let (m, k, d) = (sys.mass(), sys.stiffness(), sys.damping_form());
        let lhs = Mat::from_fn(n, n, |i, j| m[(i, j)] + 0.5 * dt * d[(i, j)] + 0.25 * dt * dt * k[(i, j)]);
        let factor = Cholesky::new(&lhs, "midpoint step matrix")?;
        Ok(Self { sys, dt, factor })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, u: &StateVector) -> Result<StepOutcome> {
        self.sys.check_dim(u)?;
        let dt = self.dt;
        let (m, k, d) = (self.sys.mass(), self.sys.stiffness(), self.sys.damping_form());
        let mut rhs = linalg::matvec(m, &u.p);
        let kq = linalg::matvec(k, &u.q);
        let kp = linalg::matvec(k, &u.p);
        let dp = linalg::matvec(d, &u.p);
        linalg::axpy(-dt, &kq, &mut rhs);
        linalg::axpy(-0.5 * dt, &dp, &mut rhs);
        linalg::axpy(-0.25 * dt * dt, &kp, &mut rhs);
        let p_new = self.factor.solve(&rhs);
        if p_new.iter().any(|x| !x.is_finite()) {
            return Err(Error::Solver(format!(
                "midpoint solve produced non-finite values (rhs norm {:e})",
                linalg::dot(&rhs, &rhs).sqrt()
            )));
        }
        let p_mid: Vec<f64> = u.p.iter().zip(&p_new).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut q_new = u.q.clone();
        linalg::axpy(dt, &p_mid, &mut q_new);
        let dissipated = dt * linalg::bilinear(d, &p_mid, &p_mid);
        Ok(StepOutcome {
            state: StateVector { q: q_new, p: p_new },
            dissipated,
        })
    }
}

/// One implicit midpoint step. Builds a fresh factorization; use
/// [`MidpointStepper`] for repeated steps.
pub fn step_implicit_midpoint(sys: &SemiDiscreteSystem, u: &StateVector, dt: f64) -> Result<StateVector> {
    Ok(MidpointStepper::new(sys, dt)?.step(u)?.state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Running sum of `dt * p_mid^T D p_mid`, starting at zero.
    pub dissipation_integral: Vec<f64>,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.energies[0]
    }

    pub fn final_energy(&self) -> f64 {
        *self.energies.last().expect("trace is never empty")
    }

    pub fn total_dissipation(&self) -> f64 {
        *self.dissipation_integral.last().expect("trace is never empty")
    }

    /// `|E(0) - E(T) - dissipated| / E(0)`.
    pub fn balance_residual(&self) -> f64 {
        let e0 = self.initial_energy();
        let r = (e0 - self.final_energy() - self.total_dissipation()).abs();
        if e0 > 0.0 {
            r / e0
        } else {
            r
        }
    }

    /// `|E(T) / E(0) - 1|`.
    pub fn relative_drift(&self) -> f64 {
        (self.final_energy() / self.initial_energy() - 1.0).abs()
    }

    /// Largest energy increase between consecutive samples.
    pub fn max_increase(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// CSV with header `t,energy,cumulative_dissipation`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,energy,cumulative_dissipation")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e}",
                self.times[i], self.energies[i], self.dissipation_integral[i]
            )?;
        }
        Ok(())
    }
}

/// Integrates from `u0` with a fixed step until `t_final`, recording every step.
pub fn simulate(sys: &SemiDiscreteSystem, u0: &StateVector, dt: f64, t_final: f64) -> Result<EnergyTrace> {
    sys.check_dim(u0)?;
    if !(t_final.is_finite() && t_final >= dt) {
        return Err(Error::validation("t_final", format!("must be >= dt ({dt}), got {t_final}")));
    }
    let stepper = MidpointStepper::new(sys, dt)?;
    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let mut trace = EnergyTrace {
        times: Vec::with_capacity(n_steps + 1),
        energies: Vec::with_capacity(n_steps + 1),
        dissipation_integral: Vec::with_capacity(n_steps + 1),
    };
    let mut u = u0.clone();
    let mut cumulative = 0.0;
    trace.times.push(0.0);
    trace.energies.push(sys.energy(&u)?);
    trace.dissipation_integral.push(0.0);
    for k in 1..=n_steps {
        let out = stepper.step(&u)?;
        u = out.state;
        cumulative += out.dissipated;
        trace.times.push(k as f64 * dt);
        trace.energies.push(sys.energy(&u)?);
        trace.dissipation_integral.push(cumulative);
    }
    Ok(trace)
}

/// Least-squares fit `E(t) ~ c t^(-alpha)` on a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub alpha: f64,
    pub c: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Exploratory fit window: 5% to 60% of the run.
pub fn default_window(t_final: f64) -> (f64, f64) {
    (0.05 * t_final, 0.6 * t_final)
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, r2)`.
pub(crate) fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (intercept, slope, r2)
}

pub fn fit_decay(trace: &EnergyTrace, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Fit(format!("window ({lo}, {hi}) must satisfy 0 < t_lo < t_hi")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in trace.times.iter().zip(&trace.energies) {
        if t < lo || t > hi {
            continue;
        }
        if e.is_nan() || e <= 0.0 {
            return Err(Error::Fit(format!("non-positive energy {e} at t = {t}")));
        }
        xs.push(t.ln());
        ys.push(e.ln());
    }
    if xs.len() < 10 {
        return Err(Error::Fit(format!("only {} samples in window, need 10", xs.len())));
    }
    let (a, b, r2) = line_fit(&xs, &ys);
    Ok(DecayFit {
        window,
        alpha: -b,
        c: a.exp(),
        r2,
        samples: xs.len(),
    })
}

/// Deterministic smooth initial state: every field gets a random
/// combination of its lowest `smoothness` modes (sines for the Dirichlet
/// fields, `sin(pi x/L) sin(m pi x/L)` for the clamped transverse field),
/// with coefficients of size `1/m^2`, in both positions and velocities.
pub fn random_initial(sys: &SemiDiscreteSystem, seed: u64, smoothness: u32) -> Result<StateVector> {
    if smoothness == 0 {
        return Err(Error::validation("smoothness", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = sys.config().length();
    let mut draw = |_: usize| -> Vec<f64> {
        (1..=smoothness)
            .map(|m| {
                let mag: f64 = rng.random_range(0.5..1.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * mag / (m as f64 * m as f64)
            })
            .collect()
    };
    let mut positions_and_velocities = Vec::with_capacity(2);
    for _ in 0..2 {
        let coeffs: Vec<Vec<f64>> = (0..5).map(&mut draw).collect();
        let sine_sum = |c: &[f64], x: f64| -> f64 {
            c.iter()
                .enumerate()
                .map(|(i, a)| a * ((i + 1) as f64 * PI * x / l).sin())
                .sum()
        };
        let clamped = |c: &[f64], x: f64| -> f64 { (PI * x / l).sin() * sine_sum(c, x) };
        let clamped_dx = |c: &[f64], x: f64| -> f64 {
            let s: f64 = c
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let k = (i + 1) as f64 * PI / l;
                    a * k * (k * x).cos()
                })
                .sum();
            (PI / l) * (PI * x / l).cos() * sine_sum(c, x) + (PI * x / l).sin() * s
        };
        let u1 = |x| sine_sum(&coeffs[0], x);
        let y1 = |x| sine_sum(&coeffs[1], x);
        let w = |x| clamped(&coeffs[2], x);
        let wx = |x| clamped_dx(&coeffs[2], x);
        let u3 = |x| sine_sum(&coeffs[3], x);
        let y3 = |x| sine_sum(&coeffs[4], x);
        positions_and_velocities.push(sys.interpolate_positions(&FieldFunctions {
            u1: Some(&u1),
            y1: Some(&y1),
            omega: Some((&w, &wx)),
            u3: Some(&u3),
            y3: Some(&y3),
        }));
    }
    let p = positions_and_velocities.pop().expect("two blocks");
    let q = positions_and_velocities.pop().expect("two blocks");
    Ok(StateVector { q, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BeamConfig, Damper, DampingPattern};

    fn synthetic(f: impl Fn(f64) -> f64) -> EnergyTrace {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let energies = times.iter().map(|&t| f(t)).collect();
        EnergyTrace {
            dissipation_integral: vec![0.0; times.len()],
            times,
            energies,
        }
    }

    #[test]
    fn exact_power_laws() {
        let tr = synthetic(|t| t.powf(-2.0 / 3.0));
        let fit = fit_decay(&tr, (1.0, 9.0)).unwrap();
        assert!((fit.alpha - 2.0 / 3.0).abs() < 1e-10);

        let tr = synthetic(|t| 5.0 * t.powf(-0.4));
        let fit = fit_decay(&tr, (1.0, 9.0)).unwrap();
        assert!((fit.alpha - 0.4).abs() < 1e-10);
        assert!((fit.c - 5.0).abs() < 1e-9);

        let tr = synthetic(|_| 3.0);
        let fit = fit_decay(&tr, (1.0, 9.0)).unwrap();
        assert!(fit.alpha.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let tr = synthetic(|t| if t > 2.0 { 0.0 } else { 1.0 });
        assert!(matches!(fit_decay(&tr, (1.0, 9.0)), Err(Error::Fit(_))));
        let tr = synthetic(|_| 1.0);
        assert!(matches!(fit_decay(&tr, (1.0, 1.2)), Err(Error::Fit(_))));
    }

    #[test]
    fn zero_state_stays_zero() {
        let sys = SemiDiscreteSystem::new(&BeamConfig::desk_default(), &DampingPattern::with(&[Damper::A], 1.0), 4).unwrap();
        let z = StateVector::zeros(sys.n_q());
        assert!(step_implicit_midpoint(&sys, &z, 0.01).unwrap().is_zero());
        assert!(step_implicit_midpoint(&sys, &z, 0.0).is_err());
    }

    #[test]
    fn undamped_step_conserves_energy() {
        let sys = SemiDiscreteSystem::new(&BeamConfig::desk_default(), &DampingPattern::none(), 8).unwrap();
        let u = random_initial(&sys, 7, 3).unwrap();
        let v = step_implicit_midpoint(&sys, &u, 0.05).unwrap();
        let (e0, e1) = (sys.energy(&u).unwrap(), sys.energy(&v).unwrap());
        assert!((e1 / e0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_initial_is_reproducible() {
        let sys = SemiDiscreteSystem::new(&BeamConfig::desk_default(), &DampingPattern::none(), 8).unwrap();
        let a = random_initial(&sys, 42, 3).unwrap();
        let b = random_initial(&sys, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_initial(&sys, 43, 3).unwrap());
        for seed in 0..20 {
            let e = sys.energy(&random_initial(&sys, seed, 1).unwrap()).unwrap();
            assert!(e.is_finite() && e > 0.0);
        }
        assert!(random_initial(&sys, 1, 0).is_err());
    }

    #[test]
    fn smoothness_one_is_a_single_sine() {
        let cfg = BeamConfig::desk_default();
        let sys = SemiDiscreteSystem::new(&cfg, &DampingPattern::none(), 8).unwrap();
        let u = random_initial(&sys, 3, 1).unwrap();
        let r = sys.layout().range(crate::discretization::Field::U1);
        let block = &u.q[r];
        let amp = block[0] / (0.5 * sys.mesh().spacing() * PI / cfg.length()).sin();
        for (k, v) in block.iter().enumerate() {
            let x = (k + 1) as f64 * 0.5 * sys.mesh().spacing();
            assert!((v - amp * (PI * x / cfg.length()).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let tr = synthetic(|t| 1.0 / (1.0 + t));
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,energy,cumulative_dissipation"));
        let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row[0], 0.05);
        assert_eq!(row[1], 1.0 / 1.05);
    }
}
