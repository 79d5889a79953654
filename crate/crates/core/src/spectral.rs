//! Spectrum of the discrete generator, closed-form mode residuals and
//! energy-norm resolvent estimates along the imaginary axis.
//!
//! Everything here works with `B = R A_h R^{-1}`, the generator written in
//! energy-orthonormal coordinates (see
//! [`SemiDiscreteSystem::energy_similar_generator`]). `B` has the spectrum
//! of `A_h`, and Euclidean norms of `B`-expressions are energy norms of the
//! corresponding `A_h`-expressions, so the resolvent norm is a plain
//! 2-norm of `(i lambda - B)^{-1}`.

use std::io::Write;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{SemiDiscreteSystem, StateVector};
use crate::dynamics::line_fit;
use crate::error::{Error, Result};
use crate::model::{BeamConfig, ClosedFormMode, DampingPattern};

/// Eigenvalues with `|Re| < TOL_AXIS_REL * max|lambda|` count as lying on
/// the imaginary axis.
pub const TOL_AXIS_REL: f64 = 1e-8;

/// Largest state dimension handed to the dense eigensolver.
pub const DENSE_CAP: usize = 4000;

/// Below this dimension a stalled inverse iteration falls back to a dense SVD.
pub const SVD_FALLBACK_DIM: usize = 1500;

/// Smallest singular values below `POLE_REL * |B|_F` are treated as exact
/// singularity of the shifted operator.
pub const POLE_REL: f64 = 1e-14;

const SUBSPACE: usize = 6;
const MAX_ITER: usize = 400;
const ITER_TOL: f64 = 1e-12;

pub const SWEEP_CAVEAT: &str = "discretization truncates the spectrum: observed resolvent exponents support \
ordering and finiteness statements only, not the asymptotic order";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub spectral_abscissa: f64,
    pub imaginary_axis_eigs: Vec<Complex64>,
    /// Absolute axis tolerance, `TOL_AXIS_REL * max_modulus`.
    pub tol_axis: f64,
    pub tol_axis_rel: f64,
    pub max_modulus: f64,
    pub config: BeamConfig,
    pub damping: DampingPattern,
    pub n_elements: usize,
}

impl SpectrumReport {
    /// Eigenvalue closest to `z`.
    pub fn nearest(&self, z: Complex64) -> Option<Complex64> {
        self.eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
    }

    pub fn has_axis_eigs(&self) -> bool {
        !self.imaginary_axis_eigs.is_empty()
    }

    /// Largest mismatch between an eigenvalue and the conjugate of its
    /// nearest partner, relative to `max_modulus`.
    pub fn conjugate_pairing_error(&self) -> f64 {
        let scale = self.max_modulus.max(1.0);
        self.eigenvalues
            .iter()
            .map(|z| self.nearest(z.conj()).map_or(f64::INFINITY, |w| (w - z.conj()).norm()))
            .fold(0.0, f64::max)
            / scale
    }

    /// CSV with header `re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "re,im")?;
        for z in &self.eigenvalues {
            writeln!(w, "{},{}", z.re, z.im)?;
        }
        Ok(())
    }
}

fn check_cap(sys: &SemiDiscreteSystem) -> Result<()> {
    let dim = sys.state_dim();
    if dim > DENSE_CAP {
        return Err(Error::TooLarge { dim, cap: DENSE_CAP });
    }
    Ok(())
}

/// All eigenvalues of the discrete generator, sorted by imaginary then real part.
pub fn full_spectrum(sys: &SemiDiscreteSystem) -> Result<SpectrumReport> {
    check_cap(sys)?;
    let b = sys.energy_similar_generator();
    let mut eigenvalues: Vec<Complex64> = b
        .eigenvalues()
        .map_err(|e| Error::Solver(format!("eigensolver did not converge: {e:?}")))?
        .into_iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eigenvalues.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    let max_modulus = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let spectral_abscissa = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tol_axis = TOL_AXIS_REL * max_modulus;
    let imaginary_axis_eigs = eigenvalues.iter().copied().filter(|z| z.re.abs() < tol_axis).collect();
    Ok(SpectrumReport {
        eigenvalues,
        spectral_abscissa,
        imaginary_axis_eigs,
        tol_axis,
        tol_axis_rel: TOL_AXIS_REL,
        max_modulus,
        config: *sys.config(),
        damping: *sys.damping(),
        n_elements: sys.mesh().n_elements,
    })
}

/// Relative energy-norm residual `|(i lambda - A_h) U| / |U|` of the
/// interpolated closed-form mode `U = (phi, i lambda phi)`.
///
/// The complex state is carried as real and imaginary parts
/// `X = (phi, 0)`, `Y = (0, lambda phi)`.
pub fn mode_residual(sys: &SemiDiscreteSystem, mode: &ClosedFormMode) -> Result<f64> {
    let phi = sys.interpolate_profiles(&mode.profiles);
    if phi.iter().all(|&x| x == 0.0) {
        return Err(Error::DegenerateMode);
    }
    let n = sys.n_q();
    let lambda = mode.lambda;
    let x = StateVector {
        q: phi.clone(),
        p: vec![0.0; n],
    };
    let y = StateVector {
        q: vec![0.0; n],
        p: phi.iter().map(|v| lambda * v).collect(),
    };
    let ax = sys.apply_generator(&x)?;
    let ay = sys.apply_generator(&y)?;
    // (i lambda - A)(X + iY) = (-lambda Y - A X) + i (lambda X - A Y)
    let re = y.scaled(-lambda).add_scaled(-1.0, &ax);
    let im = x.scaled(lambda).add_scaled(-1.0, &ay);
    let num = sys.energy_norm_sq(&re) + sys.energy_norm_sq(&im);
    let den = sys.energy_norm_sq(&x) + sys.energy_norm_sq(&y);
    Ok((num / den).sqrt())
}

/// How a resolvent value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    InverseIteration,
    DenseSvd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventValue {
    pub lambda: f64,
    pub norm: f64,
    pub method: NormMethod,
    pub iterations: usize,
}

/// Evaluates `|(i lambda - A_h)^{-1}|` in the energy norm for many shifts
/// against one cached energy-similar generator.
pub struct ResolventEvaluator {
    b: Mat<f64>,
    frob: f64,
    spectrum: Option<SpectrumReport>,
}

impl ResolventEvaluator {
    pub fn new(sys: &SemiDiscreteSystem) -> Result<Self> {
        check_cap(sys)?;
        let b = sys.energy_similar_generator();
        let frob = b.norm_l2();
        Ok(Self { b, frob, spectrum: None })
    }

    /// Enables the pole-proximity check against a computed spectrum.
    pub fn with_spectrum(mut self, spectrum: SpectrumReport) -> Self {
        self.spectrum = Some(spectrum);
        self
    }

    pub fn spectrum(&self) -> Option<&SpectrumReport> {
        self.spectrum.as_ref()
    }

    fn nearest_eig(&self, lambda: f64) -> Complex64 {
        let z = Complex64::new(0.0, lambda);
        self.spectrum
            .as_ref()
            .and_then(|s| s.nearest(z))
            .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
    }

    fn shifted(&self, lambda: f64) -> Mat<c64> {
        let n = self.b.nrows();
        Mat::from_fn(n, n, |i, j| {
            let d = if i == j { lambda } else { 0.0 };
            c64::new(-self.b[(i, j)], d)
        })
    }

    pub fn norm_at(&self, lambda: f64) -> Result<ResolventValue> {
        if !lambda.is_finite() {
            return Err(Error::validation("lambda", "must be finite"));
        }
        if let Some(spec) = &self.spectrum {
            let z = Complex64::new(0.0, lambda);
            if let Some(mu) = spec.nearest(z) {
                if (mu - z).norm() < spec.tol_axis {
                    return Err(Error::Pole { lambda, nearest: mu });
                }
            }
        }
        self.evaluate(lambda)
    }

    /// Resolvent norm without the spectrum-proximity check; only numerical
    /// singularity of the shifted operator is reported as a pole.
    pub fn evaluate(&self, lambda: f64) -> Result<ResolventValue> {
        let t = self.shifted(lambda);
        let lu = t.partial_piv_lu();
        let pole = || Error::Pole {
            lambda,
            nearest: self.nearest_eig(lambda),
        };
        let (sigma, method, iterations) = match inverse_iteration(&lu, t.nrows()) {
            Some((s, it)) => (s, NormMethod::InverseIteration, it),
            None if t.nrows() < SVD_FALLBACK_DIM => {
                let sv = t
                    .singular_values()
                    .map_err(|e| Error::Solver(format!("dense SVD failed: {e:?}")))?;
                (*sv.last().unwrap_or(&0.0), NormMethod::DenseSvd, MAX_ITER)
            }
            None => {
                return Err(Error::Solver(format!(
                    "inverse iteration for the smallest singular value did not converge at lambda = {lambda}"
                )))
            }
        };
        if !(sigma.is_finite()) || sigma <= POLE_REL * self.frob {
            return Err(pole());
        }
        Ok(ResolventValue {
            lambda,
            norm: 1.0 / sigma,
            method,
            iterations,
        })
    }

    /// Smallest singular value of `i lambda - B` from a dense SVD; the
    /// reference the iterative path is checked against.
    pub fn dense_sigma_min(&self, lambda: f64) -> Result<f64> {
        let sv = self
            .shifted(lambda)
            .singular_values()
            .map_err(|e| Error::Solver(format!("dense SVD failed: {e:?}")))?;
        Ok(*sv.last().unwrap_or(&0.0))
    }
}

fn orthonormalize(v: &mut Mat<c64>) {
    let k = v.ncols();
    for _ in 0..2 {
        for j in 0..k {
            for i in 0..j {
                let (vi, vj) = (v.col(i).to_owned(), v.col(j).to_owned());
                let proj: c64 = vi.iter().zip(vj.iter()).map(|(a, b)| a.conj() * b).sum();
                for r in 0..v.nrows() {
                    let a = v[(r, i)];
                    v[(r, j)] -= proj * a;
                }
            }
            let norm = v.col(j).norm_l2();
            if norm > 0.0 {
                for r in 0..v.nrows() {
                    v[(r, j)] /= c64::new(norm, 0.0);
                }
            }
        }
    }
}

/// Block inverse iteration on `T^{-1} T^{-H}` with Rayleigh–Ritz; returns
/// the smallest singular value of `T` and the iteration count.
fn inverse_iteration(lu: &PartialPivLu<c64>, n: usize) -> Option<(f64, usize)> {
    let k = SUBSPACE.min(n);
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut v = Mat::from_fn(n, k, |_, _| c64::new(next(), next()));
    orthonormalize(&mut v);
    let mut prev = 0.0;
    for it in 1..=MAX_ITER {
        let mut w = v.clone();
        lu.solve_adjoint_in_place(&mut w);
        lu.solve_in_place(&mut w);
        if w.col_iter().any(|c| !c.norm_l2().is_finite()) {
            return Some((0.0, it));
        }
        let h = v.adjoint() * &w;
        let hs = Mat::from_fn(k, k, |i, j| (h[(i, j)] + h[(j, i)].conj()) * c64::new(0.5, 0.0));
        let theta = hs.self_adjoint_eigenvalues(Side::Lower).ok()?.last().copied()?;
        if !(theta.is_finite() && theta > 0.0) {
            return Some((0.0, it));
        }
        if it > 1 && (theta - prev).abs() <= ITER_TOL * theta {
            return Some((1.0 / theta.sqrt(), it));
        }
        prev = theta;
        v = w;
        orthonormalize(&mut v);
    }
    None
}

/// Energy-norm resolvent `|(i lambda - A_h)^{-1}|` at one shift.
pub fn resolvent_norm(sys: &SemiDiscreteSystem, lambda: f64) -> Result<f64> {
    Ok(ResolventEvaluator::new(sys)?.norm_at(lambda)?.norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

impl std::str::FromStr for Spacing {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            other => Err(Error::validation("spacing", format!("expected linear|log, got `{other}`"))),
        }
    }
}

pub fn grid(lambda_min: f64, lambda_max: f64, n_points: usize, spacing: Spacing) -> Vec<f64> {
    let last = (n_points - 1) as f64;
    (0..n_points)
        .map(|i| {
            let s = i as f64 / last;
            match spacing {
                Spacing::Linear => lambda_min + s * (lambda_max - lambda_min),
                Spacing::Log => (lambda_min.ln() + s * (lambda_max.ln() - lambda_min.ln())).exp(),
            }
        })
        .collect()
}

/// Pointwise resolvent norms on a grid, plus the running supremum
/// `M(lambda) = sup_{s <= lambda} |R(is)|` whose log-log slope is the
/// reported exponent.
///
/// Between grid points the norm peaks near `Im mu` of each eigenvalue `mu`,
/// so `M` is formed from the grid values together with evaluations at those
/// peak shifts. Raw grid values depend mostly on how close a grid point
/// happens to fall to a pole; their slope is kept as `pointwise_exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventSweep {
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub methods: Vec<NormMethod>,
    /// Running supremum at each grid point.
    pub envelope: Vec<f64>,
    pub peak_lambdas: Vec<f64>,
    pub peak_norms: Vec<f64>,
    pub spacing: Spacing,
    /// Central fit band `[2 lambda_min, lambda_max / 2]`.
    pub band: (f64, f64),
    pub fitted_exponent: f64,
    pub fit_intercept: f64,
    pub r2: f64,
    pub pointwise_exponent: f64,
    pub pointwise_r2: f64,
    pub band_points: usize,
    pub tol_axis: f64,
    /// Distance from the closest grid shift to the spectrum.
    pub min_pole_distance: f64,
    pub axis_eigs_in_range: usize,
    pub caveat: String,
}

impl ResolventSweep {
    /// CSV with header `lambda,norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,norm")?;
        for (l, n) in self.lambdas.iter().zip(&self.norms) {
            writeln!(w, "{l},{n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub spacing: Spacing,
    /// Worker threads for independent grid points; `None` uses rayon's default.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            spacing: Spacing::Log,
            threads: None,
        }
    }
}

pub fn resolvent_sweep(
    sys: &SemiDiscreteSystem,
    lambda_min: f64,
    lambda_max: f64,
    n_points: usize,
    spacing: Spacing,
) -> Result<ResolventSweep> {
    let spectrum = full_spectrum(sys)?;
    resolvent_sweep_with(
        sys,
        spectrum,
        lambda_min,
        lambda_max,
        n_points,
        SweepOptions { spacing, threads: None },
    )
}

/// Sweep against an already computed spectrum. Any grid point within
/// `tol_axis` of an eigenvalue aborts with a pole error naming it.
pub fn resolvent_sweep_with(
    sys: &SemiDiscreteSystem,
    spectrum: SpectrumReport,
    lambda_min: f64,
    lambda_max: f64,
    n_points: usize,
    opts: SweepOptions,
) -> Result<ResolventSweep> {
    if !(lambda_min > 0.0 && lambda_max > lambda_min && lambda_max.is_finite()) {
        return Err(Error::validation(
            "lambda_min",
            format!("need 0 < lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"),
        ));
    }
    if n_points < 8 {
        return Err(Error::validation("n_points", format!("need at least 8 points, got {n_points}")));
    }
    let lambdas = grid(lambda_min, lambda_max, n_points, opts.spacing);
    let tol_axis = spectrum.tol_axis;
    let min_pole_distance = lambdas
        .iter()
        .filter_map(|&l| spectrum.nearest(Complex64::new(0.0, l)).map(|mu| (mu - Complex64::new(0.0, l)).norm()))
        .fold(f64::INFINITY, f64::min);
    let axis_eigs_in_range = spectrum
        .imaginary_axis_eigs
        .iter()
        .filter(|z| z.im >= lambda_min && z.im <= lambda_max)
        .count();
    let band = (2.0 * lambda_min, 0.5 * lambda_max);
    let mut peak_lambdas: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|z| z.im)
        .filter(|&im| im >= lambda_min && im <= band.1)
        .collect();
    peak_lambdas.sort_by(f64::total_cmp);
    peak_lambdas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let eval = ResolventEvaluator::new(sys)?.with_spectrum(spectrum);

    let run = || -> (Vec<Result<ResolventValue>>, Vec<Result<ResolventValue>>) {
        let grid_vals = lambdas.par_iter().map(|&l| eval.norm_at(l)).collect();
        let peak_vals = peak_lambdas.par_iter().map(|&l| eval.evaluate(l)).collect();
        (grid_vals, peak_vals)
    };
    let (grid_vals, peak_vals) = match opts.threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Solver(format!("thread pool: {e}")))?
            .install(run),
        _ => run(),
    };
    let mut norms = Vec::with_capacity(n_points);
    let mut methods = Vec::with_capacity(n_points);
    for r in grid_vals {
        let v = r?;
        norms.push(v.norm);
        methods.push(v.method);
    }
    let peak_norms = peak_vals.into_iter().map(|r| r.map(|v| v.norm)).collect::<Result<Vec<_>>>()?;

    let mut samples: Vec<(f64, f64)> = lambdas.iter().copied().zip(norms.iter().copied()).collect();
    samples.extend(peak_lambdas.iter().copied().zip(peak_norms.iter().copied()));
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let envelope: Vec<f64> = lambdas
        .iter()
        .map(|&l| samples.iter().take_while(|(s, _)| *s <= l).map(|(_, n)| *n).fold(0.0, f64::max))
        .collect();

    let fit = |values: &[f64]| {
        let (xs, ys): (Vec<f64>, Vec<f64>) = lambdas
            .iter()
            .zip(values)
            .filter(|(l, _)| **l >= band.0 && **l <= band.1)
            .map(|(l, n)| (l.ln(), n.ln()))
            .unzip();
        let n = xs.len();
        let (a, b, r2) = if n >= 2 { line_fit(&xs, &ys) } else { (f64::NAN, f64::NAN, f64::NAN) };
        (a, b, r2, n)
    };
    let (fit_intercept, fitted_exponent, r2, band_points) = fit(&envelope);
    let (_, pointwise_exponent, pointwise_r2, _) = fit(&norms);
    Ok(ResolventSweep {
        lambdas,
        norms,
        methods,
        envelope,
        peak_lambdas,
        peak_norms,
        spacing: opts.spacing,
        band,
        fitted_exponent,
        fit_intercept,
        r2,
        pointwise_exponent,
        pointwise_r2,
        band_points,
        tol_axis,
        min_pole_distance,
        axis_eigs_in_range,
        caveat: SWEEP_CAVEAT.to_string(),
    })
}
