//! Shared fixtures and an independent energy oracle.
//!
//! The oracle rebuilds every field from its coefficients with its own
//! basis functions and integrates the energy density with 5-point Gauss
//! quadrature, so it shares nothing with the assembled matrices.

#![allow(dead_code)]

use beamlab_core::discretization::{Field, SemiDiscreteSystem, StateVector};
use beamlab_core::model::{BeamConfig, Damper, DampingPattern, LayerParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Value, first and second derivative of a field at `x` in element `e`.
pub fn eval_field(sys: &SemiDiscreteSystem, coeffs: &[f64], field: Field, e: usize, x: f64) -> (f64, f64, f64) {
    let n = sys.layout().n_elements;
    let h = sys.config().length() / n as f64;
    let off = sys.layout().offset(field);
    let s = (x - e as f64 * h) / h;
    if field == Field::Omega {
        let get = |node: usize, k: usize| {
            if node == 0 || node == n {
                0.0
            } else {
                coeffs[off + 2 * (node - 1) + k]
            }
        };
        let (v0, d0, v1, d1) = (get(e, 0), get(e, 1), get(e + 1, 0), get(e + 1, 1));
        let b = [1.0 - 3.0 * s * s + 2.0 * s * s * s, h * (s - 2.0 * s * s + s * s * s), 3.0 * s * s - 2.0 * s * s * s, h * (s * s * s - s * s)];
        let db = [(-6.0 * s + 6.0 * s * s) / h, 1.0 - 4.0 * s + 3.0 * s * s, (6.0 * s - 6.0 * s * s) / h, 3.0 * s * s - 2.0 * s];
        let ddb = [(-6.0 + 12.0 * s) / (h * h), (-4.0 + 6.0 * s) / h, (6.0 - 12.0 * s) / (h * h), (6.0 * s - 2.0) / h];
        let c = [v0, d0, v1, d1];
        let dot = |w: [f64; 4]| w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        (dot(b), dot(db), dot(ddb))
    } else {
        let get = |g: usize| if g == 0 || g == 2 * n { 0.0 } else { coeffs[off + g - 1] };
        let c = [get(2 * e), get(2 * e + 1), get(2 * e + 2)];
        let b = [2.0 * (s - 0.5) * (s - 1.0), -4.0 * s * (s - 1.0), 2.0 * s * (s - 0.5)];
        let db = [(4.0 * s - 3.0) / h, (4.0 - 8.0 * s) / h, (4.0 * s - 1.0) / h];
        let ddb = [4.0 / (h * h), -8.0 / (h * h), 4.0 / (h * h)];
        let dot = |w: [f64; 3]| w.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        (dot(b), dot(db), dot(ddb))
    }
}

/// Energy of a state by direct quadrature of the continuous integrand.
pub fn oracle_energy(sys: &SemiDiscreteSystem, u: &StateVector) -> f64 {
    let cfg = sys.config();
    let (t, b) = (cfg.top(), cfg.bottom());
    let n = sys.layout().n_elements;
    let h = cfg.length() / n as f64;
    let mut total = 0.0;
    for e in 0..n {
        for (xi, w) in GAUSS5 {
            let x = e as f64 * h + 0.5 * h * (1.0 + xi);
            let q = |f| eval_field(sys, &u.q, f, e, x);
            let p = |f| eval_field(sys, &u.p, f, e, x).0;
            let (u1, u1x, _) = q(Field::U1);
            let (y1, y1x, _) = q(Field::Y1);
            let (_, wx, wxx) = q(Field::Omega);
            let (u3, u3x, _) = q(Field::U3);
            let (y3, y3x, _) = q(Field::Y3);
            let tau = -u1 + u3 + cfg.h2() * wx - 0.5 * t.thickness * y1 - 0.5 * b.thickness * y3;
            let density = t.rho * t.thickness * p(Field::U1).powi(2)
                + t.young * t.thickness * u1x * u1x
                + b.rho * b.thickness * p(Field::U3).powi(2)
                + b.young * b.thickness * u3x * u3x
                + cfg.rho_h() * p(Field::Omega).powi(2)
                + cfg.ei_total() * wxx * wxx
                + t.rho * t.inertia * p(Field::Y1).powi(2)
                + t.young * t.inertia * y1x * y1x
                + b.rho * b.inertia * p(Field::Y3).powi(2)
                + b.young * b.inertia * y3x * y3x
                + t.shear * t.thickness * (wx + y1).powi(2)
                + tau * tau
                + b.shear * b.thickness * (wx + y3).powi(2);
            total += 0.5 * w * 0.5 * h * density;
        }
    }
    total
}

/// Squared L2 norm of one velocity field by quadrature.
pub fn oracle_velocity_sq(sys: &SemiDiscreteSystem, p: &[f64], field: Field) -> f64 {
    let n = sys.layout().n_elements;
    let h = sys.config().length() / n as f64;
    let mut s = 0.0;
    for e in 0..n {
        for (xi, w) in GAUSS5 {
            let x = e as f64 * h + 0.5 * h * (1.0 + xi);
            s += w * 0.5 * h * eval_field(sys, p, field, e, x).0.powi(2);
        }
    }
    s
}

pub fn random_layer<R: Rng>(r: &mut R) -> LayerParams {
    let mut v = || r.random_range(0.5..2.0);
    LayerParams::new(v(), v(), v(), v() * 0.1, v() * 0.3).unwrap()
}

pub fn random_config<R: Rng>(r: &mut R) -> BeamConfig {
    let top = random_layer(r);
    let bottom = random_layer(r);
    BeamConfig::new(top, bottom, r.random_range(0.5..2.0), r.random_range(0.2..1.0), r.random_range(1.0..4.0)).unwrap()
}

pub const DAMPERS: [Damper; 5] = [Damper::A, Damper::B, Damper::C, Damper::D, Damper::E];

pub fn random_two_damper<R: Rng>(r: &mut R) -> DampingPattern {
    let i = r.random_range(0..5);
    let mut j = r.random_range(0..4);
    if j >= i {
        j += 1;
    }
    let mut d = DampingPattern::none();
    d.set(DAMPERS[i], r.random_range(0.1..3.0));
    d.set(DAMPERS[j], r.random_range(0.1..3.0));
    d
}

pub fn random_state<R: Rng>(r: &mut R, n_q: usize) -> StateVector {
    let mut v = || -> Vec<f64> { (0..n_q).map(|_| r.random_range(-1.0..1.0)).collect() };
    StateVector { q: v(), p: v() }
}

pub fn default_config() -> BeamConfig {
    BeamConfig::desk_default()
}

/// Default config with the bottom layer altered.
pub fn with_bottom(f: impl FnOnce(&mut LayerParams)) -> BeamConfig {
    let base = default_config();
    let mut b = *base.bottom();
    f(&mut b);
    base.with_bottom(b).unwrap()
}
