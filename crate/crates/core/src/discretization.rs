//! Conforming finite element semi-discretization.
//!
//! The four fields under Dirichlet conditions (`u1`, `y1`, `u3`, `y3`) use
//! continuous quadratic Lagrange elements; the transverse displacement `w`
//! uses cubic Hermite elements so that `w_xx` is square integrable. Boundary
//! values are removed from the unknowns, so every stored coefficient is a
//! free degree of freedom.
//!
//! Position coefficients are ordered in field blocks `u1, y1, w, u3, y3`,
//! velocities in the matching blocks `v1, z1, psi, v3, z3`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky};
use crate::model::{BeamConfig, Damper, DampingPattern, FieldProfiles};

/// Four-point Gauss–Legendre rule on `[0, 1]` as `(point, weight)`.
pub const GAUSS4: [(f64, f64); 4] = [
    (0.5 - 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
    (0.5 - 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.339_981_043_584_856_3, 0.5 * 0.652_145_154_862_546_1),
    (0.5 + 0.5 * 0.861_136_311_594_052_6, 0.5 * 0.347_854_845_137_453_9),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    pub length: f64,
    pub n_elements: usize,
    pub nodes: Vec<f64>,
}

impl Mesh1D {
    pub fn spacing(&self) -> f64 {
        self.length / self.n_elements as f64
    }
}

pub fn build_mesh(length: f64, n_elements: usize) -> Result<Mesh1D> {
    if n_elements < 2 {
        return Err(Error::validation("n_elements", format!("need at least 2 elements, got {n_elements}")));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::validation("L", format!("must be finite and > 0, got {length}")));
    }
    let h = length / n_elements as f64;
    let mut nodes: Vec<f64> = (0..=n_elements).map(|i| i as f64 * h).collect();
    nodes[n_elements] = length;
    Ok(Mesh1D {
        length,
        n_elements,
        nodes,
    })
}

/// Position fields in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    U1,
    Y1,
    Omega,
    U3,
    Y3,
}

impl Field {
    pub const ALL: [Field; 5] = [Field::U1, Field::Y1, Field::Omega, Field::U3, Field::Y3];

    /// The damper acting on this field's velocity.
    pub fn damper(self) -> Damper {
        match self {
            Field::U1 => Damper::A,
            Field::Y1 => Damper::B,
            Field::Omega => Damper::C,
            Field::U3 => Damper::D,
            Field::Y3 => Damper::E,
        }
    }

    pub fn is_hermite(self) -> bool {
        self == Field::Omega
    }

    /// Slot range of this field inside the 16-entry element vector.
    fn local_slots(self) -> std::ops::Range<usize> {
        match self {
            Field::U1 => 0..3,
            Field::Y1 => 3..6,
            Field::Omega => 6..10,
            Field::U3 => 10..13,
            Field::Y3 => 13..16,
        }
    }
}

const LOCAL_DOFS: usize = 16;

/// Offsets of the field blocks inside a position vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofLayout {
    pub n_elements: usize,
}

impl DofLayout {
    pub fn new(n_elements: usize) -> Self {
        Self { n_elements }
    }

    pub fn count(&self, f: Field) -> usize {
        let n = self.n_elements;
        if f.is_hermite() {
            2 * (n - 1)
        } else {
            2 * n - 1
        }
    }

    pub fn offset(&self, f: Field) -> usize {
        Field::ALL.iter().take_while(|&&g| g != f).map(|&g| self.count(g)).sum()
    }

    pub fn range(&self, f: Field) -> std::ops::Range<usize> {
        let o = self.offset(f);
        o..o + self.count(f)
    }

    /// Number of position unknowns.
    pub fn n_q(&self) -> usize {
        Field::ALL.iter().map(|&f| self.count(f)).sum()
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_q()
    }

    /// Global position index of each element slot; `None` for eliminated
    /// boundary values.
    fn element_map(&self, e: usize) -> [Option<usize>; LOCAL_DOFS] {
        let n = self.n_elements;
        let mut map = [None; LOCAL_DOFS];
        for f in Field::ALL {
            let off = self.offset(f);
            let slots = f.local_slots();
            if f.is_hermite() {
                for (j, node) in [e, e + 1].into_iter().enumerate() {
                    if node >= 1 && node < n {
                        map[slots.start + 2 * j] = Some(off + 2 * (node - 1));
                        map[slots.start + 2 * j + 1] = Some(off + 2 * (node - 1) + 1);
                    }
                }
            } else {
                for j in 0..3 {
                    let g = 2 * e + j;
                    if g >= 1 && g < 2 * n {
                        map[slots.start + j] = Some(off + g - 1);
                    }
                }
            }
        }
        map
    }
}

/// Position and velocity coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl StateVector {
    pub fn zeros(n_q: usize) -> Self {
        Self {
            q: vec![0.0; n_q],
            p: vec![0.0; n_q],
        }
    }

    pub fn n_q(&self) -> usize {
        self.q.len()
    }

    /// `[q; p]` as one vector.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_vec(v: &[f64]) -> Self {
        let n = v.len() / 2;
        Self {
            q: v[..n].to_vec(),
            p: v[n..].to_vec(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            q: self.q.iter().map(|x| s * x).collect(),
            p: self.p.iter().map(|x| s * x).collect(),
        }
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &Self) -> Self {
        let mut out = self.clone();
        linalg::axpy(s, &other.q, &mut out.q);
        linalg::axpy(s, &other.p, &mut out.p);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.q.iter().chain(&self.p).all(|&x| x == 0.0)
    }
}

/// Per-field closed-form functions for interpolation. The transverse field
/// carries its value and slope because Hermite interpolation needs both.
pub type ScalarFn<'a> = &'a dyn Fn(f64) -> f64;

#[derive(Default)]
pub struct FieldFunctions<'a> {
    pub u1: Option<ScalarFn<'a>>,
    pub y1: Option<ScalarFn<'a>>,
    pub omega: Option<(ScalarFn<'a>, ScalarFn<'a>)>,
    pub u3: Option<ScalarFn<'a>>,
    pub y3: Option<ScalarFn<'a>>,
}

/// Quadratic Lagrange shape functions and x-derivatives at `xi` on an
/// element of width `h`.
pub(crate) fn lagrange2(xi: f64, h: f64) -> ([f64; 3], [f64; 3]) {
    let n = [(1.0 - xi) * (1.0 - 2.0 * xi), 4.0 * xi * (1.0 - xi), xi * (2.0 * xi - 1.0)];
    let d = [(4.0 * xi - 3.0) / h, (4.0 - 8.0 * xi) / h, (4.0 * xi - 1.0) / h];
    (n, d)
}

/// Cubic Hermite shape functions (value, first and second x-derivative),
/// ordered `(w_0, w'_0, w_1, w'_1)`.
pub(crate) fn hermite3(xi: f64, h: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let (x2, x3) = (xi * xi, xi * xi * xi);
    let n = [
        1.0 - 3.0 * x2 + 2.0 * x3,
        h * (xi - 2.0 * x2 + x3),
        3.0 * x2 - 2.0 * x3,
        h * (x3 - x2),
    ];
    let d = [
        (6.0 * x2 - 6.0 * xi) / h,
        1.0 - 4.0 * xi + 3.0 * x2,
        (6.0 * xi - 6.0 * x2) / h,
        3.0 * x2 - 2.0 * xi,
    ];
    let dd = [
        (12.0 * xi - 6.0) / (h * h),
        (6.0 * xi - 4.0) / h,
        (6.0 - 12.0 * xi) / (h * h),
        (6.0 * xi - 2.0) / h,
    ];
    (n, d, dd)
}

/// Element-local basis values: `val` and `dx` for every slot, `dxx` for
/// the Hermite slots (zero elsewhere).
struct LocalBasis {
    val: [f64; LOCAL_DOFS],
    dx: [f64; LOCAL_DOFS],
    dxx: [f64; LOCAL_DOFS],
}

impl LocalBasis {
    fn at(xi: f64, h: f64) -> Self {
        let mut b = LocalBasis {
            val: [0.0; LOCAL_DOFS],
            dx: [0.0; LOCAL_DOFS],
            dxx: [0.0; LOCAL_DOFS],
        };
        let (ln, ld) = lagrange2(xi, h);
        let (hn, hd, hdd) = hermite3(xi, h);
        for f in Field::ALL {
            let s = f.local_slots();
            if f.is_hermite() {
                b.val[s.clone()].copy_from_slice(&hn);
                b.dx[s.clone()].copy_from_slice(&hd);
                b.dxx[s].copy_from_slice(&hdd);
            } else {
                b.val[s.clone()].copy_from_slice(&ln);
                b.dx[s].copy_from_slice(&ld);
            }
        }
        b
    }

    /// Slot vector that is `src` restricted to field `f`.
    fn restrict(src: &[f64; LOCAL_DOFS], f: Field) -> [f64; LOCAL_DOFS] {
        let mut out = [0.0; LOCAL_DOFS];
        for i in f.local_slots() {
            out[i] = src[i];
        }
        out
    }
}

/// The eight strain measures of the potential energy, each as a weight and
/// a slot vector, at one quadrature point.
fn strains(b: &LocalBasis, cfg: &BeamConfig) -> [(f64, [f64; LOCAL_DOFS]); 8] {
    let (t, bt) = (cfg.top(), cfg.bottom());
    let r = LocalBasis::restrict;
    let ux1 = r(&b.dx, Field::U1);
    let ux3 = r(&b.dx, Field::U3);
    let wxx = r(&b.dxx, Field::Omega);
    let yx1 = r(&b.dx, Field::Y1);
    let yx3 = r(&b.dx, Field::Y3);
    let wx = r(&b.dx, Field::Omega);
    let y1 = r(&b.val, Field::Y1);
    let y3 = r(&b.val, Field::Y3);
    let u1 = r(&b.val, Field::U1);
    let u3 = r(&b.val, Field::U3);

    let mut shear1 = [0.0; LOCAL_DOFS];
    let mut shear3 = [0.0; LOCAL_DOFS];
    let mut tau = [0.0; LOCAL_DOFS];
    for i in 0..LOCAL_DOFS {
        shear1[i] = wx[i] + y1[i];
        shear3[i] = wx[i] + y3[i];
        tau[i] = -u1[i] + u3[i] + cfg.h2() * wx[i] - 0.5 * t.thickness * y1[i] - 0.5 * bt.thickness * y3[i];
    }
    [
        (t.young * t.thickness, ux1),
        (bt.young * bt.thickness, ux3),
        (cfg.ei_total(), wxx),
        (t.young * t.inertia, yx1),
        (bt.young * bt.inertia, yx3),
        (t.shear * t.thickness, shear1),
        (bt.shear * bt.thickness, shear3),
        (1.0, tau),
    ]
}

/// Inertia weight of each field in the kinetic energy.
pub fn inertia_weight(cfg: &BeamConfig, f: Field) -> f64 {
    let (t, b) = (cfg.top(), cfg.bottom());
    match f {
        Field::U1 => t.rho * t.thickness,
        Field::Y1 => t.rho * t.inertia,
        Field::Omega => cfg.rho_h(),
        Field::U3 => b.rho * b.thickness,
        Field::Y3 => b.rho * b.inertia,
    }
}

/// Assembled mass, stiffness and damping forms of the damped beam.
///
/// Immutable after assembly; the mass and stiffness Cholesky factors are
/// computed once here and reused by every solve.
#[derive(Debug)]
pub struct SemiDiscreteSystem {
    config: BeamConfig,
    damping: DampingPattern,
    mesh: Mesh1D,
    layout: DofLayout,
    mass: Mat<f64>,
    stiffness: Mat<f64>,
    damping_form: Mat<f64>,
    unit_mass: Mat<f64>,
    mass_chol: Cholesky,
    stiffness_chol: Cholesky,
}

pub fn assemble(config: &BeamConfig, damping: &DampingPattern, mesh: &Mesh1D) -> Result<SemiDiscreteSystem> {
    damping.validate()?;
    if (mesh.length - config.length()).abs() > 1e-12 * config.length() {
        return Err(Error::validation(
            "mesh.length",
            format!("mesh length {} differs from beam length {}", mesh.length, config.length()),
        ));
    }
    let layout = DofLayout::new(mesh.n_elements);
    let n = layout.n_q();
    let h = mesh.spacing();
    let mut mass = Mat::<f64>::zeros(n, n);
    let mut stiffness = Mat::<f64>::zeros(n, n);
    let mut damp = Mat::<f64>::zeros(n, n);
    let mut unit_mass = Mat::<f64>::zeros(n, n);

    for e in 0..mesh.n_elements {
        let map = layout.element_map(e);
        let mut ke = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
        let mut me = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
        let mut de = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
        let mut ue = [[0.0; LOCAL_DOFS]; LOCAL_DOFS];
        for &(xi, w) in &GAUSS4 {
            let b = LocalBasis::at(xi, h);
            let jw = w * h;
            for (c, s) in strains(&b, config) {
                let cw = c * jw;
                for i in 0..LOCAL_DOFS {
                    if s[i] == 0.0 {
                        continue;
                    }
                    for j in 0..LOCAL_DOFS {
                        ke[i][j] += cw * (s[i] * s[j]);
                    }
                }
            }
            for f in Field::ALL {
                let rho = inertia_weight(config, f);
                let coeff = damping.get(f.damper());
                for i in f.local_slots() {
                    for j in f.local_slots() {
                        let base = jw * (b.val[i] * b.val[j]);
                        ue[i][j] += base;
                        me[i][j] += rho * base;
                        de[i][j] += coeff * base;
                    }
                }
            }
        }
        for i in 0..LOCAL_DOFS {
            let Some(gi) = map[i] else { continue };
            for j in 0..LOCAL_DOFS {
                let Some(gj) = map[j] else { continue };
                stiffness[(gi, gj)] += ke[i][j];
                mass[(gi, gj)] += me[i][j];
                damp[(gi, gj)] += de[i][j];
                unit_mass[(gi, gj)] += ue[i][j];
            }
        }
    }

    let mass_chol = Cholesky::new(&mass, "mass matrix")?;
    let stiffness_chol = Cholesky::new(&stiffness, "stiffness matrix")?;
    Ok(SemiDiscreteSystem {
        config: *config,
        damping: *damping,
        mesh: mesh.clone(),
        layout,
        mass,
        stiffness,
        damping_form: damp,
        unit_mass,
        mass_chol,
        stiffness_chol,
    })
}

impl SemiDiscreteSystem {
    /// Convenience constructor on a uniform mesh of the beam's length.
    pub fn new(config: &BeamConfig, damping: &DampingPattern, n_elements: usize) -> Result<Self> {
        let mesh = build_mesh(config.length(), n_elements)?;
        assemble(config, damping, &mesh)
    }

    pub fn config(&self) -> &BeamConfig {
        &self.config
    }
    pub fn damping(&self) -> &DampingPattern {
        &self.damping
    }
    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }
    pub fn layout(&self) -> &DofLayout {
        &self.layout
    }
    pub fn mass(&self) -> &Mat<f64> {
        &self.mass
    }
    pub fn stiffness(&self) -> &Mat<f64> {
        &self.stiffness
    }
    pub fn damping_form(&self) -> &Mat<f64> {
        &self.damping_form
    }
    /// Unweighted L2 mass matrix, block diagonal over the fields.
    pub fn unit_mass(&self) -> &Mat<f64> {
        &self.unit_mass
    }
    pub fn mass_factor(&self) -> &Cholesky {
        &self.mass_chol
    }
    pub fn stiffness_factor(&self) -> &Cholesky {
        &self.stiffness_chol
    }
    pub fn n_q(&self) -> usize {
        self.layout.n_q()
    }
    pub fn state_dim(&self) -> usize {
        self.layout.state_dim()
    }

    pub(crate) fn check_dim(&self, u: &StateVector) -> Result<()> {
        let n = self.n_q();
        if u.q.len() != n || u.p.len() != n {
            return Err(Error::Dimension {
                expected: 2 * n,
                got: u.q.len() + u.p.len(),
            });
        }
        Ok(())
    }

    /// `A_h U = (p, -M^{-1}(K q + D p))`.
    pub fn apply_generator(&self, u: &StateVector) -> Result<StateVector> {
        self.check_dim(u)?;
        let mut rhs = linalg::matvec(&self.stiffness, &u.q);
        linalg::axpy(1.0, &linalg::matvec(&self.damping_form, &u.p), &mut rhs);
        let acc = self.mass_chol.solve(&rhs);
        Ok(StateVector {
            q: u.p.clone(),
            p: acc.into_iter().map(|x| -x).collect(),
        })
    }

    /// Solves `A_h U = F`.
    pub fn solve_generator(&self, f: &StateVector) -> Result<StateVector> {
        self.check_dim(f)?;
        let p = f.q.clone();
        let mut rhs = linalg::matvec(&self.mass, &f.p);
        linalg::axpy(1.0, &linalg::matvec(&self.damping_form, &p), &mut rhs);
        let q = self.stiffness_chol.solve(&rhs).into_iter().map(|x| -x).collect();
        Ok(StateVector { q, p })
    }

    /// Energy inner product `q^T K q' + p^T M p'`.
    pub fn energy_inner(&self, u: &StateVector, v: &StateVector) -> f64 {
        linalg::bilinear(&self.stiffness, &u.q, &v.q) + linalg::bilinear(&self.mass, &u.p, &v.p)
    }

    /// Squared energy norm, i.e. twice the energy.
    pub fn energy_norm_sq(&self, u: &StateVector) -> f64 {
        self.energy_inner(u, u)
    }

    /// `(p^T M p + q^T K q) / 2`.
    pub fn energy(&self, u: &StateVector) -> Result<f64> {
        self.check_dim(u)?;
        Ok(0.5 * self.energy_norm_sq(u))
    }

    /// `p^T D p`, the instantaneous rate of energy loss.
    pub fn dissipation_rate(&self, u: &StateVector) -> Result<f64> {
        self.check_dim(u)?;
        Ok(linalg::bilinear(&self.damping_form, &u.p, &u.p))
    }

    /// Energy Gram `blockdiag(K, M)` as a dense matrix.
    pub fn energy_gram(&self) -> Mat<f64> {
        let n = self.n_q();
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => self.stiffness[(i, j)],
            (false, false) => self.mass[(i - n, j - n)],
            _ => 0.0,
        })
    }

    /// Dense first-order generator `[[0, I], [-M^{-1}K, -M^{-1}D]]`.
    pub fn generator_matrix(&self) -> Mat<f64> {
        let n = self.n_q();
        let mk = self.mass_chol_solve_mat(&self.stiffness);
        let md = self.mass_chol_solve_mat(&self.damping_form);
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => 0.0,
            (true, false) => {
                if i == j - n {
                    1.0
                } else {
                    0.0
                }
            }
            (false, true) => -mk[(i - n, j)],
            (false, false) => -md[(i - n, j - n)],
        })
    }

    fn mass_chol_solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        let y = self.mass_chol.lower_solve_mat(b);
        let mut out = Mat::<f64>::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col: Vec<f64> = (0..b.nrows()).map(|i| y[(i, j)]).collect();
            let x = self.mass_chol.upper_solve(&col);
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Generator in energy-orthonormal coordinates, `R A_h R^{-1}` with
    /// `E_gram = R^T R`, `R = blockdiag(L_K^T, L_M^T)`:
    /// `[[0, C^T], [-C, -L_M^{-1} D L_M^{-T}]]`, `C = L_M^{-1} L_K`.
    ///
    /// Its spectrum equals that of `A_h`, its symmetric part is `-D`
    /// congruent and its 2-norm is the energy-norm of `A_h`.
    pub fn energy_similar_generator(&self) -> Mat<f64> {
        let n = self.n_q();
        let lk = self.stiffness_chol.factor().to_owned();
        let c = self.mass_chol.lower_solve_mat(&lk);
        let ld = self.mass_chol.lower_solve_mat(&self.damping_form);
        let ldt = ld.transpose().to_owned();
        let dsym = self.mass_chol.lower_solve_mat(&ldt);
        Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
            (true, true) => 0.0,
            (true, false) => c[(j - n, i)],
            (false, true) => -c[(i - n, j)],
            (false, false) => -0.5 * (dsym[(i - n, j - n)] + dsym[(j - n, i - n)]),
        })
    }

    /// `R U` for the energy factor `R`, so that `|R U|_2 = |U|_E`.
    pub fn to_energy_coords(&self, u: &StateVector) -> Vec<f64> {
        let mut v = self.stiffness_chol.upper_mul(&u.q);
        v.extend(self.mass_chol.upper_mul(&u.p));
        v
    }

    pub fn from_energy_coords(&self, v: &[f64]) -> StateVector {
        let n = self.n_q();
        StateVector {
            q: self.stiffness_chol.upper_solve(&v[..n]),
            p: self.mass_chol.upper_solve(&v[n..]),
        }
    }

    /// Position coefficients interpolating the given functions: nodal
    /// values (vertices and midpoints) for Lagrange fields, value and slope
    /// at interior vertices for the Hermite field.
    pub fn interpolate_positions(&self, f: &FieldFunctions<'_>) -> Vec<f64> {
        let mut q = vec![0.0; self.n_q()];
        let half = 0.5 * self.mesh.spacing();
        let lagrange = [(Field::U1, f.u1), (Field::Y1, f.y1), (Field::U3, f.u3), (Field::Y3, f.y3)];
        for (field, func) in lagrange {
            let Some(func) = func else { continue };
            let off = self.layout.offset(field);
            for k in 0..self.layout.count(field) {
                q[off + k] = func((k + 1) as f64 * half);
            }
        }
        if let Some((value, slope)) = f.omega {
            let off = self.layout.offset(Field::Omega);
            for node in 1..self.mesh.n_elements {
                let x = self.mesh.nodes[node];
                q[off + 2 * (node - 1)] = value(x);
                q[off + 2 * (node - 1) + 1] = slope(x);
            }
        }
        q
    }

    pub fn interpolate(&self, positions: &FieldFunctions<'_>, velocities: &FieldFunctions<'_>) -> StateVector {
        StateVector {
            q: self.interpolate_positions(positions),
            p: self.interpolate_positions(velocities),
        }
    }

    /// Interpolant of a set of sine profiles. Quadratic fields keep vertex
    /// values and preserve each element's integral (the midpoint coefficient
    /// absorbs the Simpson-rule mismatch); the beam field is Hermite-nodal.
    pub fn interpolate_profiles(&self, profiles: &FieldProfiles) -> Vec<f64> {
        let w = |x| profiles.omega.value(x);
        let wx = |x| profiles.omega.slope(x);
        let mut q = self.interpolate_positions(&FieldFunctions {
            omega: Some((&w, &wx)),
            ..Default::default()
        });
        let h = self.mesh.spacing();
        let nodes = &self.mesh.nodes;
        let lagrange = [
            (Field::U1, &profiles.u1),
            (Field::Y1, &profiles.y1),
            (Field::U3, &profiles.u3),
            (Field::Y3, &profiles.y3),
        ];
        for (field, prof) in lagrange {
            let off = self.layout.offset(field);
            for e in 0..self.mesh.n_elements {
                let (x0, x1) = (nodes[e], nodes[e + 1]);
                let f0 = if e == 0 { 0.0 } else { prof.value(x0) };
                let f1 = if e + 1 == self.mesh.n_elements { 0.0 } else { prof.value(x1) };
                q[off + 2 * e] = (6.0 * prof.integral(x0, x1) / h - f0 - f1) / 4.0;
                if e + 1 < self.mesh.n_elements {
                    q[off + 2 * e + 1] = f1;
                }
            }
        }
        q
    }

    /// Signed permutation relabelling layers 1 <-> 3 on position vectors:
    /// `(u1, y1, w, u3, y3) -> (-u3, y3, w, -u1, y1)`. It leaves the
    /// energy of layer-symmetric beams invariant.
    pub fn layer_swap(&self, q: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let mut out = vec![0.0; q.len()];
        let moves = [
            (Field::U3, Field::U1, -1.0),
            (Field::Y3, Field::Y1, 1.0),
            (Field::Omega, Field::Omega, 1.0),
            (Field::U1, Field::U3, -1.0),
            (Field::Y1, Field::Y3, 1.0),
        ];
        for (from, to, sign) in moves {
            for (i, j) in l.range(from).zip(l.range(to)) {
                out[j] = sign * q[i];
            }
        }
        out
    }
}
