//! Physical parameters of the five-field sandwich beam, the core shear
//! coupling, the damping-pattern stability table and the closed-form
//! undamped modes that witness instability.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the coefficient equalities the stability table
/// branches on (equal wave speeds, equal shear moduli, layer symmetry).
pub const EQ_REL_TOL: f64 = 1e-12;

/// Relative difference `|x - y| / max(|x|, |y|)`, zero when both vanish.
pub fn rel_diff(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

pub fn rel_eq(x: f64, y: f64) -> bool {
    rel_diff(x, y) <= EQ_REL_TOL
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
    }
}

/// Material and geometric data of one face layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerParams {
    pub rho: f64,
    #[serde(rename = "E")]
    pub young: f64,
    #[serde(rename = "G")]
    pub shear: f64,
    #[serde(rename = "I")]
    pub inertia: f64,
    #[serde(rename = "h")]
    pub thickness: f64,
}

impl LayerParams {
    pub fn new(rho: f64, young: f64, shear: f64, inertia: f64, thickness: f64) -> Result<Self> {
        let p = Self {
            rho,
            young,
            shear,
            inertia,
            thickness,
        };
        p.validate("layer")?;
        Ok(p)
    }

    /// All-ones layer.
    pub fn unit() -> Self {
        Self {
            rho: 1.0,
            young: 1.0,
            shear: 1.0,
            inertia: 1.0,
            thickness: 1.0,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        check_positive(&format!("{prefix}.rho"), self.rho)?;
        check_positive(&format!("{prefix}.E"), self.young)?;
        check_positive(&format!("{prefix}.G"), self.shear)?;
        check_positive(&format!("{prefix}.I"), self.inertia)?;
        check_positive(&format!("{prefix}.h"), self.thickness)
    }

    /// Squared axial wave speed `E / rho`.
    pub fn speed_sq(&self) -> f64 {
        self.young / self.rho
    }

    /// `G h / (rho I)`, the shear-angle frequency offset.
    pub fn shear_rate(&self) -> f64 {
        self.shear * self.thickness / (self.rho * self.inertia)
    }
}

/// Returns `(rho_h, EI)` for the three-layer stack.
pub fn derived_constants(
    top: &LayerParams,
    bottom: &LayerParams,
    rho2: f64,
    h2: f64,
) -> Result<(f64, f64)> {
    top.validate("top")?;
    bottom.validate("bottom")?;
    check_positive("rho2", rho2)?;
    check_positive("h2", h2)?;
    let rho_h = top.rho * top.thickness + rho2 * h2 + bottom.rho * bottom.thickness;
    let ei = top.young * top.inertia + bottom.young * bottom.inertia;
    Ok((rho_h, ei))
}

/// Raw, underived beam description as it appears in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamParams {
    #[serde(rename = "L")]
    pub length: f64,
    pub top: LayerParams,
    pub bottom: LayerParams,
    pub rho2: f64,
    pub h2: f64,
}

/// Validated beam with derived total density and flexural rigidity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeamRecord")]
pub struct BeamConfig {
    #[serde(rename = "L")]
    length: f64,
    top: LayerParams,
    bottom: LayerParams,
    rho2: f64,
    h2: f64,
    rho_h: f64,
    #[serde(rename = "EI")]
    ei_total: f64,
}

/// Serialized form of [`BeamConfig`]: the raw parameters plus, optionally,
/// the derived constants, which must then agree with the recomputed ones.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamRecord {
    #[serde(rename = "L")]
    length: f64,
    top: LayerParams,
    bottom: LayerParams,
    rho2: f64,
    h2: f64,
    #[serde(default)]
    rho_h: Option<f64>,
    #[serde(rename = "EI", default)]
    ei_total: Option<f64>,
}

impl TryFrom<BeamRecord> for BeamConfig {
    type Error = Error;

    fn try_from(r: BeamRecord) -> Result<Self> {
        let cfg = BeamConfig::new(r.top, r.bottom, r.rho2, r.h2, r.length)?;
        for (field, given, derived) in [("rho_h", r.rho_h, cfg.rho_h), ("EI", r.ei_total, cfg.ei_total)] {
            if let Some(v) = given {
                if !rel_eq(v, derived) {
                    return Err(Error::validation(field, format!("{v} disagrees with the derived value {derived}")));
                }
            }
        }
        Ok(cfg)
    }
}

impl TryFrom<BeamParams> for BeamConfig {
    type Error = Error;

    fn try_from(p: BeamParams) -> Result<Self> {
        BeamConfig::new(p.top, p.bottom, p.rho2, p.h2, p.length)
    }
}

impl BeamConfig {
    pub fn new(top: LayerParams, bottom: LayerParams, rho2: f64, h2: f64, length: f64) -> Result<Self> {
        check_positive("L", length)?;
        let (rho_h, ei_total) = derived_constants(&top, &bottom, rho2, h2)?;
        Ok(Self {
            length,
            top,
            bottom,
            rho2,
            h2,
            rho_h,
            ei_total,
        })
    }

    /// Dimensionless desk configuration: `L = pi`, both face layers all
    /// ones, core density 1 and thickness 0.5.
    pub fn desk_default() -> Self {
        Self::new(LayerParams::unit(), LayerParams::unit(), 1.0, 0.5, PI).expect("default config is valid")
    }

    pub fn params(&self) -> BeamParams {
        BeamParams {
            length: self.length,
            top: self.top,
            bottom: self.bottom,
            rho2: self.rho2,
            h2: self.h2,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn top(&self) -> &LayerParams {
        &self.top
    }
    pub fn bottom(&self) -> &LayerParams {
        &self.bottom
    }
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    pub fn h2(&self) -> f64 {
        self.h2
    }
    pub fn rho_h(&self) -> f64 {
        self.rho_h
    }
    pub fn ei_total(&self) -> f64 {
        self.ei_total
    }

    /// Returns a copy with the top layer replaced.
    pub fn with_top(&self, top: LayerParams) -> Result<Self> {
        Self::new(top, self.bottom, self.rho2, self.h2, self.length)
    }

    pub fn with_bottom(&self, bottom: LayerParams) -> Result<Self> {
        Self::new(self.top, bottom, self.rho2, self.h2, self.length)
    }

    /// The same beam with the face layers relabelled 1 <-> 3.
    pub fn swapped(&self) -> Self {
        Self::new(self.bottom, self.top, self.rho2, self.h2, self.length).expect("swap preserves validity")
    }

    pub fn equal_speeds(&self) -> bool {
        rel_eq(self.top.speed_sq(), self.bottom.speed_sq())
    }

    pub fn equal_shear(&self) -> bool {
        rel_eq(self.top.shear, self.bottom.shear)
    }

    pub fn equal_shear_rates(&self) -> bool {
        rel_eq(self.top.shear_rate(), self.bottom.shear_rate())
    }

    /// Face layers identical in every coefficient.
    pub fn layers_symmetric(&self) -> bool {
        let (t, b) = (&self.top, &self.bottom);
        rel_eq(t.young, b.young)
            && rel_eq(t.rho, b.rho)
            && rel_eq(t.shear, b.shear)
            && rel_eq(t.inertia, b.inertia)
            && rel_eq(t.thickness, b.thickness)
    }
}

/// Core shear stress `-u1 + u3 + h2 w_x - (h1/2) y1 - (h3/2) y3`.
pub fn shear_stress_tau(u1: f64, u3: f64, omega_x: f64, y1: f64, y3: f64, config: &BeamConfig) -> f64 {
    -u1 + u3 + config.h2 * omega_x - 0.5 * config.top.thickness * y1 - 0.5 * config.bottom.thickness * y3
}

/// Names of the five viscous dampers, in the order of the fields they act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Damper {
    /// axial velocity of the top layer
    A,
    /// shear-angle velocity of the top layer
    B,
    /// transverse velocity
    C,
    /// axial velocity of the bottom layer
    D,
    /// shear-angle velocity of the bottom layer
    E,
}

impl Damper {
    pub const ALL: [Damper; 5] = [Damper::A, Damper::B, Damper::C, Damper::D, Damper::E];

    /// Counterpart under the 1 <-> 3 layer relabelling.
    pub fn swapped(self) -> Self {
        match self {
            Damper::A => Damper::D,
            Damper::B => Damper::E,
            Damper::C => Damper::C,
            Damper::D => Damper::A,
            Damper::E => Damper::B,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Damper::A => 'a',
            Damper::B => 'b',
            Damper::C => 'c',
            Damper::D => 'd',
            Damper::E => 'e',
        }
    }
}

/// Viscous coefficients `(a, b, c, d, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DampingPattern {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
}

impl DampingPattern {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64) -> Result<Self> {
        let p = Self { a, b, c, d, e };
        p.validate()?;
        Ok(p)
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// Pattern with the listed dampers set to `value` and the rest zero.
    pub fn with(dampers: &[Damper], value: f64) -> Self {
        let mut p = Self::default();
        for &d in dampers {
            p.set(d, value);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        for d in Damper::ALL {
            let v = self.get(d);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("damping.{}", d.letter()),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, d: Damper) -> f64 {
        match d {
            Damper::A => self.a,
            Damper::B => self.b,
            Damper::C => self.c,
            Damper::D => self.d,
            Damper::E => self.e,
        }
    }

    pub fn set(&mut self, d: Damper, v: f64) {
        match d {
            Damper::A => self.a = v,
            Damper::B => self.b = v,
            Damper::C => self.c = v,
            Damper::D => self.d = v,
            Damper::E => self.e = v,
        }
    }

    /// Dampers with a strictly positive coefficient, in `a..e` order.
    pub fn active_set(&self) -> Vec<Damper> {
        Damper::ALL.into_iter().filter(|&d| self.get(d) > 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.active_set().is_empty()
    }

    pub fn swapped(&self) -> Self {
        let mut p = Self::default();
        for d in Damper::ALL {
            p.set(d.swapped(), self.get(d));
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityStatus {
    StronglyStable,
    Unstable,
    OpenCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub status: StabilityStatus,
    /// Polynomial order: energy decays like `t^(-2/ell)`.
    #[serde(rename = "ell")]
    pub predicted_ell: Option<u32>,
    pub sharp: bool,
    pub rationale: Vec<String>,
}

impl StabilityVerdict {
    fn open() -> Self {
        Self {
            status: StabilityStatus::OpenCase,
            predicted_ell: None,
            sharp: false,
            rationale: Vec::new(),
        }
    }
}

fn equality_note(name: &str, lhs: f64, rhs: f64) -> String {
    let d = rel_diff(lhs, rhs);
    let rel = if d <= EQ_REL_TOL { "==" } else { "!=" };
    format!("{name}: {lhs:e} {rel} {rhs:e} (rel diff {d:e}, tol {EQ_REL_TOL:e})")
}

fn verdict(status: StabilityStatus, ell: Option<u32>, sharp: bool, rationale: Vec<String>) -> StabilityVerdict {
    StabilityVerdict {
        status,
        predicted_ell: ell,
        sharp,
        rationale,
    }
}

fn classify_direct(config: &BeamConfig, pair: (Damper, Damper)) -> Option<StabilityVerdict> {
    use Damper::*;
    use StabilityStatus::*;
    let (t, b) = (config.top(), config.bottom());
    let speeds = equality_note("E1/rho1 vs E3/rho3", t.speed_sq(), b.speed_sq());
    let shear = equality_note("G1 vs G3", t.shear, b.shear);
    let v = match pair {
        (A, B) => {
            let ell = if config.equal_speeds() { 3 } else { 5 };
            verdict(StronglyStable, Some(ell), true, vec!["T2.2.case1".into(), "T3.1".into(), speeds])
        }
        (A, C) => {
            if config.equal_shear() {
                verdict(Unstable, None, true, vec!["T2.3".into(), shear])
            } else {
                let rates = equality_note("G1h1/(rho1I1) vs G3h3/(rho3I3)", t.shear_rate(), b.shear_rate());
                let ell = if config.equal_speeds() && !config.equal_shear_rates() { 2 } else { 6 };
                verdict(
                    StronglyStable,
                    Some(ell),
                    true,
                    vec!["T2.2.case2".into(), "T3.2".into(), shear, speeds, rates],
                )
            }
        }
        (B, C) => {
            if config.equal_speeds() {
                verdict(Unstable, None, true, vec!["T2.4.case1".into(), speeds])
            } else {
                verdict(StronglyStable, Some(6), true, vec!["T2.2.case3".into(), "T3.3".into(), speeds])
            }
        }
        (B, E) => {
            if config.equal_speeds() {
                let case = if config.equal_shear() { "T2.4.case3" } else { "T2.4.case2" };
                verdict(Unstable, None, false, vec![case.into(), speeds, shear])
            } else if !config.equal_shear() {
                verdict(StronglyStable, None, false, vec!["T2.2.case4".into(), speeds, shear])
            } else {
                StabilityVerdict::open()
            }
        }
        (A, E) => verdict(StronglyStable, None, false, vec!["T2.2.case5".into()]),
        (A, D) => {
            if config.layers_symmetric() {
                verdict(Unstable, None, false, vec!["T2.5".into(), "layers symmetric".into()])
            } else {
                StabilityVerdict::open()
            }
        }
        _ => return None,
    };
    Some(v)
}

/// Looks up the stability table for a two-damper pattern.
///
/// Patterns outside the published table are mapped through the 1 <-> 3
/// layer relabelling (`a <-> d`, `b <-> e`) when their mirror image is
/// covered; the mirrored verdict keeps its status and rationale but drops
/// `ell` and `sharp`. Anything that is not a two-damper pattern is an
/// `OpenCase` with empty rationale.
pub fn classify(config: &BeamConfig, damping: &DampingPattern) -> StabilityVerdict {
    let active = damping.active_set();
    if active.len() != 2 {
        return StabilityVerdict::open();
    }
    let pair = (active[0], active[1]);
    if let Some(v) = classify_direct(config, pair) {
        return v;
    }
    let (x, y) = (pair.0.swapped(), pair.1.swapped());
    let mirrored = if x < y { (x, y) } else { (y, x) };
    match classify_direct(&config.swapped(), mirrored) {
        Some(mut v) => {
            v.predicted_ell = None;
            v.sharp = false;
            v.rationale
                .insert(0, format!("layer-swap {{{},{}}}", mirrored.0.letter(), mirrored.1.letter()));
            v
        }
        None => StabilityVerdict::open(),
    }
}

/// Families of undamped standing waves that make `+-i lambda_n` exact
/// eigenvalues of the continuous generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeFamily {
    /// Opposed face shear angles `y1 = -(h3/h1) y3`, everything else at rest.
    #[serde(rename = "T2.3")]
    ShearAntisymmetric,
    /// In-phase axial motion `u1 = u3`, everything else at rest.
    #[serde(rename = "T2.4")]
    AxialInPhase,
    /// Mirror shear angles `y3 = -y1` of identical layers.
    #[serde(rename = "T2.5")]
    ShearMirror,
}

impl ModeFamily {
    pub const ALL: [ModeFamily; 3] = [
        ModeFamily::ShearAntisymmetric,
        ModeFamily::AxialInPhase,
        ModeFamily::ShearMirror,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModeFamily::ShearAntisymmetric => "T2.3",
            ModeFamily::AxialInPhase => "T2.4",
            ModeFamily::ShearMirror => "T2.5",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        ModeFamily::ALL
            .into_iter()
            .find(|f| f.tag().eq_ignore_ascii_case(tag))
            .ok_or_else(|| Error::validation("theorem", format!("unknown mode family `{tag}` (expected T2.3, T2.4 or T2.5)")))
    }

    /// Damping pattern that leaves this family's modes untouched.
    pub fn blind_dampers(self) -> [Damper; 2] {
        match self {
            ModeFamily::ShearAntisymmetric => [Damper::A, Damper::C],
            ModeFamily::AxialInPhase => [Damper::B, Damper::C],
            ModeFamily::ShearMirror => [Damper::A, Damper::D],
        }
    }

    fn check_hypotheses(self, config: &BeamConfig) -> Result<()> {
        let (t, b) = (config.top(), config.bottom());
        let fail = |what: &str, l: f64, r: f64| {
            Err(Error::Precondition(format!(
                "{} requires {what} (got {l:e} vs {r:e})",
                self.tag()
            )))
        };
        match self {
            ModeFamily::ShearAntisymmetric => {
                if !config.equal_shear() {
                    return fail("G1 == G3", t.shear, b.shear);
                }
            }
            ModeFamily::AxialInPhase => {
                if !config.equal_speeds() {
                    return fail("E1/rho1 == E3/rho3", t.speed_sq(), b.speed_sq());
                }
            }
            ModeFamily::ShearMirror => {
                let pairs = [
                    ("E1 == E3", t.young, b.young),
                    ("rho1 == rho3", t.rho, b.rho),
                    ("G1 == G3", t.shear, b.shear),
                    ("I1 == I3", t.inertia, b.inertia),
                    ("h1 == h3", t.thickness, b.thickness),
                ];
                for (what, l, r) in pairs {
                    if !rel_eq(l, r) {
                        return fail(what, l, r);
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Spatial profile of one field: zero or `amplitude * sin(k x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Zero,
    Sine { amplitude: f64, wavenumber: f64 },
}

impl Profile {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine { amplitude, wavenumber } => amplitude * (wavenumber * x).sin(),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine { amplitude, wavenumber } => amplitude * wavenumber * (wavenumber * x).cos(),
        }
    }

    /// Integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Sine { amplitude, wavenumber } => {
                amplitude * ((wavenumber * a).cos() - (wavenumber * b).cos()) / wavenumber
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero) || matches!(self, Profile::Sine { amplitude, .. } if *amplitude == 0.0)
    }
}

/// Position profiles of a standing wave; velocities are `i lambda` times these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldProfiles {
    pub u1: Profile,
    pub y1: Profile,
    pub omega: Profile,
    pub u3: Profile,
    pub y3: Profile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormMode {
    #[serde(rename = "theorem")]
    pub family: ModeFamily,
    pub n: u32,
    pub lambda: f64,
    pub profiles: FieldProfiles,
}

impl ClosedFormMode {
    /// Core shear stress of the position profiles at `x`.
    pub fn tau_at(&self, x: f64, config: &BeamConfig) -> f64 {
        let p = &self.profiles;
        shear_stress_tau(p.u1.value(x), p.u3.value(x), p.omega.slope(x), p.y1.value(x), p.y3.value(x), config)
    }
}

fn wavenumber(n: u32, config: &BeamConfig) -> f64 {
    n as f64 * PI / config.length()
}

/// Closed-form frequency and profiles of the `n`-th mode of a family.
pub fn closed_form_mode(family: ModeFamily, n: u32, config: &BeamConfig) -> Result<ClosedFormMode> {
    if n == 0 {
        return Err(Error::validation("n", "mode index must be >= 1"));
    }
    family.check_hypotheses(config)?;
    let k = wavenumber(n, config);
    let (t, b) = (config.top(), config.bottom());
    let sine = |amplitude: f64| Profile::Sine { amplitude, wavenumber: k };
    let zero = Profile::Zero;
    let (lambda, profiles) = match family {
        ModeFamily::ShearAntisymmetric => {
            // G1 stands in for G3; the two agree under the hypothesis.
            let l2 = k * k * b.speed_sq() + t.shear * b.thickness / (b.rho * b.inertia);
            let profiles = FieldProfiles {
                u1: zero,
                y1: sine(-b.thickness / t.thickness),
                omega: zero,
                u3: zero,
                y3: sine(1.0),
            };
            (l2.sqrt(), profiles)
        }
        ModeFamily::AxialInPhase => {
            let profiles = FieldProfiles {
                u1: sine(1.0),
                y1: zero,
                omega: zero,
                u3: sine(1.0),
                y3: zero,
            };
            (b.speed_sq().sqrt() * k, profiles)
        }
        ModeFamily::ShearMirror => {
            let l2 = k * k * t.speed_sq() + t.shear_rate();
            let profiles = FieldProfiles {
                u1: zero,
                y1: sine(1.0),
                omega: zero,
                u3: zero,
                y3: sine(-1.0),
            };
            (l2.sqrt(), profiles)
        }
    };
    Ok(ClosedFormMode {
        family,
        n,
        lambda,
        profiles,
    })
}

/// Mismatch between the `lambda^2` values demanded by the individual field
/// equations of a candidate mode. Zero means the candidate is an exact
/// eigenfunction.
pub fn dispersion_gap(family: ModeFamily, n: u32, config: &BeamConfig) -> f64 {
    let k = wavenumber(n, config);
    let (t, b) = (config.top(), config.bottom());
    let speed_gap = (t.speed_sq() - b.speed_sq()) * k * k;
    match family {
        ModeFamily::AxialInPhase => speed_gap.abs(),
        ModeFamily::ShearAntisymmetric | ModeFamily::ShearMirror => (speed_gap + t.shear_rate() - b.shear_rate()).abs(),
    }
}
