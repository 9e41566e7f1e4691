//! Point-multipole electrostatics for charges and axial dipoles/quadrupoles,
//! Gaussian units with k_C = 1.
//!
//! With `R = r_a - r_b`, `r = |R|`, unit orientation vectors `e_a`, `e_b`,
//! `s_a = e_a . R`, `s_b = e_b . R` and `c = e_a . e_b`, each interaction is
//!
//! ```text
//! U = w_a w_b D^{m,n}(R),   D^{m,n} = (e_a . grad)^m (e_b . grad)^n (1/r)
//! ```
//!
//! where `m`, `n` are the multipole orders (0 charge, 1 dipole, 2 quadrupole)
//! and the weights are `q`, `mu`, `Q/2` on site a and `q`, `-mu`, `Q/2` on
//! site b (the sign flips because the derivative on b is taken w.r.t. its
//! own position). `Q` is the axial moment of the equivalent line of charges,
//! `Q = sum q_i z_i^2`. Written out:
//!
//! ```text
//! D00 = 1/r
//! D10 = -s_a/r^3                      D01 = -s_b/r^3
//! D20 = -1/r^3 + 3 s_a^2/r^5          D02 = -1/r^3 + 3 s_b^2/r^5
//! D11 = -c/r^3 + 3 s_a s_b/r^5
//! D21 = (6 c s_a + 3 s_b)/r^5 - 15 s_a^2 s_b/r^7
//! D12 = (6 c s_b + 3 s_a)/r^5 - 15 s_a s_b^2/r^7
//! D22 = (3 + 6 c^2)/r^5 - (15 s_a^2 + 15 s_b^2 + 60 c s_a s_b)/r^7
//!       + 105 s_a^2 s_b^2/r^9
//! ```
//!
//! giving e.g. `U_qq = q_a q_b / r`, `U_mumu = mu_a mu_b (c - 3 ĉ_a ĉ_b)/r^3`,
//! `U_QQ = 3 Q_a Q_b/(4 r^5) [1 + 2c^2 - 5ĉ_a^2 - 5ĉ_b^2 - 20 c ĉ_a ĉ_b
//! + 35 ĉ_a^2 ĉ_b^2]` with `ĉ = s/r`.
//!
//! Force and torques follow from `U(r, s_a, s_b, c)`:
//! `F_a = -(U_r R/r + U_sa e_a + U_sb e_b)`,
//! `tau_a = -e_a x (U_sa R + U_c e_b)`, `tau_b = -e_b x (U_sb R + U_c e_a)`.

use crate::error::{Error, Result};
use crate::math::Vec3;

use super::PairResult;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Polarity {
    Charge(f64),
    Dipole(f64),
    Quadrupole(f64),
}

impl Polarity {
    fn order(self) -> usize {
        match self {
            Polarity::Charge(_) => 0,
            Polarity::Dipole(_) => 1,
            Polarity::Quadrupole(_) => 2,
        }
    }

    fn weight(self, is_b: bool) -> f64 {
        match self {
            Polarity::Charge(q) => q,
            Polarity::Dipole(mu) => {
                if is_b {
                    -mu
                } else {
                    mu
                }
            }
            Polarity::Quadrupole(q) => 0.5 * q,
        }
    }
}

/// A polarity with its world-frame orientation. The axis is ignored for
/// charges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarSite {
    pub kind: Polarity,
    pub axis: Vec3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElectroResult {
    pub pair: PairResult,
    pub torque_a: Vec3,
    pub torque_b: Vec3,
}

/// One monomial `coef * s_a^pa * s_b^pb * c^pc / r^n`.
#[derive(Clone, Copy)]
struct Term {
    coef: f64,
    pa: i32,
    pb: i32,
    pc: i32,
    n: i32,
}

const fn t(coef: f64, pa: i32, pb: i32, pc: i32, n: i32) -> Term {
    Term { coef, pa, pb, pc, n }
}

const D00: &[Term] = &[t(1.0, 0, 0, 0, 1)];
const D10: &[Term] = &[t(-1.0, 1, 0, 0, 3)];
const D01: &[Term] = &[t(-1.0, 0, 1, 0, 3)];
const D20: &[Term] = &[t(-1.0, 0, 0, 0, 3), t(3.0, 2, 0, 0, 5)];
const D02: &[Term] = &[t(-1.0, 0, 0, 0, 3), t(3.0, 0, 2, 0, 5)];
const D11: &[Term] = &[t(-1.0, 0, 0, 1, 3), t(3.0, 1, 1, 0, 5)];
const D21: &[Term] = &[t(6.0, 1, 0, 1, 5), t(3.0, 0, 1, 0, 5), t(-15.0, 2, 1, 0, 7)];
const D12: &[Term] = &[t(6.0, 0, 1, 1, 5), t(3.0, 1, 0, 0, 5), t(-15.0, 1, 2, 0, 7)];
const D22: &[Term] = &[
    t(3.0, 0, 0, 0, 5),
    t(6.0, 0, 0, 2, 5),
    t(-15.0, 2, 0, 0, 7),
    t(-15.0, 0, 2, 0, 7),
    t(-60.0, 1, 1, 1, 7),
    t(105.0, 2, 2, 0, 9),
];

fn table(m: usize, n: usize) -> &'static [Term] {
    match (m, n) {
        (0, 0) => D00,
        (1, 0) => D10,
        (0, 1) => D01,
        (2, 0) => D20,
        (0, 2) => D02,
        (1, 1) => D11,
        (2, 1) => D21,
        (1, 2) => D12,
        (2, 2) => D22,
        _ => unreachable!("multipole order above 2"),
    }
}

#[inline]
fn powi(x: f64, p: i32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(p),
    }
}

/// Energy, force on `a` and torques for a pair of point polarities separated
/// by `r_vec = r_a - r_b`.
pub fn electrostatic_pair(a: &PolarSite, b: &PolarSite, r_vec: Vec3) -> Result<ElectroResult> {
    let r2 = r_vec.norm2();
    if r2 == 0.0 {
        return Err(Error::SingularOverlap);
    }
    let w = a.kind.weight(false) * b.kind.weight(true);
    if w == 0.0 {
        return Ok(ElectroResult::default());
    }
    let r = r2.sqrt();
    let inv_r = 1.0 / r;
    let ea = a.axis;
    let eb = b.axis;
    let sa = ea.dot(r_vec);
    let sb = eb.dot(r_vec);
    let c = ea.dot(eb);

    let (mut u, mut u_r, mut u_sa, mut u_sb, mut u_c) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for term in table(a.kind.order(), b.kind.order()) {
        let fa = powi(sa, term.pa);
        let fb = powi(sb, term.pb);
        let fc = powi(c, term.pc);
        let rn = powi(inv_r, term.n);
        let base = term.coef * rn;
        u += base * fa * fb * fc;
        u_r -= term.n as f64 * base * inv_r * fa * fb * fc;
        if term.pa > 0 {
            u_sa += base * term.pa as f64 * powi(sa, term.pa - 1) * fb * fc;
        }
        if term.pb > 0 {
            u_sb += base * term.pb as f64 * fa * powi(sb, term.pb - 1) * fc;
        }
        if term.pc > 0 {
            u_c += base * term.pc as f64 * fa * fb * powi(c, term.pc - 1);
        }
    }
    u *= w;
    u_r *= w;
    u_sa *= w;
    u_sb *= w;
    u_c *= w;

    let grad = r_vec * (u_r * inv_r) + ea * u_sa + eb * u_sb;
    let f = -grad;
    let torque_a = -ea.cross(r_vec * u_sa + eb * u_c);
    let torque_b = -eb.cross(r_vec * u_sb + ea * u_c);
    Ok(ElectroResult { pair: PairResult { u, f, virial: r_vec.dot(f) }, torque_a, torque_b })
}
