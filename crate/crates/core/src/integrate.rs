//! Leapfrog integration of rigid-body translation and rotation.
//!
//! Velocities and angular momenta live at half steps. A step kicks them from
//! `t - dt/2` to `t + dt/2` with the forces at `t`, then drifts positions and
//! orientations to `t + dt`. Orientations advance with a midpoint quaternion
//! update that is renormalized after every sub-step.

use crate::cells::wrap_position;
use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};
use crate::model::{MoleculeState, Species};

/// Forces and torques on the center of mass of each molecule.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepForces {
    pub force: Vec<Vec3>,
    pub torque: Vec<Vec3>,
}

/// Kinetic energy split into translation and rotation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Kinetic {
    pub translational: f64,
    pub rotational: f64,
}

impl Kinetic {
    pub fn total(&self) -> f64 {
        self.translational + self.rotational
    }

    pub fn add(&mut self, o: Kinetic) {
        self.translational += o.translational;
        self.rotational += o.rotational;
    }
}

fn rotational_energy(sp: &Species, q: Quat, j: Vec3) -> f64 {
    if sp.is_symmetric() {
        0.0
    } else {
        sp.rotational_energy(q.rotate_inv(j))
    }
}

/// Kicks velocities and angular momenta by `h` and returns the kinetic
/// energy at the time the forces belong to, taken from the old, new or mean
/// momenta according to `mode`.
pub fn kick(states: &mut [MoleculeState], forces: &StepForces, species: &[Species], h: f64, mode: KickMode) -> Kinetic {
    let mut k = Kinetic::default();
    for (s, (f, tau)) in states.iter_mut().zip(forces.force.iter().zip(&forces.torque)) {
        let sp = &species[s.species];
        let v_old = s.v;
        let j_old = s.j;
        s.v += *f * (h / sp.mass);
        if !sp.is_symmetric() {
            s.j += *tau * h;
        }
        let (v, j) = match mode {
            KickMode::Average => ((v_old + s.v) * 0.5, (j_old + s.j) * 0.5),
            KickMode::Before => (v_old, j_old),
            KickMode::After => (s.v, s.j),
        };
        k.translational += 0.5 * sp.mass * v.norm2();
        k.rotational += rotational_energy(sp, s.q, j);
    }
    k
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KickMode {
    Average,
    Before,
    After,
}

/// Quaternion time derivative `q' = q (0, omega_body) / 2`.
fn q_dot(q: Quat, j_world: Vec3, sp: &Species) -> Quat {
    let w = sp.angular_velocity(q.rotate_inv(j_world));
    q.mul(Quat::new(0.0, w.x, w.y, w.z))
}

/// Orientation after `dt` of free rotation with constant world-frame `j`.
pub fn rotate_orientation(q: Quat, j_world: Vec3, sp: &Species, dt: f64) -> Quat {
    let half = q.add_scaled(q_dot(q, j_world, sp), 0.25 * dt).normalized();
    q.add_scaled(q_dot(half, j_world, sp), 0.5 * dt).normalized()
}

/// Moves positions and orientations by `dt`, wraps into the box and rejects
/// any displacement larger than `max_disp` along an axis.
pub fn drift(states: &mut [MoleculeState], species: &[Species], dt: f64, box_len: Vec3, max_disp: Vec3) -> Result<()> {
    for s in states.iter_mut() {
        let sp = &species[s.species];
        let d = s.v * dt;
        if !d.is_finite() || !s.j.is_finite() {
            return Err(Error::Instability { id: s.id, reason: "non-finite velocity".into() });
        }
        for k in 0..3 {
            if d[k].abs() > max_disp[k] {
                return Err(Error::Instability {
                    id: s.id,
                    reason: format!(
                        "moved {:.3e} along axis {k} in one step, cell width {:.3e}",
                        d[k].abs(),
                        max_disp[k]
                    ),
                });
            }
        }
        s.r = wrap_position(s.r + d, box_len);
        if !sp.is_symmetric() {
            s.q = rotate_orientation(s.q, s.j, sp, dt);
        }
    }
    Ok(())
}

/// One full leapfrog translation step of a single molecule (unwrapped).
pub fn leapfrog_translate(state: &MoleculeState, force: Vec3, mass: f64, dt: f64) -> Result<MoleculeState> {
    if !(mass > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidInput("mass and time step must be positive".into()));
    }
    let mut s = state.clone();
    s.v += force * (dt / mass);
    s.r += s.v * dt;
    if !s.r.is_finite() || !s.v.is_finite() {
        return Err(Error::Instability { id: s.id, reason: "non-finite state".into() });
    }
    Ok(s)
}

/// One full leapfrog rotation step of a single molecule.
pub fn leapfrog_rotate(state: &MoleculeState, torque: Vec3, species: &Species, dt: f64) -> Result<MoleculeState> {
    let mut s = state.clone();
    if species.is_symmetric() {
        return Ok(s);
    }
    s.j += torque * dt;
    s.q = rotate_orientation(s.q, s.j, species, dt);
    if !s.j.is_finite() || !s.q.norm().is_finite() {
        return Err(Error::Instability { id: s.id, reason: "non-finite rotation".into() });
    }
    Ok(s)
}

/// Scales all momenta so the instantaneous temperature becomes `target`.
/// Returns the factor applied.
pub fn velocity_rescale(states: &mut [MoleculeState], species: &[Species], target: f64) -> Result<f64> {
    let t = crate::model::instantaneous_temperature(states, species)?;
    let lambda = rescale_factor(t, target)?;
    scale_momenta(states, lambda);
    Ok(lambda)
}

/// `sqrt(target / current)`.
pub fn rescale_factor(current: f64, target: f64) -> Result<f64> {
    if !(current > 0.0) || !(target >= 0.0) || !current.is_finite() {
        return Err(Error::CannotRescale);
    }
    Ok((target / current).sqrt())
}

pub fn scale_momenta(states: &mut [MoleculeState], lambda: f64) {
    for s in states {
        s.v = s.v * lambda;
        s.j = s.j * lambda;
    }
}
