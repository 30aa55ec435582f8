//! Hamiltonian dynamics: exact-gradient vector fields, an implicit
//! midpoint integrator (symplectic, second order, fixed-point solved) and
//! an RK4 reference, conservation-drift monitoring, and the radial
//! reductions of the geodesic-polar systems.

use crate::phase::{Observable, PhaseError, PhaseState};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynError {
    #[error("step size must be positive and finite")]
    BadStep,
    #[error("fixed-point iteration failed to converge after {0} iterations")]
    NonConvergence(usize),
    #[error("radial reduction requires Ctilde >= 0, got {0}")]
    BadCtilde(f64),
    #[error("integration aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        #[source]
        source: Box<DynError>,
    },
    #[error(transparent)]
    Phase(#[from] PhaseError),
    #[error(transparent)]
    Geom(#[from] crate::geometry::GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Midpoint,
    Rk4,
}

/// q̇ = ∂H/∂p, ṗ = −∂H/∂q.
pub fn hamilton_rhs(h: &Observable, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>), PhaseError> {
    let (dq, dp) = h.gradient(s)?;
    Ok((dp, dq.iter().map(|v| -v).collect()))
}

/// One implicit midpoint step, fixed-point solved to `fp_tol`; returns
/// the new state and the iteration count.
pub fn step_midpoint(
    h: &Observable,
    s: &PhaseState,
    dt: f64,
    fp_tol: f64,
    fp_maxiter: usize,
) -> Result<(PhaseState, usize), DynError> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(DynError::BadStep);
    }
    let n = s.n();
    let mut mid = s.clone();
    for iter in 1..=fp_maxiter {
        let (qdot, pdot) = hamilton_rhs(h, &mid)?;
        let mut next = s.clone();
        let mut delta = 0.0_f64;
        for i in 0..n {
            next.q[i] += 0.5 * dt * qdot[i];
            next.p[i] += 0.5 * dt * pdot[i];
            delta = delta
                .max((next.q[i] - mid.q[i]).abs())
                .max((next.p[i] - mid.p[i]).abs());
        }
        mid = next;
        if delta <= fp_tol {
            let mut out = mid.clone();
            for i in 0..n {
                out.q[i] = 2.0 * mid.q[i] - s.q[i];
                out.p[i] = 2.0 * mid.p[i] - s.p[i];
            }
            return Ok((out, iter));
        }
    }
    Err(DynError::NonConvergence(fp_maxiter))
}

/// Classical fourth-order Runge–Kutta step on the same vector field.
pub fn step_rk4(h: &Observable, s: &PhaseState, dt: f64) -> Result<PhaseState, DynError> {
    if !dt.is_finite() || dt == 0.0 {
        return Err(DynError::BadStep);
    }
    let n = s.n();
    let shift = |base: &PhaseState, k: &(Vec<f64>, Vec<f64>), c: f64| {
        let mut out = base.clone();
        for i in 0..n {
            out.q[i] += c * k.0[i];
            out.p[i] += c * k.1[i];
        }
        out
    };
    let k1 = hamilton_rhs(h, s)?;
    let k2 = hamilton_rhs(h, &shift(s, &k1, dt / 2.0))?;
    let k3 = hamilton_rhs(h, &shift(s, &k2, dt / 2.0))?;
    let k4 = hamilton_rhs(h, &shift(s, &k3, dt))?;
    let mut out = s.clone();
    for i in 0..n {
        out.q[i] += dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
        out.p[i] += dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<PhaseState>,
    /// Monitor names, H first.
    pub monitor_names: Vec<String>,
    /// values[k][m] = monitor m at step k.
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorDrift {
    pub name: String,
    pub initial: f64,
    pub max_abs_drift: f64,
    /// max_abs_drift / (1 + |initial|)
    pub rel_drift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub integrator: Integrator,
    pub dt: f64,
    pub steps: usize,
    pub max_fp_iterations: usize,
    pub monitors: Vec<MonitorDrift>,
}

impl DriftReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Integrate and monitor H plus the given integrals.
pub fn simulate(
    h: &Observable,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
    monitors: &[&Observable],
    integrator: Integrator,
) -> Result<(Trajectory, DriftReport), DynError> {
    let fp_tol = 1e-13;
    let fp_maxiter = 50;
    let mut names = vec![h.name().to_string()];
    names.extend(monitors.iter().map(|m| m.name().to_string()));

    let eval_all = |s: &PhaseState| -> Result<Vec<f64>, PhaseError> {
        let mut row = vec![h.evaluate(s)?];
        for m in monitors {
            row.push(m.evaluate(s)?);
        }
        Ok(row)
    };

    let mut states = vec![s0.clone()];
    let mut values = vec![eval_all(s0)?];
    let mut max_fp = 0usize;
    for step in 0..steps {
        let current = states.last().expect("nonempty");
        let next = match integrator {
            Integrator::Midpoint => {
                let (s, iters) =
                    step_midpoint(h, current, dt, fp_tol, fp_maxiter).map_err(|e| {
                        DynError::Aborted { step, source: Box::new(e) }
                    })?;
                max_fp = max_fp.max(iters);
                s
            }
            Integrator::Rk4 => step_rk4(h, current, dt)
                .map_err(|e| DynError::Aborted { step, source: Box::new(e) })?,
        };
        let row = eval_all(&next)
            .map_err(|e| DynError::Aborted { step, source: Box::new(e.into()) })?;
        states.push(next);
        values.push(row);
    }

    let drift = |m: usize| -> MonitorDrift {
        let initial = values[0][m];
        let max_abs = values
            .iter()
            .map(|row| (row[m] - initial).abs())
            .fold(0.0, f64::max);
        MonitorDrift {
            name: names[m].clone(),
            initial,
            max_abs_drift: max_abs,
            rel_drift: max_abs / (1.0 + initial.abs()),
        }
    };
    let report = DriftReport {
        integrator,
        dt,
        steps,
        max_fp_iterations: max_fp,
        monitors: (0..names.len()).map(drift).collect(),
    };
    Ok((
        Trajectory { dt, states, monitor_names: names, values },
        report,
    ))
}

/// CSV dump: `t,q1..qN,p1..pN,H,<monitors>`, 17 significant digits.
pub fn write_trajectory_csv<W: Write>(w: &mut W, traj: &Trajectory) -> std::io::Result<()> {
    let n = traj.states[0].n();
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",q{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",p{i}"));
    }
    for name in &traj.monitor_names {
        header.push_str(&format!(",{name}"));
    }
    writeln!(w, "{header}")?;
    for (k, s) in traj.states.iter().enumerate() {
        let mut row = format!("{:.16e}", traj.time(k));
        for v in s.q.iter().chain(s.p.iter()) {
            row.push_str(&format!(",{v:.16e}"));
        }
        for v in &traj.values[k] {
            row.push_str(&format!(",{v:.16e}"));
        }
        writeln!(w, "{row}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedKind {
    TypeI,
    Ms,
}

/// One-dimensional radial Hamiltonian with the angular momentum fixed at
/// C̃ = p_θ²; the coordinate pair is (q1, p1) = (ρ, p_ρ) or (r, p_r).
pub fn reduce_radial(
    kind: ReducedKind,
    lambda1sq: f64,
    lambda2sq: f64,
    ctilde: f64,
) -> Result<Observable, DynError> {
    if ctilde < 0.0 {
        return Err(DynError::BadCtilde(ctilde));
    }
    let mut params = BTreeMap::new();
    params.insert("l2sq".to_string(), lambda2sq);
    params.insert("C".to_string(), ctilde);
    params.insert("m".to_string(), lambda1sq.abs().sqrt());
    let centrifugal = ctilde != 0.0;
    // λ₁² cosh(λ₁ρ)/sinh²(λ₁ρ) and λ₁²/sin²(λ₁r) rewritten through
    // m = √|λ₁²| so each sign of λ₁² gets real trig/hyperbolic form.
    let src = match (kind, lambda1sq) {
        (ReducedKind::TypeI, l) if l > 0.0 => {
            "cosh(m*q1)*p1^2/2 + m^2*cosh(m*q1)*C/(2*l2sq*sinh(m*q1)^2)"
        }
        (ReducedKind::TypeI, l) if l < 0.0 => {
            "cos(m*q1)*p1^2/2 + m^2*cos(m*q1)*C/(2*l2sq*sin(m*q1)^2)"
        }
        (ReducedKind::TypeI, _) => "p1^2/2 + C/(2*l2sq*q1^2)",
        (ReducedKind::Ms, l) if l > 0.0 => "p1^2/2 + m^2*C/(2*l2sq*sin(m*q1)^2)",
        (ReducedKind::Ms, l) if l < 0.0 => "p1^2/2 + m^2*C/(2*l2sq*sinh(m*q1)^2)",
        (ReducedKind::Ms, _) => "p1^2/2 + C/(2*l2sq*q1^2)",
    };
    let name = match kind {
        ReducedKind::TypeI => "H_radial_I",
        ReducedKind::Ms => "H_radial_MS",
    };
    let obs = Observable::parse(name, src, 1, params)?;
    Ok(if centrifugal { obs.with_singular_q(vec![0]) } else { obs })
}

/// Initial data for the type-I radial reduction from a full 2D state:
/// geodesic polar positions with momenta in the doubled metric
/// normalization used by the reduced Hamiltonians, so the reduced energy
/// equals twice the full Hamiltonian while (ρ, p_ρ) still follows
/// Hamilton's equations of the reduced system. Returns the 1D radial
/// state and C̃ = p_θ².
pub fn radial_initial_data(
    s: &PhaseState,
    z: f64,
    lambda2sq: f64,
) -> Result<(PhaseState, f64), DynError> {
    let polar = crate::geometry::polar_canonical_state(s, z, lambda2sq)?;
    let p_rho = 2.0 * polar.p[0];
    let p_theta = 2.0 * polar.p[1];
    let radial = PhaseState::new(vec![polar.q[0]], vec![p_rho])?;
    Ok((radial, p_theta * p_theta))
}
