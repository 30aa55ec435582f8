//! Riemannian geometry of the N = 2 systems: metrics read off kinetic
//! Hamiltonians, Gaussian curvature (closed forms and the general
//! Brioschi formula), the geodesic-polar coordinate transform, and the
//! constant-curvature classification scan.
//!
//! Every derivative here comes from the dual-number tower; the Brioschi
//! evaluation differentiates the metric components with nested duals.

use crate::catalog::SystemSpec;
use crate::expr::{self, Ast};
use crate::phase::{Observable, PhaseError, PhaseState};
use crate::scalar::{Dual, Scalar};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use thiserror::Error;

type D2 = Dual<Dual<f64>>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("metric extraction requires N = 2, got N = {0}")]
    NotPlanar(usize),
    #[error("metric extraction requires b = 0 (no centrifugal terms)")]
    Centrifugal,
    #[error("Hamiltonian is not quadratic in the momenta (max third p-derivative {0:.3e})")]
    NonQuadratic(f64),
    #[error("momentum Hessian is singular at the requested point")]
    SingularMetric,
    #[error("degenerate metric: EG - F^2 <= 0")]
    Degenerate,
    #[error("branch violation: {0}")]
    Branch(String),
    #[error("theta is undefined at the origin")]
    ThetaAtOrigin,
    #[error("lambda2sq must be nonzero")]
    ZeroLambda2,
    #[error("f vanishes at x = {0}")]
    FVanishes(f64),
    #[error("expression error: {0}")]
    BadExpr(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

/// cosh(√l·x) for l > 0, cos(√−l·x) for l < 0, 1 at l = 0.
fn c_even<S: Scalar<Real = f64>>(l: f64, x: S) -> S {
    if l > 0.0 {
        (S::from_real(l.sqrt()) * x).cosh()
    } else if l < 0.0 {
        (S::from_real((-l).sqrt()) * x).cos()
    } else {
        S::one()
    }
}

/// sinh(√l·x)/√l for l > 0, sin(√−l·x)/√−l for l < 0, x at l = 0.
/// Its square is sinh²(√l·x)/l for either sign of l.
fn s_over<S: Scalar<Real = f64>>(l: f64, x: S) -> S {
    if l > 0.0 {
        let r = l.sqrt();
        (S::from_real(r) * x).sinh() / S::from_real(r)
    } else if l < 0.0 {
        let r = (-l).sqrt();
        (S::from_real(r) * x).sin() / S::from_real(r)
    } else {
        x
    }
}

/// A two-dimensional metric ds² = E du² + 2F du dv + G dv², with
/// components evaluable on any scalar of the tower.
#[derive(Debug, Clone)]
pub enum Metric2D {
    /// factor · (momentum Hessian of the Hamiltonian)⁻¹, in the q chart.
    Kinetic { hamiltonian: Observable, factor: f64 },
    /// ds²_I = (1/cosh λ₁ρ)(dρ² + λ₂² sinh²(λ₁ρ)/λ₁² dθ²), λ₁² = lambda1sq.
    PolarTypeI { lambda1sq: f64, lambda2sq: f64 },
    /// ds²_MS = dr² + λ₂² sin²(λ₁r)/λ₁² dθ².
    PolarMs { lambda1sq: f64, lambda2sq: f64 },
}

impl Metric2D {
    /// Validated kinetic metric of a catalog system.
    pub fn from_system(spec: &SystemSpec) -> Result<Self, GeomError> {
        if spec.realization.n != 2 {
            return Err(GeomError::NotPlanar(spec.realization.n));
        }
        if spec.realization.b.iter().any(|&b| b != 0.0) {
            return Err(GeomError::Centrifugal);
        }
        // Quadratic-in-p check at a generic state.
        let probe = PhaseState::new(vec![0.53, 0.71], vec![0.37, -0.59]).expect("valid");
        let third = spec.hamiltonian.max_third_pp(&probe)?;
        if third > 1e-12 {
            return Err(GeomError::NonQuadratic(third));
        }
        Ok(Metric2D::Kinetic {
            hamiltonian: spec.hamiltonian.clone(),
            factor: spec.metric_factor,
        })
    }

    /// Whether the metric is expected to be positive-definite on its
    /// domain (pseudo-Riemannian branches carry lambda2sq < 0).
    fn expects_riemannian(&self) -> bool {
        match *self {
            Metric2D::Kinetic { .. } => true,
            Metric2D::PolarTypeI { lambda2sq, .. } | Metric2D::PolarMs { lambda2sq, .. } => {
                lambda2sq > 0.0
            }
        }
    }

    /// Components (E, F, G) at (u, v) — (q₁, q₂) for kinetic metrics,
    /// (ρ, θ) or (r, θ) for the polar ones.
    pub fn components<S: Scalar<Real = f64>>(&self, u: S, v: S) -> Result<(S, S, S), GeomError> {
        match self {
            Metric2D::Kinetic { hamiltonian, factor } => {
                let q = [u, v];
                let p = [S::zero(), S::zero()];
                let h = hamiltonian.hessian_pp_at(&q, &p)?;
                let (a, b, d) = (h[0][0], h[0][1], h[1][1]);
                let det = a * d - b * b;
                if det.re() == 0.0 {
                    return Err(GeomError::SingularMetric);
                }
                let c = S::from_real(*factor);
                Ok((c * d / det, -(c * b / det), c * a / det))
            }
            Metric2D::PolarTypeI { lambda1sq, lambda2sq } => {
                if *lambda2sq == 0.0 {
                    return Err(GeomError::ZeroLambda2);
                }
                let c = c_even(*lambda1sq, u);
                let s = s_over(*lambda1sq, u);
                let e = S::one() / c;
                let g = S::from_real(*lambda2sq) * s * s / c;
                Ok((e, S::zero(), g))
            }
            Metric2D::PolarMs { lambda1sq, lambda2sq } => {
                if *lambda2sq == 0.0 {
                    return Err(GeomError::ZeroLambda2);
                }
                let s = s_over(-*lambda1sq, u);
                Ok((S::one(), S::zero(), S::from_real(*lambda2sq) * s * s))
            }
        }
    }
}

/// Metric matrix of a kinetic system at a point.
pub fn extract_metric(spec: &SystemSpec, q: &[f64; 2]) -> Result<[[f64; 2]; 2], GeomError> {
    let m = Metric2D::from_system(spec)?;
    let (e, f, g) = m.components(q[0], q[1])?;
    Ok([[e, f], [f, g]])
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian curvature by the Brioschi formula; all metric derivatives via
/// nested duals.
pub fn brioschi(m: &Metric2D, u: f64, v: f64) -> Result<f64, GeomError> {
    // d²/du²-channel evaluation
    let cu = {
        let us: D2 = Dual::new(Dual::var(u), Dual::con(1.0));
        let vs = D2::from_real(v);
        m.components(us, vs)?
    };
    // d²/dv² channel
    let cv = {
        let us = D2::from_real(u);
        let vs: D2 = Dual::new(Dual::var(v), Dual::con(1.0));
        m.components(us, vs)?
    };
    // mixed d²/dudv channel
    let cm = {
        let us: D2 = Dual::new(Dual::new(u, 0.0), Dual::new(1.0, 0.0));
        let vs: D2 = Dual::new(Dual::new(v, 1.0), Dual::new(0.0, 0.0));
        m.components(us, vs)?
    };

    let (e, f, g) = (cu.0.re.re, cu.1.re.re, cu.2.re.re);
    let e_u = cu.0.re.eps;
    let f_u = cu.1.re.eps;
    let g_u = cu.2.re.eps;
    let g_uu = cu.2.eps.eps;
    let e_v = cv.0.re.eps;
    let f_v = cv.1.re.eps;
    let g_v = cv.2.re.eps;
    let e_vv = cv.0.eps.eps;
    let f_uv = cm.1.eps.eps;

    let det = e * g - f * f;
    if det == 0.0 || (m.expects_riemannian() && (det <= 0.0 || e <= 0.0)) {
        return Err(GeomError::Degenerate);
    }
    let m1 = det3([
        [-0.5 * e_vv + f_uv - 0.5 * g_uu, 0.5 * e_u, f_u - 0.5 * e_v],
        [f_v - 0.5 * g_u, e, f],
        [0.5 * g_v, f, g],
    ]);
    let m2 = det3([
        [0.0, 0.5 * e_v, 0.5 * g_u],
        [0.5 * e_v, e, f],
        [0.5 * g_u, f, g],
    ]);
    Ok((m1 - m2) / (det * det))
}

/// f, f', f'' at x by one hyper-dual evaluation.
fn f_tower(
    f: &Ast,
    params: &BTreeMap<String, f64>,
    x: f64,
) -> Result<(f64, f64, f64), GeomError> {
    let xd: D2 = Dual::new(Dual::var(x), Dual::con(1.0));
    let bind = |name: &str| -> Option<D2> {
        if name == "x" {
            Some(xd)
        } else {
            params.get(name).map(|&v| D2::from_real(v))
        }
    };
    let v = expr::eval(f, &bind).map_err(|e| GeomError::BadExpr(e.to_string()))?;
    Ok((v.re.re, v.re.eps, v.eps.eps))
}

/// Closed-form curvature of ds² = (2/f) dq² at q² = x:
/// K = f'(x) + x f''(x) − x f'(x)²/f(x).
pub fn curvature_f_classical(
    f: &Ast,
    params: &BTreeMap<String, f64>,
    x: f64,
) -> Result<f64, GeomError> {
    let (fv, f1, f2) = f_tower(f, params, x)?;
    if fv == 0.0 {
        return Err(GeomError::FVanishes(x));
    }
    Ok(f1 + x * f2 - x * f1 * f1 / fv)
}

/// Closed-form curvature of the deformed family at x = z·q²:
/// K = z (f'(x) cosh x + (f''(x) − f(x) − f'(x)²/f(x)) sinh x).
pub fn curvature_f_deformed(
    f: &Ast,
    params: &BTreeMap<String, f64>,
    x: f64,
    z: f64,
) -> Result<f64, GeomError> {
    let (fv, f1, f2) = f_tower(f, params, x)?;
    if fv == 0.0 {
        return Err(GeomError::FVanishes(x));
    }
    Ok(z * (f1 * x.cosh() + (f2 - fv - f1 * f1 / fv) * x.sinh()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureVerdict {
    Constant { k: f64 },
    NonConstant { min: f64, max: f64 },
}

/// Evaluate the deformed curvature over a grid of x values and classify
/// it as constant when max − min ≤ tol·(1 + |mean|).
pub fn constant_curvature_scan(
    f: &Ast,
    params: &BTreeMap<String, f64>,
    xs: &[f64],
    z: f64,
    tol: f64,
) -> Result<CurvatureVerdict, GeomError> {
    assert!(!xs.is_empty(), "scan needs a nonempty grid");
    let ks: Vec<f64> = xs
        .iter()
        .map(|&x| curvature_f_deformed(f, params, x, z))
        .collect::<Result<_, _>>()?;
    let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = ks.iter().sum::<f64>() / ks.len() as f64;
    if max - min <= tol * (1.0 + mean.abs()) {
        Ok(CurvatureVerdict::Constant { k: mean })
    } else {
        Ok(CurvatureVerdict::NonConstant { min, max })
    }
}

/// Geodesic radial coordinate: cosh(λ₁ρ) = e^{z q²}, λ₁ = √z.
pub fn rho_of(q: &[f64; 2], z: f64) -> Result<f64, GeomError> {
    if z <= 0.0 {
        return Err(GeomError::Branch(format!("z must be positive, got {z}")));
    }
    let r2 = q[0] * q[0] + q[1] * q[1];
    Ok((z * r2).exp().acosh() / z.sqrt())
}

/// Unchecked generic forward map (used for Jacobians); valid on the open
/// positive quadrant with z > 0, lambda2sq > 0.
fn to_polar_s<S: Scalar<Real = f64>>(q1: S, q2: S, z: f64, lambda2sq: f64) -> (S, S) {
    let zc = S::from_real(z);
    let r2 = q1 * q1 + q2 * q2;
    let rho = (zc * r2).exp().acosh() / S::from_real(z.sqrt());
    let two = S::from_real(2.0);
    let num = (two * zc * q1 * q1).exp() - S::one();
    let den = (two * zc * r2).exp() - S::one();
    let theta = (num / den).sqrt().asin() / S::from_real(lambda2sq.sqrt());
    (rho, theta)
}

/// Geodesic polar coordinates (ρ, θ) of q: cosh(λ₁ρ) = e^{z q²},
/// sin²(λ₂θ) = (e^{2zq₁²} − 1)/(e^{2zq²} − 1), with λ₁² = z.
pub fn to_polar(q: &[f64; 2], z: f64, lambda2sq: f64) -> Result<(f64, f64), GeomError> {
    if z <= 0.0 {
        return Err(GeomError::Branch(format!("z must be positive, got {z}")));
    }
    if lambda2sq == 0.0 {
        return Err(GeomError::ZeroLambda2);
    }
    if lambda2sq < 0.0 {
        return Err(GeomError::Branch(
            "real theta requires lambda2sq > 0".to_string(),
        ));
    }
    if q[0] == 0.0 && q[1] == 0.0 {
        return Err(GeomError::ThetaAtOrigin);
    }
    let (rho, theta) = to_polar_s(q[0], q[1], z, lambda2sq);
    Ok((rho, theta))
}

/// Inverse of [`to_polar`] on the principal branch (q₁, q₂ ≥ 0).
pub fn from_polar(rho: f64, theta: f64, z: f64, lambda2sq: f64) -> Result<[f64; 2], GeomError> {
    if z <= 0.0 {
        return Err(GeomError::Branch(format!("z must be positive, got {z}")));
    }
    if lambda2sq <= 0.0 {
        return Err(GeomError::ZeroLambda2);
    }
    let l1 = z.sqrt();
    let r2 = (l1 * rho).cosh().ln() / z;
    let s2 = (lambda2sq.sqrt() * theta).sin().powi(2);
    let q1sq = (1.0 + s2 * ((2.0 * z * r2).exp() - 1.0)).ln() / (2.0 * z);
    let q2sq = (r2 - q1sq).max(0.0);
    Ok([q1sq.sqrt(), q2sq.sqrt()])
}

/// Jacobian ∂(ρ, θ)/∂(q₁, q₂), exact via duals.
pub fn polar_jacobian(q: &[f64; 2], z: f64, lambda2sq: f64) -> Result<[[f64; 2]; 2], GeomError> {
    to_polar(q, z, lambda2sq)?; // domain checks
    let mut jac = [[0.0; 2]; 2];
    for dir in 0..2 {
        let q1 = Dual::new(q[0], if dir == 0 { 1.0 } else { 0.0 });
        let q2 = Dual::new(q[1], if dir == 1 { 1.0 } else { 0.0 });
        let (rho, theta) = to_polar_s(q1, q2, z, lambda2sq);
        jac[0][dir] = rho.eps;
        jac[1][dir] = theta.eps;
    }
    Ok(jac)
}

/// Canonical polar state: positions via [`to_polar`], momenta via the
/// point-transformation rule p_polar = (Jᵀ)⁻¹ p.
pub fn polar_canonical_state(
    s: &PhaseState,
    z: f64,
    lambda2sq: f64,
) -> Result<PhaseState, GeomError> {
    assert_eq!(s.n(), 2, "polar transform is two-dimensional");
    let q = [s.q[0], s.q[1]];
    let (rho, theta) = to_polar(&q, z, lambda2sq)?;
    let j = polar_jacobian(&q, z, lambda2sq)?;
    // solve Jᵀ P = p
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 {
        return Err(GeomError::SingularMetric);
    }
    // (Jᵀ)⁻¹ = (J⁻¹)ᵀ
    let inv = [
        [j[1][1] / det, -j[1][0] / det],
        [-j[0][1] / det, j[0][0] / det],
    ];
    let p_rho = inv[0][0] * s.p[0] + inv[0][1] * s.p[1];
    let p_theta = inv[1][0] * s.p[0] + inv[1][1] * s.p[1];
    Ok(PhaseState::new(vec![rho, theta], vec![p_rho, p_theta]).expect("finite"))
}

/// Pullback of the type-I polar metric through the polar map, expressed
/// in the q chart: g = Jᵀ diag(E, G) J.
pub fn pullback_polar_type_i(
    q: &[f64; 2],
    z: f64,
    lambda2sq: f64,
) -> Result<[[f64; 2]; 2], GeomError> {
    let (rho, theta) = to_polar(q, z, lambda2sq)?;
    let j = polar_jacobian(q, z, lambda2sq)?;
    let m = Metric2D::PolarTypeI { lambda1sq: z, lambda2sq };
    let (e, _, g) = m.components(rho, theta)?;
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = e * j[0][a] * j[0][b] + g * j[1][a] * j[1][b];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvaturePoint {
    pub q: [f64; 2],
    pub k_closed: Option<f64>,
    pub k_brioschi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub system: String,
    pub points: Vec<CurvaturePoint>,
    /// max |K_closed − K_brioschi| / (1 + |K_closed|) where a closed form
    /// is known.
    pub max_discrepancy: Option<f64>,
}

impl CurvatureReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Brioschi (and, where tagged, closed-form) curvature of a catalog
/// system at the given points.
pub fn curvature_report(
    spec: &SystemSpec,
    points: &[[f64; 2]],
) -> Result<CurvatureReport, GeomError> {
    let m = Metric2D::from_system(spec)?;
    let mut out = Vec::with_capacity(points.len());
    let mut max_disc: Option<f64> = None;
    for q in points {
        let kb = brioschi(&m, q[0], q[1])?;
        let kc = spec.known_curvature.as_ref().map(|t| t.eval(q));
        if let Some(kc) = kc {
            let d = (kc - kb).abs() / (1.0 + kc.abs());
            max_disc = Some(max_disc.map_or(d, |m| m.max(d)));
        }
        out.push(CurvaturePoint { q: *q, k_closed: kc, k_brioschi: kb });
    }
    Ok(CurvatureReport {
        system: spec.name.clone(),
        points: out,
        max_discrepancy: max_disc,
    })
}

/// CSV dump: columns q1,q2,K_closed,K_brioschi (K_closed empty when no
/// closed form is tagged).
pub fn write_curvature_csv<W: Write>(w: &mut W, report: &CurvatureReport) -> std::io::Result<()> {
    writeln!(w, "q1,q2,K_closed,K_brioschi")?;
    for p in &report.points {
        let closed = p.k_closed.map_or(String::new(), |k| format!("{k:.16e}"));
        writeln!(w, "{:.16e},{:.16e},{closed},{:.16e}", p.q[0], p.q[1], p.k_brioschi)?;
    }
    Ok(())
}

/// Interior sample points with |q_i| ∈ [0.2, 0.9], random signs.
pub fn sample_points(count: usize, seed: u64) -> Vec<[f64; 2]> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut draw = || {
                let m: f64 = rng.gen_range(0.2..0.9);
                if rng.gen::<bool>() {
                    m
                } else {
                    -m
                }
            };
            [draw(), draw()]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build, example_args, ExprArgs};
    use crate::coalgebra::Realization;

    fn classical2() -> Realization {
        Realization::classical(2, vec![0.0, 0.0]).unwrap()
    }

    fn deformed2(z: f64) -> Realization {
        Realization::deformed(2, z, vec![0.0, 0.0]).unwrap()
    }

    fn sys(name: &str, r: &Realization) -> SystemSpec {
        let (params, exprs) = example_args(name);
        build(name, &params, &exprs, r).unwrap()
    }

    fn sys_p(name: &str, pairs: &[(&str, f64)], r: &Realization) -> SystemSpec {
        let params = pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        build(name, &params, &ExprArgs::default(), r).unwrap()
    }

    #[test]
    fn euclidean_metric_is_twice_identity() {
        let s = sys("euclidean", &classical2());
        let g = extract_metric(&s, &[0.7, -0.3]).unwrap();
        assert_eq!(g, [[2.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn darboux3_metric_at_origin() {
        let s = sys_p("darboux3", &[("alpha", 1.0)], &classical2());
        let g = extract_metric(&s, &[0.0, 0.0]).unwrap();
        assert!((g[0][0] - 2.0).abs() < 1e-14);
        assert!((g[1][1] - 2.0).abs() < 1e-14);
        assert!(g[0][1].abs() < 1e-14);
    }

    #[test]
    fn type_i_metric_matches_printed_form() {
        let z = 1.0;
        let s = sys("z_type_I", &deformed2(z));
        let g = extract_metric(&s, &[1.0, 1.0]).unwrap();
        let sinhc1 = 1.0_f64.sinh();
        let e11 = 2.0 / (sinhc1 * 1.0_f64.exp());
        let e22 = 2.0 / (sinhc1 * (-1.0_f64).exp());
        assert!((g[0][0] - e11).abs() < 1e-14 * e11);
        assert!((g[1][1] - e22).abs() < 1e-14 * e22);
        assert!(g[0][1].abs() < 1e-14);
    }

    #[test]
    fn flat_metric_has_zero_curvature() {
        let s = sys("euclidean", &classical2());
        let m = Metric2D::from_system(&s).unwrap();
        for q in sample_points(10, 1) {
            assert!(brioschi(&m, q[0], q[1]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn darboux3_curvature_at_origin() {
        let s = sys_p("darboux3", &[("alpha", 1.0)], &classical2());
        let m = Metric2D::from_system(&s).unwrap();
        let k = brioschi(&m, 0.0, 0.0).unwrap();
        assert!((k + 1.0).abs() < 1e-9, "K = {k}");
    }

    #[test]
    fn tagged_systems_match_brioschi() {
        let mut cases: Vec<SystemSpec> = vec![
            sys_p("poincare", &[("kappa", 0.4)], &classical2()),
            sys_p("poincare", &[("kappa", -0.4)], &classical2()),
            sys_p("beltrami", &[("kappa", 0.4)], &classical2()),
            sys_p("beltrami", &[("kappa", -0.3)], &classical2()),
            sys_p("darboux3", &[("alpha", 1.3)], &classical2()),
            sys_p("j3sq", &[("alpha", 0.6)], &classical2()),
            sys_p("j3sq_jm", &[("alpha", 0.6)], &classical2()),
            sys("z_type_I", &deformed2(0.4)),
            sys_p("z_ms", &[("sign", 1.0)], &deformed2(0.4)),
            sys_p("z_ms", &[("sign", -1.0)], &deformed2(0.4)),
            sys_p("z_j3sq", &[("alpha", 0.6)], &deformed2(0.4)),
        ];
        cases.push(sys("z_type_I", &deformed2(-0.4)));
        let points = sample_points(10, 3);
        for spec in &cases {
            let rep = curvature_report(spec, &points).unwrap();
            let disc = rep.max_discrepancy.expect("tagged");
            assert!(
                disc <= 1e-7,
                "{} ({:?}): discrepancy {disc:.3e}\n{}",
                spec.name,
                spec.params,
                rep.to_json()
            );
        }
    }

    #[test]
    fn classical_f_curvature_closed_forms() {
        let mut params = BTreeMap::new();
        params.insert("kappa".to_string(), 0.7);
        let poincare_f = expr::parse("(1+kappa*x)^2/2").unwrap();
        for x in [0.1, 0.5, 1.0, 2.0] {
            let k = curvature_f_classical(&poincare_f, &params, x).unwrap();
            assert!((k - 0.7).abs() < 1e-12, "x={x}: K={k}");
        }
        let constant = expr::parse("3").unwrap();
        assert_eq!(curvature_f_classical(&constant, &BTreeMap::new(), 1.0).unwrap(), 0.0);

        let mut pa = BTreeMap::new();
        pa.insert("alpha".to_string(), 1.0);
        let d3 = expr::parse("1/(alpha+x)").unwrap();
        let k = curvature_f_classical(&d3, &pa, 1.0).unwrap();
        assert!((k + 0.125).abs() < 1e-14);
    }

    #[test]
    fn corrected_formula_regression_against_darboux() {
        // f = 1/(α+x) must reproduce K = −α/(α+x)³ to 1e-10 relative,
        // and Brioschi must independently agree.
        let alpha = 1.3;
        let mut pa = BTreeMap::new();
        pa.insert("alpha".to_string(), alpha);
        let f = expr::parse("1/(alpha+x)").unwrap();
        let spec = sys_p("darboux3", &[("alpha", alpha)], &classical2());
        let m = Metric2D::from_system(&spec).unwrap();
        for i in 0..20 {
            let x = 0.05 + 0.17 * i as f64;
            let expected = -alpha / (alpha + x).powi(3);
            let k = curvature_f_classical(&f, &pa, x).unwrap();
            assert!(
                (k - expected).abs() <= 1e-10 * expected.abs(),
                "x={x}: {k} vs {expected}"
            );
            // Brioschi at a point with q² = x
            let q1 = (x / 2.0).sqrt();
            let kb = brioschi(&m, q1, q1).unwrap();
            assert!((kb - expected).abs() <= 1e-8 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn deformed_f_curvature_closed_forms() {
        let none = BTreeMap::new();
        let one = expr::parse("1").unwrap();
        let ex = expr::parse("exp(x)").unwrap();
        let emx = expr::parse("exp(-x)").unwrap();
        for &z in &[0.3, 1.1] {
            for &x in &[0.1, 0.7, 1.9] {
                let k1 = curvature_f_deformed(&one, &none, x, z).unwrap();
                assert!((k1 + z * x.sinh()).abs() < 1e-12);
                let k2 = curvature_f_deformed(&ex, &none, x, z).unwrap();
                assert!((k2 - z).abs() < 1e-12);
                let k3 = curvature_f_deformed(&emx, &none, x, z).unwrap();
                assert!((k3 + z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_curvature_classification() {
        let none = BTreeMap::new();
        let xs: Vec<f64> = (1..=40).map(|i| 0.05 * i as f64).collect();
        let z = 0.6;
        let tol = 1e-9;
        let verdict = |src: &str| {
            constant_curvature_scan(&expr::parse(src).unwrap(), &none, &xs, z, tol).unwrap()
        };
        assert!(matches!(verdict("exp(x)"), CurvatureVerdict::Constant { k } if (k - z).abs() < 1e-9));
        assert!(matches!(verdict("exp(-x)"), CurvatureVerdict::Constant { k } if (k + z).abs() < 1e-9));
        assert!(matches!(verdict("1"), CurvatureVerdict::NonConstant { .. }));
        assert!(matches!(verdict("cosh(x)"), CurvatureVerdict::NonConstant { .. }));
        assert!(matches!(verdict("(1+x)^2"), CurvatureVerdict::NonConstant { .. }));
    }

    #[test]
    fn polar_round_trip() {
        let z = 0.7;
        let l2 = 1.3;
        for q in sample_points(20, 5) {
            let q = [q[0].abs(), q[1].abs()];
            let (rho, theta) = to_polar(&q, z, l2).unwrap();
            let back = from_polar(rho, theta, z, l2).unwrap();
            assert!(
                (back[0] - q[0]).abs() <= 1e-12 && (back[1] - q[1]).abs() <= 1e-12,
                "{q:?} -> ({rho},{theta}) -> {back:?}"
            );
        }
    }

    #[test]
    fn polar_domain_errors() {
        assert!(matches!(to_polar(&[0.0, 0.0], 0.5, 1.0), Err(GeomError::ThetaAtOrigin)));
        assert!(matches!(to_polar(&[0.5, 0.5], -0.5, 1.0), Err(GeomError::Branch(_))));
        assert!(matches!(to_polar(&[0.5, 0.5], 0.5, 0.0), Err(GeomError::ZeroLambda2)));
        assert_eq!(rho_of(&[0.0, 0.0], 0.5).unwrap(), 0.0);
    }

    #[test]
    fn small_z_theta_limit() {
        // sin²(λ₂θ) → q₁²/q² as z → 0
        let q = [0.6, 0.8];
        let l2 = 1.0;
        let (_, theta) = to_polar(&q, 1e-9, l2).unwrap();
        let expected = (q[0] * q[0] / (q[0] * q[0] + q[1] * q[1])).sqrt().asin();
        assert!((theta - expected).abs() < 1e-6);
    }

    #[test]
    fn pullback_matches_type_i_metric() {
        let z = 0.5;
        let l2 = 0.8;
        let spec = sys("z_type_I", &deformed2(z));
        for q in sample_points(15, 7) {
            let q = [q[0].abs(), q[1].abs()];
            let direct = extract_metric(&spec, &q).unwrap();
            let pulled = pullback_polar_type_i(&q, z, l2).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert!(
                        (direct[a][b] - pulled[a][b]).abs() <= 1e-9 * (1.0 + direct[a][b].abs()),
                        "{q:?}: {direct:?} vs {pulled:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn polar_curvature_matches_both_closed_forms() {
        let z = 0.5;
        let l2 = 0.8;
        let m = Metric2D::PolarTypeI { lambda1sq: z, lambda2sq: l2 };
        let l1 = z.sqrt();
        for q in sample_points(10, 9) {
            let q = [q[0].abs().max(0.3), q[1].abs().max(0.3)];
            let rho = rho_of(&q, z).unwrap();
            let k = brioschi(&m, rho, 0.4).unwrap();
            // chart form
            let expected_rho = -0.5 * z * (l1 * rho).sinh().powi(2) / (l1 * rho).cosh();
            assert!((k - expected_rho).abs() <= 1e-8 * (1.0 + k.abs()));
            // q-chart form
            let r2 = q[0] * q[0] + q[1] * q[1];
            let expected_q = -z * (z * r2).sinh();
            assert!((k - expected_q).abs() <= 1e-8 * (1.0 + k.abs()));
        }
    }

    #[test]
    fn ms_polar_metric_components() {
        let m = Metric2D::PolarMs { lambda1sq: 0.49, lambda2sq: 1.0 };
        let (e, f, g) = m.components(0.8_f64, 0.3).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(f, 0.0);
        let expected = (0.7_f64 * 0.8).sin().powi(2) / 0.49;
        assert!((g - expected).abs() < 1e-14);
        // λ1sq < 0 branch goes hyperbolic
        let mh = Metric2D::PolarMs { lambda1sq: -0.49, lambda2sq: 1.0 };
        let (_, _, gh) = mh.components(0.8_f64, 0.3).unwrap();
        let expected_h = (0.7_f64 * 0.8).sinh().powi(2) / 0.49;
        assert!((gh - expected_h).abs() < 1e-14);
    }

    #[test]
    fn extraction_guards() {
        // centrifugal terms rejected
        let r = Realization::classical(2, vec![1.0, 0.0]).unwrap();
        let s = sys("euclidean", &r);
        assert!(matches!(extract_metric(&s, &[0.5, 0.5]), Err(GeomError::Centrifugal)));
        // non-quadratic Hamiltonian rejected
        let mut bad = sys("euclidean", &classical2());
        bad.hamiltonian =
            Observable::parse("H", "p1^4 + p2^2", 2, BTreeMap::new()).unwrap();
        assert!(matches!(
            extract_metric(&bad, &[0.5, 0.5]),
            Err(GeomError::NonQuadratic(_))
        ));
        // wrong dimension
        let r3 = Realization::classical(3, vec![0.0; 3]).unwrap();
        let s3 = sys("euclidean", &r3);
        assert!(matches!(extract_metric(&s3, &[0.5, 0.5]), Err(GeomError::NotPlanar(3))));
    }

    #[test]
    fn canonical_polar_momenta_preserve_pairing() {
        // pᵀ dq = Pᵀ dQ: check p·δq = P·δQ for a random small displacement
        let z = 0.6;
        let l2 = 1.1;
        let s = PhaseState::new(vec![0.7, 0.5], vec![0.3, -0.9]).unwrap();
        let polar = polar_canonical_state(&s, z, l2).unwrap();
        let h = 1e-7;
        for dir in 0..2 {
            let mut q2 = [s.q[0], s.q[1]];
            q2[dir] += h;
            let (rho2, theta2) = to_polar(&q2, z, l2).unwrap();
            let dq_dot_p = s.p[dir] * h;
            let dqp = (rho2 - polar.q[0]) * polar.p[0] + (theta2 - polar.q[1]) * polar.p[1];
            assert!((dq_dot_p - dqp).abs() <= 1e-8 * (1.0 + dq_dot_p.abs()));
        }
    }

    #[test]
    fn csv_dump_has_expected_shape() {
        let spec = sys_p("darboux3", &[("alpha", 1.0)], &classical2());
        let rep = curvature_report(&spec, &[[0.3, 0.4], [0.5, 0.1]]).unwrap();
        let mut buf = Vec::new();
        write_curvature_csv(&mut buf, &rep).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "q1,q2,K_closed,K_brioschi");
        assert_eq!(lines.count(), 2);
    }
}
