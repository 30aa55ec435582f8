//! Symplectic realizations of the sl(2) Poisson algebra and its
//! non-standard deformation sl_z(2), together with Casimirs, the left and
//! right families of universal integrals, and the numerical verification
//! suites for the bracket relations and involutivity.
//!
//! Classical realization (N canonical pairs, centrifugal coefficients b_i):
//!
//! ```text
//! J- = Σ q_i²      J+ = Σ (p_i² + b_i/q_i²)      J3 = Σ q_i p_i
//! ```
//!
//! Deformed realization (deformation parameter z):
//!
//! ```text
//! J- = Σ q_i²
//! J3 = Σ sinhc(z q_i²) q_i p_i e^{z K_i}
//! J+ = Σ (sinhc(z q_i²) p_i² + b_i/(q_i² sinhc(z q_i²))) e^{z K_i}
//! K_i = −Σ_{k<i} q_k² + Σ_{l>i} q_l²
//! ```
//!
//! All sinh(z·)/z factors are written through sinhc, so z = 0 reduces
//! bit-exactly to the classical realization.

use crate::expr::{call, con, powi, sym, Ast, Func};
use crate::phase::{
    poisson_bracket, poisson_bracket_with_scale, Observable, PhaseError, PhaseState,
};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoalgError {
    #[error("realization needs N >= 1 canonical pairs")]
    BadDimension,
    #[error("integral families need N >= 2")]
    TooFewSites,
    #[error("b must have length N and finite entries")]
    BadCentrifugal,
    #[error("deformation parameter must be finite")]
    BadDeformation,
    #[error("expression references unknown symbols for this realization: {0}")]
    BadExpression(String),
    #[error(transparent)]
    Phase(#[from] PhaseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RealizationKind {
    Classical,
    Deformed,
}

/// Index-ordering convention for the K_i exponents inside right
/// sub-realizations. `OriginalOrder` keeps ascending original indices
/// (earlier indices get the minus sign); `Reversed` flips the subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RightOrdering {
    #[default]
    OriginalOrder,
    Reversed,
}

/// Binding of the abstract generators to phase-space functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub kind: RealizationKind,
    pub n: usize,
    pub z: f64,
    pub b: Vec<f64>,
}

impl Realization {
    pub fn classical(n: usize, b: Vec<f64>) -> Result<Self, CoalgError> {
        if n < 1 {
            return Err(CoalgError::BadDimension);
        }
        if b.len() != n || b.iter().any(|v| !v.is_finite()) {
            return Err(CoalgError::BadCentrifugal);
        }
        Ok(Realization { kind: RealizationKind::Classical, n, z: 0.0, b })
    }

    pub fn deformed(n: usize, z: f64, b: Vec<f64>) -> Result<Self, CoalgError> {
        if n < 1 {
            return Err(CoalgError::BadDimension);
        }
        if b.len() != n || b.iter().any(|v| !v.is_finite()) {
            return Err(CoalgError::BadCentrifugal);
        }
        if !z.is_finite() {
            return Err(CoalgError::BadDeformation);
        }
        Ok(Realization { kind: RealizationKind::Deformed, n, z, b })
    }

    /// q-indices (0-based) at which the J+ realization is singular.
    fn singular_indices(&self) -> Vec<usize> {
        self.b
            .iter()
            .enumerate()
            .filter(|(_, &bi)| bi != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Generator ASTs (Jm, Jp, J3) over the full index set.
    fn generator_asts(&self) -> (Ast, Ast, Ast) {
        let indices: Vec<usize> = (0..self.n).collect();
        match self.kind {
            RealizationKind::Classical => classical_generator_asts(&indices, &self.b),
            RealizationKind::Deformed => deformed_generator_asts(&indices, &self.b),
        }
    }
}

fn q(i: usize) -> Ast {
    sym(&format!("q{}", i + 1))
}

fn p(i: usize) -> Ast {
    sym(&format!("p{}", i + 1))
}

fn sum(terms: Vec<Ast>) -> Ast {
    let mut it = terms.into_iter();
    let first = it.next().expect("nonempty sum");
    it.fold(first, |acc, t| acc + t)
}

/// Classical generators over an index subset (0-based original indices).
fn classical_generator_asts(indices: &[usize], b: &[f64]) -> (Ast, Ast, Ast) {
    let jm = sum(indices.iter().map(|&i| powi(q(i), 2)).collect());
    let jp = sum(
        indices
            .iter()
            .map(|&i| {
                let kinetic = powi(p(i), 2);
                if b[i] != 0.0 {
                    kinetic + con(b[i]) / powi(q(i), 2)
                } else {
                    kinetic
                }
            })
            .collect(),
    );
    let j3 = sum(indices.iter().map(|&i| q(i) * p(i)).collect());
    (jm, jp, j3)
}

/// Deformed generators over an index subset, with the K_i exponents
/// recomputed inside the subset in the order given.
fn deformed_generator_asts(indices: &[usize], b: &[f64]) -> (Ast, Ast, Ast) {
    let z = || sym("z");
    let jm = sum(indices.iter().map(|&i| powi(q(i), 2)).collect());

    let k_exponent = |pos: usize| -> Option<Ast> {
        let mut terms = Vec::new();
        for (other, &idx) in indices.iter().enumerate() {
            if other < pos {
                terms.push(-powi(q(idx), 2));
            } else if other > pos {
                terms.push(powi(q(idx), 2));
            }
        }
        if terms.is_empty() {
            None
        } else {
            Some(call(Func::Exp, z() * sum(terms)))
        }
    };

    let mut jp_terms = Vec::new();
    let mut j3_terms = Vec::new();
    for (pos, &i) in indices.iter().enumerate() {
        let s = || call(Func::Sinhc, z() * powi(q(i), 2));
        let mut jp_term = s() * powi(p(i), 2);
        if b[i] != 0.0 {
            jp_term = jp_term + con(b[i]) / (powi(q(i), 2) * s());
        }
        let mut j3_term = s() * q(i) * p(i);
        if let Some(e) = k_exponent(pos) {
            jp_term = jp_term * e.clone();
            j3_term = j3_term * e;
        }
        jp_terms.push(jp_term);
        j3_terms.push(j3_term);
    }
    (jm, sum(jp_terms), sum(j3_terms))
}

/// Casimir written over the generator symbols.
fn casimir_ast(kind: RealizationKind) -> Ast {
    match kind {
        // C = J- J+ − J3²
        RealizationKind::Classical => sym("Jm") * sym("Jp") - powi(sym("J3"), 2),
        // C_z = sinh(z J-)/z · J+ − J3² = J- sinhc(z J-) J+ − J3²
        RealizationKind::Deformed => {
            sym("Jm") * call(Func::Sinhc, sym("z") * sym("Jm")) * sym("Jp")
                - powi(sym("J3"), 2)
        }
    }
}

/// Compile an expression over the generator symbols Jm, Jp, J3 (and raw
/// coordinates) into a phase-space observable under the realization.
pub fn compile_observable(
    name: &str,
    ast: &Ast,
    r: &Realization,
    extra_params: &BTreeMap<String, f64>,
) -> Result<Observable, CoalgError> {
    let (jm, jp, j3) = r.generator_asts();
    let free = crate::expr::free_symbols(ast);
    let uses_jp = free.contains("Jp");
    let mut map = BTreeMap::new();
    map.insert("Jm".to_string(), jm);
    map.insert("Jp".to_string(), jp);
    map.insert("J3".to_string(), j3);
    let substituted = crate::expr::subst(ast, &map);
    let mut params = extra_params.clone();
    if r.kind == RealizationKind::Deformed {
        params.insert("z".to_string(), r.z);
    }
    let singular = if uses_jp { r.singular_indices() } else { Vec::new() };
    Ok(Observable::from_ast(name, substituted, r.n, params)?.with_singular_q(singular))
}

/// The three generators as observables over a shared realization.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    pub jm: Observable,
    pub jp: Observable,
    pub j3: Observable,
}

pub fn make_generators(r: &Realization) -> Result<GeneratorSet, CoalgError> {
    let none = BTreeMap::new();
    Ok(GeneratorSet {
        jm: compile_observable("Jm", &sym("Jm"), r, &none)?,
        jp: compile_observable("Jp", &sym("Jp"), r, &none)?,
        j3: compile_observable("J3", &sym("J3"), r, &none)?,
    })
}

/// The Casimir function of the applicable algebra under the realization.
pub fn casimir(r: &Realization) -> Result<Observable, CoalgError> {
    compile_observable("C", &casimir_ast(r.kind), r, &BTreeMap::new())
}

/// Left (C^(m)) and right (C_(m)) families of universal integrals,
/// m = 2..N. The m = N members of both families are the same function.
#[derive(Debug, Clone)]
pub struct IntegralFamily {
    pub left: Vec<Observable>,
    pub right: Vec<Observable>,
}

impl IntegralFamily {
    /// The shared m = N member (the Casimir of the full realization, up
    /// to the additive b-constants).
    pub fn casimir_full(&self) -> &Observable {
        self.left.last().expect("nonempty family")
    }

    /// All distinct members: the full left family plus the right family
    /// without its duplicated m = N member.
    pub fn members(&self) -> impl Iterator<Item = &Observable> {
        let right_distinct = &self.right[..self.right.len().saturating_sub(1)];
        self.left.iter().chain(right_distinct.iter())
    }
}

/// Angular-momentum style integral over an index subset:
/// Σ_{i<j} [(q_i p_j − q_j p_i)² + b_i q_j²/q_i² + b_j q_i²/q_j²] + Σ b_i.
fn classical_integral_ast(indices: &[usize], b: &[f64]) -> Ast {
    let mut terms = Vec::new();
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            let mut t = powi(q(i) * p(j) - q(j) * p(i), 2);
            if b[i] != 0.0 {
                t = t + con(b[i]) * powi(q(j), 2) / powi(q(i), 2);
            }
            if b[j] != 0.0 {
                t = t + con(b[j]) * powi(q(i), 2) / powi(q(j), 2);
            }
            terms.push(t);
        }
    }
    let b_sum: f64 = indices.iter().map(|&i| b[i]).sum();
    if b_sum != 0.0 {
        terms.push(con(b_sum));
    }
    sum(terms)
}

/// Universal integrals of the classical realization.
pub fn classical_integrals(n: usize, b: &[f64]) -> Result<IntegralFamily, CoalgError> {
    if n < 2 {
        return Err(CoalgError::TooFewSites);
    }
    if b.len() != n || b.iter().any(|v| !v.is_finite()) {
        return Err(CoalgError::BadCentrifugal);
    }
    let singular: Vec<usize> = (0..n).filter(|&i| b[i] != 0.0).collect();
    let mk = |name: String, indices: &[usize]| -> Result<Observable, CoalgError> {
        let sing: Vec<usize> = indices.iter().copied().filter(|i| singular.contains(i)).collect();
        Ok(
            Observable::from_ast(&name, classical_integral_ast(indices, b), n, BTreeMap::new())?
                .with_singular_q(sing),
        )
    };
    let mut left = Vec::new();
    let mut right = Vec::new();
    for m in 2..=n {
        let li: Vec<usize> = (0..m).collect();
        let ri: Vec<usize> = (n - m..n).collect();
        left.push(mk(format!("C^({m})"), &li)?);
        right.push(mk(format!("C_({m})"), &ri)?);
    }
    Ok(IntegralFamily { left, right })
}

/// Universal integrals of the deformed realization, reconstructed as the
/// sl_z(2) Casimir evaluated on left/right sub-realizations (the K_i
/// exponents are recomputed within each index subset).
pub fn deformed_integrals(
    n: usize,
    z: f64,
    b: &[f64],
    ordering: RightOrdering,
) -> Result<IntegralFamily, CoalgError> {
    if n < 2 {
        return Err(CoalgError::TooFewSites);
    }
    if b.len() != n || b.iter().any(|v| !v.is_finite()) {
        return Err(CoalgError::BadCentrifugal);
    }
    if !z.is_finite() {
        return Err(CoalgError::BadDeformation);
    }
    let mut params = BTreeMap::new();
    params.insert("z".to_string(), z);
    let mk = |name: String, indices: &[usize]| -> Result<Observable, CoalgError> {
        let (jm, jp, j3) = deformed_generator_asts(indices, b);
        let mut map = BTreeMap::new();
        map.insert("Jm".to_string(), jm);
        map.insert("Jp".to_string(), jp);
        map.insert("J3".to_string(), j3);
        let ast = crate::expr::subst(&casimir_ast(RealizationKind::Deformed), &map);
        let sing: Vec<usize> = indices.iter().copied().filter(|&i| b[i] != 0.0).collect();
        Ok(Observable::from_ast(&name, ast, n, params.clone())?.with_singular_q(sing))
    };
    let mut left = Vec::new();
    let mut right = Vec::new();
    for m in 2..=n {
        let li: Vec<usize> = (0..m).collect();
        let mut ri: Vec<usize> = (n - m..n).collect();
        if ordering == RightOrdering::Reversed {
            ri.reverse();
        }
        left.push(mk(format!("C_z^({m})"), &li)?);
        right.push(mk(format!("C_z_({m})"), &ri)?);
    }
    Ok(IntegralFamily { left, right })
}

/// Extra integral that upgrades the deformed MS system (f = e^{z J-},
/// N = 2) to maximal superintegrability:
/// I_z = sinh(z q1²)/(2 z q1²) · e^{z q1²} · p1².
pub fn extra_integral_ms(z: f64) -> Result<Observable, CoalgError> {
    let mut params = BTreeMap::new();
    params.insert("z".to_string(), z);
    let ast = call(Func::Sinhc, sym("z") * powi(q(0), 2)) / con(2.0)
        * call(Func::Exp, sym("z") * powi(q(0), 2))
        * powi(p(0), 2);
    Ok(Observable::from_ast("I_z", ast, 2, params)?)
}

/// Draw a phase-space point clear of the q_i = 0 singular set:
/// |q_i| ∈ [0.2, 2], p_i ∈ [−2, 2].
pub fn sample_state(n: usize, rng: &mut impl Rng) -> PhaseState {
    let q: Vec<f64> = (0..n)
        .map(|_| {
            let mag: f64 = rng.gen_range(0.2..2.0);
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
    PhaseState::new(q, p).expect("sampled state is valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstSample {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
}

/// Outcome of checking one bracket relation over sampled states.
#[derive(Debug, Clone, Serialize)]
pub struct RelationReport {
    pub relation: String,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_residual: f64,
    pub worst_state: Option<WorstSample>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub tol: f64,
    pub samples: usize,
    pub relations: Vec<RelationReport>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn max_residual(&self) -> f64 {
        self.relations
            .iter()
            .map(|r| r.max_residual)
            .fold(0.0, f64::max)
    }
}

/// Scale for mixed absolute/relative residual bounds.
#[cfg(test)]
fn scale2(lhs: f64, rhs: f64) -> f64 {
    1.0 + lhs.abs().max(rhs.abs())
}

/// Residual scale for a bracket relation {f,g} = rhs: the magnitudes of
/// the bracketed observables enter alongside the bracket value itself, so
/// cancellation inside a large bracket is judged relative to its terms.
fn bracket_scale(f: f64, g: f64, lhs: f64, rhs: f64) -> f64 {
    1.0 + f.abs().max(g.abs()).max(lhs.abs()).max(rhs.abs())
}

fn check_relation<F>(
    relation: &str,
    n: usize,
    samples: usize,
    tol: f64,
    seed: u64,
    eval: F,
) -> Result<RelationReport, CoalgError>
where
    F: Fn(&PhaseState) -> Result<(f64, f64, f64), PhaseError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual = 0.0_f64;
    let mut worst: Option<WorstSample> = None;
    for _ in 0..samples {
        let s = sample_state(n, &mut rng);
        let (lhs, rhs, scale) = eval(&s)?;
        let residual = (lhs - rhs).abs() / scale;
        if residual >= max_residual {
            max_residual = residual;
            worst = Some(WorstSample {
                q: s.q.clone(),
                p: s.p.clone(),
                residual,
            });
        }
    }
    Ok(RelationReport {
        relation: relation.to_string(),
        samples,
        seed,
        tol,
        max_residual,
        worst_state: worst,
        pass: max_residual <= tol,
    })
}

/// Check the defining bracket relations of the applicable algebra plus
/// Casimir centrality at seeded random states.
pub fn verify_algebra(
    r: &Realization,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport, CoalgError> {
    let gen = make_generators(r)?;
    let cas = casimir(r)?;
    let n = r.n;
    let z = r.z;
    let deformed = r.kind == RealizationKind::Deformed;

    let mut relations = Vec::new();

    let name3p = if deformed {
        "{J3,J+} = 2 J+ cosh(z J-)"
    } else {
        "{J3,J+} = 2 J+"
    };
    relations.push(check_relation(name3p, n, samples, tol, seed, |s| {
        let lhs = poisson_bracket(&gen.j3, &gen.jp, s)?;
        let j3 = gen.j3.evaluate(s)?;
        let jp = gen.jp.evaluate(s)?;
        let rhs = if deformed {
            2.0 * jp * (z * gen.jm.evaluate(s)?).cosh()
        } else {
            2.0 * jp
        };
        Ok((lhs, rhs, bracket_scale(j3, jp, lhs, rhs)))
    })?);

    let name3m = if deformed {
        "{J3,J-} = -2 sinh(z J-)/z"
    } else {
        "{J3,J-} = -2 J-"
    };
    relations.push(check_relation(name3m, n, samples, tol, seed, |s| {
        let lhs = poisson_bracket(&gen.j3, &gen.jm, s)?;
        let j3 = gen.j3.evaluate(s)?;
        let jm = gen.jm.evaluate(s)?;
        let rhs = if deformed {
            -2.0 * jm * (z * jm).sinhc()
        } else {
            -2.0 * jm
        };
        Ok((lhs, rhs, bracket_scale(j3, jm, lhs, rhs)))
    })?);

    relations.push(check_relation("{J-,J+} = 4 J3", n, samples, tol, seed, |s| {
        let lhs = poisson_bracket(&gen.jm, &gen.jp, s)?;
        let jm = gen.jm.evaluate(s)?;
        let jp = gen.jp.evaluate(s)?;
        let rhs = 4.0 * gen.j3.evaluate(s)?;
        Ok((lhs, rhs, bracket_scale(jm, jp, lhs, rhs)))
    })?);

    for (gname, g) in [("J-", &gen.jm), ("J+", &gen.jp), ("J3", &gen.j3)] {
        relations.push(check_relation(
            &format!("{{C,{gname}}} = 0"),
            n,
            samples,
            tol,
            seed,
            |s| {
                let (lhs, mag) = poisson_bracket_with_scale(&cas, g, s)?;
                Ok((lhs, 0.0, 1.0 + mag))
            },
        )?);
    }

    let pass = relations.iter().all(|r| r.pass);
    Ok(VerificationReport { seed, tol, samples, relations, pass })
}

/// Check {H, member} = 0 for all family members and involutivity within
/// each of the left and right families.
pub fn verify_involution(
    h: &Observable,
    fam: &IntegralFamily,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport, CoalgError> {
    let n = h.n();
    let mut relations = Vec::new();
    for member in fam.members() {
        relations.push(check_relation(
            &format!("{{H,{}}} = 0", member.name()),
            n,
            samples,
            tol,
            seed,
            |s| {
                let (lhs, mag) = poisson_bracket_with_scale(h, member, s)?;
                Ok((lhs, 0.0, 1.0 + mag))
            },
        )?);
    }
    for family in [&fam.left, &fam.right] {
        for i in 0..family.len() {
            for j in i + 1..family.len() {
                relations.push(check_relation(
                    &format!("{{{},{}}} = 0", family[i].name(), family[j].name()),
                    n,
                    samples,
                    tol,
                    seed,
                    |s| {
                        let (lhs, mag) =
                            poisson_bracket_with_scale(&family[i], &family[j], s)?;
                        Ok((lhs, 0.0, 1.0 + mag))
                    },
                )?);
            }
        }
    }
    let pass = relations.iter().all(|r| r.pass);
    Ok(VerificationReport { seed, tol, samples, relations, pass })
}

/// Numerical rank of the stacked gradient matrix (rows = observables,
/// columns = the 2N phase-space partials), maximized over the states.
pub fn functional_independence(
    obs: &[&Observable],
    states: &[PhaseState],
    rank_tol: f64,
) -> Result<usize, CoalgError> {
    let mut best = 0usize;
    for s in states {
        let n = s.n();
        let mut m = DMatrix::<f64>::zeros(obs.len(), 2 * n);
        for (row, o) in obs.iter().enumerate() {
            let (dq, dp) = o.gradient(s)?;
            for i in 0..n {
                m[(row, i)] = dq[i];
                m[(row, n + i)] = dp[i];
            }
        }
        let svals = m.singular_values();
        let smax = svals.iter().fold(0.0_f64, |a, &b| a.max(b));
        if smax > 0.0 {
            let rank = svals.iter().filter(|&&s| s >= rank_tol * smax).count();
            best = best.max(rank);
        }
    }
    Ok(best)
}
