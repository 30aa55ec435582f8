//! Phase space: canonical state, compiled observables, exact derivatives
//! and the canonical Poisson bracket.
//!
//! All derivatives come from the dual-number tower in [`crate::scalar`];
//! no finite differences are used outside test oracles.

use crate::expr::{self, Ast, EvalError};
use crate::scalar::{Dual, Scalar};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhaseError {
    #[error("state vectors must be equal-length, nonempty and finite")]
    BadState,
    #[error("dimension mismatch: observable over {expected} canonical pairs, state has {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("singular point: q{index} = 0 with a nonzero centrifugal coefficient")]
    Singular { index: usize },
    #[error("symbols not recognized as coordinates or parameters: {}", .0.join(", "))]
    UnknownSymbols(Vec<String>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// N pairs of canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, PhaseError> {
        if q.is_empty() || q.len() != p.len() {
            return Err(PhaseError::BadState);
        }
        if q.iter().chain(p.iter()).any(|v| !v.is_finite()) {
            return Err(PhaseError::BadState);
        }
        Ok(PhaseState { q, p })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }
}

/// Parse `q3`/`p3` style coordinate names into a 0-based index.
fn coord_index(name: &str, prefix: char, n: usize) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let i: usize = rest.parse().ok()?;
    if i >= 1 && i <= n {
        Some(i - 1)
    } else {
        None
    }
}

/// A phase-space function: an expression over raw canonical coordinates
/// `q1..qN`, `p1..pN` and numeric parameters, evaluable with any scalar
/// kind of the tower.
#[derive(Debug, Clone)]
pub struct Observable {
    name: String,
    ast: Ast,
    params: BTreeMap<String, f64>,
    n: usize,
    /// 0-based q-indices that must stay away from zero (centrifugal terms).
    singular_q: Vec<usize>,
}

impl Observable {
    pub fn from_ast(
        name: &str,
        ast: Ast,
        n: usize,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, PhaseError> {
        let unknown: Vec<String> = expr::free_symbols(&ast)
            .into_iter()
            .filter(|s| {
                coord_index(s, 'q', n).is_none()
                    && coord_index(s, 'p', n).is_none()
                    && !params.contains_key(s)
            })
            .collect();
        if !unknown.is_empty() {
            return Err(PhaseError::UnknownSymbols(unknown));
        }
        Ok(Observable {
            name: name.to_string(),
            ast,
            params,
            n,
            singular_q: Vec::new(),
        })
    }

    pub fn parse(
        name: &str,
        source: &str,
        n: usize,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, PhaseError> {
        let ast = expr::parse(source)
            .map_err(|e| PhaseError::UnknownSymbols(vec![e.to_string()]))?;
        Self::from_ast(name, ast, n, params)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Mark q-indices (0-based) at which the observable is singular.
    pub fn with_singular_q(mut self, indices: Vec<usize>) -> Self {
        self.singular_q = indices;
        self
    }

    pub fn singular_q(&self) -> &[usize] {
        &self.singular_q
    }

    /// Evaluate with arbitrary scalar kind; `q` and `p` must have length N.
    pub fn eval_at<S: Scalar<Real = f64>>(&self, q: &[S], p: &[S]) -> Result<S, PhaseError> {
        if q.len() != self.n || p.len() != self.n {
            return Err(PhaseError::DimMismatch {
                expected: self.n,
                got: q.len(),
            });
        }
        for &i in &self.singular_q {
            if q[i].re() == 0.0 {
                return Err(PhaseError::Singular { index: i + 1 });
            }
        }
        let bind = |name: &str| -> Option<S> {
            if let Some(v) = self.params.get(name) {
                return Some(S::from_real(*v));
            }
            if let Some(i) = coord_index(name, 'q', self.n) {
                return Some(q[i]);
            }
            if let Some(i) = coord_index(name, 'p', self.n) {
                return Some(p[i]);
            }
            None
        };
        expr::eval(&self.ast, &bind).map_err(Into::into)
    }

    /// Value at a phase-space point.
    pub fn evaluate(&self, s: &PhaseState) -> Result<f64, PhaseError> {
        self.eval_at(&s.q, &s.p)
    }

    /// Exact partial derivatives (∂/∂q_i, ∂/∂p_i) via dual evaluation.
    pub fn gradient(&self, s: &PhaseState) -> Result<(Vec<f64>, Vec<f64>), PhaseError> {
        let n = self.n;
        if s.n() != n {
            return Err(PhaseError::DimMismatch { expected: n, got: s.n() });
        }
        let mut dq = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for dir in 0..2 * n {
            let q: Vec<Dual<f64>> = (0..n)
                .map(|i| Dual::new(s.q[i], if dir == i { 1.0 } else { 0.0 }))
                .collect();
            let p: Vec<Dual<f64>> = (0..n)
                .map(|i| Dual::new(s.p[i], if dir == n + i { 1.0 } else { 0.0 }))
                .collect();
            let v = self.eval_at(&q, &p)?;
            if dir < n {
                dq[dir] = v.eps;
            } else {
                dp[dir - n] = v.eps;
            }
        }
        Ok((dq, dp))
    }

    /// Symmetric matrix of second momentum derivatives ∂²/∂p_i∂p_j.
    pub fn hessian_pp(&self, s: &PhaseState) -> Result<Vec<Vec<f64>>, PhaseError> {
        let q: Vec<f64> = s.q.clone();
        let p: Vec<f64> = s.p.clone();
        self.hessian_pp_at(&q, &p)
    }

    /// Generic second momentum derivatives; `S` may carry its own
    /// derivative channels (used for curvature, where the metric must be
    /// differentiated with respect to q).
    pub fn hessian_pp_at<S: Scalar<Real = f64>>(
        &self,
        q: &[S],
        p: &[S],
    ) -> Result<Vec<Vec<S>>, PhaseError> {
        let n = self.n;
        let mut h = vec![vec![S::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let ql: Vec<Dual<Dual<S>>> = q
                    .iter()
                    .map(|&v| Dual::con(Dual::con(v)))
                    .collect();
                let pl: Vec<Dual<Dual<S>>> = (0..n)
                    .map(|k| {
                        Dual::new(
                            Dual::new(p[k], if k == j { S::one() } else { S::zero() }),
                            Dual::con(if k == i { S::one() } else { S::zero() }),
                        )
                    })
                    .collect();
                let v = self.eval_at(&ql, &pl)?;
                h[i][j] = v.eps.eps;
                h[j][i] = v.eps.eps;
            }
        }
        Ok(h)
    }

    /// Largest third momentum derivative |∂³/∂p_i∂p_j∂p_k| over all index
    /// triples; zero for Hamiltonians quadratic in the momenta.
    pub fn max_third_pp(&self, s: &PhaseState) -> Result<f64, PhaseError> {
        type D3 = Dual<Dual<Dual<f64>>>;
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let q: Vec<D3> = s.q.iter().map(|&v| {
                        Dual::con(Dual::con(Dual::con(v)))
                    }).collect();
                    let p: Vec<D3> = (0..n)
                        .map(|m| {
                            let seed3 = if m == k { 1.0 } else { 0.0 };
                            let seed2 = if m == j { 1.0 } else { 0.0 };
                            let seed1 = if m == i { 1.0 } else { 0.0 };
                            Dual::new(
                                Dual::new(
                                    Dual::new(s.p[m], seed3),
                                    Dual::new(seed2, 0.0),
                                ),
                                Dual::new(Dual::new(seed1, 0.0), Dual::new(0.0, 0.0)),
                            )
                        })
                        .collect();
                    let v = self.eval_at(&q, &p)?;
                    worst = worst.max(v.eps.eps.eps.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Canonical Poisson bracket {f, g} = Σ_i ∂f/∂q_i ∂g/∂p_i − ∂f/∂p_i ∂g/∂q_i
/// from exact gradients.
pub fn poisson_bracket(
    f: &Observable,
    g: &Observable,
    s: &PhaseState,
) -> Result<f64, PhaseError> {
    let (fq, fp) = f.gradient(s)?;
    let (gq, gp) = g.gradient(s)?;
    let mut acc = 0.0;
    for i in 0..s.n() {
        acc += fq[i] * gp[i] - fp[i] * gq[i];
    }
    Ok(acc)
}

/// Poisson bracket together with the sum of the magnitudes of its terms
/// before cancellation. The second value is the natural scale for judging
/// whether a bracket is numerically zero: rounding alone leaves a residual
/// proportional to it.
pub fn poisson_bracket_with_scale(
    f: &Observable,
    g: &Observable,
    s: &PhaseState,
) -> Result<(f64, f64), PhaseError> {
    let (fq, fp) = f.gradient(s)?;
    let (gq, gp) = g.gradient(s)?;
    let mut acc = 0.0;
    let mut mag = 0.0;
    for i in 0..s.n() {
        acc += fq[i] * gp[i] - fp[i] * gq[i];
        mag += (fq[i] * gp[i]).abs() + (fp[i] * gq[i]).abs();
    }
    Ok((acc, mag))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn raw(name: &str, src: &str, n: usize) -> Observable {
        Observable::parse(name, src, n, BTreeMap::new()).unwrap()
    }

    fn st(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn evaluates_raw_product() {
        let obs = raw("qp", "q1*p1", 1);
        assert_eq!(obs.evaluate(&st(&[2.0], &[3.0])).unwrap(), 6.0);
    }

    #[test]
    fn gradient_of_square() {
        let obs = raw("qsq", "q1^2", 1);
        let (dq, dp) = obs.gradient(&st(&[3.0], &[0.0])).unwrap();
        assert_eq!(dq, vec![6.0]);
        assert_eq!(dp, vec![0.0]);
    }

    #[test]
    fn gradient_of_j3_by_hand() {
        // J3 = q1 p1 + q2 p2: dq = p, dp = q
        let obs = raw("J3", "q1*p1+q2*p2", 2);
        let s = st(&[1.0, 2.0], &[0.5, -1.0]);
        let (dq, dp) = obs.gradient(&s).unwrap();
        assert_eq!(dq, vec![0.5, -1.0]);
        assert_eq!(dp, vec![1.0, 2.0]);
    }

    #[test]
    fn hessian_of_free_hamiltonian_is_identity() {
        let obs = raw("H", "p1^2/2 + p2^2/2", 2);
        let h = obs.hessian_pp(&st(&[0.3, 0.4], &[0.1, 0.2])).unwrap();
        assert_eq!(h[0][0], 1.0);
        assert_eq!(h[1][1], 1.0);
        assert_eq!(h[0][1], 0.0);
    }

    #[test]
    fn hessian_of_j3_squared_hamiltonian() {
        // H = (p1^2+p2^2)/2 + (q1 p1 + q2 p2)^2 at q=(1,0):
        // d2H/dp2 = I + 2 q qT = diag(3, 1)
        let obs = raw("H", "(p1^2+p2^2)/2 + (q1*p1+q2*p2)^2", 2);
        let h = obs.hessian_pp(&st(&[1.0, 0.0], &[0.7, -0.2])).unwrap();
        assert!((h[0][0] - 3.0).abs() < 1e-14);
        assert!((h[1][1] - 1.0).abs() < 1e-14);
        assert!(h[0][1].abs() < 1e-14);
    }

    #[test]
    fn canonical_pair_brackets_to_one() {
        let q1 = raw("q1", "q1", 1);
        let p1 = raw("p1", "p1", 1);
        assert_eq!(poisson_bracket(&q1, &p1, &st(&[0.3], &[0.9])).unwrap(), 1.0);
    }

    #[test]
    fn bracket_with_self_vanishes() {
        let f = raw("f", "q1^2*p1 + sinh(q2)*p2^2", 2);
        let s = st(&[0.4, 1.1], &[-0.3, 0.8]);
        assert_eq!(poisson_bracket(&f, &f, &s).unwrap(), 0.0);
    }

    #[test]
    fn antisymmetry_is_exact() {
        let f = raw("f", "exp(q1)*p1^2 + q2*p2", 2);
        let g = raw("g", "q1*q2 + tanh(p1)", 2);
        let s = st(&[0.5, -0.7], &[1.2, 0.3]);
        let fg = poisson_bracket(&f, &g, &s).unwrap();
        let gf = poisson_bracket(&g, &f, &s).unwrap();
        assert!((fg + gf).abs() <= 1e-14 * (1.0 + fg.abs()));
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_states() {
        let obs = raw(
            "H",
            "(1+0.3*(q1^2+q2^2))^2*(p1^2+p2^2)/2 + sinh(q1*p2)",
            2,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let q: Vec<f64> = (0..2)
                .map(|_| {
                    let m: f64 = rng.gen_range(0.2..2.0);
                    if rng.gen::<bool>() { m } else { -m }
                })
                .collect();
            let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = PhaseState::new(q, p).unwrap();
            let (dq, dp) = obs.gradient(&s).unwrap();
            let (fq, fp) = fd_gradient(&obs, &s);
            for i in 0..2 {
                assert!((dq[i] - fq[i]).abs() <= 1e-6 * (1.0 + fq[i].abs()));
                assert!((dp[i] - fp[i]).abs() <= 1e-6 * (1.0 + fp[i].abs()));
            }
        }
    }

    #[test]
    fn leibniz_rule_holds() {
        let f = raw("f", "q1*p1^2 + cosh(q2)", 2);
        let g = raw("g", "q2^2*p2", 2);
        let h = raw("h", "sinh(q1)+p1*p2", 2);
        let gh = raw("gh", "(q2^2*p2)*(sinh(q1)+p1*p2)", 2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q: Vec<f64> = (0..2)
                .map(|_| {
                    let m: f64 = rng.gen_range(0.2..2.0);
                    if rng.gen::<bool>() { m } else { -m }
                })
                .collect();
            let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = PhaseState::new(q, p).unwrap();
            let lhs = poisson_bracket(&f, &gh, &s).unwrap();
            let gv = g.evaluate(&s).unwrap();
            let hv = h.evaluate(&s).unwrap();
            let rhs = gv * poisson_bracket(&f, &h, &s).unwrap()
                + hv * poisson_bracket(&f, &g, &s).unwrap();
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn bracket_matches_fd_oracle() {
        let f = raw("f", "q1^2+q2^2", 2);
        let g = raw("g", "q1*p1+q2*p2", 2);
        let s = st(&[1.0, 2.0], &[0.5, -1.0]);
        let exact = poisson_bracket(&f, &g, &s).unwrap();
        let approx = fd_bracket(&f, &g, &s);
        assert!((exact - approx).abs() < 1e-6);
        // {Jm, J3} = 2 Jm
        assert!((exact - 2.0 * 5.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_symbols_rejected_at_construction() {
        let err = Observable::parse("bad", "q1*bogus", 1, BTreeMap::new()).unwrap_err();
        match err {
            PhaseError::UnknownSymbols(names) => assert_eq!(names, vec!["bogus".to_string()]),
            other => panic!("unexpected: {other:?}"),
        }
        // q3 out of range for n = 2
        assert!(Observable::parse("bad", "q3", 2, BTreeMap::new()).is_err());
    }

    #[test]
    fn singular_point_reports_coordinate() {
        let obs = raw("Jp", "p1^2 + 1/q1^2", 1).with_singular_q(vec![0]);
        match obs.evaluate(&st(&[0.0], &[1.0])).unwrap_err() {
            PhaseError::Singular { index } => assert_eq!(index, 1),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn state_validation() {
        assert!(PhaseState::new(vec![], vec![]).is_err());
        assert!(PhaseState::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(PhaseState::new(vec![f64::NAN], vec![0.0]).is_err());
    }
}
