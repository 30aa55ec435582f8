//! Named constructors for the Hamiltonian systems of the sl(2) and
//! sl_z(2) families, plus generic f-family and potential builders from
//! DSL expressions.
//!
//! Each entry records its metric convention and, where a closed-form
//! Gaussian curvature is known, a tag the geometry layer uses as its
//! oracle.

use crate::coalgebra::{compile_observable, CoalgError, Realization, RealizationKind};
use crate::expr::{self, sym, Ast};
use crate::phase::Observable;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("unknown system '{name}'; available: {}", .available.join(", "))]
    UnknownSystem { name: String, available: Vec<String> },
    #[error("system '{system}' is missing parameter '{param}'")]
    MissingParam { system: String, param: String },
    #[error("system '{system}' does not take parameter '{param}'")]
    ExtraParam { system: String, param: String },
    #[error("system '{system}' requires expression argument '{arg}'")]
    MissingExpr { system: String, arg: String },
    #[error("system '{system}' does not take expression argument '{arg}'")]
    ExtraExpr { system: String, arg: String },
    #[error("system '{system}' requires a {need:?} realization")]
    WrongRealization { system: String, need: RealizationKind },
    #[error("parameter 'sign' must be +1 or -1, got {0}")]
    BadSign(f64),
    #[error("f must satisfy f(x) -> 1 as x -> 0 for deformed families; f(1e-8) = {0}")]
    BadFLimit(f64),
    #[error("bad expression argument '{arg}': {message}")]
    BadExpr { arg: String, message: String },
    #[error(transparent)]
    Coalg(#[from] CoalgError),
}

/// Normalization of the metric read off a kinetic Hamiltonian.
///
/// `Conformal` metrics carry the overall factor 2 of ds² = (2/f) dq²;
/// `Lagrangian` metrics are the plain inverse momentum Hessian (used for
/// Beltrami coordinates, whose customary metric has no factor 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Conformal,
    Lagrangian,
}

impl Convention {
    pub fn factor(self) -> f64 {
        match self {
            Convention::Conformal => 2.0,
            Convention::Lagrangian => 1.0,
        }
    }
}

/// Closed-form Gaussian curvature, where one is known, as a function of
/// the position q = (q1, q2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KnownCurvature {
    Constant(f64),
    /// K = −α/(α + q²)³
    Darboux3 { alpha: f64 },
    /// K = −2α(q1² + q2²)
    J3SqJm { alpha: f64 },
    /// K = −z sinh(z q²)
    ZTypeI { z: f64 },
    /// K = α/2 − (3α/2) cosh(2zq²) − z sinh(zq²)
    ZJ3Sq { alpha: f64, z: f64 },
}

impl KnownCurvature {
    pub fn eval(&self, q: &[f64; 2]) -> f64 {
        let r2 = q[0] * q[0] + q[1] * q[1];
        match *self {
            KnownCurvature::Constant(k) => k,
            KnownCurvature::Darboux3 { alpha } => -alpha / (alpha + r2).powi(3),
            KnownCurvature::J3SqJm { alpha } => -2.0 * alpha * r2,
            KnownCurvature::ZTypeI { z } => -z * (z * r2).sinh(),
            KnownCurvature::ZJ3Sq { alpha, z } => {
                alpha / 2.0 - 1.5 * alpha * (2.0 * z * r2).cosh() - z * (z * r2).sinh()
            }
        }
    }
}

/// A fully built system: realization plus compiled Hamiltonian.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub name: String,
    pub realization: Realization,
    pub hamiltonian: Observable,
    pub params: BTreeMap<String, f64>,
    pub metric_convention: Convention,
    /// Scale applied to the inverse momentum Hessian when reading off the
    /// metric. Equals the convention factor except for `poincare`: that
    /// Hamiltonian is twice the f-family representative f = (1+κx)²/2
    /// whose metric 2/f has curvature κ, so it needs the compensating 4.
    pub metric_factor: f64,
    pub known_curvature: Option<KnownCurvature>,
}

/// Expression arguments for the generic families, each a DSL expression;
/// single-variable ones use the symbol `x` (bound to Jm, or z·Jm for the
/// deformed families), `t` ranges over Jm, Jp, J3 directly.
#[derive(Debug, Clone, Default)]
pub struct ExprArgs {
    pub f: Option<String>,
    pub t: Option<String>,
    pub v: Option<String>,
    pub u: Option<String>,
}

/// One row of the catalog listing.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static [&'static str],
    pub exprs: &'static [&'static str],
    pub description: &'static str,
    pub realization: RealizationKind,
}

pub fn list_catalog() -> Vec<CatalogEntry> {
    use RealizationKind::*;
    vec![
        CatalogEntry {
            name: "euclidean",
            params: &[],
            exprs: &[],
            description: "free geodesic motion on flat Euclidean space, H = Jp/2",
            realization: Classical,
        },
        CatalogEntry {
            name: "poincare",
            params: &["kappa"],
            exprs: &[],
            description: "constant-curvature space K = kappa in Poincare coordinates",
            realization: Classical,
        },
        CatalogEntry {
            name: "beltrami",
            params: &["kappa"],
            exprs: &[],
            description: "constant-curvature space K = kappa in Beltrami coordinates",
            realization: Classical,
        },
        CatalogEntry {
            name: "f_family",
            params: &[],
            exprs: &["f"],
            description: "geodesic family H = f(Jm) Jp / 2 for a user expression f(x)",
            realization: Classical,
        },
        CatalogEntry {
            name: "darboux3",
            params: &["alpha"],
            exprs: &[],
            description: "Darboux space of type III, K = -alpha/(alpha+q^2)^3",
            realization: Classical,
        },
        CatalogEntry {
            name: "j3sq",
            params: &["alpha"],
            exprs: &[],
            description: "H = Jp/2 + alpha J3^2, constant curvature K = -alpha",
            realization: Classical,
        },
        CatalogEntry {
            name: "j3sq_jm",
            params: &["alpha"],
            exprs: &[],
            description: "H = Jp/2 + alpha Jm J3^2, curvature K = -2 alpha q^2",
            realization: Classical,
        },
        CatalogEntry {
            name: "potential",
            params: &[],
            exprs: &["t", "v"],
            description: "generic H = T(Jm,Jp,J3) + V(Jm) with V given as v(x)",
            realization: Classical,
        },
        CatalogEntry {
            name: "z_f_family",
            params: &[],
            exprs: &["f"],
            description: "deformed geodesic family H = Jp f(z Jm) / 2, f(0) = 1",
            realization: Deformed,
        },
        CatalogEntry {
            name: "z_type_I",
            params: &[],
            exprs: &[],
            description: "deformed free Hamiltonian H = Jp/2, K = -z sinh(z q^2)",
            realization: Deformed,
        },
        CatalogEntry {
            name: "z_ms",
            params: &["sign"],
            exprs: &[],
            description: "maximally superintegrable H = Jp exp(sign z Jm)/2, K = sign z",
            realization: Deformed,
        },
        CatalogEntry {
            name: "z_j3sq",
            params: &["alpha"],
            exprs: &[],
            description: "deformed H = Jp/2 + alpha J3^2 with nonconstant curvature",
            realization: Deformed,
        },
        CatalogEntry {
            name: "z_potential",
            params: &[],
            exprs: &["f", "u"],
            description: "deformed H = Jp f(z Jm)/2 + U(z Jm), f and u given in x",
            realization: Deformed,
        },
    ]
}

pub fn catalog_names() -> Vec<String> {
    list_catalog().iter().map(|e| e.name.to_string()).collect()
}

fn parse_expr_arg(arg: &str, src: &str) -> Result<Ast, CatalogError> {
    expr::parse(src).map_err(|e| CatalogError::BadExpr {
        arg: arg.to_string(),
        message: e.to_string(),
    })
}

/// Check lim_{x→0} f = 1 numerically, with the user's own parameters
/// bound.
fn check_f_limit(f: &Ast, params: &BTreeMap<String, f64>) -> Result<(), CatalogError> {
    let bind = |name: &str| -> Option<f64> {
        if name == "x" {
            Some(1e-8)
        } else {
            params.get(name).copied()
        }
    };
    let v = expr::eval::<f64, _>(f, &bind).map_err(|e| CatalogError::BadExpr {
        arg: "f".to_string(),
        message: e.to_string(),
    })?;
    if (v - 1.0).abs() > 1e-6 {
        return Err(CatalogError::BadFLimit(v));
    }
    Ok(())
}

/// Symbols an expression argument may reference besides user parameters.
fn expr_params(asts: &[&Ast], builtin: &[&str]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for a in asts {
        for s in expr::free_symbols(a) {
            if !builtin.contains(&s.as_str()) {
                out.insert(s);
            }
        }
    }
    out
}

pub fn build(
    name: &str,
    params: &BTreeMap<String, f64>,
    exprs: &ExprArgs,
    realization: &Realization,
) -> Result<SystemSpec, CatalogError> {
    let entry = list_catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CatalogError::UnknownSystem {
            name: name.to_string(),
            available: catalog_names(),
        })?;
    if realization.kind != entry.realization {
        return Err(CatalogError::WrongRealization {
            system: name.to_string(),
            need: entry.realization,
        });
    }

    // Expression arguments must match the entry exactly.
    let given: Vec<(&str, &Option<String>)> = vec![
        ("f", &exprs.f),
        ("t", &exprs.t),
        ("v", &exprs.v),
        ("u", &exprs.u),
    ];
    for (arg, val) in &given {
        let wanted = entry.exprs.contains(arg);
        match (wanted, val.is_some()) {
            (true, false) => {
                return Err(CatalogError::MissingExpr {
                    system: name.to_string(),
                    arg: arg.to_string(),
                })
            }
            (false, true) => {
                return Err(CatalogError::ExtraExpr {
                    system: name.to_string(),
                    arg: arg.to_string(),
                })
            }
            _ => {}
        }
    }

    let get_expr = |arg: &str| -> Result<Ast, CatalogError> {
        let src = match arg {
            "f" => exprs.f.as_deref(),
            "t" => exprs.t.as_deref(),
            "v" => exprs.v.as_deref(),
            "u" => exprs.u.as_deref(),
            _ => None,
        }
        .expect("presence validated");
        parse_expr_arg(arg, src)
    };

    // Required parameter set: fixed names plus whatever free symbols the
    // expression arguments introduce.
    let mut required: BTreeSet<String> =
        entry.params.iter().map(|s| s.to_string()).collect();
    let mut parsed_exprs: BTreeMap<&str, Ast> = BTreeMap::new();
    for arg in entry.exprs {
        let ast = get_expr(arg)?;
        let builtin: &[&str] = if *arg == "t" {
            &["Jm", "Jp", "J3"]
        } else {
            &["x"]
        };
        required.extend(expr_params(&[&ast], builtin));
        parsed_exprs.insert(arg, ast);
    }
    for key in &required {
        if !params.contains_key(key) {
            return Err(CatalogError::MissingParam {
                system: name.to_string(),
                param: key.clone(),
            });
        }
    }
    for key in params.keys() {
        if !required.contains(key) {
            return Err(CatalogError::ExtraParam {
                system: name.to_string(),
                param: key.clone(),
            });
        }
    }

    let deformed = entry.realization == RealizationKind::Deformed;
    // Variable bound into single-variable expression arguments.
    let x_binding = if deformed {
        sym("z") * sym("Jm")
    } else {
        sym("Jm")
    };
    let subst_x = |ast: &Ast| -> Ast {
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), x_binding.clone());
        expr::subst(ast, &map)
    };

    let parse_template = |src: &str| -> Ast {
        expr::parse(src).expect("catalog template parses")
    };

    let mut known = None;
    let ast = match name {
        "euclidean" => parse_template("Jp/2"),
        "poincare" => {
            known = Some(KnownCurvature::Constant(params["kappa"]));
            parse_template("(1+kappa*Jm)^2*Jp/2")
        }
        "beltrami" => {
            known = Some(KnownCurvature::Constant(params["kappa"]));
            parse_template("(1+kappa*Jm)*(Jp+kappa*J3^2)/2")
        }
        "f_family" => {
            let f = subst_x(&parsed_exprs["f"]);
            f * sym("Jp") / expr::con(2.0)
        }
        "darboux3" => {
            known = Some(KnownCurvature::Darboux3 { alpha: params["alpha"] });
            parse_template("Jp/(2*(alpha+Jm))")
        }
        "j3sq" => {
            known = Some(KnownCurvature::Constant(-params["alpha"]));
            parse_template("Jp/2 + alpha*J3^2")
        }
        "j3sq_jm" => {
            known = Some(KnownCurvature::J3SqJm { alpha: params["alpha"] });
            parse_template("Jp/2 + alpha*Jm*J3^2")
        }
        "potential" => {
            let t = parsed_exprs["t"].clone();
            let v = subst_x(&parsed_exprs["v"]);
            t + v
        }
        "z_f_family" => {
            check_f_limit(&parsed_exprs["f"], params)?;
            let f = subst_x(&parsed_exprs["f"]);
            sym("Jp") * f / expr::con(2.0)
        }
        "z_type_I" => {
            known = Some(KnownCurvature::ZTypeI { z: realization.z });
            parse_template("Jp/2")
        }
        "z_ms" => {
            let sign = params["sign"];
            if sign != 1.0 && sign != -1.0 {
                return Err(CatalogError::BadSign(sign));
            }
            known = Some(KnownCurvature::Constant(sign * realization.z));
            parse_template("Jp*exp(sign*z*Jm)/2")
        }
        "z_j3sq" => {
            known = Some(KnownCurvature::ZJ3Sq {
                alpha: params["alpha"],
                z: realization.z,
            });
            parse_template("Jp/2 + alpha*J3^2")
        }
        "z_potential" => {
            check_f_limit(&parsed_exprs["f"], params)?;
            let f = subst_x(&parsed_exprs["f"]);
            let u = subst_x(&parsed_exprs["u"]);
            sym("Jp") * f / expr::con(2.0) + u
        }
        _ => unreachable!("entry table covers all names"),
    };

    let convention = if name == "beltrami" {
        Convention::Lagrangian
    } else {
        Convention::Conformal
    };
    let metric_factor = if name == "poincare" {
        4.0
    } else {
        convention.factor()
    };
    let hamiltonian = compile_observable("H", &ast, realization, params)?;
    Ok(SystemSpec {
        name: name.to_string(),
        realization: realization.clone(),
        hamiltonian,
        params: params.clone(),
        metric_convention: convention,
        metric_factor,
        known_curvature: known,
    })
}

/// Representative parameter and expression choices for each entry, used
/// by the property suites that iterate over the whole catalog.
pub fn example_args(name: &str) -> (BTreeMap<String, f64>, ExprArgs) {
    let pm = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    };
    match name {
        "poincare" | "beltrami" => (pm(&[("kappa", 0.4)]), ExprArgs::default()),
        "darboux3" => (pm(&[("alpha", 1.3)]), ExprArgs::default()),
        "j3sq" | "j3sq_jm" | "z_j3sq" => (pm(&[("alpha", 0.6)]), ExprArgs::default()),
        "f_family" => (
            pm(&[]),
            ExprArgs { f: Some("1/(1+x^2)".to_string()), ..Default::default() },
        ),
        "potential" => (
            pm(&[("omega", 0.8)]),
            ExprArgs {
                t: Some("Jp/2".to_string()),
                v: Some("omega^2*x/2".to_string()),
                ..Default::default()
            },
        ),
        "z_f_family" => (
            pm(&[]),
            ExprArgs { f: Some("cosh(x)".to_string()), ..Default::default() },
        ),
        "z_ms" => (pm(&[("sign", 1.0)]), ExprArgs::default()),
        "z_potential" => (
            pm(&[("omega", 0.8)]),
            ExprArgs {
                f: Some("exp(x)".to_string()),
                u: Some("omega^2*x/2".to_string()),
                ..Default::default()
            },
        ),
        _ => (pm(&[]), ExprArgs::default()),
    }
}

/// Build every catalog entry valid for the realization, with the
/// [`example_args`] defaults.
pub fn build_all(r: &Realization) -> Vec<SystemSpec> {
    list_catalog()
        .into_iter()
        .filter(|e| e.realization == r.kind)
        .map(|e| {
            let (params, exprs) = example_args(e.name);
            build(e.name, &params, &exprs, r).expect("example args build")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalgebra::{
        classical_integrals, deformed_integrals, sample_state, verify_involution,
        RightOrdering,
    };
    use crate::phase::PhaseState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pm(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn st(q: &[f64], p: &[f64]) -> PhaseState {
        PhaseState::new(q.to_vec(), p.to_vec()).unwrap()
    }

    fn classical2() -> Realization {
        Realization::classical(2, vec![0.0, 0.0]).unwrap()
    }

    fn deformed2(z: f64) -> Realization {
        Realization::deformed(2, z, vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn euclidean_hamiltonian_values() {
        let s = build("euclidean", &pm(&[]), &ExprArgs::default(), &classical2()).unwrap();
        let v = s.hamiltonian.evaluate(&st(&[0.3, -0.7], &[1.0, 2.0])).unwrap();
        assert_eq!(v, 2.5);
    }

    #[test]
    fn darboux3_at_origin() {
        let s = build(
            "darboux3",
            &pm(&[("alpha", 1.0)]),
            &ExprArgs::default(),
            &classical2(),
        )
        .unwrap();
        let v = s.hamiltonian.evaluate(&st(&[0.0, 0.0], &[1.0, 1.0])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn z_ms_at_zero_deformation_equals_euclidean() {
        let e = build("euclidean", &pm(&[]), &ExprArgs::default(), &classical2()).unwrap();
        let m = build(
            "z_ms",
            &pm(&[("sign", 1.0)]),
            &ExprArgs::default(),
            &deformed2(0.0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let s = sample_state(2, &mut rng);
            let a = e.hamiltonian.evaluate(&s).unwrap();
            let b = m.hamiltonian.evaluate(&s).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn unknown_name_lists_catalog() {
        let err = build("bogus", &pm(&[]), &ExprArgs::default(), &classical2()).unwrap_err();
        match err {
            CatalogError::UnknownSystem { available, .. } => {
                assert!(available.contains(&"darboux3".to_string()));
                assert!(available.contains(&"z_type_I".to_string()));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn param_validation() {
        assert!(matches!(
            build("poincare", &pm(&[]), &ExprArgs::default(), &classical2()),
            Err(CatalogError::MissingParam { .. })
        ));
        assert!(matches!(
            build(
                "euclidean",
                &pm(&[("kappa", 1.0)]),
                &ExprArgs::default(),
                &classical2()
            ),
            Err(CatalogError::ExtraParam { .. })
        ));
        assert!(matches!(
            build("z_type_I", &pm(&[]), &ExprArgs::default(), &classical2()),
            Err(CatalogError::WrongRealization { .. })
        ));
        assert!(matches!(
            build("euclidean", &pm(&[]), &ExprArgs::default(), &deformed2(0.1)),
            Err(CatalogError::WrongRealization { .. })
        ));
        assert!(matches!(
            build(
                "z_ms",
                &pm(&[("sign", 0.5)]),
                &ExprArgs::default(),
                &deformed2(0.1)
            ),
            Err(CatalogError::BadSign(_))
        ));
    }

    #[test]
    fn f_family_with_parameterized_expression() {
        let args = ExprArgs { f: Some("(1+kappa*x)^2".to_string()), ..Default::default() };
        // kappa appears in f, so it becomes a required parameter
        assert!(matches!(
            build("f_family", &pm(&[]), &args, &classical2()),
            Err(CatalogError::MissingParam { .. })
        ));
        let s = build("f_family", &pm(&[("kappa", 0.7)]), &args, &classical2()).unwrap();
        let p = build(
            "poincare",
            &pm(&[("kappa", 0.7)]),
            &ExprArgs::default(),
            &classical2(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let state = sample_state(2, &mut rng);
            let a = s.hamiltonian.evaluate(&state).unwrap();
            let b = p.hamiltonian.evaluate(&state).unwrap();
            assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn deformed_f_limit_enforced() {
        let bad = ExprArgs { f: Some("1+x+1".to_string()), ..Default::default() };
        assert!(matches!(
            build("z_f_family", &pm(&[]), &bad, &deformed2(0.3)),
            Err(CatalogError::BadFLimit(_))
        ));
        let good = ExprArgs { f: Some("exp(x)".to_string()), ..Default::default() };
        assert!(build("z_f_family", &pm(&[]), &good, &deformed2(0.3)).is_ok());
    }

    #[test]
    fn missing_and_extra_expression_arguments() {
        assert!(matches!(
            build("f_family", &pm(&[]), &ExprArgs::default(), &classical2()),
            Err(CatalogError::MissingExpr { .. })
        ));
        let extra = ExprArgs { f: Some("1".to_string()), ..Default::default() };
        assert!(matches!(
            build("euclidean", &pm(&[]), &extra, &classical2()),
            Err(CatalogError::ExtraExpr { .. })
        ));
    }

    #[test]
    fn listing_is_complete_and_described() {
        let entries = list_catalog();
        assert_eq!(entries.len(), 13);
        let d3 = entries.iter().find(|e| e.name == "darboux3").unwrap();
        assert_eq!(d3.params, &["alpha"]);
        let zt = entries.iter().find(|e| e.name == "z_type_I").unwrap();
        assert_eq!(zt.realization, RealizationKind::Deformed);
        for e in &entries {
            assert!(!e.description.is_empty());
        }
    }

    #[test]
    fn classical_entries_pass_involution() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in [2usize, 3] {
            for b in [vec![0.0; n], (0..n).map(|_| rng.gen_range(0.0..2.0)).collect()] {
                let r = Realization::classical(n, b.clone()).unwrap();
                let fam = classical_integrals(n, &b).unwrap();
                for s in build_all(&r) {
                    let rep = verify_involution(&s.hamiltonian, &fam, 30, 1e-9, 42).unwrap();
                    assert!(rep.pass, "{} N={n}: {}", s.name, rep.to_json());
                }
            }
        }
    }

    #[test]
    fn deformed_entries_pass_involution() {
        for n in [2usize, 3] {
            let z = 0.3;
            let r = Realization::deformed(n, z, vec![0.0; n]).unwrap();
            let fam = deformed_integrals(n, z, &r.b, RightOrdering::OriginalOrder).unwrap();
            for s in build_all(&r) {
                let rep = verify_involution(&s.hamiltonian, &fam, 30, 1e-9, 42).unwrap();
                assert!(rep.pass, "{} N={n}: {}", s.name, rep.to_json());
            }
        }
    }

    #[test]
    fn small_z_limits_match_classical_counterparts() {
        // z_type_I -> euclidean, z_ms -> euclidean, z_j3sq -> j3sq
        let z = 1e-7;
        let rc = classical2();
        let rd = deformed2(z);
        let cases: Vec<(SystemSpec, SystemSpec)> = vec![
            (
                build("z_type_I", &pm(&[]), &ExprArgs::default(), &rd).unwrap(),
                build("euclidean", &pm(&[]), &ExprArgs::default(), &rc).unwrap(),
            ),
            (
                build("z_ms", &pm(&[("sign", -1.0)]), &ExprArgs::default(), &rd).unwrap(),
                build("euclidean", &pm(&[]), &ExprArgs::default(), &rc).unwrap(),
            ),
            (
                build("z_j3sq", &pm(&[("alpha", 0.6)]), &ExprArgs::default(), &rd).unwrap(),
                build("j3sq", &pm(&[("alpha", 0.6)]), &ExprArgs::default(), &rc).unwrap(),
            ),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let s = sample_state(2, &mut rng);
            for (d, c) in &cases {
                let vd = d.hamiltonian.evaluate(&s).unwrap();
                let vc = c.hamiltonian.evaluate(&s).unwrap();
                assert!(
                    (vd - vc).abs() <= 1e-4 * (1.0 + vc.abs()),
                    "{}: {vd} vs {vc}",
                    d.name
                );
            }
        }
    }
}
