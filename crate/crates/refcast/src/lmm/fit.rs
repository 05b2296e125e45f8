//! Profiled maximum-likelihood and REML estimation for the single
//! random-intercept model, plus prediction from a fitted model.
//!
//! With one variance component the covariance structure is block diagonal
//! and the likelihood profiles down to a one-dimensional function of the
//! variance ratio λ = σ²_group / σ²_resid: for each group j of size m_j,
//! W_j⁻¹ = I − (λ/(1+λm_j))·11ᵀ and ln|W_j| = ln(1+λm_j), so each criterion
//! evaluation costs one p×p solve. λ is located by a coarse doubling grid,
//! then bisection on the analytic derivative of the profiled criterion
//! (machine-precision argmin; value-comparison searches stall at the
//! square-root-of-epsilon jitter floor), with golden section as a fallback
//! when the derivative does not bracket a sign change, and a
//! boundary-at-zero safeguard so flat or boundary cases return exactly 0.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Dyn};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::Transformation;

use super::{Design, FittedModel, Method, TermKind};

/// Golden-section convergence tolerance in λ (relative above λ = 1).
const LAMBDA_TOL: f64 = 1e-10;
/// Iteration cap for the refinement stage.
const MAX_ITERATIONS: usize = 200;

/// Per-group sufficient statistics; everything a criterion evaluation needs.
struct GroupBlocks {
    labels: Vec<String>,
    xtx: Vec<DMatrix<f64>>,
    sx: Vec<DVector<f64>>,
    xty: Vec<DVector<f64>>,
    sy: Vec<f64>,
    yty: Vec<f64>,
    sizes: Vec<f64>,
    row_block: Vec<usize>,
    n: usize,
    p: usize,
}

impl GroupBlocks {
    fn new(design: &Design) -> GroupBlocks {
        let n = design.y.len();
        let p = design.x.ncols();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut blocks = GroupBlocks {
            labels: Vec::new(),
            xtx: Vec::new(),
            sx: Vec::new(),
            xty: Vec::new(),
            sy: Vec::new(),
            yty: Vec::new(),
            sizes: Vec::new(),
            row_block: Vec::with_capacity(n),
            n,
            p,
        };
        for i in 0..n {
            let label = design.groups[i].as_str();
            let j = match index.get(label) {
                Some(&j) => j,
                None => {
                    let j = blocks.labels.len();
                    index.insert(label, j);
                    blocks.labels.push(label.to_string());
                    blocks.xtx.push(DMatrix::zeros(p, p));
                    blocks.sx.push(DVector::zeros(p));
                    blocks.xty.push(DVector::zeros(p));
                    blocks.sy.push(0.0);
                    blocks.yty.push(0.0);
                    blocks.sizes.push(0.0);
                    j
                }
            };
            let xi = design.x.row(i).transpose();
            let yi = design.y[i];
            blocks.xtx[j].ger(1.0, &xi, &xi, 1.0);
            blocks.sx[j] += &xi;
            blocks.xty[j].axpy(yi, &xi, 1.0);
            blocks.sy[j] += yi;
            blocks.yty[j] += yi * yi;
            blocks.sizes[j] += 1.0;
            blocks.row_block.push(j);
        }
        blocks
    }

    fn g(&self) -> usize {
        self.labels.len()
    }
}

/// One evaluation of the profiled criterion at a fixed λ.
struct Eval {
    /// −2 × (restricted) log-likelihood with σ² profiled out.
    m2l: f64,
    beta: DVector<f64>,
    /// Cholesky factor of XᵀW⁻¹X, kept for the covariance.
    chol: nalgebra::Cholesky<f64, Dyn>,
    /// rᵀW⁻¹r at the GLS solution.
    rwr: f64,
}

fn evaluate(blocks: &GroupBlocks, method: Method, lambda: f64) -> Result<Eval> {
    let p = blocks.p;
    let mut a = DMatrix::zeros(p, p);
    let mut b = DVector::zeros(p);
    let mut q = 0.0;
    let mut lnw = 0.0;
    for j in 0..blocks.g() {
        let m = blocks.sizes[j];
        let c = lambda / (1.0 + lambda * m);
        a += &blocks.xtx[j];
        a.ger(-c, &blocks.sx[j], &blocks.sx[j], 1.0);
        b.axpy(1.0, &blocks.xty[j], 1.0);
        b.axpy(-c * blocks.sy[j], &blocks.sx[j], 1.0);
        q += blocks.yty[j] - c * blocks.sy[j] * blocks.sy[j];
        lnw += (1.0 + lambda * m).ln();
    }
    let chol = nalgebra::Cholesky::new(a).ok_or_else(|| {
        Error::numeric(format!(
            "profiled normal equations are singular at lambda = {lambda}"
        ))
    })?;
    let beta = chol.solve(&b);
    let rwr = (q - beta.dot(&b)).max(1e-300);
    let n = blocks.n as f64;
    let pf = p as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let m2l = match method {
        Method::Reml => {
            let df = n - pf;
            let l = chol.l();
            let lndet_a: f64 = 2.0 * (0..p).map(|i| l[(i, i)].ln()).sum::<f64>();
            df * ((tau * rwr / df).ln() + 1.0) + lnw + lndet_a
        }
        Method::Ml => n * ((tau * rwr / n).ln() + 1.0) + lnw,
    };
    Ok(Eval {
        m2l,
        beta,
        chol,
        rwr,
    })
}

/// Analytic dm2l/dλ of the profiled criterion, using the β and Cholesky
/// factor already computed at the same λ.
///
/// By the envelope theorem the β-dependence contributes nothing, leaving
/// d(rᵀW⁻¹r)/dλ = −Σ_j (S_yj − βᵀS_xj)²/(1+λm_j)², d(ln|W|)/dλ =
/// Σ_j m_j/(1+λm_j), and for REML the extra d(ln|XᵀW⁻¹X|)/dλ =
/// −Σ_j S_xjᵀ(XᵀW⁻¹X)⁻¹S_xj/(1+λm_j)².
fn derivative(blocks: &GroupBlocks, method: Method, lambda: f64, eval: &Eval) -> f64 {
    let mut rwr_p = 0.0;
    let mut lnw_p = 0.0;
    let mut lndet_p = 0.0;
    for j in 0..blocks.g() {
        let m = blocks.sizes[j];
        let denom = 1.0 + lambda * m;
        let cp = 1.0 / (denom * denom);
        let u = blocks.sy[j] - eval.beta.dot(&blocks.sx[j]);
        rwr_p -= cp * u * u;
        lnw_p += m / denom;
        if method == Method::Reml {
            let solved = eval.chol.solve(&blocks.sx[j]);
            lndet_p -= cp * blocks.sx[j].dot(&solved);
        }
    }
    let n = blocks.n as f64;
    let scale = match method {
        Method::Reml => n - blocks.p as f64,
        Method::Ml => n,
    };
    scale * rwr_p / eval.rwr + lnw_p + lndet_p
}

/// Locates the criterion minimum over λ ≥ 0: coarse doubling grid, then
/// derivative-sign bisection in the bracketing interval (falling back to
/// golden section when the derivative has one sign across the bracket),
/// then a boundary-at-zero safeguard so flat or boundary cases return
/// exactly 0.
fn optimize(blocks: &GroupBlocks, method: Method) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut trace: Vec<(f64, f64)> = Vec::new();
    let value_at = |lam: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let v = evaluate(blocks, method, lam)?.m2l;
        trace.push((lam, v));
        Ok(v)
    };

    let mut grid = vec![0.0];
    grid.extend((-20..=40).map(|k| 2f64.powi(k)));
    let mut best = 0usize;
    let mut best_value = f64::INFINITY;
    for (i, &lam) in grid.iter().enumerate() {
        let v = value_at(lam, &mut trace)?;
        if v < best_value {
            best = i;
            best_value = v;
        }
    }
    let value_at_zero = trace[0].1;

    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = if best + 1 < grid.len() {
        grid[best + 1]
    } else {
        grid[best] * 2.0
    };

    let deriv_at = |lam: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64> {
        let e = evaluate(blocks, method, lam)?;
        trace.push((lam, e.m2l));
        Ok(derivative(blocks, method, lam, &e))
    };

    // Derivative-sign bisection: value comparisons cannot localize an argmin
    // more tightly than the jitter floor √(ε·|criterion| / curvature), but
    // the analytic slope crosses zero cleanly and bisects to full precision.
    let d_lo = deriv_at(lo, &mut trace)?;
    let refined: Option<f64> = if lo == 0.0 && d_lo >= 0.0 {
        // rising from the left boundary: the minimum is at zero itself
        Some(0.0)
    } else if d_lo < 0.0 && deriv_at(hi, &mut trace)? > 0.0 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..MAX_ITERATIONS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b || b - a <= 1e-15 * (1.0 + a) {
                break;
            }
            if deriv_at(mid, &mut trace)? < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Some(0.5 * (a + b))
    } else {
        // slope does not bracket a sign change (flat stretch or grid-edge
        // noise): fall back to golden section on values
        None
    };

    let mut lambda;
    if let Some(lam) = refined {
        lambda = lam;
    } else {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (lo, hi);
        let mut c = b - inv_phi * (b - a);
        let mut d = a + inv_phi * (b - a);
        let mut fc = value_at(c, &mut trace)?;
        let mut fd = value_at(d, &mut trace)?;
        let mut iterations = 0usize;
        while b - a > LAMBDA_TOL * (1.0 + a.abs()) {
            iterations += 1;
            if iterations > MAX_ITERATIONS {
                let tail: Vec<String> = trace
                    .iter()
                    .rev()
                    .take(6)
                    .map(|(l, v)| format!("lambda {l:.6e} -> {v:.10}"))
                    .collect();
                return Err(Error::numeric(format!(
                    "variance-ratio search did not converge after {MAX_ITERATIONS} iterations; \
                     last evaluations: {}",
                    tail.join("; ")
                )));
            }
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = value_at(c, &mut trace)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = value_at(d, &mut trace)?;
            }
        }
        lambda = 0.5 * (a + b);
    }
    let mut value = value_at(lambda, &mut trace)?;

    // boundary safeguard: never return a positive ratio that the
    // zero-variance model matches or beats
    if value_at_zero <= value {
        lambda = 0.0;
        value = value_at_zero;
    }

    // local-optimum sanity: the criterion at the returned ratio must not
    // exceed its value at 0 or at 10× the ratio
    let slack = 1e-7 * (1.0 + value.abs());
    let probe = if lambda > 0.0 { 10.0 * lambda } else { 1.0 };
    let probe_value = value_at(probe, &mut trace)?;
    if value > value_at_zero + slack || value > probe_value + slack {
        let tail: Vec<String> = trace
            .iter()
            .rev()
            .take(6)
            .map(|(l, v)| format!("lambda {l:.6e} -> {v:.10}"))
            .collect();
        return Err(Error::numeric(format!(
            "variance-ratio search returned a non-optimal point (lambda {lambda:.6e}); \
             last evaluations: {}",
            tail.join("; ")
        )));
    }
    Ok((lambda, trace))
}

/// Names the design columns that are (numerically) linear combinations of
/// earlier columns, via modified Gram–Schmidt with re-orthogonalization.
fn collinear_columns(x: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut offenders = Vec::new();
    for k in 0..x.ncols() {
        let mut v = x.column(k).clone_owned();
        let scale = v.norm();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
        }
        if v.norm() <= 1e-10 * scale.max(1.0) {
            offenders.push(names[k].clone());
        } else {
            let norm = v.norm();
            basis.push(v / norm);
        }
    }
    offenders
}

/// Fits the mixed model on a realized design.
///
/// The variance ratio is profiled out and located numerically; β then comes
/// from generalized least squares at the optimum, standard errors from the
/// GLS covariance, and two-tailed p-values from a t distribution with
/// df = n − p − g + 1 (a containment-style approximation, recorded in the
/// returned model). A design with a single group degrades to ordinary least
/// squares with a warning.
pub fn fit(design: &Design, method: Method) -> Result<FittedModel> {
    let n = design.y.len();
    let p = design.x.ncols();
    if design.x.nrows() != n || design.groups.len() != n {
        return Err(Error::validation(
            "response, design rows, and group labels must align",
        ));
    }
    if p == 0 {
        return Err(Error::validation("the design has no columns to fit"));
    }
    if n <= p + 2 {
        return Err(Error::validation(format!(
            "need more than p + 2 = {} rows to fit {} columns; got {n}",
            p + 2,
            p
        )));
    }
    let offenders = collinear_columns(&design.x, &design.columns);
    if !offenders.is_empty() {
        return Err(Error::numeric(format!(
            "singular design: column(s) {} are linear combinations of earlier columns",
            offenders.join(", ")
        )));
    }

    let blocks = GroupBlocks::new(design);
    let g = blocks.g();
    let mut warnings = Vec::new();

    let lambda = if g < 2 {
        warnings.push(
            "single group: random-intercept variance is unidentifiable; \
             degraded to ordinary least squares"
                .to_string(),
        );
        0.0
    } else {
        let (lambda, _trace) = optimize(&blocks, method)?;
        lambda
    };
    if lambda >= 2f64.powi(39) {
        warnings.push(format!(
            "variance ratio {lambda:.3e} is at the search ceiling; \
             the residual variance is indistinguishable from zero"
        ));
    }

    let eval = evaluate(&blocks, method, lambda)?;
    let nf = n as f64;
    let pf = p as f64;
    let sigma2_resid = match method {
        Method::Reml => eval.rwr / (nf - pf),
        Method::Ml => eval.rwr / nf,
    };
    let sigma2_group = lambda * sigma2_resid;

    let df = nf - pf - g as f64 + 1.0;
    if df < 1.0 {
        return Err(Error::validation(format!(
            "insufficient residual degrees of freedom: n − p − g + 1 = {df}"
        )));
    }
    let cov = eval.chol.inverse() * sigma2_resid;
    let beta: Vec<f64> = eval.beta.iter().copied().collect();
    let se: Vec<f64> = (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let t_dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::numeric(format!("t distribution with df {df}: {e}")))?;
    let t_stats: Vec<f64> = beta
        .iter()
        .zip(&se)
        .map(|(b, s)| if *s > 0.0 { b / s } else { f64::INFINITY * b.signum() })
        .collect();
    let p_values: Vec<f64> = t_stats
        .iter()
        .map(|t| (2.0 * (1.0 - t_dist.cdf(t.abs()))).clamp(0.0, 1.0))
        .collect();

    // raw residuals, group BLUPs, and the conditional residual sum
    let fitted_fixed = &design.x * &eval.beta;
    let mut group_sums = vec![0.0; g];
    for i in 0..n {
        group_sums[blocks.row_block[i]] += design.y[i] - fitted_fixed[i];
    }
    let mut group_effects = BTreeMap::new();
    let mut blup = vec![0.0; g];
    for j in 0..g {
        let b_j = lambda * group_sums[j] / (1.0 + lambda * blocks.sizes[j]);
        blup[j] = b_j;
        group_effects.insert(blocks.labels[j].clone(), b_j);
    }
    let mut rss_conditional = 0.0;
    for i in 0..n {
        let r = design.y[i] - fitted_fixed[i] - blup[blocks.row_block[i]];
        rss_conditional += r * r;
    }

    let model = FittedModel {
        spec: design.spec.clone(),
        columns: design.columns.clone(),
        beta,
        se,
        t_stats,
        p_values,
        sigma2_group,
        sigma2_resid,
        group_effects,
        loglik: -eval.m2l / 2.0,
        method,
        df_resid: df,
        df_convention: "df = n - p - g + 1 (containment-style approximation)".to_string(),
        n_used: n,
        n_dropped: design.report.n_dropped,
        rss_conditional,
        warnings,
    };
    model.check_invariants()?;
    Ok(model)
}

/// A prediction from a fitted model, on both scales.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    /// Transformed-scale value, including the group effect when applied.
    pub linear_predictor: f64,
    /// Prediction mapped back through the inverse response transformation.
    pub back_transformed: f64,
    /// The group effect that was added, if any.
    pub random_effect: Option<f64>,
    pub flags: Vec<String>,
}

/// Computes each term's design value from raw variable values.
fn term_columns(
    model: &FittedModel,
    new_row: &BTreeMap<String, f64>,
) -> Result<Vec<f64>> {
    let mut computed: BTreeMap<&str, f64> = BTreeMap::new();
    for term in &model.spec.terms {
        match &term.kind {
            TermKind::Covariate {
                variable,
                transformation,
            } => {
                let raw = *new_row.get(variable).ok_or_else(|| {
                    Error::validation(format!(
                        "missing variable {variable:?} for term {:?}",
                        term.name
                    ))
                })?;
                let v = transformation.forward(raw).map_err(|e| {
                    Error::validation(format!("term {:?}: {e}", term.name))
                })?;
                computed.insert(term.name.as_str(), v);
            }
            TermKind::Dummy { variable } => {
                let raw = *new_row.get(variable).ok_or_else(|| {
                    Error::validation(format!(
                        "missing variable {variable:?} for term {:?}",
                        term.name
                    ))
                })?;
                if raw != 0.0 && raw != 1.0 {
                    return Err(Error::validation(format!(
                        "dummy variable {variable:?} must be 0 or 1, found {raw}"
                    )));
                }
                computed.insert(term.name.as_str(), raw);
            }
            TermKind::Interaction { .. } => {}
        }
    }
    for term in &model.spec.terms {
        if let TermKind::Interaction { left, right } = &term.kind {
            let l = computed[left.as_str()];
            let r = computed[right.as_str()];
            computed.insert(term.name.as_str(), l * r);
        }
    }
    Ok(model
        .spec
        .terms
        .iter()
        .map(|t| computed[t.name.as_str()])
        .collect())
}

/// Predicts the response for one new row of raw variable values.
///
/// When `group` names a group seen in training, its BLUP shifts the linear
/// predictor; otherwise the prediction is fixed-effects-only and flagged.
pub fn predict(
    model: &FittedModel,
    new_row: &BTreeMap<String, f64>,
    group: Option<&str>,
) -> Result<Prediction> {
    model.check_invariants()?;
    let terms = term_columns(model, new_row)?;
    let mut lp = 0.0;
    let mut idx = 0;
    if model.spec.intercept {
        lp += model.beta[0];
        idx = 1;
    }
    for (i, value) in terms.iter().enumerate() {
        lp += model.beta[idx + i] * value;
    }
    let (random_effect, flags) = match group {
        Some(label) => match model.group_effects.get(label) {
            Some(&b) => (Some(b), Vec::new()),
            None => (
                None,
                vec![format!(
                    "no random effect applied: group {label:?} was not in the training data"
                )],
            ),
        },
        None => (
            None,
            vec!["no random effect applied: no group supplied".to_string()],
        ),
    };
    lp += random_effect.unwrap_or(0.0);
    let transformation: Transformation = model.spec.response.transformation;
    let back_transformed = transformation.inverse(lp).map_err(|_| {
        Error::numeric(format!(
            "prediction outside response domain: inverse {} undefined at {lp}",
            transformation.name()
        ))
    })?;
    Ok(Prediction {
        linear_predictor: lp,
        back_transformed,
        random_effect,
        flags,
    })
}
