//! Sufficient-condition certifiers for c-convexity of a potential under a
//! natural mechanical transport cost.
//!
//! Four conditions are implemented, all sample-based on a grid (the
//! certificate records the grid, so the guarantee is explicitly a sampled
//! one): the mechanical condition on non-positively curved models, the
//! free Riemannian condition with the gradient-adapted block threshold, the
//! two-dimensional determinant/trace form of the same condition, and the
//! general form for a user-supplied curvature bound with an eigenvalue
//! verification of that bound on the grid.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::curvature::{adapted_frame, curvature_matrix_at};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{ChartPoint, GridSpec, ManifoldModel, TangentVector};
use crate::mechanics::{CotangentState, MechanicalSystem};

/// Points with gradient norm below this are treated as critical.
const CRITICAL_GRAD_NORM: f64 = 1e-8;

/// Which sufficient condition a certificate reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    Natural,
    Riemannian,
    TwoDim,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome of a grid certification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub theorem: CertificateKind,
    /// Curvature or Hessian bound the thresholds were built from.
    pub k: f64,
    pub grid: String,
    pub verdict: Verdict,
    /// Minimum over the grid of the margin by which the strict condition
    /// holds; pass means `worst_margin ≥ margin_required`.
    pub worst_margin: f64,
    pub worst_point: Option<ChartPoint>,
    pub margin_required: f64,
    pub caveats: Vec<String>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Options shared by the certifiers.
#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Strictness margin δ: the strict inequalities must hold by at least
    /// this much at every sample.
    pub margin: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { margin: 1e-9 }
    }
}

/// Hessian of `f` in the given orthonormal frame:
/// `S_ij = ⟨Hess f(v_i), v_j⟩`.
pub fn hessian_in_frame(
    system: &MechanicalSystem,
    f: &ScalarField,
    x: &ChartPoint,
    frame: &[TangentVector],
) -> Result<DMatrix<f64>> {
    let n = system.model.dim();
    if frame.len() != n {
        return Err(Error::InvalidArgument(format!("frame must contain {n} vectors")));
    }
    let hess = f.hessian_covariant(&system.model, x)?;
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (frame[i].components.transpose() * &hess * &frame[j].components)[(0, 0)];
        }
    }
    Ok((&s + s.transpose()) * 0.5)
}

/// The threshold profile `ξ(λ)`: `λ coth λ` for negative curvature sign,
/// `1` at zero, `λ cot λ` for positive sign (defined for `λ < π`).
pub fn threshold_xi(lambda: f64, sign_k: i8) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be finite and >= 0")));
    }
    match sign_k {
        0 => Ok(1.0),
        -1 => {
            if lambda == 0.0 {
                Ok(1.0)
            } else {
                Ok(lambda / lambda.tanh())
            }
        }
        1 => {
            if lambda >= std::f64::consts::PI {
                Err(Error::CotDomain { lambda })
            } else if lambda == 0.0 {
                Ok(1.0)
            } else {
                Ok(lambda / lambda.tan())
            }
        }
        other => Err(Error::InvalidArgument(format!("sign_k = {other} not in {{-1, 0, 1}}"))),
    }
}

/// Scalar threshold value `√|k|·coth(√|k|)` / `1` / `√|k|·cot(√|k|)`
/// branching on the sign of `k`.
fn scalar_threshold(k: f64) -> Result<f64> {
    let lambda = k.abs().sqrt();
    threshold_xi(lambda, sign_of(k))
}

fn sign_of(k: f64) -> i8 {
    if k > 0.0 {
        1
    } else if k < 0.0 {
        -1
    } else {
        0
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn fmt_point(x: &ChartPoint) -> String {
    let coords: Vec<String> = x.coords.iter().map(|c| format!("{c:.6}")).collect();
    format!("chart {} ({})", x.chart, coords.join(", "))
}

struct GridScan {
    worst_margin: f64,
    worst_point: Option<ChartPoint>,
    caveats: Vec<String>,
}

fn certificate_from_scan(
    theorem: CertificateKind,
    k: f64,
    grid: &GridSpec,
    model: &ManifoldModel,
    opts: &CertifyOptions,
    scan: GridScan,
) -> Certificate {
    let mut caveats = scan.caveats;
    if !model.is_compact() {
        caveats.push("non-compact model: the certified theory assumes compactness".into());
    }
    let verdict = if scan.worst_margin >= opts.margin {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Certificate {
        theorem,
        k,
        grid: grid.description(model),
        verdict,
        worst_margin: scan.worst_margin,
        worst_point: scan.worst_point,
        margin_required: opts.margin,
        caveats,
    }
}

/// Mechanical-case certifier: on a model with non-positive sectional
/// curvature and `Hess U ≤ k I`, the potential is certified when
/// `Hess f > −threshold(k)·I` strictly on the grid.
pub fn certify_natural(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if system.model.curvature_bound() > 0.0 {
        return Err(Error::Precondition(
            "mechanical condition requires non-positive sectional curvature; \
             use the Riemannian or two-dimensional certifier for this model"
                .into(),
        ));
    }
    f.check_compatible(&system.model)?;
    let k = system.hess_potential_bound;
    let threshold = scalar_threshold(k)?;
    let mut caveats = Vec::new();
    if k > 0.0 {
        caveats.push(format!(
            "positive Hessian bound: cot threshold requires sqrt(k) = {:.6} < pi",
            k.sqrt()
        ));
    }

    let mut worst = f64::INFINITY;
    let mut worst_point = None;
    for x in grid.sample(&system.model) {
        let frame = system.model.orthonormal_frame(&x, None)?;
        let s = hessian_in_frame(system, f, &x, &frame)?;
        let margin = min_eigenvalue(&s) + threshold;
        if margin < worst {
            worst = margin;
            worst_point = Some(x);
        }
    }
    Ok(certificate_from_scan(
        CertificateKind::Natural,
        k,
        grid,
        &system.model,
        opts,
        GridScan { worst_margin: worst, worst_point, caveats },
    ))
}

/// Free Riemannian certifier with the gradient-adapted block threshold.
///
/// With the model's curvature bound `k` and `λ = √|k|·|∇f|`, the condition
/// is `S > diag(−1, −ξ(λ) I)` in the frame whose first vector is
/// `∇f/|∇f|`. On non-positively curved models the bound `k = 0` is used, so
/// the condition reduces to `Hess f > −I`. Critical points use the λ → 0
/// threshold `−I`.
pub fn certify_riemannian(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if !system.is_free() {
        return Err(Error::Precondition(
            "the Riemannian condition applies to free systems only".into(),
        ));
    }
    f.check_compatible(&system.model)?;
    let k = system.model.curvature_bound().max(0.0);
    let sign = sign_of(k);

    let mut caveats = Vec::new();
    let mut worst = f64::INFINITY;
    let mut worst_point = None;
    for x in grid.sample(&system.model) {
        let n = system.model.dim();
        let grad = f.gradient(&system.model, &x)?;
        let grad_norm = system.model.norm(&x, &grad.components)?;

        let (frame, threshold_diag): (Vec<TangentVector>, DVector<f64>) =
            if grad_norm > CRITICAL_GRAD_NORM {
                let lambda = k.abs().sqrt() * grad_norm;
                if sign == 1 && lambda >= std::f64::consts::PI {
                    caveats.push(format!(
                        "cot domain exceeded at {} (lambda = {lambda:.6})",
                        fmt_point(&x)
                    ));
                    worst = f64::NEG_INFINITY;
                    worst_point = Some(x);
                    continue;
                }
                let xi = threshold_xi(lambda, sign)?;
                let mut diag = DVector::from_element(n, xi);
                diag[0] = 1.0;
                (system.model.orthonormal_frame(&x, Some(&grad))?, diag)
            } else {
                (
                    system.model.orthonormal_frame(&x, None)?,
                    DVector::from_element(n, 1.0),
                )
            };

        let s = hessian_in_frame(system, f, &x, &frame)?;
        let shifted = &s + DMatrix::from_diagonal(&threshold_diag);
        let margin = min_eigenvalue(&shifted);
        if margin < worst {
            worst = margin;
            worst_point = Some(x);
        }
    }
    Ok(certificate_from_scan(
        CertificateKind::Riemannian,
        k,
        grid,
        &system.model,
        opts,
        GridScan { worst_margin: worst, worst_point, caveats },
    ))
}

/// Two-dimensional certifier: the determinant/trace form of the free
/// Riemannian condition, evaluated only at non-critical points.
///
/// With `h₁ = ⟨Hess f(∇f), ∇f⟩`, `h₂ = ⟨Hess f(J∇f), J∇f⟩`, the two
/// inequalities are
/// `det Hess f > −|∇f|²(ξ h₁ + h₂ + ξ|∇f|²)` and
/// `h₁ + h₂ > −(ξ + 1)|∇f|²`, where `det Hess f` is taken in the
/// unnormalized frame `(∇f, J∇f)`.
pub fn certify_2d(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    if system.model.dim() != 2 {
        return Err(Error::Precondition(
            "the two-dimensional condition requires a 2d model".into(),
        ));
    }
    if !system.is_free() {
        return Err(Error::Precondition(
            "the two-dimensional condition applies to free systems only".into(),
        ));
    }
    f.check_compatible(&system.model)?;
    let k = system.model.curvature_bound().max(0.0);
    let sign = sign_of(k);

    let mut caveats = Vec::new();
    let mut critical = 0usize;
    let mut worst = f64::INFINITY;
    let mut worst_point = None;
    let samples = grid.sample(&system.model);
    let total = samples.len();
    for x in samples {
        let grad = f.gradient(&system.model, &x)?;
        let grad_norm = system.model.norm(&x, &grad.components)?;
        if grad_norm <= CRITICAL_GRAD_NORM {
            critical += 1;
            continue;
        }
        let lambda = k.abs().sqrt() * grad_norm;
        if sign == 1 && lambda >= std::f64::consts::PI {
            caveats.push(format!(
                "cot domain exceeded at {} (lambda = {lambda:.6})",
                fmt_point(&x)
            ));
            worst = f64::NEG_INFINITY;
            worst_point = Some(x);
            continue;
        }
        let xi = threshold_xi(lambda, sign)?;

        // J = +90° rotation in chart coordinates (conformal charts make this
        // the metric rotation); the conditions are J-sign independent
        let jgrad = DVector::from_vec(vec![-grad.components[1], grad.components[0]]);
        let hess = f.hessian_covariant(&system.model, &x)?;
        let h1 = (grad.components.transpose() * &hess * &grad.components)[(0, 0)];
        let h2 = (jgrad.transpose() * &hess * &jgrad)[(0, 0)];
        let h12 = (grad.components.transpose() * &hess * &jgrad)[(0, 0)];
        let g2 = grad_norm * grad_norm;

        // The two inequalities
        //   det Hess f > −|∇f|²(ξ h₁ + h₂ + ξ|∇f|²)   (det in the (∇f, J∇f) frame)
        //   h₁ + h₂ > −(ξ + 1)|∇f|²
        // are recorded through their unit-frame normalizations (division by
        // |∇f|⁴ resp. |∇f|²), which keep the strictness margin meaningful
        // near critical points where both sides vanish.
        let s11 = h1 / g2;
        let s22 = h2 / g2;
        let s12 = h12 / g2;
        let margin_det = (s11 + 1.0) * (s22 + xi) - s12 * s12;
        let margin_trace = (s11 + 1.0) + (s22 + xi);
        let margin = margin_det.min(margin_trace);
        if margin < worst {
            worst = margin;
            worst_point = Some(x);
        }
    }

    if critical > 0 {
        caveats.push(format!(
            "{critical} of {total} grid points are critical (|grad f| <= {CRITICAL_GRAD_NORM:.0e}) and were skipped"
        ));
    }
    if worst == f64::INFINITY {
        // no non-critical points: vacuous pass
        worst = f64::INFINITY;
        caveats.push("no non-critical grid points: conditions hold vacuously".into());
    }
    Ok(certificate_from_scan(
        CertificateKind::TwoDim,
        k,
        grid,
        &system.model,
        opts,
        GridScan { worst_margin: worst, worst_point, caveats },
    ))
}

/// General certifier for a user-supplied curvature bound `k`: verifies
/// `R̄₀ ≤ k I` by eigenvalue check at every grid state `(x, df_x)` (a
/// failed verification becomes a caveat), then applies the scalar threshold
/// to the Hessian spectrum.
pub fn certify_general(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
    k: f64,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    f.check_compatible(&system.model)?;
    let threshold = scalar_threshold(k)?;

    let mut caveats = Vec::new();
    let mut bound_violation: f64 = 0.0;
    let mut worst = f64::INFINITY;
    let mut worst_point = None;
    for x in grid.sample(&system.model) {
        let frame = system.model.orthonormal_frame(&x, None)?;
        let df = f.differential(&system.model, &x)?;
        let state = CotangentState::from_covector(&df);

        // verify the curvature bound at this state
        let frame_mat = DMatrix::from_fn(system.model.dim(), frame.len(), |r, c| {
            frame[c].components[r]
        });
        let rbar = curvature_matrix_at(system, &state, &frame_mat)?;
        let max_eig = -min_eigenvalue(&(-rbar));
        if max_eig > k + opts.margin {
            bound_violation = bound_violation.max(max_eig - k);
        }

        let s = hessian_in_frame(system, f, &x, &frame)?;
        let margin = min_eigenvalue(&s) + threshold;
        if margin < worst {
            worst = margin;
            worst_point = Some(x);
        }
    }
    if bound_violation > 0.0 {
        caveats.push(format!(
            "supplied curvature bound violated on the grid by up to {bound_violation:.6e}; \
             the certificate premise does not hold"
        ));
    }
    Ok(certificate_from_scan(
        CertificateKind::General,
        k,
        grid,
        &system.model,
        opts,
        GridScan { worst_margin: worst, worst_point, caveats },
    ))
}

/// Convenience: the certificate produced by the kind-appropriate certifier.
pub fn certify(
    kind: CertificateKind,
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
    general_k: Option<f64>,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    match kind {
        CertificateKind::Natural => certify_natural(system, f, grid, opts),
        CertificateKind::Riemannian => certify_riemannian(system, f, grid, opts),
        CertificateKind::TwoDim => certify_2d(system, f, grid, opts),
        CertificateKind::General => {
            let k = general_k.ok_or_else(|| {
                Error::InvalidArgument("the general certifier needs a curvature bound k".into())
            })?;
            certify_general(system, f, grid, k, opts)
        }
    }
}

/// Adapted-frame Hessian matrix at one point, exposed for diagnostics.
pub fn hessian_adapted(
    system: &MechanicalSystem,
    f: &ScalarField,
    x: &ChartPoint,
) -> Result<DMatrix<f64>> {
    let df = f.differential(&system.model, x)?;
    let state = CotangentState::from_covector(&df);
    let frame = adapted_frame(system, &state)?;
    hessian_in_frame(system, f, x, &frame)
}
