//! Scalar fields (potentials) with analytic value, gradient, and covariant
//! Hessian evaluators.
//!
//! Fields come from a small expression library; which expressions are valid
//! depends on the model:
//!
//! * `zero` — every model,
//! * `cos_x1`, `cos_sum` — flat tori (trigonometric polynomials in the
//!   periodic coordinates),
//! * `height` — the sphere (a multiple of the embedding height),
//! * `linear` — flat tori and the disk. On a torus a linear field is only
//!   single-valued away from the wrap seam; it exists to model dynamics on a
//!   line segment and callers must keep their samples clear of the seam.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, CovectorComponents, GridSpec, ManifoldModel, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldExpression {
    Zero,
    /// amplitude · cos(2π x₁ / T₁)
    CosX1,
    /// amplitude · (cos(2π x₁ / T₁) + cos(2π x₂ / T₂))
    CosSum,
    /// amplitude · (embedding height) on the sphere
    Height,
    /// amplitude · x₁
    Linear,
}

impl FieldExpression {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(FieldExpression::Zero),
            "cos_x1" => Ok(FieldExpression::CosX1),
            "cos_sum" => Ok(FieldExpression::CosSum),
            "height" => Ok(FieldExpression::Height),
            "linear" => Ok(FieldExpression::Linear),
            other => Err(Error::Config(format!("unknown field expression `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FieldExpression::Zero => "zero",
            FieldExpression::CosX1 => "cos_x1",
            FieldExpression::CosSum => "cos_sum",
            FieldExpression::Height => "height",
            FieldExpression::Linear => "linear",
        }
    }
}

/// A potential with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub expression: FieldExpression,
    pub amplitude: f64,
}

impl ScalarField {
    pub fn new(expression: FieldExpression, amplitude: f64) -> Self {
        ScalarField { expression, amplitude }
    }

    pub fn zero() -> Self {
        ScalarField::new(FieldExpression::Zero, 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.expression == FieldExpression::Zero || self.amplitude == 0.0
    }

    /// Checks the expression is defined on the model.
    pub fn check_compatible(&self, model: &ManifoldModel) -> Result<()> {
        let ok = match self.expression {
            FieldExpression::Zero => true,
            FieldExpression::CosX1 => matches!(model, ManifoldModel::FlatTorus { .. }),
            FieldExpression::CosSum => {
                matches!(model, ManifoldModel::FlatTorus { periods } if periods.len() >= 2)
            }
            FieldExpression::Height => matches!(model, ManifoldModel::Sphere2 { .. }),
            FieldExpression::Linear => matches!(
                model,
                ManifoldModel::FlatTorus { .. } | ManifoldModel::Hyperbolic2 { .. }
            ),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "field `{}` is not defined on the requested model",
                self.expression.name()
            )))
        }
    }

    /// Value, raw first partials, and raw second partials in the chart of `x`.
    fn raw_derivatives(
        &self,
        model: &ManifoldModel,
        x: &ChartPoint,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        model.check_point(x)?;
        self.raw_derivatives_unchecked(model, x)
    }

    /// Same as `raw_derivatives` without the chart-domain check. Integrator
    /// stages may momentarily overshoot the nominal chart bounds where the
    /// expressions are still smooth.
    pub(crate) fn raw_derivatives_unchecked(
        &self,
        model: &ManifoldModel,
        x: &ChartPoint,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        self.check_compatible(model)?;
        let n = model.dim();
        let a = self.amplitude;
        match self.expression {
            FieldExpression::Zero => Ok((0.0, DVector::zeros(n), DMatrix::zeros(n, n))),
            FieldExpression::Linear => {
                let mut grad = DVector::zeros(n);
                grad[0] = a;
                Ok((a * x.coords[0], grad, DMatrix::zeros(n, n)))
            }
            FieldExpression::CosX1 | FieldExpression::CosSum => {
                let periods = match model {
                    ManifoldModel::FlatTorus { periods } => periods,
                    _ => unreachable!("compatibility checked above"),
                };
                let terms = if self.expression == FieldExpression::CosX1 { 1 } else { 2 };
                let mut value = 0.0;
                let mut grad = DVector::zeros(n);
                let mut hess = DMatrix::zeros(n, n);
                for i in 0..terms {
                    let w = 2.0 * std::f64::consts::PI / periods[i];
                    let arg = w * x.coords[i];
                    value += a * arg.cos();
                    grad[i] = -a * w * arg.sin();
                    hess[(i, i)] = -a * w * w * arg.cos();
                }
                Ok((value, grad, hess))
            }
            FieldExpression::Height => {
                let radius = match model {
                    ManifoldModel::Sphere2 { radius } => *radius,
                    _ => unreachable!("compatibility checked above"),
                };
                // Height z = ±r(|u|² − r²)/(|u|² + r²); chart 1 flips the sign.
                let sign = if x.chart == 0 { 1.0 } else { -1.0 };
                let r2 = radius * radius;
                let q = x.coords.norm_squared() + r2;
                let value = sign * a * radius * (x.coords.norm_squared() - r2) / q;
                let mut grad = DVector::zeros(2);
                let mut hess = DMatrix::zeros(2, 2);
                let c = 4.0 * sign * a * radius * r2;
                for i in 0..2 {
                    grad[i] = c * x.coords[i] / (q * q);
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hess[(i, j)] = c * (delta * q - 4.0 * x.coords[i] * x.coords[j]) / (q * q * q);
                    }
                }
                Ok((value, grad, hess))
            }
        }
    }

    pub fn value(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<f64> {
        Ok(self.raw_derivatives(model, x)?.0)
    }

    /// The differential df as covector components.
    pub fn differential(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<CovectorComponents> {
        let (_, grad, _) = self.raw_derivatives(model, x)?;
        Ok(CovectorComponents::new(x.clone(), grad))
    }

    /// The metric gradient g⁻¹ df.
    pub fn gradient(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<TangentVector> {
        let (_, grad, _) = self.raw_derivatives(model, x)?;
        let (_, ginv) = model.metric_at(x)?;
        Ok(TangentVector::new(x.clone(), ginv * grad))
    }

    /// Riemannian norm of the gradient.
    pub fn gradient_norm(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<f64> {
        let (_, grad, _) = self.raw_derivatives(model, x)?;
        let (_, ginv) = model.metric_at(x)?;
        Ok((grad.transpose() * ginv * grad)[(0, 0)].max(0.0).sqrt())
    }

    /// Covariant Hessian as a lower-index matrix:
    /// `H_ij = ∂_i ∂_j f − Γ^k_ij ∂_k f`.
    pub fn hessian_covariant(&self, model: &ManifoldModel, x: &ChartPoint) -> Result<DMatrix<f64>> {
        let (_, grad, raw_hess) = self.raw_derivatives(model, x)?;
        let gamma = model.christoffel(x)?;
        let n = model.dim();
        let mut h = raw_hess;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    h[(i, j)] -= gamma[k][(i, j)] * grad[k];
                }
            }
        }
        Ok(h)
    }
}

/// Least k with `Hess U ≤ k I` over the grid, plus a small slack, computed
/// from the eigenvalues of the covariant Hessian in orthonormal frames.
pub fn estimate_hess_bound(
    model: &ManifoldModel,
    field: &ScalarField,
    grid: &GridSpec,
) -> Result<f64> {
    if field.is_zero() {
        return Ok(0.0);
    }
    let mut bound = f64::NEG_INFINITY;
    for x in grid.sample(model) {
        let (_, ginv) = model.metric_at(&x)?;
        let h = field.hessian_covariant(model, &x)?;
        // eigenvalues of the operator g⁻¹ H equal those of the symmetric
        // matrix g^{-1/2} H g^{-1/2}; for conformal metrics g⁻¹ = c⁻¹ I
        let sym = ginv[(0, 0)] * h;
        let eig = nalgebra::SymmetricEigen::new(sym);
        bound = bound.max(eig.eigenvalues.max());
    }
    Ok(bound + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(f: &ScalarField, m: &ManifoldModel, x: &ChartPoint) -> DVector<f64> {
        let n = m.dim();
        let h = 1e-5;
        DVector::from_iterator(
            n,
            (0..n).map(|k| {
                let mut xp = x.clone();
                xp.coords[k] += h;
                let mut xm = x.clone();
                xm.coords[k] -= h;
                (f.value(m, &xp).unwrap() - f.value(m, &xm).unwrap()) / (2.0 * h)
            }),
        )
    }

    fn fd_raw_hessian(f: &ScalarField, m: &ManifoldModel, x: &ChartPoint) -> DMatrix<f64> {
        let n = m.dim();
        let h = 1e-4;
        let mut out = DMatrix::zeros(n, n);
        let eval = |pt: &ChartPoint| f.value(m, pt).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut pp = x.clone();
                pp.coords[i] += h;
                pp.coords[j] += h;
                let mut pm = x.clone();
                pm.coords[i] += h;
                pm.coords[j] -= h;
                let mut mp = x.clone();
                mp.coords[i] -= h;
                mp.coords[j] += h;
                let mut mm = x.clone();
                mm.coords[i] -= h;
                mm.coords[j] -= h;
                out[(i, j)] = (eval(&pp) - eval(&pm) - eval(&mp) + eval(&mm)) / (4.0 * h * h);
            }
        }
        out
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let cases: Vec<(ManifoldModel, ScalarField, ChartPoint)> = vec![
            (
                ManifoldModel::FlatTorus { periods: vec![1.0] },
                ScalarField::new(FieldExpression::CosX1, 0.07),
                ChartPoint::new(0, vec![0.37]),
            ),
            (
                ManifoldModel::FlatTorus { periods: vec![1.0, 1.0] },
                ScalarField::new(FieldExpression::CosSum, 0.05),
                ChartPoint::new(0, vec![0.1, 0.62]),
            ),
            (
                ManifoldModel::Sphere2 { radius: 1.0 },
                ScalarField::new(FieldExpression::Height, 0.4),
                ChartPoint::new(0, vec![0.3, -0.5]),
            ),
            (
                ManifoldModel::Sphere2 { radius: 1.0 },
                ScalarField::new(FieldExpression::Height, 0.4),
                ChartPoint::new(1, vec![0.2, 0.25]),
            ),
            (
                ManifoldModel::Hyperbolic2 { scale: 1.0 },
                ScalarField::new(FieldExpression::Linear, 0.3),
                ChartPoint::new(0, vec![0.4, -0.2]),
            ),
        ];
        for (m, f, x) in cases {
            let grad = f.differential(&m, &x).unwrap().components;
            let fd = fd_gradient(&f, &m, &x);
            assert!(
                (grad.clone() - &fd).norm() < 1e-6,
                "gradient mismatch for {:?}: {grad} vs {fd}",
                f.expression
            );

            let hess = f.hessian_covariant(&m, &x).unwrap();
            let gamma = m.christoffel(&x).unwrap();
            let n = m.dim();
            let mut fd_cov = fd_raw_hessian(&f, &m, &x);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        fd_cov[(i, j)] -= gamma[k][(i, j)] * grad[k];
                    }
                }
            }
            assert!(
                (hess.clone() - &fd_cov).norm() < 1e-6,
                "hessian mismatch for {:?}: {hess} vs {fd_cov}",
                f.expression
            );
        }
    }

    /// The sphere height function is an eigenfunction: Hess(height) = −z·g.
    #[test]
    fn height_hessian_is_metric_multiple() {
        let m = ManifoldModel::Sphere2 { radius: 1.0 };
        let f = ScalarField::new(FieldExpression::Height, 1.0);
        for coords in [vec![0.0, 0.0], vec![0.5, -0.3], vec![1.2, 0.4]] {
            let x = ChartPoint::new(0, coords);
            let z = f.value(&m, &x).unwrap();
            let (g, _) = m.metric_at(&x).unwrap();
            let h = f.hessian_covariant(&m, &x).unwrap();
            assert!((h + g * z).norm() < 1e-10);
        }
    }

    #[test]
    fn torus_cos_hessian_closed_form() {
        let m = ManifoldModel::FlatTorus { periods: vec![1.0, 1.0] };
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let x = ChartPoint::new(0, vec![0.0, 0.3]);
        let h = f.hessian_covariant(&m, &x).unwrap();
        let w = 2.0 * std::f64::consts::PI;
        assert!((h[(0, 0)] + 0.01 * w * w).abs() < 1e-12);
        assert_eq!(h[(1, 1)], 0.0);
    }

    #[test]
    fn zero_field_everything_vanishes() {
        let m = ManifoldModel::Sphere2 { radius: 1.0 };
        let f = ScalarField::zero();
        let x = ChartPoint::new(0, vec![0.4, 0.4]);
        assert_eq!(f.value(&m, &x).unwrap(), 0.0);
        assert_eq!(f.gradient_norm(&m, &x).unwrap(), 0.0);
        assert!(f.hessian_covariant(&m, &x).unwrap().norm() == 0.0);
    }

    #[test]
    fn incompatible_field_is_rejected() {
        let m = ManifoldModel::Sphere2 { radius: 1.0 };
        let f = ScalarField::new(FieldExpression::CosX1, 0.1);
        assert!(f.value(&m, &ChartPoint::new(0, vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn hess_bound_estimate_covers_cos_field() {
        let m = ManifoldModel::FlatTorus { periods: vec![1.0] };
        let f = ScalarField::new(FieldExpression::CosX1, 0.25);
        let bound = estimate_hess_bound(&m, &f, &GridSpec::new(128)).unwrap();
        let exact = 0.25 * (2.0 * std::f64::consts::PI).powi(2);
        assert!(bound <= exact + 1e-6);
        assert!(bound > exact * 0.999);
    }
}
