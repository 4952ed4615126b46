//! Matrix Riccati equation `Ṡ + S² + R(t) = 0`: numerical integration via
//! the associated linear system, explicit constant-coefficient and block
//! solutions, blow-up detection, and the comparison principle as a
//! checkable property.
//!
//! Instead of integrating the Riccati equation directly, the globally
//! defined linear system `ȧ = b`, `ḃ = −a R(t)` with `a(0) = I`,
//! `b(0) = S₀` is integrated and `S = a⁻¹ b` recovered. Blow-up of S then
//! shows up as a determinant crossing of the denominator `a`, which is
//! detectable, rather than as an integrator failure.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition threshold on the denominator factor, beyond which the Riccati
/// solution counts as blown up.
const BLOW_UP_CONDITION: f64 = 1e12;

/// Determinant floor for the explicit solutions' denominator factor.
const SINGULAR_DET: f64 = 1e-12;

/// Time samples of a Riccati solution with blow-up diagnostics.
#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    /// Full integration grid.
    pub times: Vec<f64>,
    /// `S` at `times[..matrices.len()]`; truncated at blow-up.
    pub matrices: Vec<DMatrix<f64>>,
    /// First time the denominator factor degenerated, if any.
    pub blow_up: Option<f64>,
    /// Minimum signed determinant of the denominator factor over the run.
    pub min_denominator_det: f64,
}

impl RiccatiTrajectory {
    /// S at the final recorded sample.
    pub fn final_matrix(&self) -> &DMatrix<f64> {
        self.matrices.last().expect("at least the initial sample is recorded")
    }
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!("{what} must be square")));
    }
    if (m - m.transpose()).norm() > 1e-9 * (1.0 + m.norm()) {
        return Err(Error::InvalidArgument(format!("{what} must be symmetric")));
    }
    Ok(())
}

/// Integrates `Ṡ + S² + R(t) = 0`, `S(0) = S₀` on `[0, t_end]`.
///
/// `curvature` supplies the (symmetric) coefficient matrix at a given time.
/// Blow-up is flagged when the determinant of the denominator changes sign
/// between samples (the flagged time is the interpolated crossing) or when
/// its smallest singular value falls below `1e-12` times the largest one
/// seen so far.
pub fn riccati_integrate(
    curvature: impl Fn(f64) -> DMatrix<f64>,
    s0: &DMatrix<f64>,
    t_end: f64,
    step: f64,
) -> Result<RiccatiTrajectory> {
    check_symmetric(s0, "initial matrix")?;
    if !(0.0..=1.0).contains(&t_end) {
        return Err(Error::Precondition(format!(
            "riccati horizon t_end = {t_end} outside [0, 1]"
        )));
    }
    if step <= 0.0 {
        return Err(Error::Precondition("riccati step must be positive".into()));
    }

    let n = s0.nrows();
    let steps = if t_end > 0.0 {
        ((t_end / step).ceil() as usize).max(1)
    } else {
        0
    };
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };

    let mut a = DMatrix::identity(n, n);
    let mut b = s0.clone();

    let mut times = vec![0.0];
    let mut matrices = vec![s0.clone()];
    let mut blow_up = None;
    let mut prev_det = 1.0f64;
    let mut min_det = 1.0f64;
    let mut max_sigma = 1.0f64;

    for i in 0..steps {
        let t = i as f64 * h;
        rk4_linear(&curvature, &mut a, &mut b, t, h);
        let t_next = t + h;

        let svd = a.clone().svd(false, false);
        let sigma_max = svd.singular_values.max();
        let sigma_min = svd.singular_values.min();
        max_sigma = max_sigma.max(sigma_max);

        let det = a.determinant();
        min_det = min_det.min(det);

        if blow_up.is_none() {
            if det.signum() != prev_det.signum() && prev_det.signum() != 0.0 {
                // interpolate the crossing inside (t, t_next]
                let frac = prev_det / (prev_det - det);
                blow_up = Some(t + frac * h);
            } else if sigma_min < max_sigma / BLOW_UP_CONDITION {
                blow_up = Some(t_next);
            }
        }

        times.push(t_next);
        if blow_up.is_none() {
            let s = a.clone().lu().solve(&b).ok_or(Error::SingularDenominator { t: t_next })?;
            // symmetrize against roundoff
            matrices.push((&s + s.transpose()) * 0.5);
        }
        prev_det = det;
    }

    Ok(RiccatiTrajectory {
        times,
        matrices,
        blow_up,
        min_denominator_det: min_det,
    })
}

fn rk4_linear(
    curvature: &impl Fn(f64) -> DMatrix<f64>,
    a: &mut DMatrix<f64>,
    b: &mut DMatrix<f64>,
    t: f64,
    h: f64,
) {
    let deriv = |ac: &DMatrix<f64>, bc: &DMatrix<f64>, tc: f64| {
        let r = curvature(tc);
        (bc.clone(), -(ac * r))
    };
    let (k1a, k1b) = deriv(a, b, t);
    let (k2a, k2b) = deriv(&(&*a + &k1a * (h / 2.0)), &(&*b + &k1b * (h / 2.0)), t + h / 2.0);
    let (k3a, k3b) = deriv(&(&*a + &k2a * (h / 2.0)), &(&*b + &k2b * (h / 2.0)), t + h / 2.0);
    let (k4a, k4b) = deriv(&(&*a + &k3a * h), &(&*b + &k3b * h), t + h);
    *a += (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (h / 6.0);
    *b += (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (h / 6.0);
}

/// `sinh(x)/x`, continuous at 0.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// `sin(x)/x`, continuous at 0.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Explicit solution of `Ṡ + S² + k I = 0`, `S(0) = S₀`, evaluated at `t`,
/// as a numerator/denominator pair of polynomials in S₀.
fn constant_factors(k: f64, s0: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = s0.nrows();
    let id = DMatrix::identity(n, n);
    let sk = k.abs().sqrt();
    if k < 0.0 {
        let num = s0 * (sk * t).cosh() + &id * (sk * (sk * t).sinh());
        let den = s0 * (t * sinhc(sk * t)) + &id * (sk * t).cosh();
        (num, den)
    } else if k > 0.0 {
        let num = s0 * (sk * t).cos() - &id * (sk * (sk * t).sin());
        let den = s0 * (t * sinc(sk * t)) + &id * (sk * t).cos();
        (num, den)
    } else {
        (s0.clone(), s0 * t + &id)
    }
}

/// Explicit constant-coefficient Riccati solution
/// `S(t) = Γ₁(t) Γ₂(t)⁻¹` for `Ṡ + S² + k I = 0`, `S(0) = S₀`.
pub fn riccati_explicit_constant(k: f64, s0: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    check_symmetric(s0, "initial matrix")?;
    let (num, den) = constant_factors(k, s0, t);
    if den.determinant().abs() < SINGULAR_DET {
        return Err(Error::SingularDenominator { t });
    }
    // X = num · den⁻¹ via the transposed system denᵀ Xᵀ = numᵀ
    let sol = den
        .transpose()
        .lu()
        .solve(&num.transpose())
        .ok_or(Error::SingularDenominator { t })?
        .transpose();
    Ok((&sol + sol.transpose()) * 0.5)
}

/// Explicit block solution for `Ṡ + S² + diag(0, k·|∇f|² I) = 0`: the first
/// coordinate evolves freely while the orthogonal block sees the effective
/// curvature `k |∇f|²`, with `λ = √|k|·|∇f|`.
pub fn riccati_explicit_block(
    k: f64,
    grad_norm: f64,
    s0: &DMatrix<f64>,
    t: f64,
) -> Result<DMatrix<f64>> {
    check_symmetric(s0, "initial matrix")?;
    let n = s0.nrows();
    if n < 1 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let lambda = k.abs().sqrt() * grad_norm.abs();

    // diagonal profile matrices: entry 0 is the free direction
    let mut d1 = DMatrix::identity(n, n);
    let mut n1 = DMatrix::zeros(n, n);
    let mut d2 = DMatrix::identity(n, n);
    let mut n2 = DMatrix::identity(n, n);
    d2[(0, 0)] = t;

    if k < 0.0 {
        for i in 1..n {
            d1[(i, i)] = (lambda * t).cosh();
            n1[(i, i)] = lambda * (lambda * t).sinh();
            d2[(i, i)] = t * sinhc(lambda * t);
            n2[(i, i)] = (lambda * t).cosh();
        }
    } else if k > 0.0 {
        for i in 1..n {
            d1[(i, i)] = (lambda * t).cos();
            n1[(i, i)] = -lambda * (lambda * t).sin();
            d2[(i, i)] = t * sinc(lambda * t);
            n2[(i, i)] = (lambda * t).cos();
        }
    } else {
        for i in 1..n {
            d2[(i, i)] = t;
        }
    }

    let num = &d1 * s0 + n1;
    let den = &d2 * s0 + n2;
    if den.determinant().abs() < SINGULAR_DET {
        return Err(Error::SingularDenominator { t });
    }
    let sol = den
        .transpose()
        .lu()
        .solve(&num.transpose())
        .ok_or(Error::SingularDenominator { t })?
        .transpose();
    Ok(sol)
}

/// Result of an ordering check between two Riccati trajectories.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub holds: bool,
    /// Smallest eigenvalue of `S²_t − S¹_t` seen over the common samples.
    pub worst_eigenvalue_gap: f64,
    pub worst_time: f64,
    pub samples_checked: usize,
}

/// Checks the comparison-principle ordering: given trajectories whose
/// coefficients satisfy `R¹ ≥ R²` and whose initial matrices satisfy
/// `S¹₀ < S²₀` (verified), asserts `S¹_t ≤ S²_t` up to slack `1e-9` at
/// every common sample before either blow-up.
pub fn comparison_check(
    traj1: &RiccatiTrajectory,
    traj2: &RiccatiTrajectory,
) -> Result<ComparisonReport> {
    if traj1.times.len() != traj2.times.len()
        || traj1
            .times
            .iter()
            .zip(&traj2.times)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::InvalidArgument(
            "comparison requires a shared time grid".into(),
        ));
    }
    let s10 = &traj1.matrices[0];
    let s20 = &traj2.matrices[0];
    let init_gap = nalgebra::SymmetricEigen::new(s20 - s10).eigenvalues.min();
    if init_gap <= 0.0 {
        return Err(Error::Precondition(format!(
            "initial matrices must satisfy S1 < S2 strictly (gap {init_gap:.3e})"
        )));
    }

    let samples = traj1.matrices.len().min(traj2.matrices.len());
    let mut worst = f64::INFINITY;
    let mut worst_time = 0.0;
    for i in 0..samples {
        let gap = nalgebra::SymmetricEigen::new(&traj2.matrices[i] - &traj1.matrices[i])
            .eigenvalues
            .min();
        if gap < worst {
            worst = gap;
            worst_time = traj1.times[i];
        }
    }
    Ok(ComparisonReport {
        holds: worst > -1e-9,
        worst_eigenvalue_gap: worst,
        worst_time,
        samples_checked: samples,
    })
}
