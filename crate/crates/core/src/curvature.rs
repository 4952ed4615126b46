//! Curvature data of natural mechanical Hamiltonians on the cotangent
//! bundle: structure constants of the horizontal splitting, horizontal and
//! vertical lifts, the curvature operator, its matrix along extremals in a
//! parallel orthonormal frame, and canonical-frame propagation.
//!
//! Phase vectors are 2n-component: the first n entries are chart coordinate
//! components, the last n are covector components, all expressed in the
//! chart of the (fixed) base point. The symplectic pairing used throughout
//! is `ω(X, Y) = Σ_i (X_p)_i (Y_x)_i − (X_x)_i (Y_p)_i`.

// tensor contractions read clearest with explicit indices
#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, ManifoldModel, TangentVector};
use crate::mechanics::{CotangentState, MechanicalSystem};

/// Norm cutoff beyond which frame propagation is reported unstable.
const PROPAGATION_NORM_CUTOFF: f64 = 1e12;

/// The vertical correction coefficients of horizontal lifts at one state.
#[derive(Debug, Clone)]
pub struct SplittingData {
    pub base: CotangentState,
    /// `c_ij = Σ_k Γ^k_ij p_k`; symmetric for mechanical systems.
    pub structure_matrix: DMatrix<f64>,
}

/// Symplectic product of two 2n-component phase vectors.
pub fn symplectic_product(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() / 2;
    let mut acc = 0.0;
    for i in 0..n {
        acc += a[n + i] * b[i] - a[i] * b[n + i];
    }
    acc
}

/// Structure constants `c_ij = Σ_k Γ^k_ij p_k` at a state.
pub fn structure_constants(system: &MechanicalSystem, state: &CotangentState) -> Result<SplittingData> {
    let gamma = system.model.christoffel(&state.position)?;
    let n = system.model.dim();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[(i, j)] += gamma[k][(i, j)] * state.momentum[k];
            }
        }
    }
    Ok(SplittingData {
        base: state.clone(),
        structure_matrix: c,
    })
}

/// Horizontal lift of a tangent vector as a 2n phase vector:
/// `v^hor = (v, c v)`.
pub fn horizontal_lift(
    system: &MechanicalSystem,
    state: &CotangentState,
    v: &TangentVector,
) -> Result<DVector<f64>> {
    if v.base != state.position {
        return Err(Error::InvalidArgument(
            "lifted vector must be based at the state's position".into(),
        ));
    }
    let split = structure_constants(system, state)?;
    let n = v.components.len();
    let mut out = DVector::zeros(2 * n);
    let dp = &split.structure_matrix * &v.components;
    for i in 0..n {
        out[i] = v.components[i];
        out[n + i] = dp[i];
    }
    Ok(out)
}

/// Vertical lift of covector components as a 2n phase vector: `(0, α)`.
pub fn vertical_lift(covector: &DVector<f64>) -> DVector<f64> {
    let n = covector.len();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[n + i] = covector[i];
    }
    out
}

/// The curvature operator of the Hamiltonian applied to a tangent vector:
/// `R(u, v) u + Hess U (v)` with `u = g⁻¹ p`.
pub fn curvature_operator(
    system: &MechanicalSystem,
    state: &CotangentState,
    v: &TangentVector,
) -> Result<TangentVector> {
    let x = &state.position;
    let (_, ginv) = system.model.metric_at(x)?;
    let u = TangentVector::new(x.clone(), &ginv * &state.momentum);

    let mut out = if u.components.norm() > 0.0 {
        system.model.riemann_curvature(x, &u, v, &u)?.components
    } else {
        DVector::zeros(system.model.dim())
    };

    if !system.potential.is_zero() {
        let hess = system.potential.hessian_covariant(&system.model, x)?;
        out += ginv * (hess * &v.components);
    }
    Ok(TangentVector::new(x.clone(), out))
}

/// A flow trajectory together with a parallel-transported orthonormal frame
/// along its base curve.
#[derive(Debug, Clone)]
pub struct TransportedFrame {
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    /// Per-time frame matrices; column `i` holds the chart components of the
    /// i-th frame vector at the corresponding state.
    pub frames: Vec<DMatrix<f64>>,
}

/// The curvature matrix at one instant along an extremal.
#[derive(Debug, Clone)]
pub struct CurvatureMatrix {
    pub t: f64,
    pub entries: DMatrix<f64>,
}

fn frame_matrix(frame: &[TangentVector]) -> DMatrix<f64> {
    let n = frame.len();
    let dim = frame[0].components.len();
    DMatrix::from_fn(dim, n, |r, c| frame[c].components[r])
}

/// Checks a frame for orthonormality at its base point.
fn check_orthonormal(model: &ManifoldModel, frame: &[TangentVector]) -> Result<()> {
    let n = model.dim();
    if frame.len() != n {
        return Err(Error::InvalidArgument(format!(
            "frame must contain {n} vectors"
        )));
    }
    let x = &frame[0].base;
    for (i, a) in frame.iter().enumerate() {
        if a.base != *x {
            return Err(Error::InvalidArgument("frame vectors share no base point".into()));
        }
        for (j, b) in frame.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            if (model.inner(x, &a.components, &b.components)? - want).abs() > 1e-9 {
                return Err(Error::InvalidArgument("frame is not orthonormal".into()));
            }
        }
    }
    Ok(())
}

/// Integrates the flow together with parallel transport of `frame0` along
/// the base curve, sharing one RK4 time grid.
pub fn transport_frame_along_extremal(
    system: &MechanicalSystem,
    state0: &CotangentState,
    frame0: &[TangentVector],
    t_end: f64,
    step: f64,
) -> Result<TransportedFrame> {
    check_orthonormal(&system.model, frame0)?;
    if frame0[0].base != state0.position {
        return Err(Error::InvalidArgument("frame must be based at the initial state".into()));
    }
    let prop = propagate(system, state0, frame0, t_end, step, false)?;
    Ok(TransportedFrame {
        times: prop.times,
        states: prop.states,
        frames: prop.frames,
    })
}

/// Curvature matrix `R̄_t` along the extremal from `state0` in the parallel
/// transport of `frame0`, evaluated at time `t`.
pub fn curvature_matrix_along_extremal(
    system: &MechanicalSystem,
    state0: &CotangentState,
    frame0: &[TangentVector],
    t: f64,
) -> Result<CurvatureMatrix> {
    let transported = transport_frame_along_extremal(system, state0, frame0, t, 1e-3)?;
    let idx = transported.times.len() - 1;
    let entries =
        curvature_matrix_at(system, &transported.states[idx], &transported.frames[idx])?;
    Ok(CurvatureMatrix { t, entries })
}

/// `R̄_ij = ⟨R(u, v_i) u + Hess U(v_i), v_j⟩` in the given frame.
pub fn curvature_matrix_at(
    system: &MechanicalSystem,
    state: &CotangentState,
    frame: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = frame.ncols();
    let x = &state.position;
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let vi = TangentVector::new(x.clone(), frame.column(i).into_owned());
        let rvi = curvature_operator(system, state, &vi)?;
        for j in 0..n {
            let vj = frame.column(j).into_owned();
            entries[(i, j)] = system.model.inner(x, &rvi.components, &vj)?;
        }
    }
    // enforce exact symmetry against roundoff
    let sym = (&entries + entries.transpose()) * 0.5;
    Ok(sym)
}

/// Canonical frame data along an extremal: the Darboux pairs `(e^i, f^i)`
/// as phase vectors in the tangent space at the initial state, the
/// transported point frame, and the curvature matrices driving the system.
#[derive(Debug, Clone)]
pub struct FramePropagation {
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    /// Parallel orthonormal frame at each flowed state (columns).
    pub frames: Vec<DMatrix<f64>>,
    /// 2n×n matrices; column i is the phase vector `e^i(t)`.
    pub e_vectors: Vec<DMatrix<f64>>,
    /// 2n×n matrices; column i is the phase vector `f^i(t)`.
    pub f_vectors: Vec<DMatrix<f64>>,
    pub curvature: Vec<DMatrix<f64>>,
}

impl FramePropagation {
    /// Basis matrix `[E_t | F_t]` at a sample index.
    pub fn basis_at(&self, idx: usize) -> DMatrix<f64> {
        let e = &self.e_vectors[idx];
        let f = &self.f_vectors[idx];
        let dim = e.nrows();
        let n = e.ncols();
        DMatrix::from_fn(dim, 2 * n, |r, c| if c < n { e[(r, c)] } else { f[(r, c - n)] })
    }
}

/// Propagates the canonical frame ODE `ė^i = −f^i`, `ḟ^i = Σ_j R̄_ij e^j`
/// along the extremal through `state0`, with initial data
/// `e^i(0) = (g v_i) vertical`, `f^i(0) = v_i horizontal`.
pub fn propagate_canonical_frame(
    system: &MechanicalSystem,
    state0: &CotangentState,
    frame0: &[TangentVector],
    t_end: f64,
    step: f64,
) -> Result<FramePropagation> {
    check_orthonormal(&system.model, frame0)?;
    if frame0[0].base != state0.position {
        return Err(Error::InvalidArgument("frame must be based at the initial state".into()));
    }
    propagate(system, state0, frame0, t_end, step, true)
}

/// Orthonormal frame adapted to the state: first vector along `g⁻¹ p`.
/// Falls back to an arbitrary orthonormal frame when the momentum vanishes.
pub fn adapted_frame(system: &MechanicalSystem, state: &CotangentState) -> Result<Vec<TangentVector>> {
    let x = &state.position;
    let (_, ginv) = system.model.metric_at(x)?;
    let u = &ginv * &state.momentum;
    if u.norm() < 1e-12 {
        system.model.orthonormal_frame(x, None)
    } else {
        let first = TangentVector::new(x.clone(), u);
        system.model.orthonormal_frame(x, Some(&first))
    }
}

/// Combined integration: flow, parallel frame, and optionally the canonical
/// frame pairs. Everything shares a single RK4 grid; the chart of the
/// flowed point may switch, while the canonical-frame phase vectors stay
/// expressed at the initial point whose chart never changes.
fn propagate(
    system: &MechanicalSystem,
    state0: &CotangentState,
    frame0: &[TangentVector],
    t_end: f64,
    step: f64,
    canonical: bool,
) -> Result<FramePropagation> {
    if !(0.0..=10.0).contains(&t_end) {
        return Err(Error::Precondition(format!(
            "propagation horizon t_end = {t_end} outside [0, 10]"
        )));
    }
    if step <= 0.0 {
        return Err(Error::Precondition("propagation step must be positive".into()));
    }
    system.model.check_point(&state0.position)?;

    let n = system.model.dim();
    let steps = if t_end > 0.0 {
        ((t_end / step).ceil() as usize).max(1)
    } else {
        0
    };
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };

    let mut x = state0.position.clone();
    let mut p = state0.momentum.clone();
    let mut frame = frame_matrix(frame0);

    let (g0, _) = system.model.metric_at(&x)?;
    let mut e_mat = DMatrix::zeros(2 * n, n);
    let mut f_mat = DMatrix::zeros(2 * n, n);
    if canonical {
        let split = structure_constants(system, &CotangentState::new(x.clone(), p.clone()))?;
        for i in 0..n {
            let gv = &g0 * frame0[i].components.clone();
            let cv = &split.structure_matrix * &frame0[i].components;
            for r in 0..n {
                e_mat[(n + r, i)] = gv[r];
                f_mat[(r, i)] = frame0[i].components[r];
                f_mat[(n + r, i)] = cv[r];
            }
        }
    }

    let state_of = |x: &ChartPoint, p: &DVector<f64>| CotangentState::new(x.clone(), p.clone());

    let mut times = vec![0.0];
    let mut states = vec![state_of(&x, &p)];
    let mut frames = vec![frame.clone()];
    let mut e_out = vec![e_mat.clone()];
    let mut f_out = vec![f_mat.clone()];
    let mut curvature = vec![curvature_matrix_at(system, &states[0], &frames[0])?];

    for i in 0..steps {
        let t = i as f64 * h;
        rk4_combined(system, &mut x, &mut p, &mut frame, &mut e_mat, &mut f_mat, h, canonical)?;

        match &system.model {
            ManifoldModel::FlatTorus { .. } => x = system.model.normalize_point(&x),
            ManifoldModel::Sphere2 { radius } => {
                if x.coords.norm() > crate::geometry::CHART_SWITCH_RADIUS * radius {
                    let jac = system.model.transition_jacobian(&x);
                    let inv_t = jac
                        .clone()
                        .try_inverse()
                        .expect("transition Jacobian invertible")
                        .transpose();
                    let x_new = system.model.transition_point(&x);
                    p = &inv_t * p;
                    frame = &jac * frame;
                    x = x_new;
                }
            }
            ManifoldModel::Hyperbolic2 { .. } => {
                if x.coords.norm() > crate::geometry::DISK_TRUNCATION_RADIUS {
                    return Err(Error::ChartEscape { time: t + h });
                }
            }
        }

        if canonical
            && (e_mat.norm() > PROPAGATION_NORM_CUTOFF || f_mat.norm() > PROPAGATION_NORM_CUTOFF)
        {
            return Err(Error::Unstable(PROPAGATION_NORM_CUTOFF));
        }

        let state = state_of(&x, &p);
        let rbar = curvature_matrix_at(system, &state, &frame)?;
        times.push(t + h);
        states.push(state);
        frames.push(frame.clone());
        e_out.push(e_mat.clone());
        f_out.push(f_mat.clone());
        curvature.push(rbar);
    }

    Ok(FramePropagation {
        times,
        states,
        frames,
        e_vectors: e_out,
        f_vectors: f_out,
        curvature,
    })
}

/// One RK4 step of the combined system (flow, parallel transport, canonical
/// frame pairs).
#[allow(clippy::too_many_arguments)]
fn rk4_combined(
    system: &MechanicalSystem,
    x: &mut ChartPoint,
    p: &mut DVector<f64>,
    frame: &mut DMatrix<f64>,
    e_mat: &mut DMatrix<f64>,
    f_mat: &mut DMatrix<f64>,
    h: f64,
    canonical: bool,
) -> Result<()> {
    type Slope = (DVector<f64>, DVector<f64>, DMatrix<f64>, DMatrix<f64>, DMatrix<f64>);

    let chart = x.chart;
    let ncols = frame.ncols();
    let (erows, ecols) = (e_mat.nrows(), e_mat.ncols());

    let deriv = |xc: &DVector<f64>,
                 pc: &DVector<f64>,
                 fr: &DMatrix<f64>,
                 em: &DMatrix<f64>,
                 fm: &DMatrix<f64>|
     -> Result<Slope> {
        // torus evaluators are periodic, so wrap mid-stage points (momentum
        // components are wrap-invariant); the other models' chart bounds
        // already include working slack, and chart switches happen only
        // between full steps
        let pt = match &system.model {
            ManifoldModel::FlatTorus { .. } => {
                system.model.normalize_point(&ChartPoint { chart, coords: xc.clone() })
            }
            _ => ChartPoint { chart, coords: xc.clone() },
        };
        let state = CotangentState::new(pt.clone(), pc.clone());
        let (xdot, pdot) = system.phase_velocity_unchecked(&state)?;

        // parallel transport: v̇^k = −Γ^k_ij ẋ^i v^j
        let gamma = system.model.christoffel(&pt)?;
        let n = xc.len();
        let mut fdot = DMatrix::zeros(n, ncols);
        for col in 0..ncols {
            for k in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc -= gamma[k][(i, j)] * xdot[i] * fr[(j, col)];
                    }
                }
                fdot[(k, col)] = acc;
            }
        }

        let (edot, fmdot) = if canonical {
            let rbar = curvature_matrix_at(system, &state, fr)?;
            (-fm.clone(), em * rbar)
        } else {
            (DMatrix::zeros(erows, ecols), DMatrix::zeros(erows, ecols))
        };

        Ok((xdot, pdot, fdot, edot, fmdot))
    };

    let (k1x, k1p, k1f, k1e, k1fm) = deriv(&x.coords, p, frame, e_mat, f_mat)?;
    let (k2x, k2p, k2f, k2e, k2fm) = deriv(
        &(&x.coords + &k1x * (h / 2.0)),
        &(&*p + &k1p * (h / 2.0)),
        &(&*frame + &k1f * (h / 2.0)),
        &(&*e_mat + &k1e * (h / 2.0)),
        &(&*f_mat + &k1fm * (h / 2.0)),
    )?;
    let (k3x, k3p, k3f, k3e, k3fm) = deriv(
        &(&x.coords + &k2x * (h / 2.0)),
        &(&*p + &k2p * (h / 2.0)),
        &(&*frame + &k2f * (h / 2.0)),
        &(&*e_mat + &k2e * (h / 2.0)),
        &(&*f_mat + &k2fm * (h / 2.0)),
    )?;
    let (k4x, k4p, k4f, k4e, k4fm) = deriv(
        &(&x.coords + &k3x * h),
        &(&*p + &k3p * h),
        &(&*frame + &k3f * h),
        &(&*e_mat + &k3e * h),
        &(&*f_mat + &k3fm * h),
    )?;

    x.coords += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    *p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
    *frame += (k1f + k2f * 2.0 + k3f * 2.0 + k4f) * (h / 6.0);
    if canonical {
        *e_mat += (k1e + k2e * 2.0 + k3e * 2.0 + k4e) * (h / 6.0);
        *f_mat += (k1fm + k2fm * 2.0 + k3fm * 2.0 + k4fm) * (h / 6.0);
    }
    Ok(())
}
