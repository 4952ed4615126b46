//! Natural mechanical systems: Hamiltonian `H(x,p) = ½ pᵀ g⁻¹ p + U(x)`,
//! the Hamiltonian vector field and its fixed-step flow, action integrals,
//! and two-point transport costs on the unit time horizon.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{
    ChartPoint, CovectorComponents, GridSpec, ManifoldModel, CHART_SWITCH_RADIUS,
    DISK_TRUNCATION_RADIUS,
};

/// Maximum Newton iterations for the boundary-value shooting solver.
const SHOOTING_MAX_ITER: usize = 50;
/// Endpoint residual required of the shooting solver.
const SHOOTING_TOL: f64 = 1e-8;
/// Integration step used internally by the cost solver.
const SHOOTING_STEP: f64 = 1e-3;

/// A manifold together with a potential and a declared Hessian bound for it.
#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    pub model: ManifoldModel,
    pub potential: ScalarField,
    /// Least `k` with `Hess U ≤ k I`, user-declared or grid-estimated.
    pub hess_potential_bound: f64,
}

/// A point of the cotangent bundle: a chart point plus covector components
/// in the same chart.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentState {
    pub position: ChartPoint,
    pub momentum: DVector<f64>,
}

impl CotangentState {
    pub fn new(position: ChartPoint, momentum: DVector<f64>) -> Self {
        CotangentState { position, momentum }
    }

    pub fn from_covector(covector: &CovectorComponents) -> Self {
        CotangentState {
            position: covector.base.clone(),
            momentum: covector.components.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.position.dim()
    }
}

/// A time-sampled trajectory of the Hamiltonian flow.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub times: Vec<f64>,
    pub states: Vec<CotangentState>,
    /// `max_t |H(state_t) − H(state_0)|` over the samples.
    pub energy_drift: f64,
    pub step: f64,
}

impl FlowResult {
    pub fn final_state(&self) -> &CotangentState {
        self.states.last().expect("flow stores at least the initial state")
    }
}

/// A curve sampled on a uniform time grid with chart velocities.
#[derive(Debug, Clone)]
pub struct SampledCurve {
    pub times: Vec<f64>,
    pub points: Vec<ChartPoint>,
    pub velocities: Vec<DVector<f64>>,
}

impl MechanicalSystem {
    /// System with a grid-estimated Hessian bound for the potential.
    pub fn new(model: ManifoldModel, potential: ScalarField) -> Result<Self> {
        model.validate()?;
        potential.check_compatible(&model)?;
        let bound = crate::field::estimate_hess_bound(&model, &potential, &GridSpec::default())?;
        Ok(MechanicalSystem {
            model,
            potential,
            hess_potential_bound: bound,
        })
    }

    /// System with a user-declared Hessian bound, validated against the grid
    /// estimate.
    pub fn with_bound(model: ManifoldModel, potential: ScalarField, bound: f64) -> Result<Self> {
        model.validate()?;
        potential.check_compatible(&model)?;
        let estimate = crate::field::estimate_hess_bound(&model, &potential, &GridSpec::default())?;
        if bound < estimate - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "declared Hessian bound {bound} is below the grid estimate {estimate}"
            )));
        }
        Ok(MechanicalSystem {
            model,
            potential,
            hess_potential_bound: bound,
        })
    }

    /// Free system (U ≡ 0).
    pub fn free(model: ManifoldModel) -> Self {
        MechanicalSystem {
            model,
            potential: ScalarField::zero(),
            hess_potential_bound: 0.0,
        }
    }

    pub fn is_free(&self) -> bool {
        self.potential.is_zero()
    }

    /// `H(x, p) = ½ pᵀ g⁻¹ p + U(x)`.
    pub fn hamiltonian(&self, state: &CotangentState) -> Result<f64> {
        let (_, ginv) = self.model.metric_at(&state.position)?;
        let kinetic = 0.5 * (state.momentum.transpose() * ginv * &state.momentum)[(0, 0)];
        Ok(kinetic + self.potential.value(&self.model, &state.position)?)
    }

    /// The Hamiltonian vector field: `(ẋ, ṗ) = (∂H/∂p, −∂H/∂x)`.
    pub fn phase_velocity(&self, state: &CotangentState) -> Result<(DVector<f64>, DVector<f64>)> {
        let x = &state.position;
        let p = &state.momentum;
        let (_, ginv) = self.model.metric_at(x)?;
        let dg = self.model.metric_derivatives(x)?;
        let du = self.potential.differential(&self.model, x)?.components;
        let n = self.model.dim();

        let xdot = &ginv * p;
        // ∂_k H = −½ pᵀ g⁻¹ (∂_k g) g⁻¹ p + ∂_k U, so
        // ṗ_k = ½ pᵀ g⁻¹ (∂_k g) g⁻¹ p − ∂_k U
        let gp = &ginv * p;
        let mut pdot = DVector::zeros(n);
        for k in 0..n {
            pdot[k] = 0.5 * (gp.transpose() * &dg[k] * &gp)[(0, 0)] - du[k];
        }
        Ok((xdot, pdot))
    }

    /// Speed of the base curve: the metric norm of ẋ = g⁻¹ p.
    pub fn base_speed(&self, state: &CotangentState) -> Result<f64> {
        let (_, ginv) = self.model.metric_at(&state.position)?;
        let v = ginv * &state.momentum;
        self.model.norm(&state.position, &v)
    }

    /// Classical fixed-step fourth-order integration of the Hamiltonian flow
    /// with torus wrapping and sphere chart switching. Fails with a chart
    /// escape on the truncated disk.
    pub fn flow(&self, state0: &CotangentState, t_end: f64, step: f64) -> Result<FlowResult> {
        if !(0.0..=10.0).contains(&t_end) {
            return Err(Error::Precondition(format!(
                "flow horizon t_end = {t_end} outside [0, 10]"
            )));
        }
        if step <= 0.0 {
            return Err(Error::Precondition("flow step must be positive".into()));
        }
        self.model.check_point(&state0.position)?;

        let steps = ((t_end / step).ceil() as usize).max(1);
        let h = if t_end > 0.0 { t_end / steps as f64 } else { 0.0 };

        let mut x = state0.position.clone();
        let mut p = state0.momentum.clone();
        let energy0 = self.hamiltonian(state0)?;
        let mut drift: f64 = 0.0;

        let mut times = Vec::with_capacity(steps + 1);
        let mut states = Vec::with_capacity(steps + 1);
        times.push(0.0);
        states.push(CotangentState::new(x.clone(), p.clone()));

        if t_end == 0.0 {
            return Ok(FlowResult { times, states, energy_drift: 0.0, step });
        }

        for i in 0..steps {
            let t = i as f64 * h;
            self.rk4_step(&mut x, &mut p, h)?;

            // keep the representation inside the chart invariants
            match &self.model {
                ManifoldModel::FlatTorus { .. } => {
                    x = self.model.normalize_point(&x);
                }
                ManifoldModel::Sphere2 { radius } => {
                    if x.coords.norm() > CHART_SWITCH_RADIUS * radius {
                        let (nx, np) = self.model.transition_covector_pair(&x, &p);
                        x = nx;
                        p = np;
                    }
                }
                ManifoldModel::Hyperbolic2 { .. } => {
                    if x.coords.norm() > DISK_TRUNCATION_RADIUS {
                        return Err(Error::ChartEscape { time: t + h });
                    }
                }
            }

            let state = CotangentState::new(x.clone(), p.clone());
            drift = drift.max((self.hamiltonian(&state)? - energy0).abs());
            times.push(t + h);
            states.push(state);
        }

        Ok(FlowResult { times, states, energy_drift: drift, step: h })
    }

    fn rk4_step(&self, x: &mut ChartPoint, p: &mut DVector<f64>, h: f64) -> Result<()> {
        let eval = |xc: &DVector<f64>, pc: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
            let state = CotangentState::new(
                ChartPoint { chart: x.chart, coords: xc.clone() },
                pc.clone(),
            );
            self.phase_velocity_unchecked(&state)
        };

        let (k1x, k1p) = eval(&x.coords, p)?;
        let (k2x, k2p) = eval(&(&x.coords + &k1x * (h / 2.0)), &(&*p + &k1p * (h / 2.0)))?;
        let (k3x, k3p) = eval(&(&x.coords + &k2x * (h / 2.0)), &(&*p + &k2p * (h / 2.0)))?;
        let (k4x, k4p) = eval(&(&x.coords + &k3x * h), &(&*p + &k3p * h))?;

        x.coords += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        *p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
        Ok(())
    }

    /// Like `phase_velocity` but skips the chart-domain check so that RK4
    /// stages may momentarily leave the nominal chart bounds (the metric
    /// and field formulas remain smooth there).
    pub(crate) fn phase_velocity_unchecked(
        &self,
        state: &CotangentState,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let x = &state.position;
        let p = &state.momentum;
        let (ginv, dg) = self.metric_data_unchecked(x);
        let du = self.potential_gradient_unchecked(x)?;
        let n = x.dim();

        let xdot = &ginv * p;
        let gp = &ginv * p;
        let mut pdot = DVector::zeros(n);
        for k in 0..n {
            pdot[k] = 0.5 * (gp.transpose() * &dg[k] * &gp)[(0, 0)] - du[k];
        }
        Ok((xdot, pdot))
    }

    fn metric_data_unchecked(&self, x: &ChartPoint) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = x.dim();
        let (factor, dphi): (f64, DVector<f64>) = match &self.model {
            ManifoldModel::FlatTorus { .. } => (1.0, DVector::zeros(n)),
            ManifoldModel::Sphere2 { radius } => {
                let r2 = radius * radius;
                let q = r2 + x.coords.norm_squared();
                (4.0 * r2 * r2 / (q * q), &x.coords * (-2.0 / q))
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                let q = 1.0 - x.coords.norm_squared();
                (4.0 * scale * scale / (q * q), &x.coords * (2.0 / q))
            }
        };
        let ginv = DMatrix::identity(n, n) / factor;
        let dg: Vec<DMatrix<f64>> = (0..n)
            .map(|k| DMatrix::identity(n, n) * (2.0 * dphi[k] * factor))
            .collect();
        (ginv, dg)
    }

    fn potential_gradient_unchecked(&self, x: &ChartPoint) -> Result<DVector<f64>> {
        if self.potential.is_zero() {
            return Ok(DVector::zeros(x.dim()));
        }
        let (_, grad, _) = self.potential.raw_derivatives_unchecked(&self.model, x)?;
        Ok(grad)
    }

    /// Converts a flow trajectory into a sampled curve with velocities
    /// `ẋ = g⁻¹ p`.
    pub fn trajectory_curve(&self, flow: &FlowResult) -> Result<SampledCurve> {
        let mut points = Vec::with_capacity(flow.states.len());
        let mut velocities = Vec::with_capacity(flow.states.len());
        for s in &flow.states {
            let (_, ginv) = self.model.metric_at(&s.position)?;
            points.push(s.position.clone());
            velocities.push(ginv * &s.momentum);
        }
        Ok(SampledCurve {
            times: flow.times.clone(),
            points,
            velocities,
        })
    }

    /// Action `∫ L(γ, γ̇) dt = ∫ (½|γ̇|² − U(γ)) dt` of a sampled curve by
    /// composite Simpson quadrature.
    pub fn action(&self, curve: &SampledCurve) -> Result<f64> {
        let m = curve.times.len();
        if m < 2 || curve.points.len() != m || curve.velocities.len() != m {
            return Err(Error::InvalidArgument(
                "curve must contain matching times, points, and velocities".into(),
            ));
        }
        let h = curve.times[1] - curve.times[0];
        for w in curve.times.windows(2) {
            if ((w[1] - w[0]) - h).abs() > 1e-12 {
                return Err(Error::InvalidArgument("curve time grid must be uniform".into()));
            }
        }
        let mut lagrangian = Vec::with_capacity(m);
        for (x, v) in curve.points.iter().zip(&curve.velocities) {
            let (g, _) = self.model.metric_at(x)?;
            let kinetic = 0.5 * (v.transpose() * g * v)[(0, 0)];
            lagrangian.push(kinetic - self.potential.value(&self.model, x)?);
        }
        Ok(simpson(&lagrangian, h))
    }

    /// Action along a stored flow trajectory, using the Legendre identity
    /// `p·ẋ − H = L` so only cotangent data is needed.
    pub fn flow_action(&self, flow: &FlowResult) -> Result<f64> {
        let mut lagrangian = Vec::with_capacity(flow.states.len());
        for s in &flow.states {
            let (_, ginv) = self.model.metric_at(&s.position)?;
            let kinetic = 0.5 * (s.momentum.transpose() * ginv * &s.momentum)[(0, 0)];
            lagrangian.push(kinetic - self.potential.value(&self.model, &s.position)?);
        }
        Ok(simpson(&lagrangian, flow.step))
    }

    /// Transport cost `c(x, y)`: the minimal action over unit-time curves.
    /// Free systems use the closed-form `distance²/2`; otherwise a Newton
    /// shooting solve on the initial covector, seeded with the free-geodesic
    /// log map.
    pub fn cost(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        if self.is_free() {
            let d = self.model.distance(x, y)?;
            return Ok(0.5 * d * d);
        }
        let (_, action) = self.shoot(x, y)?;
        Ok(action)
    }

    /// Newton shooting for the two-point boundary problem. Returns the
    /// initial covector of the minimizing connecting extremal found and its
    /// action.
    ///
    /// The solver tracks the extremal branch continuously connected to the
    /// free-geodesic minimizer by homotopy in the potential strength, which
    /// keeps Newton from wandering onto non-minimizing branches. On tori one
    /// branch per winding class is considered and classes whose length lower
    /// bound already exceeds the straight-path upper bound are pruned.
    /// Convergence is expected when the linearized period of the potential
    /// exceeds the unit horizon (roughly `hess_potential_bound < 4π²`);
    /// stronger potentials put targets outside the solver's basin.
    pub fn shoot(&self, x: &ChartPoint, y: &ChartPoint) -> Result<(CovectorComponents, f64)> {
        self.model.check_point(x)?;
        self.model.check_point(y)?;
        let (g, _) = self.model.metric_at(x)?;
        let base_v = self.model.log_map(x, y)?.components;
        let u_max = self.potential_sup_abs();

        let mut seeds: Vec<DVector<f64>> = Vec::new();
        match &self.model {
            ManifoldModel::FlatTorus { periods } => {
                let mut offsets: Vec<Vec<f64>> = vec![vec![]];
                for t in periods {
                    let mut next = Vec::new();
                    for o in &offsets {
                        for w in [-1.0, 0.0, 1.0] {
                            let mut o2 = o.clone();
                            o2.push(w * t);
                            next.push(o2);
                        }
                    }
                    offsets = next;
                }
                // any extremal in class w has action ≥ ½|v_w|² − U_max while
                // the straight path in the base class costs ≤ ½|v₀|² + U_max
                let budget = 0.5 * base_v.norm_squared() + 2.0 * u_max + 1e-9;
                for o in offsets {
                    let v = &base_v + DVector::from_vec(o);
                    if 0.5 * v.norm_squared() <= budget {
                        seeds.push(v);
                    }
                }
            }
            _ => seeds.push(base_v.clone()),
        }
        seeds.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap());

        let stages: &[f64] = if u_max == 0.0 {
            &[1.0]
        } else {
            &[0.25, 0.5, 0.75, 1.0]
        };

        let mut best: Option<(DVector<f64>, f64)> = None;
        let mut best_residual = f64::INFINITY;
        'seed: for v in seeds {
            let mut p = &g * v;
            for s in stages {
                let system = self.scaled_potential(*s);
                match system.newton_polish(x, y, p) {
                    Ok(polished) => p = polished,
                    Err(res) => {
                        best_residual = best_residual.min(res);
                        continue 'seed;
                    }
                }
            }
            let flow = self.flow(&CotangentState::new(x.clone(), p.clone()), 1.0, SHOOTING_STEP)?;
            let action = self.flow_action(&flow)?;
            if best.as_ref().is_none_or(|(_, a)| action < *a) {
                best = Some((p, action));
            }
        }
        match best {
            Some((p, action)) => Ok((CovectorComponents::new(x.clone(), p), action)),
            None => Err(Error::ShootingDiverged {
                iterations: SHOOTING_MAX_ITER,
                residual: best_residual,
            }),
        }
    }

    fn scaled_potential(&self, s: f64) -> MechanicalSystem {
        MechanicalSystem {
            model: self.model.clone(),
            potential: ScalarField::new(self.potential.expression, self.potential.amplitude * s),
            hess_potential_bound: self.hess_potential_bound * s,
        }
    }

    /// Upper bound on |U| over the model.
    fn potential_sup_abs(&self) -> f64 {
        use crate::field::FieldExpression::*;
        let a = self.potential.amplitude.abs();
        match (&self.potential.expression, &self.model) {
            (Zero, _) => 0.0,
            (CosX1, _) => a,
            (CosSum, _) => 2.0 * a,
            (Height, ManifoldModel::Sphere2 { radius }) => a * radius,
            (Linear, ManifoldModel::FlatTorus { periods }) => a * periods[0],
            (Linear, _) => a,
            _ => a,
        }
    }

    /// Damped Newton iteration on the endpoint mismatch. Returns the
    /// polished covector or the best residual reached.
    fn newton_polish(
        &self,
        x: &ChartPoint,
        y: &ChartPoint,
        mut p: DVector<f64>,
    ) -> std::result::Result<DVector<f64>, f64> {
        let n = self.model.dim();
        let eval = |p: &DVector<f64>| self.shoot_residual(x, y, p).map_err(|_| f64::INFINITY);
        let mut residual = eval(&p)?.norm();
        for _ in 0..SHOOTING_MAX_ITER {
            if residual <= SHOOTING_TOL {
                return Ok(p);
            }
            let r = eval(&p)?;
            let mut jac = DMatrix::zeros(n, n);
            let fd = 1e-6 * (1.0 + p.norm());
            for k in 0..n {
                let mut pp = p.clone();
                pp[k] += fd;
                let mut pm = p.clone();
                pm[k] -= fd;
                let rp = eval(&pp)?;
                let rm = eval(&pm)?;
                for i in 0..n {
                    jac[(i, k)] = (rp[i] - rm[i]) / (2.0 * fd);
                }
            }
            let delta = match jac.lu().solve(&r) {
                Some(d) => d,
                None => return Err(residual),
            };
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..5 {
                let trial = &p - &delta * scale;
                if let Ok(tr) = self.shoot_residual(x, y, &trial) {
                    let trial_res = tr.norm();
                    if trial_res < residual {
                        p = trial;
                        residual = trial_res;
                        accepted = true;
                        break;
                    }
                }
                scale *= 0.5;
            }
            if !accepted {
                return Err(residual);
            }
        }
        if residual <= SHOOTING_TOL {
            Ok(p)
        } else {
            Err(residual)
        }
    }

    /// Chart-coordinate mismatch between the time-1 endpoint started at
    /// `(x, p)` and the target `y`.
    fn shoot_residual(&self, x: &ChartPoint, y: &ChartPoint, p: &DVector<f64>) -> Result<DVector<f64>> {
        let flow = self.flow(&CotangentState::new(x.clone(), p.clone()), 1.0, SHOOTING_STEP)?;
        let end = flow.final_state().position.clone();
        match &self.model {
            ManifoldModel::FlatTorus { periods } => {
                let mut r = DVector::zeros(periods.len());
                for (i, t) in periods.iter().enumerate() {
                    let mut d = (end.coords[i] - y.coords[i]).rem_euclid(*t);
                    if d > t / 2.0 {
                        d -= t;
                    }
                    r[i] = d;
                }
                Ok(r)
            }
            _ => {
                let end = if end.chart == y.chart {
                    end
                } else {
                    self.model.transition_point(&end)
                };
                Ok(&end.coords - &y.coords)
            }
        }
    }
}

/// Composite Simpson quadrature on a uniform grid; falls back to a 3/8 tail
/// when the interval count is odd.
fn simpson(values: &[f64], h: f64) -> f64 {
    let m = values.len();
    if m < 2 {
        return 0.0;
    }
    if m == 2 {
        return 0.5 * h * (values[0] + values[1]);
    }
    let intervals = m - 1;
    if intervals.is_multiple_of(2) {
        let mut acc = values[0] + values[intervals];
        for (i, v) in values.iter().enumerate().take(intervals).skip(1) {
            acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        acc * h / 3.0
    } else if intervals >= 4 {
        // Simpson on the leading even block, 3/8 rule on the last three.
        let head = simpson(&values[..m - 3], h);
        let tail = 3.0 * h / 8.0
            * (values[m - 4] + 3.0 * values[m - 3] + 3.0 * values[m - 2] + values[m - 1]);
        head + tail
    } else {
        // exactly 3 intervals
        3.0 * h / 8.0 * (values[0] + 3.0 * values[1] + 3.0 * values[2] + values[3])
    }
}
