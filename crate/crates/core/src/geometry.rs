//! Model manifolds with charts, metric tensors, Christoffel symbols, Riemann
//! curvature, orthonormal frames, and closed-form geodesic distances.
//!
//! Three models are supported: flat tori of dimension 1 to 3 (one wrapped
//! chart), the round 2-sphere (two stereographic charts), and the Poincaré
//! disk truncated to radius 0.9 (one chart, included to exercise negative
//! curvature despite being non-compact).
//!
//! Curvature sign convention: `R(u,v)w = ∇_v∇_u w − ∇_u∇_v w + ∇_[u,v] w`,
//! so that `⟨R(u,v)u, v⟩ / (|u|²|v|² − ⟨u,v⟩²)` equals the sectional
//! curvature.

// tensor contractions read clearest with explicit indices
#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radius (in units of the sphere radius) beyond which stereographic
/// coordinates are handed to the opposite chart.
pub const CHART_SWITCH_RADIUS: f64 = 1.5;

/// The Poincaré disk flow atlas is truncated to this coordinate radius;
/// chart points remain valid out to `DISK_CHART_BOUND`.
pub const DISK_TRUNCATION_RADIUS: f64 = 0.9;

/// Hard validity bound for disk chart coordinates (the metric degenerates
/// as |u| → 1).
pub const DISK_CHART_BOUND: f64 = 0.995;

/// One of the supported model geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ManifoldModel {
    /// Flat torus with the given periods, one wrapped chart, coordinates in
    /// `[0, period_i)`.
    FlatTorus { periods: Vec<f64> },
    /// Round 2-sphere of the given radius with two stereographic charts:
    /// chart 0 projects from the north pole (covers everything but the north
    /// pole), chart 1 from the south pole.
    Sphere2 { radius: f64 },
    /// Poincaré disk scaled so the curvature is `-1/scale²`, restricted to
    /// the coordinate disk of radius 0.9. Non-compact.
    Hyperbolic2 { scale: f64 },
}

/// A point expressed in one chart of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: u8,
    pub coords: DVector<f64>,
}

impl ChartPoint {
    pub fn new(chart: u8, coords: Vec<f64>) -> Self {
        ChartPoint {
            chart,
            coords: DVector::from_vec(coords),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A tangent vector attached to a chart point, components in that chart.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub base: ChartPoint,
    pub components: DVector<f64>,
}

impl TangentVector {
    pub fn new(base: ChartPoint, components: DVector<f64>) -> Self {
        TangentVector { base, components }
    }
}

/// Covector components attached to a chart point (transform by the inverse
/// transpose of the chart Jacobian).
#[derive(Debug, Clone, PartialEq)]
pub struct CovectorComponents {
    pub base: ChartPoint,
    pub components: DVector<f64>,
}

impl CovectorComponents {
    pub fn new(base: ChartPoint, components: DVector<f64>) -> Self {
        CovectorComponents { base, components }
    }
}

/// Conformal factor data: the chart metric is `exp(2 phi) * I`.
struct ConformalData {
    /// exp(2 phi)
    factor: f64,
    /// partial derivatives of phi
    dphi: DVector<f64>,
    /// second partial derivatives of phi
    d2phi: DMatrix<f64>,
}

impl ManifoldModel {
    pub fn dim(&self) -> usize {
        match self {
            ManifoldModel::FlatTorus { periods } => periods.len(),
            ManifoldModel::Sphere2 { .. } | ManifoldModel::Hyperbolic2 { .. } => 2,
        }
    }

    /// The constant sectional curvature of the model, which is also the
    /// least upper curvature bound used by the certifiers.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            ManifoldModel::FlatTorus { .. } => 0.0,
            ManifoldModel::Sphere2 { radius } => 1.0 / (radius * radius),
            ManifoldModel::Hyperbolic2 { scale } => -1.0 / (scale * scale),
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, ManifoldModel::Hyperbolic2 { .. })
    }

    pub fn chart_count(&self) -> usize {
        match self {
            ManifoldModel::Sphere2 { .. } => 2,
            _ => 1,
        }
    }

    /// Validates the model parameters themselves.
    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldModel::FlatTorus { periods } => {
                if periods.is_empty() || periods.len() > 3 {
                    return Err(Error::InvalidArgument(
                        "flat torus dimension must be 1 to 3".into(),
                    ));
                }
                if periods.iter().any(|t| !t.is_finite() || *t <= 0.0) {
                    return Err(Error::InvalidArgument(
                        "torus periods must be positive".into(),
                    ));
                }
            }
            ManifoldModel::Sphere2 { radius } => {
                if !radius.is_finite() || *radius <= 0.0 {
                    return Err(Error::InvalidArgument("sphere radius must be positive".into()));
                }
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                if !scale.is_finite() || *scale <= 0.0 {
                    return Err(Error::InvalidArgument(
                        "hyperbolic scale must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Checks that `x` lies in the domain of its chart.
    pub fn check_point(&self, x: &ChartPoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Domain(format!(
                "point has dimension {}, model has dimension {}",
                x.dim(),
                self.dim()
            )));
        }
        if x.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coordinates".into()));
        }
        match self {
            ManifoldModel::FlatTorus { periods } => {
                if x.chart != 0 {
                    return Err(Error::Domain("torus has a single chart".into()));
                }
                for (c, t) in x.coords.iter().zip(periods) {
                    if *c < 0.0 || *c >= *t {
                        return Err(Error::Domain(format!(
                            "torus coordinate {c} outside [0, {t})"
                        )));
                    }
                }
            }
            ManifoldModel::Sphere2 { radius } => {
                if x.chart > 1 {
                    return Err(Error::Domain("sphere has charts 0 and 1".into()));
                }
                // A small overshoot is tolerated so that transitional states
                // remain representable; `normalize_point` restores the bound.
                if x.coords.norm() > 4.0 * CHART_SWITCH_RADIUS * radius {
                    return Err(Error::Domain(
                        "stereographic coordinates far outside the working disk".into(),
                    ));
                }
            }
            ManifoldModel::Hyperbolic2 { .. } => {
                if x.chart != 0 {
                    return Err(Error::Domain("disk has a single chart".into()));
                }
                if x.coords.norm() > DISK_CHART_BOUND {
                    return Err(Error::Domain(format!(
                        "disk coordinates |u| = {} outside the chart bound {}",
                        x.coords.norm(),
                        DISK_CHART_BOUND
                    )));
                }
            }
        }
        Ok(())
    }

    /// Wraps torus coordinates and switches sphere charts where needed so the
    /// chart invariants hold.
    pub fn normalize_point(&self, x: &ChartPoint) -> ChartPoint {
        match self {
            ManifoldModel::FlatTorus { periods } => {
                let coords = DVector::from_iterator(
                    periods.len(),
                    x.coords.iter().zip(periods).map(|(c, t)| c.rem_euclid(*t)),
                );
                ChartPoint { chart: 0, coords }
            }
            ManifoldModel::Sphere2 { radius } => {
                if x.coords.norm() > CHART_SWITCH_RADIUS * radius {
                    self.transition_point(x)
                } else {
                    x.clone()
                }
            }
            ManifoldModel::Hyperbolic2 { .. } => x.clone(),
        }
    }

    /// Maps a sphere point to the opposite stereographic chart.
    /// Identity on single-chart models.
    pub fn transition_point(&self, x: &ChartPoint) -> ChartPoint {
        match self {
            ManifoldModel::Sphere2 { radius } => {
                let n2 = x.coords.norm_squared();
                assert!(n2 > 0.0, "chart transition undefined at the pole image");
                ChartPoint {
                    chart: 1 - x.chart,
                    coords: &x.coords * (radius * radius / n2),
                }
            }
            _ => x.clone(),
        }
    }

    /// Jacobian of the chart transition map at `x` (sphere only; identity
    /// otherwise). Vector components transform by this matrix, covector
    /// components by its inverse transpose.
    pub fn transition_jacobian(&self, x: &ChartPoint) -> DMatrix<f64> {
        match self {
            ManifoldModel::Sphere2 { radius } => {
                let n2 = x.coords.norm_squared();
                let n = x.coords.len();
                let mut j = DMatrix::identity(n, n);
                for i in 0..n {
                    for l in 0..n {
                        j[(i, l)] -= 2.0 * x.coords[i] * x.coords[l] / n2;
                    }
                }
                j * (radius * radius / n2)
            }
            _ => DMatrix::identity(self.dim(), self.dim()),
        }
    }

    /// Re-expresses a cotangent pair `(x, p)` in the opposite sphere chart.
    pub fn transition_covector_pair(&self, x: &ChartPoint, p: &DVector<f64>) -> (ChartPoint, DVector<f64>) {
        let jac = self.transition_jacobian(x);
        let x_new = self.transition_point(x);
        let inv = jac
            .try_inverse()
            .expect("chart transition Jacobian is invertible away from the pole");
        (x_new, inv.transpose() * p)
    }

    /// Moves a tangent vector to the opposite sphere chart.
    pub fn transition_vector(&self, v: &TangentVector) -> TangentVector {
        let jac = self.transition_jacobian(&v.base);
        TangentVector {
            base: self.transition_point(&v.base),
            components: jac * &v.components,
        }
    }

    fn conformal_data(&self, x: &ChartPoint) -> ConformalData {
        let n = self.dim();
        match self {
            ManifoldModel::FlatTorus { .. } => ConformalData {
                factor: 1.0,
                dphi: DVector::zeros(n),
                d2phi: DMatrix::zeros(n, n),
            },
            ManifoldModel::Sphere2 { radius } => {
                let r2 = radius * radius;
                let q = r2 + x.coords.norm_squared();
                let factor = 4.0 * r2 * r2 / (q * q);
                let dphi = &x.coords * (-2.0 / q);
                let mut d2phi = DMatrix::identity(2, 2) * (-2.0 / q);
                for i in 0..2 {
                    for j in 0..2 {
                        d2phi[(i, j)] += 4.0 * x.coords[i] * x.coords[j] / (q * q);
                    }
                }
                ConformalData { factor, dphi, d2phi }
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                let q = 1.0 - x.coords.norm_squared();
                let factor = 4.0 * scale * scale / (q * q);
                let dphi = &x.coords * (2.0 / q);
                let mut d2phi = DMatrix::identity(2, 2) * (2.0 / q);
                for i in 0..2 {
                    for j in 0..2 {
                        d2phi[(i, j)] += 4.0 * x.coords[i] * x.coords[j] / (q * q);
                    }
                }
                ConformalData { factor, dphi, d2phi }
            }
        }
    }

    /// Metric tensor and its inverse at `x`.
    pub fn metric_at(&self, x: &ChartPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_point(x)?;
        let n = self.dim();
        let c = self.conformal_data(x).factor;
        Ok((
            DMatrix::identity(n, n) * c,
            DMatrix::identity(n, n) / c,
        ))
    }

    /// Partial derivatives of the metric: `out[k][(i,j)] = ∂_k g_ij`.
    pub fn metric_derivatives(&self, x: &ChartPoint) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        let n = self.dim();
        let data = self.conformal_data(x);
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            out.push(DMatrix::identity(n, n) * (2.0 * data.dphi[k] * data.factor));
        }
        Ok(out)
    }

    /// Second partial derivatives: `out[l][k][(i,j)] = ∂_l ∂_k g_ij`.
    fn metric_second_derivatives(&self, x: &ChartPoint) -> Result<Vec<Vec<DMatrix<f64>>>> {
        self.check_point(x)?;
        let n = self.dim();
        let data = self.conformal_data(x);
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        for l in 0..n {
            for k in 0..n {
                let coeff = (2.0 * data.d2phi[(l, k)] + 4.0 * data.dphi[k] * data.dphi[l])
                    * data.factor;
                out[l][k] = DMatrix::identity(n, n) * coeff;
            }
        }
        Ok(out)
    }

    /// Christoffel symbols from the standard metric-derivative formula:
    /// `out[k][(i,j)] = Γ^k_ij`.
    pub fn christoffel(&self, x: &ChartPoint) -> Result<Vec<DMatrix<f64>>> {
        let (_, ginv) = self.metric_at(x)?;
        let dg = self.metric_derivatives(x)?;
        let n = self.dim();
        let mut gamma = vec![DMatrix::zeros(n, n); n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma[k][(i, j)] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    /// Partial derivatives of the Christoffel symbols:
    /// `out[m][k][(i,j)] = ∂_m Γ^k_ij`.
    fn christoffel_derivatives(&self, x: &ChartPoint) -> Result<Vec<Vec<DMatrix<f64>>>> {
        let (_, ginv) = self.metric_at(x)?;
        let dg = self.metric_derivatives(x)?;
        let d2g = self.metric_second_derivatives(x)?;
        let n = self.dim();

        // ∂_m g^{kl} = -(g⁻¹ ∂_m g g⁻¹)^{kl}
        let dginv: Vec<DMatrix<f64>> = (0..n).map(|m| -(&ginv * &dg[m] * &ginv)).collect();

        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        for m in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += dginv[m][(k, l)]
                                * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                            s += ginv[(k, l)]
                                * (d2g[m][i][(j, l)] + d2g[m][j][(i, l)] - d2g[m][l][(i, j)]);
                        }
                        out[m][k][(i, j)] = 0.5 * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Riemannian inner product of two component vectors at `x`.
    pub fn inner(&self, x: &ChartPoint, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let (g, _) = self.metric_at(x)?;
        Ok((u.transpose() * g * v)[(0, 0)])
    }

    pub fn norm(&self, x: &ChartPoint, u: &DVector<f64>) -> Result<f64> {
        Ok(self.inner(x, u, u)?.max(0.0).sqrt())
    }

    /// Curvature tensor applied to vectors: returns `R(u, v) w` with the
    /// convention fixed in the module docs (sectional curvature equals
    /// `⟨R(u,v)u, v⟩` on orthonormal pairs).
    pub fn riemann_curvature(
        &self,
        x: &ChartPoint,
        u: &TangentVector,
        v: &TangentVector,
        w: &TangentVector,
    ) -> Result<TangentVector> {
        for t in [u, v, w] {
            if t.base != *x {
                return Err(Error::InvalidArgument(
                    "curvature arguments must share the base point".into(),
                ));
            }
        }
        let gamma = self.christoffel(x)?;
        let dgamma = self.christoffel_derivatives(x)?;
        let n = self.dim();
        let mut out = DVector::zeros(n);
        // R(∂_i, ∂_j) ∂_k = (∂_j Γ^l_ik − ∂_i Γ^l_jk + Γ^m_ik Γ^l_jm − Γ^m_jk Γ^l_im) ∂_l
        for l in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut r = dgamma[j][l][(i, k)] - dgamma[i][l][(j, k)];
                        for m in 0..n {
                            r += gamma[m][(i, k)] * gamma[l][(j, m)]
                                - gamma[m][(j, k)] * gamma[l][(i, m)];
                        }
                        acc += r * u.components[i] * v.components[j] * w.components[k];
                    }
                }
            }
            out[l] = acc;
        }
        Ok(TangentVector::new(x.clone(), out))
    }

    /// Gram–Schmidt orthonormal frame at `x`. If `first` is given, the frame
    /// starts with its normalization; remaining directions are chosen from
    /// the coordinate basis by largest residual norm, ties broken by
    /// coordinate order.
    pub fn orthonormal_frame(
        &self,
        x: &ChartPoint,
        first: Option<&TangentVector>,
    ) -> Result<Vec<TangentVector>> {
        self.check_point(x)?;
        let n = self.dim();
        let mut frame: Vec<DVector<f64>> = Vec::with_capacity(n);

        if let Some(f) = first {
            if f.base != *x {
                return Err(Error::InvalidArgument(
                    "first frame vector not based at the frame point".into(),
                ));
            }
            let norm = self.norm(x, &f.components)?;
            if norm < 1e-14 {
                return Err(Error::InvalidArgument("zero first frame vector".into()));
            }
            frame.push(&f.components / norm);
        }

        while frame.len() < n {
            // Residual of each coordinate direction against the current frame.
            let mut best: Option<(usize, f64, DVector<f64>)> = None;
            for idx in 0..n {
                let mut cand = DVector::zeros(n);
                cand[idx] = 1.0;
                for e in &frame {
                    let proj = self.inner(x, &cand, e)?;
                    cand -= e * proj;
                }
                let norm = self.norm(x, &cand)?;
                if best.as_ref().is_none_or(|(_, b, _)| norm > *b + 1e-12) {
                    best = Some((idx, norm, cand));
                }
            }
            let (_, norm, cand) = best.expect("candidate always exists");
            if norm < 1e-12 {
                return Err(Error::InvalidArgument(
                    "coordinate basis does not complete the frame".into(),
                ));
            }
            frame.push(cand / norm);
        }

        Ok(frame
            .into_iter()
            .map(|c| TangentVector::new(x.clone(), c))
            .collect())
    }

    /// Embeds a sphere chart point into R³.
    fn sphere_embed(radius: f64, x: &ChartPoint) -> [f64; 3] {
        let r2 = radius * radius;
        let n2 = x.coords.norm_squared();
        let q = n2 + r2;
        let xx = 2.0 * r2 * x.coords[0] / q;
        let yy = 2.0 * r2 * x.coords[1] / q;
        let mut zz = radius * (n2 - r2) / q;
        if x.chart == 1 {
            zz = -zz;
        }
        [xx, yy, zz]
    }

    /// Inverse of `sphere_embed`, choosing the chart that keeps coordinates
    /// within the switch radius.
    fn sphere_chart_of(radius: f64, p: [f64; 3]) -> ChartPoint {
        let denom0 = radius - p[2];
        let denom1 = radius + p[2];
        if denom0 >= denom1 {
            ChartPoint::new(0, vec![radius * p[0] / denom0, radius * p[1] / denom0])
        } else {
            ChartPoint::new(1, vec![radius * p[0] / denom1, radius * p[1] / denom1])
        }
    }

    /// Differential of the embedding map at `x` (3×2), used to move tangent
    /// vectors between the chart and the ambient space.
    fn sphere_embed_differential(radius: f64, x: &ChartPoint) -> DMatrix<f64> {
        let r2 = radius * radius;
        let n2 = x.coords.norm_squared();
        let q = n2 + r2;
        let u = &x.coords;
        let mut d = DMatrix::zeros(3, 2);
        for j in 0..2 {
            for i in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                d[(i, j)] = 2.0 * r2 * (delta * q - 2.0 * u[i] * u[j]) / (q * q);
            }
            let mut dz = radius * (2.0 * u[j] * q - (n2 - r2) * 2.0 * u[j]) / (q * q);
            if x.chart == 1 {
                dz = -dz;
            }
            d[(2, j)] = dz;
        }
        d
    }

    /// Closed-form geodesic distance between two points.
    pub fn distance(&self, x: &ChartPoint, y: &ChartPoint) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self {
            ManifoldModel::FlatTorus { periods } => {
                let mut acc = 0.0;
                for ((a, b), t) in x.coords.iter().zip(y.coords.iter()).zip(periods) {
                    let d = (a - b).abs().rem_euclid(*t);
                    let d = d.min(t - d);
                    acc += d * d;
                }
                Ok(acc.sqrt())
            }
            ManifoldModel::Sphere2 { radius } => {
                let p = Self::sphere_embed(*radius, x);
                let q = Self::sphere_embed(*radius, y);
                let dot = (p[0] * q[0] + p[1] * q[1] + p[2] * q[2]) / (radius * radius);
                Ok(radius * dot.clamp(-1.0, 1.0).acos())
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                let diff = &x.coords - &y.coords;
                let num = 2.0 * diff.norm_squared();
                let den = (1.0 - x.coords.norm_squared()) * (1.0 - y.coords.norm_squared());
                Ok(scale * (1.0 + num / den).acosh())
            }
        }
    }

    /// Time-1 geodesic exponential: the point reached from `x` with initial
    /// velocity `v` under the free (U ≡ 0) dynamics.
    pub fn exp_map(&self, x: &ChartPoint, v: &TangentVector) -> Result<ChartPoint> {
        self.check_point(x)?;
        match self {
            ManifoldModel::FlatTorus { .. } => {
                let raw = ChartPoint {
                    chart: 0,
                    coords: &x.coords + &v.components,
                };
                Ok(self.normalize_point(&raw))
            }
            ManifoldModel::Sphere2 { radius } => {
                let speed = self.norm(x, &v.components)?;
                if speed < 1e-15 {
                    return Ok(x.clone());
                }
                let p = Self::sphere_embed(*radius, x);
                let d = Self::sphere_embed_differential(*radius, x);
                let v_amb = &d * &v.components;
                let dir = &v_amb / v_amb.norm();
                let theta = speed / radius;
                let out = [
                    p[0] * theta.cos() + radius * dir[0] * theta.sin(),
                    p[1] * theta.cos() + radius * dir[1] * theta.sin(),
                    p[2] * theta.cos() + radius * dir[2] * theta.sin(),
                ];
                Ok(Self::sphere_chart_of(*radius, out))
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                let speed = self.norm(x, &v.components)?;
                if speed < 1e-15 {
                    return Ok(x.clone());
                }
                let dir = &v.components / v.components.norm();
                let t = (speed / (2.0 * scale)).tanh();
                let step = dir * t;
                let out = mobius_add(&x.coords, &step);
                let pt = ChartPoint { chart: 0, coords: out };
                self.check_point(&pt)?;
                Ok(pt)
            }
        }
    }

    /// Inverse of `exp_map`: initial velocity of the minimizing geodesic
    /// from `x` to `y`.
    pub fn log_map(&self, x: &ChartPoint, y: &ChartPoint) -> Result<TangentVector> {
        self.check_point(x)?;
        self.check_point(y)?;
        match self {
            ManifoldModel::FlatTorus { periods } => {
                let mut comps = DVector::zeros(periods.len());
                for (i, t) in periods.iter().enumerate() {
                    let mut d = (y.coords[i] - x.coords[i]).rem_euclid(*t);
                    if d > t / 2.0 {
                        d -= t;
                    }
                    comps[i] = d;
                }
                Ok(TangentVector::new(x.clone(), comps))
            }
            ManifoldModel::Sphere2 { radius } => {
                let p = DVector::from_vec(Self::sphere_embed(*radius, x).to_vec());
                let q = DVector::from_vec(Self::sphere_embed(*radius, y).to_vec());
                let cos = (p.dot(&q) / (radius * radius)).clamp(-1.0, 1.0);
                let theta = cos.acos();
                if theta < 1e-15 {
                    return Ok(TangentVector::new(x.clone(), DVector::zeros(2)));
                }
                let tang = &q - &p * cos;
                let tn = tang.norm();
                if tn < 1e-14 {
                    return Err(Error::InvalidArgument(
                        "log map undefined between antipodal points".into(),
                    ));
                }
                let v_amb = tang * (radius * theta / tn);
                let d = Self::sphere_embed_differential(*radius, x);
                let gram = d.transpose() * &d;
                let sol = gram
                    .lu()
                    .solve(&(d.transpose() * v_amb))
                    .expect("embedding differential has full rank");
                Ok(TangentVector::new(x.clone(), sol))
            }
            ManifoldModel::Hyperbolic2 { .. } => {
                let dist = self.distance(x, y)?;
                if dist < 1e-15 {
                    return Ok(TangentVector::new(x.clone(), DVector::zeros(2)));
                }
                let neg = -&x.coords;
                let m = mobius_add(&neg, &y.coords);
                let mn = m.norm();
                let dir = m / mn;
                let gnorm = self.norm(x, &dir)?;
                Ok(TangentVector::new(x.clone(), dir * (dist / gnorm)))
            }
        }
    }
}

/// Möbius addition on the unit disk.
fn mobius_add(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let a2 = a.norm_squared();
    let b2 = b.norm_squared();
    let ab = a.dot(b);
    let den = 1.0 + 2.0 * ab + a2 * b2;
    (a * (1.0 + 2.0 * ab + b2) + b * (1.0 - a2)) / den
}

/// Uniform sampling grid over a model, used by the certifiers and the
/// discrete transform oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub per_dim: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { per_dim: 64 }
    }
}

impl GridSpec {
    pub fn new(per_dim: usize) -> Self {
        GridSpec { per_dim }
    }

    /// Sample points covering the model. For the torus this is the uniform
    /// lattice; for the sphere, square lattices in both stereographic charts
    /// (chart 0 out to the switch radius, chart 1 covering the far cap); for
    /// the disk, a square lattice clipped to the truncated disk.
    pub fn sample(&self, model: &ManifoldModel) -> Vec<ChartPoint> {
        let n = self.per_dim.max(2);
        match model {
            ManifoldModel::FlatTorus { periods } => {
                let dim = periods.len();
                let mut pts = Vec::new();
                let mut idx = vec![0usize; dim];
                loop {
                    let coords: Vec<f64> = idx
                        .iter()
                        .zip(periods)
                        .map(|(i, t)| *i as f64 * t / n as f64)
                        .collect();
                    pts.push(ChartPoint::new(0, coords));
                    let mut d = 0;
                    loop {
                        idx[d] += 1;
                        if idx[d] < n {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                        if d == dim {
                            return pts;
                        }
                    }
                }
            }
            ManifoldModel::Sphere2 { radius } => {
                let mut pts = Vec::new();
                let lim0 = CHART_SWITCH_RADIUS * radius;
                let lim1 = 0.8 * radius;
                for (chart, lim) in [(0u8, lim0), (1u8, lim1)] {
                    for i in 0..n {
                        for j in 0..n {
                            let u = -lim + 2.0 * lim * (i as f64 + 0.5) / n as f64;
                            let v = -lim + 2.0 * lim * (j as f64 + 0.5) / n as f64;
                            if (u * u + v * v).sqrt() <= lim {
                                pts.push(ChartPoint::new(chart, vec![u, v]));
                            }
                        }
                    }
                }
                pts
            }
            ManifoldModel::Hyperbolic2 { .. } => {
                let lim = DISK_TRUNCATION_RADIUS;
                let mut pts = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        let u = -lim + 2.0 * lim * (i as f64 + 0.5) / n as f64;
                        let v = -lim + 2.0 * lim * (j as f64 + 0.5) / n as f64;
                        if (u * u + v * v).sqrt() <= lim {
                            pts.push(ChartPoint::new(0, vec![u, v]));
                        }
                    }
                }
                pts
            }
        }
    }

    /// Upper bound on the geodesic spacing of the sample grid.
    pub fn spacing(&self, model: &ManifoldModel) -> f64 {
        let n = self.per_dim.max(2) as f64;
        match model {
            ManifoldModel::FlatTorus { periods } => {
                periods.iter().map(|t| (t / n) * (t / n)).sum::<f64>().sqrt()
            }
            ManifoldModel::Sphere2 { radius } => {
                // conformal factor ≤ 2 on the chart-0 working disk
                2.0 * std::f64::consts::SQRT_2 * (3.0 * radius) / n
            }
            ManifoldModel::Hyperbolic2 { scale } => {
                let q = 1.0 - DISK_TRUNCATION_RADIUS * DISK_TRUNCATION_RADIUS;
                (2.0 * scale / q) * std::f64::consts::SQRT_2 * (2.0 * DISK_TRUNCATION_RADIUS) / n
            }
        }
    }

    pub fn description(&self, model: &ManifoldModel) -> String {
        let kind = match model {
            ManifoldModel::FlatTorus { periods } => format!("flat_torus(dim {})", periods.len()),
            ManifoldModel::Sphere2 { radius } => format!("sphere2(r = {radius})"),
            ManifoldModel::Hyperbolic2 { scale } => format!("hyperbolic2(scale = {scale})"),
        };
        format!("{kind}, {} samples per dimension", self.per_dim)
    }
}
