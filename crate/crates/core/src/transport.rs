//! Candidate optimal maps and their brute-force verification: map building
//! by Hamiltonian flow of the potential differential, the discrete double
//! transform, an exact assignment oracle on empirical samples, potential
//! evolution along characteristics, and the combined optimality report.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{ChartPoint, GridSpec, ManifoldModel, DISK_TRUNCATION_RADIUS};
use crate::mechanics::{CotangentState, MechanicalSystem};

mod assignment;

pub use assignment::assignment_oracle;

/// Largest empirical sample size accepted by the verifier (the assignment
/// solve is cubic).
pub const MAX_VERIFY_SAMPLES: usize = 512;

/// Fraction of failed pair costs beyond which the transform oracle refuses
/// to report.
const MAX_COST_FAILURE_RATE: f64 = 0.01;

/// Time-1 image points of the flow started at `(x, df_x)`, one per input
/// point; per-point errors are preserved.
pub fn build_map(
    system: &MechanicalSystem,
    f: &ScalarField,
    points: &[ChartPoint],
) -> Vec<Result<ChartPoint>> {
    points
        .iter()
        .map(|x| {
            let df = f.differential(&system.model, x)?;
            let flow = system.flow(&CotangentState::from_covector(&df), 1.0, 1e-3)?;
            Ok(flow.final_state().position.clone())
        })
        .collect()
}

/// `build_map` that fails on the first per-point error.
pub fn build_map_strict(
    system: &MechanicalSystem,
    f: &ScalarField,
    points: &[ChartPoint],
) -> Result<Vec<ChartPoint>> {
    build_map(system, f, points).into_iter().collect()
}

/// Discrete double-transform data on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CTransformResult {
    pub grid: String,
    pub f_values: Vec<f64>,
    /// `f^c(y) = min_x [c(x, y) + f(x)]` over the grid.
    pub f_c: Vec<f64>,
    /// `f^cc(x) = max_y [f^c(y) − c(x, y)]` over the grid.
    pub f_cc: Vec<f64>,
    /// `max (f − f^cc)`; `f^cc ≤ f` always holds pointwise.
    pub max_defect: f64,
    /// Discretization budget `C h²` with `C = 10(max|Hess f| + 1)`.
    pub tol_grid: f64,
    /// Whether the defect is within the discretization budget.
    pub c_convex: bool,
}

/// Brute-force double transform of `f` over the sample grid.
pub fn c_transform(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
) -> Result<CTransformResult> {
    if grid.per_dim < 16 {
        return Err(Error::Precondition(
            "transform grid needs at least 16 samples per dimension".into(),
        ));
    }
    let points = grid.sample(&system.model);
    let n = points.len();
    let mut f_values = Vec::with_capacity(n);
    for x in &points {
        f_values.push(f.value(&system.model, x)?);
    }

    // pairwise costs; the matrix is symmetric for mechanical systems
    let total_pairs = n * (n + 1) / 2;
    let failure_budget = (MAX_COST_FAILURE_RATE * total_pairs as f64) as usize;
    let mut cost = vec![vec![f64::INFINITY; n]; n];
    let mut failures = 0usize;
    for i in 0..n {
        for j in i..n {
            match system.cost(&points[i], &points[j]) {
                Ok(c) => {
                    cost[i][j] = c;
                    cost[j][i] = c;
                }
                Err(_) => {
                    failures += 1;
                    if failures > failure_budget {
                        return Err(Error::OracleUnreliable { failures, total: total_pairs });
                    }
                }
            }
        }
    }

    let mut f_c = vec![f64::INFINITY; n];
    for (j, fc) in f_c.iter_mut().enumerate() {
        for i in 0..n {
            let v = cost[i][j] + f_values[i];
            if v < *fc {
                *fc = v;
            }
        }
    }
    let mut f_cc = vec![f64::NEG_INFINITY; n];
    for (i, fcc) in f_cc.iter_mut().enumerate() {
        for j in 0..n {
            if cost[i][j].is_finite() {
                let v = f_c[j] - cost[i][j];
                if v > *fcc {
                    *fcc = v;
                }
            }
        }
    }

    let max_defect = f_values
        .iter()
        .zip(&f_cc)
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);

    let h = grid.spacing(&system.model);
    let hess_bound = max_hessian_norm(system, f, grid)?;
    let tol_grid = 10.0 * (hess_bound + 1.0) * h * h;

    Ok(CTransformResult {
        grid: grid.description(&system.model),
        f_values,
        f_c,
        f_cc,
        max_defect,
        tol_grid,
        c_convex: max_defect <= tol_grid,
    })
}

/// Largest operator norm of the Hessian of `f` over the grid.
fn max_hessian_norm(
    system: &MechanicalSystem,
    f: &ScalarField,
    grid: &GridSpec,
) -> Result<f64> {
    let mut bound = 0.0f64;
    for x in grid.sample(&system.model) {
        let frame = system.model.orthonormal_frame(&x, None)?;
        let s = crate::certifier::hessian_in_frame(system, f, &x, &frame)?;
        let eig = nalgebra::SymmetricEigen::new(s).eigenvalues;
        bound = bound.max(eig.amax());
    }
    Ok(bound)
}

/// Result of verifying a candidate map against the assignment oracle and
/// the duality identity on an empirical sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportReport {
    pub sample_count: usize,
    pub seed: u64,
    pub sample_points: Vec<ChartPoint>,
    pub images: Vec<ChartPoint>,
    /// Mean transport cost of the candidate map on the sample.
    pub monge_cost: f64,
    /// Mean cost of the optimal assignment between samples and images.
    pub assignment_cost: f64,
    pub assignment_is_identity: bool,
    /// Optimal assignment as a permutation of image indices.
    pub permutation: Vec<usize>,
    /// `|mean c(x, φ(x)) − (mean f₁(φ(x)) − mean f(x))|`; absent when the
    /// evolved potential is unavailable (crossing characteristics).
    pub duality_gap: Option<f64>,
    /// Verdict of a certificate the caller ran beforehand, if any.
    pub certificate_verdict: Option<String>,
    pub notes: Vec<String>,
}

/// Potential values transported along the characteristics of the flow.
#[derive(Debug, Clone)]
pub struct EvolvedPotential {
    pub t: f64,
    pub base_points: Vec<ChartPoint>,
    /// Flowed points `φ_t(x)`.
    pub points: Vec<ChartPoint>,
    /// `f_t(φ_t(x)) = f(x) + ∫ (p·ẋ − H) ds` along each characteristic.
    pub values: Vec<f64>,
    /// Flowed covector components at each flowed point.
    pub momenta: Vec<DVector<f64>>,
}

/// Evolves `f` along the characteristics emanating from `base_points` up to
/// time `t`. In one dimension, crossings at the sampled resolution are
/// detected (close images from distant bases carrying inconsistent values)
/// and reported as an error.
pub fn evolve_potential(
    system: &MechanicalSystem,
    f: &ScalarField,
    t: f64,
    base_points: &[ChartPoint],
) -> Result<EvolvedPotential> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!("evolution time {t} outside [0, 1]")));
    }
    let mut points = Vec::with_capacity(base_points.len());
    let mut values = Vec::with_capacity(base_points.len());
    let mut momenta = Vec::with_capacity(base_points.len());
    for x in base_points {
        let df = f.differential(&system.model, x)?;
        let value0 = f.value(&system.model, x)?;
        if t == 0.0 {
            points.push(x.clone());
            values.push(value0);
            momenta.push(df.components.clone());
            continue;
        }
        let flow = system.flow(&CotangentState::from_covector(&df), t, 1e-3)?;
        let action = system.flow_action(&flow)?;
        let end = flow.final_state();
        points.push(end.position.clone());
        values.push(value0 + action);
        momenta.push(end.momentum.clone());
    }

    if system.model.dim() == 1 {
        detect_crossings_1d(system, &points, &values, base_points, &momenta)?;
    }

    Ok(EvolvedPotential {
        t,
        base_points: base_points.to_vec(),
        points,
        values,
        momenta,
    })
}

/// Flags pairs of characteristics that land within a vanishing fraction of
/// the model span of each other while carrying values inconsistent with
/// the local slope.
fn detect_crossings_1d(
    system: &MechanicalSystem,
    points: &[ChartPoint],
    values: &[f64],
    bases: &[ChartPoint],
    momenta: &[DVector<f64>],
) -> Result<()> {
    let span = match &system.model {
        ManifoldModel::FlatTorus { periods } => periods[0],
        _ => 1.0,
    };
    let max_p = momenta.iter().map(|p| p[0].abs()).fold(0.0f64, f64::max);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].coords[0].partial_cmp(&points[b].coords[0]).unwrap());
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        let dy = (points[a].coords[0] - points[b].coords[0]).abs();
        let dy = dy.min(span - dy);
        if dy < 1e-3 * span {
            let dv = (values[a] - values[b]).abs();
            // along one branch, |Δvalue| ≤ max|p|·Δy up to higher order
            if dv > 1e-4 + 10.0 * max_p * dy {
                let base_gap = system.model.distance(&bases[a], &bases[b])?;
                return Err(Error::NonDiffeomorphism(format!(
                    "characteristics from bases {:.4} and {:.4} (separation {base_gap:.4}) \
                     land within {dy:.2e} with value gap {dv:.2e}",
                    bases[a].coords[0], bases[b].coords[0]
                )));
            }
        }
    }
    Ok(())
}

/// Uniform (with respect to the Riemannian area) sample of `n` points,
/// deterministic in the seed.
pub fn sample_uniform(model: &ManifoldModel, n: usize, seed: u64) -> Vec<ChartPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let p = match model {
            ManifoldModel::FlatTorus { periods } => ChartPoint::new(
                0,
                periods.iter().map(|t| rng.gen::<f64>() * t).collect(),
            ),
            ManifoldModel::Sphere2 { radius } => {
                // uniform on the sphere via a normalized Gaussian triple
                loop {
                    let v = [
                        gaussian(&mut rng),
                        gaussian(&mut rng),
                        gaussian(&mut rng),
                    ];
                    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                    if norm < 1e-6 {
                        continue;
                    }
                    let p = [
                        radius * v[0] / norm,
                        radius * v[1] / norm,
                        radius * v[2] / norm,
                    ];
                    let denom0 = radius - p[2];
                    let denom1 = radius + p[2];
                    break if denom0 >= denom1 {
                        ChartPoint::new(0, vec![radius * p[0] / denom0, radius * p[1] / denom0])
                    } else {
                        ChartPoint::new(1, vec![radius * p[0] / denom1, radius * p[1] / denom1])
                    };
                }
            }
            ManifoldModel::Hyperbolic2 { .. } => {
                // area element is 4ρ/(1−ρ²)² dρ dθ; invert its CDF on the
                // truncated disk
                let rmax = DISK_TRUNCATION_RADIUS;
                let cap = 1.0 / (1.0 - rmax * rmax) - 1.0;
                let q: f64 = rng.gen();
                let rho = (1.0 - 1.0 / (1.0 + q * cap)).sqrt();
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                ChartPoint::new(0, vec![rho * theta.cos(), rho * theta.sin()])
            }
        };
        pts.push(p);
    }
    pts
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller
    let u: f64 = rng.gen::<f64>().max(1e-12);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Samples `n` points, builds the candidate map, and compares its cost
/// against the exact optimal assignment between samples and images; also
/// evaluates the duality identity through the evolved potential.
pub fn verify_optimality(
    system: &MechanicalSystem,
    f: &ScalarField,
    n: usize,
    seed: u64,
    certificate: Option<&crate::certifier::Certificate>,
) -> Result<TransportReport> {
    if n == 0 || n > MAX_VERIFY_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "sample count {n} outside 1..={MAX_VERIFY_SAMPLES}"
        )));
    }
    let samples = sample_uniform(&system.model, n, seed);
    let images = build_map_strict(system, f, &samples)?;
    let mut notes = Vec::new();

    // pairwise costs between samples and images
    let mut cost = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cost[(i, j)] = system.cost(&samples[i], &images[j])?;
        }
    }

    let monge_cost = (0..n).map(|i| cost[(i, i)]).sum::<f64>() / n as f64;
    let (permutation, total) = assignment_oracle(&cost)?;
    let assignment_cost = total / n as f64;
    let assignment_is_identity = permutation.iter().enumerate().all(|(i, &j)| i == j);

    let duality_gap = match evolve_potential(system, f, 1.0, &samples) {
        Ok(evolved) => {
            let mean_f0 = samples
                .iter()
                .map(|x| f.value(&system.model, x))
                .sum::<Result<f64>>()?
                / n as f64;
            let mean_f1 = evolved.values.iter().sum::<f64>() / n as f64;
            Some((monge_cost - (mean_f1 - mean_f0)).abs())
        }
        Err(Error::NonDiffeomorphism(msg)) => {
            notes.push(format!("duality check skipped: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };

    Ok(TransportReport {
        sample_count: n,
        seed,
        sample_points: samples,
        images,
        monge_cost,
        assignment_cost,
        assignment_is_identity,
        permutation,
        duality_gap,
        certificate_verdict: certificate.map(|c| {
            if c.passed() { "pass".to_string() } else { "fail".to_string() }
        }),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldExpression;

    fn torus1() -> ManifoldModel {
        ManifoldModel::FlatTorus { periods: vec![1.0] }
    }

    #[test]
    fn zero_field_gives_identity_map() {
        let sys = MechanicalSystem::free(torus1());
        let pts = sample_uniform(&sys.model, 10, 4);
        let images = build_map_strict(&sys, &ScalarField::zero(), &pts).unwrap();
        for (x, y) in pts.iter().zip(&images) {
            assert!(sys.model.distance(x, y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn torus_map_is_shift_by_gradient() {
        let sys = MechanicalSystem::free(torus1());
        let eps = 0.01;
        let f = ScalarField::new(FieldExpression::CosX1, eps);
        let x = ChartPoint::new(0, vec![0.25]);
        let images = build_map_strict(&sys, &f, &[x]).unwrap();
        // f'(0.25) = −2πε sin(π/2) = −2πε
        let expect = (0.25 - 2.0 * std::f64::consts::PI * eps).rem_euclid(1.0);
        assert!((images[0].coords[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn sphere_map_matches_exponential() {
        let model = ManifoldModel::Sphere2 { radius: 1.0 };
        let sys = MechanicalSystem::free(model.clone());
        let f = ScalarField::new(FieldExpression::Height, 0.2);
        let pts = sample_uniform(&model, 12, 9);
        let images = build_map_strict(&sys, &f, &pts).unwrap();
        for (x, y) in pts.iter().zip(&images) {
            let grad = f.gradient(&model, x).unwrap();
            let expect = model.exp_map(x, &grad).unwrap();
            assert!(
                model.distance(y, &expect).unwrap() < 1e-6,
                "map disagrees with exponential"
            );
        }
    }

    #[test]
    fn c_transform_zero_field_zero_defect() {
        let sys = MechanicalSystem::free(torus1());
        let res = c_transform(&sys, &ScalarField::zero(), &GridSpec::new(32)).unwrap();
        assert!(res.max_defect.abs() < 1e-12);
        assert!(res.c_convex);
        assert!(res.f_c.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn c_transform_certified_amplitude_passes() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let res = c_transform(&sys, &f, &GridSpec::new(256)).unwrap();
        assert!(res.c_convex, "defect {} tol {}", res.max_defect, res.tol_grid);
        // double transform never exceeds f
        for (a, b) in res.f_values.iter().zip(&res.f_cc) {
            assert!(*b <= *a + 1e-12);
        }
    }

    #[test]
    fn c_transform_folded_amplitude_fails() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.2);
        let res = c_transform(&sys, &f, &GridSpec::new(256)).unwrap();
        assert!(!res.c_convex);
        assert!(res.max_defect > 1e-3, "defect {}", res.max_defect);
    }

    /// A potential strong enough to throw trajectories off the truncated
    /// disk makes the pairwise cost oracle refuse to report.
    #[test]
    fn c_transform_reports_unreliable_oracle() {
        let model = ManifoldModel::Hyperbolic2 { scale: 1.0 };
        let sys = MechanicalSystem::new(model, ScalarField::new(FieldExpression::Linear, 500.0))
            .unwrap();
        let f = ScalarField::zero();
        match c_transform(&sys, &f, &GridSpec::new(16)) {
            Err(Error::OracleUnreliable { failures, total }) => {
                assert!(failures * 100 > total, "failures {failures} of {total}");
            }
            other => panic!("expected unreliable oracle, got {other:?}"),
        }
    }

    #[test]
    fn c_transform_rejects_coarse_grid() {
        let sys = MechanicalSystem::free(torus1());
        assert!(c_transform(&sys, &ScalarField::zero(), &GridSpec::new(8)).is_err());
    }

    #[test]
    fn verify_zero_field_identity() {
        let sys = MechanicalSystem::free(torus1());
        let report = verify_optimality(&sys, &ScalarField::zero(), 20, 7, None).unwrap();
        assert!(report.assignment_is_identity);
        assert!(report.monge_cost.abs() < 1e-12);
        assert!((report.monge_cost - report.assignment_cost).abs() < 1e-12);
        assert_eq!(report.duality_gap, Some(0.0));
    }

    #[test]
    fn verify_certified_field_identity_optimal() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let report = verify_optimality(&sys, &f, 60, 7, None).unwrap();
        assert!(report.assignment_is_identity);
        assert!((report.monge_cost - report.assignment_cost).abs() <= 1e-9);
        let gap = report.duality_gap.expect("no crossings for certified field");
        assert!(gap <= 1e-6, "duality gap {gap}");
        // assignment can never beat the diagonal by construction
        assert!(report.assignment_cost <= report.monge_cost + 1e-12);
    }

    #[test]
    fn verify_folded_field_not_identity() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.2);
        let report = verify_optimality(&sys, &f, 60, 7, None).unwrap();
        assert!(!report.assignment_is_identity);
        assert!(report.monge_cost - report.assignment_cost > 1e-4);
        // crossing characteristics: the duality value is not defined
        assert!(report.duality_gap.is_none());
        assert!(!report.notes.is_empty());
    }

    #[test]
    fn verify_sample_cap() {
        let sys = MechanicalSystem::free(torus1());
        assert!(verify_optimality(&sys, &ScalarField::zero(), 513, 0, None).is_err());
        assert!(verify_optimality(&sys, &ScalarField::zero(), 0, 0, None).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        for model in [
            torus1(),
            ManifoldModel::Sphere2 { radius: 1.0 },
            ManifoldModel::Hyperbolic2 { scale: 1.0 },
        ] {
            let a = sample_uniform(&model, 30, 123);
            let b = sample_uniform(&model, 30, 123);
            assert_eq!(a, b);
            for p in &a {
                model.check_point(p).unwrap();
            }
            let c = sample_uniform(&model, 30, 124);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn evolve_zero_field_stays_zero() {
        let sys = MechanicalSystem::free(torus1());
        let pts = sample_uniform(&sys.model, 16, 3);
        let ev = evolve_potential(&sys, &ScalarField::zero(), 1.0, &pts).unwrap();
        for (p, v) in ev.points.iter().zip(&ev.values) {
            assert!(v.abs() < 1e-12);
            assert!(pts.iter().any(|x| sys.model.distance(x, p).unwrap() < 1e-9));
        }
    }

    /// Plane-wave solution on a long flat segment: f = a x evolves to
    /// f_t(x) = a x − a² t / 2 (points kept far from the wrap seam).
    #[test]
    fn evolve_linear_field_plane_wave() {
        let model = ManifoldModel::FlatTorus { periods: vec![100.0] };
        let sys = MechanicalSystem::free(model.clone());
        let a = 0.3;
        let f = ScalarField::new(FieldExpression::Linear, a);
        let bases: Vec<ChartPoint> = (0..9)
            .map(|i| ChartPoint::new(0, vec![40.0 + i as f64]))
            .collect();
        for t in [0.25, 1.0] {
            let ev = evolve_potential(&sys, &f, t, &bases).unwrap();
            for (pt, v) in ev.points.iter().zip(&ev.values) {
                let expect = a * pt.coords[0] - a * a * t / 2.0;
                assert!((v - expect).abs() < 1e-9, "t = {t}: {v} vs {expect}");
            }
        }
    }

    /// Spatial differences of the evolved values across neighboring
    /// characteristics reproduce the flowed covector.
    #[test]
    fn evolved_values_differentiate_to_momenta() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let n = 256;
        let bases: Vec<ChartPoint> = (0..n)
            .map(|i| ChartPoint::new(0, vec![i as f64 / n as f64]))
            .collect();
        let ev = evolve_potential(&sys, &f, 1.0, &bases).unwrap();

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| ev.points[a].coords[0].partial_cmp(&ev.points[b].coords[0]).unwrap());
        let mut worst = 0.0f64;
        for w in order.windows(3) {
            let (a, m, b) = (w[0], w[1], w[2]);
            let mut dy = ev.points[b].coords[0] - ev.points[a].coords[0];
            if dy < 0.0 {
                dy += 1.0;
            }
            if !(1e-6..=0.5).contains(&dy) {
                continue;
            }
            let mut dv = ev.values[b] - ev.values[a];
            // unwrap the value difference across the seam: values are
            // periodic in the base, not in the image, so skip seam pairs
            if (ev.points[b].coords[0] - ev.points[a].coords[0]).abs() > 0.5 {
                continue;
            }
            dv /= dy;
            worst = worst.max((dv - ev.momenta[m][0]).abs());
        }
        assert!(worst < 1e-4, "covector reconstruction error {worst}");
    }

    #[test]
    fn evolve_detects_crossing_characteristics() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.2);
        let n = 256;
        let bases: Vec<ChartPoint> = (0..n)
            .map(|i| ChartPoint::new(0, vec![i as f64 / n as f64]))
            .collect();
        match evolve_potential(&sys, &f, 1.0, &bases) {
            Err(Error::NonDiffeomorphism(_)) => {}
            other => panic!("expected crossing detection, got {other:?}"),
        }
    }

    /// Weak duality: f₁(y) − f₀(x) ≤ c(x, y) for all sampled pairs.
    #[test]
    fn weak_duality_on_sampled_pairs() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let bases = sample_uniform(&sys.model, 40, 11);
        let ev = evolve_potential(&sys, &f, 1.0, &bases).unwrap();
        for x in &bases {
            let f0 = f.value(&sys.model, x).unwrap();
            for (y, f1) in ev.points.iter().zip(&ev.values) {
                let c = sys.cost(x, y).unwrap();
                assert!(f1 - f0 <= c + 1e-6, "duality violated: {} > {}", f1 - f0, c);
            }
        }
    }

    /// Images of a uniform sample integrate test functions consistently
    /// with the change of variables (coarse Monte Carlo smoke test).
    #[test]
    fn pushforward_integrates_test_functions() {
        let sys = MechanicalSystem::free(torus1());
        let f = ScalarField::new(FieldExpression::CosX1, 0.01);
        let n = 400;
        let samples = sample_uniform(&sys.model, n, 2024);
        let images = build_map_strict(&sys, &f, &samples).unwrap();

        let tau = std::f64::consts::TAU;
        let test_fns: [fn(f64) -> f64; 2] =
            [|y| (std::f64::consts::TAU * y).cos(), |y| (std::f64::consts::TAU * y).sin()];
        for g in test_fns {
            let empirical: f64 = images.iter().map(|p| g(p.coords[0])).sum::<f64>() / n as f64;
            // quadrature of g(φ(x)) over the period
            let m = 2048;
            let quad: f64 = (0..m)
                .map(|i| {
                    let x = i as f64 / m as f64;
                    let fp = -0.01 * tau * (tau * x).sin();
                    g((x + fp).rem_euclid(1.0))
                })
                .sum::<f64>()
                / m as f64;
            assert!(
                (empirical - quad).abs() < 0.1,
                "pushforward mean {empirical} vs {quad}"
            );
        }
    }
}
