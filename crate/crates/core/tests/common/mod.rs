//! Shared test oracles, independent of the library's implementation paths:
//! difference-formula structure constants, finite-difference flow
//! variations, and random matrix generators.

#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use cconvex::curvature::{horizontal_lift, vertical_lift, FramePropagation};
use cconvex::geometry::{ChartPoint, ManifoldModel, TangentVector};
use cconvex::mechanics::{CotangentState, MechanicalSystem};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Structure constants evaluated through the general Hamiltonian-derivative
/// formula with H treated as a black box:
///
/// `2 (g⁻¹ c g⁻¹)_ij = Σ_k (H_{p_k} H_{p_i p_j x_k} − H_{x_k} H_{p_i p_j p_k}
///                           − H_{p_i x_k} H_{p_k p_j} − H_{p_i p_k} H_{x_k p_j})`.
///
/// Fibre derivatives use difference formulas that are exact for fibrewise
/// quadratic Hamiltonians; base derivatives use five-point stencils.
pub fn structure_constants_fd(system: &MechanicalSystem, state: &CotangentState) -> DMatrix<f64> {
    let n = state.dim();
    let x = &state.position;
    let p = &state.momentum;
    let h = 1e-3;

    let ham = |coords: &DVector<f64>, mom: &DVector<f64>| -> f64 {
        let st = CotangentState::new(
            ChartPoint { chart: x.chart, coords: coords.clone() },
            mom.clone(),
        );
        system.hamiltonian(&st).expect("oracle state valid")
    };

    let unit = |k: usize| {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        e
    };

    // H_{p_i p_j}(coords): exact for quadratic fibres
    let h_pp = |coords: &DVector<f64>| -> DMatrix<f64> {
        let zero = DVector::zeros(n);
        let base = ham(coords, &zero);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                ham(coords, &(unit(i) * 2.0)) - 2.0 * ham(coords, &unit(i)) + base
            } else {
                ham(coords, &(unit(i) + unit(j))) - ham(coords, &unit(i)) - ham(coords, &unit(j))
                    + base
            }
        })
    };

    // H_{p_i}(coords, mom): exact central difference for quadratic fibres
    let h_p = |coords: &DVector<f64>, mom: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| {
            (ham(coords, &(mom + unit(i))) - ham(coords, &(mom - unit(i)))) / 2.0
        })
    };

    // five-point stencil of a scalar-valued map of the coordinates
    let stencil = |eval: &dyn Fn(&DVector<f64>) -> f64, k: usize| -> f64 {
        let e = unit(k);
        (-eval(&(&x.coords + &e * (2.0 * h))) + 8.0 * eval(&(&x.coords + &e * h))
            - 8.0 * eval(&(&x.coords - &e * h))
            + eval(&(&x.coords - &e * (2.0 * h))))
            / (12.0 * h)
    };

    // H_{x_k}
    let h_x: Vec<f64> = (0..n)
        .map(|k| stencil(&|c: &DVector<f64>| ham(c, p), k))
        .collect();

    // H_{p_i p_j x_k}
    let mut h_ppx = vec![DMatrix::zeros(n, n); n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                h_ppx[k][(i, j)] = stencil(&|c: &DVector<f64>| h_pp(c)[(i, j)], k);
            }
        }
    }

    // H_{p_i x_k}
    let mut h_px = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            h_px[(i, k)] = stencil(&|c: &DVector<f64>| h_p(c, p)[i], k);
        }
    }

    // H_{p_i p_j p_k}: third fibre difference (identically zero for
    // quadratic fibres, evaluated rather than assumed)
    let hpp_at = |mom: &DVector<f64>| -> DMatrix<f64> {
        let base = ham(&x.coords, mom);
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                ham(&x.coords, &(mom + unit(i) * 2.0)) - 2.0 * ham(&x.coords, &(mom + unit(i)))
                    + base
            } else {
                ham(&x.coords, &(mom + unit(i) + unit(j)))
                    - ham(&x.coords, &(mom + unit(i)))
                    - ham(&x.coords, &(mom + unit(j)))
                    + base
            }
        })
    };
    let hpp_zero = hpp_at(&DVector::zeros(n));
    let mut h_ppp = vec![DMatrix::zeros(n, n); n];
    for (k, slot) in h_ppp.iter_mut().enumerate() {
        *slot = hpp_at(&unit(k)) - &hpp_zero;
    }

    let hp = h_p(&x.coords, p);
    let hpp = h_pp(&x.coords);

    let mut rhs = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += hp[k] * h_ppx[k][(i, j)];
                acc -= h_x[k] * h_ppp[k][(i, j)];
                acc -= h_px[(i, k)] * hpp[(k, j)];
                acc -= hpp[(i, k)] * h_px[(j, k)];
            }
            rhs[(i, j)] = acc;
        }
    }

    // 2 g⁻¹ c g⁻¹ = rhs, so c = g · rhs · g / 2
    let (g, _) = system.model.metric_at(x).expect("oracle point valid");
    (&g * rhs * &g) / 2.0
}

/// Pushforward of a phase vector under the flow differential, by central
/// finite differences of the flow in its initial conditions. Returns one
/// 2n vector per sample time, expressed in the chart of the reference
/// trajectory at that time.
pub fn flow_variation(
    system: &MechanicalSystem,
    state0: &CotangentState,
    direction: &DVector<f64>,
    t_end: f64,
    step: f64,
    eps: f64,
) -> (Vec<f64>, Vec<DVector<f64>>) {
    let n = state0.dim();
    let reference = system.flow(state0, t_end, step).expect("reference flow");

    let perturbed = |sign: f64| {
        let mut x = state0.position.clone();
        let mut p = state0.momentum.clone();
        for i in 0..n {
            x.coords[i] += sign * eps * direction[i];
            p[i] += sign * eps * direction[n + i];
        }
        system
            .flow(&CotangentState::new(x, p), t_end, step)
            .expect("perturbed flow")
    };
    let plus = perturbed(1.0);
    let minus = perturbed(-1.0);

    let mut out = Vec::with_capacity(reference.times.len());
    for idx in 0..reference.times.len() {
        let chart = reference.states[idx].position.chart;
        let align = |s: &CotangentState| -> (DVector<f64>, DVector<f64>) {
            if s.position.chart == chart {
                (s.position.coords.clone(), s.momentum.clone())
            } else {
                let (x2, p2) = system
                    .model
                    .transition_covector_pair(&s.position, &s.momentum);
                (x2.coords, p2)
            }
        };
        let (xp, pp) = align(&plus.states[idx]);
        let (xm, pm) = align(&minus.states[idx]);
        let mut v = DVector::zeros(2 * n);
        for i in 0..n {
            let mut dx = xp[i] - xm[i];
            // unwrap torus coordinate differences
            if let ManifoldModel::FlatTorus { periods } = &system.model {
                let t = periods[i];
                if dx > t / 2.0 {
                    dx -= t;
                }
                if dx < -t / 2.0 {
                    dx += t;
                }
            }
            v[i] = dx / (2.0 * eps);
            v[n + i] = (pp[i] - pm[i]) / (2.0 * eps);
        }
        out.push(v);
    }
    (reference.times, out)
}

/// Reconstructs the same pushforward from a canonical frame propagation:
/// express the initial phase vector in the basis `[E_t | F_t]`, then
/// assemble the image from vertical/horizontal lifts of the transported
/// point frame.
pub fn reconstruct_variation(
    system: &MechanicalSystem,
    prop: &FramePropagation,
    idx: usize,
    initial: &DVector<f64>,
) -> DVector<f64> {
    let n = system.model.dim();
    let basis = prop.basis_at(idx);
    let coeff = basis
        .lu()
        .solve(initial)
        .expect("canonical frame basis is invertible");

    let state = &prop.states[idx];
    let (g, _) = system.model.metric_at(&state.position).expect("flowed point valid");
    let mut out = DVector::zeros(2 * n);
    for j in 0..n {
        let v_j = prop.frames[idx].column(j).into_owned();
        let ver = vertical_lift(&(&g * &v_j));
        let hor = horizontal_lift(
            system,
            state,
            &TangentVector::new(state.position.clone(), v_j),
        )
        .expect("lift at flowed state");
        out += ver * coeff[j] + hor * coeff[n + j];
    }
    out
}

/// Random symmetric matrix with eigenvalues drawn from the given range.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, n);
    let diag = DVector::from_fn(n, |_, _| rng.gen_range(lo..hi));
    &q * DMatrix::from_diagonal(&diag) * q.transpose()
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(n, n, |_, _| {
        let u: f64 = rng.gen::<f64>().max(1e-12);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    });
    gauss.qr().q()
}

/// Random symmetric positive semidefinite matrix with norm about `scale`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() * (scale / n as f64)
}
