//! Independent numerical checks on small random instances.
//!
//! The channel-marginal likelihood is recomputed by Gauss–Hermite quadrature
//! over each node's complex coefficient (given the channel, the observation
//! density factorizes over nodes), and the two evaluation forms of the
//! approximate-MML objective are compared point by point.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

use crate::channel::{complex_gaussian, Steering};
use crate::equalize::pilot_equalize;
use crate::error::Result;
use crate::estimators::{marginal_channel_likelihood, MmlObjective, MmlVariant, Objective};
use crate::math::{log_sum_exp, rel_diff};
use crate::model::{ConstellationMap, Point, SystemConfig};
use crate::C64;

/// Nodes and weights of the `order`-point Gauss–Hermite rule for weight
/// `exp(-x^2)`, nodes ascending.
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal Hermite recurrence
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `log p(Y | W; p)` by quadrature over `h_bar ~ CN(0, gamma I)`.
///
/// With `h = sqrt(gamma) (u + j v)` the prior becomes `exp(-u^2 - v^2) / pi`,
/// so each node is a 2-D tensor-product rule.
pub fn quadrature_log_likelihood(
    y: &Array3<C64>,
    w: &Array2<C64>,
    steering: &Steering,
    p: Point,
    sigma2: f64,
    gamma: f64,
    order: usize,
) -> f64 {
    let (n_len, q_len, l_len) = y.dim();
    let a = steering.matrix(p);
    let (nodes, weights) = gauss_hermite(order);
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let k_node = (q_len * l_len) as f64;
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(order * order);
    for n in 0..n_len {
        terms.clear();
        for (iu, &u) in nodes.iter().enumerate() {
            for (iv, &v) in nodes.iter().enumerate() {
                let h = C64::new(u, v) * gamma.sqrt();
                let mut resid = 0.0;
                for q in 0..q_len {
                    let g = h * a[[n, q]];
                    for l in 0..l_len {
                        resid += (y[[n, q, l]] - g * w[[q, l]]).norm_sqr();
                    }
                }
                terms.push(log_w[iu] + log_w[iv] - PI.ln() - resid / sigma2);
            }
        }
        total += log_sum_exp(&terms) - k_node * (PI * sigma2).ln();
    }
    total
}

/// A toy frame drawn from the channel-marginal model itself.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub cfg: SystemConfig,
    pub steering: Steering,
    pub ue: Point,
    pub pilots: Array2<C64>,
    pub data: Array2<C64>,
    pub map: ConstellationMap,
    pub y_p: Array3<C64>,
    pub y_d: Array3<C64>,
    pub sigma2: f64,
    pub gamma: f64,
}

impl OracleInstance {
    pub fn full_frame(&self) -> Array2<C64> {
        ndarray::concatenate(ndarray::Axis(1), &[self.pilots.view(), self.data.view()]).unwrap()
    }

    pub fn full_observations(&self) -> Array3<C64> {
        ndarray::concatenate(ndarray::Axis(2), &[self.y_p.view(), self.y_d.view()]).unwrap()
    }

    pub fn mml(&self, variant: MmlVariant) -> Result<MmlObjective> {
        MmlObjective::new(
            &self.steering,
            pilot_equalize(&self.y_p, &self.pilots),
            &self.y_d,
            self.pilots.iter().map(|x| x.norm_sqr()).sum(),
            self.sigma2,
            self.gamma,
            &self.map,
            variant,
        )
    }

    /// A random candidate inside the search square.
    pub fn random_candidate<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let r = self.cfg.r_s;
        Point::new(rng.random_range(-r..r), rng.random_range(-r..r))
    }
}

/// Draws `N, Q in {1, 2}`, `P = 1`, `D in {0, 1}` with 4-QAM data,
/// `gamma = 1` and `sigma2` in `[1, 4]`, nodes and UE within tens of metres.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> Result<OracleInstance> {
    let n = rng.random_range(1..=2);
    let q = rng.random_range(1..=2);
    let d = rng.random_range(0..=1);
    let order = 4;
    let cfg = SystemConfig {
        q,
        p: 1,
        d,
        n,
        r_srx: 40.0,
        r_s: 20.0,
        n_grid_per_axis: 21,
        alpha_oversample: 1,
        constellation_map: crate::model::ConstellationSpec::Uniform(order),
        ..SystemConfig::desk_scale()
    };
    let nodes: Vec<Point> = (0..n)
        .map(|_| {
            let th = rng.random_range(0.0..2.0 * PI);
            Point::new(cfg.r_srx * th.cos(), cfg.r_srx * th.sin())
        })
        .collect();
    let steering = Steering::new(&nodes, &cfg);
    let ue = Point::new(rng.random_range(-cfg.r_s..cfg.r_s), rng.random_range(-cfg.r_s..cfg.r_s));
    let map = ConstellationMap::uniform(order, cfg.q, cfg.d)?;
    let pilots = Array2::from_shape_fn((cfg.q, cfg.p), |_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0));
    let data = Array2::from_shape_fn((cfg.q, cfg.d), |(q, d)| {
        let c = map.get(q, d);
        c.points()[rng.random_range(0..c.order())]
    });
    let gamma = 1.0;
    let sigma2 = rng.random_range(1.0..4.0);
    let a = steering.matrix(ue);
    let h: Vec<C64> = (0..n).map(|_| complex_gaussian(rng, gamma)).collect();
    let mut obs = |x: &Array2<C64>| {
        Array3::from_shape_fn((n, cfg.q, x.ncols()), |(i, q, l)| h[i] * a[[i, q]] * x[[q, l]])
            .mapv(|v| v + complex_gaussian(rng, sigma2))
    };
    let y_p = obs(&pilots);
    let y_d = obs(&data);
    Ok(OracleInstance {
        cfg,
        steering,
        ue,
        pilots,
        data,
        map,
        y_p,
        y_d,
        sigma2,
        gamma,
    })
}

pub const QUADRATURE_ORDER: usize = 96;
pub const MARGINAL_TOLERANCE: f64 = 1e-6;
pub const FAST_APPROX_TOLERANCE: f64 = 1e-9;
/// Candidates compared per instance for the fast/approx check.
pub const CANDIDATES_PER_INSTANCE: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub seed: u64,
    pub instances: usize,
    pub max_marginal_rel_err: f64,
    pub max_fast_approx_rel_err: f64,
    pub marginal_tolerance: f64,
    pub fast_approx_tolerance: f64,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.max_marginal_rel_err <= self.marginal_tolerance && self.max_fast_approx_rel_err <= self.fast_approx_tolerance
    }
}

/// Runs both checks on `instances` random instances from `seed`.
pub fn run_oracle_suite(seed: u64, instances: usize) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport {
        seed,
        instances,
        max_marginal_rel_err: 0.0,
        max_fast_approx_rel_err: 0.0,
        marginal_tolerance: MARGINAL_TOLERANCE,
        fast_approx_tolerance: FAST_APPROX_TOLERANCE,
    };
    for _ in 0..instances {
        let inst = random_instance(&mut rng)?;
        let y = inst.full_observations();
        let w = inst.full_frame();
        let p = inst.random_candidate(&mut rng);
        let closed = marginal_channel_likelihood(&y, &w, &inst.steering, p, inst.sigma2, inst.gamma)?;
        let quad = quadrature_log_likelihood(&y, &w, &inst.steering, p, inst.sigma2, inst.gamma, QUADRATURE_ORDER);
        report.max_marginal_rel_err = report.max_marginal_rel_err.max(nan_as_inf(rel_diff(closed, quad)));

        let fast = inst.mml(MmlVariant::Fast)?;
        let approx = inst.mml(MmlVariant::Approx)?;
        for _ in 0..CANDIDATES_PER_INSTANCE {
            let c = inst.random_candidate(&mut rng);
            let err = rel_diff(fast.score(c), approx.score(c));
            report.max_fast_approx_rel_err = report.max_fast_approx_rel_err.max(nan_as_inf(err));
        }
    }
    Ok(report)
}

fn nan_as_inf(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}
