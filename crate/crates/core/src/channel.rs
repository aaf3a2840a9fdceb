//! Near-field line-of-sight channel and noisy pilot/data observations.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{Point, ResourceGrid, Scene, SystemConfig};
use crate::C64;

/// Evaluates steering rows `A(p)[n, q] = exp(-j * kappa * |p - p_n| * q * delta_f / f_c)`
/// for a fixed set of nodes.
#[derive(Debug, Clone)]
pub struct Steering {
    nodes: Vec<Point>,
    slope: f64,
    q: usize,
}

impl Steering {
    pub fn new(nodes: &[Point], cfg: &SystemConfig) -> Self {
        Steering {
            nodes: nodes.to_vec(),
            slope: cfg.steering_slope(),
            q: cfg.q,
        }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Phase slope `kappa * delta_f / f_c` per metre of distance and per subcarrier.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Fill `out` (row-major `N x Q`) by phasor recursion along `q`.
    #[inline]
    pub fn fill(&self, p: Point, out: &mut [C64]) {
        debug_assert_eq!(out.len(), self.nodes.len() * self.q);
        for (row, node) in out.chunks_exact_mut(self.q).zip(&self.nodes) {
            let step = C64::from_polar(1.0, -self.slope * p.dist(*node));
            let mut a = C64::new(1.0, 0.0);
            for v in row.iter_mut() {
                *v = a;
                a *= step;
            }
        }
    }

    /// Exact per-entry evaluation as an `N x Q` matrix.
    pub fn matrix(&self, p: Point) -> Array2<C64> {
        Array2::from_shape_fn((self.nodes.len(), self.q), |(n, q)| {
            C64::from_polar(1.0, -self.slope * p.dist(self.nodes[n]) * q as f64)
        })
    }
}

/// Steering matrix `A(p)` (`N x Q`) for candidate `p`.
pub fn steering_matrix(p: Point, nodes: &[Point], cfg: &SystemConfig) -> Array2<C64> {
    Steering::new(nodes, cfg).matrix(p)
}

/// One random channel draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// Path loss with random node phase, `exp(j phi_n) / |p_s - p_n|`.
    pub beta: Vec<C64>,
    /// `beta_n * exp(-j kappa |p_s - p_n|)`.
    pub h_bar: Vec<C64>,
    /// `H[n, q] = h_bar[n] * A(p_s)[n, q]`.
    pub h: Array2<C64>,
    pub phi: Vec<f64>,
}

pub fn synthesize_channel<R: Rng + ?Sized>(
    scene: &Scene,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let kappa = cfg.kappa();
    let mut beta = Vec::with_capacity(scene.nodes.len());
    let mut h_bar = Vec::with_capacity(scene.nodes.len());
    let mut phi = Vec::with_capacity(scene.nodes.len());
    for (n, node) in scene.nodes.iter().enumerate() {
        let dist = scene.ue.dist(*node);
        if dist == 0.0 {
            return Err(Error::ZeroDistance { node: n });
        }
        let ph = rng.random_range(0.0..std::f64::consts::TAU);
        let b = C64::from_polar(dist.recip(), ph);
        phi.push(ph);
        beta.push(b);
        h_bar.push(b * C64::from_polar(1.0, -kappa * dist));
    }
    let a = steering_matrix(scene.ue, &scene.nodes, cfg);
    let h = Array2::from_shape_fn(a.dim(), |(n, q)| h_bar[n] * a[[n, q]]);
    Ok(ChannelRealization { beta, h_bar, h, phi })
}

/// Received pilot and data tensors, `N x Q x P` and `N x Q x D`.
#[derive(Debug, Clone)]
pub struct Observations {
    pub y_p: Array3<C64>,
    pub y_d: Array3<C64>,
    pub sigma2: f64,
}

impl Observations {
    /// Time-concatenated `N x Q x (P + D)` tensor.
    pub fn full_frame(&self) -> Array3<C64> {
        ndarray::concatenate(ndarray::Axis(2), &[self.y_p.view(), self.y_d.view()])
            .expect("leading dims agree")
    }
}

/// Circularly-symmetric complex Gaussian sample with variance `sigma2`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> C64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `Y_P = H X + Z_P`, `Y_D = H S + Z_D`, noise i.i.d. `CN(0, sigma2)`.
/// Pilot noise is drawn before data noise, both in row-major order.
pub fn observe<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    grid: &ResourceGrid,
    sigma2: f64,
    rng: &mut R,
) -> Observations {
    let (n_len, q_len) = chan.h.dim();
    let y_p = Array3::from_shape_fn((n_len, q_len, grid.p()), |(n, q, p)| {
        chan.h[[n, q]] * grid.pilots[[q, p]] + complex_gaussian(rng, sigma2)
    });
    let y_d = Array3::from_shape_fn((n_len, q_len, grid.d()), |(n, q, d)| {
        chan.h[[n, q]] * grid.data[[q, d]] + complex_gaussian(rng, sigma2)
    });
    Observations { y_p, y_d, sigma2 }
}
