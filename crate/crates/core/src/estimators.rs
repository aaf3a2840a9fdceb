//! Position objectives.
//!
//! Every objective maps a candidate position to a real score to be
//! maximized. All of them are blind to a per-node phase rotation of the
//! observations, since receiver nodes are not phase-synchronized.
//!
//! * [`CorrelationObjective`]: `sum_n |sum_q conj(Y~[n,q]) A(p)[n,q]|^2` on a
//!   symbol-equalized matrix (pilot-only, genie or decision-directed).
//! * [`MmlObjective`]: pilot term plus a per-cell data term obtained by
//!   marginalizing the data symbols, with the channel replaced by its
//!   pilot-based estimate at the candidate. [`MmlVariant::Approx`] sums over
//!   all `M` constellation points; [`MmlVariant::Fast`] uses the separable
//!   per-axis amplitude-level form for square QAM (`sqrt(M)` terms, same value).
//! * [`marginal_channel_likelihood`] and [`MmlOptimalObjective`]: exact
//!   log-density with the channel integrated out, and its exhaustive sum over
//!   every data hypothesis. Only tractable on toy instances.

use ndarray::{Array2, Array3};

use crate::channel::Steering;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{Constellation, ConstellationKind, ConstellationMap, Point};
use crate::ops::{OpCounts, Step};
use crate::C64;

/// A position score to maximize.
pub trait Objective: Sync {
    fn evaluate(&self, p: Point, ops: &mut OpCounts) -> f64;

    fn score(&self, p: Point) -> f64 {
        self.evaluate(p, &mut OpCounts::default())
    }
}

impl<F: Fn(Point) -> f64 + Sync> Objective for F {
    fn evaluate(&self, p: Point, _ops: &mut OpCounts) -> f64 {
        self(p)
    }
}

// ---------------------------------------------------------------------------
// Correlation objectives: pilot-only, genie, decision-directed

/// `sum_n |sum_q conj(Y~[n,q]) A(p)[n,q]|^2` on a fixed equalized matrix.
#[derive(Debug, Clone)]
pub struct CorrelationObjective {
    nodes: Vec<Point>,
    slope: f64,
    eq: Array2<C64>,
}

impl CorrelationObjective {
    pub fn new(steering: &Steering, eq: Array2<C64>) -> Result<Self> {
        if eq.dim() != (steering.n(), steering.q()) {
            return Err(Error::Shape(format!(
                "equalized matrix {:?} vs steering {}x{}",
                eq.dim(),
                steering.n(),
                steering.q()
            )));
        }
        Ok(CorrelationObjective {
            nodes: steering.nodes().to_vec(),
            slope: steering.slope(),
            eq,
        })
    }

    pub fn equalized(&self) -> &Array2<C64> {
        &self.eq
    }

    /// Per-node correlations `chi_n(p)`; these are what each node would
    /// forward in a distributed deployment.
    pub fn correlations(&self, p: Point) -> Vec<C64> {
        let q_len = self.eq.ncols();
        self.eq
            .rows()
            .into_iter()
            .zip(&self.nodes)
            .map(|(row, node)| {
                let step = C64::from_polar(1.0, -self.slope * p.dist(*node));
                let mut a = C64::new(1.0, 0.0);
                let mut acc = C64::new(0.0, 0.0);
                for q in 0..q_len {
                    acc += row[q].conj() * a;
                    a *= step;
                }
                acc
            })
            .collect()
    }
}

impl Objective for CorrelationObjective {
    fn evaluate(&self, p: Point, ops: &mut OpCounts) -> f64 {
        let (n_len, q_len) = self.eq.dim();
        ops.add(Step::LocalizationPilot, (n_len * q_len) as u64);
        ops.evaluations += 1;
        self.correlations(p).iter().map(|c| c.norm_sqr()).sum()
    }
}

// ---------------------------------------------------------------------------
// Marginal-likelihood objectives

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MmlVariant {
    /// Sum over every constellation point.
    Approx,
    /// Separable amplitude-level form for square QAM.
    Fast,
}

/// Per-constellation constants of the data term.
#[derive(Debug, Clone)]
struct ClassTerms {
    points: Vec<C64>,
    /// `sqrt(M) / 2` amplitude levels per axis (QAM only).
    levels: usize,
    /// QAM normalization energy `2(M-1)/3`.
    energy: f64,
}

/// Approximate-MML score with the data term in either evaluation form.
#[derive(Debug, Clone)]
pub struct MmlObjective {
    nodes: Vec<Point>,
    slope: f64,
    yp_eq: Array2<C64>,
    /// Data observations split into real and imaginary parts, laid out `[q][n][d]`.
    y_re: Vec<f64>,
    y_im: Vec<f64>,
    n_len: usize,
    q_len: usize,
    d_len: usize,
    pilot_energy: f64,
    sigma2: f64,
    gamma: f64,
    classes: Vec<ClassTerms>,
    /// Class index per cell, `q * d_len + d`.
    cell_class: Vec<usize>,
    variant: MmlVariant,
}

impl MmlObjective {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        steering: &Steering,
        yp_eq: Array2<C64>,
        y_d: &Array3<C64>,
        pilot_energy: f64,
        sigma2: f64,
        gamma: f64,
        map: &ConstellationMap,
        variant: MmlVariant,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::NonPositiveNoise(sigma2));
        }
        if !(gamma > 0.0) {
            return Err(Error::NonPositivePrior(gamma));
        }
        if !(pilot_energy > 0.0) {
            return Err(Error::ZeroPilotEnergy);
        }
        let (n_len, q_len, d_len) = y_d.dim();
        if yp_eq.dim() != (steering.n(), steering.q()) || (n_len, q_len) != yp_eq.dim() || map.shape() != (q_len, d_len) {
            return Err(Error::Shape(format!(
                "pilot-equalized {:?}, data {:?}, map {:?}",
                yp_eq.dim(),
                y_d.dim(),
                map.shape()
            )));
        }
        if variant == MmlVariant::Fast {
            for q in 0..q_len {
                for d in 0..d_len {
                    if !map.get(q, d).is_qam() {
                        return Err(Error::NonQamCell { q, d });
                    }
                }
            }
        }
        let classes = map
            .constellations()
            .iter()
            .map(|c| match c.kind() {
                ConstellationKind::Qam { side, energy } => ClassTerms {
                    points: c.points().to_vec(),
                    levels: side / 2,
                    energy,
                },
                ConstellationKind::Bpsk => ClassTerms {
                    points: c.points().to_vec(),
                    levels: 0,
                    energy: 1.0,
                },
            })
            .collect();
        let mut cell_class = Vec::with_capacity(q_len * d_len);
        let mut y_re = Vec::with_capacity(n_len * q_len * d_len);
        let mut y_im = Vec::with_capacity(n_len * q_len * d_len);
        for q in 0..q_len {
            for d in 0..d_len {
                cell_class.push(map.class_of(q, d));
            }
            for n in 0..n_len {
                for d in 0..d_len {
                    y_re.push(y_d[[n, q, d]].re);
                    y_im.push(y_d[[n, q, d]].im);
                }
            }
        }
        Ok(MmlObjective {
            nodes: steering.nodes().to_vec(),
            slope: steering.slope(),
            yp_eq,
            y_re,
            y_im,
            n_len,
            q_len,
            d_len,
            pilot_energy,
            sigma2,
            gamma,
            classes,
            cell_class,
            variant,
        })
    }

    pub fn variant(&self) -> MmlVariant {
        self.variant
    }

    /// Pilot-based channel coefficients `h^(p)[n] = (1/E_P) sum_q conj(A) Y~_P`
    /// and the reconstructed channel `B(p)[n,q] = h^(p)[n] A(p)[n,q]`.
    pub fn pilot_channel_coeff(&self, p: Point) -> (Vec<C64>, Array2<C64>) {
        let mut chi = vec![C64::default(); self.n_len];
        let mut b_qn = vec![C64::default(); self.n_len * self.q_len];
        self.pilot_pass(p, &mut chi, &mut b_qn);
        let h = chi.iter().map(|c| c.conj() / self.pilot_energy).collect();
        let b = Array2::from_shape_fn((self.n_len, self.q_len), |(n, q)| b_qn[q * self.n_len + n]);
        (h, b)
    }

    /// Correlations `chi_n` into `chi`, `B` (laid out `[q][n]`) into `b_qn`.
    #[inline]
    fn pilot_pass(&self, p: Point, chi: &mut [C64], b_qn: &mut [C64]) {
        let q_len = self.q_len;
        let n_len = self.n_len;
        for (n, (row, node)) in self.yp_eq.rows().into_iter().zip(&self.nodes).enumerate() {
            let step = C64::from_polar(1.0, -self.slope * p.dist(*node));
            let mut a = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..q_len {
                acc += row[q].conj() * a;
                b_qn[q * n_len + n] = a;
                a *= step;
            }
            chi[n] = acc;
            let h = acc.conj() / self.pilot_energy;
            for q in 0..q_len {
                b_qn[q * n_len + n] *= h;
            }
        }
    }

    /// Pilot term alone: `(E_P/s2 + 1/g)^-1 sum_n |chi_n / s2|^2`.
    fn pilot_term(&self, chi: &[C64]) -> f64 {
        let s2 = self.sigma2;
        let corr: f64 = chi.iter().map(|c| (c / s2).norm_sqr()).sum();
        corr / (self.pilot_energy / s2 + 1.0 / self.gamma)
    }
}

impl Objective for MmlObjective {
    fn evaluate(&self, p: Point, ops: &mut OpCounts) -> f64 {
        let (n_len, q_len, d_len) = (self.n_len, self.q_len, self.d_len);
        let mut chi = vec![C64::default(); n_len];
        let mut b_qn = vec![C64::default(); n_len * q_len];
        self.pilot_pass(p, &mut chi, &mut b_qn);
        ops.add(Step::LocalizationPilot, (n_len * q_len) as u64);
        ops.evaluations += 1;
        let mut score = self.pilot_term(&chi);
        if d_len == 0 {
            return score;
        }

        let s2 = self.sigma2;
        let mut scratch = Vec::new();
        let mut combining = 0u64;
        let mut terms = 0u64;
        // per-class fast-path constants for the current subcarrier
        let mut class_b = vec![0.0; self.classes.len()];
        let mut class_rho = vec![0.0; self.classes.len()];
        let class_c: Vec<f64> = self.classes.iter().map(|c| 2.0 / (s2 * c.energy.sqrt())).collect();
        let mut t_re = vec![0.0; d_len];
        let mut t_im = vec![0.0; d_len];
        let block = n_len * d_len;
        for q in 0..q_len {
            let b_row = &b_qn[q * n_len..(q + 1) * n_len];
            let h_q: f64 = b_row.iter().map(|b| b.norm_sqr()).sum();
            if self.variant == MmlVariant::Fast {
                for (k, c) in self.classes.iter().enumerate() {
                    class_b[k] = h_q / (s2 * c.energy);
                    class_rho[k] = (-8.0 * class_b[k]).exp();
                }
            }
            // T[d] = sum_n conj(Y_D[n,q,d]) B[n,q]
            t_re.fill(0.0);
            t_im.fill(0.0);
            let y_re = &self.y_re[q * block..(q + 1) * block];
            let y_im = &self.y_im[q * block..(q + 1) * block];
            for (n, b) in b_row.iter().enumerate() {
                let (yr, yi) = (&y_re[n * d_len..(n + 1) * d_len], &y_im[n * d_len..(n + 1) * d_len]);
                for d in 0..d_len {
                    t_re[d] += yr[d] * b.re + yi[d] * b.im;
                    t_im[d] += yr[d] * b.im - yi[d] * b.re;
                }
            }
            combining += (n_len + block) as u64;
            for d in 0..d_len {
                let k = self.cell_class[q * d_len + d];
                let class = &self.classes[k];
                score += match self.variant {
                    MmlVariant::Approx => {
                        terms += class.points.len() as u64;
                        data_cell_term_approx_with(C64::new(t_re[d], t_im[d]), h_q, s2, &class.points, &mut scratch)
                    }
                    MmlVariant::Fast => {
                        terms += 2 * class.levels as u64;
                        let c = class_c[k];
                        let (m_re, s_re) = qam_axis_sum((c * t_re[d]).abs(), class_b[k], class_rho[k], class.levels);
                        let (m_im, s_im) = qam_axis_sum((c * t_im[d]).abs(), class_b[k], class_rho[k], class.levels);
                        m_re + m_im + (s_re * s_im).ln()
                    }
                };
            }
        }
        ops.add(Step::LocalizationDataCombining, combining);
        ops.add(Step::LocalizationDataConstellation, terms);
        score
    }
}

/// Data-term contribution of one cell by direct enumeration:
/// `log sum_s exp((2/s2) Re{s T} - |s|^2 H / s2)` with
/// `T = sum_n conj(Y_D[n,q,d]) B[n,q]` and `H = sum_n |B[n,q]|^2`.
pub fn data_cell_term_approx(t: C64, h: f64, sigma2: f64, constellation: &Constellation) -> f64 {
    data_cell_term_approx_with(t, h, sigma2, constellation.points(), &mut Vec::new())
}

#[inline]
fn data_cell_term_approx_with(t: C64, h: f64, sigma2: f64, points: &[C64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(
        points
            .iter()
            .map(|s| (2.0 * (s.re * t.re - s.im * t.im) - s.norm_sqr() * h) / sigma2),
    );
    log_sum_exp(scratch)
}

/// Data-term contribution of one square-QAM cell in separable form:
/// `sum_{F in {Re, Im}} log sum_{k odd < sqrt(M)} 2 cosh(2k F{T} / (s2 sqrt(E))) exp(-k^2 H / (s2 E))`.
pub fn data_cell_term_fast(t: C64, h: f64, sigma2: f64, constellation: &Constellation) -> Result<f64> {
    let ConstellationKind::Qam { side, energy } = constellation.kind() else {
        return Err(Error::UnsupportedOrder(constellation.order()));
    };
    let c = 2.0 / (sigma2 * energy.sqrt());
    let b = h / (sigma2 * energy);
    let rho = (-8.0 * b).exp();
    Ok(qam_axis_log_sum((c * t.re).abs(), b, rho, side / 2) + qam_axis_log_sum((c * t.im).abs(), b, rho, side / 2))
}

/// `log sum_{j < levels} 2 cosh(k_j y) exp(-k_j^2 b)` for `k_j = 2j + 1`, `y, b >= 0`,
/// `rho = exp(-8 b)`.
#[inline]
fn qam_axis_log_sum(y: f64, b: f64, rho: f64, levels: usize) -> f64 {
    let (m, sum) = qam_axis_sum(y, b, rho, levels);
    m + sum.ln()
}

/// Split form `(m, s)` of [`qam_axis_log_sum`] with the log equal to
/// `m + ln(s)` and `s` in `[1, 2 levels]`.
///
/// Each summand is `exp(g_j) (1 + exp(-2 k_j y))` with the concave exponent
/// `g_j = k_j y - k_j^2 b`; the sum is anchored at the maximum of `g` and
/// walked outward with multiplicative ratio updates (consecutive ratios
/// differ by `rho`). Every partial product stays in `[0, 1]`, and the walk
/// stops once terms drop below half an ulp of the running sum.
#[inline]
fn qam_axis_sum(y: f64, b: f64, rho: f64, levels: usize) -> (f64, f64) {
    const NEGLIGIBLE: f64 = 1e-17;
    // ln(NEGLIGIBLE)
    const LN_NEGLIGIBLE: f64 = -39.14;
    debug_assert!(levels >= 1 && y >= 0.0 && b >= 0.0);
    let g = |j: usize| {
        let k = (2 * j + 1) as f64;
        k * y - k * k * b
    };
    let last = levels - 1;
    // g is a concave quadratic in j, so the rounded vertex is the discrete maximum
    let vertex = if b > 0.0 { (y / (2.0 * b) - 1.0) * 0.5 } else { f64::INFINITY };
    let peak = if vertex >= last as f64 {
        last
    } else if vertex > 0.0 {
        (vertex + 0.5) as usize
    } else {
        0
    };
    let m = g(peak);
    // exp(-2y) below 2^-56 cannot change any (1 + exp(-2 k y)) factor
    let e = if y > 20.0 { 0.0 } else { (-2.0 * y).exp() };
    let e2 = e * e;
    let pow_peak = match (e == 0.0, peak) {
        (true, _) => 0.0,
        (false, 0) => e,
        _ => e.powi((2 * peak + 1) as i32),
    };

    let mut sum = 1.0 + pow_peak;
    let up = 2.0 * y - 8.0 * (peak + 1) as f64 * b;
    let down = 8.0 * peak as f64 * b - 2.0 * y;
    let want_up = peak < last && up > LN_NEGLIGIBLE;
    let want_down = peak > 0 && down > LN_NEGLIGIBLE;
    // starting ratios exp(up) and exp(down), sharing exponentials where possible
    let (r_up, r_down) = if e > 0.0 {
        let rho_peak = if peak == 0 { 1.0 } else { rho.powi(peak as i32) };
        (rho_peak * rho / e, e / rho_peak)
    } else if want_up {
        let r = up.exp();
        (r, if want_down { rho / r } else { 0.0 })
    } else if want_down {
        (0.0, down.exp())
    } else {
        (0.0, 0.0)
    };
    // upward: t_{j+1} / t_j = exp(2y - 8(j+1)b)
    if want_up {
        let mut t = 1.0;
        let mut pw = pow_peak;
        let mut r = r_up;
        for _ in peak + 1..levels {
            t *= r;
            if t < NEGLIGIBLE {
                break;
            }
            r *= rho;
            pw *= e2;
            sum += t * (1.0 + pw);
        }
    }
    // downward: t_{j-1} / t_j = exp(8 j b - 2y)
    if want_down {
        let mut t = 1.0;
        let mut r = r_down;
        let exact_pw = pow_peak > 1e-290;
        let mut pw = pow_peak;
        for j in (0..peak).rev() {
            t *= r;
            if t < NEGLIGIBLE {
                break;
            }
            r *= rho;
            pw = if exact_pw { pw / e2 } else { e.powi((2 * j + 1) as i32) };
            sum += t * (1.0 + pw);
        }
    }
    (m, sum)
}

// ---------------------------------------------------------------------------
// Exact channel-marginal likelihood and the exhaustive optimal objective

/// `log p(Y | W; p)` with `h_bar ~ CN(0, gamma I)` integrated out:
///
/// `log C - N log V + sum_n |U_n|^2 / V`, where
/// `U_n = (1/s2) sum_{q,l} conj(Y[n,q,l]) A(p)[n,q] W[q,l]`,
/// `V = (1/s2) sum |W|^2 + 1/gamma` and
/// `log C = -|Y|^2/s2 - K log(pi s2) - N log gamma`, `K = N Q L`.
///
/// `y` is `N x Q x L` and `w` is the `Q x L` symbol matrix.
pub fn marginal_channel_likelihood(
    y: &Array3<C64>,
    w: &Array2<C64>,
    steering: &Steering,
    p: Point,
    sigma2: f64,
    gamma: f64,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveNoise(sigma2));
    }
    if !(gamma > 0.0) {
        return Err(Error::NonPositivePrior(gamma));
    }
    let (n_len, q_len, l_len) = y.dim();
    if w.dim() != (q_len, l_len) || steering.n() != n_len || steering.q() != q_len {
        return Err(Error::Shape(format!("Y {:?} vs W {:?}", y.dim(), w.dim())));
    }
    let a = steering.matrix(p);
    let v = w.iter().map(|x| x.norm_sqr()).sum::<f64>() / sigma2 + 1.0 / gamma;
    let mut quad = 0.0;
    for n in 0..n_len {
        let mut u = C64::new(0.0, 0.0);
        for q in 0..q_len {
            let mut inner = C64::new(0.0, 0.0);
            for l in 0..l_len {
                inner += y[[n, q, l]].conj() * w[[q, l]];
            }
            u += a[[n, q]] * inner;
        }
        quad += (u / sigma2).norm_sqr();
    }
    let k = (n_len * q_len * l_len) as f64;
    let y_energy: f64 = y.iter().map(|x| x.norm_sqr()).sum();
    let log_c = -y_energy / sigma2 - k * (std::f64::consts::PI * sigma2).ln() - n_len as f64 * gamma.ln();
    Ok(log_c - n_len as f64 * v.ln() + quad / v)
}

/// Default cap on `prod_{q,d} M_{q,d}` for the exhaustive objective.
pub const ENUMERATION_CAP: usize = 65_536;

/// Exhaustive marginal likelihood over every data matrix, uniform prior,
/// evaluated in the log domain.
#[derive(Debug, Clone)]
pub struct MmlOptimalObjective {
    steering: Steering,
    y: Array3<C64>,
    pilots: Array2<C64>,
    map: ConstellationMap,
    sigma2: f64,
    gamma: f64,
}

impl MmlOptimalObjective {
    /// `y` is the full `N x Q x (P + D)` observation tensor.
    pub fn new(
        steering: &Steering,
        y: Array3<C64>,
        pilots: Array2<C64>,
        map: ConstellationMap,
        sigma2: f64,
        gamma: f64,
        cap: usize,
    ) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::NonPositiveNoise(sigma2));
        }
        if !(gamma > 0.0) {
            return Err(Error::NonPositivePrior(gamma));
        }
        let (q_len, d_len) = map.shape();
        if y.dim().2 != pilots.ncols() + d_len || pilots.nrows() != q_len {
            return Err(Error::Shape(format!("Y {:?}, pilots {:?}, map {:?}", y.dim(), pilots.dim(), map.shape())));
        }
        let mut required = 1.0f64;
        for q in 0..q_len {
            for d in 0..d_len {
                required *= map.get(q, d).order() as f64;
            }
        }
        if required > cap as f64 {
            return Err(Error::EnumerationCap { required, cap });
        }
        Ok(MmlOptimalObjective {
            steering: steering.clone(),
            y,
            pilots,
            map,
            sigma2,
            gamma,
        })
    }

    pub fn log_likelihood(&self, p: Point) -> f64 {
        let (q_len, d_len) = self.map.shape();
        let p_len = self.pilots.ncols();
        let mut w = Array2::<C64>::zeros((q_len, p_len + d_len));
        w.slice_mut(ndarray::s![.., ..p_len]).assign(&self.pilots);
        let cells: Vec<&Constellation> = (0..q_len)
            .flat_map(|q| (0..d_len).map(move |d| (q, d)))
            .map(|(q, d)| self.map.get(q, d))
            .collect();
        let log_prior: f64 = -cells.iter().map(|c| (c.order() as f64).ln()).sum::<f64>();
        let mut digits = vec![0usize; cells.len()];
        let mut terms = Vec::new();
        loop {
            for (k, (&digit, c)) in digits.iter().zip(&cells).enumerate() {
                w[[k / d_len, p_len + k % d_len]] = c.points()[digit];
            }
            let ll = marginal_channel_likelihood(&self.y, &w, &self.steering, p, self.sigma2, self.gamma)
                .expect("validated at construction");
            terms.push(ll + log_prior);
            // mixed-radix increment
            let mut k = 0;
            loop {
                if k == digits.len() {
                    return log_sum_exp(&terms);
                }
                digits[k] += 1;
                if digits[k] < cells[k].order() {
                    break;
                }
                digits[k] = 0;
                k += 1;
            }
        }
    }
}

impl Objective for MmlOptimalObjective {
    fn evaluate(&self, p: Point, ops: &mut OpCounts) -> f64 {
        ops.evaluations += 1;
        self.log_likelihood(p)
    }
}
