//! Symbol equalization, LMMSE channel/data estimation and hard decisions.
//!
//! Everything here runs once per frame, before any position candidate is
//! evaluated. Channel and data estimators are scalar Wiener filters with
//! priors `H[n,q] ~ CN(0, gamma)` and unit-variance data symbols.

use ndarray::{Array2, Array3};

use crate::model::ConstellationMap;
use crate::ops::{OpCounts, Step};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemodMode {
    /// One estimate per cell, combining all nodes at the central unit.
    Centralized,
    /// One estimate per node and cell.
    Distributed,
}

/// How hard decisions search the constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Slicer {
    /// O(M) nearest-point search.
    #[default]
    Exhaustive,
    /// Per-axis QAM slicing; not counted toward complexity accounting.
    Decomposed,
}

/// Data symbol estimates in either layout.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolEstimates {
    /// `Q x D`.
    Centralized(Array2<C64>),
    /// `N x Q x D`.
    Distributed(Array3<C64>),
}

impl SymbolEstimates {
    #[inline]
    fn at(&self, n: usize, q: usize, d: usize) -> C64 {
        match self {
            SymbolEstimates::Centralized(s) => s[[q, d]],
            SymbolEstimates::Distributed(s) => s[[n, q, d]],
        }
    }
}

/// `Y~_P[n,q] = sum_p conj(X[q,p]) Y_P[n,q,p]`.
pub fn pilot_equalize(y_p: &Array3<C64>, x: &Array2<C64>) -> Array2<C64> {
    pilot_equalize_counted(y_p, x, &mut OpCounts::default())
}

pub fn pilot_equalize_counted(y_p: &Array3<C64>, x: &Array2<C64>, ops: &mut OpCounts) -> Array2<C64> {
    let (n_len, q_len, p_len) = y_p.dim();
    ops.add(Step::SymbolEqualization, (n_len * q_len * p_len) as u64);
    Array2::from_shape_fn((n_len, q_len), |(n, q)| {
        (0..p_len).map(|p| x[[q, p]].conj() * y_p[[n, q, p]]).sum()
    })
}

/// Shared accumulation for the genie and decision-directed paths so that
/// identical symbols give bit-identical outputs.
fn add_data_correlation<F>(yp_eq: &Array2<C64>, y_d: &Array3<C64>, ops: &mut OpCounts, symbol: F) -> Array2<C64>
where
    F: Fn(usize, usize, usize) -> C64,
{
    let (n_len, q_len, d_len) = y_d.dim();
    ops.add(Step::SymbolEqualization, (n_len * q_len * d_len) as u64);
    Array2::from_shape_fn((n_len, q_len), |(n, q)| {
        let mut acc = yp_eq[[n, q]];
        for d in 0..d_len {
            acc += symbol(n, q, d).conj() * y_d[[n, q, d]];
        }
        acc
    })
}

/// Full-frame equalization with the true data symbols `S` (`Q x D`).
pub fn genie_equalize(yp_eq: &Array2<C64>, y_d: &Array3<C64>, s: &Array2<C64>) -> Array2<C64> {
    genie_equalize_counted(yp_eq, y_d, s, &mut OpCounts::default())
}

pub fn genie_equalize_counted(
    yp_eq: &Array2<C64>,
    y_d: &Array3<C64>,
    s: &Array2<C64>,
    ops: &mut OpCounts,
) -> Array2<C64> {
    add_data_correlation(yp_eq, y_d, ops, |_, q, d| s[[q, d]])
}

/// Decision-directed equalization using estimated symbols in either layout.
pub fn dd_equalize(yp_eq: &Array2<C64>, y_d: &Array3<C64>, s_hat: &SymbolEstimates) -> Array2<C64> {
    dd_equalize_counted(yp_eq, y_d, s_hat, &mut OpCounts::default())
}

pub fn dd_equalize_counted(
    yp_eq: &Array2<C64>,
    y_d: &Array3<C64>,
    s_hat: &SymbolEstimates,
    ops: &mut OpCounts,
) -> Array2<C64> {
    add_data_correlation(yp_eq, y_d, ops, |n, q, d| s_hat.at(n, q, d))
}

/// Per-cell LMMSE channel estimate
/// `H^[n,q] = sum_p conj(X) Y_P / (sum_p |X|^2 + sigma2 / gamma)`.
pub fn estimate_channel_lmmse(y_p: &Array3<C64>, x: &Array2<C64>, sigma2: f64, gamma: f64) -> Array2<C64> {
    estimate_channel_lmmse_counted(y_p, x, sigma2, gamma, &mut OpCounts::default())
}

pub fn estimate_channel_lmmse_counted(
    y_p: &Array3<C64>,
    x: &Array2<C64>,
    sigma2: f64,
    gamma: f64,
    ops: &mut OpCounts,
) -> Array2<C64> {
    let (n_len, q_len, p_len) = y_p.dim();
    ops.add(Step::ChannelEstimation, (n_len * q_len * p_len) as u64);
    let reg = sigma2 / gamma;
    Array2::from_shape_fn((n_len, q_len), |(n, q)| {
        let mut num = C64::new(0.0, 0.0);
        let mut den = reg;
        for p in 0..p_len {
            num += x[[q, p]].conj() * y_p[[n, q, p]];
            den += x[[q, p]].norm_sqr();
        }
        num / den
    })
}

/// LMMSE soft symbol estimates (unit symbol variance).
pub fn soft_data_estimate(h_hat: &Array2<C64>, y_d: &Array3<C64>, sigma2: f64, mode: DemodMode) -> SymbolEstimates {
    soft_data_estimate_counted(h_hat, y_d, sigma2, mode, &mut OpCounts::default())
}

pub fn soft_data_estimate_counted(
    h_hat: &Array2<C64>,
    y_d: &Array3<C64>,
    sigma2: f64,
    mode: DemodMode,
    ops: &mut OpCounts,
) -> SymbolEstimates {
    let (n_len, q_len, d_len) = y_d.dim();
    ops.add(Step::SoftDataEstimation, (n_len * q_len * d_len) as u64);
    match mode {
        DemodMode::Centralized => {
            let den: Vec<f64> = (0..q_len)
                .map(|q| (0..n_len).map(|n| h_hat[[n, q]].norm_sqr()).sum::<f64>() + sigma2)
                .collect();
            SymbolEstimates::Centralized(Array2::from_shape_fn((q_len, d_len), |(q, d)| {
                let num: C64 = (0..n_len).map(|n| h_hat[[n, q]].conj() * y_d[[n, q, d]]).sum();
                num / den[q]
            }))
        }
        DemodMode::Distributed => SymbolEstimates::Distributed(Array3::from_shape_fn((n_len, q_len, d_len), |(n, q, d)| {
            let h = h_hat[[n, q]];
            h.conj() * y_d[[n, q, d]] / (h.norm_sqr() + sigma2)
        })),
    }
}

/// Map each soft estimate to its cell's nearest constellation point.
pub fn hard_decision(soft: &SymbolEstimates, map: &ConstellationMap, slicer: Slicer) -> SymbolEstimates {
    hard_decision_counted(soft, map, slicer, &mut OpCounts::default())
}

pub fn hard_decision_counted(
    soft: &SymbolEstimates,
    map: &ConstellationMap,
    slicer: Slicer,
    ops: &mut OpCounts,
) -> SymbolEstimates {
    let mut compares = 0u64;
    let mut decide = |z: C64, q: usize, d: usize| {
        let c = map.get(q, d);
        let k = match slicer {
            Slicer::Exhaustive => {
                compares += c.order() as u64;
                c.nearest(z)
            }
            Slicer::Decomposed => c.slice(z),
        };
        c.points()[k]
    };
    let out = match soft {
        SymbolEstimates::Centralized(s) => {
            SymbolEstimates::Centralized(Array2::from_shape_fn(s.dim(), |(q, d)| decide(s[[q, d]], q, d)))
        }
        SymbolEstimates::Distributed(s) => {
            SymbolEstimates::Distributed(Array3::from_shape_fn(s.dim(), |(n, q, d)| decide(s[[n, q, d]], q, d)))
        }
    };
    ops.add(Step::HardDataDecision, compares);
    out
}

/// All decision-directed intermediates for one frame.
#[derive(Debug, Clone)]
pub struct DataEstimates {
    pub h_hat: Array2<C64>,
    pub soft_centr: SymbolEstimates,
    pub hard_centr: SymbolEstimates,
    pub soft_distr: SymbolEstimates,
    pub hard_distr: SymbolEstimates,
}

impl DataEstimates {
    pub fn compute(
        y_p: &Array3<C64>,
        y_d: &Array3<C64>,
        pilots: &Array2<C64>,
        map: &ConstellationMap,
        sigma2: f64,
        gamma: f64,
    ) -> Self {
        let h_hat = estimate_channel_lmmse(y_p, pilots, sigma2, gamma);
        let soft_centr = soft_data_estimate(&h_hat, y_d, sigma2, DemodMode::Centralized);
        let soft_distr = soft_data_estimate(&h_hat, y_d, sigma2, DemodMode::Distributed);
        let hard_centr = hard_decision(&soft_centr, map, Slicer::Exhaustive);
        let hard_distr = hard_decision(&soft_distr, map, Slicer::Exhaustive);
        DataEstimates {
            h_hat,
            soft_centr,
            hard_centr,
            soft_distr,
            hard_distr,
        }
    }
}

/// Fraction of cells whose hard decision differs from `truth`.
/// Distributed estimates yield one rate per node.
pub fn symbol_error_rates(hard: &SymbolEstimates, truth: &Array2<C64>) -> Vec<f64> {
    let cells = truth.len();
    if cells == 0 {
        return Vec::new();
    }
    let rate = |errors: usize| errors as f64 / cells as f64;
    match hard {
        SymbolEstimates::Centralized(s) => vec![rate(s.iter().zip(truth.iter()).filter(|(a, b)| a != b).count())],
        SymbolEstimates::Distributed(s) => s
            .outer_iter()
            .map(|node| rate(node.iter().zip(truth.iter()).filter(|(a, b)| a != b).count()))
            .collect(),
    }
}

/// Mean `|S^ - S|` over all cells (and nodes, for distributed estimates).
pub fn mean_absolute_error(soft: &SymbolEstimates, truth: &Array2<C64>) -> f64 {
    match soft {
        SymbolEstimates::Centralized(s) => {
            s.iter().zip(truth.iter()).map(|(a, b)| (a - b).norm()).sum::<f64>() / truth.len() as f64
        }
        SymbolEstimates::Distributed(s) => {
            let total: f64 = s
                .outer_iter()
                .map(|node| node.iter().zip(truth.iter()).map(|(a, b)| (a - b).norm()).sum::<f64>())
                .sum();
            total / s.len() as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Constellation;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_tensor(rng: &mut impl Rng, dim: (usize, usize, usize)) -> Array3<C64> {
        Array3::from_shape_fn(dim, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn pilot_equalization_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_tensor(&mut rng, (2, 3, 1));
        let ones = Array2::from_elem((3, 1), c(1.0, 0.0));
        let eq = pilot_equalize(&y, &ones);
        for ((n, q), v) in eq.indexed_iter() {
            assert_eq!(*v, y[[n, q, 0]]);
        }
        let x = array![[c(1.0, 0.0), c(-1.0, 0.0)]];
        let y = Array3::from_shape_vec((1, 1, 2), vec![c(2.0, 1.0), c(0.5, -3.0)]).unwrap();
        assert_eq!(pilot_equalize(&y, &x)[[0, 0]], c(1.5, 4.0));
    }

    #[test]
    fn noise_free_equalization_scales_channel() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n_len, q_len, p_len, d_len) = (3, 4, 2, 3);
        let h = Array2::from_shape_fn((n_len, q_len), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let x = Array2::from_shape_fn((q_len, p_len), |_| c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0));
        let qam = Constellation::qam(16).unwrap();
        let s = Array2::from_shape_fn((q_len, d_len), |_| qam.points()[rng.random_range(0..16)]);
        let y_p = Array3::from_shape_fn((n_len, q_len, p_len), |(n, q, p)| h[[n, q]] * x[[q, p]]);
        let y_d = Array3::from_shape_fn((n_len, q_len, d_len), |(n, q, d)| h[[n, q]] * s[[q, d]]);
        let yp_eq = pilot_equalize(&y_p, &x);
        let full = genie_equalize(&yp_eq, &y_d, &s);
        for n in 0..n_len {
            for q in 0..q_len {
                assert!((yp_eq[[n, q]] - h[[n, q]] * p_len as f64).norm() < 1e-12);
                let energy: f64 = p_len as f64 + (0..d_len).map(|d| s[[q, d]].norm_sqr()).sum::<f64>();
                assert!((full[[n, q]] - h[[n, q]] * energy).norm() < 1e-12);
            }
        }
        // perfect decisions reproduce the genie bit-for-bit
        let dd = dd_equalize(&yp_eq, &y_d, &SymbolEstimates::Centralized(s.clone()));
        assert_eq!(dd, full);
        let tensor = Array3::from_shape_fn((n_len, q_len, d_len), |(_, q, d)| s[[q, d]]);
        assert_eq!(dd_equalize(&yp_eq, &y_d, &SymbolEstimates::Distributed(tensor)), full);

        // LMMSE, noise-free and sigma2 = 0 gives the channel back
        let h_hat = estimate_channel_lmmse(&y_p, &x, 0.0, 1.0);
        for (a, b) in h_hat.iter().zip(h.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        let soft = soft_data_estimate(&h, &y_d, 0.0, DemodMode::Centralized);
        if let SymbolEstimates::Centralized(est) = soft {
            for (a, b) in est.iter().zip(s.iter()) {
                assert!((a - b).norm() < 1e-12);
            }
        } else {
            unreachable!()
        }
    }

    #[test]
    fn empty_data_block_leaves_pilot_equalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y_p = random_tensor(&mut rng, (2, 3, 1));
        let x = Array2::from_elem((3, 1), c(1.0, 0.0));
        let yp_eq = pilot_equalize(&y_p, &x);
        let y_d = Array3::<C64>::zeros((2, 3, 0));
        let s = Array2::<C64>::zeros((3, 0));
        assert_eq!(genie_equalize(&yp_eq, &y_d, &s), yp_eq);
        assert_eq!(dd_equalize(&yp_eq, &y_d, &SymbolEstimates::Centralized(s)), yp_eq);
    }

    #[test]
    fn zero_soft_estimates_contribute_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let yp_eq = Array2::from_shape_fn((2, 3), |_| c(rng.random(), rng.random()));
        let y_d = random_tensor(&mut rng, (2, 3, 4));
        let zeros = SymbolEstimates::Distributed(Array3::zeros((2, 3, 4)));
        assert_eq!(dd_equalize(&yp_eq, &y_d, &zeros), yp_eq);
    }

    #[test]
    fn lmmse_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y_p = random_tensor(&mut rng, (2, 3, 2));
        let x = Array2::from_shape_fn((3, 2), |_| c(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0));
        let ls = estimate_channel_lmmse(&y_p, &x, 0.0, 1.0);
        let near = estimate_channel_lmmse(&y_p, &x, 1e-12, 1.0);
        for (a, b) in ls.iter().zip(near.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        let (n, q) = (1, 2);
        let want = (x[[q, 0]] * y_p[[n, q, 0]] + x[[q, 1]] * y_p[[n, q, 1]]) / 2.0;
        assert!((ls[[n, q]] - want).norm() < 1e-15);
        let zero = estimate_channel_lmmse(&Array3::zeros((2, 3, 2)), &x, 0.3, 1.0);
        assert!(zero.iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn soft_estimates_zero_input_and_degenerate_combining() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut h = Array2::from_shape_fn((2, 3), |_| c(rng.random(), rng.random()));
        let zero = soft_data_estimate(&h, &Array3::zeros((2, 3, 2)), 0.1, DemodMode::Centralized);
        assert_eq!(zero, SymbolEstimates::Centralized(Array2::zeros((3, 2))));

        for q in 0..3 {
            h[[1, q]] = c(0.0, 0.0);
        }
        let y_d = random_tensor(&mut rng, (2, 3, 2));
        let SymbolEstimates::Centralized(centr) = soft_data_estimate(&h, &y_d, 0.1, DemodMode::Centralized) else {
            unreachable!()
        };
        let SymbolEstimates::Distributed(distr) = soft_data_estimate(&h, &y_d, 0.1, DemodMode::Distributed) else {
            unreachable!()
        };
        for q in 0..3 {
            for d in 0..2 {
                assert!((centr[[q, d]] - distr[[0, q, d]]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn hard_decisions() {
        let map = ConstellationMap::uniform(4, 1, 2).unwrap();
        let h = 1.0 / 2f64.sqrt();
        let soft = SymbolEstimates::Centralized(array![[c(0.1, 0.9), c(-h, h)]]);
        let hard = hard_decision(&soft, &map, Slicer::Exhaustive);
        assert_eq!(hard, SymbolEstimates::Centralized(array![[c(h, h), c(-h, h)]]));
        assert_eq!(hard_decision(&soft, &map, Slicer::Decomposed), hard);

        let map16 = ConstellationMap::uniform(16, 1, 1).unwrap();
        let tie = SymbolEstimates::Centralized(array![[c(0.0, 0.0)]]);
        let s10 = 10f64.sqrt();
        let mut ops = OpCounts::default();
        let out = hard_decision_counted(&tie, &map16, Slicer::Exhaustive, &mut ops);
        assert_eq!(out, SymbolEstimates::Centralized(array![[c(-1.0 / s10, -1.0 / s10)]]));
        assert_eq!(ops.get(Step::HardDataDecision), 16);
    }

    #[test]
    fn error_metrics() {
        let truth = array![[c(1.0, 0.0), c(-1.0, 0.0)]];
        let hard = SymbolEstimates::Distributed(
            Array3::from_shape_vec((2, 1, 2), vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]).unwrap(),
        );
        assert_eq!(symbol_error_rates(&hard, &truth), vec![0.5, 0.0]);
        let soft = SymbolEstimates::Centralized(array![[c(1.0, 0.5), c(-1.0, 0.0)]]);
        assert!((mean_absolute_error(&soft, &truth) - 0.25).abs() < 1e-15);
    }
}
