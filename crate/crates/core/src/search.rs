//! Candidate lattice over the search square, exhaustive grid search and a
//! Nelder–Mead refinement around the best grid point.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::Objective;
use crate::model::{Point, SystemConfig};
use crate::ops::OpCounts;

/// Square lattice over `[-R_s, R_s]^2`, points ordered row-major with `x`
/// outer and `y` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrid {
    pub per_axis: usize,
    pub half_width: f64,
    pub points: Vec<Point>,
}

impl SearchGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Lattice spacing; zero for a single point.
    pub fn cell(&self) -> f64 {
        if self.per_axis > 1 {
            2.0 * self.half_width / (self.per_axis - 1) as f64
        } else {
            0.0
        }
    }
}

/// Points per axis: the nominal count, raised until the spacing is at most
/// `1/alpha` of the range resolution `c / (2 Q delta_f)`.
pub fn points_per_axis(cfg: &SystemConfig) -> usize {
    let needed = (cfg.alpha_oversample as f64 * 2.0 * cfg.r_s / cfg.range_resolution()).ceil();
    cfg.n_grid_per_axis.max(needed as usize)
}

pub fn make_grid(cfg: &SystemConfig) -> SearchGrid {
    lattice(points_per_axis(cfg), cfg.r_s)
}

pub fn lattice(per_axis: usize, half_width: f64) -> SearchGrid {
    let coord = |i: usize| {
        if per_axis == 1 {
            0.0
        } else {
            -half_width + 2.0 * half_width * i as f64 / (per_axis - 1) as f64
        }
    };
    let points = (0..per_axis)
        .flat_map(|i| (0..per_axis).map(move |j| Point::new(coord(i), coord(j))))
        .collect();
    SearchGrid {
        per_axis,
        half_width,
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridMax {
    pub index: usize,
    pub point: Point,
    pub score: f64,
}

/// Best finite-scoring grid point; ties go to the lowest index.
pub fn grid_search<O: Objective + ?Sized>(objective: &O, grid: &SearchGrid) -> Result<GridMax> {
    grid_search_counted(objective, grid, &mut OpCounts::default())
}

pub fn grid_search_counted<O: Objective + ?Sized>(
    objective: &O,
    grid: &SearchGrid,
    ops: &mut OpCounts,
) -> Result<GridMax> {
    let (best, counts) = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut local = OpCounts::default();
            let s = objective.evaluate(p, &mut local);
            (s.is_finite().then_some((i, s)), local)
        })
        .reduce(
            || (None, OpCounts::default()),
            |(a, mut ca), (b, cb)| {
                ca += cb;
                (better(a, b), ca)
            },
        );
    *ops += counts;
    let (index, score) = best.ok_or(Error::NoFiniteScore)?;
    Ok(GridMax {
        index,
        point: grid.points[index],
        score,
    })
}

fn better(a: Option<(usize, f64)>, b: Option<(usize, f64)>) -> Option<(usize, f64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                Some(b)
            } else {
                Some(a)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    /// Initial simplex edge, metres.
    pub scale: f64,
    pub max_iter: usize,
    /// Stop once the score spread across the simplex falls below
    /// `tol * max(1, |best score|)`.
    pub tol: f64,
}

impl RefineOptions {
    /// One lattice cell as the starting simplex edge.
    pub fn for_grid(grid: &SearchGrid) -> Self {
        RefineOptions {
            scale: if grid.cell() > 0.0 { grid.cell() } else { 1.0 },
            max_iter: 200,
            tol: 1e-10,
        }
    }
}

/// Nelder–Mead maximization from `start`. The result never scores below the
/// start; with `max_iter == 0` it is the start itself.
pub fn nelder_mead_refine<O: Objective + ?Sized>(
    objective: &O,
    start: Point,
    opts: RefineOptions,
) -> (Point, f64) {
    nelder_mead_refine_counted(objective, start, opts, &mut OpCounts::default())
}

pub fn nelder_mead_refine_counted<O: Objective + ?Sized>(
    objective: &O,
    start: Point,
    opts: RefineOptions,
    ops: &mut OpCounts,
) -> (Point, f64) {
    let mut f = |p: Point| {
        let s = objective.evaluate(p, ops);
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    };
    let start_score = f(start);
    if opts.max_iter == 0 {
        return (start, start_score);
    }
    let mut simplex = [
        (start, start_score),
        (start + Point::new(opts.scale, 0.0), 0.0),
        (start + Point::new(0.0, opts.scale), 0.0),
    ];
    simplex[1].1 = f(simplex[1].0);
    simplex[2].1 = f(simplex[2].0);

    for _ in 0..opts.max_iter {
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (best, worst) = (simplex[0].1, simplex[2].1);
        if best.is_finite() && worst.is_finite() && best - worst <= opts.tol * best.abs().max(1.0) {
            break;
        }
        let centroid = (simplex[0].0 + simplex[1].0) * 0.5;
        let toward = |t: f64| centroid + (simplex[2].0 - centroid) * t;

        let reflected = toward(-1.0);
        let fr = f(reflected);
        if fr > simplex[0].1 {
            let expanded = toward(-2.0);
            let fe = f(expanded);
            simplex[2] = if fe > fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr > simplex[1].1 {
            simplex[2] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr > simplex[2].1 {
                let c = toward(-0.5);
                (c, f(c))
            } else {
                let c = toward(0.5);
                (c, f(c))
            };
            if fc > simplex[2].1.max(fr) {
                simplex[2] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = anchor + (v.0 - anchor) * 0.5;
                    v.1 = f(v.0);
                }
            }
        }
    }
    let best = simplex.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    if best.1 >= start_score {
        best
    } else {
        (start, start_score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_resolution_and_grid_size() {
        let cfg = SystemConfig::default();
        assert!((cfg.range_resolution() - 19.5177).abs() < 1e-3);
        assert_eq!(points_per_axis(&cfg), 82);
        assert_eq!(make_grid(&cfg).len(), 82 * 82);
        assert_eq!(points_per_axis(&SystemConfig::desk_scale()), 82);
    }

    #[test]
    fn nominal_count_kept_when_fine_enough() {
        let cfg = SystemConfig {
            alpha_oversample: 0,
            ..SystemConfig::default()
        };
        assert_eq!(points_per_axis(&cfg), 40);
    }

    #[test]
    fn lattice_corners_and_order() {
        let g = lattice(3, 2.0);
        let coords: Vec<(f64, f64)> = g.points.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(coords[0], (-2.0, -2.0));
        assert_eq!(coords[1], (-2.0, 0.0));
        assert_eq!(coords[3], (0.0, -2.0));
        assert_eq!(coords[8], (2.0, 2.0));
        assert_eq!(g.cell(), 2.0);
        let one = lattice(1, 5.0);
        assert_eq!(one.points, vec![Point::ORIGIN]);
    }

    #[test]
    fn grid_search_ties_and_nan() {
        let g = lattice(3, 1.0);
        let flat = |_: Point| 1.0;
        assert_eq!(grid_search(&flat, &g).unwrap().index, 0);
        let nan_first = |p: Point| if p.x < 0.0 { f64::NAN } else { -p.y.abs() };
        let m = grid_search(&nan_first, &g).unwrap();
        assert_eq!(m.point, Point::new(0.0, 0.0));
        let all_nan = |_: Point| f64::NAN;
        assert!(matches!(grid_search(&all_nan, &g), Err(Error::NoFiniteScore)));
    }

    #[test]
    fn refine_quadratic_bowl() {
        let target = Point::new(0.37, -1.2);
        let bowl = move |p: Point| -(p - target).norm().powi(2);
        let (p, s) = nelder_mead_refine(
            &bowl,
            Point::new(0.0, 0.0),
            RefineOptions {
                scale: 0.5,
                max_iter: 500,
                tol: 1e-14,
            },
        );
        assert!(p.dist(target) < 1e-5, "{p:?}");
        assert!(s <= 0.0);
    }

    #[test]
    fn refine_zero_iterations_and_monotone() {
        let bowl = |p: Point| -(p.x * p.x + p.y * p.y);
        let start = Point::new(1.0, 1.0);
        let opts = RefineOptions {
            scale: 0.1,
            max_iter: 0,
            tol: 1e-10,
        };
        assert_eq!(nelder_mead_refine(&bowl, start, opts).0, start);
        let (_, s) = nelder_mead_refine(&bowl, start, RefineOptions { max_iter: 3, ..opts });
        assert!(s >= bowl(start));
    }
}
