//! Scenario configuration, constellations, resource grid and geometry.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Sub};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::{C64, SPEED_OF_LIGHT};

/// A point in the plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

// ---------------------------------------------------------------------------
// Constellations

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstellationKind {
    Bpsk,
    /// Square QAM with `side = sqrt(M)` levels per axis and normalization
    /// energy `2(M-1)/3`.
    Qam { side: usize, energy: f64 },
}

/// A unit-average-energy symbol alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<C64>,
}

impl Constellation {
    /// Square M-QAM, points in row-major `(r, i)` order:
    /// `s[r*side + i] = ((2r - side + 1) + j(2i - side + 1)) / sqrt(2(M-1)/3)`.
    pub fn qam(order: usize) -> Result<Self> {
        let side = (order as f64).sqrt().round() as usize;
        if order < 4 || side * side != order || !side.is_power_of_two() {
            return Err(Error::UnsupportedOrder(order));
        }
        let energy = 2.0 * (order as f64 - 1.0) / 3.0;
        let scale = energy.sqrt().recip();
        let level = |k: usize| (2.0 * k as f64 - side as f64 + 1.0) * scale;
        let points = (0..side)
            .flat_map(|r| (0..side).map(move |i| C64::new(level(r), level(i))))
            .collect();
        Ok(Constellation {
            kind: ConstellationKind::Qam { side, energy },
            points,
        })
    }

    pub fn bpsk() -> Self {
        Constellation {
            kind: ConstellationKind::Bpsk,
            points: vec![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)],
        }
    }

    /// Order 2 maps to BPSK, any `4^k` to square QAM.
    pub fn from_order(order: usize) -> Result<Self> {
        if order == 2 {
            Ok(Self::bpsk())
        } else {
            Self::qam(order)
        }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn is_qam(&self) -> bool {
        matches!(self.kind, ConstellationKind::Qam { .. })
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.order() as f64
    }

    /// Exhaustive nearest-point search; ties go to the lowest index.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, s) in self.points.iter().enumerate() {
            let d = (z - s).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Per-axis QAM slicer, O(1) in the order. Same tie-break as
    /// [`Constellation::nearest`]. Falls back to the exhaustive search for BPSK.
    pub fn slice(&self, z: C64) -> usize {
        match self.kind {
            ConstellationKind::Bpsk => self.nearest(z),
            ConstellationKind::Qam { side, energy } => {
                let axis = |v: f64| -> usize {
                    // level index k has amplitude 2k - side + 1
                    let u = (v * energy.sqrt() + side as f64 - 1.0) / 2.0;
                    let lo = u.floor();
                    // exact half-way goes to the lower index
                    let k = if u - lo > 0.5 { lo + 1.0 } else { lo };
                    k.clamp(0.0, side as f64 - 1.0) as usize
                };
                axis(z.re) * side + axis(z.im)
            }
        }
    }
}

/// Assignment of a constellation to every data cell `(q, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstellationMap {
    constellations: Vec<Constellation>,
    /// `cell[q * d_len + d]` indexes `constellations`.
    cell: Vec<usize>,
    q_len: usize,
    d_len: usize,
}

impl ConstellationMap {
    pub fn uniform(order: usize, q_len: usize, d_len: usize) -> Result<Self> {
        Ok(ConstellationMap {
            constellations: vec![Constellation::from_order(order)?],
            cell: vec![0; q_len * d_len],
            q_len,
            d_len,
        })
    }

    /// Build from a `Q x D` table of orders.
    pub fn from_orders(orders: &[Vec<usize>]) -> Result<Self> {
        let q_len = orders.len();
        let d_len = orders.first().map_or(0, Vec::len);
        let mut seen: Vec<usize> = Vec::new();
        let mut constellations = Vec::new();
        let mut cell = Vec::with_capacity(q_len * d_len);
        for row in orders {
            if row.len() != d_len {
                return Err(Error::config("constellation_map", "ragged per-cell table"));
            }
            for &m in row {
                let idx = match seen.iter().position(|&s| s == m) {
                    Some(i) => i,
                    None => {
                        constellations.push(Constellation::from_order(m)?);
                        seen.push(m);
                        seen.len() - 1
                    }
                };
                cell.push(idx);
            }
        }
        Ok(ConstellationMap {
            constellations,
            cell,
            q_len,
            d_len,
        })
    }

    #[inline]
    pub fn get(&self, q: usize, d: usize) -> &Constellation {
        &self.constellations[self.cell[q * self.d_len + d]]
    }

    /// Index into [`ConstellationMap::constellations`] for cell `(q, d)`.
    #[inline]
    pub fn class_of(&self, q: usize, d: usize) -> usize {
        self.cell[q * self.d_len + d]
    }

    pub fn constellations(&self) -> &[Constellation] {
        &self.constellations
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.q_len, self.d_len)
    }

    pub fn max_order(&self) -> usize {
        self.constellations.iter().map(Constellation::order).max().unwrap_or(1)
    }
}

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotScheme {
    /// i.i.d. uniform draws from {-1, +1}.
    #[default]
    RandomBpsk,
    /// All pilots equal to +1.
    AllOnes,
}

/// Either one order for every cell or a full `Q x D` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstellationSpec {
    Uniform(usize),
    PerCell(Vec<Vec<usize>>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SnrInput {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

fn snr_list<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    match SnrInput::deserialize(de)? {
        SnrInput::List(v) => Ok(v),
        SnrInput::Range { start, stop, step } => {
            if !(step > 0.0) || stop < start {
                return Err(serde::de::Error::custom(
                    "snr_db range needs step > 0 and stop >= start",
                ));
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|k| start + k as f64 * step).collect())
        }
    }
}

/// Every scenario, waveform and solver parameter. Lengths in metres,
/// frequencies in Hz, angles in radians, SNR in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub f_c: f64,
    pub delta_f: f64,
    /// Subcarriers.
    pub q: usize,
    /// Pilot OFDM symbols.
    pub p: usize,
    /// Data OFDM symbols.
    pub d: usize,
    /// Receiver nodes.
    pub n: usize,
    pub r_srx: f64,
    pub a_srx: f64,
    pub r_s: f64,
    pub n_grid_per_axis: usize,
    pub alpha_oversample: usize,
    #[serde(deserialize_with = "snr_list")]
    pub snr_db: Vec<f64>,
    /// Channel prior variance; `None` resolves to `2 / r_s^2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    pub constellation_map: ConstellationSpec,
    pub pilot_scheme: PilotScheme,
    pub n_mc: usize,
    pub base_seed: u64,
}

impl Default for SystemConfig {
    /// Full-scale defaults: 7.2 GHz carrier, 128 x 60 kHz subcarriers,
    /// 1 pilot + 35 data symbols of 256-QAM, 5 nodes on a 5000-wavelength circle.
    fn default() -> Self {
        let f_c = 7.2e9;
        let lambda = SPEED_OF_LIGHT / f_c;
        SystemConfig {
            f_c,
            delta_f: 60e3,
            q: 128,
            p: 1,
            d: 35,
            n: 5,
            r_srx: 5000.0 * lambda,
            a_srx: TAU,
            r_s: 4800.0 * lambda,
            n_grid_per_axis: 40,
            alpha_oversample: 4,
            snr_db: (0..=6).map(|k| 5.0 * k as f64).collect(),
            gamma: None,
            constellation_map: ConstellationSpec::Uniform(256),
            pilot_scheme: PilotScheme::RandomBpsk,
            n_mc: 3000,
            base_seed: 0,
        }
    }
}

impl SystemConfig {
    /// Reduced configuration for desk-scale Monte Carlo runs: 32 x 240 kHz
    /// subcarriers (same bandwidth scale), 1 pilot + 8 data symbols of 16-QAM,
    /// 300 trials.
    pub fn desk_scale() -> Self {
        SystemConfig {
            q: 32,
            delta_f: 240e3,
            d: 8,
            constellation_map: ConstellationSpec::Uniform(16),
            n_mc: 300,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(text)
            .map_err(|e| Error::config("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and positive, got {v}")))
            }
        };
        pos("f_c", self.f_c)?;
        pos("delta_f", self.delta_f)?;
        pos("r_srx", self.r_srx)?;
        pos("r_s", self.r_s)?;
        if self.q == 0 {
            return Err(Error::config("q", "need at least one subcarrier"));
        }
        if self.p == 0 {
            return Err(Error::config("p", "need at least one pilot symbol"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "need at least one receiver node"));
        }
        if self.r_s >= self.r_srx {
            return Err(Error::config(
                "r_s",
                format!("scene radius {} must be below array radius {}", self.r_s, self.r_srx),
            ));
        }
        if !(self.a_srx > 0.0 && self.a_srx <= TAU) {
            return Err(Error::config("a_srx", format!("must lie in (0, 2pi], got {}", self.a_srx)));
        }
        if self.n_grid_per_axis == 0 {
            return Err(Error::config("n_grid_per_axis", "must be at least 1"));
        }
        if self.alpha_oversample == 0 {
            return Err(Error::config("alpha_oversample", "must be a positive integer"));
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::config("snr_db", "need at least one non-NaN SNR value"));
        }
        if let Some(g) = self.gamma {
            pos("gamma", g)?;
        }
        if self.n_mc == 0 {
            return Err(Error::config("n_mc", "need at least one Monte Carlo trial"));
        }
        if let ConstellationSpec::PerCell(rows) = &self.constellation_map {
            if rows.len() != self.q || rows.iter().any(|r| r.len() != self.d) {
                return Err(Error::config(
                    "constellation_map",
                    format!("per-cell table must be {} x {}", self.q, self.d),
                ));
            }
        }
        self.constellations()
            .map_err(|e| Error::config("constellation_map", e.to_string()))?;
        Ok(())
    }

    pub fn constellations(&self) -> Result<ConstellationMap> {
        match &self.constellation_map {
            ConstellationSpec::Uniform(m) => ConstellationMap::uniform(*m, self.q, self.d),
            ConstellationSpec::PerCell(rows) => ConstellationMap::from_orders(rows),
        }
    }

    pub fn lambda_c(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_c
    }

    /// Wavenumber `2 pi / lambda_c`, rad/m.
    pub fn kappa(&self) -> f64 {
        TAU / self.lambda_c()
    }

    pub fn bandwidth(&self) -> f64 {
        self.q as f64 * self.delta_f
    }

    /// Intrinsic range resolution `c / (2 Q delta_f)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Steering phase slope: `A[n,q] = exp(-j q * slope * distance)`.
    pub fn steering_slope(&self) -> f64 {
        self.kappa() * self.delta_f / self.f_c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(2.0 / (self.r_s * self.r_s))
    }

    /// Noise variance for a per-node average SNR: `2 / (r_s^2 snr_linear)`.
    pub fn sigma2(&self, snr_db: f64) -> f64 {
        2.0 / (self.r_s * self.r_s * db_to_linear(snr_db))
    }

    /// Nominal coarse-grid size `n_grid_per_axis^2`.
    pub fn n_grid(&self) -> usize {
        self.n_grid_per_axis * self.n_grid_per_axis
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

// ---------------------------------------------------------------------------
// Resource grid

/// One OFDM frame: BPSK pilots `Q x P` and data `Q x D`.
#[derive(Debug, Clone)]
pub struct ResourceGrid {
    pub pilots: Array2<C64>,
    pub data: Array2<C64>,
    pub map: ConstellationMap,
    /// Frobenius energy of the pilot block.
    pub pilot_energy: f64,
}

impl ResourceGrid {
    /// Assemble from explicit symbols; validates data membership.
    pub fn new(pilots: Array2<C64>, data: Array2<C64>, map: ConstellationMap) -> Result<Self> {
        if pilots.nrows() != data.nrows() || map.shape() != data.dim() {
            return Err(Error::Shape(format!(
                "pilots {:?}, data {:?}, map {:?}",
                pilots.dim(),
                data.dim(),
                map.shape()
            )));
        }
        for ((q, d), s) in data.indexed_iter() {
            if !map.get(q, d).points().contains(s) {
                return Err(Error::Shape(format!("data[{q},{d}] = {s} not in its constellation")));
            }
        }
        let pilot_energy = pilots.iter().map(|x| x.norm_sqr()).sum();
        Ok(ResourceGrid {
            pilots,
            data,
            map,
            pilot_energy,
        })
    }

    pub fn q(&self) -> usize {
        self.pilots.nrows()
    }

    pub fn p(&self) -> usize {
        self.pilots.ncols()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    /// Time-concatenated `[X S]`, `Q x (P + D)`.
    pub fn full_frame(&self) -> Array2<C64> {
        ndarray::concatenate(ndarray::Axis(1), &[self.pilots.view(), self.data.view()])
            .expect("row counts agree")
    }
}

/// Draw pilots (first) then data symbols from `rng`.
pub fn build_resource_grid<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<ResourceGrid> {
    let map = cfg.constellations()?;
    let pilots = Array2::from_shape_fn((cfg.q, cfg.p), |_| match cfg.pilot_scheme {
        PilotScheme::AllOnes => C64::new(1.0, 0.0),
        PilotScheme::RandomBpsk => C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0),
    });
    let data = Array2::from_shape_fn((cfg.q, cfg.d), |(q, d)| {
        let c = map.get(q, d);
        c.points()[rng.random_range(0..c.order())]
    });
    let pilot_energy = pilots.iter().map(|x| x.norm_sqr()).sum();
    Ok(ResourceGrid {
        pilots,
        data,
        map,
        pilot_energy,
    })
}

// ---------------------------------------------------------------------------
// Scene

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub nodes: Vec<Point>,
    pub ue: Point,
}

/// Node positions: `n` points equi-angularly spaced by `a_srx / n` on the
/// radius-`r_srx` circle, first node at angle 0.
pub fn node_positions(cfg: &SystemConfig) -> Vec<Point> {
    let step = cfg.a_srx / cfg.n as f64;
    (0..cfg.n)
        .map(|k| {
            let th = k as f64 * step;
            Point::new(cfg.r_srx * th.cos(), cfg.r_srx * th.sin())
        })
        .collect()
}

/// Deterministic node placement plus a UE drawn uniformly on the radius-`r_s` disk.
pub fn build_scene<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Scene {
    let r = cfg.r_s * rng.random::<f64>().sqrt();
    let th = 2.0 * PI * rng.random::<f64>();
    Scene {
        nodes: node_positions(cfg),
        ue: Point::new(r * th.cos(), r * th.sin()),
    }
}
