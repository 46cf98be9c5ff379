//! Mixed `L^q_t L^r_x` norms, bilinear ratios, occupancy checks and
//! log-log scaling sweeps.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::packets::{
    counterexample_grid, nontransverse_pair, transverse_pair, Construction, CounterexamplePair, PacketFamily,
};
use crate::spectral::{Evolution, FrequencyField, Lattice, LatticeEvaluator, SpatialField, Vec3};

/// A Lebesgue exponent in `[1, infinity]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinite)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::Config(format!("exponent {p} must lie in [1, inf]")))
        }
    }

    /// Exponent with the given reciprocal; `0` maps to infinity.
    pub fn from_reciprocal(inv: f64) -> Result<Self> {
        if inv == 0.0 {
            Ok(Exponent::Infinite)
        } else if inv > 0.0 && inv <= 1.0 {
            Ok(Exponent::Finite(1.0 / inv))
        } else {
            Err(Error::Config(format!("reciprocal exponent {inv} must lie in [0, 1]")))
        }
    }

    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinite => 0.0,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity") {
            return Ok(Exponent::Infinite);
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse exponent '{s}'")))?;
        Exponent::new(v)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedNormParams {
    pub q: Exponent,
    pub r: Exponent,
}

impl MixedNormParams {
    pub fn new(q: Exponent, r: Exponent) -> Self {
        Self { q, r }
    }

    pub fn finite(q: f64, r: f64) -> Result<Self> {
        Ok(Self {
            q: Exponent::new(q)?,
            r: Exponent::new(r)?,
        })
    }
}

fn lp_sum(values: impl Iterator<Item = f64>, p: Exponent, weight: f64) -> f64 {
    match p {
        Exponent::Infinite => values.fold(0.0, f64::max),
        Exponent::Finite(p) => {
            let s: f64 = values.map(|v| v.powf(p)).sum();
            (s * weight).powf(1.0 / p)
        }
    }
}

/// Riemann-sum mixed norm of moduli sampled on equal spatial cells of
/// measure `cell`, one slice per time cell of length `dt`.
pub fn mixed_norm_samples(slices: &[Vec<f64>], cell: f64, dt: f64, p: &MixedNormParams) -> Result<f64> {
    if slices.is_empty() {
        return Err(Error::Structural("mixed norm of an empty slice list".into()));
    }
    let inner: Vec<f64> = slices
        .iter()
        .map(|s| lp_sum(s.iter().copied(), p.r, cell))
        .collect();
    Ok(lp_sum(inner.into_iter(), p.q, dt))
}

/// Mixed norm of grid slices, optionally restricted to a per-slice mask.
pub fn mixed_norm(slices: &[SpatialField], dt: f64, p: &MixedNormParams, mask: Option<&[Vec<bool>]>) -> Result<f64> {
    let first = slices
        .first()
        .ok_or_else(|| Error::Structural("mixed norm of an empty slice list".into()))?;
    let grid = first.grid();
    if slices.iter().any(|s| s.grid() != grid && **s.grid() != **grid) {
        return Err(Error::Structural("slices live on different grids".into()));
    }
    if let Some(m) = mask {
        if m.len() != slices.len() || m.iter().any(|row| row.len() != grid.len()) {
            return Err(Error::Structural("mask does not conform to the slices".into()));
        }
    }
    let moduli: Vec<Vec<f64>> = slices
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.values()
                .iter()
                .enumerate()
                .map(|(j, v)| match mask {
                    Some(m) if !m[i][j] => 0.0,
                    _ => v.norm(),
                })
                .collect()
        })
        .collect();
    mixed_norm_samples(&moduli, grid.cell_measure(), dt, p)
}

/// Space-time box `{ t in [t0, t1], |x_a - drift_a t - center_a| <= h_a }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShearedBox {
    pub dim: usize,
    pub t_range: (f64, f64),
    pub center: Vec3,
    pub drift: Vec3,
    pub half_widths: Vec3,
}

impl ShearedBox {
    pub fn slice_measure(&self) -> f64 {
        (0..self.dim).map(|a| 2.0 * self.half_widths[a]).product()
    }

    pub fn duration(&self) -> f64 {
        self.t_range.1 - self.t_range.0
    }

    /// Midpoint sampling with `n_t` time cells and `counts[a]` cells per axis.
    pub fn sample(&self, n_t: usize, counts: [usize; 3]) -> Result<SampledRegion> {
        if n_t == 0 || counts.iter().take(self.dim).any(|&c| c == 0) {
            return Err(Error::Config("region sampling needs at least one cell per axis".into()));
        }
        let dt = self.duration() / n_t as f64;
        let mut steps = [0.0; 3];
        let mut used = [1usize; 3];
        for a in 0..self.dim {
            used[a] = counts[a];
            steps[a] = 2.0 * self.half_widths[a] / counts[a] as f64;
        }
        let times: Vec<f64> = (0..n_t).map(|i| self.t_range.0 + (i as f64 + 0.5) * dt).collect();
        let lattices = times
            .iter()
            .map(|&t| {
                let mut origin = [0.0; 3];
                for a in 0..self.dim {
                    origin[a] = self.center[a] + self.drift[a] * t - self.half_widths[a] + 0.5 * steps[a];
                }
                Lattice {
                    origin,
                    steps,
                    counts: used,
                }
            })
            .collect();
        Ok(SampledRegion {
            times,
            dt,
            lattices,
            cell: steps.iter().take(self.dim).product(),
        })
    }

    /// Sampling with time step at most `dt_max` and spatial step at most `dx_max`.
    pub fn sample_with_spacing(&self, dt_max: f64, dx_max: f64) -> Result<SampledRegion> {
        if !(dt_max > 0.0 && dx_max > 0.0) {
            return Err(Error::Config("sampling steps must be positive".into()));
        }
        let n_t = (self.duration() / dt_max).ceil().max(1.0) as usize;
        let mut counts = [1usize; 3];
        for a in 0..self.dim {
            counts[a] = (2.0 * self.half_widths[a] / dx_max).ceil().max(1.0) as usize;
        }
        self.sample(n_t, counts)
    }
}

/// Midpoint samples of a space-time region: one product lattice per time.
#[derive(Debug, Clone)]
pub struct SampledRegion {
    pub times: Vec<f64>,
    pub dt: f64,
    pub lattices: Vec<Lattice>,
    pub cell: f64,
}

impl SampledRegion {
    pub fn point_count(&self) -> usize {
        self.lattices.iter().map(Lattice::len).sum()
    }

    /// Applies `f(t, lattice)` to every slice.
    pub fn map_slices(&self, mut f: impl FnMut(f64, &Lattice) -> Vec<f64>) -> Vec<Vec<f64>> {
        self.times.iter().zip(&self.lattices).map(|(&t, l)| f(t, l)).collect()
    }

    pub fn mixed_norm(&self, slices: &[Vec<f64>], p: &MixedNormParams) -> Result<f64> {
        mixed_norm_samples(slices, self.cell, self.dt, p)
    }
}

/// Moduli of a propagated datum on every slice of a region.
pub fn modulus_slices(datum: &FrequencyField, ev: Evolution, region: &SampledRegion) -> Vec<Vec<f64>> {
    let eval = LatticeEvaluator::new(datum, ev);
    region.map_slices(|t, l| eval.slice(t, l).iter().map(|v| v.norm()).collect())
}

/// `||u v||_{L^q L^r(region)} / (||f|| ||g||)` with `u`, `v` the two flows.
pub fn bilinear_ratio(
    f: &FrequencyField,
    g: &FrequencyField,
    evs: (Evolution, Evolution),
    p: &MixedNormParams,
    region: &SampledRegion,
) -> Result<f64> {
    let (nf, ng) = (f.norm(), g.norm());
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::Domain("bilinear ratio with a zero datum".into()));
    }
    let u = modulus_slices(f, evs.0, region);
    let v = modulus_slices(g, evs.1, region);
    let product: Vec<Vec<f64>> = u
        .iter()
        .zip(&v)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).collect())
        .collect();
    Ok(region.mixed_norm(&product, p)? / (nf * ng))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occupancy {
    pub min: f64,
    pub threshold: f64,
    pub pass: bool,
    /// Sample `(t, x)` attaining the minimum.
    pub at: (f64, Vec3),
    pub samples: usize,
}

/// Minimum of sampled moduli over the region against a threshold.
pub fn occupancy_check(
    region: &SampledRegion,
    threshold: f64,
    mut moduli: impl FnMut(f64, &Lattice) -> Vec<f64>,
) -> Occupancy {
    let mut min = f64::INFINITY;
    let mut at = (0.0, [0.0; 3]);
    let mut samples = 0;
    for (&t, lattice) in region.times.iter().zip(&region.lattices) {
        for (i, v) in moduli(t, lattice).into_iter().enumerate() {
            samples += 1;
            if v < min {
                min = v;
                at = (t, lattice.point(i));
            }
        }
    }
    Occupancy {
        min,
        threshold,
        pass: min >= threshold,
        at,
        samples,
    }
}

/// The region where the counterexample's product is large.
pub fn omega_region(dim: usize, construction: Construction, n: u32) -> ShearedBox {
    let nf = n as f64;
    let mut half_widths = [0.0; 3];
    match construction {
        Construction::Transverse => {
            half_widths[0] = nf.sqrt();
            for h in half_widths.iter_mut().take(dim).skip(1) {
                *h = nf;
            }
        }
        Construction::NonTransverse { m } => {
            half_widths[0] = 1.0;
            for h in half_widths.iter_mut().take(dim).skip(1) {
                *h = m as f64;
            }
        }
    }
    ShearedBox {
        dim,
        t_range: (-nf * nf, nf * nf),
        center: [0.0; 3],
        drift: [-1.0, 0.0, 0.0],
        half_widths,
    }
}

/// Plate `{|t| <= n^2, |x_1 + t| <= 1, |x'| <= n}` of the wave datum.
pub fn plate_region(dim: usize, n: u32) -> ShearedBox {
    let nf = n as f64;
    let mut half_widths = [0.0; 3];
    half_widths[0] = 1.0;
    for h in half_widths.iter_mut().take(dim).skip(1) {
        *h = nf;
    }
    ShearedBox {
        dim,
        t_range: (-nf * nf, nf * nf),
        center: [0.0; 3],
        drift: [-1.0, 0.0, 0.0],
        half_widths,
    }
}

/// Tube of the Schrodinger datum.
pub fn tube_region(dim: usize, construction: Construction, n: u32) -> ShearedBox {
    let mut half_widths = [0.0; 3];
    match construction {
        Construction::Transverse => {
            let s = (n as f64).sqrt();
            for h in half_widths.iter_mut().take(dim) {
                *h = s;
            }
            ShearedBox {
                dim,
                t_range: (-(n as f64), n as f64),
                center: [0.0; 3],
                drift: [-1.0, -1.0, 0.0],
                half_widths,
            }
        }
        Construction::NonTransverse { m } => {
            let mf = m as f64;
            for h in half_widths.iter_mut().take(dim) {
                *h = mf;
            }
            ShearedBox {
                dim,
                t_range: (-mf, mf),
                center: [0.0; 3],
                drift: [-1.0, 0.0, 0.0],
                half_widths,
            }
        }
    }
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max_i |y_i / fit(x_i) - 1|`.
    pub residual: f64,
}

pub fn fit_loglog(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::Config("a slope fit needs at least two points".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive values".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("log-log fit with identical abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| ((y - intercept - slope * x).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(LogLogFit {
        slope,
        intercept,
        residual,
    })
}

/// How `M` follows `N` in a non-transverse sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MRule {
    EqualN,
    One,
}

impl MRule {
    pub fn m(self, n: u32) -> u32 {
        match self {
            MRule::EqualN => n,
            MRule::One => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepConstruction {
    Transverse,
    NonTransverse(MRule),
}

impl SweepConstruction {
    pub fn at(self, n: u32) -> Construction {
        match self {
            SweepConstruction::Transverse => Construction::Transverse,
            SweepConstruction::NonTransverse(rule) => Construction::NonTransverse { m: rule.m(n) },
        }
    }

    /// Exponent of `N` in `||1_Omega|| / (aggregate norms)` from the
    /// construction's normalisations.
    pub fn predicted_slope(self, dim: usize, p: &MixedNormParams) -> f64 {
        let d = dim as f64;
        let (iq, ir) = (p.q.reciprocal(), p.r.reciprocal());
        match self {
            SweepConstruction::Transverse => {
                2.0 * iq + (d - 1.0) * ir + 0.5 * ir - ((d - 1.0) / 2.0 + 0.25 + d / 2.0 + 0.25)
            }
            SweepConstruction::NonTransverse(MRule::EqualN) => 2.0 * iq + (d - 1.0) * ir - (d - 1.0) / 2.0 - d / 2.0,
            SweepConstruction::NonTransverse(MRule::One) => 2.0 * iq - (d - 1.0) / 2.0 - 1.0,
        }
    }
}

/// Spacing of the samples used for pointwise quantities inside `Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    pub dt: f64,
    pub dx: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self { dt: 1.0, dx: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRequest {
    pub dim: usize,
    pub construction: SweepConstruction,
    pub params: MixedNormParams,
    pub n_list: Vec<u32>,
    pub grid_scale: f64,
    /// Also evaluate `||U V||_{L^q L^r(Omega)} / aggregates` for `N` up to this.
    pub vector_valued_up_to: Option<u32>,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub n: u32,
    pub m: Option<u32>,
    pub measured: f64,
    pub indicator_norm: f64,
    pub wave_aggregate: f64,
    pub schrodinger_aggregate: f64,
    pub wave_translates: usize,
    pub schrodinger_translates: usize,
    pub vector_valued: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub predicted_slope: f64,
}

pub fn validate_n_list(n_list: &[u32]) -> Result<()> {
    if n_list.len() < 3 {
        return Err(Error::Config(format!("need at least 3 scales, got {}", n_list.len())));
    }
    for &n in n_list {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("scale {n} must be a power of two and at least 4")));
        }
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("scales must be strictly increasing".into()));
    }
    Ok(())
}

/// Builds the counterexample at scale `n` with its two translated families.
pub fn build_counterexample(
    dim: usize,
    construction: Construction,
    n: u32,
    grid_scale: f64,
) -> Result<(CounterexamplePair, PacketFamily, PacketFamily)> {
    let grid = Arc::new(counterexample_grid(dim, construction, n, grid_scale)?);
    let pair = match construction {
        Construction::Transverse => transverse_pair(n, &grid)?,
        Construction::NonTransverse { m } => nontransverse_pair(n, m, &grid)?,
    };
    let wave = pair.wave_family()?;
    let schr = pair.schrodinger_family()?;
    Ok((pair, wave, schr))
}

/// `||1_Omega||_{L^q L^r}` via the mixed-norm quadrature of the indicator.
pub fn indicator_norm(region: &ShearedBox, p: &MixedNormParams) -> Result<f64> {
    let counts = [4usize; 3];
    let sampled = region.sample(8, counts)?;
    let ones = sampled.map_slices(|_, l| vec![1.0; l.len()]);
    sampled.mixed_norm(&ones, p)
}

/// `||U V||_{L^q L^r(region)}` with both square functions on the region lattices.
pub fn family_product_norm(
    wave: &PacketFamily,
    schrodinger: &PacketFamily,
    region: &SampledRegion,
    p: &MixedNormParams,
) -> Result<f64> {
    let u = wave.lattice_evaluator(Evolution::HalfWave);
    let v = schrodinger.lattice_evaluator(Evolution::Schrodinger);
    let slices = region.map_slices(|t, lattice| {
        u.square_slice(t, lattice)
            .into_iter()
            .zip(v.square_slice(t, lattice))
            .map(|(a, b)| a * b)
            .collect()
    });
    region.mixed_norm(&slices, p)
}

/// Measures `R(N) = ||1_Omega|| / (||U-family|| ||V-family||)` along the
/// scale list and fits its log-log slope.
pub fn scaling_sweep(req: &SweepRequest) -> Result<SweepResult> {
    validate_n_list(&req.n_list)?;
    if !(2..=3).contains(&req.dim) {
        return Err(Error::Config(format!("dimension must be 2 or 3, got {}", req.dim)));
    }
    let mut points = Vec::with_capacity(req.n_list.len());
    for &n in &req.n_list {
        let construction = req.construction.at(n);
        let (_, wave, schr) = build_counterexample(req.dim, construction, n, req.grid_scale)?;
        let omega = omega_region(req.dim, construction, n);
        let indicator = indicator_norm(&omega, &req.params)?;
        let agg = wave.aggregate_norm() * schr.aggregate_norm();
        let vector_valued = match req.vector_valued_up_to {
            Some(limit) if n <= limit => {
                let region = omega.sample_with_spacing(req.sampling.dt, req.sampling.dx)?;
                Some(family_product_norm(&wave, &schr, &region, &req.params)? / agg)
            }
            _ => None,
        };
        points.push(SweepPoint {
            n,
            m: match construction {
                Construction::Transverse => None,
                Construction::NonTransverse { m } => Some(m),
            },
            measured: indicator / agg,
            indicator_norm: indicator,
            wave_aggregate: wave.aggregate_norm(),
            schrodinger_aggregate: schr.aggregate_norm(),
            wave_translates: wave.len(),
            schrodinger_translates: schr.len(),
            vector_valued,
        });
    }
    let fit = fit_loglog(&points.iter().map(|p| (p.n as f64, p.measured)).collect::<Vec<_>>())?;
    Ok(SweepResult {
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        predicted_slope: req.construction.predicted_slope(req.dim, &req.params),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthResult {
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub exponent: f64,
    pub residual: f64,
}

/// `L^2_{t,x}` norm of the product of the evolved data over the space-time
/// ball `{|t| + |x| < R}` for every `R`, and the fitted growth exponent.
/// Only the planar case is supported, where `2/(d-1) = 2`.
pub fn ball_norm_growth(data: &[FrequencyField], ev: Evolution, radii: &[f64], sampling: Sampling) -> Result<GrowthResult> {
    let dim = data
        .first()
        .ok_or_else(|| Error::Structural("need at least one datum".into()))?
        .grid()
        .dim();
    let evaluators: Vec<LatticeEvaluator> = data.iter().map(|d| LatticeEvaluator::new(d, ev)).collect();
    ball_norm_growth_with(dim, radii, sampling, |t, lattice| {
        let mut product = vec![1.0f64; lattice.len()];
        for e in &evaluators {
            for (p, v) in product.iter_mut().zip(e.slice(t, lattice)) {
                *p *= v.norm();
            }
        }
        Ok(product)
    })
}

/// Ball-norm growth of an arbitrary product modulus `product(t, lattice)`.
pub fn ball_norm_growth_with(
    dim: usize,
    radii: &[f64],
    sampling: Sampling,
    mut product: impl FnMut(f64, &Lattice) -> Result<Vec<f64>>,
) -> Result<GrowthResult> {
    if dim != 2 {
        return Err(Error::Unsupported(format!(
            "ball norm growth is only implemented in two dimensions, got {dim}"
        )));
    }
    if radii.len() < 3 {
        return Err(Error::Config(format!("need at least 3 radii, got {}", radii.len())));
    }
    if radii.iter().any(|&r| !(r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("radii must be positive and increasing".into()));
    }
    let mut norms = Vec::with_capacity(radii.len());
    for &r in radii {
        let n_t = (2.0 * r / sampling.dt).ceil() as usize;
        let dt = 2.0 * r / n_t as f64;
        let count = (2.0 * r / sampling.dx).ceil() as usize;
        let dx = 2.0 * r / count as f64;
        let lattice = Lattice {
            origin: [-r + 0.5 * dx, -r + 0.5 * dx, 0.0],
            steps: [dx, dx, 0.0],
            counts: [count, count, 1],
        };
        let mut total = 0.0;
        for i in 0..n_t {
            let t = -r + (i as f64 + 0.5) * dt;
            let reach = r - t.abs();
            for (j, p) in product(t, &lattice)?.iter().enumerate() {
                let x = lattice.point(j);
                if x[0].hypot(x[1]) < reach {
                    total += p * p;
                }
            }
        }
        norms.push((total * dx * dx * dt).sqrt());
    }
    if norms.iter().all(|&v| v == 0.0) {
        return Ok(GrowthResult {
            radii: radii.to_vec(),
            norms,
            exponent: 0.0,
            residual: 0.0,
        });
    }
    let fit = fit_loglog(&radii.iter().copied().zip(norms.iter().copied()).collect::<Vec<_>>())?;
    Ok(GrowthResult {
        radii: radii.to_vec(),
        norms,
        exponent: fit.slope,
        residual: fit.residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::{make_datum, FrequencySupport, PacketSpec};
    use crate::spectral::GridSpec;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn box2(t: f64, hx: f64, hy: f64) -> ShearedBox {
        ShearedBox {
            dim: 2,
            t_range: (0.0, t),
            center: [0.0; 3],
            drift: [0.3, -0.2, 0.0],
            half_widths: [hx, hy, 0.0],
        }
    }

    #[test]
    fn exponent_parsing() {
        assert_eq!("inf".parse::<Exponent>().unwrap(), Exponent::Infinite);
        assert_eq!("2".parse::<Exponent>().unwrap(), Exponent::Finite(2.0));
        assert!("0.5".parse::<Exponent>().is_err());
        assert!("x".parse::<Exponent>().is_err());
        assert_eq!(Exponent::from_reciprocal(0.0).unwrap(), Exponent::Infinite);
    }

    #[test]
    fn indicator_norms() {
        let region = box2(3.0, 1.0, 2.5);
        let x = region.slice_measure();
        let t = 3.0;
        let p11 = MixedNormParams::finite(1.0, 1.0).unwrap();
        let p21 = MixedNormParams::finite(2.0, 1.0).unwrap();
        assert!((indicator_norm(&region, &p11).unwrap() - t * x).abs() < 1e-10);
        assert!((indicator_norm(&region, &p21).unwrap() - x * t.sqrt()).abs() < 1e-10);
        let inf = MixedNormParams::new(Exponent::Infinite, Exponent::Infinite);
        assert!((indicator_norm(&region, &inf).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_slices_rejected() {
        let p = MixedNormParams::finite(1.0, 1.0).unwrap();
        assert!(matches!(mixed_norm_samples(&[], 1.0, 1.0, &p), Err(Error::Structural(_))));
        assert!(mixed_norm(&[], 1.0, &p, None).is_err());
    }

    #[test]
    fn grid_mixed_norm_with_mask() {
        let g = Arc::new(GridSpec::cubic(2, 4.0, 8, (0.0, 1.0), 2).unwrap());
        let ones = SpatialField::from_fn(g.clone(), |_| Complex64::new(1.0, 0.0));
        let slices = vec![ones.clone(), ones];
        let mask: Vec<Vec<bool>> = (0..2).map(|_| (0..g.len()).map(|i| i % 2 == 0).collect()).collect();
        let p = MixedNormParams::finite(1.0, 1.0).unwrap();
        let full = mixed_norm(&slices, 0.5, &p, None).unwrap();
        let half = mixed_norm(&slices, 0.5, &p, Some(&mask)).unwrap();
        assert!((full - 16.0).abs() < 1e-12);
        assert!((half - 8.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_trivial_cases() {
        let region = box2(1.0, 1.0, 1.0).sample(4, [3, 3, 1]).unwrap();
        let occ = occupancy_check(&region, 0.5, |_, l| vec![1.0; l.len()]);
        assert!(occ.pass && occ.min == 1.0);
        let occ = occupancy_check(&region, 0.5, |_, l| vec![0.0; l.len()]);
        assert!(!occ.pass && occ.min == 0.0);
    }

    #[test]
    fn sweep_guards() {
        for bad in [vec![8, 16], vec![8, 12, 16], vec![16, 8, 32], vec![2, 4, 8]] {
            assert!(matches!(validate_n_list(&bad), Err(Error::Config(_))));
        }
        assert!(validate_n_list(&[4, 8, 16]).is_ok());
    }

    #[test]
    fn predicted_slopes() {
        let p = MixedNormParams::finite(1.0, 1.0).unwrap();
        assert!((SweepConstruction::Transverse.predicted_slope(2, &p) - 1.5).abs() < 1e-15);
        assert!((SweepConstruction::NonTransverse(MRule::EqualN).predicted_slope(2, &p) - 1.5).abs() < 1e-15);
        assert!((SweepConstruction::NonTransverse(MRule::One).predicted_slope(2, &p) - 0.5).abs() < 1e-15);
        let boundary = MixedNormParams::finite(1.6, 2.0).unwrap();
        assert!(SweepConstruction::Transverse.predicted_slope(2, &boundary).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(1.25))).collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope - 1.25).abs() < 1e-12 && fit.residual < 1e-12);
    }

    #[test]
    fn bilinear_ratio_rejects_zero() {
        let g = Arc::new(GridSpec::cubic(2, 40.0, 64, (0.0, 1.0), 2).unwrap());
        let f = make_datum(
            &PacketSpec::new(FrequencySupport::Ball { center: [0.5, 0.0, 0.0], radius: 0.3 }, 1.0).unwrap(),
            &g,
        )
        .unwrap();
        let zero = FrequencyField::zero(g);
        let region = box2(1.0, 1.0, 1.0).sample(2, [2, 2, 1]).unwrap();
        let p = MixedNormParams::finite(2.0, 2.0).unwrap();
        let r = bilinear_ratio(&f, &zero, (Evolution::HalfWave, Evolution::Schrodinger), &p, &region);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn ball_growth_guards() {
        let g2 = Arc::new(GridSpec::cubic(2, 40.0, 64, (0.0, 1.0), 2).unwrap());
        let g3 = Arc::new(GridSpec::cubic(3, 40.0, 16, (0.0, 1.0), 2).unwrap());
        let z2 = FrequencyField::zero(g2);
        let z3 = FrequencyField::zero(g3);
        let s = Sampling::default();
        assert!(matches!(
            ball_norm_growth(&[z3.clone(), z3], Evolution::Schrodinger, &[1.0, 2.0, 4.0], s),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            ball_norm_growth(&[z2.clone(), z2.clone()], Evolution::Schrodinger, &[4.0], s),
            Err(Error::Config(_))
        ));
        let res = ball_norm_growth(&[z2.clone(), z2], Evolution::Schrodinger, &[1.0, 2.0, 4.0], s).unwrap();
        assert!(res.norms.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resolution_doubling_is_stable() {
        let g = Arc::new(GridSpec::cubic(2, 200.0, 512, (0.0, 1.0), 2).unwrap());
        let f = make_datum(
            &PacketSpec::new(FrequencySupport::Ball { center: [1.0, 0.0, 0.0], radius: 0.25 }, 1.0).unwrap(),
            &g,
        )
        .unwrap();
        let region = ShearedBox {
            dim: 2,
            t_range: (-10.0, 10.0),
            center: [0.0; 3],
            drift: [-1.0, 0.0, 0.0],
            half_widths: [20.0, 20.0, 0.0],
        };
        for (q, r) in [(1.0, 1.0), (2.0, 2.0), (1.0, 2.0)] {
            let p = MixedNormParams::finite(q, r).unwrap();
            let coarse = region.sample_with_spacing(1.0, 1.0).unwrap();
            let fine = region.sample_with_spacing(0.5, 0.5).unwrap();
            let a = coarse.mixed_norm(&modulus_slices(&f, Evolution::HalfWave, &coarse), &p).unwrap();
            let b = fine.mixed_norm(&modulus_slices(&f, Evolution::HalfWave, &fine), &p).unwrap();
            assert!((a / b - 1.0).abs() < 0.01, "{q} {r}: {a} vs {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_under_domination(
            vals in proptest::collection::vec(0.0f64..5.0, 12),
            scale in 0.0f64..1.0,
            q in 1.0f64..4.0, r in 1.0f64..4.0,
        ) {
            let p = MixedNormParams::finite(q, r).unwrap();
            let big: Vec<Vec<f64>> = vals.chunks(4).map(|c| c.to_vec()).collect();
            let small: Vec<Vec<f64>> = big.iter().map(|s| s.iter().map(|v| v * scale).collect()).collect();
            prop_assert!(mixed_norm_samples(&small, 0.3, 0.7, &p).unwrap() <= mixed_norm_samples(&big, 0.3, 0.7, &p).unwrap() + 1e-12);
        }

        #[test]
        fn equal_exponents_match_space_time_norm(
            vals in proptest::collection::vec(0.0f64..5.0, 12),
            q in 1.0f64..6.0,
        ) {
            let p = MixedNormParams::finite(q, q).unwrap();
            let slices: Vec<Vec<f64>> = vals.chunks(3).map(|c| c.to_vec()).collect();
            let direct = (vals.iter().map(|v| v.powf(q)).sum::<f64>() * 0.3 * 0.7).powf(1.0 / q);
            let mixed = mixed_norm_samples(&slices, 0.3, 0.7, &p).unwrap();
            prop_assert!((mixed - direct).abs() <= 1e-10 * direct.max(1.0));
        }

        #[test]
        fn region_additivity(t in 0.5f64..10.0, hx in 0.1f64..5.0, hy in 0.1f64..5.0) {
            let region = box2(t, hx, hy);
            let p = MixedNormParams::finite(1.0, 1.0).unwrap();
            let measure = t * region.slice_measure();
            prop_assert!((indicator_norm(&region, &p).unwrap() - measure).abs() <= 1e-8 * measure);
        }
    }
}
