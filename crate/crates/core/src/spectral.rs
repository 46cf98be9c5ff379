//! Periodic space-time grids, unitary transforms and exact spectral
//! propagators for the half-wave and Schrodinger flows.
//!
//! Conventions used throughout the crate:
//!
//! * The spatial box is `[-L_i/2, L_i/2)` on every axis and periodic.
//! * A field is expanded as `f(x) = V^{-1/2} sum_k c_k exp(i xi_k . x)` with
//!   `xi_k = 2 pi k / L` and `V` the box volume, so that `||f||_2 = ||c||_2`
//!   (Plancherel with unit constant).
//! * With this expansion `e^{it|grad|}` multiplies `c_k` by `exp(i t |xi|)` and
//!   `e^{it Laplacian}` multiplies it by `exp(-i t |xi|^2)`. Consequently a
//!   half-wave packet at frequency `xi` travels with velocity `-xi/|xi|` and a
//!   Schrodinger packet at frequency `eta` travels with velocity `+2 eta`.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};

/// Spatial vectors are padded to three components; unused axes stay zero.
pub type Vec3 = [f64; 3];

/// Largest grid (total points) that the dense transforms will allocate.
pub const DENSE_POINT_LIMIT: usize = 1 << 24;

/// Required ratio between the grid's Nyquist wavenumber and the largest
/// frequency of any packet support placed on it.
pub const NYQUIST_MARGIN: f64 = 4.0;

pub(crate) fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm3(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn pad(v: &[f64]) -> Vec3 {
    let mut out = [0.0; 3];
    out[..v.len()].copy_from_slice(v);
    out
}

/// Discretised periodic space-time arena.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    dim: usize,
    extents: Vec<f64>,
    points: Vec<usize>,
    t_window: (f64, f64),
    n_t: usize,
}

impl GridSpec {
    pub fn new(extents: &[f64], points: &[usize], t_window: (f64, f64), n_t: usize) -> Result<Self> {
        let dim = extents.len();
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if points.len() != dim {
            return Err(Error::Structural(format!(
                "{} extents but {} point counts",
                dim,
                points.len()
            )));
        }
        for (axis, (&l, &n)) in extents.iter().zip(points).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!("axis {axis}: box length {l} must be positive")));
            }
            if n < 4 || n % 2 != 0 {
                return Err(Error::Config(format!(
                    "axis {axis}: sample count {n} must be even and at least 4"
                )));
            }
        }
        if !(t_window.0.is_finite() && t_window.1.is_finite() && t_window.1 > t_window.0) {
            return Err(Error::Config(format!("time window {t_window:?} is empty")));
        }
        if n_t < 2 {
            return Err(Error::Config(format!("need at least 2 time samples, got {n_t}")));
        }
        Ok(Self {
            dim,
            extents: extents.to_vec(),
            points: points.to_vec(),
            t_window,
            n_t,
        })
    }

    /// Same box length and sample count on every axis.
    pub fn cubic(dim: usize, extent: f64, points: usize, t_window: (f64, f64), n_t: usize) -> Result<Self> {
        Self::new(&vec![extent; dim], &vec![points; dim], t_window, n_t)
    }

    /// Smallest even sample counts giving spacing at most `max_spacing`.
    pub fn with_spacing(extents: &[f64], max_spacing: f64, t_window: (f64, f64), n_t: usize) -> Result<Self> {
        let points: Vec<usize> = extents
            .iter()
            .map(|&l| {
                let n = (l / max_spacing).ceil() as usize;
                (n + n % 2).max(4)
            })
            .collect();
        Self::new(extents, &points, t_window, n_t)
    }

    pub fn with_time(&self, t_window: (f64, f64), n_t: usize) -> Result<Self> {
        Self::new(&self.extents, &self.points, t_window, n_t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn t_window(&self) -> (f64, f64) {
        self.t_window
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extents[axis] / self.points[axis] as f64
    }

    pub fn cell_measure(&self) -> f64 {
        (0..self.dim).map(|i| self.spacing(i)).product()
    }

    pub fn volume(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Total number of spatial samples.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest representable wavenumber on an axis, `pi n / L`.
    pub fn nyquist(&self, axis: usize) -> f64 {
        PI * self.points[axis] as f64 / self.extents[axis]
    }

    /// Time step of the midpoint sampling of the window.
    pub fn dt(&self) -> f64 {
        (self.t_window.1 - self.t_window.0) / self.n_t as f64
    }

    /// Midpoints of `n_t` equal cells covering the time window.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_t).map(|i| self.t_window.0 + (i as f64 + 0.5) * dt).collect()
    }

    /// Physical frequency `2 pi k / L` of an integer wavenumber.
    pub fn frequency(&self, k: &[i64; 3]) -> Vec3 {
        let mut xi = [0.0; 3];
        for i in 0..self.dim {
            xi[i] = 2.0 * PI * k[i] as f64 / self.extents[i];
        }
        xi
    }

    /// Integer wavenumber nearest to a physical frequency component.
    pub fn nearest_wavenumber(&self, axis: usize, xi: f64) -> i64 {
        (xi * self.extents[axis] / (2.0 * PI)).round() as i64
    }

    pub fn wavenumber_in_range(&self, k: &[i64; 3]) -> bool {
        (0..self.dim).all(|i| {
            let half = (self.points[i] / 2) as i64;
            k[i] >= -half && k[i] < half
        }) && (self.dim..3).all(|i| k[i] == 0)
    }

    /// Position of a flat sample index (last axis fastest).
    pub fn position(&self, index: usize) -> Vec3 {
        let mut x = [0.0; 3];
        let mut rest = index;
        for axis in (0..self.dim).rev() {
            let n = self.points[axis];
            let j = rest % n;
            rest /= n;
            x[axis] = -0.5 * self.extents[axis] + j as f64 * self.spacing(axis);
        }
        x
    }

    fn bin_of(&self, k: &[i64; 3]) -> usize {
        let mut index = 0usize;
        for axis in 0..self.dim {
            let n = self.points[axis] as i64;
            index = index * n as usize + k[axis].rem_euclid(n) as usize;
        }
        index
    }

    fn wavenumber_of_bin(&self, bin: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut rest = bin;
        for axis in (0..self.dim).rev() {
            let n = self.points[axis];
            let b = rest % n;
            rest /= n;
            k[axis] = if b < n / 2 { b as i64 } else { b as i64 - n as i64 };
        }
        k
    }

    /// Fails with a configuration error naming the first axis on which a
    /// frequency magnitude `max_abs[axis]` violates the Nyquist margin.
    pub fn check_margin(&self, max_abs: &[f64]) -> Result<()> {
        for (axis, &m) in max_abs.iter().enumerate().take(self.dim) {
            let nyq = self.nyquist(axis);
            if nyq <= NYQUIST_MARGIN * m {
                return Err(Error::Config(format!(
                    "axis {axis}: support reaches |xi_{axis}| = {m:.4}, but the grid resolves only {nyq:.4} \
                     (needs more than {NYQUIST_MARGIN}x margin)"
                )));
            }
        }
        Ok(())
    }

    fn require_dense(&self) -> Result<()> {
        if self.len() > DENSE_POINT_LIMIT {
            return Err(Error::Config(format!(
                "grid with {} points exceeds the dense transform limit {}",
                self.len(),
                DENSE_POINT_LIMIT
            )));
        }
        Ok(())
    }
}

/// The two free flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Evolution {
    /// `e^{it|grad|}`, multiplier `exp(i t |xi|)`.
    HalfWave,
    /// `e^{it Laplacian}`, multiplier `exp(-i t |xi|^2)`.
    Schrodinger,
}

impl Evolution {
    /// Dispersion relation: the multiplier is `exp(i t symbol(xi))`.
    pub fn symbol(self, xi: &Vec3) -> f64 {
        match self {
            Evolution::HalfWave => norm3(xi),
            Evolution::Schrodinger => -dot(xi, xi),
        }
    }

    pub fn multiplier(self, xi: &Vec3, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, t * self.symbol(xi))
    }

    /// Group velocity `grad symbol`; undefined (zero) at the origin for the
    /// half-wave flow.
    pub fn group_velocity(self, xi: &Vec3) -> Vec3 {
        match self {
            Evolution::HalfWave => {
                let n = norm3(xi);
                if n == 0.0 {
                    [0.0; 3]
                } else {
                    [-xi[0] / n, -xi[1] / n, -xi[2] / n]
                }
            }
            Evolution::Schrodinger => [2.0 * xi[0], 2.0 * xi[1], 2.0 * xi[2]],
        }
    }
}

/// Complex samples on every point of a grid.
#[derive(Debug, Clone)]
pub struct SpatialField {
    grid: Arc<GridSpec>,
    values: Vec<Complex64>,
}

impl SpatialField {
    pub fn new(grid: Arc<GridSpec>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Structural(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<GridSpec>, f: impl Fn(&Vec3) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(self)
    }
}

/// One nonzero Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: [i64; 3],
    pub coeff: Complex64,
}

/// Fourier coefficients of a field on a grid. Only nonzero modes are stored;
/// every other wavenumber in `[-n/2, n/2)` carries an implicit zero.
#[derive(Debug, Clone)]
pub struct FrequencyField {
    grid: Arc<GridSpec>,
    modes: Vec<Mode>,
}

impl FrequencyField {
    pub fn new(grid: Arc<GridSpec>, modes: Vec<Mode>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(modes.len());
        for m in &modes {
            if !grid.wavenumber_in_range(&m.k) {
                return Err(Error::Structural(format!("wavenumber {:?} outside the grid", m.k)));
            }
            if !seen.insert(m.k) {
                return Err(Error::Structural(format!("wavenumber {:?} listed twice", m.k)));
            }
        }
        Ok(Self { grid, modes })
    }

    pub fn zero(grid: Arc<GridSpec>) -> Self {
        Self { grid, modes: Vec::new() }
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Coefficient at `k` (zero when not stored).
    pub fn coeff(&self, k: &[i64; 3]) -> Complex64 {
        self.modes
            .iter()
            .find(|m| &m.k == k)
            .map(|m| m.coeff)
            .unwrap_or_default()
    }

    /// `l^2` norm of the coefficients, equal to the `L^2` norm of the field.
    pub fn norm(&self) -> f64 {
        self.modes.iter().map(|m| m.coeff.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.coeff == Complex64::new(0.0, 0.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_coeffs(|_, c| c * s)
    }

    /// Field translated by `x0`: coefficients times `exp(-i xi . x0)`.
    pub fn translated(&self, x0: &Vec3) -> Self {
        self.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, -dot(xi, x0)))
    }

    /// The datum of the solution shifted in time, `e^{i tau H} f`.
    pub fn evolved(&self, ev: Evolution, tau: f64) -> Self {
        self.map_coeffs(|xi, c| c * ev.multiplier(xi, tau))
    }

    /// Datum whose solution is `w(t, x) = u(t + dt, x + dx)`, where `u` is the
    /// solution of `self`.
    pub fn space_time_shifted(&self, ev: Evolution, dt: f64, dx: &Vec3) -> Self {
        self.map_coeffs(|xi, c| c * Complex64::from_polar(1.0, dot(xi, dx) + dt * ev.symbol(xi)))
    }

    fn map_coeffs(&self, f: impl Fn(&Vec3, Complex64) -> Complex64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| Mode {
                k: m.k,
                coeff: f(&self.grid.frequency(&m.k), m.coeff),
            })
            .collect();
        Self {
            grid: self.grid.clone(),
            modes,
        }
    }

    /// Linear combination `sum a_j f_j` of fields on the same grid.
    pub fn combine(grid: Arc<GridSpec>, terms: &[(Complex64, &FrequencyField)]) -> Result<Self> {
        let mut acc: std::collections::BTreeMap<[i64; 3], Complex64> = Default::default();
        for (a, f) in terms {
            if f.grid != grid && *f.grid != *grid {
                return Err(Error::Structural("fields live on different grids".into()));
            }
            for m in &f.modes {
                *acc.entry(m.k).or_default() += *a * m.coeff;
            }
        }
        let modes = acc
            .into_iter()
            .filter(|(_, c)| c.norm_sqr() > 0.0)
            .map(|(k, coeff)| Mode { k, coeff })
            .collect();
        Ok(Self { grid, modes })
    }

    /// Per-axis maximum of `|xi_i|` over stored nonzero modes.
    pub fn max_abs_frequency(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.grid.dim()];
        for m in self.modes.iter().filter(|m| m.coeff.norm_sqr() > 0.0) {
            let xi = self.grid.frequency(&m.k);
            for (o, x) in out.iter_mut().zip(xi) {
                *o = o.max(x.abs());
            }
        }
        out
    }

    /// Pointwise evaluator of the propagated field.
    pub fn evaluator(&self, ev: Evolution) -> PointEvaluator {
        let mut xi = Vec::with_capacity(self.modes.len());
        let mut omega = Vec::with_capacity(self.modes.len());
        let mut coeff = Vec::with_capacity(self.modes.len());
        for m in self.modes.iter().filter(|m| m.coeff.norm_sqr() > 0.0) {
            let f = self.grid.frequency(&m.k);
            omega.push(ev.symbol(&f));
            xi.push(f);
            coeff.push(m.coeff);
        }
        PointEvaluator {
            xi,
            omega,
            coeff,
            scale: self.grid.volume().powf(-0.5),
        }
    }

    /// Energy-weighted mean and per-axis standard deviation of the frequencies.
    pub fn spread(&self) -> Result<(Vec3, Vec3)> {
        let total: f64 = self.modes.iter().map(|m| m.coeff.norm_sqr()).sum();
        if total == 0.0 {
            return Err(Error::Domain("the zero field has no frequency spread".into()));
        }
        let mut mean = [0.0; 3];
        let mut second = [0.0; 3];
        for m in &self.modes {
            let w = m.coeff.norm_sqr() / total;
            let xi = self.grid.frequency(&m.k);
            for a in 0..3 {
                mean[a] += w * xi[a];
                second[a] += w * xi[a] * xi[a];
            }
        }
        let std = [0, 1, 2].map(|a| (second[a] - mean[a] * mean[a]).max(0.0).sqrt());
        Ok((mean, std))
    }

    /// Largest modulus the solution can ever reach, `V^{-1/2} sum |c_k|`.
    /// Attained at `(0, 0)` by data with nonnegative real coefficients.
    pub fn peak_bound(&self) -> f64 {
        self.grid.volume().powf(-0.5) * self.modes.iter().map(|m| m.coeff.norm()).sum::<f64>()
    }
}

/// Evaluates `V^{-1/2} sum_k c_k exp(i (xi_k . x + t omega(xi_k)))` at
/// arbitrary points; exact on the periodic box.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    xi: Vec<Vec3>,
    omega: Vec<f64>,
    coeff: Vec<Complex64>,
    scale: f64,
}

impl PointEvaluator {
    pub fn eval(&self, t: f64, x: &Vec3) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((xi, &w), &c) in self.xi.iter().zip(&self.omega).zip(&self.coeff) {
            let phase = xi[0] * x[0] + xi[1] * x[1] + xi[2] * x[2] + t * w;
            let (s, co) = phase.sin_cos();
            acc += c * Complex64::new(co, s);
        }
        acc * self.scale
    }

    pub fn mode_count(&self) -> usize {
        self.coeff.len()
    }
}

/// Cached multi-dimensional FFT plans for one grid shape.
pub(crate) struct DenseFft {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl DenseFft {
    pub(crate) fn new(grid: &GridSpec) -> Result<Self> {
        grid.require_dense()?;
        let mut planner = FftPlanner::new();
        let shape = grid.points().to_vec();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Ok(Self { shape, forward, inverse })
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let total = data.len();
        let mut stride = 1usize;
        let mut line = Vec::new();
        for axis in (0..self.shape.len()).rev() {
            let n = self.shape[axis];
            let plan = if inverse { &self.inverse[axis] } else { &self.forward[axis] };
            if stride == 1 {
                plan.process(data);
            } else {
                line.resize(n * stride, Complex64::default());
                let block = n * stride;
                for start in (0..total).step_by(block) {
                    // Transpose the block so each line along `axis` is contiguous.
                    for j in 0..n {
                        for inner in 0..stride {
                            line[inner * n + j] = data[start + j * stride + inner];
                        }
                    }
                    plan.process(&mut line);
                    for j in 0..n {
                        for inner in 0..stride {
                            data[start + j * stride + inner] = line[inner * n + j];
                        }
                    }
                }
            }
            stride *= n;
        }
    }
}

/// `(-1)^{sum k}`, the phase `exp(i xi_k . x_min)` for the centred box.
fn corner_phase(k: &[i64; 3]) -> f64 {
    if (k[0] + k[1] + k[2]).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Unitary forward transform of a sampled field.
pub fn forward_transform(field: &SpatialField) -> Result<FrequencyField> {
    let grid = field.grid.clone();
    let fft = DenseFft::new(&grid)?;
    let mut data = field.values.clone();
    fft.run(&mut data, false);
    let scale = grid.volume().sqrt() / grid.len() as f64;
    let modes = data
        .into_iter()
        .enumerate()
        .map(|(bin, c)| {
            let k = grid.wavenumber_of_bin(bin);
            Mode {
                k,
                coeff: c * (scale * corner_phase(&k)),
            }
        })
        .collect();
    Ok(FrequencyField { grid, modes })
}

/// Inverse of [`forward_transform`].
pub fn inverse_transform(datum: &FrequencyField) -> Result<SpatialField> {
    GridPropagator::new(datum, Evolution::HalfWave)?.slice(0.0)
}

/// Exact solution sample `e^{itH} datum` on the whole grid.
pub fn propagate(datum: &FrequencyField, ev: Evolution, t: f64) -> Result<SpatialField> {
    GridPropagator::new(datum, ev)?.slice(t)
}

/// Repeated dense propagation of one datum to many times.
pub struct GridPropagator {
    grid: Arc<GridSpec>,
    fft: DenseFft,
    bins: Vec<(usize, Complex64, f64)>,
}

impl GridPropagator {
    pub fn new(datum: &FrequencyField, ev: Evolution) -> Result<Self> {
        let grid = datum.grid.clone();
        let fft = DenseFft::new(&grid)?;
        let bins = datum
            .modes
            .iter()
            .map(|m| {
                let xi = grid.frequency(&m.k);
                (grid.bin_of(&m.k), m.coeff * corner_phase(&m.k), ev.symbol(&xi))
            })
            .collect();
        Ok(Self { grid, fft, bins })
    }

    pub fn grid(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    pub fn slice_values(&self, t: f64) -> Vec<Complex64> {
        let mut data = vec![Complex64::default(); self.grid.len()];
        for &(bin, c, w) in &self.bins {
            data[bin] += c * Complex64::from_polar(1.0, t * w);
        }
        self.fft.run(&mut data, true);
        let scale = self.grid.volume().powf(-0.5);
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    pub fn slice(&self, t: f64) -> Result<SpatialField> {
        SpatialField::new(self.grid.clone(), self.slice_values(t))
    }
}

/// Product lattice `{origin + sum_a i_a steps[a] e_a : 0 <= i_a < counts[a]}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    pub origin: Vec3,
    pub steps: Vec3,
    /// Unused axes carry a count of 1.
    pub counts: [usize; 3],
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point of a flat index (last axis fastest).
    pub fn point(&self, index: usize) -> Vec3 {
        let i2 = index % self.counts[2];
        let i1 = (index / self.counts[2]) % self.counts[1];
        let i0 = index / (self.counts[1] * self.counts[2]);
        [
            self.origin[0] + i0 as f64 * self.steps[0],
            self.origin[1] + i1 as f64 * self.steps[1],
            self.origin[2] + i2 as f64 * self.steps[2],
        ]
    }

    pub fn translated(&self, dx: &Vec3) -> Lattice {
        Lattice {
            origin: [self.origin[0] + dx[0], self.origin[1] + dx[1], self.origin[2] + dx[2]],
            ..self.clone()
        }
    }
}

/// Evaluates a propagated datum on product lattices by contracting the
/// coefficient tensor with one phase table per axis. The cost per slice is
/// about `(points per axis) x (modes per axis)^{d-1}` per axis instead of
/// `points x modes`.
#[derive(Debug, Clone)]
pub struct LatticeEvaluator {
    dim: usize,
    /// Per axis, the physical frequencies of the wavenumber range in use.
    axis_freqs: [Vec<f64>; 3],
    coeffs: Vec<Complex64>,
    omega: Vec<f64>,
    shape: [usize; 3],
    scale: f64,
}

impl LatticeEvaluator {
    pub fn new(datum: &FrequencyField, ev: Evolution) -> Self {
        let grid = datum.grid();
        let dim = grid.dim();
        let live: Vec<&Mode> = datum.modes().iter().filter(|m| m.coeff.norm_sqr() > 0.0).collect();
        let mut kmin = [0i64; 3];
        let mut kmax = [0i64; 3];
        if let Some(first) = live.first() {
            kmin = first.k;
            kmax = first.k;
        }
        for m in &live {
            for a in 0..3 {
                kmin[a] = kmin[a].min(m.k[a]);
                kmax[a] = kmax[a].max(m.k[a]);
            }
        }
        let mut shape = [1usize; 3];
        let mut axis_freqs: [Vec<f64>; 3] = Default::default();
        for a in 0..3 {
            shape[a] = (kmax[a] - kmin[a] + 1) as usize;
            axis_freqs[a] = (kmin[a]..=kmax[a])
                .map(|k| if a < dim { 2.0 * PI * k as f64 / grid.extents()[a] } else { 0.0 })
                .collect();
        }
        let total = shape.iter().product();
        let mut coeffs = vec![Complex64::default(); total];
        let mut omega = vec![0.0; total];
        for m in &live {
            let idx = ((m.k[0] - kmin[0]) as usize * shape[1] + (m.k[1] - kmin[1]) as usize) * shape[2]
                + (m.k[2] - kmin[2]) as usize;
            coeffs[idx] = m.coeff;
            omega[idx] = ev.symbol(&grid.frequency(&m.k));
        }
        if live.is_empty() {
            coeffs.clear();
            omega.clear();
        }
        Self {
            dim,
            axis_freqs,
            coeffs,
            omega,
            shape,
            scale: grid.volume().powf(-0.5),
        }
    }

    /// Field values at time `t` on every lattice point (last axis fastest).
    pub fn slice(&self, t: f64, lattice: &Lattice) -> Vec<Complex64> {
        if self.coeffs.is_empty() {
            return vec![Complex64::default(); lattice.len()];
        }
        let mut tensor: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(&self.omega)
            .map(|(&c, &w)| if c == Complex64::default() { c } else { c * Complex64::from_polar(self.scale, t * w) })
            .collect();
        let mut shape = self.shape;
        for axis in 0..3 {
            let n_out = lattice.counts[axis];
            let table: Vec<Complex64> = (0..n_out)
                .flat_map(|i| {
                    let x = lattice.origin[axis] + i as f64 * lattice.steps[axis];
                    self.axis_freqs[axis]
                        .iter()
                        .map(move |&xi| if axis < self.dim { Complex64::from_polar(1.0, xi * x) } else { Complex64::new(1.0, 0.0) })
                })
                .collect();
            tensor = contract(&tensor, &shape, axis, &table, n_out);
            shape[axis] = n_out;
        }
        tensor
    }
}

/// `out[pre, i, post] = sum_k table[i, k] tensor[pre, k, post]`.
fn contract(tensor: &[Complex64], shape: &[usize; 3], axis: usize, table: &[Complex64], n_out: usize) -> Vec<Complex64> {
    let pre: usize = shape[..axis].iter().product();
    let post: usize = shape[axis + 1..].iter().product();
    let k_len = shape[axis];
    let mut out = vec![Complex64::default(); pre * n_out * post];
    for p in 0..pre {
        for i in 0..n_out {
            let row = &table[i * k_len..(i + 1) * k_len];
            let dst = &mut out[(p * n_out + i) * post..(p * n_out + i + 1) * post];
            for (k, &m) in row.iter().enumerate() {
                let src = &tensor[(p * k_len + k) * post..(p * k_len + k + 1) * post];
                if post == 1 {
                    dst[0] += m * src[0];
                } else {
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += m * s;
                    }
                }
            }
        }
    }
    out
}

/// Standard compactly supported bump `exp(1/(s^2 - 1))` on `(-1, 1)`.
pub fn bump_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 / (s * s - 1.0)).exp()
    } else {
        0.0
    }
}

/// Riemann-sum `L^2` norm with the grid's cell measure.
pub fn l2_norm(field: &SpatialField) -> f64 {
    let sum: f64 = field.values.iter().map(|v| v.norm_sqr()).sum();
    (sum * field.grid.cell_measure()).sqrt()
}
