//! Frequency-localised data: bump packets on balls, slabs, cone sectors and
//! annuli, the counterexample pairs, their translation lattices and the
//! square functions of translated families.

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ranges::angle;
use crate::spectral::{
    bump_profile, dot, norm3, Evolution, FrequencyField, GridPropagator, GridSpec, Lattice, LatticeEvaluator, Mode,
    SpatialField, Vec3,
};

/// All "much smaller than one" constants.
pub const SMALL: f64 = 1.0 / 8.0;

/// Spatial half-width (in units of the inverse frequency radius) beyond which
/// a bump packet's envelope is below about `1e-3` of its peak.
pub const ENVELOPE_GUARD: f64 = 30.0;

/// Grid spacing used for counterexample grids at `grid_scale = 1`.
pub const BASE_SPACING: f64 = 0.25;

/// Frequency region carrying a bump profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FrequencySupport {
    Ball { center: Vec3, radius: f64 },
    Slab { center: Vec3, half_widths: Vec3 },
    /// `{ band.0 < |xi| < band.1, angle(xi, direction) < angular_radius }`.
    ConeSector { direction: Vec3, band: (f64, f64), angular_radius: f64 },
    Annulus { band: (f64, f64) },
}

impl FrequencySupport {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let band_ok = |band: (f64, f64)| {
            positive("inner band radius", band.0)?;
            if band.1 > band.0 && band.1.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("band {band:?} must satisfy 0 < inner < outer")))
            }
        };
        match self {
            FrequencySupport::Ball { radius, .. } => positive("ball radius", *radius),
            FrequencySupport::Slab { half_widths, .. } => {
                for (i, &h) in half_widths.iter().enumerate().take(dim) {
                    positive(&format!("slab half width {i}"), h)?;
                }
                Ok(())
            }
            FrequencySupport::ConeSector {
                direction,
                band,
                angular_radius,
            } => {
                if norm3(direction) == 0.0 {
                    return Err(Error::Config("cone sector direction is zero".into()));
                }
                band_ok(*band)?;
                positive("angular radius", *angular_radius)
            }
            FrequencySupport::Annulus { band } => band_ok(*band),
        }
    }

    /// Bump weight at `xi`; strictly positive exactly on the open support.
    pub fn weight(&self, xi: &Vec3) -> f64 {
        match self {
            FrequencySupport::Ball { center, radius } => {
                let r = norm3(&sub(xi, center));
                bump_profile(r / radius)
            }
            FrequencySupport::Slab { center, half_widths } => (0..3)
                .filter(|&i| half_widths[i] > 0.0)
                .map(|i| bump_profile((xi[i] - center[i]) / half_widths[i]))
                .product(),
            FrequencySupport::ConeSector {
                direction,
                band,
                angular_radius,
            } => {
                let radial = band_weight(norm3(xi), *band);
                if radial == 0.0 {
                    return 0.0;
                }
                match angle(xi, direction) {
                    Ok(a) => radial * bump_profile(a / angular_radius),
                    Err(_) => 0.0,
                }
            }
            FrequencySupport::Annulus { band } => band_weight(norm3(xi), *band),
        }
    }

    pub fn contains(&self, xi: &Vec3) -> bool {
        self.weight(xi) > 0.0
    }

    /// Axis-aligned box `[lo, hi]` enclosing the support.
    pub fn bounding_box(&self, dim: usize) -> (Vec3, Vec3) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..dim {
            let (a, b) = match self {
                FrequencySupport::Ball { center, radius } => (center[i] - radius, center[i] + radius),
                FrequencySupport::Slab { center, half_widths } => {
                    (center[i] - half_widths[i], center[i] + half_widths[i])
                }
                FrequencySupport::ConeSector { band, .. } | FrequencySupport::Annulus { band } => (-band.1, band.1),
            };
            lo[i] = a;
            hi[i] = b;
        }
        (lo, hi)
    }

    /// Thinnest dimension of the support; the frequency lattice must be
    /// several times finer than this to sample the bump.
    pub fn min_feature(&self, dim: usize) -> f64 {
        match self {
            FrequencySupport::Ball { radius, .. } => 2.0 * radius,
            FrequencySupport::Slab { half_widths, .. } => {
                2.0 * half_widths.iter().take(dim).copied().fold(f64::INFINITY, f64::min)
            }
            FrequencySupport::ConeSector { band, angular_radius, .. } => {
                let cos = (1.0 - angular_radius * angular_radius).max(-1.0);
                let across = 2.0 * band.0 * (1.0 - cos * cos).sqrt();
                (band.1 - band.0).min(across)
            }
            FrequencySupport::Annulus { band } => band.1 - band.0,
        }
    }

    /// Largest `|xi_i|` over the support, per axis.
    pub fn max_abs(&self, dim: usize) -> Vec<f64> {
        let (lo, hi) = self.bounding_box(dim);
        (0..dim).map(|i| lo[i].abs().max(hi[i].abs())).collect()
    }
}

fn band_weight(r: f64, band: (f64, f64)) -> f64 {
    let mid = 0.5 * (band.0 + band.1);
    let half = 0.5 * (band.1 - band.0);
    bump_profile((r - mid) / half)
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Support plus the `L^2` norm the datum should have.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PacketSpec {
    pub support: FrequencySupport,
    pub target_norm: f64,
}

impl PacketSpec {
    pub fn new(support: FrequencySupport, target_norm: f64) -> Result<Self> {
        if !(target_norm.is_finite() && target_norm > 0.0) {
            return Err(Error::Config(format!("target norm must be positive, got {target_norm}")));
        }
        Ok(Self { support, target_norm })
    }
}

/// Samples the support's bump on the grid's wavenumbers and rescales it to
/// the target norm. Coefficients outside the support are exactly zero.
pub fn make_datum(spec: &PacketSpec, grid: &Arc<GridSpec>) -> Result<FrequencyField> {
    let dim = grid.dim();
    spec.support.validate(dim)?;
    grid.check_margin(&spec.support.max_abs(dim))?;
    let (lo, hi) = spec.support.bounding_box(dim);
    let mut ranges = [(0i64, 0i64); 3];
    for i in 0..dim {
        let half = (grid.points()[i] / 2) as i64;
        let a = (grid.nearest_wavenumber(i, lo[i]) - 1).max(-half);
        let b = (grid.nearest_wavenumber(i, hi[i]) + 1).min(half - 1);
        ranges[i] = (a, b);
    }
    let mut modes = Vec::new();
    for k0 in ranges[0].0..=ranges[0].1 {
        for k1 in ranges[1].0..=ranges[1].1 {
            for k2 in ranges[2].0..=ranges[2].1 {
                let k = [k0, k1, k2];
                let w = spec.support.weight(&grid.frequency(&k));
                if w > 0.0 {
                    modes.push(Mode {
                        k,
                        coeff: Complex64::new(w, 0.0),
                    });
                }
            }
        }
    }
    let norm: f64 = modes.iter().map(|m| m.coeff.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Config(
            "support contains no grid frequencies; enlarge the box".into(),
        ));
    }
    let scale = spec.target_norm / norm;
    for m in &mut modes {
        m.coeff *= scale;
    }
    FrequencyField::new(grid.clone(), modes)
}

/// A space-time translation: the translate of a solution `u` is
/// `(t, x) -> u(t + dt, x + dx)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shift {
    pub dt: f64,
    pub dx: Vec3,
}

impl Shift {
    pub const ZERO: Shift = Shift { dt: 0.0, dx: [0.0; 3] };

    fn key(&self) -> [u64; 4] {
        [self.dt.to_bits(), self.dx[0].to_bits(), self.dx[1].to_bits(), self.dx[2].to_bits()]
    }
}

/// `{ j e_1 : |j| <= sqrt(n) }`.
pub fn lattice_u(n: u32) -> Vec<Shift> {
    let jmax = (n as f64).sqrt().floor().max(1.0) as i64;
    (-jmax..=jmax)
        .map(|j| Shift {
            dt: 0.0,
            dx: [j as f64, 0.0, 0.0],
        })
        .collect()
}

/// Largest transverse index used by [`lattice_v`].
pub fn lattice_v_transverse_index(n: u32) -> i64 {
    (1.5 * (n as f64).sqrt()).ceil() as i64
}

/// Space-time translates of the transverse tube covering the region
/// `{|t| <= n^2, |x_1 + t| <= sqrt(n), |x'| <= n}`.
///
/// The time shift `n k` is paired with the spatial shift `-n k e_1`, which
/// keeps each translated tube on the line `x_1 = -t`; transverse offsets
/// `sqrt(n) j_i e_i` tile `|x'| <= n`.
pub fn lattice_v(n: u32, dim: usize) -> Vec<Shift> {
    let nf = n as f64;
    let step = nf.sqrt();
    let jmax = lattice_v_transverse_index(n);
    let n_i = n as i64;
    let mut out = Vec::new();
    for k in -n_i..=n_i {
        for j2 in -jmax..=jmax {
            let j3_range = if dim == 3 { -jmax..=jmax } else { 0..=0 };
            for j3 in j3_range {
                out.push(Shift {
                    dt: nf * k as f64,
                    dx: [-nf * k as f64, step * j2 as f64, step * j3 as f64],
                });
            }
        }
    }
    out
}

/// Translates `(j m^2, -j m^2 e_1)` with `|j| <= n^2 / m^2`.
pub fn lattice_v_nontransverse(n: u32, m: u32) -> Vec<Shift> {
    let m2 = (m as f64).powi(2);
    let jmax = ((n as i64).pow(2) / (m as i64).pow(2)).max(0);
    (-jmax..=jmax)
        .map(|j| Shift {
            dt: j as f64 * m2,
            dx: [-(j as f64) * m2, 0.0, 0.0],
        })
        .collect()
}

/// A datum together with a finite set of distinct translations.
#[derive(Debug, Clone)]
pub struct PacketFamily {
    base: FrequencyField,
    shifts: Vec<Shift>,
}

impl PacketFamily {
    pub fn new(base: FrequencyField, shifts: Vec<Shift>) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::Structural("a packet family needs at least one shift".into()));
        }
        let mut seen = HashSet::new();
        for s in &shifts {
            if !seen.insert(s.key()) {
                return Err(Error::Structural(format!("duplicate shift {s:?}")));
            }
        }
        Ok(Self { base, shifts })
    }

    pub fn base(&self) -> &FrequencyField {
        &self.base
    }

    pub fn shifts(&self) -> &[Shift] {
        &self.shifts
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// `(sum over shifts of ||translate||^2)^{1/2}`; translations are unitary.
    pub fn aggregate_norm(&self) -> f64 {
        (self.shifts.len() as f64).sqrt() * self.base.norm()
    }

    pub fn lattice_evaluator(&self, ev: Evolution) -> FamilyLatticeEvaluator {
        FamilyLatticeEvaluator::new(&self.base, ev, &self.shifts)
    }

    pub fn evaluator(&self, ev: Evolution) -> FamilyEvaluator {
        FamilyEvaluator::new(&self.base, ev, &self.shifts)
    }
}

/// Pointwise square function of a translated family, sharing the per-point
/// phases of the base datum across all translates.
#[derive(Debug, Clone)]
pub struct FamilyEvaluator {
    xi: Vec<Vec3>,
    omega: Vec<f64>,
    // Row per shift: c_k exp(i (xi_k . dx + dt omega_k)).
    shifted: Vec<Vec<Complex64>>,
    scale: f64,
}

impl FamilyEvaluator {
    pub fn new(datum: &FrequencyField, ev: Evolution, shifts: &[Shift]) -> Self {
        let grid = datum.grid();
        let live: Vec<&Mode> = datum.modes().iter().filter(|m| m.coeff.norm_sqr() > 0.0).collect();
        let xi: Vec<Vec3> = live.iter().map(|m| grid.frequency(&m.k)).collect();
        let omega: Vec<f64> = xi.iter().map(|x| ev.symbol(x)).collect();
        let shifted = shifts
            .iter()
            .map(|s| {
                live.iter()
                    .zip(xi.iter().zip(&omega))
                    .map(|(m, (x, &w))| m.coeff * Complex64::from_polar(1.0, dot(x, &s.dx) + s.dt * w))
                    .collect()
            })
            .collect();
        Self {
            xi,
            omega,
            shifted,
            scale: grid.volume().powf(-0.5),
        }
    }

    fn base_phases(&self, t: f64, x: &Vec3, buf: &mut Vec<Complex64>) {
        buf.clear();
        buf.extend(self.xi.iter().zip(&self.omega).map(|(xi, &w)| {
            let (s, c) = (dot(xi, x) + t * w).sin_cos();
            Complex64::new(c, s)
        }));
    }

    /// Values of every translate at `(t, x)`.
    pub fn translates(&self, t: f64, x: &Vec3) -> Vec<Complex64> {
        let mut buf = Vec::with_capacity(self.xi.len());
        self.base_phases(t, x, &mut buf);
        self.shifted
            .iter()
            .map(|row| row.iter().zip(&buf).map(|(a, b)| a * b).sum::<Complex64>() * self.scale)
            .collect()
    }

    /// `(sum_shifts |u(t + dt, x + dx)|^2)^{1/2}`.
    pub fn square_function(&self, t: f64, x: &Vec3) -> f64 {
        let mut buf = Vec::with_capacity(self.xi.len());
        self.base_phases(t, x, &mut buf);
        let mut total = 0.0;
        for row in &self.shifted {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(&buf) {
                acc += a * b;
            }
            total += acc.norm_sqr();
        }
        total.sqrt() * self.scale
    }

    pub fn len(&self) -> usize {
        self.shifted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifted.is_empty()
    }
}

/// Square function of a translated family on product lattices: each
/// translate is the base field at time `t + dt` on the lattice moved by `dx`.
pub struct FamilyLatticeEvaluator {
    base: LatticeEvaluator,
    shifts: Vec<Shift>,
}

impl FamilyLatticeEvaluator {
    pub fn new(datum: &FrequencyField, ev: Evolution, shifts: &[Shift]) -> Self {
        Self {
            base: LatticeEvaluator::new(datum, ev),
            shifts: shifts.to_vec(),
        }
    }

    pub fn square_slice(&self, t: f64, lattice: &Lattice) -> Vec<f64> {
        let mut acc = vec![0.0f64; lattice.len()];
        for s in &self.shifts {
            let moved = lattice.translated(&s.dx);
            for (a, v) in acc.iter_mut().zip(self.base.slice(t + s.dt, &moved)) {
                *a += v.norm_sqr();
            }
        }
        acc.into_iter().map(f64::sqrt).collect()
    }
}

/// Square function of a family sampled on the whole grid at time `t`.
pub fn square_function(family: &PacketFamily, ev: Evolution, t: f64) -> Result<SpatialField> {
    let grid = family.base.grid().clone();
    let mut acc = vec![0.0f64; grid.len()];
    for s in &family.shifts {
        let shifted = family.base.space_time_shifted(ev, s.dt, &s.dx);
        let values = GridPropagator::new(&shifted, ev)?.slice_values(t);
        for (a, v) in acc.iter_mut().zip(values) {
            *a += v.norm_sqr();
        }
    }
    SpatialField::new(grid, acc.into_iter().map(|a| Complex64::new(a.sqrt(), 0.0)).collect())
}

/// Which counterexample geometry is being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Construction {
    Transverse,
    NonTransverse { m: u32 },
}

/// Wave and Schrodinger data of one counterexample, with the scale used.
#[derive(Debug, Clone)]
pub struct CounterexamplePair {
    pub construction: Construction,
    pub n: u32,
    pub wave: FrequencyField,
    pub schrodinger: FrequencyField,
}

/// Frequency centre of the Schrodinger ball.
pub fn schrodinger_center(construction: Construction) -> Vec3 {
    match construction {
        Construction::Transverse => [-0.5, -0.5, 0.0],
        Construction::NonTransverse { .. } => [-0.5, 0.0, 0.0],
    }
}

pub fn schrodinger_radius(construction: Construction, n: u32) -> f64 {
    match construction {
        Construction::Transverse => SMALL / (n as f64).sqrt(),
        Construction::NonTransverse { m } => SMALL / m as f64,
    }
}

fn validate_scales(construction: Construction, n: u32) -> Result<()> {
    if n < 4 {
        return Err(Error::Config(format!("scale N = {n} must be at least 4")));
    }
    if let Construction::NonTransverse { m } = construction {
        if m < 1 || m > n {
            return Err(Error::Config(format!("scale M = {m} must satisfy 1 <= M <= N = {n}")));
        }
    }
    Ok(())
}

/// Smallest box extents on which the construction's translated families do
/// not meet their own periodic images over `|t| <= n^2`.
pub fn required_extents(dim: usize, construction: Construction, n: u32) -> Result<Vec<f64>> {
    validate_scales(construction, n)?;
    let nf = n as f64;
    let rho = schrodinger_radius(construction, n);
    // Envelope of the ball packet plus its dispersive spread over |tau| <= 2 n^2.
    let tube_guard = ENVELOPE_GUARD / rho + 4.0 * rho * nf * nf;
    let slab_guard = ENVELOPE_GUARD / SMALL;
    let long = (4.0 * (nf * nf + nf.sqrt())).max(tube_guard).max(slab_guard);
    let transverse_reach = match construction {
        Construction::Transverse => {
            let offset = lattice_v_transverse_index(n) as f64 * nf.sqrt();
            2.0 * nf * nf + offset + nf + tube_guard
        }
        Construction::NonTransverse { m } => 2.0 * m as f64 + tube_guard,
    };
    let short = (8.0 * nf).max(transverse_reach);
    let mut out = vec![long];
    out.extend(std::iter::repeat_n(short, dim - 1));
    Ok(out)
}

/// Grid for a counterexample at scale `n`; `grid_scale` refines the spacing.
pub fn counterexample_grid(dim: usize, construction: Construction, n: u32, grid_scale: f64) -> Result<GridSpec> {
    if !(grid_scale.is_finite() && grid_scale > 0.0) {
        return Err(Error::Config(format!("grid scale must be positive, got {grid_scale}")));
    }
    let extents = required_extents(dim, construction, n)?;
    let t = (n as f64).powi(2);
    GridSpec::with_spacing(&extents, BASE_SPACING / grid_scale, (-t, t), 2 * (n as usize).pow(2))
}

fn check_extents(grid: &GridSpec, construction: Construction, n: u32) -> Result<()> {
    let need = required_extents(grid.dim(), construction, n)?;
    for (axis, (&have, &want)) in grid.extents().iter().zip(&need).enumerate() {
        if have < want * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "axis {axis}: box length {have:.1} is below the required {want:.1} for N = {n}"
            )));
        }
    }
    for axis in 0..grid.dim() {
        if grid.spacing(axis) > BASE_SPACING * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "axis {axis}: spacing {:.4} exceeds {BASE_SPACING}",
                grid.spacing(axis)
            )));
        }
    }
    Ok(())
}

fn wave_slab(dim: usize, n: u32) -> Result<PacketSpec> {
    let nf = n as f64;
    let mut half_widths = [0.0; 3];
    half_widths[0] = SMALL;
    for h in half_widths.iter_mut().take(dim).skip(1) {
        *h = SMALL / nf;
    }
    PacketSpec::new(
        FrequencySupport::Slab {
            center: [1.0, 0.0, 0.0],
            half_widths,
        },
        nf.powf((dim as f64 - 1.0) / 2.0),
    )
}

/// Transverse pair: slab wave datum with `||f|| = n^{(d-1)/2}` and a
/// Schrodinger ball of radius `n^{-1/2}/8` with `||g|| = n^{d/4}`.
///
/// The ball sits at `-(e_1 + e_2)/2` so that its packet moves with velocity
/// `-(e_1 + e_2)`, along the tube `|x_1 + t|, |x_2 + t|` small.
pub fn transverse_pair(n: u32, grid: &Arc<GridSpec>) -> Result<CounterexamplePair> {
    let construction = Construction::Transverse;
    check_extents(grid, construction, n)?;
    let dim = grid.dim();
    let wave = make_datum(&wave_slab(dim, n)?, grid)?;
    let ball = PacketSpec::new(
        FrequencySupport::Ball {
            center: schrodinger_center(construction),
            radius: schrodinger_radius(construction, n),
        },
        (n as f64).powf(dim as f64 / 4.0),
    )?;
    let schrodinger = make_datum(&ball, grid)?;
    Ok(CounterexamplePair {
        construction,
        n,
        wave,
        schrodinger,
    })
}

/// Non-transverse pair: the same slab and a ball of radius `1/(8m)` around
/// `-e_1/2` with `||g|| = m^{d/2}`; the tube moves with velocity `-e_1`.
pub fn nontransverse_pair(n: u32, m: u32, grid: &Arc<GridSpec>) -> Result<CounterexamplePair> {
    let construction = Construction::NonTransverse { m };
    check_extents(grid, construction, n)?;
    let dim = grid.dim();
    let wave = make_datum(&wave_slab(dim, n)?, grid)?;
    let ball = PacketSpec::new(
        FrequencySupport::Ball {
            center: schrodinger_center(construction),
            radius: schrodinger_radius(construction, n),
        },
        (m as f64).powf(dim as f64 / 2.0),
    )?;
    let schrodinger = make_datum(&ball, grid)?;
    Ok(CounterexamplePair {
        construction,
        n,
        wave,
        schrodinger,
    })
}

impl CounterexamplePair {
    pub fn wave_family(&self) -> Result<PacketFamily> {
        let shifts = match self.construction {
            Construction::Transverse => lattice_u(self.n),
            Construction::NonTransverse { .. } => vec![Shift::ZERO],
        };
        PacketFamily::new(self.wave.clone(), shifts)
    }

    pub fn schrodinger_family(&self) -> Result<PacketFamily> {
        let shifts = match self.construction {
            Construction::Transverse => lattice_v(self.n, self.wave.grid().dim()),
            Construction::NonTransverse { m } => lattice_v_nontransverse(self.n, m),
        };
        PacketFamily::new(self.schrodinger.clone(), shifts)
    }
}
