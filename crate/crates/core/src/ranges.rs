//! Exponent regions in the `(1/q, 1/r)` square, wave-Schrodinger
//! transversality geometry, the predicted bilinear constant and sampled
//! checks of the structural phase conditions (i)-(v).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::Exponent;
use crate::spectral::{dot, norm3, pad, Vec3};

/// Tolerance below which a margin counts as "on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-12;

/// `(1 - x.y / (|x||y|))^{1/2}`, a monotone proxy for the angle between
/// `x` and `y` with range `[0, sqrt 2]`.
pub fn angle(x: &[f64], y: &[f64]) -> Result<f64> {
    let (a, b) = (pad(x), pad(y));
    let (na, nb) = (norm3(&a), norm3(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("angle with the zero vector".into()));
    }
    let c = (dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0);
    Ok((1.0 - c).max(0.0).sqrt())
}

/// Reciprocal exponents `(1/q, 1/r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPair {
    pub inv_q: f64,
    pub inv_r: f64,
}

impl ExponentPair {
    pub fn new(inv_q: f64, inv_r: f64) -> Result<Self> {
        for (name, v) in [("1/q", inv_q), ("1/r", inv_r)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(Self { inv_q, inv_r })
    }

    pub fn from_exponents(q: Exponent, r: Exponent) -> Self {
        Self {
            inv_q: q.reciprocal(),
            inv_r: r.reciprocal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    StrichartzWave,
    StrichartzSchrodinger,
    BiViaStrichartz,
    BilinearOpen,
    TransverseNecessary,
    NontransverseNecessary,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::StrichartzWave,
        Region::StrichartzSchrodinger,
        Region::BiViaStrichartz,
        Region::BilinearOpen,
        Region::TransverseNecessary,
        Region::NontransverseNecessary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Region::StrichartzWave => "strichartz_wave",
            Region::StrichartzSchrodinger => "strichartz_schrodinger",
            Region::BiViaStrichartz => "bi_via_strichartz",
            Region::BilinearOpen => "bilinear_open",
            Region::TransverseNecessary => "transverse_necessary",
            Region::NontransverseNecessary => "nontransverse_necessary",
        }
    }
}

/// `a/q + b/r <= c` (or `<` when strict).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Constraint {
    a: f64,
    b: f64,
    c: f64,
    strict: bool,
}

impl Constraint {
    const fn le(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, strict: false }
    }

    const fn lt(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c, strict: true }
    }

    /// Signed Euclidean distance to the line, positive inside.
    fn margin(&self, p: &ExponentPair) -> f64 {
        (self.c - self.a * p.inv_q - self.b * p.inv_r) / self.a.hypot(self.b)
    }

    fn holds(&self, p: &ExponentPair) -> bool {
        let m = self.margin(p);
        if m.abs() <= BOUNDARY_TOL {
            !self.strict
        } else {
            m > 0.0
        }
    }
}

/// An excluded endpoint: `1/q = inv_q` on the boundary of constraint `on`.
#[derive(Debug, Clone, Copy)]
struct Exclusion {
    inv_q: f64,
    inv_r: Option<f64>,
    on: usize,
}

struct RegionDef {
    constraints: Vec<Constraint>,
    exclusions: Vec<Exclusion>,
}

fn definition(region: Region, dim: usize) -> RegionDef {
    let d = dim as f64;
    let (constraints, exclusions) = match region {
        Region::StrichartzWave => {
            let ex = if dim == 3 {
                vec![Exclusion { inv_q: 0.5, inv_r: Some(0.0), on: 0 }]
            } else {
                vec![]
            };
            (vec![Constraint::le(2.0, d - 1.0, (d - 1.0) / 2.0)], ex)
        }
        Region::StrichartzSchrodinger => {
            let ex = if dim == 2 {
                vec![Exclusion { inv_q: 0.5, inv_r: Some(0.0), on: 0 }]
            } else {
                vec![]
            };
            (vec![Constraint::le(2.0, d, d / 2.0)], ex)
        }
        Region::BiViaStrichartz => {
            let ex = match dim {
                2 => vec![Exclusion { inv_q: 0.75, inv_r: None, on: 1 }],
                3 => vec![Exclusion { inv_q: 1.0, inv_r: None, on: 1 }],
                _ => vec![],
            };
            (
                vec![Constraint::le(2.0, d, d), Constraint::le(2.0, d - 1.0, d - 1.0 + 1.0 / d)],
                ex,
            )
        }
        Region::BilinearOpen => (
            vec![
                Constraint::lt(2.0, d + 1.0, d + 1.0),
                Constraint::le(1.0, 0.0, 1.0),
                Constraint::le(-1.0, 0.0, -0.5),
                Constraint::le(0.0, 1.0, 1.0),
                Constraint::le(0.0, -1.0, -0.5),
            ],
            vec![],
        ),
        Region::TransverseNecessary => (vec![Constraint::le(2.0, d - 0.5, d)], vec![]),
        Region::NontransverseNecessary => (
            vec![Constraint::le(2.0, d - 1.0, d - 0.5), Constraint::le(1.0, 0.0, (d + 1.0) / 4.0)],
            vec![],
        ),
    };
    RegionDef { constraints, exclusions }
}

/// Membership and signed margin of one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub region: Region,
    pub member: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub pair: ExponentPair,
    pub dim: usize,
    pub regions: Vec<Membership>,
}

impl RegionVerdict {
    pub fn get(&self, region: Region) -> Membership {
        *self
            .regions
            .iter()
            .find(|m| m.region == region)
            .expect("every region is evaluated")
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (2..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")))
    }
}

pub fn membership(region: Region, p: &ExponentPair, dim: usize) -> Membership {
    let def = definition(region, dim);
    let margin = def
        .constraints
        .iter()
        .map(|c| c.margin(p))
        .fold(f64::INFINITY, f64::min);
    let mut member = def.constraints.iter().all(|c| c.holds(p));
    for ex in &def.exclusions {
        let on_line = def.constraints[ex.on].margin(p).abs() <= BOUNDARY_TOL;
        let q_match = (p.inv_q - ex.inv_q).abs() <= BOUNDARY_TOL;
        let r_match = ex.inv_r.is_none_or(|r| (p.inv_r - r).abs() <= BOUNDARY_TOL);
        if on_line && q_match && r_match {
            member = false;
        }
    }
    Membership { region, member, margin }
}

pub fn region_verdict(p: &ExponentPair, dim: usize) -> Result<RegionVerdict> {
    check_dim(dim)?;
    Ok(RegionVerdict {
        pair: *p,
        dim,
        regions: Region::ALL.iter().map(|&r| membership(r, p, dim)).collect(),
    })
}

/// A point in the plot plane: horizontal `1/r`, vertical `1/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlotPoint {
    pub inv_r: f64,
    pub inv_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionBoundary {
    pub region: Region,
    /// Closed polygon (first vertex not repeated); empty if the region misses
    /// the unit square.
    pub polygon: Vec<PlotPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AtlasCell {
    pub inv_r: f64,
    pub inv_q: f64,
    pub verdict: RegionVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionAtlas {
    pub dim: usize,
    pub resolution: usize,
    pub cells: Vec<AtlasCell>,
    pub boundaries: Vec<RegionBoundary>,
}

pub const MIN_ATLAS_RESOLUTION: usize = 16;

/// Verdicts on a `(resolution + 1)^2` lattice of the unit square together
/// with exact boundary polygons of every region.
pub fn region_atlas(dim: usize, resolution: usize) -> Result<RegionAtlas> {
    check_dim(dim)?;
    if resolution < MIN_ATLAS_RESOLUTION {
        return Err(Error::Config(format!(
            "atlas resolution {resolution} is below the minimum {MIN_ATLAS_RESOLUTION}"
        )));
    }
    let step = 1.0 / resolution as f64;
    let mut cells = Vec::with_capacity((resolution + 1).pow(2));
    for iq in 0..=resolution {
        for ir in 0..=resolution {
            let p = ExponentPair::new(iq as f64 * step, ir as f64 * step)?;
            cells.push(AtlasCell {
                inv_r: p.inv_r,
                inv_q: p.inv_q,
                verdict: region_verdict(&p, dim)?,
            });
        }
    }
    let boundaries = Region::ALL
        .iter()
        .map(|&region| RegionBoundary {
            region,
            polygon: region_polygon(region, dim),
        })
        .collect();
    Ok(RegionAtlas {
        dim,
        resolution,
        cells,
        boundaries,
    })
}

/// Clips the unit square by each constraint of the region.
pub fn region_polygon(region: Region, dim: usize) -> Vec<PlotPoint> {
    // Vertices as (inv_q, inv_r).
    let mut poly = vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
    for c in definition(region, dim).constraints {
        let slack = |v: &(f64, f64)| c.c - c.a * v.0 - c.b * v.1;
        let mut out = Vec::new();
        for i in 0..poly.len() {
            let cur = poly[i];
            let next = poly[(i + 1) % poly.len()];
            let (sc, sn) = (slack(&cur), slack(&next));
            if sc >= 0.0 {
                out.push(cur);
            }
            if (sc >= 0.0) != (sn >= 0.0) {
                let s = sc / (sc - sn);
                out.push((cur.0 + s * (next.0 - cur.0), cur.1 + s * (next.1 - cur.1)));
            }
        }
        poly = out;
        if poly.is_empty() {
            break;
        }
    }
    poly.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-14);
    poly.into_iter()
        .map(|(inv_q, inv_r)| PlotPoint { inv_r, inv_q })
        .collect()
}

/// Pointwise comparison of two regions on the atlas lattice.
#[derive(Debug, Clone, Serialize)]
pub struct InclusionCheck {
    pub subset: Vec<Region>,
    pub superset: Vec<Region>,
    pub checked: usize,
    pub violations: Vec<ExponentPair>,
}

/// Points of the atlas lying in every `subset` region but outside some
/// `superset` region.
pub fn inclusion_check(atlas: &RegionAtlas, subset: &[Region], superset: &[Region]) -> InclusionCheck {
    let mut checked = 0;
    let mut violations = Vec::new();
    for cell in &atlas.cells {
        if subset.iter().all(|&r| cell.verdict.get(r).member) {
            checked += 1;
            if !superset.iter().all(|&r| cell.verdict.get(r).member) {
                violations.push(cell.verdict.pair);
            }
        }
    }
    InclusionCheck {
        subset: subset.to_vec(),
        superset: superset.to_vec(),
        checked,
        violations,
    }
}

/// Frequency-side geometry of a wave (cone sector around `xi0`) and
/// Schrodinger (ball around `eta0`) interaction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Geometry {
    pub dim: usize,
    pub xi0: Vec3,
    pub eta0: Vec3,
    pub omega: Vec3,
    pub alpha: f64,
    pub lambda: f64,
    pub strong_margin: f64,
}

impl Geometry {
    pub fn new(xi0: &[f64], eta0: &[f64]) -> Result<Self> {
        let dim = xi0.len();
        check_dim(dim)?;
        if eta0.len() != dim {
            return Err(Error::Structural(format!(
                "xi0 has {dim} components but eta0 has {}",
                eta0.len()
            )));
        }
        let (xi0, eta0) = (pad(xi0), pad(eta0));
        let n = norm3(&xi0);
        if n == 0.0 {
            return Err(Error::Domain("xi0 must be nonzero".into()));
        }
        let omega = [xi0[0] / n, xi0[1] / n, xi0[2] / n];
        let tv = transversal_vector(&omega, &eta0);
        let alpha = norm3(&tv);
        let strong_margin = if alpha == 0.0 {
            0.0
        } else {
            (dot(&tv, &omega).abs() / alpha).min(1.0)
        };
        Ok(Self {
            dim,
            xi0,
            eta0,
            omega,
            alpha,
            lambda: norm3(&eta0),
            strong_margin,
        })
    }

    /// `min{alpha, lambda, alpha lambda}`.
    pub fn scale(&self) -> f64 {
        self.alpha.min(self.lambda).min(self.alpha * self.lambda)
    }
}

fn transversal_vector(omega: &Vec3, eta: &Vec3) -> Vec3 {
    [omega[0] + 2.0 * eta[0], omega[1] + 2.0 * eta[1], omega[2] + 2.0 * eta[2]]
}

pub const WEAK_THRESHOLD: f64 = 0.25;
pub const STRONG_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transversality {
    pub geometry: Geometry,
    pub weak: bool,
    pub strong: bool,
}

pub fn classify_transversality(
    xi0: &[f64],
    eta0: &[f64],
    weak_threshold: f64,
    strong_ratio: f64,
) -> Result<Transversality> {
    let geometry = Geometry::new(xi0, eta0)?;
    Ok(Transversality {
        weak: geometry.alpha >= weak_threshold,
        strong: geometry.strong_margin >= strong_ratio,
        geometry,
    })
}

/// `min{a, l, a l}^{d+1-(d+1)/r-2/q} a^{1/r-1} l^{1/q-1/2}`.
pub fn transversal_constant(p: &ExponentPair, dim: usize, alpha: f64, lambda: f64) -> Result<f64> {
    if !(alpha > 0.0 && lambda > 0.0 && alpha.is_finite() && lambda.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha = {alpha} and lambda = {lambda} must both be positive"
        )));
    }
    let d = dim as f64;
    let m = alpha.min(lambda).min(alpha * lambda);
    let outer = d + 1.0 - (d + 1.0) * p.inv_r - 2.0 * p.inv_q;
    Ok(m.powf(outer) * alpha.powf(p.inv_r - 1.0) * lambda.powf(p.inv_q - 0.5))
}

/// The two frequency regions `Lambda_1` (cone sector) and `Lambda_2` (ball)
/// attached to a geometry.
#[derive(Debug, Clone, Copy)]
pub struct SupportSets<'a> {
    geom: &'a Geometry,
    cone_angle: f64,
    ball_radius: f64,
}

impl<'a> SupportSets<'a> {
    pub fn new(geom: &'a Geometry) -> Self {
        Self {
            geom,
            cone_angle: crate::packets::SMALL * geom.alpha.min(1.0),
            ball_radius: crate::packets::SMALL * geom.alpha,
        }
    }

    pub fn in_cone(&self, xi: &Vec3) -> bool {
        let r = norm3(xi);
        let l = self.geom.lambda;
        r >= 0.5 * l && r <= 2.0 * l && angle(xi, &self.geom.xi0).is_ok_and(|a| a <= self.cone_angle)
    }

    pub fn in_ball(&self, xi: &Vec3) -> bool {
        let d = [xi[0] - self.geom.eta0[0], xi[1] - self.geom.eta0[1], xi[2] - self.geom.eta0[2]];
        norm3(&d) <= self.ball_radius
    }

    pub fn ball_volume(&self) -> f64 {
        let r = self.ball_radius;
        match self.geom.dim {
            2 => PI * r * r,
            _ => 4.0 / 3.0 * PI * r * r * r,
        }
    }

    fn sample_ball(&self, rng: &mut impl Rng) -> Vec3 {
        loop {
            let mut v = [0.0; 3];
            for c in v.iter_mut().take(self.geom.dim) {
                *c = rng.gen_range(-1.0..1.0);
            }
            if norm3(&v) <= 1.0 {
                return [
                    self.geom.eta0[0] + self.ball_radius * v[0],
                    self.geom.eta0[1] + self.ball_radius * v[1],
                    self.geom.eta0[2] + self.ball_radius * v[2],
                ];
            }
        }
    }

    fn sample_cone(&self, rng: &mut impl Rng) -> Vec3 {
        // Rejection from the box around the sector's tip region.
        let l = self.geom.lambda;
        let reach = 2.0 * l;
        // Half-opening in radians: 1 - cos(phi) = angle^2.
        let phi = (1.0 - self.cone_angle.powi(2)).clamp(-1.0, 1.0).acos();
        let lateral = reach * phi.sin();
        let w = self.geom.omega;
        let basis = orthonormal_complement(&w);
        loop {
            let along = rng.gen_range(0.5 * l * phi.cos()..reach);
            let mut xi = [w[0] * along, w[1] * along, w[2] * along];
            for b in basis.iter().take(self.geom.dim - 1) {
                let s = rng.gen_range(-lateral..lateral);
                for i in 0..3 {
                    xi[i] += s * b[i];
                }
            }
            if self.in_cone(&xi) {
                return xi;
            }
        }
    }
}

fn orthonormal_complement(w: &Vec3) -> [Vec3; 2] {
    let helper = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut a = [
        helper[0] - dot(&helper, w) * w[0],
        helper[1] - dot(&helper, w) * w[1],
        helper[2] - dot(&helper, w) * w[2],
    ];
    let na = norm3(&a);
    for c in &mut a {
        *c /= na;
    }
    let b = [
        w[1] * a[2] - w[2] * a[1],
        w[2] * a[0] - w[0] * a[2],
        w[0] * a[1] - w[1] * a[0],
    ];
    [a, b]
}

/// The two phases: `Phi_1 = |xi|` (wave) and `Phi_2 = -|xi|^2` (Schrodinger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Wave,
    Schrodinger,
}

impl Phase {
    pub fn value(self, xi: &Vec3) -> f64 {
        match self {
            Phase::Wave => norm3(xi),
            Phase::Schrodinger => -dot(xi, xi),
        }
    }

    pub fn gradient(self, xi: &Vec3) -> Vec3 {
        match self {
            Phase::Wave => {
                let n = norm3(xi);
                [xi[0] / n, xi[1] / n, xi[2] / n]
            }
            Phase::Schrodinger => [-2.0 * xi[0], -2.0 * xi[1], -2.0 * xi[2]],
        }
    }

    pub fn hessian_apply(self, xi: &Vec3, v: &Vec3) -> Vec3 {
        match self {
            Phase::Wave => {
                let n = norm3(xi);
                let w = [xi[0] / n, xi[1] / n, xi[2] / n];
                let p = dot(&w, v);
                [(v[0] - p * w[0]) / n, (v[1] - p * w[1]) / n, (v[2] - p * w[2]) / n]
            }
            Phase::Schrodinger => [-2.0 * v[0], -2.0 * v[1], -2.0 * v[2]],
        }
    }

    /// `Phi(xi) - Phi(xi') - Hess Phi(xi)(xi - xi')` applied to the gradient.
    fn taylor_remainder(self, xi: &Vec3, xi_p: &Vec3) -> Vec3 {
        match self {
            // The gradient is linear: written this way the remainder is an
            // exact floating-point zero.
            Phase::Schrodinger => {
                let mut r = [0.0; 3];
                for i in 0..3 {
                    let lhs = -2.0 * xi[i] + 2.0 * xi_p[i];
                    let rhs = -2.0 * (xi[i] - xi_p[i]);
                    r[i] = lhs - rhs;
                }
                r
            }
            Phase::Wave => {
                let g = self.gradient(xi);
                let gp = self.gradient(xi_p);
                let diff = [xi[0] - xi_p[0], xi[1] - xi_p[1], xi[2] - xi_p[2]];
                let h = self.hessian_apply(xi, &diff);
                [g[0] - gp[0] - h[0], g[1] - gp[1] - h[1], g[2] - gp[2] - h[2]]
            }
        }
    }

    pub fn weight(self, geom: &Geometry) -> f64 {
        match self {
            Phase::Wave => 1.0 / geom.lambda,
            Phase::Schrodinger => 1.0,
        }
    }
}

/// `|a ^ b| = (|a|^2 |b|^2 - (a.b)^2)^{1/2}`.
pub fn wedge_norm(a: &Vec3, b: &Vec3) -> f64 {
    (dot(a, a) * dot(b, b) - dot(a, b).powi(2)).max(0.0).sqrt()
}

/// Minimum over unit `v` orthogonal to `w` of `|H v ^ w|`, where `H` is the
/// Hessian of `phase` at `xi`.
fn min_wedge_on_complement(phase: Phase, xi: &Vec3, w: &Vec3, dim: usize) -> f64 {
    let nw = norm3(w);
    let unit = [w[0] / nw, w[1] / nw, w[2] / nw];
    let basis = if dim == 2 {
        vec![[-unit[1], unit[0], 0.0]]
    } else {
        orthonormal_complement(&unit).to_vec()
    };
    let images: Vec<Vec3> = basis.iter().map(|b| phase.hessian_apply(xi, b)).collect();
    // Quadratic form Q(v) = |Hv|^2 |w|^2 - (Hv . w)^2 on the complement.
    let q = |i: usize, j: usize| dot(&images[i], &images[j]) * dot(w, w) - dot(&images[i], w) * dot(&images[j], w);
    let min_eig = if basis.len() == 1 {
        q(0, 0)
    } else {
        let (a, b, c) = (q(0, 0), q(0, 1), q(1, 1));
        0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
    };
    min_eig.max(0.0).sqrt()
}

/// Taylor coefficients of `(1 + 2 c s + s^2)^{1/2}` in `s`.
fn sqrt_series(c: f64, order: usize) -> Vec<f64> {
    let b = |n: usize| match n {
        0 => 1.0,
        1 => 2.0 * c,
        2 => 1.0,
        _ => 0.0,
    };
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    for n in 1..=order {
        let conv: f64 = (1..n).map(|k| a[k] * a[n - k]).sum();
        a[n] = (b(n) - conv) / 2.0;
    }
    a
}

/// `sup_{|xi| = 1} |grad^m |xi||`: the largest `m`-th directional derivative
/// of the norm on the unit sphere.
pub fn norm_derivative_constant(m: usize) -> f64 {
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    let samples = 4001;
    (0..samples)
        .map(|i| {
            let c = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            sqrt_series(c, m)[m].abs()
        })
        .fold(0.0, f64::max)
        * factorial
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseConditions {
    pub phase: Phase,
    pub weight: f64,
    /// Condition (i): smallest sampled `min_v |Hv ^ w| / (H alpha |v|)`.
    pub transversality_min_ratio: f64,
    /// Condition (ii): largest sampled gradient variation divided by alpha.
    pub gradient_variation_max_ratio: f64,
    /// Condition (iii): largest `|remainder| / (H |xi - xi'|)`; exactly zero
    /// for the quadratic phase.
    pub hessian_remainder_max_ratio: f64,
    /// Condition (iv): `max_m ||grad^m Phi||_inf scale^{m-2} / H` over
    /// `2 < m <= 5d`; exactly zero for the quadratic phase.
    pub derivative_max_ratio: f64,
    /// Condition (iv), second part: `H scale / alpha`.
    pub weight_scale_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub geometry: Geometry,
    pub samples: usize,
    pub seed: u64,
    pub wave: PhaseConditions,
    pub schrodinger: PhaseConditions,
}

fn require_strong(geom: &Geometry) -> Result<()> {
    if geom.strong_margin < STRONG_RATIO || geom.alpha < WEAK_THRESHOLD {
        return Err(Error::Precondition(format!(
            "the strong transversality condition |(omega + 2 eta0) . omega| >= {STRONG_RATIO} |omega + 2 eta0| \
             fails: margin {:.4}, alpha {:.4}",
            geom.strong_margin, geom.alpha
        )));
    }
    if geom.lambda == 0.0 {
        return Err(Error::Precondition("eta0 must be nonzero".into()));
    }
    Ok(())
}

/// Samples `(xi, eta)` pairs from `Lambda_1 x Lambda_2` and reports the worst
/// margins of conditions (i)-(iv) for both orderings of the phases.
pub fn check_conditions(geom: &Geometry, samples: usize, seed: u64) -> Result<ConditionReport> {
    require_strong(geom)?;
    if samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let sets = SupportSets::new(geom);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec3, Vec3, Vec3, Vec3)> = (0..samples)
        .map(|_| {
            (
                sets.sample_cone(&mut rng),
                sets.sample_ball(&mut rng),
                sets.sample_cone(&mut rng),
                sets.sample_ball(&mut rng),
            )
        })
        .collect();
    let scale = geom.scale();
    let dim = geom.dim;
    let report = |phase: Phase| {
        let weight = phase.weight(geom);
        let other = match phase {
            Phase::Wave => Phase::Schrodinger,
            Phase::Schrodinger => Phase::Wave,
        };
        let mut trans = f64::INFINITY;
        let mut variation: f64 = 0.0;
        let mut remainder: f64 = 0.0;
        for (c1, b1, c2, b2) in &draws {
            let (own, own_p, oth, oth_p) = match phase {
                Phase::Wave => (c1, c2, b1, b2),
                Phase::Schrodinger => (b1, b2, c1, c2),
            };
            let gj = phase.gradient(own);
            let gk = other.gradient(oth);
            let w = [gj[0] - gk[0], gj[1] - gk[1], gj[2] - gk[2]];
            trans = trans.min(min_wedge_on_complement(phase, own, &w, dim) / (weight * geom.alpha));

            let dj = phase.gradient(own_p);
            let dk = other.gradient(oth_p);
            let var = norm3(&[gj[0] - dj[0], gj[1] - dj[1], gj[2] - dj[2]])
                + norm3(&[gk[0] - dk[0], gk[1] - dk[1], gk[2] - dk[2]]);
            variation = variation.max(var / geom.alpha);

            let step = norm3(&[own[0] - own_p[0], own[1] - own_p[1], own[2] - own_p[2]]);
            if step > 0.0 {
                let r = norm3(&phase.taylor_remainder(own, own_p));
                remainder = remainder.max(r / (weight * step));
            }
        }
        let derivative = match phase {
            Phase::Schrodinger => 0.0,
            Phase::Wave => {
                // |grad^m |xi|| = C_m |xi|^{1-m}, largest on the inner edge |xi| = lambda/2.
                let rmin = 0.5 * geom.lambda;
                (3..=5 * dim)
                    .map(|m| norm_derivative_constant(m) * rmin.powf(1.0 - m as f64) * scale.powf(m as f64 - 2.0))
                    .fold(0.0, f64::max)
                    / weight
            }
        };
        PhaseConditions {
            phase,
            weight,
            transversality_min_ratio: trans,
            gradient_variation_max_ratio: variation,
            hessian_remainder_max_ratio: remainder,
            derivative_max_ratio: derivative,
            weight_scale_ratio: weight * scale / geom.alpha,
        }
    };
    let wave = report(Phase::Wave);
    let schrodinger = report(Phase::Schrodinger);
    Ok(ConditionReport {
        geometry: geom.clone(),
        samples,
        seed,
        wave,
        schrodinger,
    })
}

/// Reusable uniform samples of `Lambda_2`, shared across all `(a, h)` pairs
/// and shell widths (common random numbers).
pub struct ShellSampler<'a> {
    geom: &'a Geometry,
    points: Vec<Vec3>,
    volume: f64,
}

pub const MIN_MC_SAMPLES: usize = 10_000;

impl<'a> ShellSampler<'a> {
    pub fn new(geom: &'a Geometry, samples: usize, seed: u64) -> Result<Self> {
        if samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "need at least {MIN_MC_SAMPLES} Monte-Carlo samples, got {samples}"
            )));
        }
        let sets = SupportSets::new(geom);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..samples).map(|_| sets.sample_ball(&mut rng)).collect();
        Ok(Self {
            geom,
            points,
            volume: sets.ball_volume(),
        })
    }

    /// Thin-shell estimate of the measure of
    /// `{xi in Lambda_2, h - xi in Lambda_1 : Phi_2(xi) + Phi_1(h - xi) = a}`.
    /// Each sample in the shell `|F - a| <= delta` contributes `|grad F|`,
    /// so that the shell integral divided by `2 delta` tends to the surface
    /// measure (coarea formula).
    pub fn estimate(&self, h: &Vec3, a: f64, delta: f64) -> f64 {
        let sets = SupportSets::new(self.geom);
        let mut acc = 0.0;
        for xi in &self.points {
            let rest = [h[0] - xi[0], h[1] - xi[1], h[2] - xi[2]];
            let f = Phase::Schrodinger.value(xi) + Phase::Wave.value(&rest);
            if (f - a).abs() > delta || !sets.in_cone(&rest) {
                continue;
            }
            let nr = norm3(&rest);
            let grad = [
                -2.0 * xi[0] - rest[0] / nr,
                -2.0 * xi[1] - rest[1] / nr,
                -2.0 * xi[2] - rest[2] / nr,
            ];
            acc += norm3(&grad);
        }
        acc * self.volume / self.points.len() as f64 / (2.0 * delta)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceMeasureReport {
    pub geometry: Geometry,
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
    pub delta: f64,
    pub max_estimate: f64,
    pub max_estimate_half_delta: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `|estimate(delta/2) / estimate(delta) - 1|` at the maximising pair.
    pub delta_stability: f64,
}

pub const DEFAULT_DELTA_FACTOR: f64 = 1e-3;

/// Maximises the shell estimate over `(a, h)` drawn as `h = xi_1 + xi_2`,
/// `a = Phi_1(xi_1) + Phi_2(xi_2)` with `xi_j` uniform in `Lambda_j`, and
/// compares with `scale^{d-1}`.
pub fn surface_measure_mc(geom: &Geometry, samples: usize, pairs: usize, seed: u64) -> Result<SurfaceMeasureReport> {
    if geom.alpha <= 0.0 || geom.lambda <= 0.0 {
        return Err(Error::Precondition("alpha and lambda must be positive".into()));
    }
    if pairs == 0 {
        return Err(Error::Config("need at least one (a, h) pair".into()));
    }
    let sampler = ShellSampler::new(geom, samples, seed)?;
    let sets = SupportSets::new(geom);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fa1);
    let delta = DEFAULT_DELTA_FACTOR * geom.scale();
    let mut best = (0.0, 0.0);
    for _ in 0..pairs {
        let x1 = sets.sample_cone(&mut rng);
        let x2 = sets.sample_ball(&mut rng);
        let h = [x1[0] + x2[0], x1[1] + x2[1], x1[2] + x2[2]];
        let a = Phase::Wave.value(&x1) + Phase::Schrodinger.value(&x2);
        let e = sampler.estimate(&h, a, delta);
        if e > best.0 {
            best = (e, sampler.estimate(&h, a, 0.5 * delta));
        }
    }
    let bound = geom.scale().powi(geom.dim as i32 - 1);
    let delta_stability = if best.0 > 0.0 { (best.1 / best.0 - 1.0).abs() } else { 0.0 };
    Ok(SurfaceMeasureReport {
        geometry: geom.clone(),
        samples,
        pairs,
        seed,
        delta,
        max_estimate: best.0,
        max_estimate_half_delta: best.1,
        bound,
        ratio: best.0 / bound,
        delta_stability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pair(q: f64, r: f64) -> ExponentPair {
        ExponentPair::new(q, r).unwrap()
    }

    #[test]
    fn angle_examples() {
        assert_eq!(angle(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(angle(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(angle(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(matches!(angle(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn anchor_points_in_three_dimensions() {
        let on = |p: ExponentPair, r: Region| membership(r, &p, 3).margin.abs() <= 1e-12;
        assert!(on(pair(2.0 / 3.0, 2.0 / 3.0), Region::BilinearOpen));
        assert!(!membership(Region::BilinearOpen, &pair(2.0 / 3.0, 2.0 / 3.0), 3).member);
        assert!(on(pair(2.0 / 3.0, 2.0 / 3.0), Region::TransverseNecessary));
        assert!(on(pair(7.0 / 8.0, 0.5), Region::TransverseNecessary));
        assert!(membership(Region::TransverseNecessary, &pair(7.0 / 8.0, 0.5), 3).member);
        assert!(on(pair(0.5, 0.75), Region::BilinearOpen));
        assert!(on(pair(1.0, 0.5), Region::BilinearOpen));
    }

    #[test]
    fn strichartz_exclusions() {
        let p = pair(0.5, 0.0);
        assert!(!membership(Region::StrichartzWave, &p, 3).member);
        assert!(membership(Region::StrichartzWave, &pair(0.25, 0.0), 2).member);
        assert!(!membership(Region::StrichartzSchrodinger, &p, 2).member);
        assert!(membership(Region::StrichartzSchrodinger, &pair(0.25, 0.25), 2).member);
        assert!(!membership(Region::BiViaStrichartz, &pair(0.75, 0.0), 2).member);
        assert!(membership(Region::BiViaStrichartz, &pair(0.7, 0.0), 2).member);
        assert!(!membership(Region::BiViaStrichartz, &pair(1.0, 1.0 / 6.0), 3).member);
        assert!(membership(Region::BiViaStrichartz, &pair(1.0, 0.1), 3).member);
    }

    #[test]
    fn transversality_examples() {
        let t = classify_transversality(&[1.0, 0.0], &[-0.5, -0.5], WEAK_THRESHOLD, STRONG_RATIO).unwrap();
        assert_abs_diff_eq!(t.geometry.alpha, 1.0, epsilon = 1e-15);
        assert_eq!(t.geometry.strong_margin, 0.0);
        assert!(t.weak && !t.strong);

        let t = classify_transversality(&[1.0, 0.0], &[1.0, 0.0], WEAK_THRESHOLD, STRONG_RATIO).unwrap();
        assert_eq!((t.geometry.alpha, t.geometry.strong_margin), (3.0, 1.0));
        assert!(t.weak && t.strong);

        let t = classify_transversality(&[1.0, 0.0], &[-0.5, 0.0], WEAK_THRESHOLD, STRONG_RATIO).unwrap();
        assert_eq!(t.geometry.alpha, 0.0);
        assert!(!t.weak);

        assert!(classify_transversality(&[0.0, 0.0], &[1.0, 0.0], 0.25, 0.25).is_err());
    }

    #[test]
    fn transversal_constant_examples() {
        for (q, r, d) in [(0.5, 0.5, 2), (1.0, 0.3, 3), (0.2, 0.9, 2)] {
            assert_abs_diff_eq!(transversal_constant(&pair(q, r), d, 1.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        }
        let p = pair(0.5, 0.5);
        assert_abs_diff_eq!(transversal_constant(&p, 2, 0.25, 1.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(transversal_constant(&p, 2, 1.0, 0.25).unwrap(), 0.5, epsilon = 1e-14);
        assert!(transversal_constant(&p, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn transversal_constant_is_log_linear_on_each_branch() {
        let p = pair(0.6, 0.55);
        // Branch min = alpha lambda (both below one), min = alpha, min = lambda.
        let cases: [(fn(f64) -> (f64, f64), &str); 3] = [
            (|s| (0.5 * s, 0.5), "alpha-lambda"),
            (|s| (0.5 * s, 3.0), "alpha"),
            (|s| (3.0, 0.5 * s), "lambda"),
        ];
        for (f, name) in cases {
            let logc = |s: f64| {
                let (a, l) = f(s);
                transversal_constant(&p, 2, a, l).unwrap().ln()
            };
            let (s0, s1, s2) = (0.4f64, 0.6, 0.9);
            let slope1 = (logc(s1) - logc(s0)) / (s1.ln() - s0.ln());
            let slope2 = (logc(s2) - logc(s1)) / (s2.ln() - s1.ln());
            assert!((slope1 - slope2).abs() < 1e-10, "{name}");
        }
    }

    #[test]
    fn sqrt_series_matches_binomial() {
        // c = 1: (1 + s), all higher coefficients vanish.
        let a = sqrt_series(1.0, 6);
        assert_abs_diff_eq!(a[1], 1.0, epsilon = 1e-15);
        assert!(a[2..].iter().all(|x| x.abs() < 1e-15));
        // c = 0: (1 + s^2)^{1/2} = 1 + s^2/2 - s^4/8 + ...
        let a = sqrt_series(0.0, 4);
        assert_abs_diff_eq!(a[2], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[4], -0.125, epsilon = 1e-15);
        // Second derivative of |xi| on the unit sphere has norm 1.
        assert_abs_diff_eq!(norm_derivative_constant(2), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn conditions_for_collinear_geometry() {
        let geom = Geometry::new(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        let rep = check_conditions(&geom, 1000, 3).unwrap();
        assert!(rep.wave.transversality_min_ratio >= 0.1, "{rep:?}");
        assert!(rep.schrodinger.transversality_min_ratio >= 0.1);
        assert_eq!(rep.schrodinger.hessian_remainder_max_ratio, 0.0);
        assert_eq!(rep.schrodinger.derivative_max_ratio, 0.0);
        assert!(rep.wave.derivative_max_ratio.is_finite());
    }

    #[test]
    fn conditions_require_strong_transversality() {
        let geom = Geometry::new(&[1.0, 0.0], &[-0.5, -0.5]).unwrap();
        assert!(matches!(check_conditions(&geom, 10, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn three_dimensional_conditions() {
        let geom = Geometry::new(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        let rep = check_conditions(&geom, 200, 9).unwrap();
        assert!(rep.wave.transversality_min_ratio >= 0.1);
    }

    #[test]
    fn surface_measure_empty_and_bounded() {
        let geom = Geometry::new(&[1.0, 0.0], &[-1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(geom.alpha, 1.0, epsilon = 1e-15);
        let sampler = ShellSampler::new(&geom, 20_000, 4).unwrap();
        assert_eq!(sampler.estimate(&[50.0, 50.0, 0.0], 0.0, 1e-3), 0.0);
        assert!(ShellSampler::new(&geom, 10, 4).is_err());
        let rep = surface_measure_mc(&geom, 200_000, 16, 4).unwrap();
        assert!(rep.max_estimate > 0.0);
        assert!(rep.ratio <= 10.0, "{rep:?}");
    }

    #[test]
    fn atlas_guards_and_polygons() {
        assert!(region_atlas(3, 8).is_err());
        let atlas = region_atlas(3, 16).unwrap();
        assert_eq!(atlas.cells.len(), 17 * 17);
        let bil = atlas.boundaries.iter().find(|b| b.region == Region::BilinearOpen).unwrap();
        let has = |r: f64, q: f64| bil.polygon.iter().any(|p| (p.inv_r - r).abs() < 1e-12 && (p.inv_q - q).abs() < 1e-12);
        assert!(has(0.75, 0.5) && has(0.5, 1.0));
        let eq6 = atlas.boundaries.iter().find(|b| b.region == Region::TransverseNecessary).unwrap();
        let c = definition(Region::TransverseNecessary, 3).constraints[0];
        let on_line = eq6
            .polygon
            .iter()
            .filter(|p| c.margin(&pair(p.inv_q, p.inv_r)).abs() < 1e-12)
            .count();
        assert_eq!(on_line, 2);
    }

    #[test]
    fn inclusions_on_atlas() {
        for d in [2, 3] {
            let atlas = region_atlas(d, 64).unwrap();
            let chk = inclusion_check(
                &atlas,
                &[Region::BiViaStrichartz],
                &[Region::TransverseNecessary, Region::NontransverseNecessary],
            );
            assert!(chk.checked > 0 && chk.violations.is_empty());
            // The wave-wave range is not contained in the wave-Schrodinger
            // necessary range.
            let chk = inclusion_check(&atlas, &[Region::BilinearOpen], &[Region::TransverseNecessary]);
            assert!(!chk.violations.is_empty());
        }
    }

    #[test]
    fn atlas_polygons_differ_between_dimensions() {
        let a2 = region_polygon(Region::TransverseNecessary, 2);
        let a3 = region_polygon(Region::TransverseNecessary, 3);
        assert!(!a2.is_empty() && !a3.is_empty());
        assert_ne!(a2, a3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn margin_and_membership_agree(q in 0.0f64..=1.0, r in 0.0f64..=1.0, d in 2usize..=3) {
            let p = pair(q, r);
            for m in region_verdict(&p, d).unwrap().regions {
                if m.margin > BOUNDARY_TOL {
                    prop_assert!(m.member);
                } else if m.margin < -BOUNDARY_TOL {
                    prop_assert!(!m.member);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn classification_is_rotation_invariant(
            theta in 0.0f64..(2.0 * PI),
            x in -2.0f64..2.0, y in 0.1f64..2.0,
            a in -2.0f64..2.0, b in -2.0f64..2.0,
        ) {
            let rot = |v: [f64; 2]| [theta.cos() * v[0] - theta.sin() * v[1], theta.sin() * v[0] + theta.cos() * v[1]];
            let g0 = Geometry::new(&[x, y], &[a, b]).unwrap();
            let g1 = Geometry::new(&rot([x, y]), &rot([a, b])).unwrap();
            prop_assert!((g0.alpha - g1.alpha).abs() < 1e-12);
            prop_assert!((g0.lambda - g1.lambda).abs() < 1e-12);
            prop_assert!((g0.strong_margin - g1.strong_margin).abs() < 1e-12);
        }
    }
}
