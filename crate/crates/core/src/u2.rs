//! Finite `U^2` atoms, adapted evaluation, random signs and the
//! transference experiments.
//!
//! Atoms live on a finite time window split into consecutive intervals
//! `[a_0, a_1), [a_1, a_2), ..., [a_{n-1}, a_n]`. The adapted evaluation of
//! an atom at time `t` is the flow of the datum attached to the interval
//! containing `t`. The `U^2` norm is never computed; a representation's
//! `sum |c_j|` is reported as an upper bound.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{MixedNormParams, SampledRegion};
use crate::ranges::{transversal_constant, ExponentPair, Geometry, SupportSets};
use crate::spectral::{propagate, Evolution, FrequencyField, Lattice, LatticeEvaluator, SpatialField};

/// Slack allowed on the atom budget `sum ||g_I||^2 <= 1`.
pub const BUDGET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone)]
pub struct Atom {
    intervals: Vec<TimeInterval>,
    data: Vec<FrequencyField>,
}

impl Atom {
    /// `breakpoints` are `a_0 < a_1 < ... < a_n`; `data[i]` lives on `[a_i, a_{i+1})`.
    pub fn new(breakpoints: &[f64], data: Vec<FrequencyField>) -> Result<Self> {
        if data.is_empty() || breakpoints.len() != data.len() + 1 {
            return Err(Error::Structural(format!(
                "{} breakpoints cannot carry {} pieces",
                breakpoints.len(),
                data.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::Structural("breakpoints must be finite".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Structural(format!(
                "intervals must be disjoint and ordered, got breakpoints {} then {}",
                w[0], w[1]
            )));
        }
        let grid = data[0].grid();
        if data.iter().any(|g| **g.grid() != **grid) {
            return Err(Error::Structural("atom pieces live on different grids".into()));
        }
        let budget: f64 = data.iter().map(|g| g.norm().powi(2)).sum();
        if budget > 1.0 + BUDGET_TOL {
            return Err(Error::Structural(format!("atom budget {budget} exceeds 1")));
        }
        let intervals = breakpoints
            .windows(2)
            .map(|w| TimeInterval { start: w[0], end: w[1] })
            .collect();
        Ok(Self { intervals, data })
    }

    /// Atom with a single piece covering the window.
    pub fn homogeneous(window: (f64, f64), datum: FrequencyField) -> Result<Self> {
        Self::new(&[window.0, window.1], vec![datum])
    }

    /// `pieces` equal intervals, each carrying `datum / sqrt(pieces)`.
    pub fn equal_pieces(window: (f64, f64), datum: &FrequencyField, pieces: usize) -> Result<Self> {
        if pieces == 0 {
            return Err(Error::Structural("an atom needs at least one piece".into()));
        }
        let len = window.1 - window.0;
        let mut breaks: Vec<f64> = (0..pieces).map(|i| window.0 + len * i as f64 / pieces as f64).collect();
        breaks.push(window.1);
        let piece = datum.scaled(1.0 / (pieces as f64).sqrt());
        Self::new(&breaks, vec![piece; pieces])
    }

    pub fn intervals(&self) -> &[TimeInterval] {
        &self.intervals
    }

    pub fn data(&self) -> &[FrequencyField] {
        &self.data
    }

    pub fn window(&self) -> (f64, f64) {
        (self.intervals[0].start, self.intervals[self.intervals.len() - 1].end)
    }

    pub fn budget(&self) -> f64 {
        self.data.iter().map(|g| g.norm().powi(2)).sum()
    }

    /// Index of the interval containing `t`; the last interval is closed.
    pub fn active(&self, t: f64) -> Option<usize> {
        let last = self.intervals.len() - 1;
        self.intervals.iter().enumerate().position(|(i, iv)| {
            t >= iv.start && (t < iv.end || (i == last && t == iv.end))
        })
    }

    fn require_active(&self, t: f64) -> Result<usize> {
        self.active(t).ok_or_else(|| {
            let (a, b) = self.window();
            Error::Domain(format!("time {t} lies outside the atom window [{a}, {b}]"))
        })
    }
}

#[derive(Debug, Clone)]
pub struct AtomicFunction {
    terms: Vec<(f64, Atom)>,
}

impl AtomicFunction {
    pub fn new(terms: Vec<(f64, Atom)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Structural("an atomic function needs at least one term".into()));
        }
        if terms.iter().any(|(c, _)| !c.is_finite()) {
            return Err(Error::Structural("coefficients must be finite".into()));
        }
        let grid = terms[0].1.data[0].grid();
        if terms.iter().any(|(_, a)| **a.data[0].grid() != **grid) {
            return Err(Error::Structural("atoms live on different grids".into()));
        }
        Ok(Self { terms })
    }

    pub fn single(atom: Atom) -> Self {
        Self { terms: vec![(1.0, atom)] }
    }

    pub fn terms(&self) -> &[(f64, Atom)] {
        &self.terms
    }

    /// `sum |c_j|`, an upper bound for the `U^2` norm.
    pub fn norm_upper_bound(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(c, a)| (c * s, a.clone())).collect(),
        }
    }

    fn all_data(&self) -> impl Iterator<Item = (usize, usize, &FrequencyField)> {
        self.terms
            .iter()
            .enumerate()
            .flat_map(|(j, (_, a))| a.data.iter().enumerate().map(move |(i, g)| (j, i, g)))
    }
}

/// Adapted evaluation `u(t) = sum_j c_j flow(g_{j, I(t)}, t)` on the grid.
pub fn evaluate_adapted(af: &AtomicFunction, ev: Evolution, t: f64) -> Result<SpatialField> {
    let grid = af.terms[0].1.data[0].grid().clone();
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (c, atom) in &af.terms {
        let idx = atom.require_active(t)?;
        let slice = propagate(&atom.data[idx], ev, t)?;
        for (a, v) in acc.iter_mut().zip(slice.values()) {
            *a += v * *c;
        }
    }
    SpatialField::new(grid, acc)
}

/// Lattice evaluation of an adapted function.
pub struct AdaptedEvaluator {
    terms: Vec<(f64, Atom, Vec<LatticeEvaluator>)>,
}

impl AdaptedEvaluator {
    pub fn new(af: &AtomicFunction, ev: Evolution) -> Self {
        let terms = af
            .terms
            .iter()
            .map(|(c, a)| (*c, a.clone(), a.data.iter().map(|g| LatticeEvaluator::new(g, ev)).collect()))
            .collect();
        Self { terms }
    }

    pub fn slice(&self, t: f64, lattice: &Lattice) -> Result<Vec<Complex64>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); lattice.len()];
        for (c, atom, evals) in &self.terms {
            let idx = atom.require_active(t)?;
            for (a, v) in acc.iter_mut().zip(evals[idx].slice(t, lattice)) {
                *a += v * *c;
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignSampler {
    pub seed: u64,
    pub sample_count: usize,
}

/// Signs drawn per batch from an independent ChaCha stream so the
/// statistics do not depend on how batches are scheduled.
pub const SIGN_BATCH: usize = 1024;

impl SignSampler {
    pub fn new(seed: u64, sample_count: usize) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        Ok(Self { seed, sample_count })
    }

    /// Calls `f` with each sample's sign vector of length `n`.
    pub fn for_each(&self, n: usize, mut f: impl FnMut(&[f64])) {
        let mut signs = vec![0.0; n];
        let batches = self.sample_count.div_ceil(SIGN_BATCH);
        for batch in 0..batches {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(batch as u64);
            let count = SIGN_BATCH.min(self.sample_count - batch * SIGN_BATCH);
            for _ in 0..count {
                for s in signs.iter_mut() {
                    *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                f(&signs);
            }
        }
    }
}

/// Empirical `E |sum eps_i a_i| / (sum a_i^2)^{1/2}`.
pub fn khintchine_ratio(coeffs: &[f64], sampler: &SignSampler) -> Result<f64> {
    let l2 = coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
    if l2 == 0.0 || !l2.is_finite() {
        return Err(Error::Domain("coefficients must form a nonzero finite vector".into()));
    }
    let mut total = 0.0;
    sampler.for_each(coeffs.len(), |signs| {
        total += signs.iter().zip(coeffs).map(|(s, a)| s * a).sum::<f64>().abs();
    });
    Ok(total / sampler.sample_count as f64 / l2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationReport {
    /// `max | |u| - |active translate| |`.
    pub equality_gap: f64,
    /// `max (|u| - square function)`, nonpositive when domination holds.
    pub worst_slack: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Checks `|u| = |flow(g_active)| <= (sum_I |flow(g_I)|^2)^{1/2}` at every
/// grid point of every sampled time.
pub fn pointwise_domination_check(atom: &Atom, ev: Evolution, times: &[f64]) -> Result<DominationReport> {
    let af = AtomicFunction::single(atom.clone());
    let mut gap = 0.0f64;
    let mut slack = f64::NEG_INFINITY;
    let mut samples = 0;
    for &t in times {
        let u = evaluate_adapted(&af, ev, t)?;
        let idx = atom.require_active(t)?;
        let pieces: Vec<SpatialField> = atom
            .data
            .iter()
            .map(|g| propagate(g, ev, t))
            .collect::<Result<_>>()?;
        for (p, value) in u.values().iter().enumerate() {
            let modulus = value.norm();
            let square = pieces.iter().map(|s| s.values()[p].norm_sqr()).sum::<f64>().sqrt();
            gap = gap.max((modulus - pieces[idx].values()[p].norm()).abs());
            slack = slack.max(modulus - square);
            samples += 1;
        }
    }
    Ok(DominationReport {
        equality_gap: gap,
        worst_slack: slack,
        samples,
        pass: gap <= 1e-12 && slack <= 1e-12,
    })
}

fn check_supports(
    af: &AtomicFunction,
    label: &str,
    inside: impl Fn(&crate::spectral::Vec3) -> bool,
    set: &str,
) -> Result<()> {
    for (j, i, g) in af.all_data() {
        let grid = g.grid();
        if let Some(m) = g
            .modes()
            .iter()
            .find(|m| m.coeff.norm_sqr() > 0.0 && !inside(&grid.frequency(&m.k)))
        {
            return Err(Error::Config(format!(
                "datum {i} of term {j} of {label} has frequency {:?} outside the {set}",
                grid.frequency(&m.k)
            )));
        }
    }
    Ok(())
}

/// `||u v||_{L^q L^r(region)} / (C(alpha, lambda) ||u||_U2 ||v||_U2)` with
/// `u` adapted to the half-wave flow and `v` to the Schrodinger flow, and
/// the norms replaced by their representation bounds.
pub fn transference_ratio(
    u: &AtomicFunction,
    v: &AtomicFunction,
    p: &MixedNormParams,
    geom: &Geometry,
    region: &SampledRegion,
) -> Result<f64> {
    let sets = SupportSets::new(geom);
    check_supports(u, "u", |xi| sets.in_cone(xi), "cone sector")?;
    check_supports(v, "v", |xi| sets.in_ball(xi), "ball")?;
    let constant = transversal_constant(&ExponentPair::from_exponents(p.q, p.r), geom.dim, geom.alpha, geom.lambda)?;
    let bound = u.norm_upper_bound() * v.norm_upper_bound();
    if bound == 0.0 {
        return Err(Error::Domain("transference ratio with a zero coefficient sum".into()));
    }
    let ue = AdaptedEvaluator::new(u, Evolution::HalfWave);
    let ve = AdaptedEvaluator::new(v, Evolution::Schrodinger);
    let mut slices = Vec::with_capacity(region.times.len());
    for (&t, lattice) in region.times.iter().zip(&region.lattices) {
        let a = ue.slice(t, lattice)?;
        let b = ve.slice(t, lattice)?;
        slices.push(a.iter().zip(&b).map(|(x, y)| x.norm() * y.norm()).collect());
    }
    Ok(region.mixed_norm(&slices, p)? / (constant * bound))
}

/// `||(sum_j |wave f_j|^2)^{1/2} (sum_k |schr g_k|^2)^{1/2}|| / (sum ||f_j||^2 sum ||g_k||^2)^{1/2}`.
pub fn vector_valued_ratio(
    fs: &[FrequencyField],
    gs: &[FrequencyField],
    p: &MixedNormParams,
    region: &SampledRegion,
) -> Result<f64> {
    if fs.is_empty() || gs.is_empty() {
        return Err(Error::Structural("vector-valued ratio of an empty list".into()));
    }
    let nf = fs.iter().map(|f| f.norm().powi(2)).sum::<f64>().sqrt();
    let ng = gs.iter().map(|g| g.norm().powi(2)).sum::<f64>().sqrt();
    if nf == 0.0 || ng == 0.0 {
        return Err(Error::Domain("vector-valued ratio with vanishing data".into()));
    }
    let fe: Vec<LatticeEvaluator> = fs.iter().map(|f| LatticeEvaluator::new(f, Evolution::HalfWave)).collect();
    let ge: Vec<LatticeEvaluator> = gs.iter().map(|g| LatticeEvaluator::new(g, Evolution::Schrodinger)).collect();
    let square = |evals: &[LatticeEvaluator], t: f64, l: &Lattice| {
        let mut acc = vec![0.0f64; l.len()];
        for e in evals {
            for (a, v) in acc.iter_mut().zip(e.slice(t, l)) {
                *a += v.norm_sqr();
            }
        }
        acc
    };
    let slices = region.map_slices(|t, l| {
        square(&fe, t, l)
            .into_iter()
            .zip(square(&ge, t, l))
            .map(|(a, b)| (a * b).sqrt())
            .collect()
    });
    Ok(region.mixed_norm(&slices, p)? / (nf * ng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{bilinear_ratio, ShearedBox};
    use crate::packets::{make_datum, FrequencySupport, PacketSpec};
    use crate::spectral::GridSpec;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr_free::standard_normals;
    use std::sync::Arc;

    mod rand_distr_free {
        use rand::Rng;
        use rand_chacha::ChaCha8Rng;

        /// Box-Muller draws.
        pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let u1: f64 = 1.0 - rng.gen::<f64>();
                    let u2: f64 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect()
        }
    }

    fn grid() -> Arc<GridSpec> {
        Arc::new(GridSpec::cubic(2, 64.0, 128, (0.0, 4.0), 8).unwrap())
    }

    fn ball(grid: &Arc<GridSpec>, center: [f64; 3], norm: f64) -> FrequencyField {
        let spec = PacketSpec::new(FrequencySupport::Ball { center, radius: 0.4 }, norm).unwrap();
        make_datum(&spec, grid).unwrap()
    }

    #[test]
    fn atom_guards() {
        let g = grid();
        let f = ball(&g, [1.0, 0.0, 0.0], 0.8);
        assert!(matches!(Atom::new(&[0.0, 1.0, 0.5], vec![f.clone(), f.clone()]), Err(Error::Structural(_))));
        assert!(matches!(Atom::new(&[0.0, 1.0, 2.0], vec![f.clone(), f.clone()]), Err(Error::Structural(_))));
        assert!(Atom::new(&[0.0, 1.0], vec![f.clone(), f.clone()]).is_err());
        assert!(Atom::new(&[0.0, 1.0, 2.0], vec![f.scaled(0.5), f.scaled(0.5)]).is_ok());
    }

    #[test]
    fn active_interval_bookkeeping() {
        let g = grid();
        let f = ball(&g, [1.0, 0.0, 0.0], 0.5);
        let atom = Atom::new(&[0.0, 1.0, 2.0], vec![f.clone(), f]).unwrap();
        assert_eq!(atom.active(0.0), Some(0));
        assert_eq!(atom.active(1.0), Some(1));
        assert_eq!(atom.active(2.0), Some(1));
        assert_eq!(atom.active(2.5), None);
        let af = AtomicFunction::single(atom);
        assert!(matches!(evaluate_adapted(&af, Evolution::HalfWave, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn one_piece_atom_is_homogeneous() {
        let g = grid();
        let f = ball(&g, [1.0, 0.0, 0.0], 1.0);
        let af = AtomicFunction::single(Atom::homogeneous((0.0, 4.0), f.clone()).unwrap());
        for t in [0.0, 1.3, 4.0] {
            let a = evaluate_adapted(&af, Evolution::Schrodinger, t).unwrap();
            let b = propagate(&f, Evolution::Schrodinger, t).unwrap();
            let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-14);
        }
    }

    #[test]
    fn active_piece_ignores_other_pieces() {
        let g = grid();
        let g1 = ball(&g, [1.0, 0.0, 0.0], 0.6);
        let g2 = ball(&g, [0.0, 1.0, 0.0], 0.6);
        let g3 = ball(&g, [-1.0, 0.0, 0.0], 0.6);
        let a = AtomicFunction::single(Atom::new(&[0.0, 1.0, 2.0], vec![g1.clone(), g2]).unwrap());
        let b = AtomicFunction::single(Atom::new(&[0.0, 1.0, 2.0], vec![g1.clone(), g3]).unwrap());
        let ua = evaluate_adapted(&a, Evolution::HalfWave, 0.5).unwrap();
        let ub = evaluate_adapted(&b, Evolution::HalfWave, 0.5).unwrap();
        assert_eq!(ua.values(), ub.values());
        assert!((ua.l2_norm() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn domination_two_pieces() {
        let g = grid();
        let g1 = ball(&g, [1.0, 0.0, 0.0], 0.6);
        let g2 = ball(&g, [0.0, -1.0, 0.0], 0.8);
        let atom = Atom::new(&[0.0, 1.0, 2.0], vec![g1, g2]).unwrap();
        let rep = pointwise_domination_check(&atom, Evolution::HalfWave, &[0.2, 0.9, 1.0, 1.7, 2.0]).unwrap();
        assert!(rep.pass, "{rep:?}");
        let one = Atom::homogeneous((0.0, 1.0), ball(&g, [1.0, 0.0, 0.0], 1.0)).unwrap();
        let rep = pointwise_domination_check(&one, Evolution::Schrodinger, &[0.0, 0.5]).unwrap();
        assert_eq!(rep.equality_gap, 0.0);
        assert!(rep.worst_slack.abs() < 1e-15);
    }

    #[test]
    fn khintchine_small_cases() {
        let s = SignSampler::new(7, 10_000).unwrap();
        assert_eq!(khintchine_ratio(&[1.0], &s).unwrap(), 1.0);
        let r = khintchine_ratio(&[1.0, 1.0], &s).unwrap() * 2f64.sqrt();
        assert!((r - 1.0).abs() < 0.02, "{r}");
        assert!(matches!(khintchine_ratio(&[0.0, 0.0], &s), Err(Error::Domain(_))));
        assert!(SignSampler::new(1, 0).is_err());
    }

    #[test]
    fn khintchine_gaussian_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coeffs = standard_normals(&mut rng, 64);
        let r = khintchine_ratio(&coeffs, &SignSampler::new(3, 10_000).unwrap()).unwrap();
        assert!((0.70..=1.00).contains(&r), "{r}");
    }

    fn geometry_and_data() -> (Geometry, FrequencyField, FrequencyField, SampledRegion) {
        let g = Arc::new(GridSpec::cubic(2, 128.0, 256, (0.0, 1.0), 2).unwrap());
        let geom = Geometry::new(&[1.0, 0.0], &[-1.0, 0.0]).unwrap();
        let f = make_datum(
            &PacketSpec::new(
                FrequencySupport::ConeSector { direction: [1.0, 0.0, 0.0], band: (0.75, 1.25), angular_radius: 0.1 },
                1.0,
            )
            .unwrap(),
            &g,
        )
        .unwrap();
        let v = make_datum(
            &PacketSpec::new(FrequencySupport::Ball { center: [-1.0, 0.0, 0.0], radius: 0.1 }, 1.0).unwrap(),
            &g,
        )
        .unwrap();
        let region = ShearedBox {
            dim: 2,
            t_range: (0.0, 8.0),
            center: [0.0; 3],
            drift: [0.0; 3],
            half_widths: [24.0, 24.0, 0.0],
        }
        .sample_with_spacing(0.5, 0.5)
        .unwrap();
        (geom, f, v, region)
    }

    #[test]
    fn transference_homogeneous_case_and_homogeneity() {
        let (geom, f, g, region) = geometry_and_data();
        let p = MixedNormParams::finite(2.0, 2.0).unwrap();
        let u = AtomicFunction::single(Atom::homogeneous((0.0, 8.0), f.clone()).unwrap());
        let v = AtomicFunction::single(Atom::homogeneous((0.0, 8.0), g.clone()).unwrap());
        let direct = bilinear_ratio(&f, &g, (Evolution::HalfWave, Evolution::Schrodinger), &p, &region).unwrap();
        let c = transversal_constant(&ExponentPair::from_exponents(p.q, p.r), 2, geom.alpha, geom.lambda).unwrap();
        let tr = transference_ratio(&u, &v, &p, &geom, &region).unwrap();
        assert!((tr - direct / c).abs() < 1e-8 * tr);
        let tr10 = transference_ratio(&u.scaled(10.0), &v, &p, &geom, &region).unwrap();
        assert!((tr10 / tr - 1.0).abs() < 1e-10);
    }

    #[test]
    fn transference_rejects_misplaced_support() {
        let (geom, f, g, region) = geometry_and_data();
        let p = MixedNormParams::finite(2.0, 2.0).unwrap();
        let u = AtomicFunction::single(Atom::homogeneous((0.0, 8.0), g).unwrap());
        let v = AtomicFunction::single(Atom::homogeneous((0.0, 8.0), f).unwrap());
        let err = transference_ratio(&u, &v, &p, &geom, &region).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("term 0 of u")), "{err}");
    }

    #[test]
    fn vector_valued_singletons_and_duplicates() {
        let (_, f, g, region) = geometry_and_data();
        let p = MixedNormParams::finite(2.0, 2.0).unwrap();
        let single = vector_valued_ratio(std::slice::from_ref(&f), std::slice::from_ref(&g), &p, &region).unwrap();
        let direct = bilinear_ratio(&f, &g, (Evolution::HalfWave, Evolution::Schrodinger), &p, &region).unwrap();
        assert!((single - direct).abs() < 1e-10 * direct);
        let dup = vector_valued_ratio(&[f.clone(), f], &[g], &p, &region).unwrap();
        assert!((dup - single).abs() < 1e-10 * single);
        assert!(matches!(vector_valued_ratio(&[], &[], &p, &region), Err(Error::Structural(_))));
    }

    #[test]
    fn sign_streams_are_reproducible() {
        let coeffs = [0.3, -1.2, 2.0, 0.7];
        let a = khintchine_ratio(&coeffs, &SignSampler::new(5, 3000).unwrap()).unwrap();
        let b = khintchine_ratio(&coeffs, &SignSampler::new(5, 3000).unwrap()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn khintchine_bracket(coeffs in proptest::collection::vec(-5.0f64..5.0, 1..24), seed in any::<u64>()) {
            prop_assume!(coeffs.iter().any(|a| a.abs() > 1e-3));
            let r = khintchine_ratio(&coeffs, &SignSampler::new(seed, 10_000).unwrap()).unwrap();
            prop_assert!((0.65..=1.02).contains(&r), "{}", r);
        }

        #[test]
        fn atom_budget_bounds_adapted_norm(w1 in 0.05f64..1.0, split in 0.1f64..0.9, t in 0.0f64..2.0) {
            let g = grid();
            let a = w1.sqrt();
            let b = (1.0 - w1).sqrt();
            let atom = Atom::new(
                &[0.0, 2.0 * split, 2.0],
                vec![ball(&g, [1.0, 0.0, 0.0], a), ball(&g, [0.0, 1.0, 0.0], b)],
            ).unwrap();
            let af = AtomicFunction::single(atom.clone());
            let u = evaluate_adapted(&af, Evolution::Schrodinger, t).unwrap();
            let active = atom.data()[atom.active(t).unwrap()].norm();
            prop_assert!((u.l2_norm() - active).abs() < 1e-10);
            prop_assert!(u.l2_norm() <= 1.0 + 1e-10);
        }
    }
}
