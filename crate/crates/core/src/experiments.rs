//! Default experiments behind each theorem check, shared by the acceptance
//! suite and `wslab verify`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::norms::{
    bilinear_ratio, build_counterexample, omega_region, plate_region, scaling_sweep, tube_region, ball_norm_growth,
    occupancy_check, Exponent, GrowthResult, MRule, MixedNormParams, Occupancy, SampledRegion, Sampling,
    ShearedBox, SweepConstruction, SweepRequest, SweepResult,
};
use crate::packets::{make_datum, Construction, FrequencySupport, PacketSpec};
use crate::ranges::{
    classify_transversality, membership, transversal_constant, ExponentPair, Geometry, Region, STRONG_RATIO,
    WEAK_THRESHOLD,
};
use crate::spectral::{norm3, Evolution, FrequencyField, GridSpec, Lattice, LatticeEvaluator, Vec3, NYQUIST_MARGIN};
use crate::u2::{transference_ratio, Atom, AtomicFunction};

/// Allowed spread `max / min` of the normalised bilinear ratios.
pub const PROBE_VARIATION_BOUND: f64 = 4.0;

/// Controls the space-time window and sampling of a bilinear probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSettings {
    /// Spatial half-extent of a packet along an axis, in units of
    /// `1 / (frequency standard deviation)` on that axis.
    pub envelope_factor: f64,
    /// Samples per `1 / (sum of frequency deviations)` on each axis.
    pub samples_per_width: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            envelope_factor: 4.0,
            samples_per_width: 3.0,
        }
    }
}

/// Two unit-norm data and the sampled space-time window containing their
/// whole interaction.
#[derive(Debug, Clone)]
pub struct Probe {
    pub f: FrequencyField,
    pub g: FrequencyField,
    pub region: ShearedBox,
    pub sampled: SampledRegion,
}

fn unit_vec(dim: usize, axis: usize) -> Vec3 {
    let mut e = [0.0; 3];
    if axis < dim {
        e[axis] = 1.0;
    }
    e
}

fn support_grid(dim: usize, supports: &[&FrequencySupport], extents: &[f64]) -> Result<Arc<GridSpec>> {
    let max_abs = supports
        .iter()
        .flat_map(|s| s.max_abs(dim))
        .fold(0.0f64, f64::max)
        .max(1e-3);
    let spacing = std::f64::consts::PI / ((NYQUIST_MARGIN + 0.5) * max_abs);
    Ok(Arc::new(GridSpec::with_spacing(extents, spacing, (0.0, 1.0), 2)?))
}

/// Builds unit-norm data for the two supports and a window that follows the
/// pair from before their packets meet until after they have separated.
pub fn probe_setup(
    dim: usize,
    f_support: &FrequencySupport,
    ev_f: Evolution,
    g_support: &FrequencySupport,
    ev_g: Evolution,
    settings: ProbeSettings,
) -> Result<Probe> {
    f_support.validate(dim)?;
    g_support.validate(dim)?;
    let f_spec = PacketSpec::new(f_support.clone(), 1.0)?;
    let g_spec = PacketSpec::new(g_support.clone(), 1.0)?;

    // Provisional box fine enough in frequency to resolve both supports.
    let min_width = f_support.min_feature(dim).min(g_support.min_feature(dim));
    let provisional = vec![24.0 * std::f64::consts::TAU / min_width; dim];
    let grid0 = support_grid(dim, &[f_support, g_support], &provisional)?;
    let (mf, sf) = make_datum(&f_spec, &grid0)?.spread()?;
    let (mg, sg) = make_datum(&g_spec, &grid0)?.spread()?;
    if (0..dim).any(|a| sf[a] <= 0.0 || sg[a] <= 0.0) {
        return Err(Error::Config("a probe support is not resolved by the frequency lattice".into()));
    }

    let vf = ev_f.group_velocity(&mf);
    let vg = ev_g.group_velocity(&mg);
    let rel: Vec3 = [0, 1, 2].map(|a| vf[a] - vg[a]);
    let speed = norm3(&rel);
    if speed < 1e-9 {
        return Err(Error::Precondition(
            "the two packets travel together, so the interaction window is unbounded".into(),
        ));
    }
    let k = settings.envelope_factor;
    let ext = |s: &Vec3| [0, 1, 2].map(|a| if a < dim { k / s[a] } else { 0.0 });
    let (ef, eg) = (ext(&sf), ext(&sg));
    // Extent of each packet along the relative velocity.
    let along = |e: &Vec3| (0..dim).map(|a| e[a] * rel[a].abs() / speed).sum::<f64>();
    let t_half = (along(&ef) + along(&eg)) / speed;
    // Velocity spread of each packet, to cover dispersion over the window.
    let spread = |ev: Evolution, s: &Vec3, m: &Vec3| {
        [0, 1, 2].map(|a| match ev {
            Evolution::Schrodinger => 2.0 * s[a],
            Evolution::HalfWave => s[a] / norm3(m).max(1e-12),
        })
    };
    let (df, dg) = (spread(ev_f, &sf, &mf), spread(ev_g, &sg, &mg));
    let mut half_widths = [0.0; 3];
    let mut drift = [0.0; 3];
    let mut counts = [1usize; 3];
    let mut min_step = f64::INFINITY;
    let mut max_speed = 0.0f64;
    for a in 0..dim {
        drift[a] = 0.5 * (vf[a] + vg[a]);
        half_widths[a] = ef[a].max(eg[a]) + 0.5 * rel[a].abs() * t_half + t_half * df[a].max(dg[a]);
        let step = 1.0 / (settings.samples_per_width * (sf[a] + sg[a]));
        counts[a] = (2.0 * half_widths[a] / step).ceil().max(1.0) as usize;
        min_step = min_step.min(2.0 * half_widths[a] / counts[a] as f64);
        max_speed = max_speed.max(0.5 * rel[a].abs() + df[a].max(dg[a]));
    }
    let dt = min_step / max_speed.max(1e-12);
    let n_t = (2.0 * t_half / dt).ceil().max(2.0) as usize;
    let region = ShearedBox {
        dim,
        t_range: (-t_half, t_half),
        center: [0.0; 3],
        drift,
        half_widths,
    };
    let sampled = region.sample(n_t, counts)?;

    // Final box: the periodic copies must stay well outside the window.
    let extents: Vec<f64> = (0..dim)
        .map(|a| {
            let reach = half_widths[a] + drift[a].abs() * t_half + ef[a].max(eg[a]);
            provisional[a].max(3.0 * reach)
        })
        .collect();
    let grid = support_grid(dim, &[f_support, g_support], &extents)?;
    Ok(Probe {
        f: make_datum(&f_spec, &grid)?,
        g: make_datum(&g_spec, &grid)?,
        region,
        sampled,
    })
}

fn bilinear_pair(p: &MixedNormParams) -> Result<ExponentPair> {
    let pair = ExponentPair::from_exponents(p.q, p.r);
    if !membership(Region::BilinearOpen, &pair, 2).member {
        return Err(Error::Precondition(format!(
            "(q, r) = ({}, {}) lies outside the open bilinear range",
            p.q, p.r
        )));
    }
    Ok(pair)
}

fn default_probe_params() -> MixedNormParams {
    MixedNormParams::new(Exponent::Finite(2.0), Exponent::Finite(2.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeRow {
    pub n: u32,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
    pub ratio: f64,
    pub constant: f64,
    pub normalized: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub params: MixedNormParams,
    pub rows: Vec<ProbeRow>,
    /// `max / min` of the normalised ratios.
    pub variation: f64,
    pub bound: f64,
    pub pass: bool,
}

fn probe_report(params: MixedNormParams, rows: Vec<ProbeRow>) -> ProbeReport {
    let max = rows.iter().map(|r| r.normalized).fold(0.0, f64::max);
    let min = rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min);
    let variation = max / min;
    ProbeReport {
        params,
        rows,
        variation,
        bound: PROBE_VARIATION_BOUND,
        pass: variation.is_finite() && variation <= PROBE_VARIATION_BOUND,
    }
}

fn check_scales(n_list: &[u32]) -> Result<()> {
    if n_list.is_empty() || n_list.iter().any(|&n| n < 4) {
        return Err(Error::Config("probe scales must be at least 4".into()));
    }
    Ok(())
}

/// Wave-wave probe: two transverse cone sectors of angular radius `1/(2N)`
/// around `e_1` and `e_2` in the band `1 +- 1/N`.
#[derive(Debug, Clone, Serialize)]
pub struct WaveWaveConfig {
    pub params: MixedNormParams,
    pub n_list: Vec<u32>,
    pub settings: ProbeSettings,
}

impl Default for WaveWaveConfig {
    fn default() -> Self {
        Self {
            params: default_probe_params(),
            n_list: vec![4, 8, 16],
            settings: ProbeSettings::default(),
        }
    }
}

pub fn wave_wave_probe(cfg: &WaveWaveConfig) -> Result<ProbeReport> {
    check_scales(&cfg.n_list)?;
    bilinear_pair(&cfg.params)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let nf = n as f64;
        let sector = |axis| FrequencySupport::ConeSector {
            direction: unit_vec(2, axis),
            band: (1.0 - 1.0 / nf, 1.0 + 1.0 / nf),
            angular_radius: 0.5 / nf,
        };
        let probe = probe_setup(2, &sector(0), Evolution::HalfWave, &sector(1), Evolution::HalfWave, cfg.settings)?;
        let ratio = bilinear_ratio(
            &probe.f,
            &probe.g,
            (Evolution::HalfWave, Evolution::HalfWave),
            &cfg.params,
            &probe.sampled,
        )?;
        rows.push(ProbeRow {
            n,
            alpha: None,
            lambda: None,
            ratio,
            constant: 1.0,
            normalized: ratio,
            samples: probe.sampled.point_count(),
        });
    }
    Ok(probe_report(cfg.params, rows))
}

/// Wave-Schrodinger probe. Without an explicit geometry it sweeps
/// `xi0 = e_1`, `eta0 = -(1 + alpha)/2 e_1`, for which the transversal
/// vector has length `alpha` and points along `-e_1`.
#[derive(Debug, Clone, Serialize)]
pub struct WaveSchrodingerConfig {
    pub params: MixedNormParams,
    pub n_list: Vec<u32>,
    pub alphas: Vec<f64>,
    pub geometry: Option<(Vec<f64>, Vec<f64>)>,
    pub settings: ProbeSettings,
}

impl Default for WaveSchrodingerConfig {
    fn default() -> Self {
        Self {
            params: default_probe_params(),
            n_list: vec![4, 8, 16],
            alphas: vec![0.25, 0.5, 1.0],
            geometry: None,
            settings: ProbeSettings::default(),
        }
    }
}

/// Checks both transversality conditions, naming the failing one.
pub fn require_strong_transversality(xi0: &[f64], eta0: &[f64]) -> Result<Geometry> {
    let t = classify_transversality(xi0, eta0, WEAK_THRESHOLD, STRONG_RATIO)?;
    if !t.weak {
        return Err(Error::Precondition(format!(
            "|xi0/|xi0| + 2 eta0| = {:.4} is below the transversality threshold {WEAK_THRESHOLD}",
            t.geometry.alpha
        )));
    }
    if !t.strong {
        return Err(Error::Precondition(format!(
            "strong transversality fails: |(xi0/|xi0| + 2 eta0) . xi0/|xi0|| = {:.4} is below {STRONG_RATIO} x |xi0/|xi0| + 2 eta0| = {:.4}",
            t.geometry.strong_margin * t.geometry.alpha,
            STRONG_RATIO * t.geometry.alpha
        )));
    }
    Ok(t.geometry)
}

/// Supports of the wave (cone sector) and Schrodinger (ball) data, shrunk
/// by `s = 4/N` inside the sets allowed by the geometry.
pub fn scaled_supports(geom: &Geometry, n: u32) -> (FrequencySupport, FrequencySupport) {
    let s = 4.0 / n as f64;
    let eighth = s / 8.0;
    (
        FrequencySupport::ConeSector {
            direction: geom.omega,
            band: (geom.lambda * (1.0 - eighth), geom.lambda * (1.0 + eighth)),
            angular_radius: geom.alpha.min(1.0) * eighth,
        },
        FrequencySupport::Ball {
            center: geom.eta0,
            radius: geom.alpha * eighth,
        },
    )
}

pub fn wave_schrodinger_probe(cfg: &WaveSchrodingerConfig) -> Result<ProbeReport> {
    check_scales(&cfg.n_list)?;
    let pair = bilinear_pair(&cfg.params)?;
    let geometries: Vec<Geometry> = match &cfg.geometry {
        Some((xi0, eta0)) => vec![require_strong_transversality(xi0, eta0)?],
        None => {
            if cfg.alphas.is_empty() || cfg.alphas.iter().any(|&a| !(a > 0.0)) {
                return Err(Error::Config("alphas must be positive".into()));
            }
            cfg.alphas
                .iter()
                .map(|&a| require_strong_transversality(&[1.0, 0.0], &[-(1.0 + a) / 2.0, 0.0]))
                .collect::<Result<_>>()?
        }
    };
    let mut rows = Vec::new();
    for geom in &geometries {
        let constant = transversal_constant(&pair, geom.dim, geom.alpha, geom.lambda)?;
        for &n in &cfg.n_list {
            let (fs, gs) = scaled_supports(geom, n);
            let probe = probe_setup(geom.dim, &fs, Evolution::HalfWave, &gs, Evolution::Schrodinger, cfg.settings)?;
            let ratio = bilinear_ratio(
                &probe.f,
                &probe.g,
                (Evolution::HalfWave, Evolution::Schrodinger),
                &cfg.params,
                &probe.sampled,
            )?;
            rows.push(ProbeRow {
                n,
                alpha: Some(geom.alpha),
                lambda: Some(geom.lambda),
                ratio,
                constant,
                normalized: ratio / constant,
                samples: probe.sampled.point_count(),
            });
        }
    }
    Ok(probe_report(cfg.params, rows))
}

/// A sweep paired with its acceptance window for the fitted slope.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeCheck {
    pub label: String,
    pub sweep: SweepResult,
    pub window: (f64, f64),
    pub pass: bool,
}

fn slope_check(label: &str, req: &SweepRequest, window: (f64, f64)) -> Result<SlopeCheck> {
    let sweep = scaling_sweep(req)?;
    let pass = sweep.slope >= window.0 && sweep.slope <= window.1;
    Ok(SlopeCheck {
        label: label.into(),
        sweep,
        window,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleConfig {
    pub dim: usize,
    pub params: MixedNormParams,
    pub n_list: Vec<u32>,
    pub grid_scale: f64,
    pub vector_valued_up_to: Option<u32>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            params: MixedNormParams::new(Exponent::Finite(1.0), Exponent::Finite(1.0)),
            n_list: vec![8, 16, 32],
            grid_scale: 1.0,
            vector_valued_up_to: None,
        }
    }
}

impl CounterexampleConfig {
    fn request(&self, construction: SweepConstruction, params: MixedNormParams) -> SweepRequest {
        SweepRequest {
            dim: self.dim,
            construction,
            params,
            n_list: self.n_list.clone(),
            grid_scale: self.grid_scale,
            vector_valued_up_to: self.vector_valued_up_to,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub checks: Vec<SlopeCheck>,
    pub pass: bool,
}

impl CounterexampleReport {
    fn new(checks: Vec<SlopeCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { checks, pass }
    }
}

/// The exponent pair on the transverse necessary line with `1/r = 1/2`.
pub fn transverse_boundary_params(dim: usize) -> Result<MixedNormParams> {
    let d = dim as f64;
    let inv_r = 0.5;
    let inv_q = (d - (d - 0.5) * inv_r) / 2.0;
    Ok(MixedNormParams::new(Exponent::from_reciprocal(inv_q)?, Exponent::from_reciprocal(inv_r)?))
}

/// Transverse construction: slope of `R(N)` at the configured pair within
/// `[predicted - 0.5, predicted + 0.5]`, and within `+-0.3` of zero on the
/// necessary line.
pub fn transverse_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let main = cfg.request(SweepConstruction::Transverse, cfg.params);
    let predicted = SweepConstruction::Transverse.predicted_slope(cfg.dim, &cfg.params);
    let boundary = cfg.request(SweepConstruction::Transverse, transverse_boundary_params(cfg.dim)?);
    Ok(CounterexampleReport::new(vec![
        slope_check("transverse", &main, (predicted - 0.5, predicted + 0.5))?,
        slope_check("transverse boundary", &boundary, (-0.3, 0.3))?,
    ]))
}

/// Non-transverse construction with `M = N` and `M = 1`; slopes within
/// `+-0.5` of the predictions.
pub fn nontransverse_counterexample(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    let mut checks = Vec::new();
    for (label, rule) in [("M = N", MRule::EqualN), ("M = 1", MRule::One)] {
        let construction = SweepConstruction::NonTransverse(rule);
        let predicted = construction.predicted_slope(cfg.dim, &cfg.params);
        checks.push(slope_check(
            label,
            &cfg.request(construction, cfg.params),
            (predicted - 0.5, predicted + 0.5),
        )?);
    }
    Ok(CounterexampleReport::new(checks))
}

fn moduli(e: &LatticeEvaluator, t: f64, l: &Lattice) -> Vec<f64> {
    e.slice(t, l).iter().map(|z| z.norm()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyRow {
    pub n: u32,
    pub wave_peak: f64,
    pub schrodinger_peak: f64,
    pub plate: Occupancy,
    pub tube: Occupancy,
    pub wave_square: Occupancy,
    pub schrodinger_square: Occupancy,
}

impl OccupancyRow {
    pub fn pass(&self) -> bool {
        self.plate.pass && self.tube.pass && self.wave_square.pass && self.schrodinger_square.pass
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OccupancyConfig {
    pub dim: usize,
    pub n_list: Vec<u32>,
    pub fraction: f64,
    pub sampling: Sampling,
    pub grid_scale: f64,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            n_list: vec![8, 16],
            fraction: 0.4,
            sampling: Sampling::default(),
            grid_scale: 1.0,
        }
    }
}

/// Lower bounds of the transverse counterexample: `|u|` on the plate, `|v|`
/// on the tube and both square functions on `Omega`, each against
/// `fraction x` the peak of the corresponding single packet.
pub fn transverse_occupancy(cfg: &OccupancyConfig) -> Result<Vec<OccupancyRow>> {
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let construction = Construction::Transverse;
        let (pair, wave, schr) = build_counterexample(cfg.dim, construction, n, cfg.grid_scale)?;
        let wave_peak = pair.wave.peak_bound();
        let schrodinger_peak = pair.schrodinger.peak_bound();
        let u = LatticeEvaluator::new(&pair.wave, Evolution::HalfWave);
        let v = LatticeEvaluator::new(&pair.schrodinger, Evolution::Schrodinger);
        let sample = |b: ShearedBox| b.sample_with_spacing(cfg.sampling.dt, cfg.sampling.dx);
        let plate = occupancy_check(&sample(plate_region(cfg.dim, n))?, cfg.fraction * wave_peak, |t, l| {
            moduli(&u, t, l)
        });
        let tube = occupancy_check(
            &sample(tube_region(cfg.dim, construction, n))?,
            cfg.fraction * schrodinger_peak,
            |t, l| moduli(&v, t, l),
        );
        let omega = sample(omega_region(cfg.dim, construction, n))?;
        let uf = wave.lattice_evaluator(Evolution::HalfWave);
        let vf = schr.lattice_evaluator(Evolution::Schrodinger);
        let wave_square = occupancy_check(&omega, cfg.fraction * wave_peak, |t, l| uf.square_slice(t, l));
        let schrodinger_square = occupancy_check(&omega, cfg.fraction * schrodinger_peak, |t, l| vf.square_slice(t, l));
        rows.push(OccupancyRow {
            n,
            wave_peak,
            schrodinger_peak,
            plate,
            tube,
            wave_square,
            schrodinger_square,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferenceConfig {
    pub params: MixedNormParams,
    pub n_list: Vec<u32>,
    pub pieces: usize,
    pub settings: ProbeSettings,
}

impl Default for TransferenceConfig {
    fn default() -> Self {
        Self {
            params: default_probe_params(),
            n_list: vec![4, 8, 16],
            pieces: 4,
            settings: ProbeSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferenceRow {
    pub n: u32,
    /// Normalised bilinear ratio of each piece's datum against `v`.
    pub piece_ratios: Vec<f64>,
    pub worst_homogeneous: f64,
    pub multi_piece: f64,
    pub bound: f64,
    /// `|one-piece transference ratio / homogeneous ratio - 1|`.
    pub one_piece_mismatch: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferenceReport {
    pub rows: Vec<TransferenceRow>,
    pub pass: bool,
}

/// Tolerance for a one-piece atom reproducing the homogeneous ratio.
pub const ONE_PIECE_TOL: f64 = 1e-8;

/// Geometry `alpha = lambda = 1`: `xi0 = e_1`, `eta0 = -e_1`. The wave
/// function is an atom whose pieces carry the base datum translated across
/// its envelope, so the adapted solution jumps between packets.
pub fn transference_experiment(cfg: &TransferenceConfig) -> Result<TransferenceReport> {
    check_scales(&cfg.n_list)?;
    if cfg.pieces == 0 {
        return Err(Error::Config("an atom needs at least one piece".into()));
    }
    let pair = bilinear_pair(&cfg.params)?;
    let geom = require_strong_transversality(&[1.0, 0.0], &[-1.0, 0.0])?;
    let constant = transversal_constant(&pair, geom.dim, geom.alpha, geom.lambda)?;
    let evs = (Evolution::HalfWave, Evolution::Schrodinger);
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let (fs, gs) = scaled_supports(&geom, n);
        let probe = probe_setup(geom.dim, &fs, evs.0, &gs, evs.1, cfg.settings)?;
        let window = probe.region.t_range;
        let (_, sigma) = probe.f.spread()?;
        let step = 1.0 / sigma[1];
        let centre = 0.5 * (cfg.pieces as f64 - 1.0);
        let pieces: Vec<FrequencyField> = (0..cfg.pieces)
            .map(|i| {
                probe
                    .f
                    .translated(&[0.0, (i as f64 - centre) * step, 0.0])
                    .scaled(1.0 / (cfg.pieces as f64).sqrt())
            })
            .collect();
        let piece_ratios = pieces
            .iter()
            .map(|p| {
                let unit = p.scaled(1.0 / p.norm());
                Ok(bilinear_ratio(&unit, &probe.g, evs, &cfg.params, &probe.sampled)? / constant)
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = piece_ratios.iter().copied().fold(0.0, f64::max);
        let mut breaks: Vec<f64> = (0..cfg.pieces)
            .map(|i| window.0 + (window.1 - window.0) * i as f64 / cfg.pieces as f64)
            .collect();
        breaks.push(window.1);
        let u = AtomicFunction::single(Atom::new(&breaks, pieces)?);
        let v = AtomicFunction::single(Atom::homogeneous(window, probe.g.clone())?);
        let multi = transference_ratio(&u, &v, &cfg.params, &geom, &probe.sampled)?;

        let homogeneous = bilinear_ratio(&probe.f, &probe.g, evs, &cfg.params, &probe.sampled)? / constant;
        let one = transference_ratio(
            &AtomicFunction::single(Atom::homogeneous(window, probe.f.clone())?),
            &v,
            &cfg.params,
            &geom,
            &probe.sampled,
        )?;
        let mismatch = (one / homogeneous - 1.0).abs();
        let bound = (cfg.pieces as f64).sqrt() * worst;
        rows.push(TransferenceRow {
            n,
            piece_ratios,
            worst_homogeneous: worst,
            multi_piece: multi,
            bound,
            one_piece_mismatch: mismatch,
            pass: multi <= bound && mismatch <= ONE_PIECE_TOL,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(TransferenceReport { rows, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthConfig {
    pub radii: Vec<f64>,
    pub sampling: Sampling,
    pub box_length: f64,
    pub max_exponent: f64,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            radii: vec![4.0, 8.0, 16.0, 32.0],
            sampling: Sampling { dt: 0.5, dx: 0.5 },
            box_length: 1024.0,
            max_exponent: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub growth: GrowthResult,
    pub max_exponent: f64,
    pub pass: bool,
}

/// Two unit Schrodinger data on `|xi - e_j| <= 1/8`, `j = 1, 2`, and the
/// growth of `||v_1 v_2||_{L^2}` over the balls `|t| + |x| < R`.
pub fn schrodinger_growth(cfg: &GrowthConfig) -> Result<GrowthReport> {
    let supports: Vec<FrequencySupport> = (0..2)
        .map(|axis| FrequencySupport::Ball {
            center: unit_vec(2, axis),
            radius: 0.125,
        })
        .collect();
    let grid = support_grid(2, &supports.iter().collect::<Vec<_>>(), &[cfg.box_length; 2])?;
    let data = supports
        .into_iter()
        .map(|s| make_datum(&PacketSpec::new(s, 1.0)?, &grid))
        .collect::<Result<Vec<_>>>()?;
    let growth = ball_norm_growth(&data, Evolution::Schrodinger, &cfg.radii, cfg.sampling)?;
    Ok(GrowthReport {
        pass: growth.exponent <= cfg.max_exponent,
        growth,
        max_exponent: cfg.max_exponent,
    })
}

/// Outcome of `verify` for one theorem.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verification {
    WaveWave(ProbeReport),
    WaveSchrodinger(ProbeReport),
    Transverse(CounterexampleReport),
    NonTransverse(CounterexampleReport),
    Transference(TransferenceReport),
    Growth(GrowthReport),
}

impl Verification {
    pub fn pass(&self) -> bool {
        match self {
            Verification::WaveWave(r) | Verification::WaveSchrodinger(r) => r.pass,
            Verification::Transverse(r) | Verification::NonTransverse(r) => r.pass,
            Verification::Transference(r) => r.pass,
            Verification::Growth(r) => r.pass,
        }
    }
}

/// Overrides accepted by `verify`; unset fields keep the theorem's default.
#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyOverrides {
    pub dim: Option<usize>,
    pub q: Option<Exponent>,
    pub r: Option<Exponent>,
    pub n_list: Option<Vec<u32>>,
    pub grid_scale: Option<f64>,
    pub xi0: Option<Vec<f64>>,
    pub eta0: Option<Vec<f64>>,
}

impl VerifyOverrides {
    fn params(&self, default: MixedNormParams) -> MixedNormParams {
        MixedNormParams::new(self.q.unwrap_or(default.q), self.r.unwrap_or(default.r))
    }

    fn require_planar(&self, theorem: u8) -> Result<()> {
        match self.dim {
            None | Some(2) => Ok(()),
            Some(d) => Err(Error::Unsupported(format!(
                "the default experiment for theorem {theorem} runs in two dimensions, got d = {d}"
            ))),
        }
    }
}

pub const THEOREM_IDS: [u8; 6] = [1, 2, 3, 4, 5, 6];

/// Runs the default experiment of a theorem.
pub fn verify(theorem: u8, o: &VerifyOverrides) -> Result<Verification> {
    match theorem {
        1 => {
            o.require_planar(1)?;
            let mut cfg = WaveWaveConfig::default();
            cfg.params = o.params(cfg.params);
            if let Some(n) = &o.n_list {
                cfg.n_list = n.clone();
            }
            Ok(Verification::WaveWave(wave_wave_probe(&cfg)?))
        }
        2 => {
            let mut cfg = WaveSchrodingerConfig::default();
            cfg.params = o.params(cfg.params);
            if let Some(n) = &o.n_list {
                cfg.n_list = n.clone();
            }
            match (&o.xi0, &o.eta0) {
                (Some(x), Some(e)) => cfg.geometry = Some((x.clone(), e.clone())),
                (None, None) => o.require_planar(2)?,
                _ => return Err(Error::Config("xi0 and eta0 must be given together".into())),
            }
            Ok(Verification::WaveSchrodinger(wave_schrodinger_probe(&cfg)?))
        }
        3 | 4 => {
            let mut cfg = CounterexampleConfig::default();
            cfg.params = o.params(cfg.params);
            if let Some(d) = o.dim {
                cfg.dim = d;
            }
            if let Some(n) = &o.n_list {
                cfg.n_list = n.clone();
            }
            if let Some(s) = o.grid_scale {
                cfg.grid_scale = s;
            }
            if theorem == 3 {
                Ok(Verification::Transverse(transverse_counterexample(&cfg)?))
            } else {
                Ok(Verification::NonTransverse(nontransverse_counterexample(&cfg)?))
            }
        }
        5 => {
            o.require_planar(5)?;
            let mut cfg = TransferenceConfig::default();
            cfg.params = o.params(cfg.params);
            if let Some(n) = &o.n_list {
                cfg.n_list = n.clone();
            }
            Ok(Verification::Transference(transference_experiment(&cfg)?))
        }
        6 => {
            o.require_planar(6)?;
            Ok(Verification::Growth(schrodinger_growth(&GrowthConfig::default())?))
        }
        other => Err(Error::Config(format!(
            "unknown theorem id {other}; expected one of {THEOREM_IDS:?}"
        ))),
    }
}
