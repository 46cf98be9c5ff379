//! Independent routes to quantities that the library computes one way.

use std::sync::Arc;

use wslab_core::norms::{
    ball_norm_growth, ball_norm_growth_with, build_counterexample, family_product_norm, omega_region, scaling_sweep,
    MixedNormParams, Sampling, SweepConstruction, SweepRequest,
};
use wslab_core::packets::{make_datum, Construction, FrequencySupport, PacketSpec};
use wslab_core::spectral::{Evolution, FrequencyField, GridSpec};
use wslab_core::u2::{vector_valued_ratio, AdaptedEvaluator, Atom, AtomicFunction};

#[test]
fn family_square_functions_match_explicitly_shifted_data() {
    let params = MixedNormParams::finite(1.0, 1.0).unwrap();
    let n = 8;
    let (_, wave, schr) = build_counterexample(2, Construction::Transverse, n, 1.0).unwrap();
    let region = omega_region(2, Construction::Transverse, n).sample_with_spacing(2.0, 1.0).unwrap();

    let library = family_product_norm(&wave, &schr, &region, &params).unwrap()
        / (wave.aggregate_norm() * schr.aggregate_norm());

    let shifted = |family: &wslab_core::packets::PacketFamily, ev: Evolution| -> Vec<FrequencyField> {
        family
            .shifts()
            .iter()
            .map(|s| family.base().space_time_shifted(ev, s.dt, &s.dx))
            .collect()
    };
    let fs = shifted(&wave, Evolution::HalfWave);
    let gs = shifted(&schr, Evolution::Schrodinger);
    let explicit = vector_valued_ratio(&fs, &gs, &params, &region).unwrap();

    assert!(
        (library - explicit).abs() <= 1e-8 * explicit,
        "family route {library} vs explicit route {explicit}"
    );
}

#[test]
fn transverse_slope_is_stable_under_dropping_the_largest_scale() {
    let request = |n_list: Vec<u32>| SweepRequest {
        dim: 2,
        construction: SweepConstruction::Transverse,
        params: MixedNormParams::finite(1.0, 1.0).unwrap(),
        n_list,
        grid_scale: 1.0,
        vector_valued_up_to: None,
        sampling: Sampling::default(),
    };
    let full = scaling_sweep(&request(vec![8, 16, 32, 64])).unwrap();
    let trimmed = scaling_sweep(&request(vec![8, 16, 32])).unwrap();
    assert!(
        (full.slope - trimmed.slope).abs() <= 0.2,
        "slopes {} and {}",
        full.slope,
        trimmed.slope
    );
}

#[test]
fn adapted_route_reproduces_free_ball_growth() {
    let supports: Vec<FrequencySupport> = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        .into_iter()
        .map(|center| FrequencySupport::Ball { center, radius: 0.25 })
        .collect();
    let grid = Arc::new(GridSpec::with_spacing(&[128.0; 2], 0.5, (0.0, 1.0), 2).unwrap());
    let data: Vec<FrequencyField> = supports
        .into_iter()
        .map(|s| make_datum(&PacketSpec::new(s, 1.0).unwrap(), &grid).unwrap())
        .collect();
    let radii = [2.0, 4.0, 8.0];
    let sampling = Sampling { dt: 0.5, dx: 0.5 };

    let free = ball_norm_growth(&data, Evolution::Schrodinger, &radii, sampling).unwrap();

    // Three equal pieces carry datum / sqrt(3) each; rescaling the atom recovers the free solution.
    let adapted: Vec<AdaptedEvaluator> = data
        .iter()
        .map(|d| {
            let atom = Atom::equal_pieces((-10.0, 10.0), d, 3).unwrap();
            AdaptedEvaluator::new(&AtomicFunction::single(atom).scaled(3f64.sqrt()), Evolution::Schrodinger)
        })
        .collect();
    let via_atoms = ball_norm_growth_with(2, &radii, sampling, |t, lattice| {
        let mut product = vec![1.0f64; lattice.len()];
        for e in &adapted {
            for (p, v) in product.iter_mut().zip(e.slice(t, lattice)?) {
                *p *= v.norm();
            }
        }
        Ok(product)
    })
    .unwrap();

    for (a, b) in free.norms.iter().zip(&via_atoms.norms) {
        assert!((a - b).abs() <= 1e-9 * a.max(1e-300), "{a} vs {b}");
    }
}
