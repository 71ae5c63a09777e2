//! Randomized invariants over groups, transforms, and datasets.

use bnn_core::{
    bispectrum, generate, orbit_distance, power_spectrum, CharacterTable, FiniteAbelianGroup, C64,
};
use proptest::prelude::*;

fn small_factor_lists() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(2u32..=6, 1..=3)
        .prop_filter("order <= 64", |fs| fs.iter().map(|&f| f as u64).product::<u64>() <= 64)
}

fn group_and_elements() -> impl Strategy<Value = (Vec<u32>, usize, usize, usize)> {
    small_factor_lists().prop_flat_map(|fs| {
        let order: usize = fs.iter().map(|&f| f as usize).product();
        (Just(fs), 0..order, 0..order, 0..order)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn group_axioms_hold((factors, a, b, c) in group_and_elements()) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let (x, y, z) = (g.element(a), g.element(b), g.element(c));
        let e = g.identity();
        prop_assert_eq!(g.compose(&x, &e).unwrap(), x.clone());
        prop_assert_eq!(g.compose(&e, &x).unwrap(), x.clone());
        prop_assert_eq!(
            g.compose(&g.compose(&x, &y).unwrap(), &z).unwrap(),
            g.compose(&x, &g.compose(&y, &z).unwrap()).unwrap()
        );
        prop_assert_eq!(g.compose(&x, &y).unwrap(), g.compose(&y, &x).unwrap());
        let inv = g.inverse(&x).unwrap();
        prop_assert_eq!(g.compose(&x, &inv).unwrap(), e);
    }
}

proptest! {
    #[test]
    fn actions_compose_exactly((factors, a, b, _c) in group_and_elements()) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let order = g.order();
        let x: Vec<C64> = (0..order).map(|i| C64::new(i as f64, -(i as f64) * 0.5)).collect();
        let (ga, gb) = (g.element(a), g.element(b));
        let one_then_other = g.act_on_signal(&ga, &g.act_on_signal(&gb, &x).unwrap()).unwrap();
        let combined = g.act_on_signal(&g.compose(&ga, &gb).unwrap(), &x).unwrap();
        prop_assert_eq!(one_then_other, combined);
        prop_assert_eq!(g.act_on_signal(&g.identity(), &x).unwrap(), x);
    }

    #[test]
    fn orbits_start_at_the_signal_and_divide_the_order(
        (factors, _a, _b, _c) in group_and_elements(),
        seed in 0u64..1000,
    ) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<C64> = (0..g.order())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let orbit = g.orbit(&x).unwrap();
        prop_assert_eq!(&orbit[0], &x);
        prop_assert_eq!(g.order() % orbit.len(), 0);
        for member in &orbit {
            let other = g.orbit(member).unwrap();
            prop_assert_eq!(other.len(), orbit.len());
        }
    }

    #[test]
    fn cayley_tables_are_symmetric_latin_squares_with_identity(
        factors in small_factor_lists(),
    ) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let t = g.cayley_table();
        prop_assert!(t.is_latin_square());
        prop_assert!(t.is_symmetric());
        prop_assert_eq!(t.identity_index(), Some(0));
    }

    #[test]
    fn transform_is_linear_and_preserves_energy(
        (factors, a, _b, _c) in group_and_elements(),
    ) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let n = g.order();
        let x: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
        let y: Vec<C64> = (0..n).map(|i| C64::new(1.0 / (i + 1) as f64, 0.25)).collect();
        let table = CharacterTable::new(&g);
        let (fx, fy) = (table.gft(&x).unwrap(), table.gft(&y).unwrap());

        let s = C64::new(0.75, -1.5);
        let mixed: Vec<C64> = x.iter().zip(&y).map(|(p, q)| s * p + q).collect();
        let f_mixed = table.gft(&mixed).unwrap();
        for (m, (px, py)) in f_mixed.iter().zip(fx.iter().zip(&fy)) {
            prop_assert!((m - (s * px + py)).norm() <= 1e-9);
        }

        // Parseval with this convention: ||f||^2 = n ||x||^2.
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ef: f64 = fx.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((ef - n as f64 * ex).abs() <= 1e-8 * ex.max(1.0) * n as f64);

        // Translation multiplies each coefficient by a character value.
        let el = g.element(a);
        let shifted = g.act_on_signal(&el, &x).unwrap();
        let f_shifted = table.gft(&shifted).unwrap();
        for (r, (fs, fo)) in f_shifted.iter().zip(&fx).enumerate() {
            let chi = table.matrix().get(r, a);
            prop_assert!((fs - chi * fo).norm() <= 1e-9);
        }

        let back = table.inverse_gft(&fx).unwrap();
        for (u, v) in back.iter().zip(&x) {
            prop_assert!((u - v).norm() <= 1e-10);
        }
    }

    #[test]
    fn bispectrum_is_translation_invariant_on_product_groups(
        (factors, a, _b, _c) in group_and_elements(),
    ) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let n = g.order();
        let sig: Vec<C64> = (0..n)
            .map(|i| C64::new(((i * i + 3) as f64).sin(), ((2 * i) as f64).cos() * 0.5))
            .collect();
        let table = CharacterTable::new(&g);
        let base = bispectrum(&table.gft(&sig).unwrap(), &table).unwrap();
        let el = g.element(a);
        let shifted = g.act_on_signal(&el, &sig).unwrap();
        let moved = bispectrum(&table.gft(&shifted).unwrap(), &table).unwrap();
        prop_assert!(base.max_abs_diff(&moved) <= 1e-9);
    }

    #[test]
    fn datasets_round_trip_through_the_text_format(
        factors in small_factor_lists(),
        exemplars in 1usize..5,
        seed in 0u64..500,
    ) {
        let g = FiniteAbelianGroup::new(&factors).unwrap();
        let ds = generate(&g, exemplars, 1.0, false, seed).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = bnn_core::OrbitDataset::read_from(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), ds.len());
        prop_assert_eq!(back.num_classes(), ds.num_classes());
        for (a, b) in back.samples().iter().zip(ds.samples()) {
            prop_assert_eq!(a.label, b.label);
            prop_assert_eq!(&a.signal, &b.signal);
        }
    }
}

proptest! {
    /// Scrambling transform phases while keeping magnitudes fixed
    /// preserves the power spectrum exactly; for real signals the
    /// scramble must be odd-symmetric to stay real.
    #[test]
    fn power_spectrum_survives_hermitian_phase_scrambling(
        phases in prop::collection::vec(-3.0f64..3.0, 3),
        seed in 0u64..500,
    ) {
        let g = FiniteAbelianGroup::new(&[8]).unwrap();
        let table = CharacterTable::new(&g);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<C64> = (0..8).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let fx = table.gft(&x).unwrap();

        let mut fy = fx.clone();
        for (k, phi) in phases.iter().enumerate() {
            let rot = C64::from_polar(1.0, *phi);
            fy[k + 1] *= rot;            // bins 1..=3
            fy[8 - (k + 1)] *= rot.conj(); // mirrored bins stay conjugate
        }
        let y = table.inverse_gft(&fy).unwrap();
        for v in &y {
            prop_assert!(v.im.abs() <= 1e-10, "scrambled signal stays real");
        }

        let (px, py) = (power_spectrum(&fx), power_spectrum(&table.gft(&y).unwrap()));
        for (a, b) in px.iter().zip(&py) {
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        }
    }
}

/// A concrete witness that equal power spectra do not pin down the
/// orbit: one scramble that moves the signal far from every translate.
#[test]
fn phase_scrambling_leaves_the_orbit() {
    let g = FiniteAbelianGroup::new(&[8]).unwrap();
    let table = CharacterTable::new(&g);
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let x: Vec<C64> = (0..8).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let fx = table.gft(&x).unwrap();
    let mut fy = fx.clone();
    for (k, phi) in [1.1f64, -0.7, 2.3].iter().enumerate() {
        let rot = C64::from_polar(1.0, *phi);
        fy[k + 1] *= rot;
        fy[8 - (k + 1)] *= rot.conj();
    }
    let y = table.inverse_gft(&fy).unwrap();

    let (px, py) = (power_spectrum(&fx), power_spectrum(&table.gft(&y).unwrap()));
    for (a, b) in px.iter().zip(&py) {
        assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }
    let d = orbit_distance(&y, &x, &g).unwrap();
    assert!(d > 0.1, "scrambled signal should leave the orbit, distance {d}");
}
