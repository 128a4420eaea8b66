//! Fixtures shared by the criterion benchmarks in `benches/`.

use wefe_core::Jet;

/// A jet with every coefficient set from a fixed sequence, so that no
/// product term is trivially zero.
pub fn dense_jet(dim: usize, order: usize, seed: u32) -> Jet {
    let len = Jet::zero(dim, order).coefficients().len();
    let coeffs = (0..len)
        .map(|k| {
            let t = (k as u32).wrapping_mul(2_654_435_761).wrapping_add(seed);
            0.5 + f64::from(t % 1000) / 1000.0
        })
        .collect();
    Jet::from_coefficients(dim, order, coeffs)
}

/// A point inside the sampling box of each built-in family used in the benches.
pub fn reference_point(family: &str) -> &'static [f64] {
    match family {
        "kundt-3d" => &[0.7, 1.3, 0.5],
        "ds-density" => &[0.1, 0.9, 0.3],
        "warped-m2" => &[0.2, 0.8, 0.5, 0.4],
        _ => &[0.4, 1.1, -0.8],
    }
}
