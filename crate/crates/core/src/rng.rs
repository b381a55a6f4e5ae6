use rand::Rng;

/// Standard normal draw (Box-Muller, one value per call).
pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 > f64::MIN_POSITIVE {
            let u2: f64 = rng.gen();
            return libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2);
        }
    }
}

/// Inverse-CDF draw from the density `p(s) ∝ s^-2` truncated to `[lo, hi]`.
pub(crate) fn truncated_inverse_square<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.gen();
    1.0 / (1.0 / lo - u * (1.0 / lo - 1.0 / hi))
}
