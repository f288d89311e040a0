use crate::num::{norm, Real};

/// Tamed drift `b / (1 + delta^alpha |b|)`, written in place.
///
/// The result is a nonnegative multiple of `b` with norm at most
/// `min(delta^{-alpha}, |b|)`.
#[inline]
pub fn tame_in_place<F: Real>(b: &mut [F], delta: F, alpha: F) {
    let factor = F::one() + delta.powf(alpha) * norm(b);
    for v in b.iter_mut() {
        *v /= factor;
    }
}

/// Returning form of [`tame_in_place`].
pub fn tame_drift<F: Real>(b: &[F], delta: F, alpha: F) -> Vec<F> {
    let mut out = b.to_vec();
    tame_in_place(&mut out, delta, alpha);
    out
}
