//! Centered moving averages over tensor series.

use crate::numerics::tensor::Tensor;
use crate::numerics::NumericsError;
use crate::scalar::Scalar;

/// Centered moving average with an odd `window`.
///
/// Near the ends the window is clipped to the available samples (index `i`
/// averages `max(0, i-h) ..= min(n-1, i+h)` with `h = window / 2`), so no
/// values are invented beyond the series. `window == 1` returns the input.
pub fn smooth_series<T: Scalar, S: Tensor<T>>(
    values: &[S],
    window: usize,
) -> Result<Vec<S>, NumericsError> {
    let n = values.len();
    if window == 0 || window.is_multiple_of(2) || window > n {
        return Err(NumericsError::InvalidWindow { window, len: n });
    }
    if window == 1 {
        return Ok(values.to_vec());
    }
    let h = window / 2;
    // prefix sums make each window O(entries) regardless of its width
    let mut prefix: Vec<S> = Vec::with_capacity(n + 1);
    prefix.push(values[0].zeros_like());
    for v in values {
        let next = prefix.last().expect("non-empty").plus(v);
        prefix.push(next);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(h);
            let hi = (i + h).min(n - 1);
            let count = T::from_usize_lossy(hi - lo + 1);
            let mut s = prefix[hi + 1].minus(&prefix[lo]);
            s.scale_mut(T::one() / count);
            s
        })
        .collect())
}

/// Odd integer nearest `sqrt(len)`, clamped to `[1, len]`. Ties (`sqrt(len)`
/// even) go to the smaller window.
pub fn default_window(len: usize) -> usize {
    if len == 0 {
        return 1;
    }
    let r = (len as f64).sqrt();
    let lower = (r.floor() as usize) | 1;
    let lower = if lower as f64 > r {
        lower.saturating_sub(2).max(1)
    } else {
        lower
    };
    let upper = lower + 2;
    let w = if (upper as f64 - r).abs() < (r - lower as f64).abs() {
        upper
    } else {
        lower
    };
    let mut w = w.min(len).max(1);
    if w % 2 == 0 {
        w -= 1;
    }
    w
}
