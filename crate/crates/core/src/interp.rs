//! Linear interpolation between the two endpoints of a window.

/// Value at position `i` (0-based) of the straight line through `(0, first)`
/// and `(n - 1, last)`. Returns `first` and `last` bit-exactly at the ends,
/// and `first` everywhere when the two are equal.
#[inline]
pub fn endpoint_line(first: f64, last: f64, n: usize, i: usize) -> f64 {
    debug_assert!(n >= 2 && i < n);
    if first == last {
        return first;
    }
    let t = i as f64 / (n - 1) as f64;
    (1.0 - t) * first + t * last
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_endpoints() {
        for &(a, b) in &[(0.1, 0.7), (123.456, -9.87), (1e-9, 3e9)] {
            for n in 2..50 {
                assert_eq!(endpoint_line(a, b, n, 0), a);
                assert_eq!(endpoint_line(a, b, n, n - 1), b);
            }
        }
    }

    #[test]
    fn midpoint() {
        assert_eq!(endpoint_line(100.0, 120.0, 3, 1), 110.0);
    }
}
