//! Parallel reductions whose results do not depend on scheduling.

use rayon::prelude::*;

const CHUNK: usize = 2048;

/// `sum_{i < n} f(i)`, summed in fixed chunks so the rounding is reproducible.
pub fn sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let partial: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum::<f64>())
        .collect();
    partial.into_iter().sum()
}

/// Like [`sum`] for several accumulators at once.
pub fn sum_n<const K: usize>(n: usize, f: impl Fn(usize) -> [f64; K] + Sync) -> [f64; K] {
    let partial: Vec<[f64; K]> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; K];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let v = f(i);
                for k in 0..K {
                    acc[k] += v[k];
                }
            }
            acc
        })
        .collect();
    let mut acc = [0.0; K];
    for p in partial {
        for k in 0..K {
            acc[k] += p[k];
        }
    }
    acc
}

/// Largest `f(i)`; ties resolve to the smallest index.
pub fn argmax(n: usize, f: impl Fn(usize) -> f64 + Sync) -> Option<(usize, f64)> {
    (0..n)
        .into_par_iter()
        .map(|i| (i, f(i)))
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        })
}

#[cfg(test)]
mod tests {
    #[test]
    fn sums_match_sequential_order_of_chunks() {
        let n = 10_001;
        let a = super::sum(n, |i| 1.0 / (i as f64 + 1.0));
        let b = super::sum(n, |i| 1.0 / (i as f64 + 1.0));
        assert_eq!(a.to_bits(), b.to_bits());
        let [s, c] = super::sum_n(n, |i| [i as f64, 1.0]);
        assert_eq!(c, n as f64);
        assert_eq!(s, (n * (n - 1) / 2) as f64);
        assert_eq!(super::argmax(5, |i| [1.0, 3.0, 3.0, 0.0, 2.0][i]), Some((1, 3.0)));
    }
}
