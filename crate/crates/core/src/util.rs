/// Splits `total` into integer parts proportional to `weights` (largest-remainder
/// rounding). Ties in the remainder go to the lower index. Weights must be
/// non-negative with a positive sum.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    debug_assert!(sum > 0.0);
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Wall-clock timer. Reads zero on targets without a monotonic clock.
#[derive(Debug, Clone, Copy)]
pub struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    pub fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_proportions() {
        assert_eq!(largest_remainder(10, &[0.6, 0.2, 0.2]), vec![6, 2, 2]);
        assert_eq!(largest_remainder(7, &[1.0]), vec![7]);
    }

    #[test]
    fn remainders_distributed_to_largest_fraction() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(5, &[0.15, 0.85]), vec![1, 4]);
        assert_eq!(largest_remainder(3, &[0.0, 1.0, 0.0]), vec![0, 3, 0]);
    }
}
