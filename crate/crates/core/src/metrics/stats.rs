use crate::error::{Error, Result};

/// Mean ToR residence over a window: occupancy integral over inserts.
pub fn avg_tor_latency(occupancy_delta: u64, inserts_delta: u64) -> Result<f64> {
    if inserts_delta == 0 {
        return Err(Error::NoMeasurement("no ToR inserts in window"));
    }
    Ok(occupancy_delta as f64 / inserts_delta as f64)
}

/// Bytes per second moved in `cycles` at `clock_hz`.
pub fn bandwidth(bytes: u64, cycles: u64, clock_hz: f64) -> f64 {
    if cycles == 0 {
        return 0.0;
    }
    bytes as f64 * clock_hz / cycles as f64
}

/// Nearest-rank percentiles: the smallest sample with at least `p`% of
/// samples at or below it. `ps` are in percent, `0 < p <= 100`.
pub fn percentiles(latencies: &[u64], ps: &[f64]) -> Result<Vec<u64>> {
    if latencies.is_empty() {
        return Err(Error::NoMeasurement("percentile of zero samples"));
    }
    let mut v = latencies.to_vec();
    v.sort_unstable();
    let n = v.len();
    Ok(ps
        .iter()
        .map(|&p| {
            let rank = ((p / 100.0) * n as f64).ceil() as usize;
            v[rank.clamp(1, n) - 1]
        })
        .collect())
}

pub fn mean(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tor_latency_examples() {
        assert_eq!(avg_tor_latency(100, 1).unwrap(), 100.0);
        assert_eq!(avg_tor_latency(400, 2).unwrap(), 200.0);
        assert!(avg_tor_latency(5, 0).is_err());
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(bandwidth(0, 1000, 1e9), 0.0);
        // 16 lines per 100 cycles at 64 B and 1 GHz.
        assert!((bandwidth(16 * 64, 100, 1e9) - 10.24e9).abs() < 1e-3);
        assert!((bandwidth(8 * 16 * 64, 100, 1e9) - 81.92e9).abs() < 1e-3);
    }

    #[test]
    fn nearest_rank() {
        assert_eq!(percentiles(&[100; 7], &[99.0]).unwrap(), vec![100]);
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentiles(&v, &[50.0, 99.0, 100.0, 1.0]).unwrap(), vec![50, 99, 100, 1]);
        assert_eq!(percentiles(&[3, 1, 2], &[50.0]).unwrap(), vec![2]);
        assert!(percentiles(&[], &[50.0]).is_err());
    }
}
