use std::time::Duration;

use serde::Serialize;

/// Durations of one kind of backend round.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LatencyStats {
    samples_ms: Vec<f64>,
}

impl LatencyStats {
    pub fn record(&mut self, elapsed: Duration) {
        self.samples_ms.push(elapsed.as_secs_f64() * 1000.0);
    }

    pub fn rounds(&self) -> usize {
        self.samples_ms.len()
    }

    pub fn mean_ms(&self) -> Option<f64> {
        (!self.samples_ms.is_empty()).then(|| self.samples_ms.iter().sum::<f64>() / self.samples_ms.len() as f64)
    }

    /// Nearest-rank 95th percentile.
    pub fn p95_ms(&self) -> Option<f64> {
        if self.samples_ms.is_empty() {
            return None;
        }
        let mut sorted = self.samples_ms.clone();
        sorted.sort_by(f64::total_cmp);
        let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
        Some(sorted[rank - 1])
    }

    pub fn max_ms(&self) -> Option<f64> {
        self.samples_ms.iter().copied().reduce(f64::max)
    }

    pub fn merge(&mut self, other: &LatencyStats) {
        self.samples_ms.extend_from_slice(&other.samples_ms);
    }
}

fn windows_label(n: usize) -> String {
    if n == 1 {
        "1 window".to_string()
    } else {
        format!("{n} windows")
    }
}

/// Average duration per stage, one row per stage, seconds to two decimals,
/// with millisecond detail alongside.
pub fn latency_table(detection: &LatencyStats, classification: &LatencyStats, n_windows: usize) -> String {
    let mut out = format!(
        "{:<16}{:<12}{:>10}{:>12}{:>12}{:>12}{:>8}\n",
        "stage", "windows", "mean", "mean ms", "p95 ms", "max ms", "rounds"
    );
    let mut notes = Vec::new();
    for (stage, windows, stats) in [
        ("Detection", "-".to_string(), detection),
        ("Classification", windows_label(n_windows), classification),
    ] {
        match stats.mean_ms() {
            Some(mean) => out.push_str(&format!(
                "{:<16}{:<12}{:>10}{:>12.3}{:>12.3}{:>12.3}{:>8}\n",
                stage,
                windows,
                format!("{:.2} s", mean / 1000.0),
                mean,
                stats.p95_ms().unwrap_or(mean),
                stats.max_ms().unwrap_or(mean),
                stats.rounds()
            )),
            None => notes.push(format!("{stage}: no rounds recorded")),
        }
    }
    for note in notes {
        out.push_str(&note);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(ms: &[u64]) -> LatencyStats {
        let mut s = LatencyStats::default();
        for &m in ms {
            s.record(Duration::from_millis(m));
        }
        s
    }

    #[test]
    fn summary_statistics() {
        let s = stats(&(1..=100).collect::<Vec<_>>());
        assert!((s.mean_ms().unwrap() - 50.5).abs() < 1e-9);
        assert!((s.p95_ms().unwrap() - 95.0).abs() < 1e-9);
        assert!((s.max_ms().unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(LatencyStats::default().mean_ms(), None);
    }

    #[test]
    fn table_rows_and_notes() {
        let table = latency_table(&stats(&[910, 910]), &LatencyStats::default(), 3);
        assert!(table.contains("Detection"));
        assert!(table.contains("0.91 s"));
        assert!(table.contains("Classification: no rounds recorded"));

        let table = latency_table(&stats(&[5]), &stats(&[1160]), 1);
        assert!(table.contains("1 window"));
        assert!(table.contains("1.16 s"));

        let empty = latency_table(&LatencyStats::default(), &LatencyStats::default(), 5);
        assert!(empty.contains("Detection: no rounds recorded"));
    }
}
