//! Per-vehicle counters and their CSV dumps.

use std::io::{self, Write};

use crate::cmr::FilterKind;

pub const METRICS_HEADER: &str =
    "vehicle,generated,originated,forwarded,received,filtered,own_echoes,lost,sensed,busy_time_s";
pub const CDF_HEADER: &str = "metric,rank,value,cumulative_fraction";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleMetrics {
    pub id: u32,
    /// Beacons created by this vehicle.
    pub originated: u64,
    /// Frames re-broadcast on behalf of others.
    pub forwarded: u64,
    /// Intact frames accepted by the filter and processed.
    pub received: u64,
    /// Intact frames rejected by the filter.
    pub filtered: u64,
    /// Intact copies of this vehicle's own beacons relayed back to it.
    pub own_echoes: u64,
    /// Frames destroyed by overlap at this receiver.
    pub lost: u64,
    /// Frames above the reception threshold.
    pub sensed: u64,
    pub busy_time_s: f64,
}

impl VehicleMetrics {
    /// Frames put on air: own beacons plus forwards.
    pub fn generated(&self) -> u64 {
        self.originated + self.forwarded
    }

    pub fn loss_ratio(&self) -> f64 {
        if self.sensed == 0 {
            0.0
        } else {
            self.lost as f64 / self.sensed as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub filter: FilterKind,
    pub seed: u64,
    pub duration_s: f64,
    pub vehicles: Vec<VehicleMetrics>,
    /// Largest number of forwarding hops any transmitted copy had taken.
    pub max_forward_hops: u8,
}

impl SimMetrics {
    fn mean_of(&self, f: impl Fn(&VehicleMetrics) -> f64) -> f64 {
        if self.vehicles.is_empty() {
            return 0.0;
        }
        self.vehicles.iter().map(f).sum::<f64>() / self.vehicles.len() as f64
    }

    pub fn mean_received(&self) -> f64 {
        self.mean_of(|v| v.received as f64)
    }

    pub fn mean_generated(&self) -> f64 {
        self.mean_of(|v| v.generated() as f64)
    }

    pub fn mean_lost(&self) -> f64 {
        self.mean_of(|v| v.lost as f64)
    }

    pub fn mean_busy_time_s(&self) -> f64 {
        self.mean_of(|v| v.busy_time_s)
    }

    pub fn total_originated(&self) -> u64 {
        self.vehicles.iter().map(|v| v.originated).sum()
    }

    pub fn total_forwarded(&self) -> u64 {
        self.vehicles.iter().map(|v| v.forwarded).sum()
    }

    pub fn total_generated(&self) -> u64 {
        self.total_originated() + self.total_forwarded()
    }

    /// Lost over sensed, pooled across vehicles.
    pub fn loss_ratio(&self) -> f64 {
        let sensed: u64 = self.vehicles.iter().map(|v| v.sensed).sum();
        let lost: u64 = self.vehicles.iter().map(|v| v.lost).sum();
        if sensed == 0 {
            0.0
        } else {
            lost as f64 / sensed as f64
        }
    }

    /// Ascending samples of one per-vehicle quantity.
    pub fn cdf_samples(&self, f: impl Fn(&VehicleMetrics) -> f64) -> Vec<f64> {
        let mut s: Vec<f64> = self.vehicles.iter().map(f).collect();
        s.sort_by(f64::total_cmp);
        s
    }
}

fn row(
    w: &mut impl Write,
    label: &str,
    vals: [String; 8],
    busy: f64,
) -> io::Result<()> {
    writeln!(w, "{label},{},{busy:.6}", vals.join(","))
}

/// One row per vehicle plus a trailing `mean` row.
pub fn write_metrics_csv(m: &SimMetrics, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for v in &m.vehicles {
        let vals = [
            v.generated(),
            v.originated,
            v.forwarded,
            v.received,
            v.filtered,
            v.own_echoes,
            v.lost,
            v.sensed,
        ]
        .map(|x| x.to_string());
        row(&mut w, &v.id.to_string(), vals, v.busy_time_s)?;
    }
    let means = [
        m.mean_generated(),
        m.mean_of(|v| v.originated as f64),
        m.mean_of(|v| v.forwarded as f64),
        m.mean_received(),
        m.mean_of(|v| v.filtered as f64),
        m.mean_of(|v| v.own_echoes as f64),
        m.mean_lost(),
        m.mean_of(|v| v.sensed as f64),
    ]
    .map(|x| format!("{x:.3}"));
    row(&mut w, "mean", means, m.mean_busy_time_s())
}

/// Empirical CDFs of received, lost and busy time.
pub fn write_cdf_csv(m: &SimMetrics, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{CDF_HEADER}")?;
    let series: [(&str, Vec<f64>); 3] = [
        ("received", m.cdf_samples(|v| v.received as f64)),
        ("lost", m.cdf_samples(|v| v.lost as f64)),
        ("busy_time_s", m.cdf_samples(|v| v.busy_time_s)),
    ];
    for (name, samples) in series {
        let n = samples.len() as f64;
        for (i, x) in samples.iter().enumerate() {
            writeln!(w, "{name},{},{x:.6},{:.6}", i + 1, (i + 1) as f64 / n)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SimMetrics {
        SimMetrics {
            filter: FilterKind::Cmr,
            seed: 1,
            duration_s: 1.0,
            vehicles: vec![
                VehicleMetrics {
                    id: 0,
                    originated: 10,
                    forwarded: 2,
                    received: 4,
                    lost: 1,
                    sensed: 5,
                    busy_time_s: 0.002,
                    ..Default::default()
                },
                VehicleMetrics {
                    id: 1,
                    originated: 10,
                    received: 2,
                    sensed: 2,
                    ..Default::default()
                },
            ],
            max_forward_hops: 1,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_metrics_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "0,12,10,2,4,0,0,1,5,0.002000");
        assert_eq!(lines[3], "mean,11.000,10.000,1.000,3.000,0.000,0.000,0.500,3.500,0.001000");
        let cols = METRICS_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn cdf_is_sorted_and_ends_at_one() {
        let mut buf = Vec::new();
        write_cdf_csv(&sample(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rec: Vec<&str> = text.lines().filter(|l| l.starts_with("received,")).collect();
        assert_eq!(rec, ["received,1,2.000000,0.500000", "received,2,4.000000,1.000000"]);
        assert_eq!(text.lines().count(), 1 + 6);
    }

    #[test]
    fn aggregates() {
        let m = sample();
        assert_eq!(m.total_generated(), 22);
        assert!((m.loss_ratio() - 1.0 / 7.0).abs() < 1e-12);
        assert_eq!(m.vehicles[1].loss_ratio(), 0.0);
    }
}
