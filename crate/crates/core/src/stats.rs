//! Message statistics and the end-of-run report.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::message::MessageId;
use crate::SimTime;

/// Row labels of the message stats report, in report order.
pub const REPORT_LABELS: [&str; 10] =
    ["sim_time", "created", "started", "relayed", "aborted", "dropped", "delivery_prob", "delay_prob", "hopcount_avg", "buffertime_avg"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatsEvent {
    Created(MessageId),
    /// A transfer began.
    Started,
    /// A transfer completed (including deliveries).
    Relayed,
    /// A transfer was cut by a link break.
    Aborted,
    /// A copy left a buffer by expiry, eviction, rejection or discard.
    Dropped,
    /// A copy reached its destination.
    Delivered {
        id: MessageId,
        latency: f64,
        ttl: f64,
        hops: u32,
    },
    /// A buffer occupancy ended (or was closed at sim end).
    Buffered {
        duration: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("accounting mismatch: started {started} != relayed {relayed} + aborted {aborted} + in flight {in_flight}")]
    TransferMismatch { started: u64, relayed: u64, aborted: u64, in_flight: u64 },
    #[error("delivered {delivered} exceeds created {created}")]
    DeliveredExceedsCreated { delivered: u64, created: u64 },
    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub sim_time: f64,
    pub created: u64,
    pub started: u64,
    pub relayed: u64,
    pub aborted: u64,
    pub dropped: u64,
    pub delivered: u64,
    /// Transfers still running when the run ended.
    pub in_flight: u64,
    /// Distinct delivered messages over created messages.
    pub delivery_prob: f64,
    /// Mean over delivered messages of latency / TTL.
    pub delay_prob: f64,
    /// Mean hop count of first deliveries.
    pub hopcount_avg: f64,
    /// Mean buffer residence time in seconds.
    pub buffertime_avg: f64,
    /// Mean first-delivery latency in seconds.
    pub latency_avg: f64,
    /// Set when nothing was created; ratios are then reported as 0.
    pub no_messages: bool,
    /// Set when nothing was delivered; delay and hop means are then 0.
    pub no_deliveries: bool,
}

impl StatsReport {
    /// Value of a report row by its label (see [`REPORT_LABELS`]).
    pub fn value(&self, label: &str) -> Option<f64> {
        Some(match label {
            "sim_time" => self.sim_time,
            "created" => self.created as f64,
            "started" => self.started as f64,
            "relayed" => self.relayed as f64,
            "aborted" => self.aborted as f64,
            "dropped" => self.dropped as f64,
            "delivered" => self.delivered as f64,
            "in_flight" => self.in_flight as f64,
            "delivery_prob" => self.delivery_prob,
            "delay_prob" => self.delay_prob,
            "hopcount_avg" => self.hopcount_avg,
            "buffertime_avg" => self.buffertime_avg,
            "latency_avg" => self.latency_avg,
            _ => return None,
        })
    }
}

/// One cumulative sample of the time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub time: f64,
    pub created: u64,
    pub delivered: u64,
    pub delivery_prob: f64,
    pub delay_prob: f64,
    pub latency_avg: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StatsCollector {
    created: u64,
    started: u64,
    relayed: u64,
    aborted: u64,
    dropped: u64,
    delivered: BTreeSet<MessageId>,
    latencies: Vec<f64>,
    delay_ratios: Vec<f64>,
    hops: Vec<u32>,
    buffer_times: Vec<f64>,
}

/// Order-independent mean: values are summed in sorted order so that the
/// result does not depend on the order events were recorded in.
fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

impl StatsCollector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: StatsEvent) {
        match event {
            StatsEvent::Created(_) => self.created += 1,
            StatsEvent::Started => self.started += 1,
            StatsEvent::Relayed => self.relayed += 1,
            StatsEvent::Aborted => self.aborted += 1,
            StatsEvent::Dropped => self.dropped += 1,
            StatsEvent::Delivered { id, latency, ttl, hops } => {
                if self.delivered.insert(id) {
                    self.latencies.push(latency);
                    self.delay_ratios.push(latency / ttl);
                    self.hops.push(hops);
                }
            }
            StatsEvent::Buffered { duration } => self.buffer_times.push(duration),
        }
    }

    pub fn created(&self) -> u64 {
        self.created
    }

    pub fn delivered(&self) -> u64 {
        self.delivered.len() as u64
    }

    pub fn is_delivered(&self, id: MessageId) -> bool {
        self.delivered.contains(&id)
    }

    pub fn snapshot(&self, now: SimTime) -> TimeseriesRow {
        let delivered = self.delivered();
        TimeseriesRow {
            time: now,
            created: self.created,
            delivered,
            delivery_prob: if self.created > 0 { delivered as f64 / self.created as f64 } else { 0.0 },
            delay_prob: mean(&self.delay_ratios),
            latency_avg: mean(&self.latencies),
        }
    }

    /// Builds the report and checks the accounting invariants. `in_flight`
    /// is the number of transfers the simulator still had running.
    pub fn finalize(&self, sim_time: SimTime, in_flight: u64) -> Result<StatsReport, StatsError> {
        if self.started != self.relayed + self.aborted + in_flight {
            return Err(StatsError::TransferMismatch { started: self.started, relayed: self.relayed, aborted: self.aborted, in_flight });
        }
        let delivered = self.delivered();
        if delivered > self.created {
            return Err(StatsError::DeliveredExceedsCreated { delivered, created: self.created });
        }
        let hops: Vec<f64> = self.hops.iter().map(|&h| h as f64).collect();
        let report = StatsReport {
            sim_time,
            created: self.created,
            started: self.started,
            relayed: self.relayed,
            aborted: self.aborted,
            dropped: self.dropped,
            delivered,
            in_flight,
            delivery_prob: if self.created > 0 { delivered as f64 / self.created as f64 } else { 0.0 },
            delay_prob: mean(&self.delay_ratios),
            hopcount_avg: mean(&hops),
            buffertime_avg: mean(&self.buffer_times),
            latency_avg: mean(&self.latencies),
            no_messages: self.created == 0,
            no_deliveries: delivered == 0,
        };
        for (name, value) in [("delivery_prob", report.delivery_prob), ("delay_prob", report.delay_prob)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(StatsError::OutOfRange { name, value });
            }
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delivered(id: u32, latency: f64, ttl: f64, hops: u32) -> StatsEvent {
        StatsEvent::Delivered { id: MessageId(id), latency, ttl, hops }
    }

    #[test]
    fn empty_stream_gives_zero_report() {
        let r = StatsCollector::new().finalize(0.0, 0).unwrap();
        assert_eq!(r.created, 0);
        assert_eq!(r.delivery_prob, 0.0);
        assert_eq!(r.delay_prob, 0.0);
        assert!(r.no_messages && r.no_deliveries);
    }

    #[test]
    fn first_delivery_only() {
        let mut s = StatsCollector::new();
        s.record(StatsEvent::Created(MessageId(1)));
        for _ in 0..2 {
            s.record(StatsEvent::Started);
            s.record(StatsEvent::Relayed);
        }
        s.record(delivered(1, 100.0, 1000.0, 2));
        s.record(delivered(1, 300.0, 1000.0, 5));
        let r = s.finalize(500.0, 0).unwrap();
        assert_eq!(r.relayed, 2);
        assert_eq!(r.delivered, 1);
        assert_eq!(r.hopcount_avg, 2.0);
        assert_eq!(r.latency_avg, 100.0);
    }

    #[test]
    fn delay_ratio_definition() {
        let mut s = StatsCollector::new();
        s.record(StatsEvent::Created(MessageId(1)));
        s.record(delivered(1, 3600.0, 43200.0, 1));
        let r = s.finalize(43200.0, 0).unwrap();
        assert!((r.delay_prob - 1.0 / 12.0).abs() < 1e-15);
        assert!((r.delay_prob - 0.0833).abs() < 1e-4);
    }

    #[test]
    fn delivery_ratio_matches_reported_table_value() {
        let mut s = StatsCollector::new();
        for i in 0..1461 {
            s.record(StatsEvent::Created(MessageId(i)));
        }
        for i in 0..341 {
            s.record(delivered(i, 10.0, 100.0, 1));
        }
        let r = s.finalize(43200.0, 0).unwrap();
        assert_eq!(format!("{:.4}", r.delivery_prob), "0.2334");
    }

    #[test]
    fn transfer_accounting_is_checked() {
        let mut s = StatsCollector::new();
        for _ in 0..3 {
            s.record(StatsEvent::Started);
        }
        s.record(StatsEvent::Relayed);
        s.record(StatsEvent::Aborted);
        assert!(s.finalize(10.0, 1).is_ok());
        assert!(matches!(s.finalize(10.0, 0), Err(StatsError::TransferMismatch { .. })));
    }

    #[test]
    fn delivered_cannot_exceed_created() {
        let mut s = StatsCollector::new();
        s.record(delivered(1, 1.0, 10.0, 1));
        assert!(matches!(s.finalize(10.0, 0), Err(StatsError::DeliveredExceedsCreated { .. })));
    }

    #[test]
    fn buffer_time_mean() {
        let mut s = StatsCollector::new();
        s.record(StatsEvent::Buffered { duration: 300.0 });
        s.record(StatsEvent::Buffered { duration: 100.0 });
        assert_eq!(s.finalize(0.0, 0).unwrap().buffertime_avg, 200.0);
    }
}
