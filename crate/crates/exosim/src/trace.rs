//! Trace records, the CSV writer, and the end-of-run summary.

use std::io::{self, Write};

use serde::Serialize;

use crate::kernel::Tick;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// No rows at all (summary only).
    Off,
    /// Rows only for ticks carrying at least one event.
    Events,
    /// One row per tick.
    Full,
}

/// One simulation trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: Tick,
    pub t_s: f64,
    pub running_task: String,
    pub motor_state: &'static str,
    pub hand_state: &'static str,
    pub detected_id: u8,
    pub debounce_count: u32,
    pub range_mm: u16,
    pub tap_latched: bool,
    pub laser_on: bool,
    pub battery_v: f64,
    pub current_ma: f64,
    /// Semicolon-joined events for this tick; empty when quiet.
    pub event: String,
}

pub const TRACE_HEADER: &str = "tick,t_s,running_task,motor_state,hand_state,detected_id,debounce_count,range_mm,tap_latched,laser_on,battery_v,current_mA,event";

/// RFC 4180 quoting: fields containing separators or quotes are quoted,
/// embedded quotes doubled.
fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

impl TraceRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{:.3},{},{},{},{},{},{},{},{},{:.4},{:.0},{}",
            self.tick,
            self.t_s,
            csv_field(&self.running_task),
            self.motor_state,
            self.hand_state,
            self.detected_id,
            self.debounce_count,
            self.range_mm,
            self.tap_latched as u8,
            self.laser_on as u8,
            self.battery_v,
            self.current_ma,
            csv_field(&self.event),
        )
    }
}

/// Destination for trace rows; lets the runner stream to disk or collect
/// in memory without caring which.
pub trait TraceSink {
    fn record(&mut self, record: &TraceRecord);
}

/// Collects rows in memory; the test-side sink.
#[derive(Debug, Default)]
pub struct VecSink {
    pub records: Vec<TraceRecord>,
}

impl TraceSink for VecSink {
    fn record(&mut self, record: &TraceRecord) {
        self.records.push(record.clone());
    }
}

/// Streams CSV rows to a writer, header first.
pub struct CsvSink<W: Write> {
    writer: W,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(writer: W) -> Self {
        Self {
            writer,
            header_written: false,
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if !self.header_written {
            writeln!(self.writer, "{TRACE_HEADER}")?;
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> TraceSink for CsvSink<W> {
    fn record(&mut self, record: &TraceRecord) {
        if !self.header_written {
            writeln!(self.writer, "{TRACE_HEADER}").expect("trace write");
            self.header_written = true;
        }
        writeln!(self.writer, "{}", record.to_csv_row()).expect("trace write");
    }
}

/// Discards everything; fastest path for long runs.
pub struct NullSink;

impl TraceSink for NullSink {
    fn record(&mut self, _: &TraceRecord) {}
}

/// End-of-run accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub grasp_cycles: u32,
    pub releases_by_tap: u32,
    pub timeouts: u32,
    pub final_battery_v: f64,
    pub hibernated_at_s: Option<f64>,
    pub watchdog_expired: bool,
}

impl RunSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn to_text(&self) -> String {
        let hibernated = match self.hibernated_at_s {
            Some(t) => format!("{t:.3} s"),
            None => "never".to_string(),
        };
        format!(
            "grasp cycles:    {}\nreleases by tap: {}\ntimeouts:        {}\nfinal battery:   {:.4} V\nhibernated at:   {}\nwatchdog:        {}\n",
            self.grasp_cycles,
            self.releases_by_tap,
            self.timeouts,
            self.final_battery_v,
            hibernated,
            if self.watchdog_expired { "expired" } else { "ok" },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TraceRecord {
        TraceRecord {
            tick: 551,
            t_s: 0.551,
            running_task: "InferenceTask".into(),
            motor_state: "Idle",
            hand_state: "Rest",
            detected_id: 4,
            debounce_count: 6,
            range_mm: 255,
            tap_latched: false,
            laser_on: true,
            battery_v: 12.89,
            current_ma: 100.0,
            event: "trigger".into(),
        }
    }

    #[test]
    fn csv_row_layout_is_stable() {
        assert_eq!(
            record().to_csv_row(),
            "551,0.551,InferenceTask,Idle,Rest,4,6,255,0,1,12.8900,100,trigger"
        );
    }

    #[test]
    fn csv_quotes_fields_with_separators() {
        let mut r = record();
        r.event = "fault:cannot delay, task busy".into();
        assert!(r.to_csv_row().contains("\"fault:cannot delay, task busy\""));
    }

    #[test]
    fn csv_sink_writes_header_once() {
        let mut sink = CsvSink::new(Vec::new());
        sink.record(&record());
        sink.record(&record());
        let bytes = sink.finish().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], lines[2]);
    }

    #[test]
    fn empty_csv_still_has_header() {
        let sink = CsvSink::new(Vec::new());
        let bytes = sink.finish().unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{TRACE_HEADER}\n"));
    }

    #[test]
    fn summary_renders_json_and_text() {
        let summary = RunSummary {
            grasp_cycles: 1,
            releases_by_tap: 1,
            timeouts: 0,
            final_battery_v: 12.8877,
            hibernated_at_s: None,
            watchdog_expired: false,
        };
        let json = summary.to_json();
        assert!(json.contains("\"grasp_cycles\": 1"));
        assert!(json.contains("\"hibernated_at_s\": null"));
        let text = summary.to_text();
        assert!(text.contains("releases by tap: 1"));
        assert!(text.contains("hibernated at:   never"));
    }
}
