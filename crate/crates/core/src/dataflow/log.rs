use std::io::Write;

use serde::Serialize;

use crate::time::Instant;

pub const LOG_HEADER: [&str; 5] = ["instant_ms", "operator", "event", "timestamp", "detail"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogEntry {
    pub instant: Instant,
    pub operator: String,
    pub event: &'static str,
    pub timestamp: Option<u64>,
    pub detail: String,
}

/// Ordered record of everything a run did.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExecutionLog {
    entries: Vec<LogEntry>,
}

impl ExecutionLog {
    pub(crate) fn push(
        &mut self,
        instant: Instant,
        operator: &str,
        event: &'static str,
        timestamp: Option<u64>,
        detail: impl Into<String>,
    ) {
        self.entries.push(LogEntry {
            instant,
            operator: operator.to_owned(),
            event,
            timestamp,
            detail: detail.into(),
        });
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_operator<'a>(&'a self, op: &'a str) -> impl Iterator<Item = &'a LogEntry> + 'a {
        self.entries.iter().filter(move |e| e.operator == op)
    }

    pub fn events<'a>(&'a self, event: &'a str) -> impl Iterator<Item = &'a LogEntry> + 'a {
        self.entries.iter().filter(move |e| e.event == event)
    }

    /// `instant_ms,operator,event,timestamp,detail`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOG_HEADER)?;
        for e in &self.entries {
            w.write_record([
                format!("{:.3}", e.instant.as_ms()),
                e.operator.clone(),
                e.event.to_owned(),
                e.timestamp.map(|t| t.to_string()).unwrap_or_default(),
                e.detail.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}
