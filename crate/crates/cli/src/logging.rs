//! Line-delimited JSON records on stderr.

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::{json, Map, Value};
use std::io::Write;
use std::time::{SystemTime, UNIX_EPOCH};

struct JsonLogger {
    level: LevelFilter,
}

fn timestamp() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_line(mut record: Map<String, Value>) {
    record.insert("ts".into(), json!(timestamp()));
    let line = Value::Object(record).to_string();
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

impl Log for JsonLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let mut m = Map::new();
        m.insert("level".into(), json!(record.level().as_str()));
        m.insert("target".into(), json!(record.target()));
        m.insert("msg".into(), json!(record.args().to_string()));
        write_line(m);
    }

    fn flush(&self) {}
}

pub fn init(level: LevelFilter) {
    if log::set_boxed_logger(Box::new(JsonLogger { level })).is_ok() {
        log::set_max_level(level);
    }
}

/// A structured event; `fields` must be a JSON object.
pub fn event(level: Level, name: &str, fields: Value) {
    if level > log::max_level() {
        return;
    }
    let mut m = match fields {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    m.insert("level".into(), json!(level.as_str()));
    m.insert("event".into(), json!(name));
    write_line(m);
}

/// Always written, whatever the log level.
pub fn error_record(fields: Value) {
    let mut m = match fields {
        Value::Object(m) => m,
        _ => Map::new(),
    };
    m.insert("level".into(), json!("ERROR"));
    m.insert("event".into(), json!("error"));
    write_line(m);
}
