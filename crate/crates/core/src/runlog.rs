//! JSON-lines run logging shared by the solvers.

use std::io::Write;
use std::sync::{Arc, Mutex};

use serde::Serialize;

/// Thread-safe sink for JSON-lines progress records. A disabled logger
/// costs one branch per record.
#[derive(Clone, Default)]
pub struct RunLogger {
    sink: Option<Arc<Mutex<Box<dyn Write + Send>>>>,
}

impl RunLogger {
    pub fn disabled() -> Self {
        RunLogger { sink: None }
    }

    pub fn to_writer(w: Box<dyn Write + Send>) -> Self {
        RunLogger { sink: Some(Arc::new(Mutex::new(w))) }
    }

    pub fn is_enabled(&self) -> bool {
        self.sink.is_some()
    }

    /// Writes one record as a JSON line. IO errors are swallowed: logging
    /// must never fail a solve.
    pub fn log<T: Serialize>(&self, record: &T) {
        if let Some(sink) = &self.sink {
            if let Ok(mut w) = sink.lock() {
                if let Ok(line) = serde_json::to_string(record) {
                    let _ = writeln!(w, "{line}");
                    let _ = w.flush();
                }
            }
        }
    }
}
