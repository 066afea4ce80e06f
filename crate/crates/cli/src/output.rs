use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

/// Sink for one output stream: a JSON header line followed by CSV rows.
pub struct Output {
    inner: Box<dyn Write>,
}

impl Output {
    pub fn open(path: Option<&Path>) -> io::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        Ok(Output { inner })
    }

    pub fn header<C: Serialize>(
        &mut self,
        command: &str,
        config: &C,
        seed: Option<u64>,
        deterministic: bool,
    ) -> io::Result<()> {
        let mut h = json!({
            "command": command,
            "config": config,
            "version": gtkernel::VERSION,
            "seed": seed,
        });
        if !deterministic {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            h["timestamp"] = Value::from(now);
        }
        writeln!(self.inner, "{h}")
    }

    pub fn line(&mut self, s: &str) -> io::Result<()> {
        writeln!(self.inner, "{s}")
    }

    pub fn raw(&mut self, s: &str) -> io::Result<()> {
        self.inner.write_all(s.as_bytes())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}
