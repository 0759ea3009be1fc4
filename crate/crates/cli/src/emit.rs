//! Stream discipline: human-readable progress goes to standard error,
//! results go to standard out. With `--porcelain` the results become one
//! JSON object per line.

use serde_json::Value;

#[derive(Debug, Clone, Copy)]
pub struct Emitter {
    pub porcelain: bool,
}

impl Emitter {
    pub fn new(porcelain: bool) -> Emitter {
        Emitter { porcelain }
    }

    /// Progress note; never parsed by machines.
    pub fn note(&self, message: &str) {
        eprintln!("{message}");
    }

    /// A result line: `human` text normally, the `machine` object under
    /// `--porcelain`.
    pub fn result(&self, human: &str, machine: Value) {
        if self.porcelain {
            println!("{machine}");
        } else {
            println!("{human}");
        }
    }

    /// An error report. The machine form always reaches standard error so
    /// failures stay observable in scripts regardless of mode.
    pub fn error(&self, human: &str, machine: Value) {
        if self.porcelain {
            println!("{machine}");
        }
        eprintln!("{human}");
        eprintln!("{machine}");
    }
}
