use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use log::{Level, LevelFilter, Log, Metadata, Record};

/// Writes records to stderr and, once a run directory exists, to its log.
struct TeeLogger {
    quiet: bool,
    file: Mutex<Option<File>>,
}

static LOGGER: TeeLogger = TeeLogger {
    quiet: false,
    file: Mutex::new(None),
};

static QUIET_LOGGER: TeeLogger = TeeLogger {
    quiet: true,
    file: Mutex::new(None),
};

impl Log for TeeLogger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= Level::Info
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = format!(
            "[{}] {}",
            record.level().as_str().to_lowercase(),
            record.args()
        );
        if !self.quiet {
            eprintln!("{line}");
        }
        if let Some(f) = self.file.lock().expect("log lock").as_mut() {
            let _ = writeln!(f, "{line}");
        }
    }

    fn flush(&self) {
        if let Some(f) = self.file.lock().expect("log lock").as_mut() {
            let _ = f.flush();
        }
    }
}

fn active(quiet: bool) -> &'static TeeLogger {
    if quiet {
        &QUIET_LOGGER
    } else {
        &LOGGER
    }
}

pub fn init(quiet: bool) {
    if log::set_logger(active(quiet)).is_ok() {
        log::set_max_level(LevelFilter::Info);
    }
}

/// Starts mirroring records into `path`.
pub fn attach_file(quiet: bool, path: &Path) -> std::io::Result<()> {
    let file = File::create(path)?;
    *active(quiet).file.lock().expect("log lock") = Some(file);
    Ok(())
}
