//! Atomic file output with a `#` provenance line.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

/// `# abxkit <version> <command> seed=<seed> key=value ...`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub command: String,
    pub seed: Option<u64>,
    pub config: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            seed,
            config: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.config.push((key.to_string(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!("# abxkit {} {}", env!("CARGO_PKG_VERSION"), self.command);
        match self.seed {
            Some(seed) => s.push_str(&format!(" seed={seed}")),
            None => s.push_str(" seed=none"),
        }
        for (k, v) in &self.config {
            s.push_str(&format!(" {k}={}", v.replace(char::is_whitespace, "_")));
        }
        s
    }
}

/// Writes to a temporary file next to `path` and renames it into place, so
/// readers never see a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::Builder::new().prefix(".abxkit-").tempfile_in(&dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// [`write_atomic`] with the provenance line first.
pub fn write_with_header<F>(path: &Path, provenance: &Provenance, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    write_atomic(path, |w| {
        writeln!(w, "{}", provenance.line())?;
        body(w)
    })
}

pub(crate) fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}
