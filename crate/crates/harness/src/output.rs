//! Output files with provenance headers.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Comment lines identifying what produced a file. They embed every
/// result-affecting setting, so identical runs give identical bytes.
pub fn provenance(command: &str, config: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("genboot {} {command}", env!("CARGO_PKG_VERSION")),
        format!("seed: {}", config.seed),
        format!("config: {}", config.provenance_json()),
    ]
}

/// Writes one output file under a directory.
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
        Ok(OutputDir { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Creates `name` and hands a buffered writer to `body`.
    pub fn write<F>(&self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<std::fs::File>) -> std::io::Result<()>,
    {
        let path = self.path(name);
        let file = std::fs::File::create(&path).map_err(HarnessError::io(&path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(HarnessError::io(&path))?;
        Ok(path)
    }
}

pub fn write_comments(w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

/// File-name form of a coefficient, e.g. `0.5` → `0.5`, `-0.25` → `m0.25`.
pub fn phi_tag(phi: f64) -> String {
    let s = format!("{phi}");
    s.strip_prefix('-').map(|r| format!("m{r}")).unwrap_or(s)
}
