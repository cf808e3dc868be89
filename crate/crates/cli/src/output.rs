use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Twelve significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// CSV file whose first lines are `#` comments recording what produced it.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, command: &str, hash: &str, seed: u64, header: &[String]) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        let mut file = File::create(&path)?;
        writeln!(file, "# qhmm {command}")?;
        writeln!(file, "# config_sha256 {hash}")?;
        writeln!(file, "# seed {seed}")?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(header)?;
        Ok(Self { path, writer })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        self.writer.write_record(fields).map_err(std::io::Error::from)
    }

    pub fn finish(mut self) -> std::io::Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}
