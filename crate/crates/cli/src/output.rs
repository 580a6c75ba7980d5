//! Output files: fixed float formatting, atomic writes, run manifest.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use liouville_core::Field;

/// Pretty JSON whose floats always carry 17 significant digits, so equal
/// values always print identically.
struct Fixed<'a>(PrettyFormatter<'a>);

impl Formatter for Fixed<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Write through a sibling temp file and rename over the target.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Timing {
    phase: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    threads: usize,
    config: &'a serde_json::Value,
    files: &'a [PathBuf],
    timings: &'a [Timing],
    wall_time: f64,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    notes: &'a serde_json::Map<String, serde_json::Value>,
}

/// Collects the files and timings of one command.
pub struct Run {
    pub dir: PathBuf,
    command: String,
    config: serde_json::Value,
    files: Vec<PathBuf>,
    timings: Vec<Timing>,
    notes: serde_json::Map<String, serde_json::Value>,
    start: Instant,
    phase: Instant,
}

impl Run {
    pub fn new(command: &str, dir: PathBuf, config: serde_json::Value) -> Self {
        let now = Instant::now();
        Run {
            dir,
            command: command.into(),
            config,
            files: Vec::new(),
            timings: Vec::new(),
            notes: serde_json::Map::new(),
            start: now,
            phase: now,
        }
    }

    /// Ends the current phase under `name`.
    pub fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.timings.push(Timing {
            phase: name.into(),
            seconds: (now - self.phase).as_secs_f64(),
        });
        self.phase = now;
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.notes.insert(key.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.text(name, &to_json(value)?)
    }

    pub fn field(&mut self, name: &str, field: &Field) -> Result<()> {
        self.text(name, &field.to_text())
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.files.push(PathBuf::from(name));
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.files.push(PathBuf::from("manifest.json"));
        let manifest = Manifest {
            command: &self.command,
            version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
            config: &self.config,
            files: &self.files,
            timings: &self.timings,
            wall_time: self.start.elapsed().as_secs_f64(),
            notes: &self.notes,
        };
        write_atomic(&self.dir.join("manifest.json"), &to_json(&manifest)?)
    }
}
