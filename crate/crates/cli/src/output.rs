//! Run manifests and number formatting shared by every subcommand.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Floats with 17 significant digits, everything else as pretty JSON.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt17(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// A float with 17 significant digits; non-finite values print as `NaN`/`inf`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits (non-finite become `null`).
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

/// Mesh parameters a run used.
#[derive(Clone, Debug, Serialize)]
pub struct MeshParams {
    pub h_max: f64,
    #[serde(rename = "L")]
    pub halfline_len: f64,
    pub n_dofs: usize,
    pub graded: bool,
}

/// Everything needed to rerun a command and reproduce its outputs.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub graph_file: Option<String>,
    pub graph_sha256: Option<String>,
    pub mesh: Option<MeshParams>,
    pub solver_config: Option<Value>,
    /// Resolved parameters after merging flags, config file and defaults.
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new() -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_else(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        RunManifest {
            command_line: std::env::args().collect(),
            graph_file: None,
            graph_sha256: None,
            mesh: None,
            solver_config: None,
            parameters: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }

    pub fn with_graph(mut self, path: &Path, bytes: &[u8]) -> Self {
        self.graph_file = Some(path.display().to_string());
        self.graph_sha256 = Some(sha256_hex(bytes));
        self
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn solver(mut self, cfg: &graphnls::Config) -> Self {
        self.solver_config = serde_json::to_value(cfg).ok();
        self
    }

    pub fn mesh(mut self, space: &graphnls::Space, graded: bool) -> Self {
        self.mesh = Some(MeshParams {
            h_max: space.mesh().h_max(),
            halfline_len: space.mesh().halfline_len(),
            n_dofs: space.n_dofs(),
            graded,
        });
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a command writes: `PREFIX.json` plus optional CSV siblings, or stdout.
pub struct Sink {
    prefix: Option<PathBuf>,
}

impl Sink {
    pub fn new(prefix: Option<PathBuf>) -> Self {
        Sink { prefix }
    }

    fn sibling(&self, suffix: &str) -> Option<PathBuf> {
        self.prefix.as_ref().map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        })
    }

    pub fn json_name(&self) -> Option<String> {
        self.sibling(".json").map(|p| file_name(&p))
    }

    pub fn csv_name(&self, suffix: &str) -> Option<String> {
        self.sibling(suffix).map(|p| file_name(&p))
    }

    /// Writes the JSON header, or prints it to stdout.
    pub fn json(&self, text: &str) -> Result<()> {
        match self.sibling(".json") {
            Some(p) => write(&p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// Writes a CSV whose first line references the JSON header, or prints it.
    pub fn csv(&self, suffix: &str, body: &str) -> Result<()> {
        match (self.sibling(suffix), self.json_name()) {
            (Some(p), Some(manifest)) => write(&p, &format!("# manifest: {manifest}\n{body}")),
            _ => {
                print!("{body}");
                Ok(())
            }
        }
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_significant_digits() {
        let s = to_json(&serde_json::json!({"x": 0.1, "n": 3, "bad": f64::NAN})).unwrap();
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"n\": 3"));
        assert!(s.contains("\"bad\": null"));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64(), Some(0.1));
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
