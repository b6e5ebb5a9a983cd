use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const GAIN_SCHEMA_VERSION: u32 = 1;
pub const SWEEP_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct GainFile {
    pub schema_version: u32,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GainInput {
    Wrapped(GainFile),
    Rows(Vec<Vec<f64>>),
}

pub fn read_gain(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let rows = match serde_json::from_str::<GainInput>(&text).with_context(|| format!("parsing {}", path.display()))? {
        GainInput::Wrapped(g) => {
            if g.schema_version != GAIN_SCHEMA_VERSION {
                bail!("{}: unsupported gain schema {}", path.display(), g.schema_version);
            }
            g.k
        }
        GainInput::Rows(r) => r,
    };
    let cols = rows.first().map_or(0, Vec::len);
    robsparse::serde_mat::from_rows(&rows, cols).with_context(|| format!("gain in {}", path.display()))
}

pub fn gain_json(k: &DMatrix<f64>) -> String {
    let f = GainFile {
        schema_version: GAIN_SCHEMA_VERSION,
        k: robsparse::serde_mat::to_rows(k),
    };
    serde_json::to_string_pretty(&f).expect("gain serializes")
}

pub fn matrix_csv(title: &str, m: &DMatrix<f64>) -> String {
    format!("# robsparse {title} v{GAIN_SCHEMA_VERSION}: {} rows x {} cols\n{}", m.nrows(), m.ncols(), robsparse::power::matrix_csv(m))
}

/// Files staged in memory and written together. Each file goes through a
/// temporary in the target directory and is renamed into place; if any
/// write fails the ones already renamed are removed again.
#[derive(Default)]
pub struct Staged {
    files: Vec<(String, String)>,
}

impl Staged {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut done = Vec::new();
        for (name, contents) in self.files {
            let target = dir.join(&name);
            let res = (|| -> Result<()> {
                let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
                tmp.write_all(contents.as_bytes())?;
                tmp.persist(&target)?;
                Ok(())
            })();
            if let Err(e) = res {
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e.context(format!("writing {}", target.display())));
            }
            done.push(target);
        }
        Ok(done)
    }
}

/// `i-j,k-l` (1-based) into 0-based pairs; `all` expands to every pair.
pub fn parse_links(spec: &str, n_gen: usize) -> Result<Vec<(usize, usize)>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    if spec.eq_ignore_ascii_case("all") {
        return Ok((0..n_gen).flat_map(|i| (i + 1..n_gen).map(move |j| (i, j))).collect());
    }
    let mut out = Vec::new();
    for item in spec.split(',') {
        let (a, b) = item
            .trim()
            .split_once('-')
            .with_context(|| format!("link `{item}` is not of the form i-j"))?;
        let a: usize = a.trim().parse().with_context(|| format!("bad generator index in `{item}`"))?;
        let b: usize = b.trim().parse().with_context(|| format!("bad generator index in `{item}`"))?;
        if a == 0 || b == 0 || a > n_gen || b > n_gen {
            bail!("link `{item}` out of range 1..={n_gen}");
        }
        if a == b {
            bail!("link `{item}` joins a generator to itself");
        }
        out.push((a - 1, b - 1));
    }
    Ok(out)
}

pub fn parse_rho_list(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().with_context(|| format!("bad rho_rel `{s}`"))?;
            if !(v.is_finite() && v >= 0.0) {
                bail!("rho_rel must be nonnegative, got {v}");
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links() {
        assert_eq!(parse_links("all", 3).unwrap(), vec![(0, 1), (0, 2), (1, 2)]);
        assert_eq!(parse_links(" 2-3, 1-3 ", 3).unwrap(), vec![(1, 2), (0, 2)]);
        assert!(parse_links("", 3).unwrap().is_empty());
        assert!(parse_links("0-1", 3).is_err());
        assert!(parse_links("2-2", 3).is_err());
        assert!(parse_links("1-4", 3).is_err());
        assert!(parse_links("12", 3).is_err());
    }

    #[test]
    fn rho_list() {
        assert_eq!(parse_rho_list("0,0.1, 0.3").unwrap(), vec![0.0, 0.1, 0.3]);
        assert!(parse_rho_list("-0.1").is_err());
        assert!(parse_rho_list("x").is_err());
    }

    #[test]
    fn gain_round_trip() {
        let k = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 0.0, 1e-17, 3.0, -0.1]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.json");
        std::fs::write(&p, gain_json(&k)).unwrap();
        assert_eq!(read_gain(&p).unwrap(), k);
        std::fs::write(&p, "[[1.0, 2.0]]").unwrap();
        assert_eq!(read_gain(&p).unwrap(), DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        std::fs::write(&p, "[[1.0, 2.0], [3.0]]").unwrap();
        assert!(read_gain(&p).is_err());
    }
}
