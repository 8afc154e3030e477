use crate::error::{Error, Result};
use crate::sim::{TcspcHistogram, TimeGrid};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Per-pixel photon-arrival histograms of a scanned field.
///
/// `counts` is bin-fastest, then column, then row.
#[derive(Debug, Clone, PartialEq)]
pub struct FlimCube {
    pub width_px: usize,
    pub height_px: usize,
    pub grid: TimeGrid,
    pub counts: Vec<u32>,
    pub pixel_size_nm: f64,
    pub seed: Option<u64>,
    pub photons_per_pixel: Option<f64>,
}

impl FlimCube {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(|e| Error::Format(e.to_string()))?;
        let expected = self.width_px * self.height_px * self.grid.n_bins;
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Format("cube has zero width or height".into()));
        }
        if self.counts.len() != expected {
            return Err(Error::Format(format!(
                "cube payload holds {} counts, header implies {expected}",
                self.counts.len()
            )));
        }
        if !(self.pixel_size_nm > 0.0) {
            return Err(Error::Format("pixel_size_nm must be > 0".into()));
        }
        Ok(())
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[u32] {
        let nb = self.grid.n_bins;
        let start = (row * self.width_px + col) * nb;
        &self.counts[start..start + nb]
    }

    pub fn pixel_histogram(&self, row: usize, col: usize) -> TcspcHistogram {
        TcspcHistogram {
            grid: self.grid,
            counts: self.pixel(row, col).to_vec(),
        }
    }

    /// Sub-cube of rows `r0..r1` and columns `c0..c1`.
    pub fn crop(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() || rows.end > self.height_px || cols.end > self.width_px {
            return Err(Error::Usage(format!(
                "crop {rows:?}×{cols:?} is outside the {}×{} cube",
                self.height_px, self.width_px
            )));
        }
        let mut counts = Vec::with_capacity(rows.len() * cols.len() * self.grid.n_bins);
        for r in rows.clone() {
            for c in cols.clone() {
                counts.extend_from_slice(self.pixel(r, c));
            }
        }
        Ok(FlimCube {
            width_px: cols.len(),
            height_px: rows.len(),
            counts,
            ..self.clone()
        })
    }

    /// Writes `<stem>.meta` (key=value text) and `<stem>.bin` (u32 LE payload).
    pub fn write(&self, stem: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let (meta_path, bin_path) = cube_paths(stem.as_ref());
        std::fs::write(&meta_path, self.metadata_text()).map_err(|e| Error::io(&meta_path, e))?;
        let mut payload = Vec::with_capacity(self.counts.len() * 4);
        for c in &self.counts {
            payload.extend_from_slice(&c.to_le_bytes());
        }
        std::fs::write(&bin_path, payload).map_err(|e| Error::io(&bin_path, e))?;
        Ok(())
    }

    pub fn metadata_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width_px={}", self.width_px);
        let _ = writeln!(s, "height_px={}", self.height_px);
        let _ = writeln!(s, "n_bins={}", self.grid.n_bins);
        let _ = writeln!(s, "bin_width_ps={}", self.grid.bin_width_ps);
        let _ = writeln!(s, "origin_ps={}", self.grid.origin_ps);
        let _ = writeln!(s, "pixel_size_nm={}", self.pixel_size_nm);
        let _ = writeln!(s, "endianness=little");
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        if let Some(n) = self.photons_per_pixel {
            let _ = writeln!(s, "photons_per_pixel={n}");
        }
        s
    }

    /// Reads a cube given its stem or either of its two files.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (meta_path, bin_path) = cube_paths(path.as_ref());
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let payload = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        Self::from_parts(&text, &payload)
    }

    pub fn from_parts(metadata: &str, payload: &[u8]) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (n, line) in metadata.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("metadata line {}: expected key=value", n + 1)))?;
            let k = k.trim();
            if !matches!(
                k,
                "width_px"
                    | "height_px"
                    | "n_bins"
                    | "bin_width_ps"
                    | "origin_ps"
                    | "pixel_size_nm"
                    | "endianness"
                    | "seed"
                    | "photons_per_pixel"
            ) {
                return Err(Error::Format(format!("unknown metadata key `{k}`")));
            }
            kv.insert(k.to_string(), v.trim().to_string());
        }
        fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<T> {
            let raw = kv
                .get(key)
                .ok_or_else(|| Error::Format(format!("missing metadata key `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Format(format!("bad value `{raw}` for `{key}`")))
        }
        fn opt<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
            kv.contains_key(key).then(|| get(kv, key)).transpose()
        }
        let endianness: String = get(&kv, "endianness")?;
        if endianness != "little" {
            return Err(Error::Format(format!("unsupported endianness `{endianness}`")));
        }
        let grid = TimeGrid {
            bin_width_ps: get(&kv, "bin_width_ps")?,
            n_bins: get(&kv, "n_bins")?,
            origin_ps: get(&kv, "origin_ps")?,
            repetition_period_ps: None,
        };
        if !payload.len().is_multiple_of(4) {
            return Err(Error::Format(format!(
                "payload length {} is not a multiple of 4 bytes",
                payload.len()
            )));
        }
        let counts = payload
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let cube = FlimCube {
            width_px: get(&kv, "width_px")?,
            height_px: get(&kv, "height_px")?,
            grid,
            counts,
            pixel_size_nm: get(&kv, "pixel_size_nm")?,
            seed: opt(&kv, "seed")?,
            photons_per_pixel: opt(&kv, "photons_per_pixel")?,
        };
        cube.validate()?;
        Ok(cube)
    }
}

fn cube_paths(path: &Path) -> (PathBuf, PathBuf) {
    match path.extension().and_then(|e| e.to_str()) {
        Some("meta") | Some("bin") => (path.with_extension("meta"), path.with_extension("bin")),
        _ => {
            let s = path.as_os_str().to_os_string();
            let mut meta = s.clone();
            meta.push(".meta");
            let mut bin = s;
            bin.push(".bin");
            (PathBuf::from(meta), PathBuf::from(bin))
        }
    }
}
