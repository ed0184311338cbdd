//! On-disk cache of ground-state MPS, one file per parameter set.
//!
//! File layout: one line of JSON (the [`CacheHeader`]) terminated by `\n`,
//! followed by the site tensors back to back. Each tensor `A[a, s, b]` with
//! shape `(left, phys, right)` from the header is stored row-major (`b`
//! fastest) as complex pairs `(re, im)` of little-endian `f64`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::state::{MpsState, SiteTensor};
use crate::error::{Error, Result};

/// Environment variable that overrides the default cache directory.
pub const CACHE_ENV: &str = "POTTS_MAGIC_CACHE";

const FORMAT: &str = "potts-magic-mps-v1";

/// Parameters that identify a cached ground state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub n: usize,
    pub theta: f64,
    pub lambda: f64,
    pub cutoff: f64,
}

impl CacheKey {
    /// Stable textual form; floats are written with full round-trip precision.
    pub fn canonical(&self) -> String {
        format!("n={};theta={:e};lambda={:e};cutoff={:e}", self.n, self.theta, self.lambda, self.cutoff)
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    pub fn file_name(&self) -> String {
        format!("gs-{}.mps", &self.digest()[..32])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: String,
    pub key: CacheKey,
    pub canonical: String,
    pub energy: f64,
    pub center: usize,
    pub shapes: Vec<[usize; 3]>,
}

#[derive(Clone, Debug)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub energy: f64,
    pub state: MpsState,
}

/// Directory-backed ground-state store.
#[derive(Clone, Debug)]
pub struct GroundStateCache {
    dir: PathBuf,
}

impl GroundStateCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        GroundStateCache { dir: dir.into() }
    }

    /// `explicit`, else `$POTTS_MAGIC_CACHE`, else `./cache`.
    pub fn resolve(explicit: Option<&Path>) -> Self {
        match explicit {
            Some(p) => Self::new(p),
            None => match std::env::var_os(CACHE_ENV) {
                Some(v) if !v.is_empty() => Self::new(PathBuf::from(v)),
                _ => Self::new("cache"),
            },
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.path_for(key).is_file()
    }

    pub fn load(&self, key: &CacheKey) -> Result<Option<CacheEntry>> {
        let path = self.path_for(key);
        if !path.is_file() {
            return Ok(None);
        }
        let entry = read_entry(&path)?;
        if entry.key.canonical() != key.canonical() {
            return Err(Error::Numerical(format!("cache file {} holds a different key", path.display())));
        }
        Ok(Some(entry))
    }

    /// Write through a temporary file in the same directory and rename it into place.
    pub fn store(&self, entry: &CacheEntry) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&entry.key);
        let mut tmp = tempfile_in(&self.dir, &entry.key)?;
        write_entry(&mut tmp.1, entry)?;
        tmp.1.sync_all()?;
        drop(tmp.1);
        fs::rename(&tmp.0, &path)?;
        Ok(path)
    }

    pub fn get_or_compute(
        &self,
        key: &CacheKey,
        compute: impl FnOnce() -> Result<(f64, MpsState)>,
    ) -> Result<(CacheEntry, bool)> {
        if let Some(e) = self.load(key)? {
            return Ok((e, true));
        }
        let (energy, state) = compute()?;
        let entry = CacheEntry { key: *key, energy, state };
        self.store(&entry)?;
        Ok((entry, false))
    }
}

fn tempfile_in(dir: &Path, key: &CacheKey) -> Result<(PathBuf, fs::File)> {
    let base = format!(".{}.{}", key.file_name(), std::process::id());
    for i in 0..1000u32 {
        let p = dir.join(format!("{base}.{i}.tmp"));
        match fs::OpenOptions::new().write(true).create_new(true).open(&p) {
            Ok(f) => return Ok((p, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Numerical("could not create a temporary cache file".into()))
}

pub fn write_entry(w: &mut impl Write, entry: &CacheEntry) -> Result<()> {
    let st = &entry.state;
    let header = CacheHeader {
        format: FORMAT.into(),
        key: entry.key,
        canonical: entry.key.canonical(),
        energy: entry.energy,
        center: st.center(),
        shapes: st.tensors().iter().map(|t| [t.left, t.phys, t.right]).collect(),
    };
    let mut buf = serde_json::to_vec(&header)?;
    buf.push(b'\n');
    for t in st.tensors() {
        buf.reserve(16 * t.data.len());
        for a in 0..t.left {
            for s in 0..t.phys {
                for b in 0..t.right {
                    buf.extend_from_slice(&t.get(a, s, b).to_le_bytes());
                    buf.extend_from_slice(&0f64.to_le_bytes());
                }
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_entry(path: &Path) -> Result<CacheEntry> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    let header: CacheHeader = serde_json::from_slice(&line)?;
    if header.format != FORMAT {
        return Err(Error::Numerical(format!("unknown cache format {:?}", header.format)));
    }
    let mut tensors = Vec::with_capacity(header.shapes.len());
    let mut pair = [0u8; 16];
    for &[left, phys, right] in &header.shapes {
        let mut t = SiteTensor::zeros(left, phys, right);
        for a in 0..left {
            for s in 0..phys {
                for b in 0..right {
                    r.read_exact(&mut pair)?;
                    let re = f64::from_le_bytes(pair[..8].try_into().expect("8 bytes"));
                    let im = f64::from_le_bytes(pair[8..].try_into().expect("8 bytes"));
                    if im != 0.0 {
                        return Err(Error::Numerical("complex MPS entries are not supported".into()));
                    }
                    let i = t.idx(a, s, b);
                    t.data[i] = re;
                }
            }
        }
        tensors.push(t);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Numerical(format!("trailing bytes in {}", path.display())));
    }
    let state = MpsState::from_tensors(tensors, header.center, header.key.cutoff)?;
    Ok(CacheEntry { key: header.key, energy: header.energy, state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng;

    fn key() -> CacheKey {
        CacheKey { n: 5, theta: 0.25 * std::f64::consts::PI, lambda: 0.0, cutoff: 1e-7 }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        let state = MpsState::random(&mut rng(5), 5, 3, 4).unwrap();
        let entry = CacheEntry { key: key(), energy: -3.25, state: state.clone() };
        assert!(cache.load(&key()).unwrap().is_none());
        cache.store(&entry).unwrap();
        let back = cache.load(&key()).unwrap().unwrap();
        assert_eq!(back.energy, -3.25);
        assert_eq!(back.state.tensors(), state.tensors());
        assert_eq!(back.state.center(), state.center());
        let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn keys_differ_by_parameter() {
        let a = key();
        let mut b = a;
        b.theta += 1e-15;
        assert_ne!(a.digest(), b.digest());
        let mut c = a;
        c.cutoff = 1e-8;
        assert_ne!(a.file_name(), c.file_name());
    }

    #[test]
    fn second_request_is_a_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        let st = MpsState::product_state(&vec![vec![1.0, 0.0, 0.0]; 5]).unwrap();
        let (_, hit) = cache.get_or_compute(&key(), || Ok((-1.0, st.clone()))).unwrap();
        assert!(!hit);
        let (e, hit) = cache.get_or_compute(&key(), || panic!("recomputed")).unwrap();
        assert!(hit);
        assert_eq!(e.energy, -1.0);
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = GroundStateCache::new(dir.path());
        let state = MpsState::random(&mut rng(6), 5, 3, 2).unwrap();
        let path = cache.store(&CacheEntry { key: key(), energy: 0.0, state }).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(cache.load(&key()).is_err());
    }
}
