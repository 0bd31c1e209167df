//! Binary ensemble records.
//!
//! Layout, all little-endian: magic `FKDENSMB`, `u32` version, `u32` d,
//! `f64` dt, `u64` n_paths, `u64` seed, `u64` steps, `u32` refine, `f64`
//! start time, `d × f64` start point, then `n_paths × (steps+1) × d` states
//! path-major and `n_paths` occupation integrals.

use std::io::{Read, Write};

use super::PathEnsemble;
use crate::error::{config, Error, Result};
use crate::field::DriftField;
use crate::kernel::SpaceTimePoint;

pub const RECORD_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"FKDENSMB";

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Write a stored ensemble. Ensembles kept only as seeds are refused.
pub fn write_ensemble(ens: &PathEnsemble, mut w: impl Write) -> Result<()> {
    let paths = ens
        .paths
        .as_ref()
        .ok_or_else(|| config("ensemble paths are not stored; raise the storage limit to persist them"))?;
    let mut head = Vec::with_capacity(64 + 8 * ens.d);
    head.extend_from_slice(MAGIC);
    head.extend_from_slice(&RECORD_VERSION.to_le_bytes());
    head.extend_from_slice(&(ens.d as u32).to_le_bytes());
    head.extend_from_slice(&ens.dt.to_le_bytes());
    head.extend_from_slice(&(ens.n_paths as u64).to_le_bytes());
    head.extend_from_slice(&ens.seed.to_le_bytes());
    head.extend_from_slice(&(ens.steps() as u64).to_le_bytes());
    head.extend_from_slice(&ens.refine.to_le_bytes());
    head.extend_from_slice(&ens.start.s.to_le_bytes());
    for x in &ens.start.x {
        head.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&head).map_err(io)?;
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in paths.chunks(4096).chain(ens.occupation.chunks(4096)) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

struct Reader<R> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r.read_exact(&mut b).map_err(io)?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut raw = vec![0u8; n * 8];
        self.r.read_exact(&mut raw).map_err(io)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Read an ensemble written by [`write_ensemble`], attaching the drift it was
/// simulated with.
pub fn read_ensemble(r: impl Read, drift: DriftField) -> Result<PathEnsemble> {
    let mut rd = Reader { r };
    if &rd.bytes::<8>()? != MAGIC {
        return Err(config("not an ensemble record"));
    }
    let version = rd.u32()?;
    if version != RECORD_VERSION {
        return Err(config(format!(
            "ensemble record version {version} is not supported (expected {RECORD_VERSION})"
        )));
    }
    let d = rd.u32()? as usize;
    let dt = rd.f64()?;
    let n_paths = rd.u64()? as usize;
    let seed = rd.u64()?;
    let steps = rd.u64()? as usize;
    let refine = rd.u32()?;
    let s = rd.f64()?;
    let x = rd.f64s(d)?;
    if drift.dim() != d {
        return Err(config("drift and record dimensions differ"));
    }
    let paths = rd.f64s(n_paths * (steps + 1) * d)?;
    let occupation = rd.f64s(n_paths)?;
    Ok(PathEnsemble {
        d,
        start: SpaceTimePoint { s, x },
        dt,
        refine,
        n_paths,
        seed,
        times: (0..=steps).map(|k| s + k as f64 * dt).collect(),
        occupation,
        paths: Some(paths),
        threads: rayon::current_num_threads(),
        drift,
    })
}
