//! Table of bond phases M_{e_k}(x) over a box, with a versioned binary file
//! format for bit-exact reuse.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{phase_small, GaugeField, OdeOptions, INTEGRATOR_ID};
use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::linalg::C64;

const MAGIC: &[u8; 4] = b"MFPC";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct PhaseCache {
    /// Box with fiber equal to the Clifford fiber.
    pub lattice: LatticeBox,
    pub charge: f64,
    pub ode: OdeOptions,
    /// tables[k][site]: phase on the bond site -> site + e_k (None when the
    /// bond leaves the box).
    tables: Vec<Vec<Option<Array2<C64>>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    d: usize,
    rho: usize,
    offset: Vec<f64>,
    alpha_bits: u64,
    alpha: f64,
    k: usize,
    fiber: usize,
    step_bits: u64,
    far_cutoff_bits: u64,
    tol_bits: u64,
    integrator: String,
}

impl PhaseCache {
    pub fn build(field: &GaugeField, lattice: &LatticeBox, ode: &OdeOptions) -> Result<Self> {
        let lat = lattice.with_fiber(field.rep.fiber_dim);
        let mut tables = Vec::with_capacity(lat.d);
        for k in 0..lat.d {
            let mut ek = vec![0.0; lat.d];
            ek[k] = 1.0;
            let col: Vec<Result<Option<Array2<C64>>>> = (0..lat.n_sites())
                .into_par_iter()
                .map(|s| {
                    let mut n = lat.cells[s].clone();
                    n[k] += 1;
                    if lat.site_index(&n).is_none() {
                        return Ok(None);
                    }
                    Ok(Some(phase_small(field, &lat.sites[s], &ek, ode)?.to_array()))
                })
                .collect();
            tables.push(col.into_iter().collect::<Result<Vec<_>>>()?);
        }
        Ok(PhaseCache { lattice: lat, charge: field.charge, ode: ode.clone(), tables })
    }

    pub fn get(&self, k: usize, site: usize) -> Option<&Array2<C64>> {
        self.tables.get(k)?.get(site)?.as_ref()
    }

    fn header(&self) -> Header {
        Header {
            d: self.lattice.d,
            rho: self.lattice.radius,
            offset: self.lattice.offset.clone(),
            alpha_bits: self.charge.to_bits(),
            alpha: self.charge,
            k: self.tables.len(),
            fiber: self.lattice.fiber_dim,
            step_bits: self.ode.step.to_bits(),
            far_cutoff_bits: self.ode.far_cutoff.to_bits(),
            tol_bits: self.ode.tol.to_bits(),
            integrator: INTEGRATOR_ID.to_string(),
        }
    }

    /// SHA-256 over the header: identifies the parameters a table belongs to.
    pub fn content_hash(&self) -> String {
        Self::hash_of(&self.header())
    }

    fn hash_of(h: &Header) -> String {
        let bytes = serde_json::to_vec(h).expect("header serializes");
        Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Key under which a table for these parameters is stored.
    pub fn key_for(lattice: &LatticeBox, field: &GaugeField, ode: &OdeOptions) -> String {
        let h = Header {
            d: lattice.d,
            rho: lattice.radius,
            offset: lattice.offset.clone(),
            alpha_bits: field.charge.to_bits(),
            alpha: field.charge,
            k: lattice.d,
            fiber: field.rep.fiber_dim,
            step_bits: ode.step.to_bits(),
            far_cutoff_bits: ode.far_cutoff.to_bits(),
            tol_bits: ode.tol.to_bits(),
            integrator: INTEGRATOR_ID.to_string(),
        };
        Self::hash_of(&h)
    }

    /// Load from `dir/<key>.mfpc` if present, else build and store there.
    pub fn build_cached(field: &GaugeField, lattice: &LatticeBox, ode: &OdeOptions, dir: &Path) -> Result<Self> {
        let key = Self::key_for(lattice, field, ode);
        let path = dir.join(format!("{key}.mfpc"));
        if path.exists() {
            let c = Self::load(&path)?;
            if c.content_hash() == key {
                return Ok(c);
            }
        }
        let c = Self::build(field, lattice, ode)?;
        fs::create_dir_all(dir)?;
        c.save(&path)?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&self.header()).map_err(|e| Error::Monopole(e.to_string()))?;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        let f = self.lattice.fiber_dim;
        for table in &self.tables {
            for entry in table {
                match entry {
                    None => buf.push(0),
                    Some(m) => {
                        buf.push(1);
                        for i in 0..f {
                            for j in 0..f {
                                buf.extend_from_slice(&m[[i, j]].re.to_le_bytes());
                                buf.extend_from_slice(&m[[i, j]].im.to_le_bytes());
                            }
                        }
                    }
                }
            }
        }
        let tmp = path.with_extension("tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&buf)?;
        }
        fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        let bad = |m: &str| Error::Monopole(format!("cache file {}: {m}", path.display()));
        if buf.len() < 12 || &buf[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
        let header: Header =
            serde_json::from_slice(buf.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?)
                .map_err(|e| bad(&e.to_string()))?;
        if header.integrator != INTEGRATOR_ID {
            return Err(bad("written by a different integrator"));
        }
        let lattice = LatticeBox::new(header.d, header.rho, header.offset.clone(), header.fiber)?;
        let f = header.fiber;
        let mut pos = 12 + hlen;
        let next_f64 = |pos: &mut usize| -> Result<f64> {
            let b = buf.get(*pos..*pos + 8).ok_or_else(|| bad("truncated payload"))?;
            *pos += 8;
            Ok(f64::from_le_bytes(b.try_into().unwrap()))
        };
        let mut tables = Vec::with_capacity(header.k);
        for _ in 0..header.k {
            let mut table = Vec::with_capacity(lattice.n_sites());
            for _ in 0..lattice.n_sites() {
                let flag = *buf.get(pos).ok_or_else(|| bad("truncated payload"))?;
                pos += 1;
                if flag == 0 {
                    table.push(None);
                    continue;
                }
                let mut m = Array2::zeros((f, f));
                for i in 0..f {
                    for j in 0..f {
                        let re = next_f64(&mut pos)?;
                        let im = next_f64(&mut pos)?;
                        m[[i, j]] = C64::new(re, im);
                    }
                }
                table.push(Some(m));
            }
            tables.push(table);
        }
        if pos != buf.len() {
            return Err(bad("trailing bytes"));
        }
        let ode = OdeOptions {
            step: f64::from_bits(header.step_bits),
            far_cutoff: f64::from_bits(header.far_cutoff_bits),
            tol: f64::from_bits(header.tol_bits),
        };
        Ok(PhaseCache { lattice, charge: f64::from_bits(header.alpha_bits), ode, tables })
    }

    /// Largest unitarity defect over the table.
    pub fn max_unitarity_defect(&self) -> f64 {
        self.tables
            .iter()
            .flatten()
            .flatten()
            .map(|m| {
                let g = crate::linalg::dagger(m).dot(m);
                crate::linalg::max_abs_diff(&g, &crate::linalg::eye(m.nrows()))
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::build_clifford;

    #[test]
    fn file_roundtrip_is_bit_exact() {
        let rep = build_clifford(3).unwrap();
        let f = GaugeField::new(&rep, 0.37);
        let lat = LatticeBox::centered(3, 2, 2).unwrap();
        let c = PhaseCache::build(&f, &lat, &OdeOptions::default()).unwrap();
        assert!(c.max_unitarity_defect() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.mfpc");
        c.save(&p).unwrap();
        let back = PhaseCache::load(&p).unwrap();
        assert_eq!(back.charge.to_bits(), c.charge.to_bits());
        assert_eq!(back.tables, c.tables);
        assert_eq!(back.content_hash(), c.content_hash());
        let again = PhaseCache::build_cached(&f, &lat, &OdeOptions::default(), dir.path()).unwrap();
        let again2 = PhaseCache::build_cached(&f, &lat, &OdeOptions::default(), dir.path()).unwrap();
        assert_eq!(again.tables, again2.tables);
    }

    #[test]
    fn corrupted_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mfpc");
        std::fs::write(&p, b"XXXX0000").unwrap();
        assert!(PhaseCache::load(&p).is_err());
    }

    #[test]
    fn boundary_bonds_are_absent() {
        let rep = build_clifford(2).unwrap();
        let f = GaugeField::new(&rep, 0.5);
        let lat = LatticeBox::centered(2, 2, 2).unwrap();
        let c = PhaseCache::build(&f, &lat, &OdeOptions::default()).unwrap();
        let top = lat.site_index(&[1, 0]).unwrap();
        assert!(c.get(0, top).is_none());
        assert!(c.get(1, top).is_some());
    }
}
