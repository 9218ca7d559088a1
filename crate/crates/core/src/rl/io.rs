//! Binary policy files.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      b"LCRL"
//! version    u32 = 1
//! hash       u32 length + UTF-8 model hash
//! encoder    u32 first_age, u32 last_age, u32 tis_cap, f64 wage_ref, f64 pension_ref
//! slope      f64 leaky-ReLU slope
//! networks   policy then value; each: u32 layer count + 1, u32 widths...,
//!            then f64 parameters per layer (weights fan_in x fan_out
//!            row-major, then biases)
//! telemetry  u32 length + f64 values
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Encoder, Mlp, TrainedPolicy};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LCRL";
const VERSION: u32 = 1;

fn fmt(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn u32_(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(fmt)?;
    Ok(u32::from_le_bytes(b))
}

fn f64_(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(fmt)?;
    Ok(f64::from_le_bytes(b))
}

fn f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| f64_(r)).collect()
}

fn write_net(w: &mut impl Write, net: &Mlp) -> std::io::Result<()> {
    let sizes = net.sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in sizes {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for v in net.to_flat() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_net(r: &mut impl Read, slope: f64) -> Result<Mlp> {
    let n = u32_(r)? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let sizes: Vec<usize> = (0..n).map(|_| u32_(r).map(|v| v as usize)).collect::<Result<_>>()?;
    let mut net = Mlp::zeros(&sizes, slope);
    let flat = f64s(r, net.n_params())?;
    net.set_flat(&flat);
    Ok(net)
}

impl TrainedPolicy {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.model_hash.len() as u32).to_le_bytes())?;
        w.write_all(self.model_hash.as_bytes())?;
        let e = &self.encoder;
        for v in [e.first_age, e.last_age, e.tis_cap] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&e.wage_ref.to_le_bytes())?;
        w.write_all(&e.pension_ref.to_le_bytes())?;
        w.write_all(&self.policy.leaky_slope.to_le_bytes())?;
        write_net(w, &self.policy)?;
        write_net(w, &self.value)?;
        w.write_all(&(self.telemetry.len() as u32).to_le_bytes())?;
        for v in &self.telemetry {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a policy file".into()));
        }
        let version = u32_(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported policy version {version}")));
        }
        let n = u32_(r)? as usize;
        let mut hash = vec![0u8; n];
        r.read_exact(&mut hash).map_err(fmt)?;
        let model_hash = String::from_utf8(hash).map_err(|e| Error::Format(e.to_string()))?;
        let encoder = Encoder {
            first_age: u32_(r)?,
            last_age: u32_(r)?,
            tis_cap: u32_(r)?,
            wage_ref: f64_(r)?,
            pension_ref: f64_(r)?,
        };
        let slope = f64_(r)?;
        let policy = read_net(r, slope)?;
        let value = read_net(r, slope)?;
        let n = u32_(r)? as usize;
        let telemetry = f64s(r, n)?;
        Ok(TrainedPolicy {
            model_hash,
            encoder,
            policy,
            value,
            telemetry,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}
