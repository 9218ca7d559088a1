//! Binary value-grid files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic     b"LCVG"
//! version   u32 = 1
//! hash      u32 length + UTF-8 model hash
//! config    u32 length + UTF-8 JSON scenario config (its grid is the solved grid)
//! layers    u32 layer count, terminal layer included
//! len       u64 knots per layer
//! values    layers * len f64, layer-major, then employment, tis, pension,
//!           prev_wage, wage (wage fastest)
//! actions   (layers - 1) * len u8 action codes, same order
//! ```
//!
//! Spline coefficients are refitted on load.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ValueGrid;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"LCVG";
const VERSION: u32 = 1;

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r).map_err(|e| Error::Format(e.to_string()))? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf).map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

impl ValueGrid {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        put_str(w, &self.model_hash)?;
        put_str(w, &serde_json::to_string(&self.config).expect("config serializes"))?;
        w.write_all(&(self.layers.len() as u32).to_le_bytes())?;
        w.write_all(&(self.spec.layer_len() as u64).to_le_bytes())?;
        for layer in &self.layers {
            for v in &layer.values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for codes in &self.actions {
            w.write_all(codes)?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let fmt = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(fmt)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a value-grid file".into()));
        }
        let version = get_u32(r).map_err(fmt)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported value-grid version {version}")));
        }
        let model_hash = get_str(r)?;
        let config: ScenarioConfig = serde_json::from_str(&get_str(r)?).map_err(|e| Error::Format(e.to_string()))?;
        let n_layers = get_u32(r).map_err(fmt)? as usize;
        let len = get_u64(r).map_err(fmt)? as usize;
        let spec = config.grid.clone();
        let expected_layers = (config.model.last_age - config.model.first_age + 2) as usize;
        if len != spec.layer_len() || n_layers != expected_layers {
            return Err(Error::Format(format!(
                "payload shape {n_layers}x{len} does not match the grid ({expected_layers}x{})",
                spec.layer_len()
            )));
        }
        let spline = ValueGrid::spline_for(&spec);
        let mut bytes = vec![0u8; len * 8];
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            r.read_exact(&mut bytes).map_err(fmt)?;
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            layers.push(ValueGrid::build_layer(&spline, &spec, values));
        }
        let mut actions = Vec::with_capacity(n_layers - 1);
        for _ in 0..n_layers - 1 {
            let mut codes = vec![0u8; len];
            r.read_exact(&mut codes).map_err(fmt)?;
            actions.push(codes);
        }
        Ok(ValueGrid {
            spec,
            model_hash,
            config,
            spline,
            layers,
            actions,
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
