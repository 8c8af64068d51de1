//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PVMS" | version: u32 | payload_len: u64 | payload | crc32(payload): u32
//! ```
//!
//! The payload holds, in order: the topology (model config, levels, units
//! and every adjacency list), the weights as `f64`, the unit states, the
//! frame counter, the mode, and the learning config.

use std::fs;
use std::path::Path;

use super::{Mode, ModelState};
use crate::error::{PvmError, Result};
use crate::topology::{FoveaMode, HierarchyTopology, Level, ModelConfig, Rect};
use crate::unit::{LearningConfig, UnitSpec, UnitState, UnitWeights};

const MAGIC: &[u8; 4] = b"PVMS";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Default)]
struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn floats(&mut self, v: &[f64]) {
        self.u32(v.len());
        for &x in v {
            self.f64(x);
        }
    }
    fn ids(&mut self, v: &[usize]) {
        self.u32(v.len());
        for &x in v {
            self.u32(x);
        }
    }
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(PvmError::Checkpoint(format!(
                "payload ends at byte {} while reading {n} more",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.u32()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn ids(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()?;
        (0..n).map(|_| self.u32()).collect()
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(PvmError::Checkpoint(format!("invalid flag byte {v}"))),
        }
    }
}

fn encode_topology(e: &mut Encoder, t: &HierarchyTopology) {
    let c = &t.config;
    e.u32(c.view_w);
    e.u32(c.view_h);
    e.ids(&c.level_grids);
    match c.fovea {
        FoveaMode::None => {
            e.u8(0);
            e.u32(0);
        }
        FoveaMode::Central(k) => {
            e.u8(1);
            e.u32(k);
        }
        FoveaMode::Full => {
            e.u8(2);
            e.u32(0);
        }
    }
    e.u32(c.hidden_dim);
    e.u8(c.corner_contact as u8);

    e.u32(t.levels.len());
    for l in &t.levels {
        e.u32(l.grid);
        e.u32(l.first_unit);
        e.u32(l.n_units);
    }
    e.u32(t.units.len());
    for u in &t.units {
        e.u32(u.unit_id);
        e.u32(u.level);
        e.u32(u.signal_dim);
        e.u32(u.hidden_dim);
        e.u32(u.context_dim);
        match u.tile {
            Some(r) => {
                e.u8(1);
                for v in [r.x, r.y, r.w, r.h] {
                    e.u32(v);
                }
            }
            None => e.u8(0),
        }
        e.ids(&t.lateral[u.unit_id]);
        e.ids(&t.superior[u.unit_id]);
        e.ids(&t.inferior[u.unit_id]);
        e.ids(&t.context[u.unit_id]);
    }
    e.u32(t.topmost_id);
}

fn decode_topology(d: &mut Decoder) -> Result<HierarchyTopology> {
    let view_w = d.u32()?;
    let view_h = d.u32()?;
    let level_grids = d.ids()?;
    let fovea = match (d.u8()?, d.u32()?) {
        (0, _) => FoveaMode::None,
        (1, k) => FoveaMode::Central(k),
        (2, _) => FoveaMode::Full,
        (tag, _) => return Err(PvmError::Checkpoint(format!("unknown fovea tag {tag}"))),
    };
    let hidden_dim = d.u32()?;
    let corner_contact = d.bool()?;
    let config = ModelConfig { view_w, view_h, level_grids, fovea, hidden_dim, corner_contact };

    let n_levels = d.u32()?;
    let levels = (0..n_levels)
        .map(|_| Ok(Level { grid: d.u32()?, first_unit: d.u32()?, n_units: d.u32()? }))
        .collect::<Result<Vec<_>>>()?;
    let n_units = d.u32()?;
    let (mut units, mut lateral, mut superior, mut inferior, mut context) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n_units {
        let unit_id = d.u32()?;
        let level = d.u32()?;
        let signal_dim = d.u32()?;
        let hidden_dim = d.u32()?;
        let context_dim = d.u32()?;
        let tile = if d.bool()? {
            Some(Rect { x: d.u32()?, y: d.u32()?, w: d.u32()?, h: d.u32()? })
        } else {
            None
        };
        units.push(UnitSpec { unit_id, level, signal_dim, hidden_dim, context_dim, tile });
        lateral.push(d.ids()?);
        superior.push(d.ids()?);
        inferior.push(d.ids()?);
        context.push(d.ids()?);
    }
    let topmost_id = d.u32()?;
    Ok(HierarchyTopology { config, levels, units, lateral, superior, inferior, topmost_id, context })
}

/// Serializes a model into checkpoint bytes.
pub fn encode(model: &ModelState) -> Vec<u8> {
    let mut e = Encoder::default();
    encode_topology(&mut e, &model.topology);
    for w in &model.weights {
        e.floats(&w.hidden_weights);
        e.floats(&w.hidden_bias);
        e.floats(&w.output_weights);
        e.floats(&w.output_bias);
    }
    for s in &model.states {
        for v in [
            &s.signal,
            &s.prev_signal,
            &s.integral,
            &s.derivative,
            &s.error,
            &s.context,
            &s.hidden,
            &s.prediction,
            &s.last_input,
        ] {
            e.floats(v);
        }
        e.u8(s.primed as u8);
        e.u8(s.has_input as u8);
    }
    e.u64(model.frame_counter);
    e.u8(match model.mode {
        Mode::Training => 0,
        Mode::Frozen => 1,
    });
    e.f64(model.learning.learning_rate);
    e.f64(model.learning.tau_integral);
    e.u64(model.learning.seed);
    let payload = e.0;

    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

/// Parses checkpoint bytes, verifying magic, version, length and checksum.
pub fn decode(bytes: &[u8]) -> Result<ModelState> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(PvmError::Checkpoint("missing PVMS header".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(PvmError::Checkpoint(format!(
            "version mismatch: file has {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let payload_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let expected = HEADER_LEN.saturating_add(payload_len).saturating_add(4);
    if bytes.len() != expected {
        return Err(PvmError::Checkpoint(format!(
            "checksum cannot be verified: file is {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + payload_len];
    let stored = u32::from_le_bytes(bytes[HEADER_LEN + payload_len..].try_into().unwrap());
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(PvmError::Checkpoint(format!(
            "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }

    let mut d = Decoder { bytes: payload, pos: 0 };
    let topology = decode_topology(&mut d)?;
    let n = topology.units.len();
    let mut weights = Vec::with_capacity(n);
    for spec in &topology.units {
        let w = UnitWeights {
            hidden_weights: d.floats()?,
            hidden_bias: d.floats()?,
            output_weights: d.floats()?,
            output_bias: d.floats()?,
        };
        let shape = UnitWeights::zeros(spec);
        if w.hidden_weights.len() != shape.hidden_weights.len()
            || w.hidden_bias.len() != shape.hidden_bias.len()
            || w.output_weights.len() != shape.output_weights.len()
            || w.output_bias.len() != shape.output_bias.len()
        {
            return Err(PvmError::Checkpoint(format!("unit {}: weight shape mismatch", spec.unit_id)));
        }
        weights.push(w);
    }
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push(UnitState {
            signal: d.floats()?,
            prev_signal: d.floats()?,
            integral: d.floats()?,
            derivative: d.floats()?,
            error: d.floats()?,
            context: d.floats()?,
            hidden: d.floats()?,
            prediction: d.floats()?,
            last_input: d.floats()?,
            primed: d.bool()?,
            has_input: d.bool()?,
        });
    }
    let frame_counter = d.u64()?;
    let mode = match d.u8()? {
        0 => Mode::Training,
        1 => Mode::Frozen,
        v => return Err(PvmError::Checkpoint(format!("unknown mode {v}"))),
    };
    let learning = LearningConfig {
        learning_rate: d.f64()?,
        tau_integral: d.f64()?,
        seed: d.u64()?,
    };
    if d.pos != payload.len() {
        return Err(PvmError::Checkpoint(format!(
            "{} trailing payload bytes",
            payload.len() - d.pos
        )));
    }
    Ok(ModelState { topology, learning, weights, states, frame_counter, mode })
}

pub fn save_checkpoint(model: &ModelState, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let bytes = fs::read(path)
        .map_err(|e| PvmError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes).map_err(|e| match e {
        PvmError::Checkpoint(msg) => PvmError::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}
