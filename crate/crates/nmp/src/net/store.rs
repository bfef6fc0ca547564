//! Named parameter tensors, deterministic initialization, SGD with
//! momentum (Adam behind a switch), and the NMPC checkpoint format.

use super::Tensor4;
use crate::scalar::Real;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no gradients supplied")]
    MissingGradient,
    #[error("gradient for unknown parameter {0}")]
    UnknownParameter(String),
    #[error("gradient shape mismatch for {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient for {0}")]
    NonFiniteGradient(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint file: {0}")]
    BadFile(&'static str),
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform(-limit, limit) with limit = sqrt(6 / fan_in),
    /// fan_in = c*h*w of the parameter tensor.
    HeUniform,
    Zero,
}

#[derive(Debug, Clone)]
struct Slot<S> {
    value: Tensor4<S>,
    velocity: Tensor4<S>,
    adam_m: Tensor4<S>,
    adam_v: Tensor4<S>,
}

/// Parameters are created on first touch, seeded by the store seed and the
/// parameter name, so initialization does not depend on creation order.
#[derive(Debug, Clone)]
pub struct ParamStore<S> {
    slots: BTreeMap<String, Slot<S>>,
    seed: u64,
    adam_t: u64,
}

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl<S: Real> ParamStore<S> {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            slots: BTreeMap::new(),
            seed,
            adam_t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(|s| s.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor4<S>> {
        self.slots.get(name).map(|s| &s.value)
    }

    pub fn numel(&self) -> usize {
        self.slots.values().map(|s| s.value.numel()).sum()
    }

    pub fn get_or_init(
        &mut self,
        name: &str,
        shape: (usize, usize, usize, usize),
        init: Init,
    ) -> Tensor4<S> {
        if let Some(slot) = self.slots.get(name) {
            assert_eq!(slot.value.shape(), shape, "parameter {name} reused with a new shape");
            return slot.value.clone();
        }
        let (n, c, h, w) = shape;
        let value = match init {
            Init::Zero => Tensor4::zeros(n, c, h, w),
            Init::HeUniform => {
                let fan_in = (c * h * w).max(1);
                let limit = (6.0 / fan_in as f64).sqrt();
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name));
                let data = (0..n * c * h * w)
                    .map(|_| S::of(rng.gen_range(-limit..limit)))
                    .collect();
                Tensor4::from_vec(n, c, h, w, data)
            }
        };
        self.slots.insert(
            name.to_string(),
            Slot {
                value: value.clone(),
                velocity: Tensor4::zeros(n, c, h, w),
                adam_m: Tensor4::zeros(n, c, h, w),
                adam_v: Tensor4::zeros(n, c, h, w),
            },
        );
        value
    }

    fn check_grads(
        &self,
        grads: &BTreeMap<String, Tensor4<S>>,
    ) -> Result<(), StoreError> {
        if grads.is_empty() {
            return Err(StoreError::MissingGradient);
        }
        for (name, g) in grads {
            let slot = self
                .slots
                .get(name)
                .ok_or_else(|| StoreError::UnknownParameter(name.clone()))?;
            if slot.value.shape() != g.shape() {
                return Err(StoreError::ShapeMismatch(name.clone()));
            }
            if g.data.iter().any(|v| !v.is_finite()) {
                return Err(StoreError::NonFiniteGradient(name.clone()));
            }
        }
        Ok(())
    }

    /// Classic momentum: v <- mu*v + g; p <- p - lr*v. Parameters without
    /// an entry in `grads` are left untouched.
    pub fn sgd_step(
        &mut self,
        grads: &BTreeMap<String, Tensor4<S>>,
        lr: f64,
        momentum: f64,
    ) -> Result<(), StoreError> {
        self.check_grads(grads)?;
        let (lr, mu) = (S::of(lr), S::of(momentum));
        for (name, g) in grads {
            let slot = self.slots.get_mut(name).unwrap();
            for i in 0..g.data.len() {
                slot.velocity.data[i] = mu * slot.velocity.data[i] + g.data[i];
                slot.value.data[i] = slot.value.data[i] - lr * slot.velocity.data[i];
            }
        }
        Ok(())
    }

    pub fn adam_step(
        &mut self,
        grads: &BTreeMap<String, Tensor4<S>>,
        lr: f64,
    ) -> Result<(), StoreError> {
        self.check_grads(grads)?;
        self.adam_t += 1;
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let bc1 = 1.0 - b1.powi(self.adam_t as i32);
        let bc2 = 1.0 - b2.powi(self.adam_t as i32);
        for (name, g) in grads {
            let slot = self.slots.get_mut(name).unwrap();
            for i in 0..g.data.len() {
                let gv = g.data[i].as_f64();
                let m = b1 * slot.adam_m.data[i].as_f64() + (1.0 - b1) * gv;
                let v = b2 * slot.adam_v.data[i].as_f64() + (1.0 - b2) * gv * gv;
                slot.adam_m.data[i] = S::of(m);
                slot.adam_v.data[i] = S::of(v);
                let update = lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                slot.value.data[i] = S::of(slot.value.data[i].as_f64() - update);
            }
        }
        Ok(())
    }

    /// Overwrite a parameter's value (used by checkpoint load).
    pub fn set_value(&mut self, name: &str, value: Tensor4<S>) {
        let (n, c, h, w) = value.shape();
        self.slots.insert(
            name.to_string(),
            Slot {
                value,
                velocity: Tensor4::zeros(n, c, h, w),
                adam_m: Tensor4::zeros(n, c, h, w),
                adam_v: Tensor4::zeros(n, c, h, w),
            },
        );
    }
}

const CKPT_MAGIC: &[u8; 4] = b"NMPC";
const CKPT_VERSION: u32 = 1;

/// Checkpoint: magic, version, parameter count, then per parameter the
/// name, shape, and little-endian f32 data. Values only; optimizer state
/// is not persisted.
pub fn save_checkpoint<S: Real>(store: &ParamStore<S>, path: &Path) -> Result<(), StoreError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CKPT_MAGIC)?;
    f.write_all(&CKPT_VERSION.to_le_bytes())?;
    f.write_all(&(store.slots.len() as u32).to_le_bytes())?;
    for (name, slot) in &store.slots {
        f.write_all(&(name.len() as u32).to_le_bytes())?;
        f.write_all(name.as_bytes())?;
        let (n, c, h, w) = slot.value.shape();
        for d in [n, c, h, w] {
            f.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in &slot.value.data {
            f.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint<S: Real>(path: &Path, seed: u64) -> Result<ParamStore<S>, StoreError> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut buf4 = [0u8; 4];
    f.read_exact(&mut buf4).map_err(|_| StoreError::BadFile("short magic"))?;
    if &buf4 != CKPT_MAGIC {
        return Err(StoreError::BadFile("bad magic"));
    }
    let read_u32 = |f: &mut dyn std::io::Read| -> Result<u32, StoreError> {
        let mut b = [0u8; 4];
        f.read_exact(&mut b).map_err(|_| StoreError::BadFile("truncated"))?;
        Ok(u32::from_le_bytes(b))
    };
    if read_u32(&mut f)? != CKPT_VERSION {
        return Err(StoreError::BadFile("unsupported version"));
    }
    let count = read_u32(&mut f)?;
    let mut store = ParamStore::new(seed);
    for _ in 0..count {
        let name_len = read_u32(&mut f)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        f.read_exact(&mut name_bytes)
            .map_err(|_| StoreError::BadFile("truncated name"))?;
        let name =
            String::from_utf8(name_bytes).map_err(|_| StoreError::BadFile("bad name utf8"))?;
        let mut shape = [0usize; 4];
        for d in &mut shape {
            *d = read_u32(&mut f)? as usize;
        }
        let numel = shape.iter().product::<usize>();
        let mut raw = vec![0u8; numel * 4];
        f.read_exact(&mut raw)
            .map_err(|_| StoreError::BadFile("truncated data"))?;
        let data = raw
            .chunks_exact(4)
            .map(|b| S::of(f32::from_le_bytes(b.try_into().unwrap()) as f64))
            .collect();
        store.set_value(
            &name,
            Tensor4::from_vec(shape[0], shape[1], shape[2], shape[3], data),
        );
    }
    Ok(store)
}
