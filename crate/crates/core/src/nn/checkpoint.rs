use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NnError, ParameterSet, Scalar, Tensor};

/// File magic of the checkpoint container.
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"RPT1";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    dtype: String,
    config_hash: String,
    seed: u64,
    version: String,
    /// Arbitrary JSON metadata (model config, run state, optimizer steps).
    meta: serde_json::Value,
    tensors: Vec<TensorMeta>,
}

/// In-memory checkpoint: named tensors plus provenance metadata. On disk:
/// the magic bytes, a little-endian u32 header length, the JSON header, then
/// raw little-endian tensor payloads in header order. Round-trips bit-exactly.
#[derive(Debug, Clone)]
pub struct Checkpoint<T: Scalar> {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub meta: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(config_hash: String, seed: u64, meta: serde_json::Value) -> Self {
        Self {
            config_hash,
            seed,
            version: crate::VERSION.to_string(),
            meta,
            tensors: BTreeMap::new(),
        }
    }

    /// Snapshot of a parameter set, including optimizer state. Moments are
    /// stored under the reserved `opt.m.` / `opt.v.` prefixes and per-tensor
    /// step counts under `meta["opt_steps"]`.
    pub fn from_params(
        config_hash: String,
        seed: u64,
        mut meta: serde_json::Value,
        params: &ParameterSet<T>,
    ) -> Self {
        let mut tensors = BTreeMap::new();
        let mut steps = serde_json::Map::new();
        for (name, value) in params.iter() {
            tensors.insert(name.to_string(), value.clone());
        }
        for (name, m, v, step) in params.opt_state() {
            tensors.insert(format!("opt.m.{name}"), m.clone());
            tensors.insert(format!("opt.v.{name}"), v.clone());
            steps.insert(name.to_string(), serde_json::json!(step));
        }
        if !meta.is_object() {
            meta = serde_json::json!({});
        }
        meta.as_object_mut()
            .expect("meta is an object")
            .insert("opt_steps".to_string(), serde_json::Value::Object(steps));
        Self {
            config_hash,
            seed,
            version: crate::VERSION.to_string(),
            meta,
            tensors,
        }
    }

    /// Parameter tensors only (no optimizer state), in name order.
    pub fn param_tensors(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors
            .iter()
            .filter(|(name, _)| !name.starts_with("opt.m.") && !name.starts_with("opt.v."))
            .map(|(name, t)| (name.as_str(), t))
    }

    /// Restores values and optimizer state into a parameter set whose
    /// parameter names and shapes must already match.
    pub fn restore_into(&self, params: &mut ParameterSet<T>) -> Result<(), NnError> {
        for (name, tensor) in self.param_tensors() {
            params.set(name, tensor.clone())?;
        }
        let steps = self.meta.get("opt_steps").and_then(|v| v.as_object());
        let names: Vec<String> = params.names().map(str::to_string).collect();
        for name in names {
            let (m, v) = match (
                self.tensors.get(&format!("opt.m.{name}")),
                self.tensors.get(&format!("opt.v.{name}")),
            ) {
                (Some(m), Some(v)) => (m.clone(), v.clone()),
                _ => continue,
            };
            let step = steps
                .and_then(|s| s.get(&name))
                .and_then(|v| v.as_u64())
                .unwrap_or(0);
            params.restore_opt_state(&name, m, v, step)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors_meta: Vec<TensorMeta> = self
            .tensors
            .iter()
            .map(|(name, t)| TensorMeta {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect();
        let header = Header {
            dtype: T::DTYPE.to_string(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            version: self.version.clone(),
            meta: self.meta.clone(),
            tensors: tensors_meta,
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
        out.extend_from_slice(&header_json);
        for meta in &header.tensors {
            for &value in self.tensors[&meta.name].data() {
                value.write_le(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let fail = |msg: &str| NnError::Checkpoint(msg.to_string());
        if bytes.len() < 8 {
            return Err(fail("file too short"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(fail("bad magic; not a checkpoint file"));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if bytes.len() < 8 + header_len {
            return Err(fail("truncated header"));
        }
        let header: Header = serde_json::from_slice(&bytes[8..8 + header_len])
            .map_err(|e| NnError::Checkpoint(format!("bad header json: {e}")))?;
        if header.dtype != T::DTYPE {
            return Err(NnError::Checkpoint(format!(
                "dtype mismatch: file holds {}, requested {}",
                header.dtype,
                T::DTYPE
            )));
        }
        let mut offset = 8 + header_len;
        let mut tensors = BTreeMap::new();
        for meta in &header.tensors {
            let count: usize = meta.shape.iter().product();
            let byte_len = count * T::BYTE_WIDTH;
            if bytes.len() < offset + byte_len {
                return Err(fail("truncated payload"));
            }
            let mut data = Vec::with_capacity(count);
            for i in 0..count {
                data.push(T::read_le(&bytes[offset + i * T::BYTE_WIDTH..]));
            }
            offset += byte_len;
            tensors.insert(meta.name.clone(), Tensor::new(meta.shape.clone(), data)?);
        }
        if offset != bytes.len() {
            return Err(fail("trailing bytes after payload"));
        }
        Ok(Self {
            config_hash: header.config_hash,
            seed: header.seed,
            version: header.version,
            meta: header.meta,
            tensors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
