//! Checkpoint directory: `manifest.toml` (versioned topology header) plus
//! `params.svt`, the parameters and batch-norm running statistics as
//! consecutive SVT1 records in manifest order.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkConfig};
use crate::container::{atomic_dir, decode_record, encode_record, read_file, read_text, StoredTensor};
use crate::error::{Error, Result};
use crate::nn::Parameterized;

pub const MANIFEST_FORMAT: &str = "svtk-checkpoint";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub name: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub epoch: Option<usize>,
    pub running_stats: bool,
    pub network: NetworkConfig,
    pub layers: Vec<LayerEntry>,
    pub tensors: Vec<TensorEntry>,
}

fn bn_prefix(shift_name: &str) -> &str {
    shift_name.strip_suffix(".shift").unwrap_or(shift_name)
}

fn collect(net: &Network<f32>) -> Vec<(String, Vec<usize>, Vec<f32>)> {
    let mut out: Vec<_> = net.params().into_iter().map(|p| (p.name.clone(), p.dims.clone(), p.value.clone())).collect();
    for bn in net.batchnorms() {
        let prefix = bn_prefix(&bn.shift.name);
        let mean = bn.running_mean.iter().map(|&v| v as f32).collect();
        let var = bn.running_var.iter().map(|&v| v as f32).collect();
        out.push((format!("{prefix}.running_mean"), vec![bn.channels], mean));
        out.push((format!("{prefix}.running_var"), vec![bn.channels], var));
    }
    out
}

pub fn save_checkpoint(dir: &Path, net: &Network<f32>, epoch: Option<usize>) -> Result<()> {
    let tensors = collect(net);
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        epoch,
        running_stats: net.batchnorms().iter().all(|b| b.initialized),
        network: net.config.clone(),
        layers: net.topology.iter().map(|(n, r)| LayerEntry { name: n.clone(), role: r.clone() }).collect(),
        tensors: tensors.iter().map(|(n, d, _)| TensorEntry { name: n.clone(), dims: d.clone() }).collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let mut blob = Vec::new();
    for (_, dims, data) in &tensors {
        encode_record(dims, data, &mut blob)?;
    }
    atomic_dir(dir, |tmp| {
        std::fs::write(tmp.join("manifest.toml"), &text).map_err(|e| Error::io(tmp.join("manifest.toml"), e))?;
        std::fs::write(tmp.join("params.svt"), &blob).map_err(|e| Error::io(tmp.join("params.svt"), e))
    })
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.toml");
    let m: Manifest =
        toml::from_str(&read_text(&path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
        return Err(Error::UnsupportedFormat(format!(
            "checkpoint {} version {}, expected {MANIFEST_FORMAT} version {MANIFEST_VERSION}",
            m.format, m.version
        )));
    }
    Ok(m)
}

pub fn load_checkpoint(dir: &Path) -> Result<(Network<f32>, Manifest)> {
    let manifest = load_manifest(dir)?;
    let mut net = Network::<f32>::build(manifest.network.clone(), 0)?;
    let path = dir.join("params.svt");
    let bytes = read_file(&path)?;
    let mut reader = bytes.as_slice();
    let mut stored: HashMap<&str, StoredTensor> = HashMap::new();
    for entry in &manifest.tensors {
        let t = decode_record(&mut reader)?
            .ok_or_else(|| Error::Format(format!("{}: missing tensor {}", path.display(), entry.name)))?;
        if t.dims != entry.dims {
            return Err(Error::Format(format!("tensor {} has dims {:?}, manifest says {:?}", entry.name, t.dims, entry.dims)));
        }
        stored.insert(&entry.name, t);
    }
    if !reader.is_empty() {
        return Err(Error::Format(format!("{}: trailing data after last tensor", path.display())));
    }
    let mut take = |name: &str, dims: &[usize]| -> Result<Vec<f32>> {
        let t = stored.remove(name).ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))?;
        if t.dims != dims {
            return Err(Error::Dimension(format!("tensor {name}: stored {:?}, network {:?}", t.dims, dims)));
        }
        Ok(t.data)
    };
    for p in net.params_mut() {
        p.value = take(&p.name, &p.dims)?;
    }
    for bn in net.batchnorms_mut() {
        let prefix = bn_prefix(&bn.shift.name).to_string();
        let c = [bn.channels];
        bn.running_mean = take(&format!("{prefix}.running_mean"), &c)?.iter().map(|&v| v as f64).collect();
        bn.running_var = take(&format!("{prefix}.running_var"), &c)?.iter().map(|&v| v as f64).collect();
        bn.initialized = manifest.running_stats;
    }
    if let Some(extra) = stored.keys().next() {
        return Err(Error::Format(format!("checkpoint tensor {extra} matches no layer")));
    }
    Ok((net, manifest))
}
