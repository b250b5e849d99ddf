//! File formats: the `.rpm` model container, the JSON score/calibration/plan
//! documents, and IDX datasets.
//!
//! An `.rpm` file is the 4-byte magic `RPM1`, a little-endian `u32` manifest
//! length, a UTF-8 JSON manifest with sorted keys, and a blob of row-major
//! little-endian `f32` tensors. Each manifest tensor entry carries its name,
//! shape and byte offset into the blob. Vectors are stored as `1 x n` tensors.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::centrality::{ImportanceScores, ScoreMeta};
use crate::chain::{AttentionNorms, BlockAttentionScores, TransformerCalibration};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::mlp::{Activation, CalibrationStats, Dataset, MlpLayer, MlpModel};
use crate::pruner::{check_indices, PrunePlan};
use crate::transformer::{Attention, DecoderBlock, FeedForward, FfnKind, LayerNorm, ToyTransformer};

pub const RPM_MAGIC: [u8; 4] = *b"RPM1";
pub const FORMAT_VERSION: &str = "1";
const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Transformer(ToyTransformer),
}

impl Model {
    pub fn model_type(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Transformer(_) => "decoder_transformer",
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Model::Mlp(m) => m.parameter_count(),
            Model::Transformer(t) => t.parameter_count(),
        }
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}

impl From<ToyTransformer> for Model {
    fn from(t: ToyTransformer) -> Self {
        Model::Transformer(t)
    }
}

/// One tensor addressed by the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub byte_offset: u64,
    /// True for FFN tensors whose intermediate neurons may be pruned.
    #[serde(default)]
    pub prunable: bool,
}

struct NamedTensor {
    name: String,
    matrix: DenseMatrix,
    prunable: bool,
}

fn tensor(name: impl Into<String>, matrix: &DenseMatrix, prunable: bool) -> NamedTensor {
    NamedTensor {
        name: name.into(),
        matrix: matrix.clone(),
        prunable,
    }
}

fn vector(name: impl Into<String>, v: &[f32]) -> NamedTensor {
    NamedTensor {
        name: name.into(),
        matrix: DenseMatrix::new(1, v.len(), v.to_vec()).expect("finite model parameters"),
        prunable: false,
    }
}

fn encode_container(mut manifest: Value, tensors: &[NamedTensor]) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for t in tensors {
        if t.matrix.data().is_empty() {
            return Err(Error::InvalidModel(format!("tensor {} has zero size", t.name)));
        }
        entries.push(TensorEntry {
            name: t.name.clone(),
            rows: t.matrix.rows(),
            cols: t.matrix.cols(),
            byte_offset: offset,
            prunable: t.prunable,
        });
        offset += 4 * t.matrix.data().len() as u64;
    }
    manifest["tensors"] = serde_json::to_value(&entries)?;
    manifest["version"] = json!(FORMAT_VERSION);
    let header = serde_json::to_vec(&manifest)?;
    let len = u32::try_from(header.len()).map_err(|_| Error::InvalidModel("manifest too large".into()))?;
    let mut out = Vec::with_capacity(8 + header.len() + offset as usize);
    out.extend_from_slice(&RPM_MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors {
        for v in t.matrix.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Container {
    manifest: Value,
    tensors: Vec<(TensorEntry, DenseMatrix)>,
}

impl Container {
    fn take(&mut self, name: &str) -> Result<DenseMatrix> {
        let pos = self
            .tensors
            .iter()
            .position(|(e, _)| e.name == name)
            .ok_or_else(|| Error::ManifestMismatch(format!("missing tensor {name}")))?;
        Ok(self.tensors.swap_remove(pos).1)
    }

    fn take_vector(&mut self, name: &str, len: usize) -> Result<Vec<f32>> {
        let m = self.take(name)?;
        if m.shape() != (1, len) {
            return Err(Error::ManifestMismatch(format!("{name} should be 1 x {len}, found {:?}", m.shape())));
        }
        Ok(m.into_data())
    }
}

fn decode_container(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 4 {
        return Err(Error::Truncated(format!("{} bytes is shorter than the magic", bytes.len())));
    }
    if bytes[..4] != RPM_MAGIC {
        return Err(Error::BadMagic {
            expected: "RPM1".into(),
            found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
        });
    }
    if bytes.len() < 8 {
        return Err(Error::Truncated("missing manifest length".into()));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let blob_start = 8 + len;
    if bytes.len() < blob_start {
        return Err(Error::Truncated(format!("manifest needs {len} bytes, {} available", bytes.len() - 8)));
    }
    let manifest: Value = serde_json::from_slice(&bytes[8..blob_start])?;
    let entries: Vec<TensorEntry> = serde_json::from_value(
        manifest
            .get("tensors")
            .cloned()
            .ok_or_else(|| Error::ManifestMismatch("manifest has no tensor table".into()))?,
    )?;
    let blob = &bytes[blob_start..];
    let mut expected_offset = 0u64;
    let mut tensors = Vec::with_capacity(entries.len());
    for e in entries {
        if e.byte_offset != expected_offset {
            return Err(Error::ManifestMismatch(format!(
                "tensor {} at offset {} but the previous tensor ends at {expected_offset}",
                e.name, e.byte_offset
            )));
        }
        let count = e.rows * e.cols;
        if count == 0 {
            return Err(Error::ManifestMismatch(format!("tensor {} has zero size", e.name)));
        }
        let start = e.byte_offset as usize;
        let end = start + 4 * count;
        if end > blob.len() {
            return Err(Error::Truncated(format!(
                "tensor {} needs bytes {start}..{end} of a {}-byte blob",
                e.name,
                blob.len()
            )));
        }
        let data = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = DenseMatrix::new(e.rows, e.cols, data)
            .map_err(|_| Error::ManifestMismatch(format!("tensor {} holds non-finite values", e.name)))?;
        expected_offset = end as u64;
        tensors.push((e, m));
    }
    if expected_offset as usize != blob.len() {
        return Err(Error::ManifestMismatch(format!(
            "blob has {} bytes but the manifest addresses {expected_offset}",
            blob.len()
        )));
    }
    Ok(Container { manifest, tensors })
}

fn field<T: DeserializeOwned>(v: &Value, key: &str) -> Result<T> {
    let raw = v
        .get(key)
        .cloned()
        .ok_or_else(|| Error::ManifestMismatch(format!("manifest lacks {key:?}")))?;
    Ok(serde_json::from_value(raw)?)
}

#[derive(Serialize, Deserialize)]
struct MlpLayerDesc {
    name: String,
    activation: Activation,
    in_dim: usize,
    out_dim: usize,
}

#[derive(Serialize, Deserialize)]
struct BlockDesc {
    d_ff: usize,
    ffn_kind: FfnKind,
    qk_head_dims: Vec<usize>,
    v_head_dims: Vec<usize>,
}

fn mlp_tensors(m: &MlpModel) -> (Value, Vec<NamedTensor>) {
    let last = m.num_layers() - 1;
    let mut tensors = Vec::new();
    let mut descs = Vec::new();
    for (k, l) in m.layers().iter().enumerate() {
        tensors.push(tensor(format!("layer{k}.weight"), &l.weights, k < last));
        let mut b = vector(format!("layer{k}.bias"), &l.bias);
        b.prunable = k < last;
        tensors.push(b);
        descs.push(MlpLayerDesc {
            name: format!("layer{k}"),
            activation: l.activation,
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
        });
    }
    let manifest = json!({
        "model_type": "mlp",
        "layers": descs,
        "parameter_count": m.parameter_count(),
    });
    (manifest, tensors)
}

fn transformer_tensors(t: &ToyTransformer) -> (Value, Vec<NamedTensor>) {
    let mut tensors = vec![tensor("embed", &t.embedding, false)];
    let mut blocks = Vec::new();
    for (b, blk) in t.blocks.iter().enumerate() {
        let p = format!("blocks.{b}");
        let a = &blk.attn;
        tensors.push(tensor(format!("{p}.attn.wq"), &a.wq, false));
        tensors.push(tensor(format!("{p}.attn.wk"), &a.wk, false));
        tensors.push(tensor(format!("{p}.attn.wv"), &a.wv, false));
        tensors.push(tensor(format!("{p}.attn.wo"), &a.wo, false));
        tensors.push(vector(format!("{p}.norm1.gain"), &blk.norm1.gain));
        tensors.push(vector(format!("{p}.norm1.bias"), &blk.norm1.bias));
        tensors.push(tensor(format!("{p}.ffn.up"), &blk.ffn.up, true));
        if let Some(g) = &blk.ffn.gate {
            tensors.push(tensor(format!("{p}.ffn.gate"), g, true));
        }
        tensors.push(tensor(format!("{p}.ffn.down"), &blk.ffn.down, true));
        tensors.push(vector(format!("{p}.norm2.gain"), &blk.norm2.gain));
        tensors.push(vector(format!("{p}.norm2.bias"), &blk.norm2.bias));
        blocks.push(BlockDesc {
            d_ff: blk.ffn.d_ff(),
            ffn_kind: blk.ffn.kind,
            qk_head_dims: a.qk_head_dims.clone(),
            v_head_dims: a.v_head_dims.clone(),
        });
    }
    tensors.push(tensor("lm_head", &t.lm_head, false));
    let manifest = json!({
        "model_type": "decoder_transformer",
        "vocab": t.vocab,
        "d_model": t.d_model,
        "n_heads": t.n_heads,
        "d_head": t.d_head,
        "ffn_kind": t.ffn_kind,
        "blocks": blocks,
        "parameter_count": t.parameter_count(),
    });
    (manifest, tensors)
}

/// Serializes a model to `.rpm` bytes. Equal models give equal bytes.
pub fn encode_model(model: &Model) -> Result<Vec<u8>> {
    let (manifest, tensors) = match model {
        Model::Mlp(m) => {
            m.validate()?;
            mlp_tensors(m)
        }
        Model::Transformer(t) => {
            t.validate()?;
            transformer_tensors(t)
        }
    };
    encode_container(manifest, &tensors)
}

/// The JSON manifest of an `.rpm` byte stream, without decoding tensors.
pub fn read_manifest_bytes(bytes: &[u8]) -> Result<Value> {
    Ok(decode_container(bytes)?.manifest)
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    let mut c = decode_container(bytes)?;
    let kind: String = field(&c.manifest, "model_type")?;
    let model = match kind.as_str() {
        "mlp" => {
            let descs: Vec<MlpLayerDesc> = field(&c.manifest, "layers")?;
            let mut layers = Vec::with_capacity(descs.len());
            for (k, d) in descs.iter().enumerate() {
                let w = c.take(&format!("layer{k}.weight"))?;
                if w.shape() != (d.out_dim, d.in_dim) {
                    return Err(Error::ManifestMismatch(format!("layer{k}.weight shape {:?}", w.shape())));
                }
                let b = c.take_vector(&format!("layer{k}.bias"), d.out_dim)?;
                layers.push(MlpLayer::new(w, b, d.activation)?);
            }
            Model::Mlp(MlpModel::new(layers)?)
        }
        "decoder_transformer" => {
            let d_model: usize = field(&c.manifest, "d_model")?;
            let descs: Vec<BlockDesc> = field(&c.manifest, "blocks")?;
            let embedding = c.take("embed")?;
            let mut blocks = Vec::with_capacity(descs.len());
            for (b, d) in descs.into_iter().enumerate() {
                let p = format!("blocks.{b}");
                let attn = Attention {
                    wq: c.take(&format!("{p}.attn.wq"))?,
                    wk: c.take(&format!("{p}.attn.wk"))?,
                    wv: c.take(&format!("{p}.attn.wv"))?,
                    wo: c.take(&format!("{p}.attn.wo"))?,
                    qk_head_dims: d.qk_head_dims,
                    v_head_dims: d.v_head_dims,
                };
                let norm1 = LayerNorm {
                    gain: c.take_vector(&format!("{p}.norm1.gain"), d_model)?,
                    bias: c.take_vector(&format!("{p}.norm1.bias"), d_model)?,
                };
                let up = c.take(&format!("{p}.ffn.up"))?;
                let gate = match d.ffn_kind {
                    FfnKind::Gated => Some(c.take(&format!("{p}.ffn.gate"))?),
                    FfnKind::TwoLayer => None,
                };
                let down = c.take(&format!("{p}.ffn.down"))?;
                if up.rows() != d.d_ff {
                    return Err(Error::ManifestMismatch(format!("{p}.ffn.up has {} rows, d_ff is {}", up.rows(), d.d_ff)));
                }
                let norm2 = LayerNorm {
                    gain: c.take_vector(&format!("{p}.norm2.gain"), d_model)?,
                    bias: c.take_vector(&format!("{p}.norm2.bias"), d_model)?,
                };
                blocks.push(DecoderBlock {
                    attn,
                    norm1,
                    ffn: FeedForward {
                        kind: d.ffn_kind,
                        up,
                        gate,
                        down,
                    },
                    norm2,
                });
            }
            let t = ToyTransformer {
                vocab: field(&c.manifest, "vocab")?,
                d_model,
                n_heads: field(&c.manifest, "n_heads")?,
                d_head: field(&c.manifest, "d_head")?,
                ffn_kind: field(&c.manifest, "ffn_kind")?,
                embedding,
                blocks,
                lm_head: c.take("lm_head")?,
            };
            t.validate()?;
            Model::Transformer(t)
        }
        other => return Err(Error::ManifestMismatch(format!("unknown model_type {other:?}"))),
    };
    if let Some((e, _)) = c.tensors.first() {
        return Err(Error::ManifestMismatch(format!("unexpected tensor {}", e.name)));
    }
    let declared: usize = field(&c.manifest, "parameter_count")?;
    if declared != model.parameter_count() {
        return Err(Error::ManifestMismatch(format!(
            "manifest declares {declared} parameters, tensors hold {}",
            model.parameter_count()
        )));
    }
    Ok(model)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_model(model)?)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<Model> {
    decode_model(&read_bytes(path.as_ref())?)
}

/// Pretty JSON with object keys in sorted order.
pub fn to_canonical_json<T: Serialize>(doc: &T) -> Result<String> {
    let value = serde_json::to_value(doc)?;
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

fn save_json<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    write_bytes(path, to_canonical_json(doc)?.as_bytes())
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

fn finite(values: Vec<f64>, what: &'static str) -> Result<DenseVector> {
    DenseVector::new(values).map_err(|_| Error::NonFinite(what))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionArrays {
    pub block: usize,
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
}

/// `.scores.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub format_version: String,
    #[serde(flatten)]
    pub meta: ScoreMeta,
    pub input: Vec<f64>,
    pub layers: Vec<NamedArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<AttentionArrays>>,
}

impl ScoresFile {
    pub fn new(scores: &ImportanceScores, attention: Option<&[BlockAttentionScores]>) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            meta: scores.meta.clone(),
            input: scores.input.to_vec(),
            layers: scores
                .names
                .iter()
                .zip(&scores.layers)
                .map(|(n, l)| NamedArray {
                    name: n.clone(),
                    values: l.to_vec(),
                })
                .collect(),
            attention: attention.map(|a| {
                a.iter()
                    .map(|b| AttentionArrays {
                        block: b.block,
                        wq: b.wq.to_vec(),
                        wk: b.wk.to_vec(),
                        wv: b.wv.to_vec(),
                    })
                    .collect()
            }),
        }
    }

    pub fn to_scores(&self) -> Result<ImportanceScores> {
        Ok(ImportanceScores {
            input: finite(self.input.clone(), "scores file")?,
            layers: self
                .layers
                .iter()
                .map(|l| finite(l.values.clone(), "scores file"))
                .collect::<Result<_>>()?,
            names: self.layers.iter().map(|l| l.name.clone()).collect(),
            meta: self.meta.clone(),
        })
    }

    pub fn attention_scores(&self) -> Result<Option<Vec<BlockAttentionScores>>> {
        self.attention
            .as_ref()
            .map(|a| {
                a.iter()
                    .map(|b| {
                        Ok(BlockAttentionScores {
                            block: b.block,
                            wq: finite(b.wq.clone(), "scores file")?,
                            wk: finite(b.wk.clone(), "scores file")?,
                            wv: finite(b.wv.clone(), "scores file")?,
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_json(path.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionNormArrays {
    pub block: usize,
    pub input: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
}

/// `.calib.json`: chain- or layer-aligned output norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibFile {
    pub format_version: String,
    pub calibration_sample_count: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    pub input: Vec<f64>,
    pub layers: Vec<NamedArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<Vec<AttentionNormArrays>>,
}

impl CalibFile {
    /// `names` label the layers, usually `layer{k}` or the chain names.
    pub fn new(stats: &CalibrationStats, names: &[String], seed: Option<u64>) -> Result<Self> {
        if names.len() != stats.layers.len() {
            return Err(Error::DimensionMismatch {
                op: "calibration file names",
                expected: stats.layers.len(),
                got: names.len(),
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION.into(),
            calibration_sample_count: stats.sample_count,
            seed,
            input: stats.input.to_vec(),
            layers: names
                .iter()
                .zip(&stats.layers)
                .map(|(n, l)| NamedArray {
                    name: n.clone(),
                    values: l.to_vec(),
                })
                .collect(),
            attention: None,
        })
    }

    pub fn for_transformer(calib: &TransformerCalibration, names: &[String], seed: Option<u64>) -> Result<Self> {
        let mut f = Self::new(&calib.chain, names, seed)?;
        f.attention = Some(
            calib
                .attention
                .iter()
                .enumerate()
                .map(|(b, a)| AttentionNormArrays {
                    block: b,
                    input: a.input.to_vec(),
                    q: a.q.to_vec(),
                    k: a.k.to_vec(),
                    v: a.v.to_vec(),
                })
                .collect(),
        );
        Ok(f)
    }

    pub fn to_stats(&self) -> Result<CalibrationStats> {
        Ok(CalibrationStats {
            sample_count: self.calibration_sample_count,
            input: finite(self.input.clone(), "calibration file")?,
            layers: self
                .layers
                .iter()
                .map(|l| finite(l.values.clone(), "calibration file"))
                .collect::<Result<_>>()?,
        })
    }

    pub fn to_transformer_calibration(&self) -> Result<TransformerCalibration> {
        let attention = self
            .attention
            .as_ref()
            .ok_or_else(|| Error::InvalidParams("calibration file has no attention section".into()))?;
        Ok(TransformerCalibration {
            chain: self.to_stats()?,
            attention: attention
                .iter()
                .map(|a| {
                    Ok(AttentionNorms {
                        input: finite(a.input.clone(), "calibration file")?,
                        q: finite(a.q.clone(), "calibration file")?,
                        k: finite(a.k.clone(), "calibration file")?,
                        v: finite(a.v.clone(), "calibration file")?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_json(path.as_ref())
    }
}

/// `.plan.json`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub format_version: String,
    #[serde(flatten)]
    pub plan: PrunePlan,
}

impl PlanFile {
    pub fn new(plan: &PrunePlan) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            plan: plan.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_json(self, path.as_ref())
    }

    /// Loads and checks that every index list is strictly increasing and in range.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = load_json(path.as_ref())?;
        for l in &f.plan.layers {
            check_indices(l)?;
        }
        Ok(f)
    }
}

fn maybe_gunzip(raw: Vec<u8>, path: &Path) -> Result<Vec<u8>> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn idx_header(bytes: &[u8], magic: u32, dims: usize) -> Result<Vec<usize>> {
    let need = 4 + 4 * dims;
    if bytes.len() < need {
        return Err(Error::Truncated(format!("IDX header needs {need} bytes, found {}", bytes.len())));
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(Error::BadMagic {
            expected: format!("{magic:#010x}"),
            found: format!("{found:#010x}"),
        });
    }
    Ok((0..dims)
        .map(|i| u32::from_be_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize)
        .collect())
}

/// Decoded IDX images, each flattened row-major and scaled to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f32>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let d = self.rows * self.cols;
        &self.pixels[i * d..(i + 1) * d]
    }
}

pub fn decode_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let h = idx_header(bytes, IDX_IMAGES, 3)?;
    let (n, rows, cols) = (h[0], h[1], h[2]);
    let body = &bytes[16..];
    if body.len() != n * rows * cols {
        return Err(Error::Truncated(format!(
            "header promises {n} images of {rows}x{cols}, body has {} bytes",
            body.len()
        )));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body.iter().map(|&b| b as f32 / 255.0).collect(),
    })
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let n = idx_header(bytes, IDX_LABELS, 1)?[0];
    let body = &bytes[8..];
    if body.len() != n {
        return Err(Error::Truncated(format!("header promises {n} labels, body has {}", body.len())));
    }
    Ok(body.to_vec())
}

/// Reads an image file, plain or gzip-compressed.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    decode_idx_images(&maybe_gunzip(read_bytes(path)?, path)?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    decode_idx_labels(&maybe_gunzip(read_bytes(path)?, path)?)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let d = rows * cols;
    if d == 0 || pixels.len() % d != 0 {
        return Err(Error::InvalidParams(format!("{} pixels do not split into {rows}x{cols} images", pixels.len())));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES, (pixels.len() / d) as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs an image file with a label file.
pub fn load_idx_dataset(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let img = read_idx_images(images)?;
    let lab = read_idx_labels(labels)?;
    if img.len() != lab.len() {
        return Err(Error::DimensionMismatch {
            op: "IDX images vs labels",
            expected: img.len(),
            got: lab.len(),
        });
    }
    Dataset::new(img.rows * img.cols, img.pixels, lab.into_iter().map(usize::from).collect())
}
