//! The four pointwise MLP subnetworks (deform / wrap / cut / unwrap), their
//! initialization and checkpoint serialization.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

/// One dense layer; weights are `in x out`, bias `1 x out`.
#[derive(Debug, Clone)]
pub struct LinearParams<S> {
    pub w: Tensor<S>,
    pub b: Tensor<S>,
}

/// A pointwise MLP: LeakyReLU on hidden layers, linear output.
#[derive(Debug, Clone)]
pub struct Mlp<S> {
    pub layers: Vec<LinearParams<S>>,
}

impl<S: Scalar> Mlp<S> {
    fn init(shape: &[usize], rng: &mut ChaCha8Rng, zero_last: bool) -> Mlp<S> {
        let mut layers = Vec::new();
        for li in 0..shape.len() - 1 {
            let (fan_in, fan_out) = (shape[li], shape[li + 1]);
            let last = li == shape.len() - 2;
            let limit = (6.0 / fan_in as f64).sqrt();
            let (w, b) = if zero_last && last {
                (Tensor::zeros(fan_in, fan_out), Tensor::zeros(1, fan_out))
            } else {
                let data = (0..fan_in * fan_out)
                    .map(|_| S::from_f64(rng.random_range(-limit..limit)))
                    .collect();
                let blimit = 1.0 / (fan_in as f64).sqrt();
                let bdata = (0..fan_out)
                    .map(|_| S::from_f64(rng.random_range(-blimit..blimit)))
                    .collect();
                (
                    Tensor::from_vec(fan_in, fan_out, data),
                    Tensor::from_vec(1, fan_out, bdata),
                )
            };
            layers.push(LinearParams { w, b });
        }
        Mlp { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.rows
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().w.cols
    }
}

/// Node ids of one registered MLP inside a tape.
#[derive(Debug, Clone)]
pub struct MlpIds {
    pub layers: Vec<(NodeId, NodeId)>,
}

/// Per-layer input/output node ids recorded during a forward pass, enough to
/// replay a directional derivative through the same activations.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// (input node, output node, had activation) per layer.
    pub layers: Vec<(NodeId, NodeId, bool)>,
}

impl MlpIds {
    /// Forward pass through the MLP.
    pub fn forward<S: Scalar>(&self, tape: &mut Tape<S>, x: NodeId) -> (NodeId, MlpTrace) {
        let slope = S::from_f64(LEAKY_SLOPE);
        let mut h = x;
        let mut trace = Vec::new();
        let n = self.layers.len();
        for (li, (w, b)) in self.layers.iter().enumerate() {
            let act = li + 1 < n;
            let out = tape.linear(h, *w, *b, if act { Some(slope) } else { None });
            trace.push((h, out, act));
            h = out;
        }
        (h, MlpTrace { layers: trace })
    }

    /// Propagates a tangent through the recorded forward pass (a JVP). The
    /// tangent of each linear layer is `t . W`; activations multiply by the
    /// detached derivative mask of the primal output.
    pub fn jvp<S: Scalar>(&self, tape: &mut Tape<S>, trace: &MlpTrace, tangent: NodeId) -> NodeId {
        let slope = S::from_f64(LEAKY_SLOPE);
        let mut t = tangent;
        for ((w, _), (_, out, act)) in self.layers.iter().zip(&trace.layers) {
            t = tape.matmul(t, *w);
            if *act {
                let mask = tape.lrelu_mask_of(*out, slope);
                t = tape.mul_mask(t, mask);
            }
        }
        t
    }
}

/// Learnable parameters of the cycle-mapping backbone.
///
/// Encoder/decoder shapes follow the published layer table: deform and wrap
/// encode `2 -> 512 -> 512 -> 512 -> 64` and decode the concatenated
/// `[features; input]` with `66 -> 512 -> 512 -> 512 -> {2, 6}`; cut encodes
/// `3 -> 512 -> 512 -> 64` and decodes `67 -> 512 -> 512 -> 3`; unwrap maps
/// `3 -> 512 -> 512 -> 2`. The deform and cut decoders end in zero-initialized
/// layers so both residuals start as the identity.
#[derive(Debug, Clone)]
pub struct ParamNet<S> {
    pub deform_enc: Mlp<S>,
    pub deform_dec: Mlp<S>,
    pub wrap_enc: Mlp<S>,
    pub wrap_dec: Mlp<S>,
    pub cut_enc: Mlp<S>,
    pub cut_dec: Mlp<S>,
    pub unwrap: Mlp<S>,
}

/// Registered node ids for a whole `ParamNet`.
#[derive(Debug, Clone)]
pub struct ParamNetIds {
    pub deform_enc: MlpIds,
    pub deform_dec: MlpIds,
    pub wrap_enc: MlpIds,
    pub wrap_dec: MlpIds,
    pub cut_enc: MlpIds,
    pub cut_dec: MlpIds,
    pub unwrap: MlpIds,
    /// All parameter node ids in canonical order.
    pub all: Vec<NodeId>,
}

impl<S: Scalar> ParamNet<S> {
    pub fn init(seed: u64) -> ParamNet<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ParamNet {
            deform_enc: Mlp::init(&[2, 512, 512, 512, 64], &mut rng, false),
            deform_dec: Mlp::init(&[66, 512, 512, 512, 2], &mut rng, true),
            wrap_enc: Mlp::init(&[2, 512, 512, 512, 64], &mut rng, false),
            wrap_dec: Mlp::init(&[66, 512, 512, 512, 6], &mut rng, false),
            cut_enc: Mlp::init(&[3, 512, 512, 64], &mut rng, false),
            cut_dec: Mlp::init(&[67, 512, 512, 3], &mut rng, true),
            unwrap: Mlp::init(&[3, 512, 512, 2], &mut rng, false),
        }
    }

    /// A reduced-width net with the same topology, for fast numeric checks.
    pub fn init_small(seed: u64, hidden: usize, feat: usize) -> ParamNet<S> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden;
        let f = feat;
        ParamNet {
            deform_enc: Mlp::init(&[2, h, h, h, f], &mut rng, false),
            deform_dec: Mlp::init(&[f + 2, h, h, h, 2], &mut rng, true),
            wrap_enc: Mlp::init(&[2, h, h, h, f], &mut rng, false),
            wrap_dec: Mlp::init(&[f + 2, h, h, h, 6], &mut rng, false),
            cut_enc: Mlp::init(&[3, h, h, f], &mut rng, false),
            cut_dec: Mlp::init(&[f + 3, h, h, 3], &mut rng, true),
            unwrap: Mlp::init(&[3, h, h, 2], &mut rng, false),
        }
    }

    fn mlps(&self) -> [(&'static str, &Mlp<S>); 7] {
        [
            ("deform_enc", &self.deform_enc),
            ("deform_dec", &self.deform_dec),
            ("wrap_enc", &self.wrap_enc),
            ("wrap_dec", &self.wrap_dec),
            ("cut_enc", &self.cut_enc),
            ("cut_dec", &self.cut_dec),
            ("unwrap", &self.unwrap),
        ]
    }

    fn mlps_mut(&mut self) -> [&mut Mlp<S>; 7] {
        [
            &mut self.deform_enc,
            &mut self.deform_dec,
            &mut self.wrap_enc,
            &mut self.wrap_dec,
            &mut self.cut_enc,
            &mut self.cut_dec,
            &mut self.unwrap,
        ]
    }

    /// Parameter tensors in canonical (checkpoint) order.
    pub fn tensors(&self) -> Vec<&Tensor<S>> {
        let mut out = Vec::new();
        for (_, mlp) in self.mlps() {
            for l in &mlp.layers {
                out.push(&l.w);
                out.push(&l.b);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut out = Vec::new();
        for mlp in self.mlps_mut() {
            for l in &mut mlp.layers {
                out.push(&mut l.w);
                out.push(&mut l.b);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Registers every tensor as a trainable leaf on the tape.
    pub fn register(&self, tape: &mut Tape<S>) -> ParamNetIds {
        let mut all = Vec::new();
        let mut reg = |mlp: &Mlp<S>| {
            let layers = mlp
                .layers
                .iter()
                .map(|l| {
                    let w = tape.parameter(l.w.clone());
                    let b = tape.parameter(l.b.clone());
                    all.push(w);
                    all.push(b);
                    (w, b)
                })
                .collect();
            MlpIds { layers }
        };
        let deform_enc = reg(&self.deform_enc);
        let deform_dec = reg(&self.deform_dec);
        let wrap_enc = reg(&self.wrap_enc);
        let wrap_dec = reg(&self.wrap_dec);
        let cut_enc = reg(&self.cut_enc);
        let cut_dec = reg(&self.cut_dec);
        let unwrap = reg(&self.unwrap);
        ParamNetIds {
            deform_enc,
            deform_dec,
            wrap_enc,
            wrap_dec,
            cut_enc,
            cut_dec,
            unwrap,
            all,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    version: u32,
    scalar: String,
    tensors: Vec<TensorMeta>,
}

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

impl ParamNet<f32> {
    /// Writes `<prefix>.bin` (little-endian f32 blob) plus `<prefix>.json`
    /// shape manifest.
    pub fn save_checkpoint(&self, prefix: &Path) -> Result<()> {
        let bin_path = prefix.with_extension("bin");
        let json_path = prefix.with_extension("json");
        let mut metas = Vec::new();
        let mut blob: Vec<u8> = Vec::new();
        for (mi, (name, mlp)) in self.mlps().iter().enumerate() {
            let _ = mi;
            for (li, l) in mlp.layers.iter().enumerate() {
                for (suffix, t) in [("w", &l.w), ("b", &l.b)] {
                    metas.push(TensorMeta {
                        name: format!("{name}.{li}.{suffix}"),
                        rows: t.rows,
                        cols: t.cols,
                    });
                    for v in &t.data {
                        blob.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        let manifest = CheckpointManifest {
            version: 1,
            scalar: "f32".into(),
            tensors: metas,
        };
        std::fs::File::create(&bin_path)
            .and_then(|mut f| f.write_all(&blob))
            .map_err(|e| Error::io(&bin_path, e))?;
        std::fs::write(
            &json_path,
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )
        .map_err(|e| Error::io(&json_path, e))?;
        Ok(())
    }

    pub fn load_checkpoint(prefix: &Path, seed_shape: &ParamNet<f32>) -> Result<ParamNet<f32>> {
        let bin_path = prefix.with_extension("bin");
        let json_path = prefix.with_extension("json");
        let manifest: CheckpointManifest = serde_json::from_str(
            &std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?,
        )?;
        if manifest.version != 1 {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {}",
                manifest.version
            )));
        }
        let mut blob = Vec::new();
        std::fs::File::open(&bin_path)
            .and_then(|mut f| f.read_to_end(&mut blob))
            .map_err(|e| Error::io(&bin_path, e))?;
        let mut net = seed_shape.clone();
        let mut offset = 0usize;
        let metas = &manifest.tensors;
        let tensors = net.tensors_mut();
        if metas.len() != tensors.len() {
            return Err(Error::InvalidArgument(
                "checkpoint tensor count mismatch".into(),
            ));
        }
        for (meta, t) in metas.iter().zip(tensors) {
            if meta.rows != t.rows || meta.cols != t.cols {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint shape mismatch for {}",
                    meta.name
                )));
            }
            for v in t.data.iter_mut() {
                let bytes: [u8; 4] = blob[offset..offset + 4]
                    .try_into()
                    .map_err(|_| Error::InvalidArgument("checkpoint blob truncated".into()))?;
                *v = f32::from_le_bytes(bytes);
                offset += 4;
            }
        }
        Ok(net)
    }
}
