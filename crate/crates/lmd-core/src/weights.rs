//! Weight persistence and deterministic initialization.
//!
//! The on-disk format is deliberately primitive so any language can parse it
//! in a few dozen lines: magic `LMDW`, a u32 version (1), a u32 record count,
//! then per record a u16 name length + UTF-8 name, a u8 role, a u8 rank,
//! rank u32 dims and the raw little-endian f32 payload. Records for the same
//! layer are consecutive and grouped on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{LayerSpec, NetworkSpec};
use crate::tensor::{BatchNormParams, ConvParams, Tensor};

const MAGIC: [u8; 4] = *b"LMDW";
const VERSION: u32 = 1;

/// What a stored tensor means to its layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Role {
    Weight = 0,
    Bias = 1,
    Gamma = 2,
    Beta = 3,
    Mean = 4,
    Var = 5,
}

impl Role {
    fn from_byte(b: u8) -> Option<Role> {
        match b {
            0 => Some(Role::Weight),
            1 => Some(Role::Bias),
            2 => Some(Role::Gamma),
            3 => Some(Role::Beta),
            4 => Some(Role::Mean),
            5 => Some(Role::Var),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Weight => "weight",
            Role::Bias => "bias",
            Role::Gamma => "gamma",
            Role::Beta => "beta",
            Role::Mean => "mean",
            Role::Var => "var",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor {
    pub role: Role,
    pub shape: Vec<u32>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub name: String,
    pub tensors: Vec<WeightTensor>,
}

impl LayerWeights {
    pub fn tensor(&self, role: Role) -> Option<&WeightTensor> {
        self.tensors.iter().find(|t| t.role == role)
    }

    fn required(&self, role: Role, want_shape: &[u32]) -> Result<&WeightTensor> {
        let t = self.tensor(role).ok_or_else(|| Error::BadWeights {
            layer: self.name.clone(),
            reason: format!("missing {} tensor", role.name()),
        })?;
        if t.shape != want_shape {
            return Err(Error::BadWeights {
                layer: self.name.clone(),
                reason: format!(
                    "{} tensor shaped {:?}, expected {:?}",
                    role.name(),
                    t.shape,
                    want_shape
                ),
            });
        }
        Ok(t)
    }

    /// Assembles the convolution parameters for a shape-preserving dilated
    /// 3x3 layer (stride 1, padding = dilation).
    pub fn conv_params(&self, in_c: usize, out_c: usize, dilation: usize) -> Result<ConvParams> {
        let want = [out_c as u32, in_c as u32, 3, 3];
        let wt = self.required(Role::Weight, &want)?;
        let bias = self.required(Role::Bias, &[out_c as u32])?;
        let weights = Tensor::from_vec(out_c, in_c, 3, 3, wt.data.clone())?;
        ConvParams::new(weights, bias.data.clone(), 1, dilation, dilation)
    }

    pub fn batchnorm_params(&self, c: usize, epsilon: f32) -> Result<BatchNormParams> {
        let want = [c as u32];
        let gamma = self.required(Role::Gamma, &want)?.data.clone();
        let beta = self.required(Role::Beta, &want)?.data.clone();
        let mean = self.required(Role::Mean, &want)?.data.clone();
        let var = self.required(Role::Var, &want)?.data.clone();
        BatchNormParams::new(gamma, beta, mean, var, epsilon)
    }
}

/// All learnable tensors of a network, in layer order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightStore {
    pub layers: Vec<LayerWeights>,
}

impl WeightStore {
    /// Deterministic fan-in uniform initialization: convolution weights are
    /// drawn from `U(-b, b)` with `b = sqrt(6 / (9 * in_c))`, biases are 0,
    /// and batch norm starts as the identity (gamma 1, beta 0, mean 0, var 1).
    /// The same seed always produces the same store, bit for bit.
    pub fn random_init(net: &NetworkSpec, seed: u64) -> WeightStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for layer in net.conv_layers() {
            let LayerSpec::Conv { name, in_c, out_c, bn_relu, .. } = layer else {
                continue;
            };
            let bound = (6.0 / (9 * in_c) as f64).sqrt() as f32;
            let weight: Vec<f32> =
                (0..out_c * in_c * 9).map(|_| rng.gen_range(-bound..bound)).collect();
            let mut tensors = vec![
                WeightTensor {
                    role: Role::Weight,
                    shape: vec![*out_c as u32, *in_c as u32, 3, 3],
                    data: weight,
                },
                WeightTensor {
                    role: Role::Bias,
                    shape: vec![*out_c as u32],
                    data: vec![0.0; *out_c],
                },
            ];
            if *bn_relu {
                for (role, fill) in
                    [(Role::Gamma, 1.0f32), (Role::Beta, 0.0), (Role::Mean, 0.0), (Role::Var, 1.0)]
                {
                    tensors.push(WeightTensor {
                        role,
                        shape: vec![*out_c as u32],
                        data: vec![fill; *out_c],
                    });
                }
            }
            layers.push(LayerWeights { name: name.clone(), tensors });
        }
        WeightStore { layers }
    }

    /// Checks that the store lines up with `net` layer by layer: names in
    /// order, every required role present with the right shape, nothing extra.
    pub fn validate_against(&self, net: &NetworkSpec) -> Result<()> {
        let convs: Vec<&LayerSpec> = net.conv_layers().collect();
        if convs.len() != self.layers.len() {
            return Err(Error::BadWeights {
                layer: String::from("<store>"),
                reason: format!(
                    "store has {} layer entries, network has {} convolutions",
                    self.layers.len(),
                    convs.len()
                ),
            });
        }
        for (spec, lw) in convs.iter().zip(&self.layers) {
            let LayerSpec::Conv { name, in_c, out_c, bn_relu, .. } = spec else {
                unreachable!();
            };
            if lw.name != *name {
                return Err(Error::BadWeights {
                    layer: name.clone(),
                    reason: format!("store entry is named '{}'", lw.name),
                });
            }
            lw.required(Role::Weight, &[*out_c as u32, *in_c as u32, 3, 3])?;
            lw.required(Role::Bias, &[*out_c as u32])?;
            let mut want = 2usize;
            if *bn_relu {
                for role in [Role::Gamma, Role::Beta, Role::Mean, Role::Var] {
                    lw.required(role, &[*out_c as u32])?;
                }
                want += 4;
            }
            if lw.tensors.len() != want {
                return Err(Error::BadWeights {
                    layer: name.clone(),
                    reason: format!("{} tensors stored, expected {want}", lw.tensors.len()),
                });
            }
        }
        Ok(())
    }

    /// Exact size in bytes of the serialized store.
    pub fn file_size(&self) -> u64 {
        let mut total = 12u64; // magic + version + record count
        for layer in &self.layers {
            for t in &layer.tensors {
                total += 2
                    + layer.name.len() as u64
                    + 1
                    + 1
                    + 4 * t.shape.len() as u64
                    + 4 * t.data.len() as u64;
            }
        }
        total
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        let records: usize = self.layers.iter().map(|l| l.tensors.len()).sum();
        out.write_all(&(records as u32).to_le_bytes())?;
        for layer in &self.layers {
            let name = layer.name.as_bytes();
            if name.len() > u16::MAX as usize {
                return Err(Error::InvalidArgument(format!(
                    "layer name '{}' too long",
                    layer.name
                )));
            }
            for t in &layer.tensors {
                out.write_all(&(name.len() as u16).to_le_bytes())?;
                out.write_all(name)?;
                out.write_all(&[t.role as u8])?;
                if t.shape.len() > u8::MAX as usize {
                    return Err(Error::InvalidArgument("tensor rank exceeds 255".into()));
                }
                out.write_all(&[t.shape.len() as u8])?;
                let mut expect = 1u64;
                for d in &t.shape {
                    out.write_all(&d.to_le_bytes())?;
                    expect *= *d as u64;
                }
                if expect != t.data.len() as u64 {
                    return Err(Error::InvalidArgument(format!(
                        "tensor data length {} does not match shape {:?}",
                        t.data.len(),
                        t.shape
                    )));
                }
                for v in &t.data {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<WeightStore> {
        let mut reader = BufReader::new(File::open(path)?);
        Self::read_from(&mut reader)
    }

    pub fn read_from(input: &mut impl Read) -> Result<WeightStore> {
        fn take<const N: usize>(input: &mut impl Read, what: &str) -> Result<[u8; N]> {
            let mut buf = [0u8; N];
            input.read_exact(&mut buf).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => Error::Truncated(what.to_string()),
                _ => Error::Io(e),
            })?;
            Ok(buf)
        }

        let magic = take::<4>(input, "magic")?;
        if magic != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(take::<4>(input, "version")?);
        if version != VERSION {
            return Err(Error::VersionMismatch(version));
        }
        let records = u32::from_le_bytes(take::<4>(input, "record count")?);

        let mut layers: Vec<LayerWeights> = Vec::new();
        for r in 0..records {
            let name_len = u16::from_le_bytes(take::<2>(input, "name length")?) as usize;
            let mut name_buf = vec![0u8; name_len];
            input.read_exact(&mut name_buf).map_err(|e| match e.kind() {
                std::io::ErrorKind::UnexpectedEof => {
                    Error::Truncated(format!("name of record {r}"))
                }
                _ => Error::Io(e),
            })?;
            let name = String::from_utf8(name_buf)
                .map_err(|_| Error::InvalidArgument(format!("record {r}: name is not UTF-8")))?;
            let role_byte = take::<1>(input, "role")?[0];
            let role = Role::from_byte(role_byte).ok_or_else(|| Error::BadWeights {
                layer: name.clone(),
                reason: format!("unknown role byte {role_byte}"),
            })?;
            let rank = take::<1>(input, "rank")?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            let mut count = 1u64;
            for _ in 0..rank {
                let d = u32::from_le_bytes(take::<4>(input, "dimension")?);
                count = count.saturating_mul(d as u64);
                shape.push(d);
            }
            if count > (1 << 31) {
                return Err(Error::InvalidArgument(format!(
                    "record '{name}' claims {count} elements"
                )));
            }
            let mut data = Vec::with_capacity(count as usize);
            for _ in 0..count {
                data.push(f32::from_le_bytes(take::<4>(input, &format!("data of '{name}'"))?));
            }
            let tensor = WeightTensor { role, shape, data };
            match layers.last_mut() {
                Some(last) if last.name == name => last.tensors.push(tensor),
                _ => layers.push(LayerWeights { name, tensors: vec![tensor] }),
            }
        }
        Ok(WeightStore { layers })
    }
}
