//! Binary container for basis libraries.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header
//!   magic           8 bytes   "BASISLIB"
//!   format_version  u32       currently 1
//!   dimension       u32
//!   max_degree      u32
//!   net_count       u32
//!   activation      u8 tag, f64, f64   tag: 0 relu, 1 sigmoid, 2 tanh, 3 mish,
//!                                      4 gelu, 5 selu (lambda, alpha), 6 celu (alpha, 0)
//!   width_count     u32, then width_count x u32 layer widths
//!   config_digest   32 bytes  SHA-256 of the build options
//!   created_unix    u64
//!   tolerance       f64
//!   config_len      u32, then config_len bytes of UTF-8 JSON (training configuration)
//! per net, net_count times in graded order
//!   powers          dimension x u32
//!   final_mse       f64
//!   epochs_run      u32
//!   seed            u64
//!   provenance      u8 (0 random, 1 inherited), then dimension x u32 source powers
//!                   (zeros for random)
//!   attempts        u32
//!   param_count     u64
//!   params          param_count x f64, layer by layer: weights row-major
//!                   (outputs x inputs), then biases
//!   handoff         u8 (0 absent, 1 present), then the pre-solve output layer
//!                   in the same layout as its entry in params
//! trailer
//!   checksum        u32       CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Loading checks magic and version first, then the structure, then the
//! checksum, and returns nothing unless all three pass.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{hex, BasisLibrary, BasisNet, BasisSpec, Provenance};
use crate::error::{Error, Result};
use crate::nn::{ActivationKind, Architecture, DenseLayer, ParamSet, TrainConfig};

pub const MAGIC: &[u8; 8] = b"BASISLIB";
pub const FORMAT_VERSION: u32 = 1;

/// Writes `library` to `path` through a temporary file and a rename.
pub fn save_library(library: &BasisLibrary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(library)?;
    let tmp = path.with_extension("partial");
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_library(path: impl AsRef<Path>) -> Result<BasisLibrary> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

fn activation_tag(kind: ActivationKind) -> (u8, f64, f64) {
    match kind {
        ActivationKind::Relu => (0, 0.0, 0.0),
        ActivationKind::Sigmoid => (1, 0.0, 0.0),
        ActivationKind::Tanh => (2, 0.0, 0.0),
        ActivationKind::Mish => (3, 0.0, 0.0),
        ActivationKind::Gelu => (4, 0.0, 0.0),
        ActivationKind::Selu { lambda, alpha } => (5, lambda, alpha),
        ActivationKind::Celu { alpha } => (6, alpha, 0.0),
    }
}

fn activation_from_tag(tag: u8, a: f64, b: f64) -> Result<ActivationKind> {
    Ok(match tag {
        0 => ActivationKind::Relu,
        1 => ActivationKind::Sigmoid,
        2 => ActivationKind::Tanh,
        3 => ActivationKind::Mish,
        4 => ActivationKind::Gelu,
        5 => ActivationKind::Selu { lambda: a, alpha: b },
        6 => ActivationKind::Celu { alpha: a },
        t => return Err(Error::Malformed(format!("unknown activation tag {t}"))),
    })
}

pub(crate) fn encode(library: &BasisLibrary) -> Result<Vec<u8>> {
    let d = library.dimension;
    let digest = decode_hex32(&library.config_digest)?;
    let config = serde_json::to_vec(&library.config)?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, d as u32);
    put_u32(&mut out, library.max_degree);
    put_u32(&mut out, library.nets.len() as u32);
    let (tag, a, b) = activation_tag(library.arch.activation());
    out.push(tag);
    put_f64(&mut out, a);
    put_f64(&mut out, b);
    put_u32(&mut out, library.arch.widths().len() as u32);
    for &w in library.arch.widths() {
        put_u32(&mut out, w as u32);
    }
    out.extend_from_slice(&digest);
    out.extend_from_slice(&library.created_unix.to_le_bytes());
    put_f64(&mut out, library.tolerance);
    put_u32(&mut out, config.len() as u32);
    out.extend_from_slice(&config);

    for net in &library.nets {
        if net.spec.dimension() != d {
            return Err(Error::InvalidConfig(format!(
                "basis {} does not match library dimension {d}",
                net.spec
            )));
        }
        for &p in net.spec.powers() {
            put_u32(&mut out, p);
        }
        put_f64(&mut out, net.final_mse);
        put_u32(&mut out, net.epochs_run);
        out.extend_from_slice(&net.seed.to_le_bytes());
        match &net.provenance {
            Provenance::Random => {
                out.push(0);
                (0..d).for_each(|_| put_u32(&mut out, 0));
            }
            Provenance::Inherited { from } => {
                out.push(1);
                from.powers().iter().for_each(|&p| put_u32(&mut out, p));
            }
        }
        put_u32(&mut out, net.attempts);
        out.extend_from_slice(&(net.params.n_params() as u64).to_le_bytes());
        for v in net.params.iter() {
            put_f64(&mut out, v);
        }
        match &net.handoff_output {
            None => out.push(0),
            Some(layer) => {
                let last = library.arch.widths().len() - 2;
                let (i, o) = (library.arch.widths()[last], library.arch.widths()[last + 1]);
                if layer.inputs != i || layer.outputs != o || layer.weights.len() != i * o || layer.biases.len() != o {
                    return Err(Error::InvalidConfig(format!(
                        "basis {} has a misshapen handoff layer",
                        net.spec
                    )));
                }
                out.push(1);
                layer
                    .weights
                    .iter()
                    .chain(&layer.biases)
                    .for_each(|&v| put_f64(&mut out, v));
            }
        }
    }
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<BasisLibrary> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Malformed("not a basis library (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let dimension = r.u32()? as usize;
    if !(1..=2).contains(&dimension) {
        return Err(Error::Malformed(format!("dimension {dimension}")));
    }
    let max_degree = r.u32()?;
    let net_count = r.u32()? as usize;
    let (tag, a, b) = (r.u8()?, r.f64()?, r.f64()?);
    let activation = activation_from_tag(tag, a, b)?;
    let width_count = r.u32()? as usize;
    if width_count > r.remaining() / 4 {
        return Err(Error::Malformed(format!("width count {width_count}")));
    }
    let widths = (0..width_count)
        .map(|_| r.u32().map(|w| w as usize))
        .collect::<Result<Vec<_>>>()?;
    let arch = Architecture::new(widths, activation).map_err(|e| Error::Malformed(format!("architecture: {e}")))?;
    let config_digest = hex(r.take(32)?);
    let created_unix = r.u64()?;
    let tolerance = r.f64()?;
    let config_len = r.u32()? as usize;
    let config: TrainConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| Error::Malformed(format!("configuration record: {e}")))?;

    let expected_params = arch.n_params();
    let mut nets = Vec::with_capacity(net_count.min(r.remaining()));
    for _ in 0..net_count {
        let powers = (0..dimension).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let spec = BasisSpec::new(powers).map_err(|e| Error::Malformed(e.to_string()))?;
        let final_mse = r.f64()?;
        let epochs_run = r.u32()?;
        let seed = r.u64()?;
        let prov_tag = r.u8()?;
        let from = (0..dimension).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let provenance = match prov_tag {
            0 => Provenance::Random,
            1 => Provenance::Inherited {
                from: BasisSpec::new(from).map_err(|e| Error::Malformed(e.to_string()))?,
            },
            t => return Err(Error::Malformed(format!("unknown provenance tag {t}"))),
        };
        let attempts = r.u32()?;
        let n = r.u64()? as usize;
        if n != expected_params {
            return Err(Error::Malformed(format!(
                "basis {spec} stores {n} parameters, architecture needs {expected_params}"
            )));
        }
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Malformed("parameter count".into()))?,
        )?;
        let flat: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let params = ParamSet::from_flat(&arch, &flat).map_err(|e| Error::Malformed(e.to_string()))?;
        let handoff_output = match r.u8()? {
            0 => None,
            1 => {
                let w = arch.widths();
                let (inputs, outputs) = (w[w.len() - 2], w[w.len() - 1]);
                let mut layer = DenseLayer::zeros(inputs, outputs);
                for v in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                    *v = r.f64()?;
                }
                Some(layer)
            }
            t => return Err(Error::Malformed(format!("unknown handoff tag {t}"))),
        };
        nets.push(BasisNet {
            spec,
            params,
            final_mse,
            epochs_run,
            seed,
            provenance,
            attempts,
            handoff_output,
        });
    }
    let body_len = r.pos;
    let stored = r.u32()?;
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    Ok(BasisLibrary {
        dimension,
        max_degree,
        arch,
        config_digest,
        created_unix,
        config,
        tolerance,
        nets,
    })
}

fn decode_hex32(text: &str) -> Result<[u8; 32]> {
    let mut out = [0u8; 32];
    if text.len() != 64 {
        return Err(Error::InvalidConfig(format!(
            "config digest '{text}' is not 64 hex digits"
        )));
    }
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&text[2 * i..2 * i + 2], 16)
            .map_err(|_| Error::InvalidConfig(format!("config digest '{text}' is not hex")))?;
    }
    Ok(out)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Malformed(format!(
                "unexpected end of file at byte {} (wanted {n} more, {} left)",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{progressive_pretrain, PretrainOptions};
    use crate::nn::{SampleSpec, Sampling};

    fn small_library() -> BasisLibrary {
        let mut opts = PretrainOptions::defaults(2).unwrap();
        opts.arch = Architecture::single_hidden(2, 16, ActivationKind::selu()).unwrap();
        opts.config.epochs = 3;
        opts.config.samples = SampleSpec::reference(2, Sampling::Grid { per_axis: 6 });
        opts.tolerance = 1.0;
        progressive_pretrain(2, 2, &opts).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let lib = small_library();
        let bytes = encode(&lib).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back, lib);
        for (a, b) in lib.nets.iter().zip(&back.nets) {
            let bits = |p: &ParamSet| p.iter().map(f64::to_bits).collect::<Vec<_>>();
            assert_eq!(bits(&a.params), bits(&b.params));
            assert_eq!(a.final_mse.to_bits(), b.final_mse.to_bits());
        }
        assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_malformed() {
        let bytes = encode(&small_library()).unwrap();
        for cut in [0, 5, 12, 40, bytes.len() / 2, bytes.len() - 5, bytes.len() - 1] {
            assert!(
                matches!(decode(&bytes[..cut]), Err(Error::Malformed(_))),
                "cut at {cut}"
            );
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode(&longer), Err(Error::Malformed(_))));
    }

    #[test]
    fn corruption_and_version_errors() {
        let bytes = encode(&small_library()).unwrap();
        let mut flipped = bytes.clone();
        let n = flipped.len();
        flipped[n - 20] ^= 0x01;
        assert!(matches!(decode(&flipped), Err(Error::Checksum { .. })));

        let mut future = bytes.clone();
        future[8..12].copy_from_slice(&7u32.to_le_bytes());
        match decode(&future) {
            Err(e @ Error::VersionMismatch { found: 7, supported: 1 }) => {
                let msg = e.to_string();
                assert!(msg.contains('7') && msg.contains('1'));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(decode(&magic), Err(Error::Malformed(_))));
    }

    #[test]
    fn save_and_load_through_disk() {
        let lib = small_library();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lib.bin");
        save_library(&lib, &path).unwrap();
        assert_eq!(load_library(&path).unwrap(), lib);
        assert!(!path.with_extension("partial").exists());
        assert!(matches!(
            load_library(dir.path().join("missing.bin")),
            Err(Error::Io { .. })
        ));
    }
}
