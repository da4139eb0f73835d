//! Binary checkpoint: trained parameters followed by the initialization snapshot.
//!
//! ```text
//! "LLNS" | version: u8 = 1 | depth, input_dim, hidden_width, output_dim: u32 LE
//! trained layers  : per layer, weights row-major then bias, f64 LE
//! snapshot layers : same layout
//! ```

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Array2};

use super::model::{ArchSpec, Dense, InitSnapshot, ModelState};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LLNS";
pub const VERSION: u8 = 1;
const WHAT: &str = "checkpoint";
const HEADER_LEN: usize = 4 + 1 + 4 * 4;

pub fn encode_checkpoint(model: &ModelState, snapshot: &InitSnapshot) -> Result<Vec<u8>> {
    snapshot.check_compatible(model)?;
    let arch = model.arch();
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * arch.parameter_count());
    buf.extend_from_slice(MAGIC);
    buf.push(VERSION);
    for v in [
        arch.depth,
        arch.input_dim,
        arch.hidden_width,
        arch.output_dim,
    ] {
        let v =
            u32::try_from(v).map_err(|_| Error::InvalidArch(format!("{v} does not fit in u32")))?;
        buf.write_u32::<LittleEndian>(v).expect("vec write");
    }
    for layer in model.layers().iter().chain(snapshot.layers()) {
        for &v in layer.weights.iter().chain(layer.bias.iter()) {
            buf.write_f64::<LittleEndian>(v).expect("vec write");
        }
    }
    Ok(buf)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelState, InitSnapshot)> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            what: WHAT,
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic {
            what: WHAT,
            expected: MAGIC.to_vec(),
            found: bytes[..4].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            what: WHAT,
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    let version = bytes[4];
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            what: WHAT,
            expected: VERSION as u32,
            found: version as u32,
        });
    }
    let mut cur = Cursor::new(&bytes[5..]);
    let mut header = [0usize; 4];
    for slot in header.iter_mut() {
        *slot = cur.read_u32::<LittleEndian>().expect("length checked") as usize;
    }
    let [depth, input_dim, hidden_width, output_dim] = header;
    let arch = ArchSpec::new(input_dim, hidden_width, output_dim, depth)?;

    let needed = HEADER_LEN + 2 * 8 * arch.parameter_count();
    if bytes.len() < needed {
        return Err(Error::Truncated {
            what: WHAT,
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed {
            what: WHAT,
            reason: format!("{} trailing bytes", bytes.len() - needed),
        });
    }
    let trained = read_layers(&arch, &mut cur)?;
    let initial = read_layers(&arch, &mut cur)?;
    let model = ModelState::from_layers(arch, trained)?;
    let snapshot = InitSnapshot::from_layers(arch, initial)?;
    Ok((model, snapshot))
}

fn read_layers(arch: &ArchSpec, cur: &mut impl Read) -> Result<Vec<Dense>> {
    (1..=arch.depth)
        .map(|l| {
            let (o, i) = arch.layer_shape(l);
            let mut w = vec![0.0; o * i];
            cur.read_f64_into::<LittleEndian>(&mut w)
                .expect("length checked");
            let mut b = vec![0.0; o];
            cur.read_f64_into::<LittleEndian>(&mut b)
                .expect("length checked");
            Ok(Dense {
                weights: Array2::from_shape_vec((o, i), w).expect("shape from arch"),
                bias: Array1::from(b),
            })
        })
        .collect()
}

pub fn save_checkpoint(
    model: &ModelState,
    snapshot: &InitSnapshot,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(model, snapshot)?;
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelState, InitSnapshot)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
