//! Background model files.
//!
//! All integers and floats are little-endian.
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `PKBGMDL\0` |
//! | 8 | 2 | version, `1` |
//! | 10 | 2 | reserved, `0` |
//! | 12 | 4 | width (u32) |
//! | 16 | 4 | height (u32) |
//! | 20 | 4 | sample count (u32) |
//! | 24 | 12·w·h | means, f32 R G B per pixel, row-major |
//! | … | 12·w·h | std-devs, same layout |

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use palmkey_core::fizi::{BackgroundModel, FiziError};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"PKBGMDL\0";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
const MAX_PIXELS: usize = 1 << 26;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a background model file")]
    BadMagic,

    #[error("unsupported model file version {0}")]
    Version(u16),

    #[error("model of {width}x{height} pixels is too large")]
    TooLarge { width: usize, height: usize },

    #[error("model file is truncated")]
    Truncated,

    #[error("{0} unexpected bytes after the model")]
    TrailingBytes(usize),

    #[error(transparent)]
    Model(#[from] FiziError),

    #[error(transparent)]
    Io(std::io::Error),
}

impl From<std::io::Error> for ModelFileError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ModelFileError::Truncated
        } else {
            ModelFileError::Io(e)
        }
    }
}

pub fn write_model(model: &BackgroundModel, mut w: impl Write) -> Result<(), ModelFileError> {
    let (width, height) = model.dims();
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    w.write_u16::<LittleEndian>(0)?;
    w.write_u32::<LittleEndian>(width as u32)?;
    w.write_u32::<LittleEndian>(height as u32)?;
    w.write_u32::<LittleEndian>(model.sample_count())?;
    for block in [model.mean(), model.std()] {
        for px in block {
            for v in px {
                w.write_f32::<LittleEndian>(*v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_model(mut r: impl Read) -> Result<BackgroundModel, ModelFileError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(ModelFileError::Version(version));
    }
    let _reserved = r.read_u16::<LittleEndian>()?;
    let width = r.read_u32::<LittleEndian>()? as usize;
    let height = r.read_u32::<LittleEndian>()? as usize;
    let samples = r.read_u32::<LittleEndian>()?;
    let n = width
        .checked_mul(height)
        .filter(|n| *n <= MAX_PIXELS)
        .ok_or(ModelFileError::TooLarge { width, height })?;

    let mut read_block = || -> Result<Vec<[f32; 3]>, ModelFileError> {
        let mut raw = vec![0f32; n * 3];
        r.read_f32_into::<LittleEndian>(&mut raw)?;
        Ok(raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    };
    let mean = read_block()?;
    let std = read_block()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(ModelFileError::TrailingBytes(rest.len()));
    }
    Ok(BackgroundModel::from_parts(width, height, mean, std, samples)?)
}

pub fn save_model(model: &BackgroundModel, path: &Path) -> Result<(), ModelFileError> {
    let f = std::fs::File::create(path)?;
    write_model(model, std::io::BufWriter::new(f))
}

pub fn load_model(path: &Path) -> Result<BackgroundModel, ModelFileError> {
    let f = std::fs::File::open(path)?;
    read_model(std::io::BufReader::new(f))
}
