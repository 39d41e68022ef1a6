//! Frame sources: image sequences on disk and rendered gesture scripts.

use std::path::{Path, PathBuf};

use palmkey_core::imaging::Frame;
use thiserror::Error;

use crate::script::{GestureScript, ScriptError};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("decoding {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error(transparent)]
    Script(#[from] ScriptError),

    #[error("no .png/.ppm/.pnm images in {0}")]
    Empty(PathBuf),

    #[error("frame {index} is {found:?}, earlier frames were {expected:?}")]
    DimensionChange {
        index: u64,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("bad source {0:?}: expected seq:<dir>, script:<file> or camera:<id>")]
    BadSpec(String),

    #[error("camera capture is not available in this build")]
    CameraUnavailable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    ImageSequence,
    SyntheticScript,
    Camera,
}

/// A finite or live stream of equally sized frames with increasing
/// `frame_index`.
pub trait FrameSource: Send {
    fn kind(&self) -> SourceKind;

    fn dims(&self) -> (usize, usize);

    fn fps_hint(&self) -> f64;

    /// `None` at end of stream.
    fn next_frame(&mut self) -> Option<Result<Frame, SourceError>>;
}

/// Decode an image file into an RGB frame.
pub fn load_image(path: &Path) -> Result<Frame, image::ImageError> {
    let img = image::open(path)?.into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels = img.pixels().map(|p| p.0).collect();
    Ok(Frame::new(w, h, pixels).expect("decoder returned a consistent buffer"))
}

/// Encode a frame; the format follows the file extension.
pub fn save_image(frame: &Frame, path: &Path) -> Result<(), image::ImageError> {
    let raw: Vec<u8> = frame.pixels().iter().flatten().copied().collect();
    image::save_buffer(
        path,
        &raw,
        frame.width() as u32,
        frame.height() as u32,
        image::ExtendedColorType::Rgb8,
    )
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pnm"];

/// Image files of a directory in file-name order.
pub struct ImageSequence {
    files: Vec<PathBuf>,
    next: usize,
    dims: (usize, usize),
    fps: f64,
}

impl ImageSequence {
    pub fn open(dir: &Path, fps: f64) -> Result<Self, SourceError> {
        let io = |source| SourceError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            let ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            if ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                files.push(path);
            }
        }
        files.sort();
        let first = files.first().ok_or_else(|| SourceError::Empty(dir.to_path_buf()))?;
        let dims = image::image_dimensions(first).map_err(|source| SourceError::Image {
            path: first.clone(),
            source,
        })?;
        Ok(Self {
            files,
            next: 0,
            dims: (dims.0 as usize, dims.1 as usize),
            fps,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for ImageSequence {
    fn kind(&self) -> SourceKind {
        SourceKind::ImageSequence
    }

    fn dims(&self) -> (usize, usize) {
        self.dims
    }

    fn fps_hint(&self) -> f64 {
        self.fps
    }

    fn next_frame(&mut self) -> Option<Result<Frame, SourceError>> {
        let path = self.files.get(self.next)?;
        let index = self.next as u64;
        self.next += 1;
        Some(
            load_image(path)
                .map_err(|source| SourceError::Image {
                    path: path.clone(),
                    source,
                })
                .and_then(|f| {
                    if f.dims() != self.dims {
                        return Err(SourceError::DimensionChange {
                            index,
                            expected: self.dims,
                            found: f.dims(),
                        });
                    }
                    Ok(f.with_index(index))
                }),
        )
    }
}

/// Renders a [`GestureScript`] frame by frame.
pub struct ScriptSource {
    script: GestureScript,
    next: usize,
}

impl ScriptSource {
    pub fn new(script: GestureScript) -> Self {
        Self { script, next: 0 }
    }

    pub fn load(path: &Path) -> Result<Self, SourceError> {
        Ok(Self::new(GestureScript::load(path)?))
    }

    pub fn script(&self) -> &GestureScript {
        &self.script
    }
}

impl FrameSource for ScriptSource {
    fn kind(&self) -> SourceKind {
        SourceKind::SyntheticScript
    }

    fn dims(&self) -> (usize, usize) {
        (self.script.width, self.script.height)
    }

    fn fps_hint(&self) -> f64 {
        self.script.fps
    }

    fn next_frame(&mut self) -> Option<Result<Frame, SourceError>> {
        if self.next >= self.script.len() {
            return None;
        }
        self.next += 1;
        Some(Ok(self.script.render(self.next - 1)))
    }
}

/// Open `seq:<dir>` or `script:<file>`. Image sequences play at 30 fps.
pub fn open_source(spec: &str) -> Result<Box<dyn FrameSource>, SourceError> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| SourceError::BadSpec(spec.into()))?;
    match kind {
        "seq" => Ok(Box::new(ImageSequence::open(Path::new(arg), 30.0)?)),
        "script" => Ok(Box::new(ScriptSource::load(Path::new(arg))?)),
        "camera" => Err(SourceError::CameraUnavailable),
        _ => Err(SourceError::BadSpec(spec.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_source_indexes_frames() {
        let script = GestureScript::parse("size 8 8\nnone\n4 4 2 2 open\nnone\n", None).unwrap();
        let mut src = ScriptSource::new(script);
        assert_eq!(src.dims(), (8, 8));
        let idx: Vec<u64> = std::iter::from_fn(|| src.next_frame())
            .map(|f| f.unwrap().frame_index)
            .collect();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(open_source("video.mp4"), Err(SourceError::BadSpec(_))));
        assert!(matches!(open_source("tape:x"), Err(SourceError::BadSpec(_))));
        assert!(matches!(open_source("camera:0"), Err(SourceError::CameraUnavailable)));
    }
}
