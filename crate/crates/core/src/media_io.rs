//! Frame buffers and the CMRV raw container.
//!
//! CMRV layout (all integers little-endian `u32`):
//!
//! ```text
//! "CMRV" | width | height | frame_count | channels | frame 0 | frame 1 | ...
//! ```
//!
//! Each frame is `width * height * channels` bytes, row-major, channel-interleaved.
//! The container does not carry a frame rate; decoded buffers get [`Fps::DEFAULT`].

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CMRV_MAGIC: &[u8; 4] = b"CMRV";
pub const CMRV_HEADER_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediaError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("{0} trailing bytes after the last frame")]
    TrailingBytes(usize),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid video: {0}")]
    InvalidVideo(String),
    #[error("external decoder failed: {0}")]
    Decoder(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MediaError {
    fn from(e: std::io::Error) -> Self {
        MediaError::Io(e.to_string())
    }
}

/// Frame rate as a rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub const DEFAULT: Fps = Fps { num: 30, den: 1 };

    pub fn new(num: u32, den: u32) -> Self {
        Fps { num, den }
    }

    pub fn as_f64(&self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl Default for Fps {
    fn default() -> Self {
        Fps::DEFAULT
    }
}

/// An 8-bit frame with one (gray) or three (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self, MediaError> {
        if channels != 1 && channels != 3 {
            return Err(MediaError::InvalidFrame(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidFrame("zero-sized frame".into()));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(MediaError::InvalidFrame(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            channels,
            data,
        })
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self, MediaError> {
        let len = width as usize * height as usize * channels as usize;
        Frame::new(width, height, channels, vec![value; len])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    fn same_layout(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

/// A single-channel frame, the input to pixel-difference scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayFrame {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, MediaError> {
        if data.len() != width as usize * height as usize {
            return Err(MediaError::InvalidFrame(format!(
                "gray data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(GrayFrame {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Decoded frames of one video. All frames share a layout and there is at least one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoBuffer {
    frames: Vec<Frame>,
    fps: Fps,
    source_id: String,
}

impl VideoBuffer {
    pub fn new(frames: Vec<Frame>, fps: Fps, source_id: impl Into<String>) -> Result<Self, MediaError> {
        let first = frames
            .first()
            .ok_or_else(|| MediaError::InvalidVideo("a video needs at least one frame".into()))?;
        if let Some(i) = frames.iter().position(|f| !f.same_layout(first)) {
            return Err(MediaError::InvalidVideo(format!(
                "frame {i} layout differs from frame 0"
            )));
        }
        Ok(VideoBuffer {
            frames,
            fps,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn width(&self) -> u32 {
        self.frames[0].width
    }

    pub fn height(&self) -> u32 {
        self.frames[0].height
    }

    pub fn channels(&self) -> u8 {
        self.frames[0].channels
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn with_fps(mut self, fps: Fps) -> Self {
        self.fps = fps;
        self
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Decodes a CMRV byte stream. The result has an empty source id and the default frame rate.
pub fn read_cmrv(bytes: &[u8]) -> Result<VideoBuffer, MediaError> {
    if bytes.len() < CMRV_HEADER_LEN {
        return Err(MediaError::MalformedHeader(format!(
            "need {CMRV_HEADER_LEN} header bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[..4] != CMRV_MAGIC {
        return Err(MediaError::MalformedHeader("bad magic".into()));
    }
    let width = read_u32(bytes, 4);
    let height = read_u32(bytes, 8);
    let frame_count = read_u32(bytes, 12);
    let channels = read_u32(bytes, 16);

    if width == 0 || height == 0 {
        return Err(MediaError::MalformedHeader(format!(
            "zero dimension {width}x{height}"
        )));
    }
    if frame_count == 0 {
        return Err(MediaError::MalformedHeader("frame count is zero".into()));
    }
    if channels != 1 && channels != 3 {
        return Err(MediaError::MalformedHeader(format!(
            "channels must be 1 or 3, got {channels}"
        )));
    }
    let frame_len = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(channels as usize))
        .ok_or_else(|| MediaError::MalformedHeader("frame size overflows".into()))?;
    let payload_len = frame_len
        .checked_mul(frame_count as usize)
        .ok_or_else(|| MediaError::MalformedHeader("payload size overflows".into()))?;

    let payload = &bytes[CMRV_HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(MediaError::TruncatedPayload {
            expected: payload_len,
            found: payload.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(MediaError::TrailingBytes(payload.len() - payload_len));
    }

    let frames = payload
        .chunks_exact(frame_len)
        .map(|chunk| Frame {
            width,
            height,
            channels: channels as u8,
            data: chunk.to_vec(),
        })
        .collect();
    Ok(VideoBuffer {
        frames,
        fps: Fps::DEFAULT,
        source_id: String::new(),
    })
}

/// Encodes a video as CMRV. Inverse of [`read_cmrv`].
pub fn write_cmrv(video: &VideoBuffer) -> Vec<u8> {
    let frame_len = video.frames[0].data.len();
    let mut out = Vec::with_capacity(CMRV_HEADER_LEN + frame_len * video.frames.len());
    out.extend_from_slice(CMRV_MAGIC);
    out.extend_from_slice(&video.width().to_le_bytes());
    out.extend_from_slice(&video.height().to_le_bytes());
    out.extend_from_slice(&(video.frames.len() as u32).to_le_bytes());
    out.extend_from_slice(&(video.channels() as u32).to_le_bytes());
    for frame in &video.frames {
        out.extend_from_slice(&frame.data);
    }
    out
}

/// Reads a `.cmrv` file, using the file stem as the source id.
pub fn load_cmrv(path: &Path) -> Result<VideoBuffer, MediaError> {
    let bytes = std::fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(read_cmrv(&bytes)?.with_source_id(id))
}

pub fn save_cmrv(path: &Path, video: &VideoBuffer) -> Result<(), MediaError> {
    std::fs::write(path, write_cmrv(video))?;
    Ok(())
}

/// BT.601 luma, rounded half away from zero.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
    y.round().clamp(0.0, 255.0) as u8
}

pub fn to_grayscale(frame: &Frame) -> GrayFrame {
    let data = match frame.channels {
        1 => frame.data.clone(),
        _ => frame
            .data
            .chunks_exact(3)
            .map(|px| luma(px[0], px[1], px[2]))
            .collect(),
    };
    GrayFrame {
        width: frame.width,
        height: frame.height,
        data,
    }
}

/// PNG encoding of a frame, used for image payloads on the wire.
pub fn encode_png(frame: &Frame) -> Result<Vec<u8>, MediaError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, frame.width, frame.height);
        encoder.set_color(match frame.channels {
            1 => png::ColorType::Grayscale,
            _ => png::ColorType::Rgb,
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| MediaError::Io(e.to_string()))?;
        writer
            .write_image_data(&frame.data)
            .map_err(|e| MediaError::Io(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes arbitrary video files by piping raw RGB frames out of an external tool.
///
/// The tool is invoked with an ffmpeg-compatible argument list:
/// `-v error -i <input> -f rawvideo -pix_fmt rgb24 -s WxH pipe:1`.
#[derive(Debug, Clone)]
pub struct ExternalDecoder {
    pub program: PathBuf,
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
}

impl ExternalDecoder {
    pub fn new(program: impl Into<PathBuf>, width: u32, height: u32) -> Self {
        ExternalDecoder {
            program: program.into(),
            width,
            height,
            fps: Fps::DEFAULT,
        }
    }

    pub fn args(&self, input: &Path) -> Vec<String> {
        vec![
            "-v".into(),
            "error".into(),
            "-i".into(),
            input.to_string_lossy().into_owned(),
            "-f".into(),
            "rawvideo".into(),
            "-pix_fmt".into(),
            "rgb24".into(),
            "-s".into(),
            format!("{}x{}", self.width, self.height),
            "pipe:1".into(),
        ]
    }

    pub fn decode(&self, input: &Path) -> Result<VideoBuffer, MediaError> {
        if self.width == 0 || self.height == 0 {
            return Err(MediaError::Decoder("decode size must be nonzero".into()));
        }
        let mut child = Command::new(&self.program)
            .args(self.args(input))
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| MediaError::Decoder(format!("{}: {e}", self.program.display())))?;
        let mut raw = Vec::new();
        child
            .stdout
            .take()
            .expect("stdout is piped")
            .read_to_end(&mut raw)?;
        let output = child.wait_with_output()?;
        if !output.status.success() {
            return Err(MediaError::Decoder(format!(
                "exit status {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let frame_len = self.width as usize * self.height as usize * 3;
        if raw.len() % frame_len != 0 {
            return Err(MediaError::Decoder(format!(
                "decoder produced {} bytes, not a multiple of the {frame_len}-byte frame",
                raw.len()
            )));
        }
        let frames = raw
            .chunks_exact(frame_len)
            .map(|c| Frame::new(self.width, self.height, 3, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        let id = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        VideoBuffer::new(frames, self.fps, id)
    }
}
