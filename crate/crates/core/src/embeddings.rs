//! Image/text embedding backends and cosine similarity.
//!
//! [`PixelEmbedder`] is a deterministic offline stand-in for a CLIP-style
//! encoder: images become a mean-centered 8x8 luma grid, text becomes a
//! mean-centered bag of hashed tokens in the same 64-dim space.
//! [`HttpEmbedder`] delegates to an external model server.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media_io::{encode_png, to_grayscale, Frame};
use crate::util::{fnv1a64, InFlightLimit};

pub const GRID: usize = 8;
pub const PIXEL_DIM: usize = GRID * GRID;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("text is empty")]
    EmptyText,
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("no frames given")]
    NoFrames,
    #[error("every frame embedding had zero norm")]
    AllFramesSkipped,
}

/// A finite real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Anything that maps frames and text into a shared vector space.
///
/// Implementations must be deterministic and keep a fixed dimension.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector, EmbeddingError>;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError>;
}

fn mean_center(mut v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= mean;
    }
    v
}

/// Lowercased alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Deterministic 64-dim backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelEmbedder;

impl PixelEmbedder {
    /// Box-averaged 8x8 luma grid, flattened row-major, before centering.
    pub fn grid(frame: &Frame) -> Vec<f64> {
        let gray = to_grayscale(frame);
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let data = gray.data();
        let mut out = Vec::with_capacity(PIXEL_DIM);
        for gy in 0..GRID {
            let y0 = gy * h / GRID;
            let y1 = ((gy + 1) * h / GRID).max(y0 + 1);
            for gx in 0..GRID {
                let x0 = gx * w / GRID;
                let x1 = ((gx + 1) * w / GRID).max(x0 + 1);
                let mut sum = 0u64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += data[y * w + x] as u64;
                    }
                }
                out.push(sum as f64 / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
        out
    }
}

impl Embedder for PixelEmbedder {
    fn dimension(&self) -> usize {
        PIXEL_DIM
    }

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
        EmbeddingVector::new(mean_center(Self::grid(frame)))
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut counts = vec![0.0; PIXEL_DIM];
        for t in &tokens {
            counts[(fnv1a64(t.as_bytes()) % PIXEL_DIM as u64) as usize] += 1.0;
        }
        EmbeddingVector::new(mean_center(counts))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    kind: &'a str,
    payload: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// External model server speaking `POST {endpoint}/embed`.
///
/// Images are sent as base64-encoded PNG; text as a UTF-8 string.
#[derive(Debug)]
pub struct HttpEmbedder {
    endpoint: String,
    dimension: usize,
    agent: ureq::Agent,
    limit: InFlightLimit,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        HttpEmbedder {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            dimension,
            agent,
            limit: InFlightLimit::new(max_in_flight),
        }
    }

    fn call(&self, kind: &str, payload: String) -> Result<EmbeddingVector, EmbeddingError> {
        let _slot = self.limit.acquire();
        let url = format!("{}/embed", self.endpoint);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&EmbedRequest { kind, payload })
            .map_err(|e| EmbeddingError::BackendUnavailable(format!("{url}: {e}")))?;
        let body: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbeddingError::BackendUnavailable(format!("bad response: {e}")))?;
        if body.vector.len() != self.dimension {
            return Err(EmbeddingError::DimensionMismatch(
                body.vector.len(),
                self.dimension,
            ));
        }
        EmbeddingVector::new(body.vector)
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
        let png = encode_png(frame).map_err(|e| EmbeddingError::BackendUnavailable(e.to_string()))?;
        let payload = base64::engine::general_purpose::STANDARD.encode(png);
        self.call("image", payload)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        self.call("text", text.to_string())
    }
}

/// Backend selection for callers that configure embedding at runtime.
#[derive(Debug)]
pub enum EmbeddingProvider {
    Pixel(PixelEmbedder),
    External(HttpEmbedder),
}

impl EmbeddingProvider {
    pub fn pixel() -> Self {
        EmbeddingProvider::Pixel(PixelEmbedder)
    }
}

impl Embedder for EmbeddingProvider {
    fn dimension(&self) -> usize {
        match self {
            EmbeddingProvider::Pixel(p) => p.dimension(),
            EmbeddingProvider::External(h) => h.dimension(),
        }
    }

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
        match self {
            EmbeddingProvider::Pixel(p) => p.embed_image(frame),
            EmbeddingProvider::External(h) => h.embed_image(frame),
        }
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        match self {
            EmbeddingProvider::Pixel(p) => p.embed_text(text),
            EmbeddingProvider::External(h) => h.embed_text(text),
        }
    }
}

pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if u.dim() != v.dim() {
        return Err(EmbeddingError::DimensionMismatch(u.dim(), v.dim()));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    let dot: f64 = u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Mean frame-to-text cosine. Frames whose embedding has zero norm are skipped.
pub fn clipsim<E: Embedder + ?Sized>(
    frames: &[Frame],
    text: &str,
    embedder: &E,
) -> Result<f64, EmbeddingError> {
    if frames.is_empty() {
        return Err(EmbeddingError::NoFrames);
    }
    let text_vec = embedder.embed_text(text)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, frame) in frames.iter().enumerate() {
        let img = embedder.embed_image(frame)?;
        match cosine(&img, &text_vec) {
            Ok(c) => {
                total += c;
                used += 1;
            }
            Err(EmbeddingError::ZeroVector) if !text_vec.is_zero() => {
                log::warn!("clipsim: frame {i} has a zero embedding, skipped");
            }
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(EmbeddingError::AllFramesSkipped);
    }
    Ok(total / used as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn black_frame_centers_to_zero() {
        let f = Frame::filled(16, 16, 3, 0).unwrap();
        let e = PixelEmbedder.embed_image(&f).unwrap();
        assert_eq!(e.dim(), 64);
        assert!(e.is_zero());
    }

    #[test]
    fn single_bright_pixel_grid() {
        let mut data = vec![0u8; 64];
        data[27] = 255;
        let f = Frame::new(8, 8, 1, data).unwrap();
        let e = PixelEmbedder.embed_image(&f).unwrap();
        for (i, &v) in e.values().iter().enumerate() {
            let want = if i == 27 { 255.0 * 63.0 / 64.0 } else { -255.0 / 64.0 };
            assert!((v - want).abs() < 1e-12, "entry {i}: {v} vs {want}");
        }
    }

    #[test]
    fn identical_frames_identical_vectors() {
        let f = Frame::new(3, 5, 1, (0..15).map(|i| i * 17).collect()).unwrap();
        assert_eq!(
            PixelEmbedder.embed_image(&f).unwrap(),
            PixelEmbedder.embed_image(&f.clone()).unwrap()
        );
    }

    #[test]
    fn text_embedding_counts() {
        let e = PixelEmbedder;
        assert_eq!(e.embed_text("bloom").unwrap(), e.embed_text("bloom").unwrap());
        let aa = e.embed_text("a a").unwrap();
        let a = e.embed_text("a").unwrap();
        for (x, y) in aa.values().iter().zip(a.values()) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
        assert!((cosine(&aa, &a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(e.embed_text("  "), Err(EmbeddingError::EmptyText));
    }

    #[test]
    fn disjoint_words_in_different_buckets() {
        let bucket = |w: &str| fnv1a64(w.as_bytes()) % 64;
        let (w1, w2) = ("flower", "ice");
        assert_ne!(bucket(w1), bucket(w2));
        let c = cosine(
            &PixelEmbedder.embed_text(w1).unwrap(),
            &PixelEmbedder.embed_text(w2).unwrap(),
        )
        .unwrap();
        assert!(c < 1.0);
        // centered one-hot vectors: dot = -1/64, squared norms = 63/64
        assert!((c + 1.0 / 63.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_examples() {
        let u = vec(&[1.0, 2.0, 2.0]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&u, &vec(&[-1.0, -2.0, -2.0])).unwrap() + 1.0).abs() < 1e-15);
        assert!((cosine(&u, &vec(&[2.0, 1.0, 2.0])).unwrap() - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(cosine(&vec(&[1.0, 0.0]), &vec(&[0.0, 1.0])).unwrap(), 0.0);
        let c = cosine(&vec(&[1.0, 1.0]), &vec(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine(&u, &vec(&[0.0, 0.0, 0.0])), Err(EmbeddingError::ZeroVector));
        assert_eq!(
            cosine(&u, &vec(&[1.0])),
            Err(EmbeddingError::DimensionMismatch(3, 1))
        );
        assert_eq!(EmbeddingVector::new(vec![f64::NAN]), Err(EmbeddingError::NonFinite));
    }

    /// Frames are keyed by their first byte; text always maps to the same vector.
    struct Table(Vec<(u8, Vec<f64>)>, Vec<f64>);

    impl Embedder for Table {
        fn dimension(&self) -> usize {
            self.1.len()
        }
        fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
            let key = frame.data()[0];
            let v = self.0.iter().find(|(k, _)| *k == key).unwrap().1.clone();
            EmbeddingVector::new(v)
        }
        fn embed_text(&self, _: &str) -> Result<EmbeddingVector, EmbeddingError> {
            EmbeddingVector::new(self.1.clone())
        }
    }

    fn keyed(k: u8) -> Frame {
        Frame::filled(1, 1, 1, k).unwrap()
    }

    #[test]
    fn clipsim_examples() {
        let same = Table(vec![(0, vec![1.0, 0.0])], vec![1.0, 0.0]);
        assert_eq!(clipsim(&[keyed(0), keyed(0)], "x", &same).unwrap(), 1.0);

        let ortho = Table(vec![(0, vec![0.0, 1.0])], vec![1.0, 0.0]);
        assert_eq!(clipsim(&[keyed(0)], "x", &ortho).unwrap(), 0.0);

        // cosines 0.2 and 0.6 against the text axis (1, 0)
        let (s2, s6) = ((1.0f64 - 0.04).sqrt(), (1.0f64 - 0.36).sqrt());
        let mixed = Table(vec![(1, vec![0.2, s2]), (2, vec![0.6, s6])], vec![1.0, 0.0]);
        let got = clipsim(&[keyed(1), keyed(2)], "x", &mixed).unwrap();
        assert!((got - 0.4).abs() < 1e-12);
    }

    #[test]
    fn clipsim_skips_zero_frames() {
        let t = Table(vec![(0, vec![0.0, 0.0]), (1, vec![1.0, 0.0])], vec![1.0, 0.0]);
        assert_eq!(clipsim(&[keyed(0), keyed(1)], "x", &t).unwrap(), 1.0);
        assert_eq!(clipsim(&[keyed(0)], "x", &t), Err(EmbeddingError::AllFramesSkipped));
        assert_eq!(clipsim(&[], "x", &t), Err(EmbeddingError::NoFrames));
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            u in proptest::collection::vec(-10.0f64..10.0, 4),
            v in proptest::collection::vec(-10.0f64..10.0, 4),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let (eu, ev) = (vec(&u), vec(&v));
            prop_assume!(eu.norm() > 1e-6 && ev.norm() > 1e-6);
            let scaled_u = vec(&u.iter().map(|x| a * x).collect::<Vec<_>>());
            let scaled_v = vec(&v.iter().map(|x| b * x).collect::<Vec<_>>());
            let c0 = cosine(&eu, &ev).unwrap();
            let c1 = cosine(&scaled_u, &scaled_v).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c0));
        }

        #[test]
        fn clipsim_is_order_invariant(seeds in proptest::collection::vec(any::<u8>(), 2..6)) {
            let frames: Vec<Frame> = seeds
                .iter()
                .map(|&s| Frame::new(8, 8, 1, (0..64u32).map(|i| ((i * 31 + s as u32 * 7) % 256) as u8).collect()).unwrap())
                .collect();
            let mut reversed = frames.clone();
            reversed.reverse();
            let a = clipsim(&frames, "ice melting slowly", &PixelEmbedder);
            let b = clipsim(&reversed, "ice melting slowly", &PixelEmbedder);
            match (a, b) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
    }
}
