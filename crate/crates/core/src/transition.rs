//! Two-stage transition detection.
//!
//! Stage one scores each adjacent frame pair by mean absolute luma difference;
//! stage two by cosine similarity of frame embeddings. A boundary is a
//! transition only when both stages vote for it:
//! `pixel_score > theta && embed_score < vartheta`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::{cosine, Embedder, EmbeddingError};
use crate::media_io::{to_grayscale, GrayFrame, VideoBuffer};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error("frame dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),
    #[error("report does not match video: {0}")]
    InconsistentReport(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Mean absolute luma difference threshold, 0..=255 scale.
    pub theta: f64,
    /// Cosine similarity threshold in [-1, 1].
    pub vartheta: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            theta: 40.0,
            vartheta: 0.5,
        }
    }
}

impl DetectorParams {
    pub fn new(theta: f64, vartheta: f64) -> Result<Self, TransitionError> {
        let p = DetectorParams { theta, vartheta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TransitionError> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(TransitionError::InvalidParams(format!(
                "theta must be finite and >= 0, got {}",
                self.theta
            )));
        }
        if !(-1.0..=1.0).contains(&self.vartheta) {
            return Err(TransitionError::InvalidParams(format!(
                "vartheta must lie in [-1, 1], got {}",
                self.vartheta
            )));
        }
        Ok(())
    }

    /// The voting rule. Ties never vote.
    pub fn votes(&self, pixel_score: f64, embed_score: f64) -> bool {
        pixel_score > self.theta && embed_score < self.vartheta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryScore {
    /// Boundary between frame `index` and frame `index + 1`.
    pub index: usize,
    pub pixel_score: f64,
    pub embed_score: f64,
    pub is_transition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub schema: u32,
    pub source_id: String,
    pub boundaries: Vec<BoundaryScore>,
    pub transitions: Vec<usize>,
    pub n_clips: usize,
}

impl TransitionReport {
    /// Builds a report from raw scores, applying the voting rule.
    pub fn from_scores(source_id: impl Into<String>, scores: &[(f64, f64)], params: &DetectorParams) -> Self {
        let boundaries: Vec<BoundaryScore> = scores
            .iter()
            .enumerate()
            .map(|(index, &(pixel_score, embed_score))| BoundaryScore {
                index,
                pixel_score,
                embed_score,
                is_transition: params.votes(pixel_score, embed_score),
            })
            .collect();
        let transitions: Vec<usize> = boundaries
            .iter()
            .filter(|b| b.is_transition)
            .map(|b| b.index)
            .collect();
        TransitionReport {
            schema: REPORT_SCHEMA,
            source_id: source_id.into(),
            n_clips: transitions.len() + 1,
            boundaries,
            transitions,
        }
    }

    /// Re-applies a different threshold pair to the recorded scores.
    pub fn revote(&self, params: &DetectorParams) -> Self {
        let scores: Vec<(f64, f64)> = self
            .boundaries
            .iter()
            .map(|b| (b.pixel_score, b.embed_score))
            .collect();
        Self::from_scores(self.source_id.clone(), &scores, params)
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }
}

/// Mean absolute difference of two gray frames on the 0..=255 scale.
pub fn pixel_diff_score(a: &GrayFrame, b: &GrayFrame) -> Result<f64, TransitionError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(TransitionError::DimensionMismatch(
            (a.width(), a.height()),
            (b.width(), b.height()),
        ));
    }
    let total: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x.abs_diff(y) as u64)
        .sum();
    Ok(total as f64 / a.data().len() as f64)
}

/// Cosine similarity of two frame embeddings. A zero-norm embedding means
/// "no signal" and scores as 1.0 so it can never vote for a cut.
pub fn embedding_diff_score<E: Embedder + ?Sized>(
    a: &crate::media_io::Frame,
    b: &crate::media_io::Frame,
    embedder: &E,
) -> Result<f64, TransitionError> {
    let ea = embedder.embed_image(a)?;
    let eb = embedder.embed_image(b)?;
    score_embeddings(&ea, &eb)
}

fn score_embeddings(
    a: &crate::embeddings::EmbeddingVector,
    b: &crate::embeddings::EmbeddingVector,
) -> Result<f64, TransitionError> {
    match cosine(a, b) {
        Ok(c) => Ok(c),
        Err(EmbeddingError::ZeroVector) => Ok(1.0),
        Err(e) => Err(e.into()),
    }
}

pub fn detect_transitions<E: Embedder + ?Sized>(
    video: &VideoBuffer,
    params: &DetectorParams,
    embedder: &E,
) -> Result<TransitionReport, TransitionError> {
    params.validate()?;
    let frames = video.frames();
    if frames.len() < 2 {
        return Err(TransitionError::TooFewFrames(frames.len()));
    }
    let grays: Vec<GrayFrame> = frames.iter().map(to_grayscale).collect();
    let embeds = frames
        .iter()
        .map(|f| embedder.embed_image(f))
        .collect::<Result<Vec<_>, _>>()?;

    let scores = (0..frames.len() - 1)
        .map(|i| {
            Ok((
                pixel_diff_score(&grays[i], &grays[i + 1])?,
                score_embeddings(&embeds[i], &embeds[i + 1])?,
            ))
        })
        .collect::<Result<Vec<_>, TransitionError>>()?;
    Ok(TransitionReport::from_scores(video.source_id(), &scores, params))
}

/// Inclusive `(start, end)` frame ranges between transitions.
pub fn segment(video: &VideoBuffer, report: &TransitionReport) -> Result<Vec<(usize, usize)>, TransitionError> {
    segment_frames(video.frame_count(), report)
}

pub fn segment_frames(frame_count: usize, report: &TransitionReport) -> Result<Vec<(usize, usize)>, TransitionError> {
    if report.boundaries.len() + 1 != frame_count {
        return Err(TransitionError::InconsistentReport(format!(
            "{} boundaries for {frame_count} frames",
            report.boundaries.len()
        )));
    }
    if report.n_clips != report.transitions.len() + 1 {
        return Err(TransitionError::InconsistentReport(format!(
            "n_clips {} with {} transitions",
            report.n_clips,
            report.transitions.len()
        )));
    }
    let mut clips = Vec::with_capacity(report.n_clips);
    let mut start = 0;
    for &t in &report.transitions {
        if t < start || t + 1 >= frame_count {
            return Err(TransitionError::InconsistentReport(format!(
                "transition {t} out of order or out of range"
            )));
        }
        clips.push((start, t));
        start = t + 1;
    }
    clips.push((start, frame_count - 1));
    Ok(clips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{EmbeddingVector, PixelEmbedder};
    use crate::media_io::{Fps, Frame};
    use proptest::prelude::*;

    fn gray(w: u32, h: u32, v: Vec<u8>) -> GrayFrame {
        GrayFrame::new(w, h, v).unwrap()
    }

    #[test]
    fn pixel_scores() {
        let a = gray(2, 2, vec![1, 2, 3, 4]);
        assert_eq!(pixel_diff_score(&a, &a).unwrap(), 0.0);
        assert_eq!(pixel_diff_score(&gray(1, 1, vec![10]), &gray(1, 1, vec![50])).unwrap(), 40.0);
        assert_eq!(
            pixel_diff_score(&gray(2, 2, vec![0, 0, 0, 0]), &gray(2, 2, vec![255, 255, 0, 0])).unwrap(),
            127.5
        );
        assert!(matches!(
            pixel_diff_score(&a, &gray(1, 4, vec![0; 4])),
            Err(TransitionError::DimensionMismatch(..))
        ));
    }

    /// Dark frames map to (1, 0), bright frames to (0, 1).
    struct Blocks;

    impl Embedder for Blocks {
        fn dimension(&self) -> usize {
            2
        }
        fn embed_image(&self, f: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
            let v = if f.data()[0] < 128 { vec![1.0, 0.0] } else { vec![0.0, 1.0] };
            EmbeddingVector::new(v)
        }
        fn embed_text(&self, _: &str) -> Result<EmbeddingVector, EmbeddingError> {
            EmbeddingVector::new(vec![1.0, 0.0])
        }
    }

    struct Fixed(Vec<f64>, Vec<f64>);

    impl Embedder for Fixed {
        fn dimension(&self) -> usize {
            self.0.len()
        }
        fn embed_image(&self, f: &Frame) -> Result<EmbeddingVector, EmbeddingError> {
            EmbeddingVector::new(if f.data()[0] == 0 { self.0.clone() } else { self.1.clone() })
        }
        fn embed_text(&self, _: &str) -> Result<EmbeddingVector, EmbeddingError> {
            unreachable!()
        }
    }

    #[test]
    fn embedding_scores() {
        let a = Frame::filled(1, 1, 1, 0).unwrap();
        let b = Frame::filled(1, 1, 1, 9).unwrap();
        let grid = Frame::new(8, 8, 1, (0..64).collect()).unwrap();
        assert!((embedding_diff_score(&grid, &grid, &PixelEmbedder).unwrap() - 1.0).abs() < 1e-12);
        let ortho = Fixed(vec![1.0, 0.0], vec![0.0, 1.0]);
        assert_eq!(embedding_diff_score(&a, &b, &ortho).unwrap(), 0.0);
        let diag = Fixed(vec![1.0, 1.0], vec![1.0, 0.0]);
        let c = embedding_diff_score(&a, &b, &diag).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let bad = Fixed(vec![1.0, 1.0], vec![1.0]);
        assert!(matches!(
            embedding_diff_score(&a, &b, &bad),
            Err(TransitionError::Embedding(EmbeddingError::DimensionMismatch(2, 1)))
        ));
    }

    fn video(values: &[u8]) -> VideoBuffer {
        let frames = values.iter().map(|&v| Frame::filled(4, 4, 1, v).unwrap()).collect();
        VideoBuffer::new(frames, Fps::DEFAULT, "v").unwrap()
    }

    #[test]
    fn constant_video_has_one_clip() {
        let v = video(&[90; 6]);
        let r = detect_transitions(&v, &DetectorParams::default(), &PixelEmbedder).unwrap();
        assert!(r.transitions.is_empty());
        assert_eq!(r.n_clips, 1);
        assert_eq!(r.boundaries.len(), 5);
        assert!(r.boundaries.iter().all(|b| b.pixel_score == 0.0 && b.embed_score == 1.0));
    }

    #[test]
    fn black_to_white_cut() {
        let v = video(&[0, 0, 255, 255]);
        let r = detect_transitions(&v, &DetectorParams::new(40.0, 0.5).unwrap(), &Blocks).unwrap();
        assert_eq!(r.transitions, vec![1]);
        assert_eq!(r.n_clips, 2);
        assert_eq!(r.boundaries[1].pixel_score, 255.0);
        assert_eq!(r.boundaries[1].embed_score, 0.0);

        let never = detect_transitions(&v, &DetectorParams::new(40.0, -1.0).unwrap(), &Blocks).unwrap();
        assert!(never.transitions.is_empty());
    }

    #[test]
    fn ties_do_not_vote() {
        let p = DetectorParams::new(40.0, 0.5).unwrap();
        assert!(!p.votes(40.0, 0.0));
        assert!(!p.votes(100.0, 0.5));
        assert!(p.votes(40.000001, 0.4999));
    }

    #[test]
    fn too_few_frames_and_bad_params() {
        assert_eq!(
            detect_transitions(&video(&[1]), &DetectorParams::default(), &PixelEmbedder),
            Err(TransitionError::TooFewFrames(1))
        );
        assert!(DetectorParams::new(-1.0, 0.5).is_err());
        assert!(DetectorParams::new(1.0, 1.5).is_err());
    }

    fn report_with(frame_count: usize, transitions: &[usize]) -> TransitionReport {
        let scores: Vec<(f64, f64)> = (0..frame_count - 1)
            .map(|i| if transitions.contains(&i) { (255.0, -1.0) } else { (0.0, 1.0) })
            .collect();
        TransitionReport::from_scores("v", &scores, &DetectorParams::default())
    }

    #[test]
    fn segment_examples() {
        assert_eq!(segment_frames(10, &report_with(10, &[])).unwrap(), vec![(0, 9)]);
        assert_eq!(segment_frames(4, &report_with(4, &[1])).unwrap(), vec![(0, 1), (2, 3)]);
        assert_eq!(
            segment_frames(4, &report_with(4, &[0, 2])).unwrap(),
            vec![(0, 0), (1, 2), (3, 3)]
        );
        assert!(matches!(
            segment_frames(5, &report_with(4, &[1])),
            Err(TransitionError::InconsistentReport(_))
        ));
    }

    #[test]
    fn report_json_shape() {
        let r = report_with(3, &[1]);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["n_clips"], 2);
        assert_eq!(v["boundaries"][1]["is_transition"], true);
        assert_eq!(v["boundaries"][0]["index"], 0);
        let back: TransitionReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    fn arb_gray_pair() -> impl Strategy<Value = (GrayFrame, GrayFrame)> {
        (1u32..5, 1u32..5).prop_flat_map(|(w, h)| {
            let n = (w * h) as usize;
            (
                proptest::collection::vec(any::<u8>(), n),
                proptest::collection::vec(any::<u8>(), n),
            )
                .prop_map(move |(a, b)| (gray(w, h, a), gray(w, h, b)))
        })
    }

    proptest! {
        #[test]
        fn pixel_score_metric_properties((a, b) in arb_gray_pair()) {
            let ab = pixel_diff_score(&a, &b).unwrap();
            prop_assert_eq!(ab, pixel_diff_score(&b, &a).unwrap());
            prop_assert!((0.0..=255.0).contains(&ab));
            prop_assert_eq!(ab == 0.0, a == b);
        }

        #[test]
        fn segments_partition_the_range(
            frame_count in 2usize..40,
            marks in proptest::collection::vec(any::<bool>(), 39),
        ) {
            let ts: Vec<usize> = (0..frame_count - 1).filter(|&i| marks[i]).collect();
            let clips = segment_frames(frame_count, &report_with(frame_count, &ts)).unwrap();
            prop_assert_eq!(clips.len(), ts.len() + 1);
            prop_assert_eq!(clips[0].0, 0);
            prop_assert_eq!(clips.last().unwrap().1, frame_count - 1);
            for w in clips.windows(2) {
                prop_assert_eq!(w[0].1 + 1, w[1].0);
            }
            prop_assert!(clips.iter().all(|(s, e)| s <= e));
        }
    }
}
