//! Synthetic videos and manifests shared by the integration targets.
#![allow(dead_code)]

use std::path::Path;

use lapsekit::catalog::VideoRecord;
use lapsekit::media_io::{save_cmrv, Fps, Frame, VideoBuffer};
use rand::Rng;

pub const SIDE: u32 = 32;
const BLOCKS: usize = 8;

/// An 8x8 grid of block levels.
type Pattern = Vec<f64>;

fn random_pattern<R: Rng>(rng: &mut R) -> Pattern {
    (0..BLOCKS * BLOCKS).map(|_| rng.random_range(20.0..235.0)).collect()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// A pattern that clearly differs from `prev`: large mean level change and
/// little shared structure.
fn distinct_pattern<R: Rng>(rng: &mut R, prev: Option<&Pattern>) -> Pattern {
    loop {
        let p = random_pattern(rng);
        let Some(prev) = prev else { return p };
        let mad = p.iter().zip(prev).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64;
        if mad >= 60.0 && correlation(&p, prev) <= 0.2 {
            return p;
        }
    }
}

fn render<R: Rng>(levels: &[f64], rng: &mut R) -> Frame {
    let cell = SIDE as usize / BLOCKS;
    let mut data = Vec::with_capacity((SIDE * SIDE * 3) as usize);
    for y in 0..SIDE as usize {
        for x in 0..SIDE as usize {
            let level = levels[(y / cell) * BLOCKS + x / cell] + rng.random_range(-3.0..=3.0);
            for tint in [6.0, 0.0, -6.0] {
                data.push((level + tint).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(SIDE, SIDE, 3, data).expect("valid frame")
}

/// A textured video with hard cuts at known boundaries.
///
/// Each scene slowly blends toward a second texture, so consecutive frames
/// inside a scene differ slightly. Returns the video and the boundary
/// indices `i` (cut between frame `i` and `i + 1`).
pub fn planted_cut_video<R: Rng>(rng: &mut R, id: &str) -> (VideoBuffer, Vec<usize>) {
    let scenes = rng.random_range(1..=5usize);
    let mut frames = Vec::new();
    let mut cuts = Vec::new();
    let mut prev_last: Option<Pattern> = None;
    for s in 0..scenes {
        if s > 0 {
            cuts.push(frames.len() - 1);
        }
        let start = distinct_pattern(rng, prev_last.as_ref());
        let drift = random_pattern(rng);
        let len = rng.random_range(3..=12usize);
        let mut levels = Vec::new();
        for k in 0..len {
            let a = 0.01 * k as f64;
            levels = start.iter().zip(&drift).map(|(p, d)| (1.0 - a) * p + a * d).collect();
            frames.push(render(&levels, rng));
        }
        prev_last = Some(levels);
    }
    (VideoBuffer::new(frames, Fps::DEFAULT, id).expect("valid video"), cuts)
}

/// Small frames of uniform noise with occasional random jumps.
pub fn noisy_video<R: Rng>(rng: &mut R, id: &str) -> VideoBuffer {
    let n = rng.random_range(2..=10usize);
    let (w, h) = (rng.random_range(2..=12u32), rng.random_range(2..=12u32));
    let mut base: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
    let frames = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                base = (0..w * h * 3).map(|_| rng.random()).collect();
            }
            let data = base
                .iter()
                .map(|&v| v.saturating_add_signed(rng.random_range(-20..=20)))
                .collect();
            Frame::new(w, h, 3, data).expect("valid frame")
        })
        .collect();
    VideoBuffer::new(frames, Fps::DEFAULT, id).expect("valid video")
}

pub fn constant_video(frames: usize, value: u8, id: &str) -> VideoBuffer {
    let f = Frame::filled(8, 8, 3, value).expect("valid frame");
    VideoBuffer::new(vec![f; frames], Fps::DEFAULT, id).expect("valid video")
}

/// Twenty ingested records with a video per record written to `videos`.
///
/// Records 0 to 3 fail the metadata filter for different reasons; records whose
/// id ends in 7 get the title "Dancing cat compilation for the weekend" so a
/// mock judge primed with the marker "cat" rejects them.
pub fn closed_loop_fixture<R: Rng>(rng: &mut R, videos: &Path) -> Vec<VideoRecord> {
    (0..20)
        .map(|i| {
            let id = format!("rec-{i:02}");
            let title = match i {
                0 => "Short".to_string(),
                _ if i % 10 == 7 => "Dancing cat compilation for the weekend".to_string(),
                _ => format!("Seed {i} sprouting into a flower over ten days"),
            };
            let hashtags: Vec<String> = match i {
                2 => vec![],
                3 => vec!["timelapse".into(), "Shorts".into()],
                _ => vec!["timelapse".into(), "nature".into()],
            };
            let views = if i == 1 { 5 } else { 1_000 + 37 * i as u64 };
            let mut rec = VideoRecord::ingested(&id, title, hashtags, views);
            let (video, cuts) = planted_cut_video(rng, &id);
            rec.source_url = format!("https://example.invalid/watch/{id}");
            rec.duration_s = video.frame_count() as f64 / video.fps().as_f64();
            rec.width = video.width();
            rec.height = video.height();
            rec.category = (i % 3 == 0).then(|| "plants".to_string());
            rec.set_transitions(cuts);
            save_cmrv(&videos.join(format!("{id}.cmrv")), &video).expect("write video");
            rec
        })
        .collect()
}
