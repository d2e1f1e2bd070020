//! The synthetic media corpus behind the replay drivers.
//!
//! Each set lives in `media/<name>/` as PNG or WAV files plus an
//! `annotations.json` holding ground truth for the fixture annotator:
//!
//! ```json
//! {
//!   "declares": [{"task": "detect", "target": "face", "kind": "image"}],
//!   "files": {
//!     "frame-00.png": [
//!       {"task": "detect", "target": "face", "confidence": 0.97,
//!        "payload": {"columns": ["x", "y", "w", "h"], "rows": [[40, 60, 48, 56]]}}
//!     ]
//!   }
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{AudioClip, Bitmap, ContentLabel, DataKind, InferenceAnnotation, Payload, Table, Task};
use crate::operators::media::{self, Rect};
use crate::operators::FixtureAnnotator;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {reason}")]
    Decode { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn decode_err(path: &Path, reason: impl ToString) -> CorpusError {
    CorpusError::Decode {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Declared {
    pub task: Task,
    pub target: String,
    pub kind: DataKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub task: Task,
    pub target: String,
    pub confidence: f64,
    pub payload: Table,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationFile {
    #[serde(default)]
    pub declares: Vec<Declared>,
    #[serde(default)]
    pub files: BTreeMap<String, Vec<AnnotationEntry>>,
}

/// One loaded media directory, files in name order.
#[derive(Debug, Clone)]
pub struct MediaSet {
    pub name: String,
    pub files: Vec<(String, Payload)>,
    pub annotations: AnnotationFile,
}

impl MediaSet {
    pub fn payloads(&self) -> Vec<Payload> {
        self.files.iter().map(|(_, p)| p.clone()).collect()
    }

    pub fn ground_truth(&self, file: &str) -> &[AnnotationEntry] {
        self.annotations.files.get(file).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Registers this set's ground truth with `annotator`.
    pub fn feed(&self, annotator: &mut FixtureAnnotator) {
        for d in &self.annotations.declares {
            annotator.declare(d.task, &d.target, d.kind);
        }
        for (file, payload) in &self.files {
            let found: Vec<InferenceAnnotation> = self
                .ground_truth(file)
                .iter()
                .filter_map(|e| {
                    Some(InferenceAnnotation {
                        annotator: String::new(),
                        task: e.task,
                        target: ContentLabel::new(&e.target).ok()?,
                        payload: e.payload.clone(),
                        confidence: e.confidence,
                    })
                })
                .collect();
            annotator.add(payload, found);
        }
    }
}

pub fn read_png(path: &Path) -> Result<Bitmap, CorpusError> {
    let img = image::open(path).map_err(|e| decode_err(path, e))?.to_rgb8();
    Ok(Bitmap::new(img.width(), img.height(), img.into_raw()))
}

pub fn write_png(path: &Path, bmp: &Bitmap) -> Result<(), CorpusError> {
    image::save_buffer(path, &bmp.rgb, bmp.width, bmp.height, image::ExtendedColorType::Rgb8)
        .map_err(|e| decode_err(path, e))
}

pub fn read_wav(path: &Path) -> Result<AudioClip, CorpusError> {
    let mut r = hound::WavReader::open(path).map_err(|e| decode_err(path, e))?;
    let spec = r.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 {
        return Err(decode_err(path, "expected mono 16-bit PCM"));
    }
    let samples = r
        .samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| decode_err(path, e))?;
    Ok(AudioClip {
        sample_rate: spec.sample_rate,
        samples,
    })
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<(), CorpusError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(|e| decode_err(path, e))?;
    for s in &clip.samples {
        w.write_sample(*s).map_err(|e| decode_err(path, e))?;
    }
    w.finalize().map_err(|e| decode_err(path, e))
}

pub fn load_media_set(dir: &Path) -> Result<MediaSet, CorpusError> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png") || n.ends_with(".wav"))
        .collect();
    names.sort();
    let mut files = Vec::new();
    for n in names {
        let path = dir.join(&n);
        let payload = if n.ends_with(".png") {
            Payload::Image(read_png(&path)?)
        } else {
            Payload::Audio(read_wav(&path)?)
        };
        files.push((n, payload));
    }
    let ann_path = dir.join("annotations.json");
    let annotations = match fs::read_to_string(&ann_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| decode_err(&ann_path, e))?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => AnnotationFile::default(),
        Err(e) => return Err(io_err(&ann_path)(e)),
    };
    Ok(MediaSet { name, files, annotations })
}

/// Every media set under `root`, by directory name.
pub fn load_all(root: &Path) -> Result<Vec<MediaSet>, CorpusError> {
    let mut dirs: Vec<PathBuf> = match fs::read_dir(root) {
        Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect(),
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(root)(e)),
    };
    dirs.sort();
    dirs.iter().map(|d| load_media_set(d)).collect()
}

fn boxes(rects: &[Rect]) -> Table {
    let mut t = Table::new(["x", "y", "w", "h"]);
    for r in rects {
        t.rows.push(vec![(r.x as f64).into(), (r.y as f64).into(), (r.w as f64).into(), (r.h as f64).into()]);
    }
    t
}

fn entry(task: Task, target: &str, confidence: f64, payload: Table) -> AnnotationEntry {
    AnnotationEntry {
        task,
        target: target.to_string(),
        confidence,
        payload,
    }
}

fn declared(task: Task, target: &str, kind: DataKind) -> Declared {
    Declared {
        task,
        target: target.to_string(),
        kind,
    }
}

fn speckle(img: &mut Bitmap, rng: &mut ChaCha8Rng, amount: i16) {
    for px in img.rgb.iter_mut() {
        *px = (*px as i16 + rng.random_range(-amount..=amount)).clamp(0, 255) as u8;
    }
}

const SKINS: [[u8; 3]; 4] = [[224, 172, 105], [141, 85, 36], [255, 219, 172], [198, 134, 66]];

/// Doorstep frames, 320×240. Six of the ten contain one or two faces.
fn doorbell(rng: &mut ChaCha8Rng) -> (Vec<(String, Payload)>, AnnotationFile) {
    let faces_per_frame = [1, 0, 2, 1, 0, 1, 0, 2, 1, 0];
    let mut files = Vec::new();
    let mut ann = AnnotationFile {
        declares: vec![declared(Task::Detect, "face", DataKind::Image)],
        ..Default::default()
    };
    for (i, n) in faces_per_frame.iter().enumerate() {
        let name = format!("frame-{i:02}.png");
        let mut img = Bitmap::filled(320, 240, [120, 130, 110]);
        media::fill_rect(&mut img, Rect { x: 0, y: 180, w: 320, h: 60 }, [90, 80, 70]);
        media::fill_rect(&mut img, Rect { x: 220, y: 30, w: 80, h: 150 }, [110, 70, 40]);
        let mut rects = Vec::new();
        for k in 0..*n {
            let w = rng.random_range(36..=56);
            let h = w + rng.random_range(4..=10);
            let x = 30 + k * 100 + rng.random_range(0..40);
            let y = rng.random_range(40..100);
            let body = Rect { x: x - 10, y: y + h, w: w + 20, h: 240 - (y + h) };
            media::fill_rect(&mut img, body, [40, 60, 120]);
            let r = Rect { x, y, w, h };
            media::draw_face(&mut img, r, SKINS[rng.random_range(0..SKINS.len())]);
            rects.push(r);
        }
        speckle(&mut img, rng, 6);
        if !rects.is_empty() {
            ann.files.insert(name.clone(), vec![entry(Task::Detect, "face", 0.95, boxes(&rects))]);
        }
        files.push((name, Payload::Image(img)));
    }
    (files, ann)
}

/// Home office frames, 320×240. A person is at the desk in six frames; four
/// of those stand clear enough for a pose.
fn office(rng: &mut ChaCha8Rng) -> (Vec<(String, Payload)>, AnnotationFile) {
    // (person present, pose visible)
    let frames = [(true, true), (true, false), (false, false), (true, true), (true, false), (true, true), (false, false), (true, true)];
    let mut files = Vec::new();
    let mut ann = AnnotationFile {
        declares: vec![
            declared(Task::Detect, "person", DataKind::Image),
            declared(Task::Extract, "pose", DataKind::Image),
        ],
        ..Default::default()
    };
    for (i, (person, pose)) in frames.iter().enumerate() {
        let name = format!("office-{i:02}.png");
        let mut img = Bitmap::filled(320, 240, [200, 200, 190]);
        media::fill_rect(&mut img, Rect { x: 20, y: 150, w: 280, h: 20 }, [120, 90, 60]);
        let mut found = Vec::new();
        if *person {
            let x = rng.random_range(60..200);
            let y = if *pose { 30 } else { 80 };
            let bbox = Rect { x, y, w: 60, h: 200 - y };
            media::fill_rect(&mut img, Rect { x: x + 10, y: y + 40, w: 40, h: 160 - y }, [60, 70, 140]);
            media::draw_face(&mut img, Rect { x: x + 15, y, w: 30, h: 36 }, SKINS[i % SKINS.len()]);
            found.push(entry(Task::Detect, "person", 0.9, boxes(&[bbox])));
            if *pose {
                let mut t = Table::new(["joint", "x", "y"]);
                for (j, (dx, dy)) in [("head", (30, 18)), ("neck", (30, 42)), ("l_hand", (5, 100)), ("r_hand", (55, 100)), ("hip", (30, 130))] {
                    t.rows.push(vec![j.into(), ((x + dx) as f64).into(), ((y + dy) as f64).into()]);
                }
                found.push(entry(Task::Extract, "pose", 0.85, t));
            }
        }
        speckle(&mut img, rng, 4);
        if !found.is_empty() {
            ann.files.insert(name.clone(), found);
        }
        files.push((name, Payload::Image(img)));
    }
    (files, ann)
}

fn noise(rng: &mut ChaCha8Rng, len: usize, amplitude: i16) -> Vec<i16> {
    (0..len).map(|_| rng.random_range(-amplitude..=amplitude)).collect()
}

fn mix(into: &mut [i16], from: &[i16], at: usize) {
    for (d, s) in into[at..].iter_mut().zip(from) {
        *d = d.saturating_add(*s);
    }
}

/// Nursery recordings, 2 s at 8 kHz. Three of six contain crying.
fn nursery(rng: &mut ChaCha8Rng) -> (Vec<(String, Payload)>, AnnotationFile) {
    let rate = 8_000;
    let crying: [Option<(u64, u64)>; 6] = [None, Some((400, 1500)), None, Some((0, 900)), Some((1200, 2000)), None];
    let mut files = Vec::new();
    let mut ann = AnnotationFile {
        declares: vec![declared(Task::Detect, "crying", DataKind::Audio)],
        ..Default::default()
    };
    for (i, c) in crying.iter().enumerate() {
        let name = format!("nursery-{i:02}.wav");
        let mut samples = noise(rng, 2 * rate as usize, 200);
        if let Some((s, e)) = c {
            let a = (*s * rate / 1000) as usize;
            let len = ((*e - *s) * rate / 1000) as usize;
            mix(&mut samples, &media::tone(rate as u32, len, 450.0 + 20.0 * i as f64, 6000.0), a);
            let t = Table::new(["start_ms", "end_ms"]).with_row(vec![(*s as f64).into(), (*e as f64).into()]);
            ann.files.insert(name.clone(), vec![entry(Task::Detect, "crying", 0.9, t)]);
        }
        files.push((name, Payload::Audio(AudioClip { sample_rate: rate as u32, samples })));
    }
    (files, ann)
}

/// Voice commands, 3 s at 16 kHz with one or two loud speech bursts.
fn voice(rng: &mut ChaCha8Rng) -> (Vec<(String, Payload)>, AnnotationFile) {
    let rate = 16_000usize;
    let bursts: [&[(usize, usize)]; 5] = [&[(500, 1800)], &[(200, 900), (1500, 2600)], &[(1000, 2900)], &[(300, 1200)], &[(100, 700), (2000, 2800)]];
    let mut files = Vec::new();
    for (i, list) in bursts.iter().enumerate() {
        let mut samples = noise(rng, 3 * rate, 150);
        for (s, e) in list.iter() {
            let len = (e - s) * rate / 1000;
            let f = 140.0 + 25.0 * i as f64;
            let voiced: Vec<i16> = media::tone(rate as u32, len, f, 5000.0)
                .iter()
                .zip(media::tone(rate as u32, len, f * 2.0, 2000.0))
                .map(|(a, b)| a.saturating_add(b))
                .collect();
            mix(&mut samples, &voiced, s * rate / 1000);
        }
        files.push((format!("voice-{i:02}.wav"), Payload::Audio(AudioClip { sample_rate: rate as u32, samples })));
    }
    (files, AnnotationFile::default())
}

/// Regenerates every media set under `root`. Output is byte-identical
/// across runs.
pub fn generate(root: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let sets = [
        ("doorbell", doorbell(&mut rng)),
        ("office", office(&mut rng)),
        ("nursery", nursery(&mut rng)),
        ("voice", voice(&mut rng)),
    ];
    let mut written = Vec::new();
    for (name, (files, ann)) in sets {
        let dir = root.join(name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (file, payload) in files {
            let path = dir.join(&file);
            match &payload {
                Payload::Image(b) => write_png(&path, b)?,
                Payload::Audio(a) => write_wav(&path, a)?,
                _ => unreachable!("corpus holds images and audio only"),
            }
            written.push(path);
        }
        let path = dir.join("annotations.json");
        let mut text = serde_json::to_string_pretty(&ann).expect("annotations serialize");
        text.push('\n');
        fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}
