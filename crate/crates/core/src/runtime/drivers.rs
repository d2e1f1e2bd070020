//! Simulated device drivers and the catalog that names them.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{self, CorpusError, MediaSet};
use crate::data::{Bitmap, Cell, DataKind, Payload, Table, VideoClip};
use crate::operators::media;
use crate::operators::{next_tick, DeviceDriver, DriverError, DriverMode, FixtureAnnotator, ProviderRegistry};

pub const DAY_MS: u64 = 86_400_000;

/// Replays a fixed list of payloads, one per read, cycling.
pub struct ReplayDriver {
    name: String,
    kind: DataKind,
    event: Option<String>,
    period_ms: u64,
    files: Arc<Vec<Payload>>,
    cursor: usize,
    stopped: bool,
}

impl ReplayDriver {
    pub fn new(name: &str, files: Arc<Vec<Payload>>) -> Self {
        let kind = files.first().map(Payload::kind).unwrap_or(DataKind::Image);
        ReplayDriver {
            name: name.to_string(),
            kind,
            event: None,
            period_ms: 0,
            files,
            cursor: 0,
            stopped: false,
        }
    }

    /// Fires `event` at every multiple of `period_ms`.
    pub fn pushing(mut self, event: &str, period_ms: u64) -> Self {
        self.event = Some(event.to_string());
        self.period_ms = period_ms;
        self
    }

    /// Reads fail once the list is exhausted instead of wrapping around.
    pub fn once(mut self) -> Self {
        self.stopped = true;
        self
    }
}

impl DeviceDriver for ReplayDriver {
    fn name(&self) -> &str {
        &self.name
    }

    fn kind(&self) -> DataKind {
        self.kind
    }

    fn mode(&self) -> DriverMode {
        if self.event.is_some() {
            DriverMode::Both
        } else {
            DriverMode::Pull
        }
    }

    fn events(&self) -> Vec<String> {
        self.event.iter().cloned().collect()
    }

    fn next_event(&mut self, after: u64) -> Option<(u64, String)> {
        let event = self.event.clone()?;
        if self.stopped && self.cursor >= self.files.len() {
            return None;
        }
        Some((next_tick(self.period_ms, after), event))
    }

    fn read(&mut self, _ts: u64) -> Result<Vec<Payload>, DriverError> {
        if self.files.is_empty() || (self.stopped && self.cursor >= self.files.len()) {
            return Err(DriverError::Unavailable(self.name.clone()));
        }
        let p = self.files[self.cursor % self.files.len()].clone();
        self.cursor += 1;
        Ok(vec![p])
    }
}

/// Synthetic smart-TV watch log: about twenty rows per read, seeded by the
/// read time so the same instant always yields the same log.
pub struct TvLogDriver {
    seed: u64,
}

impl TvLogDriver {
    pub const CHANNELS: [(&'static str, &'static str); 6] = [
        ("bbc-one", "news"),
        ("cnn", "news"),
        ("espn", "sports"),
        ("eurosport", "sports"),
        ("disney", "kids"),
        ("hbo", "drama"),
    ];

    pub fn new(seed: u64) -> Self {
        TvLogDriver { seed }
    }

    pub fn log_at(&self, ts: u64) -> Table {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ts);
        let mut t = Table::new(["channel", "category", "duration"]);
        for _ in 0..rng.random_range(18..=22) {
            let (ch, cat) = Self::CHANNELS[rng.random_range(0..Self::CHANNELS.len())];
            let minutes = rng.random_range(5..=120) as f64;
            t.rows.push(vec![Cell::from(ch), Cell::from(cat), Cell::from(minutes)]);
        }
        t
    }
}

impl DeviceDriver for TvLogDriver {
    fn name(&self) -> &str {
        "tv-log"
    }

    fn kind(&self) -> DataKind {
        DataKind::Tabular
    }

    fn mode(&self) -> DriverMode {
        DriverMode::Pull
    }

    fn read(&mut self, ts: u64) -> Result<Vec<Payload>, DriverError> {
        Ok(vec![Payload::Tabular(self.log_at(ts))])
    }
}

/// Relative humidity: a daily sine around 50% plus up to ±5 points of noise.
pub struct HumidityDriver {
    seed: u64,
}

impl HumidityDriver {
    pub fn new(seed: u64) -> Self {
        HumidityDriver { seed }
    }

    pub fn value_at(&self, ts: u64) -> f64 {
        let phase = TAU * (ts % DAY_MS) as f64 / DAY_MS as f64;
        let noise = ChaCha8Rng::seed_from_u64(self.seed ^ ts).random_range(-5.0..5.0);
        50.0 + 20.0 * phase.sin() + noise
    }
}

impl DeviceDriver for HumidityDriver {
    fn name(&self) -> &str {
        "humidity"
    }

    fn kind(&self) -> DataKind {
        DataKind::Scalar
    }

    fn mode(&self) -> DriverMode {
        DriverMode::Pull
    }

    fn read(&mut self, ts: u64) -> Result<Vec<Payload>, DriverError> {
        Ok(vec![Payload::scalar(self.value_at(ts), "%")])
    }
}

/// Reports the virtual time of the read.
pub struct ClockDriver;

impl DeviceDriver for ClockDriver {
    fn name(&self) -> &str {
        "clock"
    }

    fn kind(&self) -> DataKind {
        DataKind::Scalar
    }

    fn mode(&self) -> DriverMode {
        DriverMode::Pull
    }

    fn read(&mut self, ts: u64) -> Result<Vec<Payload>, DriverError> {
        Ok(vec![Payload::scalar(ts as f64, "ms")])
    }
}

pub type DriverFactory = Arc<dyn Fn() -> Box<dyn DeviceDriver> + Send + Sync>;

/// Static facts about a catalog entry, for binding checks and listings.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DriverInfo {
    pub name: String,
    pub kind: DataKind,
    pub mode: DriverMode,
    pub events: Vec<String>,
}

/// Named driver factories. Media sets load lazily from
/// `<root>/media/<set>` on first use and are shared afterwards.
pub struct DriverCatalog {
    root: PathBuf,
    media: Mutex<HashMap<String, Arc<MediaSet>>>,
    custom: BTreeMap<String, DriverFactory>,
}

/// (driver, media set, push event, period)
const REPLAY: [(&str, &str, Option<&str>, u64); 4] = [
    ("doorbell-camera", "doorbell", Some("motion"), 300_000),
    ("office-camera", "office", None, 0),
    ("nursery-mic", "nursery", Some("sound"), 600_000),
    ("voice-mic", "voice", Some("trigger phrase"), 900_000),
];

const VIDEO_FRAMES: usize = 4;

impl DriverCatalog {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DriverCatalog {
            root: root.into(),
            media: Mutex::new(HashMap::new()),
            custom: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn media_root(&self) -> PathBuf {
        self.root.join("media")
    }

    /// Adds or overrides a driver.
    pub fn register(&mut self, name: &str, factory: DriverFactory) {
        self.custom.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = REPLAY.iter().map(|r| r.0.to_string()).collect();
        names.extend(["doorbell-video", "tv-log", "humidity", "clock"].map(String::from));
        names.extend(self.custom.keys().cloned());
        names.sort();
        names.dedup();
        names
    }

    pub fn media_set(&self, set: &str) -> Result<Arc<MediaSet>, CorpusError> {
        let mut cache = self.media.lock().expect("media cache poisoned");
        if let Some(m) = cache.get(set) {
            return Ok(m.clone());
        }
        let loaded = Arc::new(corpus::load_media_set(&self.media_root().join(set))?);
        cache.insert(set.to_string(), loaded.clone());
        Ok(loaded)
    }

    pub fn create(&self, name: &str) -> Option<Box<dyn DeviceDriver>> {
        if let Some(f) = self.custom.get(name) {
            return Some(f());
        }
        if let Some((_, set, event, period)) = REPLAY.iter().find(|r| r.0 == name) {
            let files = Arc::new(self.media_set(set).ok()?.payloads());
            let d = ReplayDriver::new(name, files);
            return Some(Box::new(match event {
                Some(e) => d.pushing(e, *period),
                None => d,
            }));
        }
        match name {
            "doorbell-video" => {
                let frames: Vec<Bitmap> = self
                    .media_set("doorbell")
                    .ok()?
                    .payloads()
                    .into_iter()
                    .filter_map(|p| match p {
                        Payload::Image(b) => Some(media::resize_nearest(&b, b.width / 2, b.height / 2)),
                        _ => None,
                    })
                    .collect();
                let clips: Vec<Payload> = frames
                    .chunks(VIDEO_FRAMES)
                    .map(|c| {
                        Payload::Video(VideoClip {
                            frame_rate: 1.0,
                            frames: c.to_vec(),
                        })
                    })
                    .collect();
                Some(Box::new(ReplayDriver::new(name, Arc::new(clips)).pushing("motion", 300_000)))
            }
            "tv-log" => Some(Box::new(TvLogDriver::new(7))),
            "humidity" => Some(Box::new(HumidityDriver::new(11))),
            "clock" => Some(Box::new(ClockDriver)),
            _ => None,
        }
    }

    pub fn info(&self, name: &str) -> Option<DriverInfo> {
        let d = self.create(name)?;
        Some(DriverInfo {
            name: name.to_string(),
            kind: d.kind(),
            mode: d.mode(),
            events: d.events(),
        })
    }

    /// Ground truth from every media set, as one annotator.
    pub fn fixture_annotator(&self) -> Result<FixtureAnnotator, CorpusError> {
        let mut ann = FixtureAnnotator::new("fixtures");
        for set in corpus::load_all(&self.media_root())? {
            set.feed(&mut ann);
            let name = set.name.clone();
            self.media
                .lock()
                .expect("media cache poisoned")
                .entry(name)
                .or_insert_with(|| Arc::new(set));
        }
        Ok(ann)
    }

    /// Reference providers followed by the fixture annotator.
    pub fn registry(&self) -> Result<ProviderRegistry, CorpusError> {
        let mut reg = ProviderRegistry::with_reference_providers();
        reg.register(Arc::new(self.fixture_annotator()?));
        Ok(reg)
    }
}

/// `$PRIVHUB_DATA_DIR`, else the repository's `fixtures/` directory.
pub fn default_data_dir() -> PathBuf {
    std::env::var_os("PRIVHUB_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures")))
}
