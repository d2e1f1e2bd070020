//! Uniform data model shared by every operator.
//!
//! A [`Message`] is an ordered list of [`DataItem`]s. Each item carries one
//! unit of sensor data (an image, an audio clip, a table, ...), a content
//! label, a list of inference annotations and the provenance trail of the
//! device and operators that produced it.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("payload of kind {payload} does not match declared kind {declared}")]
    PayloadKindMismatch { declared: DataKind, payload: DataKind },
    #[error("invalid content label {0:?}: labels are non-empty lowercase tags")]
    InvalidLabel(String),
    #[error("unknown data kind {0:?}")]
    UnknownKind(String),
    #[error("unknown qualifier {0:?}")]
    UnknownQualifier(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Video,
    Image,
    Audio,
    Tabular,
    Scalar,
}

impl DataKind {
    pub const ALL: [DataKind; 5] = [
        DataKind::Video,
        DataKind::Image,
        DataKind::Audio,
        DataKind::Tabular,
        DataKind::Scalar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Video => "video",
            DataKind::Image => "image",
            DataKind::Audio => "audio",
            DataKind::Tabular => "tabular",
            DataKind::Scalar => "scalar",
        }
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DataKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DataKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DataError::UnknownKind(s.to_string()))
    }
}

/// Transformation history folded into a content label.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qualifier {
    #[default]
    None,
    Anonymized,
    Spoofed,
    Aggregated,
    Extracted,
    Cropped,
}

impl Qualifier {
    pub const ALL: [Qualifier; 6] = [
        Qualifier::None,
        Qualifier::Anonymized,
        Qualifier::Spoofed,
        Qualifier::Aggregated,
        Qualifier::Extracted,
        Qualifier::Cropped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Qualifier::None => "none",
            Qualifier::Anonymized => "anonymized",
            Qualifier::Spoofed => "spoofed",
            Qualifier::Aggregated => "aggregated",
            Qualifier::Extracted => "extracted",
            Qualifier::Cropped => "cropped",
        }
    }

    /// Qualifiers that change what a user would call the content. Cropping and
    /// extraction are implied by the label itself ("face" rather than "raw").
    pub fn is_visible(self) -> bool {
        matches!(
            self,
            Qualifier::Anonymized | Qualifier::Spoofed | Qualifier::Aggregated
        )
    }
}

impl FromStr for Qualifier {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Qualifier::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| DataError::UnknownQualifier(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawContentLabel")]
pub struct ContentLabel {
    label: String,
    qualifier: Qualifier,
}

#[derive(Deserialize)]
struct RawContentLabel {
    label: String,
    #[serde(default)]
    qualifier: Qualifier,
}

impl TryFrom<RawContentLabel> for ContentLabel {
    type Error = DataError;

    fn try_from(raw: RawContentLabel) -> Result<Self, Self::Error> {
        Ok(ContentLabel::new(&raw.label)?.with_qualifier(raw.qualifier))
    }
}

impl ContentLabel {
    pub const RAW: &'static str = "raw";
    pub const TRIGGER: &'static str = "trigger";

    pub fn new(label: &str) -> Result<Self, DataError> {
        let valid = !label.is_empty()
            && label
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '_');
        if !valid {
            return Err(DataError::InvalidLabel(label.to_string()));
        }
        Ok(ContentLabel {
            label: label.to_string(),
            qualifier: Qualifier::None,
        })
    }

    pub fn raw() -> Self {
        ContentLabel {
            label: Self::RAW.to_string(),
            qualifier: Qualifier::None,
        }
    }

    pub fn with_qualifier(mut self, qualifier: Qualifier) -> Self {
        self.qualifier = qualifier;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn qualifier(&self) -> Qualifier {
        self.qualifier
    }

    pub fn is_raw(&self) -> bool {
        self.label == Self::RAW
    }

    /// Compact form used in ledger files and query strings: `face` or
    /// `cropped:face`.
    pub fn key(&self) -> String {
        match self.qualifier {
            Qualifier::None => self.label.clone(),
            q => format!("{}:{}", q.as_str(), self.label),
        }
    }

    pub fn parse_key(key: &str) -> Result<Self, DataError> {
        match key.split_once(':') {
            Some((q, label)) => Ok(ContentLabel::new(label)?.with_qualifier(q.parse()?)),
            None => ContentLabel::new(key),
        }
    }

    /// Human phrase for the content, e.g. "face" or "spoofed face".
    pub fn phrase(&self) -> String {
        if self.qualifier.is_visible() {
            format!("{} {}", self.qualifier.as_str(), self.label)
        } else {
            self.label.clone()
        }
    }
}

impl fmt::Display for ContentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detect,
    Classify,
    Extract,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Classify => "classify",
            Task::Extract => "extract",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(n) => Some(*n),
            Cell::Text(t) => t.parse().ok(),
        }
    }

    /// Grouping key; numbers print in their shortest round-trip form.
    pub fn key(&self) -> String {
        match self {
            Cell::Number(n) => n.to_string(),
            Cell::Text(t) => t.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Number(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Column-named row set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_row(mut self, row: Vec<Cell>) -> Self {
        self.rows.push(row);
        self
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Cell> {
        let idx = self.column(column)?;
        self.rows.get(row)?.get(idx)
    }

    pub fn number(&self, row: usize, column: &str) -> Option<f64> {
        self.cell(row, column).and_then(Cell::as_f64)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends `other`'s rows, aligning by column name. Columns missing on
    /// either side are filled with empty text cells.
    pub fn append(&mut self, other: &Table) {
        for col in &other.columns {
            if self.column(col).is_none() {
                self.columns.push(col.clone());
                for row in &mut self.rows {
                    row.push(Cell::Text(String::new()));
                }
            }
        }
        for row in &other.rows {
            let aligned = self
                .columns
                .iter()
                .map(|col| {
                    other
                        .column(col)
                        .and_then(|i| row.get(i).cloned())
                        .unwrap_or_else(|| Cell::Text(String::new()))
                })
                .collect();
            self.rows.push(aligned);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceAnnotation {
    pub annotator: String,
    pub task: Task,
    pub target: ContentLabel,
    pub payload: Table,
    pub confidence: f64,
}

/// RGB8 bitmap, row-major.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitmap {
    pub width: u32,
    pub height: u32,
    #[serde(with = "b64_bytes")]
    pub rgb: Vec<u8>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32, rgb: Vec<u8>) -> Self {
        debug_assert_eq!(rgb.len(), width as usize * height as usize * 3);
        Bitmap { width, height, rgb }
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let rgb = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Bitmap { width, height, rgb }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }
}

impl fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitmap({}x{})", self.width, self.height)
    }
}

/// Mono 16-bit PCM clip.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioClip {
    pub sample_rate: u32,
    #[serde(with = "b64_pcm16")]
    pub samples: Vec<i16>,
}

impl AudioClip {
    pub fn duration_ms(&self) -> u64 {
        if self.sample_rate == 0 {
            return 0;
        }
        self.samples.len() as u64 * 1000 / self.sample_rate as u64
    }
}

impl fmt::Debug for AudioClip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AudioClip({} samples @ {} Hz)", self.samples.len(), self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoClip {
    pub frame_rate: f64,
    pub frames: Vec<Bitmap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarValue {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Payload {
    Video(VideoClip),
    Image(Bitmap),
    Audio(AudioClip),
    Tabular(Table),
    Scalar(ScalarValue),
}

impl Payload {
    pub fn kind(&self) -> DataKind {
        match self {
            Payload::Video(_) => DataKind::Video,
            Payload::Image(_) => DataKind::Image,
            Payload::Audio(_) => DataKind::Audio,
            Payload::Tabular(_) => DataKind::Tabular,
            Payload::Scalar(_) => DataKind::Scalar,
        }
    }

    pub fn scalar(value: f64, unit: &str) -> Self {
        Payload::Scalar(ScalarValue {
            value,
            unit: unit.to_string(),
        })
    }

    pub fn scalar_value(&self) -> Option<f64> {
        match self {
            Payload::Scalar(s) => Some(s.value),
            _ => None,
        }
    }

    /// Size of the raw sensor payload in bytes (pixels, samples, cells),
    /// ignoring serialization overhead.
    pub fn raw_len(&self) -> usize {
        match self {
            Payload::Video(v) => v.frames.iter().map(|f| f.rgb.len()).sum(),
            Payload::Image(b) => b.rgb.len(),
            Payload::Audio(a) => a.samples.len() * 2,
            Payload::Tabular(t) => t
                .rows
                .iter()
                .flatten()
                .map(|c| match c {
                    Cell::Number(_) => 8,
                    Cell::Text(s) => s.len(),
                })
                .sum(),
            Payload::Scalar(_) => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: String,
    pub driver: String,
    pub kind: DataKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub node: String,
    pub operator: String,
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceTrail {
    pub device: DeviceDescriptor,
    pub ops: Vec<OpRecord>,
}

impl ProvenanceTrail {
    pub fn record(&mut self, node: &str, operator: &str, ts: u64) {
        self.ops.push(OpRecord {
            node: node.to_string(),
            operator: operator.to_string(),
            ts,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataItem {
    pub datatype: DataKind,
    pub contenttype: ContentLabel,
    pub inference: Vec<InferenceAnnotation>,
    pub data: Payload,
    pub process: ProvenanceTrail,
}

/// The part of an item that may leave the hub.
#[derive(Serialize)]
struct EgressView<'a> {
    datatype: DataKind,
    contenttype: &'a ContentLabel,
    inference: &'a [InferenceAnnotation],
    data: &'a Payload,
}

impl DataItem {
    pub fn annotations_for<'a>(
        &'a self,
        target: &'a str,
    ) -> impl Iterator<Item = &'a InferenceAnnotation> + 'a {
        self.inference.iter().filter(move |a| a.target.label() == target)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("data items always serialize")
    }

    /// Serialization sent to external sinks: the provenance trail is stripped.
    pub fn to_egress_json(&self) -> String {
        serde_json::to_string(&EgressView {
            datatype: self.datatype,
            contenttype: &self.contenttype,
            inference: &self.inference,
            data: &self.data,
        })
        .expect("data items always serialize")
    }

    pub fn egress_len(&self) -> usize {
        self.to_egress_json().len()
    }
}

/// Builds a fresh item as emitted by a provider.
pub fn make_raw_item(
    kind: DataKind,
    payload: Payload,
    device: DeviceDescriptor,
) -> Result<DataItem, DataError> {
    if payload.kind() != kind {
        return Err(DataError::PayloadKindMismatch {
            declared: kind,
            payload: payload.kind(),
        });
    }
    Ok(DataItem {
        datatype: kind,
        contenttype: ContentLabel::raw(),
        inference: Vec::new(),
        data: payload,
        process: ProvenanceTrail { device, ops: Vec::new() },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerMeta {
    pub source: String,
    pub ts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Message {
    pub items: Vec<DataItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger_meta: Option<TriggerMeta>,
}

impl Message {
    pub fn new(items: Vec<DataItem>) -> Self {
        Message { items, trigger_meta: None }
    }

    pub fn empty() -> Self {
        Message::default()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Copy handed to each downstream connection. All payloads are owned, so a
/// clone shares no mutable state with the original.
pub fn deep_copy_message(m: &Message) -> Message {
    m.clone()
}

mod b64_bytes {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&B64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        B64.decode(text).map_err(serde::de::Error::custom)
    }
}

mod b64_pcm16 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(samples: &[i16], s: S) -> Result<S::Ok, S::Error> {
        let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
        s.serialize_str(&B64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<i16>, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = B64.decode(text).map_err(serde::de::Error::custom)?;
        if bytes.len() % 2 != 0 {
            return Err(serde::de::Error::custom("odd PCM byte count"));
        }
        Ok(bytes
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]))
            .collect())
    }
}
