//! Filter operators: select, retrieve, aggregate, noisify, spoof.
//!
//! Items whose datatype differs from the operator's target datatype never
//! reach the output. Every output item keeps its input provenance and gains
//! one record for this operator.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{
    AggregateConfig, AggregateFn, FilterConfig, NoisifyConfig, RetrieveConfig, SelectConfig,
    SpoofConfig,
};
use super::media::{self, Rect};
use super::OpContext;
use crate::data::{
    AudioClip, Bitmap, Cell, ContentLabel, DataItem, DataKind, InferenceAnnotation, Message,
    Payload, Qualifier, ScalarValue, Table,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("{node}: field {field:?} is missing from the input table")]
    MissingField { node: String, field: String },
}

pub fn filter_apply(cfg: &FilterConfig, m: Message, ctx: &OpContext<'_>) -> Result<Message, FilterError> {
    let dt = cfg.datatype();
    let op = cfg.kind().as_str();
    let items: Vec<DataItem> = m.items.into_iter().filter(|i| i.datatype == dt).collect();
    let mut out = match cfg {
        FilterConfig::Select(c) => items.iter().flat_map(|i| select_item(c, i)).collect(),
        FilterConfig::Retrieve(c) => items.iter().filter_map(|i| retrieve_item(c, i)).collect(),
        FilterConfig::Aggregate(c) => aggregate(c, items, ctx)?,
        FilterConfig::Noisify(c) => items.into_iter().map(|i| noisify_item(c, i)).collect(),
        FilterConfig::Spoof(c) => items.into_iter().map(|i| spoof_item(c, i)).collect::<Vec<_>>(),
    };
    for item in &mut out {
        item.process.record(ctx.node, op, ctx.ts);
    }
    Ok(Message {
        items: out,
        trigger_meta: m.trigger_meta,
    })
}

fn derived(from: &DataItem, data: Payload, contenttype: ContentLabel) -> DataItem {
    DataItem {
        datatype: data.kind(),
        contenttype,
        inference: Vec::new(),
        data,
        process: from.process.clone(),
    }
}

fn has_category(a: &InferenceAnnotation, category: Option<&str>) -> bool {
    let Some(want) = category else {
        return true;
    };
    let Some(col) = a.payload.column("category") else {
        return false;
    };
    a.payload.rows.iter().any(|r| r.get(col).is_some_and(|c| c.key() == want))
}

fn matching<'a>(
    item: &'a DataItem,
    target: &'a ContentLabel,
    category: Option<&'a str>,
) -> impl Iterator<Item = &'a InferenceAnnotation> + 'a {
    item.annotations_for(target.label()).filter(move |a| has_category(a, category))
}

fn box_rows(t: &Table) -> Vec<Rect> {
    (0..t.rows.len())
        .filter_map(|r| {
            Some(Rect {
                x: t.number(r, "x")? as i64,
                y: t.number(r, "y")? as i64,
                w: t.number(r, "w")? as i64,
                h: t.number(r, "h")? as i64,
            })
        })
        .collect()
}

fn window_rows(t: &Table) -> Vec<(u64, u64)> {
    (0..t.rows.len())
        .filter_map(|r| {
            let s = t.number(r, "start_ms")?;
            let e = t.number(r, "end_ms")?;
            (s >= 0.0 && e > s).then_some((s as u64, e as u64))
        })
        .collect()
}

fn project(t: &Table, columns: Option<&[String]>) -> Table {
    let Some(cols) = columns else {
        return t.clone();
    };
    let idx: Vec<Option<usize>> = cols.iter().map(|c| t.column(c)).collect();
    let mut out = Table::new(cols.iter().cloned());
    out.rows = t
        .rows
        .iter()
        .map(|row| {
            idx.iter()
                .map(|i| i.and_then(|i| row.get(i).cloned()).unwrap_or(Cell::Text(String::new())))
                .collect()
        })
        .collect();
    out
}

fn select_item(c: &SelectConfig, item: &DataItem) -> Vec<DataItem> {
    let label = c.target.clone().with_qualifier(Qualifier::Cropped);
    let mut out = Vec::new();
    for a in matching(item, &c.target, c.category.as_deref()) {
        match &item.data {
            Payload::Image(img) => {
                for r in box_rows(&a.payload) {
                    if let Some(part) = media::crop(img, r) {
                        out.push(derived(item, Payload::Image(part), label.clone()));
                    }
                }
            }
            Payload::Audio(clip) => {
                for (s, e) in window_rows(&a.payload) {
                    if let Some(part) = media::cut(clip, s, e) {
                        out.push(derived(item, Payload::Audio(part), label.clone()));
                    }
                }
            }
            Payload::Tabular(_) => {
                if !a.payload.is_empty() {
                    let rows = project(&a.payload, c.columns.as_deref());
                    out.push(derived(item, Payload::Tabular(rows), label.clone()));
                }
            }
            _ => {}
        }
    }
    out
}

fn retrieve_item(c: &RetrieveConfig, item: &DataItem) -> Option<DataItem> {
    let label = c.target.clone().with_qualifier(Qualifier::Extracted);
    let found: Vec<&InferenceAnnotation> = matching(item, &c.target, c.category.as_deref()).collect();
    if c.absent {
        if !found.is_empty() {
            return None;
        }
        let t = Table::new(["target", "present"]).with_row(vec![c.target.label().into(), 0.0.into()]);
        return Some(derived(item, Payload::Tabular(t), label));
    }
    let (first, rest) = found.split_first()?;
    let mut t = first.payload.clone();
    for a in rest {
        t.append(&a.payload);
    }
    Some(derived(item, Payload::Tabular(t), label))
}

fn aggregate(c: &AggregateConfig, items: Vec<DataItem>, ctx: &OpContext<'_>) -> Result<Vec<DataItem>, FilterError> {
    let mut groups: Vec<(ContentLabel, Vec<DataItem>)> = Vec::new();
    for item in items {
        if c.target.as_ref().is_some_and(|t| t.label() != item.contenttype.label()) {
            continue;
        }
        let label = item.contenttype.clone().with_qualifier(Qualifier::Aggregated);
        match groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, g)) => g.push(item),
            None => groups.push((label, vec![item])),
        }
    }
    let missing = |field: &str| FilterError::MissingField {
        node: ctx.node.to_string(),
        field: field.to_string(),
    };
    let mut out = Vec::new();
    for (label, group) in groups {
        let payload = match c.datatype {
            DataKind::Tabular => {
                let group_by = c.group_by.as_deref().ok_or_else(|| missing("group_by"))?;
                let value_field = c.value_field.as_deref().ok_or_else(|| missing("value_field"))?;
                let mut all = Table::default();
                for item in &group {
                    if let Payload::Tabular(t) = &item.data {
                        for f in [group_by, value_field] {
                            if t.column(f).is_none() && !(c.function == AggregateFn::Count && f == value_field) {
                                return Err(missing(f));
                            }
                        }
                        all.append(t);
                    }
                }
                Payload::Tabular(group_rows(&all, group_by, value_field, c.function))
            }
            _ => {
                let values: Vec<f64> = group.iter().filter_map(|i| match &i.data {
                    Payload::Scalar(s) => Some(s.value),
                    _ => None,
                }).collect();
                let unit = match (c.function, &group[0].data) {
                    (AggregateFn::Count, _) => "count".to_string(),
                    (_, Payload::Scalar(s)) => s.unit.clone(),
                    _ => String::new(),
                };
                Payload::Scalar(ScalarValue {
                    value: fold(c.function, &values),
                    unit,
                })
            }
        };
        out.push(derived(&group[0], payload, label));
    }
    Ok(out)
}

fn fold(f: AggregateFn, values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    match f {
        AggregateFn::Sum => sum,
        AggregateFn::Count => values.len() as f64,
        AggregateFn::Average if values.is_empty() => 0.0,
        AggregateFn::Average => sum / values.len() as f64,
    }
}

/// One row per distinct `group_by` value, in order of first appearance.
fn group_rows(t: &Table, group_by: &str, value_field: &str, f: AggregateFn) -> Table {
    let g = t.column(group_by);
    let v = t.column(value_field);
    let mut order: Vec<(Cell, Vec<f64>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for row in &t.rows {
        let Some(key) = g.and_then(|g| row.get(g)) else {
            continue;
        };
        let value = v.and_then(|v| row.get(v)).and_then(Cell::as_f64);
        let slot = *index.entry(key.key()).or_insert_with(|| {
            order.push((key.clone(), Vec::new()));
            order.len() - 1
        });
        match (f, value) {
            (_, Some(x)) => order[slot].1.push(x),
            (AggregateFn::Count, None) => order[slot].1.push(0.0),
            _ => {}
        }
    }
    let mut out = Table::new([group_by, value_field]);
    for (key, values) in order {
        out.rows.push(vec![key, fold(f, &values).into()]);
    }
    out
}

/// Blur radius for a noisify of `magnitude_percent` on a `w`×`h` image.
pub fn blur_radius(magnitude_percent: f64, width: u32, height: u32) -> u32 {
    (magnitude_percent * width.min(height) as f64 / 100.0).ceil().max(0.0) as u32
}

fn noisify_item(c: &NoisifyConfig, mut item: DataItem) -> DataItem {
    if c.target.as_ref().is_some_and(|t| t.label() != item.contenttype.label()) {
        return item;
    }
    let m = c.magnitude_percent.clamp(0.0, 100.0) / 100.0;
    item.data = match item.data {
        Payload::Image(img) => Payload::Image(media::box_blur(&img, blur_radius(c.magnitude_percent, img.width, img.height))),
        Payload::Video(mut v) => {
            for f in &mut v.frames {
                *f = media::box_blur(f, blur_radius(c.magnitude_percent, f.width, f.height));
            }
            Payload::Video(v)
        }
        other => {
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ media::digest_u64(media::payload_digest(&other).as_bytes()));
            let mut jitter = |x: f64| if m > 0.0 { x * (1.0 + rng.random_range(-m..=m)) } else { x };
            match other {
                Payload::Audio(a) => {
                    let factor = jitter(1.0);
                    Payload::Audio(AudioClip {
                        sample_rate: a.sample_rate,
                        samples: media::resample(&a.samples, factor),
                    })
                }
                Payload::Scalar(s) => Payload::Scalar(ScalarValue {
                    value: jitter(s.value),
                    unit: s.unit,
                }),
                Payload::Tabular(mut t) => {
                    for cell in t.rows.iter_mut().flatten() {
                        if let Cell::Number(x) = cell {
                            *x = jitter(*x);
                        }
                    }
                    Payload::Tabular(t)
                }
                p => p,
            }
        }
    };
    item.contenttype = item.contenttype.with_qualifier(Qualifier::Anonymized);
    item.inference.clear();
    item
}

fn spoof_item(c: &SpoofConfig, mut item: DataItem) -> DataItem {
    let bank = SpoofBank::builtin();
    let pick = c.replacement.as_deref();
    if item.contenttype.label() == c.target.label() {
        item.data = bank.replace_whole(&item.data, pick);
        item.contenttype = item.contenttype.with_qualifier(Qualifier::Spoofed);
        item.inference.clear();
        return item;
    }
    let regions: Vec<InferenceAnnotation> = item.annotations_for(c.target.label()).cloned().collect();
    if regions.is_empty() {
        return item;
    }
    let mut replaced = false;
    match &mut item.data {
        Payload::Image(img) => {
            for a in &regions {
                for r in box_rows(&a.payload) {
                    if let Some(part) = media::crop(img, r) {
                        let face = bank.image(pick, &part);
                        media::paste_scaled(img, face, r);
                        replaced = true;
                    }
                }
            }
        }
        Payload::Audio(clip) => {
            for a in &regions {
                for (s, e) in window_rows(&a.payload) {
                    if let Some(part) = media::cut(clip, s, e) {
                        let voice = bank.audio(pick, &part);
                        let start = (s * clip.sample_rate as u64 / 1000) as usize;
                        for (i, v) in voice.iter().take(part.samples.len()).enumerate() {
                            clip.samples[start + i] = *v;
                        }
                        replaced = true;
                    }
                }
            }
        }
        Payload::Scalar(s) => {
            s.value = bank.scalar(pick);
            replaced = true;
        }
        _ => {}
    }
    if replaced {
        item.contenttype = item.contenttype.with_qualifier(Qualifier::Spoofed);
        item.inference.clear();
    }
    item
}

/// Named artificial replacements used by spoof. Faces are chosen by a
/// stable hash of the replaced region so repeated faces map consistently.
pub struct SpoofBank {
    faces: Vec<(String, Bitmap)>,
    voices: Vec<(String, Vec<i16>)>,
    scalars: Vec<(String, f64)>,
}

impl SpoofBank {
    pub fn builtin() -> &'static SpoofBank {
        static BANK: OnceLock<SpoofBank> = OnceLock::new();
        BANK.get_or_init(|| {
            let skins = [[224, 172, 105], [141, 85, 36], [255, 219, 172]];
            let faces = skins
                .iter()
                .enumerate()
                .map(|(i, skin)| {
                    let mut img = Bitmap::filled(64, 64, [90, 110, 140]);
                    media::draw_face(&mut img, Rect { x: 8, y: 4, w: 48, h: 56 }, *skin);
                    (format!("synthetic-face-{}", i + 1), img)
                })
                .collect();
            SpoofBank {
                faces,
                voices: vec![("synthetic-voice-1".into(), media::tone(16_000, 16_000, 220.0, 4000.0))],
                scalars: vec![("synthetic-scalar-1".into(), 21.0)],
            }
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.faces
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.voices.iter().map(|(n, _)| n.as_str()))
            .chain(self.scalars.iter().map(|(n, _)| n.as_str()))
            .collect()
    }

    fn choose<'a, T>(list: &'a [(String, T)], name: Option<&str>, original: &Payload) -> &'a T {
        if let Some(found) = name.and_then(|n| list.iter().find(|(k, _)| k == n)) {
            return &found.1;
        }
        let h = media::digest_u64(media::payload_digest(original).as_bytes());
        &list[(h % list.len() as u64) as usize].1
    }

    /// The replacement face for an image region, before scaling.
    pub fn image(&self, name: Option<&str>, region: &Bitmap) -> &Bitmap {
        Self::choose(&self.faces, name, &Payload::Image(region.clone()))
    }

    /// Replacement samples at least as long as `part`, at its sample rate.
    pub fn audio(&self, name: Option<&str>, part: &AudioClip) -> Vec<i16> {
        let voice = Self::choose(&self.voices, name, &Payload::Audio(part.clone()));
        voice.iter().copied().cycle().take(part.samples.len()).collect()
    }

    pub fn scalar(&self, name: Option<&str>) -> f64 {
        Self::choose(&self.scalars, name, &Payload::scalar(0.0, ""))
            .to_owned()
    }

    /// Same-kind, same-shape artificial payload.
    pub fn replace_whole(&self, original: &Payload, name: Option<&str>) -> Payload {
        match original {
            Payload::Image(img) => Payload::Image(media::resize_nearest(self.image(name, img), img.width, img.height)),
            Payload::Audio(a) => Payload::Audio(AudioClip {
                sample_rate: a.sample_rate,
                samples: self.audio(name, a),
            }),
            Payload::Scalar(s) => Payload::Scalar(ScalarValue {
                value: self.scalar(name),
                unit: s.unit.clone(),
            }),
            Payload::Video(v) => {
                let mut v = v.clone();
                for f in &mut v.frames {
                    *f = media::resize_nearest(self.image(name, f), f.width, f.height);
                }
                Payload::Video(v)
            }
            Payload::Tabular(t) => {
                let mut t = t.clone();
                for cell in t.rows.iter_mut().flatten() {
                    *cell = match cell {
                        Cell::Number(_) => Cell::Number(0.0),
                        Cell::Text(_) => Cell::Text("spoofed".into()),
                    };
                }
                Payload::Tabular(t)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_raw_item, DeviceDescriptor, Task};
    use crate::manifest::NodeSpec;
    use crate::operators::{OperatorConfig, OperatorKind};

    const CTX: OpContext<'static> = OpContext { node: "f", ts: 1 };

    fn filter(node: NodeSpec) -> FilterConfig {
        match OperatorConfig::from_node(&node).unwrap() {
            OperatorConfig::Filter(f) => f,
            other => panic!("{other:?}"),
        }
    }

    fn item(payload: Payload) -> DataItem {
        let kind = payload.kind();
        make_raw_item(kind, payload, DeviceDescriptor { id: "d".into(), driver: "t".into(), kind }).unwrap()
    }

    fn annotate(mut i: DataItem, task: Task, target: &str, t: Table) -> DataItem {
        i.inference.push(InferenceAnnotation {
            annotator: "det".into(),
            task,
            target: ContentLabel::new(target).unwrap(),
            payload: t,
            confidence: 1.0,
        });
        i
    }

    fn boxed(x: f64, y: f64, w: f64, h: f64) -> Table {
        Table::new(["x", "y", "w", "h"]).with_row(vec![x.into(), y.into(), w.into(), h.into()])
    }

    fn tv_rows() -> Table {
        Table::new(["category", "duration"])
            .with_row(vec!["news".into(), 10.0.into()])
            .with_row(vec!["news".into(), 20.0.into()])
            .with_row(vec!["sports".into(), 5.0.into()])
    }

    #[test]
    fn aggregate_sum_by_category() {
        let cfg = filter(NodeSpec::new("a", OperatorKind::Aggregate)
            .prop("datatype", "tabular")
            .prop("function", "sum")
            .prop("group_by", "category")
            .prop("value_field", "duration"));
        let out = filter_apply(&cfg, Message::new(vec![item(Payload::Tabular(tv_rows()))]), &CTX).unwrap();
        let Payload::Tabular(t) = &out.items[0].data else { panic!() };
        assert_eq!(t.columns, ["category", "duration"]);
        assert_eq!(t.rows, vec![
            vec![Cell::from("news"), Cell::from(30.0)],
            vec![Cell::from("sports"), Cell::from(5.0)],
        ]);
        assert_eq!(out.items[0].contenttype.qualifier(), Qualifier::Aggregated);
    }

    #[test]
    fn aggregate_missing_field() {
        let cfg = filter(NodeSpec::new("a", OperatorKind::Aggregate)
            .prop("datatype", "tabular")
            .prop("function", "sum")
            .prop("group_by", "genre")
            .prop("value_field", "duration"));
        let err = filter_apply(&cfg, Message::new(vec![item(Payload::Tabular(tv_rows()))]), &CTX).unwrap_err();
        assert_eq!(err, FilterError::MissingField { node: "f".into(), field: "genre".into() });
    }

    #[test]
    fn aggregate_count_and_average_scalars() {
        let msg = Message::new(vec![item(Payload::scalar(1.0, "C")), item(Payload::scalar(3.0, "C"))]);
        for (f, want) in [("count", 2.0), ("average", 2.0), ("sum", 4.0)] {
            let cfg = filter(NodeSpec::new("a", OperatorKind::Aggregate)
                .prop("datatype", "scalar")
                .prop("function", f));
            let out = filter_apply(&cfg, msg.clone(), &CTX).unwrap();
            assert_eq!(out.len(), 1);
            assert_eq!(out.items[0].data.scalar_value(), Some(want), "{f}");
        }
    }

    #[test]
    fn select_crops_each_face() {
        let img = Bitmap::filled(40, 30, [10, 20, 30]);
        let i = annotate(item(Payload::Image(img)), Task::Detect, "face", boxed(0.0, 0.0, 10.0, 10.0));
        let i = annotate(i, Task::Detect, "face", boxed(30.0, 20.0, 20.0, 20.0));
        let cfg = filter(NodeSpec::new("s", OperatorKind::Select)
            .prop("datatype", "image")
            .prop("target", "face"));
        let other = item(Payload::scalar(1.0, "u"));
        let out = filter_apply(&cfg, Message::new(vec![i.clone(), other]), &CTX).unwrap();
        assert_eq!(out.len(), 2);
        let dims: Vec<_> = out.items.iter().map(|i| match &i.data {
            Payload::Image(b) => (b.width, b.height),
            _ => panic!(),
        }).collect();
        assert_eq!(dims, [(10, 10), (10, 10)]);
        for o in &out.items {
            assert_eq!(o.contenttype.key(), "cropped:face");
            assert_eq!(o.process.ops.len(), i.process.ops.len() + 1);
        }
    }

    #[test]
    fn select_drops_unannotated() {
        let cfg = filter(NodeSpec::new("s", OperatorKind::Select)
            .prop("datatype", "image")
            .prop("target", "face"));
        let out = filter_apply(&cfg, Message::new(vec![item(Payload::Image(Bitmap::filled(4, 4, [0; 3])))]), &CTX).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn retrieve_replaces_data_with_annotation() {
        let pose = Table::new(["joint", "x", "y"]).with_row(vec!["head".into(), 3.0.into(), 4.0.into()]);
        let i = annotate(item(Payload::Image(Bitmap::filled(4, 4, [0; 3]))), Task::Extract, "pose", pose.clone());
        let cfg = filter(NodeSpec::new("r", OperatorKind::Retrieve)
            .prop("datatype", "image")
            .prop("target", "pose"));
        let out = filter_apply(&cfg, Message::new(vec![i.clone()]), &CTX).unwrap();
        assert_eq!(out.items[0].datatype, DataKind::Tabular);
        assert_eq!(out.items[0].data, Payload::Tabular(pose));
        assert_eq!(out.items[0].contenttype.key(), "extracted:pose");

        let absent = filter(NodeSpec::new("r", OperatorKind::Retrieve)
            .prop("datatype", "image")
            .prop("target", "pose")
            .prop("absent", true));
        assert!(filter_apply(&absent, Message::new(vec![i]), &CTX).unwrap().is_empty());
        let bare = item(Payload::Image(Bitmap::filled(4, 4, [0; 3])));
        let out = filter_apply(&absent, Message::new(vec![bare]), &CTX).unwrap();
        assert_eq!(out.items[0].data.raw_len(), "pose".len() + 8);
    }

    #[test]
    fn retrieve_by_category() {
        let cls = |c: &str| Table::new(["category", "confidence"]).with_row(vec![c.into(), 1.0.into()]);
        let cfg = filter(NodeSpec::new("r", OperatorKind::Retrieve)
            .prop("datatype", "scalar")
            .prop("target", "time")
            .prop("category", "allowed"));
        let ok = annotate(item(Payload::scalar(0.0, "ms")), Task::Classify, "time", cls("allowed"));
        let no = annotate(item(Payload::scalar(0.0, "ms")), Task::Classify, "time", cls("blocked"));
        assert_eq!(filter_apply(&cfg, Message::new(vec![ok]), &CTX).unwrap().len(), 1);
        assert_eq!(filter_apply(&cfg, Message::new(vec![no]), &CTX).unwrap().len(), 0);
    }

    #[test]
    fn noisify_is_seeded() {
        let speech = Payload::Audio(AudioClip { sample_rate: 8000, samples: media::tone(8000, 8000, 300.0, 5000.0) });
        let run = |seed: u64| {
            let cfg = filter(NodeSpec::new("n", OperatorKind::Noisify)
                .prop("datatype", "audio")
                .prop("magnitude_percent", 20)
                .prop("seed", seed));
            filter_apply(&cfg, Message::new(vec![item(speech.clone())]), &CTX).unwrap().items[0].data.clone()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
        assert_ne!(run(1), speech);
    }

    #[test]
    fn noisify_blurs_images() {
        let mut img = Bitmap::filled(100, 50, [0, 0, 0]);
        media::fill_rect(&mut img, Rect { x: 0, y: 0, w: 50, h: 50 }, [255, 255, 255]);
        let cfg = filter(NodeSpec::new("n", OperatorKind::Noisify)
            .prop("datatype", "image")
            .prop("magnitude_percent", 10));
        let out = filter_apply(&cfg, Message::new(vec![item(Payload::Image(img.clone()))]), &CTX).unwrap();
        assert_eq!(blur_radius(10.0, 100, 50), 5);
        assert_eq!(out.items[0].data, Payload::Image(media::box_blur(&img, 5)));
        assert_eq!(out.items[0].contenttype.key(), "anonymized:raw");
    }

    #[test]
    fn spoof_whole_and_region() {
        let face = Bitmap::filled(20, 20, [200, 150, 120]);
        let mut crop = item(Payload::Image(face.clone()));
        crop.contenttype = ContentLabel::new("face").unwrap().with_qualifier(Qualifier::Cropped);
        let cfg = filter(NodeSpec::new("s", OperatorKind::Spoof)
            .prop("datatype", "image")
            .prop("target", "face")
            .prop("replacement", "synthetic-face-2"));
        let out = filter_apply(&cfg, Message::new(vec![crop]), &CTX).unwrap();
        assert_eq!(out.items[0].contenttype.key(), "spoofed:face");
        let expected = media::resize_nearest(&SpoofBank::builtin().faces[1].1, 20, 20);
        assert_eq!(out.items[0].data, Payload::Image(expected));

        let whole = annotate(item(Payload::Image(Bitmap::filled(40, 40, [0; 3]))), Task::Detect, "face", boxed(10.0, 10.0, 20.0, 20.0));
        let out = filter_apply(&cfg, Message::new(vec![whole]), &CTX).unwrap();
        assert_eq!(out.items[0].contenttype.key(), "spoofed:raw");
        let Payload::Image(b) = &out.items[0].data else { panic!() };
        assert_eq!(b.pixel(0, 0), [0, 0, 0]);
        assert_ne!(b.pixel(20, 20), [0, 0, 0]);
    }

    #[test]
    fn spoof_choice_is_stable() {
        let bank = SpoofBank::builtin();
        let a = Bitmap::filled(8, 8, [1, 1, 1]);
        assert!(std::ptr::eq(bank.image(None, &a), bank.image(None, &a.clone())));
    }
}
