use super::OpContext;
use crate::data::{DataItem, Message, Payload};
use crate::diag::{Diagnostic, DiagnosticLog, Level};

/// One-line summary of an item. Never includes payload bytes.
pub fn render_item(item: &DataItem) -> String {
    let shape = match &item.data {
        Payload::Image(b) => format!("{}x{}", b.width, b.height),
        Payload::Video(v) => format!("{} frames @ {} fps", v.frames.len(), v.frame_rate),
        Payload::Audio(a) => format!("{} ms @ {} Hz", a.duration_ms(), a.sample_rate),
        Payload::Tabular(t) => format!("{} rows x {} columns", t.rows.len(), t.columns.len()),
        Payload::Scalar(s) => format!("{} {}", s.value, s.unit),
    };
    format!(
        "{} {} [{}] annotations={}",
        item.datatype,
        item.contenttype,
        shape,
        item.inference.len()
    )
}

/// Logs one line per item and passes the message on unchanged. Empty
/// messages are neither logged nor forwarded.
pub fn debug_tap(m: Message, sink: &mut DiagnosticLog, ctx: &OpContext<'_>) -> Option<Message> {
    if m.is_empty() {
        return None;
    }
    for item in &m.items {
        sink.push(&Diagnostic::new(ctx.ts, ctx.node, Level::Debug, "DEBUG", render_item(item)));
    }
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_raw_item, Bitmap, DataKind, DeviceDescriptor};

    #[test]
    fn image_line_has_no_bytes() {
        let dev = DeviceDescriptor { id: "cam".into(), driver: "t".into(), kind: DataKind::Image };
        let item = make_raw_item(DataKind::Image, Payload::Image(Bitmap::filled(800, 600, [7, 7, 7])), dev).unwrap();
        let m = Message::new(vec![item]);
        let mut log = DiagnosticLog::new();
        let out = debug_tap(m.clone(), &mut log, &OpContext { node: "dbg", ts: 3 }).unwrap();
        assert_eq!(out, m);
        assert_eq!(log.lines().len(), 1);
        assert!(log.lines()[0].contains("800x600"));
        assert!(log.lines()[0].contains("raw"));
        assert!(log.lines()[0].len() < 200);
        assert!(debug_tap(Message::empty(), &mut log, &OpContext { node: "dbg", ts: 4 }).is_none());
        assert_eq!(log.lines().len(), 1);
    }
}
