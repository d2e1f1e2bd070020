use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

/// English wording for device names, table fields and plurals. Shipped as
/// data so sentences can be reworded without touching the generator.
#[derive(Debug, Deserialize)]
pub struct Phrasebook {
    devices: BTreeMap<String, String>,
    fields: BTreeMap<String, String>,
    plurals: BTreeMap<String, String>,
}

impl Phrasebook {
    pub fn english() -> &'static Phrasebook {
        static BOOK: OnceLock<Phrasebook> = OnceLock::new();
        BOOK.get_or_init(|| serde_json::from_str(include_str!("../../phrases/en.json")).expect("bundled phrasebook parses"))
    }

    pub fn device(&self, id: &str) -> String {
        if let Some(p) = self.devices.get(id) {
            return p.clone();
        }
        // "cam-1" reads as "camera"
        let stem = id.trim_end_matches(|c: char| c.is_ascii_digit() || c == '-' || c == '_');
        self.devices
            .get(stem)
            .cloned()
            .unwrap_or_else(|| id.replace(['-', '_'], " "))
    }

    pub fn field(&self, name: &str) -> String {
        self.fields.get(name).cloned().unwrap_or_else(|| name.replace('_', " "))
    }

    /// Naive "+s" unless the table says otherwise. Multi-word phrases
    /// pluralize their last word.
    pub fn plural(&self, word: &str) -> String {
        if let Some(p) = self.plurals.get(word) {
            return p.clone();
        }
        match word.rsplit_once(' ') {
            Some((head, last)) => format!("{head} {}", self.plural(last)),
            None => format!("{word}s"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let b = Phrasebook::english();
        assert_eq!(b.device("mic"), "microphone");
        assert_eq!(b.device("cam-1"), "camera");
        assert_eq!(b.device("front-door"), "front door");
        assert_eq!(b.field("category"), "content category");
        assert_eq!(b.plural("pose"), "poses");
        assert_eq!(b.plural("audio"), "audios");
        assert_eq!(b.plural("cropped person image"), "cropped person images");
    }
}
