//! The emoji vocabulary.
//!
//! Note-taking emojis are anchored to a block and persist in the document.
//! Chit-chat emojis are ephemeral broadcasts that never touch document state.
//! Only the stable `code` travels on the wire; labels are display text.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmojiCategory {
    NoteTaking,
    ChitChat,
}

/// One entry of the emoji catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EmojiCode {
    code: &'static str,
    label: &'static str,
    category: EmojiCategory,
}

impl EmojiCode {
    const fn new(code: &'static str, label: &'static str, category: EmojiCategory) -> Self {
        EmojiCode { code, label, category }
    }

    pub fn code(&self) -> &'static str {
        self.code
    }

    pub fn label(&self) -> &'static str {
        self.label
    }

    pub fn category(&self) -> EmojiCategory {
        self.category
    }

    pub fn is_note_taking(&self) -> bool {
        self.category == EmojiCategory::NoteTaking
    }

    pub fn is_chit_chat(&self) -> bool {
        self.category == EmojiCategory::ChitChat
    }
}

impl fmt::Display for EmojiCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code)
    }
}

use EmojiCategory::{ChitChat, NoteTaking};

static CATALOG: [EmojiCode; 18] = [
    EmojiCode::new("nt.important", "Important", NoteTaking),
    EmojiCode::new("nt.detail_plz", "Detail PLZ", NoteTaking),
    EmojiCode::new("nt.is_sufficient", "Is Sufficient", NoteTaking),
    EmojiCode::new("nt.plz_as_the_slide", "PLZ As the Slide", NoteTaking),
    EmojiCode::new("nt.plz_add_the_photo", "PLZ Add the Photo", NoteTaking),
    EmojiCode::new("nt.plz_fix_it", "PLZ Fix It", NoteTaking),
    EmojiCode::new("nt.too_difficult", "Too Difficult", NoteTaking),
    EmojiCode::new("nt.did_i_write_correctly", "Did I Write Correctly?", NoteTaking),
    EmojiCode::new("nt.brb", "BRB", NoteTaking),
    EmojiCode::new("cc.thank_you", "Thank You", ChitChat),
    EmojiCode::new("cc.great", "Great", ChitChat),
    EmojiCode::new("cc.you_got_this", "You Got This", ChitChat),
    EmojiCode::new("cc.funny", "Funny", ChitChat),
    EmojiCode::new("cc.focus_here_plz", "Focus Here PLZ", ChitChat),
    EmojiCode::new("cc.what_about_short_break", "What about Short Break", ChitChat),
    EmojiCode::new("cc.dont_doze_off", "Don't Doze Off", ChitChat),
    EmojiCode::new("cc.plz_help", "PLZ Help", ChitChat),
    EmojiCode::new("cc.wanna_go_to_the_bathroom", "Wanna Go To the Bathroom", ChitChat),
];

/// All emojis, note-taking entries first, in palette order.
pub fn emoji_catalog() -> &'static [EmojiCode] {
    &CATALOG
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown emoji code {0:?}")]
pub struct UnknownEmoji(pub String);

pub fn parse_emoji_code(code: &str) -> Result<EmojiCode, UnknownEmoji> {
    CATALOG
        .iter()
        .find(|e| e.code == code)
        .copied()
        .ok_or_else(|| UnknownEmoji(code.to_owned()))
}

impl std::str::FromStr for EmojiCode {
    type Err = UnknownEmoji;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_emoji_code(s)
    }
}

impl Serialize for EmojiCode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.code)
    }
}

impl<'de> Deserialize<'de> for EmojiCode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_emoji_code(&s).map_err(serde::de::Error::custom)
    }
}
