//! Mask-enforcing decoder. Whatever the token source emits, digits reach
//! the output only as the canonical text of a known slot.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "text", rename_all = "snake_case")]
pub enum Token {
    Word(String),
    Punct(String),
    Numeric(String),
    SlotOpen(String),
    SlotClose,
}

/// Any producer of narrative tokens.
pub trait TokenStream {
    fn next_token(&mut self) -> Option<Token>;
}

impl<I: Iterator<Item = Token>> TokenStream for I {
    fn next_token(&mut self) -> Option<Token> {
        self.next()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MaskEvent {
    /// A numeric token, or a word/punctuation token carrying a digit,
    /// outside any slot.
    DigitOutsideSlot { position: usize, token: String },
    /// Slot content differed from the canonical text, which was written instead.
    SlotMismatch { slot: String, emitted: String },
    UnknownSlot { slot: String },
    /// Close without open, or an open inside an open slot.
    Unbalanced { position: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Decoded {
    pub text: String,
    pub mask_events: Vec<MaskEvent>,
}

fn is_run_char(c: char) -> bool {
    c.is_ascii_digit() || c == '.'
}

struct Writer {
    out: String,
}

impl Writer {
    fn last(&self) -> Option<char> {
        self.out.chars().next_back()
    }

    /// Appends `piece`, separating it by a space when it would otherwise
    /// fuse into a neighbouring digit run.
    fn push(&mut self, piece: &str, spaced: bool) {
        let Some(first) = piece.chars().next() else { return };
        let fuse = matches!(self.last(), Some(c) if is_run_char(c)) && is_run_char(first);
        let want_space = spaced && !matches!(self.last(), None | Some(' ') | Some('('));
        if fuse || want_space {
            self.out.push(' ');
        }
        self.out.push_str(piece);
    }
}

enum State {
    Outside,
    InSlot { name: String, buf: String },
    Discard,
}

/// Runs the finite-state mask over `tokens`. `slots` maps slot names to
/// canonical text.
pub fn decode(tokens: &mut dyn TokenStream, slots: &BTreeMap<String, String>) -> Decoded {
    let mut w = Writer { out: String::new() };
    let mut events = Vec::new();
    let mut state = State::Outside;
    let mut pos = 0usize;

    let close = |state: &mut State, w: &mut Writer, events: &mut Vec<MaskEvent>| {
        if let State::InSlot { name, buf } = core::mem::replace(state, State::Outside) {
            let canonical = &slots[&name];
            if &buf != canonical {
                events.push(MaskEvent::SlotMismatch { slot: name, emitted: buf });
            }
            w.push(canonical, true);
        }
        *state = State::Outside;
    };

    while let Some(tok) = tokens.next_token() {
        match (&mut state, tok) {
            (State::InSlot { .. }, Token::SlotClose) | (State::Discard, Token::SlotClose) => {
                close(&mut state, &mut w, &mut events)
            }
            (State::InSlot { .. } | State::Discard, Token::SlotOpen(name)) => {
                events.push(MaskEvent::Unbalanced { position: pos });
                close(&mut state, &mut w, &mut events);
                state = open(name, slots, &mut events);
            }
            (State::InSlot { buf, .. }, Token::Word(s) | Token::Punct(s) | Token::Numeric(s)) => buf.push_str(&s),
            (State::Discard, _) => {}
            (State::Outside, Token::SlotOpen(name)) => state = open(name, slots, &mut events),
            (State::Outside, Token::SlotClose) => events.push(MaskEvent::Unbalanced { position: pos }),
            (State::Outside, Token::Numeric(s)) => events.push(MaskEvent::DigitOutsideSlot { position: pos, token: s }),
            (State::Outside, Token::Word(s) | Token::Punct(s)) if s.chars().any(|c| c.is_ascii_digit()) => {
                events.push(MaskEvent::DigitOutsideSlot { position: pos, token: s })
            }
            (State::Outside, Token::Word(s)) => w.push(&s, true),
            (State::Outside, Token::Punct(s)) => {
                let spaced = s == "(";
                w.push(&s, spaced)
            }
        }
        pos += 1;
    }
    close(&mut state, &mut w, &mut events);
    Decoded {
        text: w.out,
        mask_events: events,
    }
}

fn open(name: String, slots: &BTreeMap<String, String>, events: &mut Vec<MaskEvent>) -> State {
    if slots.contains_key(&name) {
        State::InSlot { name, buf: String::new() }
    } else {
        events.push(MaskEvent::UnknownSlot { slot: name });
        State::Discard
    }
}

/// Maximal runs of `[0-9.]` containing at least one digit.
pub fn digit_runs(text: &str) -> Vec<&str> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices().chain(core::iter::once((text.len(), ' '))) {
        match (start, is_run_char(c)) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                let run = &text[s..i];
                if run.bytes().any(|b| b.is_ascii_digit()) {
                    runs.push(run);
                }
                start = None;
            }
            _ => {}
        }
    }
    runs
}

/// Digit runs of `text` that are not a digit run of any allowed slot text.
pub fn unreferenced_digit_runs<'a, 'b>(text: &'a str, allowed: impl IntoIterator<Item = &'b str>) -> Vec<String> {
    let ok: Vec<&str> = allowed.into_iter().flat_map(digit_runs).collect();
    digit_runs(text)
        .into_iter()
        .filter(|r| !ok.contains(r))
        .map(ToString::to_string)
        .collect()
}
