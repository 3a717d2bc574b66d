//! Instruction text: template realization, parsing back to programs, and the
//! fixed token vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::program::FilterProgram;
use crate::scene::{Color, ObjectDescriptor, Shape, Size, SpatialRelation};

/// Noun used when a descriptor names no shape.
pub const BARE_NOUN: &str = "object";

/// Reserved token id for words outside the vocabulary.
pub const UNK_ID: u32 = 0;
pub const UNK_WORD: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconMode {
    /// CLEVR nouns: cube, sphere, cylinder.
    Scene,
    /// Environment nouns: skull, column, torch.
    #[default]
    Env,
}

impl LexiconMode {
    pub const ALL: [LexiconMode; 2] = [LexiconMode::Scene, LexiconMode::Env];
}

impl fmt::Display for LexiconMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconMode::Scene => "scene",
            LexiconMode::Env => "env",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at token {position} ({}): expected {expected}", found.as_deref().unwrap_or("end of input"))]
pub struct ParseError {
    /// Index of the offending token in the whitespace-split input.
    pub position: usize,
    pub found: Option<String>,
    pub expected: String,
}

/// Surface words for shapes and relations. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    mode: LexiconMode,
    nouns: [(Shape, &'static str); 3],
    phrases: [(SpatialRelation, &'static str); 4],
    synonyms: Vec<(&'static str, &'static str)>,
}

impl Lexicon {
    pub fn new(mode: LexiconMode) -> Self {
        let nouns = match mode {
            LexiconMode::Scene => [
                (Shape::Sphere, "sphere"),
                (Shape::Cube, "cube"),
                (Shape::Cylinder, "cylinder"),
            ],
            LexiconMode::Env => [
                (Shape::Sphere, "column"),
                (Shape::Cube, "skull"),
                (Shape::Cylinder, "torch"),
            ],
        };
        Lexicon {
            mode,
            nouns,
            phrases: [
                (SpatialRelation::Left, "to the left of"),
                (SpatialRelation::Right, "to the right of"),
                (SpatialRelation::Front, "in front of"),
                (SpatialRelation::Behind, "behind"),
            ],
            synonyms: vec![
                ("on the left side of", "to the left of"),
                ("on the right side of", "to the right of"),
                ("on the left of", "to the left of"),
                ("on the right of", "to the right of"),
                ("in back of", "behind"),
            ],
        }
    }

    pub fn env() -> Self {
        Lexicon::new(LexiconMode::Env)
    }

    pub fn scene() -> Self {
        Lexicon::new(LexiconMode::Scene)
    }

    pub fn mode(&self) -> LexiconMode {
        self.mode
    }

    pub fn noun(&self, shape: Shape) -> &'static str {
        self.nouns
            .iter()
            .find(|(s, _)| *s == shape)
            .map(|(_, n)| *n)
            .expect("noun table covers every shape")
    }

    pub fn shape_for_noun(&self, noun: &str) -> Option<Shape> {
        self.nouns.iter().find(|(_, n)| *n == noun).map(|(s, _)| *s)
    }

    pub fn phrase(&self, relation: SpatialRelation) -> &'static str {
        self.phrases
            .iter()
            .find(|(r, _)| *r == relation)
            .map(|(_, p)| *p)
            .expect("phrase table covers every relation")
    }

    pub fn synonyms(&self) -> &[(&'static str, &'static str)] {
        &self.synonyms
    }

    /// Lowercased tokens with every synonym phrase replaced by its canonical
    /// phrase. Each output token remembers its index in the input.
    fn canonical_tokens(&self, text: &str) -> Vec<(String, usize)> {
        let raw: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        let mut table: Vec<(Vec<&str>, &str)> = self
            .synonyms
            .iter()
            .map(|(s, c)| (s.split(' ').collect(), *c))
            .collect();
        table.sort_by_key(|(words, _)| std::cmp::Reverse(words.len()));

        let mut out = Vec::with_capacity(raw.len());
        let mut i = 0;
        'outer: while i < raw.len() {
            for (words, canonical) in &table {
                if raw.len() - i >= words.len()
                    && raw[i..i + words.len()].iter().zip(words).all(|(a, b)| a == b)
                {
                    out.extend(canonical.split(' ').map(|w| (w.to_string(), i)));
                    i += words.len();
                    continue 'outer;
                }
            }
            out.push((raw[i].clone(), i));
            i += 1;
        }
        out
    }

    /// Replaces synonym phrases with canonical ones; lowercases and
    /// normalizes whitespace.
    pub fn canonicalize(&self, text: &str) -> String {
        self.canonical_tokens(text)
            .into_iter()
            .map(|(w, _)| w)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::env()
    }
}

fn push_descriptor<'a>(words: &mut Vec<&'a str>, d: &ObjectDescriptor, lex: &'a Lexicon) {
    if let Some(size) = d.size {
        words.push(size.as_str());
    }
    if let Some(color) = d.color {
        words.push(color.as_str());
    }
    words.push(d.shape.map_or(BARE_NOUN, |s| lex.noun(s)));
}

/// Renders a program with the fixed templates:
/// `go to the [size] [color] [noun]` and
/// `go to the [target] [relation phrase] the [referent]`.
pub fn realize(p: &FilterProgram, lex: &Lexicon) -> String {
    let mut words = vec!["go", "to", "the"];
    match p {
        FilterProgram::Simple { target } => push_descriptor(&mut words, target, lex),
        FilterProgram::Complex {
            target,
            relation,
            referent,
        } => {
            push_descriptor(&mut words, target, lex);
            words.push(lex.phrase(*relation));
            words.push("the");
            push_descriptor(&mut words, referent, lex);
        }
    }
    words.join(" ")
}

struct Parser<'a> {
    tokens: Vec<(String, usize)>,
    next: usize,
    input_len: usize,
    lex: &'a Lexicon,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.next).map(|(w, _)| w.as_str())
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        match self.tokens.get(self.next) {
            Some((w, pos)) => ParseError {
                position: *pos,
                found: Some(w.clone()),
                expected: expected.into(),
            },
            None => ParseError {
                position: self.input_len,
                found: None,
                expected: expected.into(),
            },
        }
    }

    fn expect(&mut self, word: &str) -> Result<(), ParseError> {
        if self.peek() == Some(word) {
            self.next += 1;
            Ok(())
        } else {
            Err(self.error(format!("{word:?}")))
        }
    }

    fn descriptor(&mut self, require_shape: bool) -> Result<ObjectDescriptor, ParseError> {
        let mut d = ObjectDescriptor::ANY;
        if let Some(size) = self.peek().and_then(|w| w.parse::<Size>().ok()) {
            d.size = Some(size);
            self.next += 1;
        }
        if let Some(color) = self.peek().and_then(|w| w.parse::<Color>().ok()) {
            d.color = Some(color);
            self.next += 1;
        }
        let noun = self.peek();
        match noun.and_then(|w| self.lex.shape_for_noun(w)) {
            Some(shape) => d.shape = Some(shape),
            None if noun == Some(BARE_NOUN) && !require_shape => {}
            None => {
                let nouns: Vec<_> = Shape::ALL.iter().map(|&s| self.lex.noun(s)).collect();
                return Err(self.error(if require_shape {
                    format!("a shape noun ({})", nouns.join(", "))
                } else {
                    format!("a size, color or noun ({}, {BARE_NOUN})", nouns.join(", "))
                }));
            }
        }
        self.next += 1;
        Ok(d)
    }

    fn relation(&mut self) -> Result<SpatialRelation, ParseError> {
        for &r in SpatialRelation::ALL {
            let words: Vec<&str> = self.lex.phrase(r).split(' ').collect();
            let end = self.next + words.len();
            if end <= self.tokens.len()
                && self.tokens[self.next..end]
                    .iter()
                    .zip(&words)
                    .all(|((t, _), w)| t == w)
            {
                self.next = end;
                return Ok(r);
            }
        }
        Err(self.error("end of input or a relation phrase"))
    }
}

/// Inverse of [`realize`] over the template language, after synonym
/// canonicalization. Case-insensitive.
pub fn parse(text: &str, lex: &Lexicon) -> Result<FilterProgram, ParseError> {
    let mut p = Parser {
        tokens: lex.canonical_tokens(text),
        next: 0,
        input_len: text.split_whitespace().count(),
        lex,
    };
    for w in ["go", "to", "the"] {
        p.expect(w)?;
    }
    let target = p.descriptor(false)?;
    if p.peek().is_none() {
        return Ok(FilterProgram::simple(target));
    }
    let relation = p.relation()?;
    p.expect("the")?;
    let referent = p.descriptor(true)?;
    if p.peek().is_some() {
        return Err(p.error("end of input"));
    }
    Ok(FilterProgram::Complex {
        target,
        relation,
        referent,
    })
}

/// Word ↔ id table over every realizable instruction in both lexicon modes.
/// Id 0 is reserved for unknown words; the rest follow lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    fn build() -> Self {
        let mut distinct = BTreeSet::new();
        for mode in LexiconMode::ALL {
            let lex = Lexicon::new(mode);
            // descriptors contribute the same words in either slot, so simple
            // programs plus one complex program per relation cover everything
            let referent = ObjectDescriptor::new(None, None, Some(Shape::Cube));
            let programs = ObjectDescriptor::enumerate().map(FilterProgram::simple).chain(
                SpatialRelation::ALL
                    .iter()
                    .map(|&r| FilterProgram::complex(ObjectDescriptor::ANY, r, referent).expect("referent has a shape")),
            );
            for p in programs {
                distinct.extend(realize(&p, &lex).split(' ').map(str::to_string));
            }
        }
        let words: Vec<String> = std::iter::once(UNK_WORD.to_string()).chain(distinct).collect();
        let ids = words
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words, ids }
    }

    pub fn standard() -> &'static Vocabulary {
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(Vocabulary::build)
    }

    /// Number of ids, the reserved unknown id included.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Known words, excluding the unknown marker.
    pub fn words(&self) -> &[String] {
        &self.words[1..]
    }

    pub fn id(&self, word: &str) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        text.split_whitespace()
            .map(|w| self.id(&w.to_lowercase()))
            .collect()
    }

    /// One word per line; the zero-based line number is the token id.
    pub fn write_sidecar<W: Write>(&self, mut out: W) -> io::Result<()> {
        for w in &self.words {
            writeln!(out, "{w}")?;
        }
        Ok(())
    }

    pub fn read_sidecar(text: &str) -> Vocabulary {
        let words: Vec<String> = text.lines().map(str::to_string).collect();
        let ids = words
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words, ids }
    }
}

pub fn tokenize(text: &str) -> Vec<u32> {
    Vocabulary::standard().tokenize(text)
}
