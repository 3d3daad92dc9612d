//! Parser for the template language emitted by the realizer:
//!
//! ```text
//! NP := "the" ATTR+ ( PREP NP | PERSON-PREP )?
//! ```
//!
//! Attribute words are classified against a lexicon built from the scene
//! plus a small built-in vocabulary, so well-formed phrases about absent
//! things still parse (and then resolve to nothing).

use super::expression::{AttributePhrase, ExpressionTree, Person, GENERIC_CATEGORY};
use crate::prepositions::Preposition;
use crate::scene::Scene;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("unknown word {token:?} at position {position}")]
    UnknownToken { token: String, position: usize },
    #[error("{0:?} is a topological preposition; only front/behind/left/right are modeled")]
    TopologicalPreposition(String),
    #[error("expected {expected} at position {position}, found {found:?}")]
    Unexpected {
        expected: &'static str,
        found: String,
        position: usize,
    },
    #[error("cannot arrange {0:?} as color, shape, and category")]
    AttributeOrder(Vec<String>),
}

const BUILTIN_COLORS: &[&str] = &[
    "red", "green", "blue", "yellow", "orange", "purple", "black", "white", "gray", "grey", "pink", "brown",
];
const BUILTIN_SHAPES: &[&str] = &[
    "round",
    "square",
    "triangle",
    "triangular",
    "cuboid",
    "cube",
    "cylinder",
    "cylindrical",
    "sphere",
    "star",
    "rectangle",
    "rectangular",
    "circle",
    "circular",
    "hexagon",
    "oval",
];
const BUILTIN_CATEGORIES: &[&str] = &[
    GENERIC_CATEGORY,
    "block",
    "car",
    "toy",
    "cup",
    "ball",
    "box",
    "bowl",
    "bottle",
];

const TOPOLOGICAL: &[&[&str]] = &[
    &["near"],
    &["next", "to"],
    &["beside"],
    &["besides"],
    &["close", "to"],
    &["by"],
    &["between"],
    &["among"],
    &["around"],
    &["adjacent", "to"],
];

const ROLE_COLOR: u8 = 1;
const ROLE_SHAPE: u8 = 2;
const ROLE_CATEGORY: u8 = 4;

/// Vocabulary for attribute words: phrase (as lowercase tokens) to the set of
/// roles it may fill.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: BTreeMap<Vec<String>, u8>,
    longest: usize,
}

impl Lexicon {
    /// Built-in vocabulary plus every attribute value used in `scene`.
    pub fn for_scene(scene: &Scene) -> Self {
        let mut lex = Self::builtin();
        for e in scene.entities().iter().filter(|e| e.referable_as_target()) {
            lex.add(&e.category, ROLE_CATEGORY);
            if let Some(c) = &e.color {
                lex.add(c, ROLE_COLOR);
            }
            if let Some(s) = &e.shape {
                lex.add(s, ROLE_SHAPE);
            }
        }
        lex
    }

    pub fn builtin() -> Self {
        let mut lex = Self::default();
        for (words, role) in [
            (BUILTIN_COLORS, ROLE_COLOR),
            (BUILTIN_SHAPES, ROLE_SHAPE),
            (BUILTIN_CATEGORIES, ROLE_CATEGORY),
        ] {
            for w in words {
                lex.add(w, role);
            }
        }
        lex
    }

    fn add(&mut self, phrase: &str, role: u8) {
        let key = tokenize(phrase);
        if key.is_empty() {
            return;
        }
        self.longest = self.longest.max(key.len());
        *self.entries.entry(key).or_default() |= role;
    }

    /// Longest lexicon phrase starting at `tokens[0]`.
    fn longest_match(&self, tokens: &[String]) -> Option<(usize, u8)> {
        (1..=self.longest.min(tokens.len()))
            .rev()
            .find_map(|n| self.entries.get(&tokens[..n]).map(|&roles| (n, roles)))
    }
}

fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| matches!(c, '.' | ',' | '!' | '?' | ';')))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

type PrepForm = (&'static [&'static str], Preposition, Option<Person>);

const PERSON_FORMS: &[PrepForm] = &[
    (&["in", "front", "of", "me"], Preposition::Front, Some(Person::Speaker)),
    (&["behind", "me"], Preposition::Behind, Some(Person::Speaker)),
    (&["on", "my", "left"], Preposition::Left, Some(Person::Speaker)),
    (&["on", "my", "right"], Preposition::Right, Some(Person::Speaker)),
    (&["to", "my", "left"], Preposition::Left, Some(Person::Speaker)),
    (&["to", "my", "right"], Preposition::Right, Some(Person::Speaker)),
    (
        &["in", "front", "of", "you"],
        Preposition::Front,
        Some(Person::Listener),
    ),
    (&["behind", "you"], Preposition::Behind, Some(Person::Listener)),
    (&["on", "your", "left"], Preposition::Left, Some(Person::Listener)),
    (&["on", "your", "right"], Preposition::Right, Some(Person::Listener)),
    (&["to", "your", "left"], Preposition::Left, Some(Person::Listener)),
    (&["to", "your", "right"], Preposition::Right, Some(Person::Listener)),
];

const OBJECT_FORMS: &[PrepForm] = &[
    (&["in", "front", "of"], Preposition::Front, None),
    (&["behind"], Preposition::Behind, None),
    (&["to", "the", "left", "of"], Preposition::Left, None),
    (&["to", "the", "right", "of"], Preposition::Right, None),
    (&["on", "the", "left", "of"], Preposition::Left, None),
    (&["on", "the", "right", "of"], Preposition::Right, None),
];

fn starts_with(tokens: &[String], words: &[&str]) -> bool {
    tokens.len() >= words.len() && tokens.iter().zip(words).all(|(t, w)| t == w)
}

fn match_prep(tokens: &[String]) -> Option<(usize, Preposition, Option<Person>)> {
    PERSON_FORMS
        .iter()
        .chain(OBJECT_FORMS)
        .find(|(words, _, _)| starts_with(tokens, words))
        .map(|&(words, prep, person)| (words.len(), prep, person))
}

fn match_topological(tokens: &[String]) -> Option<String> {
    TOPOLOGICAL
        .iter()
        .find(|words| starts_with(tokens, words))
        .map(|words| words.join(" "))
}

/// Parses a surface string into an expression tree.
pub fn parse_expression(text: &str, lexicon: &Lexicon) -> Result<ExpressionTree, ParseError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let (tree, end) = parse_np(&tokens, 0, lexicon)?;
    if end != tokens.len() {
        return Err(ParseError::Unexpected {
            expected: "end of expression",
            found: tokens[end].clone(),
            position: end,
        });
    }
    Ok(tree)
}

fn parse_np(tokens: &[String], start: usize, lexicon: &Lexicon) -> Result<(ExpressionTree, usize), ParseError> {
    match tokens.get(start) {
        Some(t) if t == "the" => {}
        other => {
            return Err(ParseError::Unexpected {
                expected: "\"the\"",
                found: other.cloned().unwrap_or_default(),
                position: start,
            })
        }
    }
    let mut pos = start + 1;
    let mut words: Vec<(String, u8)> = Vec::new();
    while pos < tokens.len() {
        if match_prep(&tokens[pos..]).is_some() {
            break;
        }
        if let Some(word) = match_topological(&tokens[pos..]) {
            return Err(ParseError::TopologicalPreposition(word));
        }
        let (len, roles) = lexicon
            .longest_match(&tokens[pos..])
            .ok_or_else(|| ParseError::UnknownToken {
                token: tokens[pos].clone(),
                position: pos,
            })?;
        words.push((tokens[pos..pos + len].join(" "), roles));
        pos += len;
    }
    if words.is_empty() {
        return Err(ParseError::Unexpected {
            expected: "an attribute word",
            found: tokens.get(pos).cloned().unwrap_or_default(),
            position: pos,
        });
    }
    let head = assign_roles(&words)?;

    let Some((len, prep, person)) = match_prep(&tokens[pos..]) else {
        return Ok((ExpressionTree::Leaf(head), pos));
    };
    pos += len;
    let landmark = match person {
        Some(p) => ExpressionTree::Leaf(AttributePhrase::person(p)),
        None => {
            let (np, end) = parse_np(tokens, pos, lexicon)?;
            pos = end;
            np
        }
    };
    Ok((ExpressionTree::compound(head, prep, landmark), pos))
}

/// Assigns color < shape < category roles in surface order. Among valid
/// assignments, one ending in a category wins, then the one using later roles.
fn assign_roles(words: &[(String, u8)]) -> Result<AttributePhrase, ParseError> {
    const ROLES: [u8; 3] = [ROLE_COLOR, ROLE_SHAPE, ROLE_CATEGORY];
    let fail = || ParseError::AttributeOrder(words.iter().map(|(w, _)| w.clone()).collect());
    if words.len() > ROLES.len() {
        return Err(fail());
    }
    let mut best: Option<Vec<usize>> = None;
    let mut chosen = Vec::with_capacity(words.len());
    search(words, 0, &mut chosen, &mut best);
    let roles = best.ok_or_else(fail)?;

    let mut phrase = AttributePhrase::default();
    for ((word, _), role) in words.iter().zip(roles) {
        let slot = match role {
            0 => &mut phrase.color,
            1 => &mut phrase.shape,
            _ => &mut phrase.category,
        };
        *slot = Some(word.clone());
    }
    return Ok(phrase);

    fn search(words: &[(String, u8)], min_role: usize, chosen: &mut Vec<usize>, best: &mut Option<Vec<usize>>) {
        if chosen.len() == words.len() {
            let key = |r: &Vec<usize>| (r.last() == Some(&2), r.clone());
            if best.as_ref().is_none_or(|b| key(chosen) > key(b)) {
                *best = Some(chosen.clone());
            }
            return;
        }
        let allowed = words[chosen.len()].1;
        for (role, &bit) in ROLES.iter().enumerate().skip(min_role) {
            if allowed & bit != 0 {
                chosen.push(role);
                search(words, role + 1, chosen, best);
                chosen.pop();
            }
        }
    }
}
