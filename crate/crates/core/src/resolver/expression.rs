use crate::prepositions::Preposition;
use crate::scene::{EntityKind, Scene};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Category word that matches every object on the table.
pub const GENERIC_CATEGORY: &str = "object";

/// A conversational participant used as a noun phrase ("me", "you").
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Person {
    Speaker,
    Listener,
}

/// The attribute content of a basic noun phrase.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributePhrase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person: Option<Person>,
}

impl AttributePhrase {
    pub fn category(category: &str) -> Self {
        Self {
            category: Some(category.to_string()),
            ..Self::default()
        }
    }

    pub fn person(person: Person) -> Self {
        Self {
            person: Some(person),
            ..Self::default()
        }
    }

    pub fn with_color(mut self, color: &str) -> Self {
        self.color = Some(color.to_string());
        self
    }

    pub fn with_shape(mut self, shape: &str) -> Self {
        self.shape = Some(shape.to_string());
        self
    }

    pub fn is_person(&self) -> bool {
        self.person.is_some()
    }

    pub fn validate(&self) -> Result<(), ExpressionError> {
        let visual = self.category.is_some() || self.color.is_some() || self.shape.is_some();
        match (visual, self.person.is_some()) {
            (false, false) => Err(ExpressionError::EmptyPhrase),
            (true, true) => Err(ExpressionError::MixedPersonPhrase),
            _ => Ok(()),
        }
    }

    /// Whether scene entity `idx` fits every attribute this phrase sets.
    pub fn matches(&self, scene: &Scene, idx: usize) -> bool {
        let e = scene.entity(idx);
        if let Some(person) = self.person {
            return matches!(
                (person, e.kind),
                (Person::Speaker, EntityKind::Speaker) | (Person::Listener, EntityKind::Listener)
            );
        }
        if e.kind != EntityKind::Object {
            return false;
        }
        let same = |want: &Option<String>, have: &Option<String>| match want {
            None => true,
            Some(w) => have.as_deref().is_some_and(|h| h.eq_ignore_ascii_case(w)),
        };
        let category_ok = match &self.category {
            None => true,
            Some(c) if c.eq_ignore_ascii_case(GENERIC_CATEGORY) => true,
            Some(c) => e.category.eq_ignore_ascii_case(c),
        };
        category_ok && same(&self.color, &e.color) && same(&self.shape, &e.shape)
    }
}

/// Entities consistent with `phrase`, in scene order.
pub fn consistent_set(phrase: &AttributePhrase, scene: &Scene) -> Vec<usize> {
    (0..scene.len()).filter(|&i| phrase.matches(scene, i)).collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExpressionError {
    #[error("noun phrase sets no attribute")]
    EmptyPhrase,
    #[error("a person phrase cannot carry visual attributes")]
    MixedPersonPhrase,
    #[error("a person phrase can only appear as a landmark")]
    PersonHead,
    #[error("a prepositional phrase needs both a preposition and a landmark")]
    IncompletePhrase,
}

/// A right-branching referring expression. Each `Compound` node is one
/// spatial relation unit: head NP, preposition, and landmark NP.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ExpressionDocument", into = "ExpressionDocument")]
pub enum ExpressionTree {
    Leaf(AttributePhrase),
    Compound {
        head: AttributePhrase,
        prep: Preposition,
        landmark: Box<ExpressionTree>,
    },
}

impl ExpressionTree {
    pub fn compound(head: AttributePhrase, prep: Preposition, landmark: ExpressionTree) -> Self {
        ExpressionTree::Compound {
            head,
            prep,
            landmark: Box::new(landmark),
        }
    }

    pub fn head(&self) -> &AttributePhrase {
        match self {
            ExpressionTree::Leaf(head) | ExpressionTree::Compound { head, .. } => head,
        }
    }

    /// Number of spatial relation units.
    pub fn depth(&self) -> usize {
        match self {
            ExpressionTree::Leaf(_) => 0,
            ExpressionTree::Compound { landmark, .. } => 1 + landmark.depth(),
        }
    }

    /// Checks phrase well-formedness and that persons appear only as landmarks.
    pub fn validate(&self) -> Result<(), ExpressionError> {
        self.head().validate()?;
        if self.head().is_person() {
            return Err(ExpressionError::PersonHead);
        }
        let mut node = self;
        while let ExpressionTree::Compound { landmark, .. } = node {
            landmark.head().validate()?;
            if landmark.head().is_person() && !matches!(**landmark, ExpressionTree::Leaf(_)) {
                return Err(ExpressionError::PersonHead);
            }
            node = landmark;
        }
        Ok(())
    }
}

/// JSON layout: `{"head": {...}, "prep": "front", "landmark": {...}}`, or
/// `{"head": {...}}` for a leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionDocument {
    pub head: AttributePhrase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prep: Option<Preposition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmark: Option<Box<ExpressionDocument>>,
}

impl TryFrom<ExpressionDocument> for ExpressionTree {
    type Error = ExpressionError;

    fn try_from(doc: ExpressionDocument) -> Result<Self, Self::Error> {
        let tree = match (doc.prep, doc.landmark) {
            (None, None) => ExpressionTree::Leaf(doc.head),
            (Some(prep), Some(landmark)) => {
                ExpressionTree::compound(doc.head, prep, ExpressionTree::try_from(*landmark)?)
            }
            _ => return Err(ExpressionError::IncompletePhrase),
        };
        tree.head().validate()?;
        Ok(tree)
    }
}

impl From<ExpressionTree> for ExpressionDocument {
    fn from(tree: ExpressionTree) -> Self {
        match tree {
            ExpressionTree::Leaf(head) => ExpressionDocument {
                head,
                prep: None,
                landmark: None,
            },
            ExpressionTree::Compound { head, prep, landmark } => ExpressionDocument {
                head,
                prep: Some(prep),
                landmark: Some(Box::new((*landmark).into())),
            },
        }
    }
}
