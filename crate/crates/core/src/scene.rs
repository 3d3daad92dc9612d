//! The immutable world model: entities on a table, the two conversational
//! agents, and the cardinal direction used by the extrinsic frame.

use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use thiserror::Error;

/// Minimum separation between two centroids, in meters.
pub const MIN_SEPARATION: f64 = 1e-6;

const NORTH_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Object,
    Speaker,
    Listener,
}

/// Landmark classes that carry distinct frame preferences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkType {
    Speaker,
    Listener,
    OrientedObject,
    UnorientedObject,
}

impl LandmarkType {
    pub const ALL: [LandmarkType; 4] = [
        LandmarkType::Speaker,
        LandmarkType::Listener,
        LandmarkType::OrientedObject,
        LandmarkType::UnorientedObject,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LandmarkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LandmarkType::Speaker => "speaker",
            LandmarkType::Listener => "listener",
            LandmarkType::OrientedObject => "oriented_object",
            LandmarkType::UnorientedObject => "unoriented_object",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub category: String,
    #[serde(default)]
    pub color: Option<String>,
    #[serde(default)]
    pub shape: Option<String>,
    pub pos: Vec2,
    /// Radians counterclockwise from +x; `None` means the entity has no front.
    #[serde(default)]
    pub heading: Option<f64>,
}

impl Entity {
    pub fn object(id: &str, category: &str, pos: Vec2) -> Self {
        Self {
            id: id.to_string(),
            kind: EntityKind::Object,
            category: category.to_string(),
            color: None,
            shape: None,
            pos,
            heading: None,
        }
    }

    pub fn agent(id: &str, kind: EntityKind, pos: Vec2, heading: f64) -> Self {
        let category = match kind {
            EntityKind::Speaker => "robot",
            EntityKind::Listener => "person",
            EntityKind::Object => "object",
        };
        Self {
            id: id.to_string(),
            kind,
            category: category.to_string(),
            color: None,
            shape: None,
            pos,
            heading: Some(heading),
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

    pub fn with_heading(mut self, heading: f64) -> Self {
        self.heading = Some(heading);
        self
    }

    pub fn referable_as_target(&self) -> bool {
        self.kind == EntityKind::Object
    }

    pub fn has_orientation(&self) -> bool {
        self.heading.is_some()
    }

    /// Unit view direction, if the entity is oriented.
    pub fn facing(&self) -> Option<Vec2> {
        self.heading.map(Vec2::from_heading)
    }
}

pub fn landmark_type(e: &Entity) -> LandmarkType {
    match e.kind {
        EntityKind::Speaker => LandmarkType::Speaker,
        EntityKind::Listener => LandmarkType::Listener,
        EntityKind::Object if e.has_orientation() => LandmarkType::OrientedObject,
        EntityKind::Object => LandmarkType::UnorientedObject,
    }
}

/// Axis-aligned table rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extent {
    pub min: Vec2,
    pub max: Vec2,
}

impl Extent {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("malformed scene document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io error reading scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("{field}: duplicate entity id {id:?}")]
    DuplicateId { field: String, id: String },
    #[error("scene has no {0}")]
    MissingAgent(EntityKind),
    #[error("{field}: second {kind} entity {id:?}; exactly one is allowed")]
    DuplicateAgent {
        field: String,
        kind: EntityKind,
        id: String,
    },
    #[error("{field}: {kind} {id:?} must have a heading")]
    AgentWithoutHeading {
        field: String,
        kind: EntityKind,
        id: String,
    },
    #[error("entities {a:?} and {b:?} have coincident centroids (separation {distance:e} m)")]
    CentroidCollision { a: String, b: String, distance: f64 },
    #[error("{field}: centroid {pos:?} of {id:?} lies outside the table extent")]
    OutOfExtent { field: String, id: String, pos: [f64; 2] },
    #[error("north: vector {0:?} is not unit length")]
    NorthNotUnit([f64; 2]),
    #[error("{field}: {reason}")]
    InvalidField { field: String, reason: String },
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EntityKind::Object => "object",
            EntityKind::Speaker => "speaker",
            EntityKind::Listener => "listener",
        })
    }
}

/// On-disk scene layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDocument {
    #[serde(default = "default_north")]
    pub north: Vec2,
    pub table: Extent,
    pub entities: Vec<Entity>,
}

fn default_north() -> Vec2 {
    Vec2::new(0.0, 1.0)
}

/// A validated scene. Construct through [`Scene::new`] or [`load_scene`].
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    entities: Vec<Entity>,
    north: Vec2,
    table: Extent,
    speaker: usize,
    listener: usize,
}

impl Scene {
    pub fn new(entities: Vec<Entity>, north: Vec2, table: Extent) -> Result<Self, SceneError> {
        Self::from_document(SceneDocument { north, table, entities })
    }

    pub fn from_document(doc: SceneDocument) -> Result<Self, SceneError> {
        let SceneDocument { north, table, entities } = doc;

        if !north.is_finite() || (north.norm() - 1.0).abs() > NORTH_TOLERANCE {
            return Err(SceneError::NorthNotUnit(north.into()));
        }
        if !table.min.is_finite() || !table.max.is_finite() || table.min.x > table.max.x || table.min.y > table.max.y {
            return Err(SceneError::InvalidField {
                field: "table".into(),
                reason: "min must be finite and not exceed max".into(),
            });
        }

        let mut seen = HashSet::new();
        let mut speaker = None;
        let mut listener = None;
        for (i, e) in entities.iter().enumerate() {
            let field = format!("entities[{i}]");
            if e.id.is_empty() {
                return Err(SceneError::InvalidField {
                    field: format!("{field}.id"),
                    reason: "id must be non-empty".into(),
                });
            }
            if !seen.insert(e.id.as_str()) {
                return Err(SceneError::DuplicateId {
                    field: format!("{field}.id"),
                    id: e.id.clone(),
                });
            }
            if e.category.trim().is_empty() {
                return Err(SceneError::InvalidField {
                    field: format!("{field}.category"),
                    reason: "category must be non-empty".into(),
                });
            }
            if !e.pos.is_finite() {
                return Err(SceneError::InvalidField {
                    field: format!("{field}.pos"),
                    reason: "coordinates must be finite".into(),
                });
            }
            if let Some(h) = e.heading {
                if !h.is_finite() {
                    return Err(SceneError::InvalidField {
                        field: format!("{field}.heading"),
                        reason: "heading must be finite".into(),
                    });
                }
            }
            if !table.contains(e.pos) {
                return Err(SceneError::OutOfExtent {
                    field: format!("{field}.pos"),
                    id: e.id.clone(),
                    pos: e.pos.into(),
                });
            }
            let slot = match e.kind {
                EntityKind::Speaker => &mut speaker,
                EntityKind::Listener => &mut listener,
                EntityKind::Object => continue,
            };
            if slot.is_some() {
                return Err(SceneError::DuplicateAgent {
                    field,
                    kind: e.kind,
                    id: e.id.clone(),
                });
            }
            if e.heading.is_none() {
                return Err(SceneError::AgentWithoutHeading {
                    field: format!("{field}.heading"),
                    kind: e.kind,
                    id: e.id.clone(),
                });
            }
            *slot = Some(i);
        }
        let speaker = speaker.ok_or(SceneError::MissingAgent(EntityKind::Speaker))?;
        let listener = listener.ok_or(SceneError::MissingAgent(EntityKind::Listener))?;

        for (i, a) in entities.iter().enumerate() {
            for b in &entities[i + 1..] {
                let d = a.pos.distance(b.pos);
                if d < MIN_SEPARATION {
                    return Err(SceneError::CentroidCollision {
                        a: a.id.clone(),
                        b: b.id.clone(),
                        distance: d,
                    });
                }
            }
        }

        Ok(Self {
            entities,
            north,
            table,
            speaker,
            listener,
        })
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn entity(&self, idx: usize) -> &Entity {
        &self.entities[idx]
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.id == id)
    }

    pub fn north(&self) -> Vec2 {
        self.north
    }

    pub fn table(&self) -> Extent {
        self.table
    }

    pub fn speaker(&self) -> usize {
        self.speaker
    }

    pub fn listener(&self) -> usize {
        self.listener
    }

    pub fn landmark_type_of(&self, idx: usize) -> LandmarkType {
        landmark_type(&self.entities[idx])
    }

    /// Indices of entities that may be referred to as targets.
    pub fn referable(&self) -> impl Iterator<Item = usize> + '_ {
        self.entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.referable_as_target())
            .map(|(i, _)| i)
    }

    pub fn to_document(&self) -> SceneDocument {
        SceneDocument {
            north: self.north,
            table: self.table,
            entities: self.entities.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scene serializes")
    }
}

/// Parses and validates a scene document.
pub fn load_scene<R: Read>(source: R) -> Result<Scene, SceneError> {
    let doc: SceneDocument = serde_json::from_reader(source)?;
    Scene::from_document(doc)
}

pub fn load_scene_str(text: &str) -> Result<Scene, SceneError> {
    load_scene(text.as_bytes())
}
