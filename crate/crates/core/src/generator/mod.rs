//! Content selection: visual descriptions, entropy-ordered landmark
//! selection, and the landmark chain with its preference fixed point.

mod space;

pub use space::{candidate_for, expression_space, realize, CandidateExpression};

use crate::frames::{
    frame_instance, preference_entropy, update_preferences, FrameInstance, FrameKind, PreferenceRow, PreferenceState,
    PreferenceTable,
};
use crate::prepositions::relation;
use crate::resolver::{AttributePhrase, ExpressionTree, Person};
use crate::scene::{EntityKind, LandmarkType, Scene};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::HashMap;
use thiserror::Error;

/// Hard cap on chain length; the strategy search is exponential in it.
pub const K_MAX: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("no entity with id {0:?}")]
    UnknownTarget(String),
    #[error("entity {0:?} cannot be a target")]
    NotReferable(String),
    #[error("cannot generate a distinguishing expression: no landmark separates {entity:?} from its distractors")]
    NoDiscriminatingLandmark {
        /// Entity the failing selection step tried to locate.
        entity: String,
        /// Relation units completed before the failure.
        depth: usize,
        /// Non-distinguishing description of the original target.
        best_effort: Box<ExpressionTree>,
    },
    #[error("landmark chain exceeds {0} relation units")]
    ChainTooLong(usize),
    #[error("frame preferences did not settle after {0} rebuilds")]
    NotConverged(usize),
}

impl GenerationError {
    /// Number of relation units the failed chain would have had at least.
    pub fn depth_hint(&self) -> usize {
        match self {
            GenerationError::NoDiscriminatingLandmark { depth, .. } => depth + 1,
            GenerationError::ChainTooLong(k) => *k + 1,
            _ => 1,
        }
    }
}

/// Attributes chosen for one entity, and whether they single it out within
/// the domain they were chosen against.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualDescription {
    pub attrs: AttributePhrase,
    pub distinguishing: bool,
}

fn normalize_word(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn matching<'a>(attrs: &'a AttributePhrase, domain: &'a [usize], scene: &'a Scene) -> impl Iterator<Item = usize> + 'a {
    domain.iter().copied().filter(move |&o| attrs.matches(scene, o))
}

/// Incremental attribute selection in the order category, color, shape.
/// Category is always kept; each further attribute is added while some
/// distractor in `domain` still fits the description.
pub fn describe_visual(target: usize, domain: &[usize], scene: &Scene) -> VisualDescription {
    let e = scene.entity(target);
    let person = match e.kind {
        EntityKind::Speaker => Some(Person::Speaker),
        EntityKind::Listener => Some(Person::Listener),
        EntityKind::Object => None,
    };
    if let Some(p) = person {
        return VisualDescription {
            attrs: AttributePhrase::person(p),
            distinguishing: true,
        };
    }

    let has_distractor = |attrs: &AttributePhrase| matching(attrs, domain, scene).any(|o| o != target);
    let mut attrs = AttributePhrase::category(&normalize_word(&e.category));
    if has_distractor(&attrs) {
        if let Some(c) = &e.color {
            attrs.color = Some(normalize_word(c));
        }
    }
    if has_distractor(&attrs) {
        if let Some(s) = &e.shape {
            attrs.shape = Some(normalize_word(s));
        }
    }
    let distinguishing = matching(&attrs, domain, scene).filter(|&o| o != target).count() == 0;
    VisualDescription { attrs, distinguishing }
}

/// Frame preferences used to rank candidate landmarks: the table row for the
/// entity's landmark type unless an updated row has been recorded for it.
#[derive(Clone, Debug)]
pub struct LandmarkPriorities<'a> {
    base: &'a PreferenceTable,
    overrides: HashMap<usize, PreferenceRow>,
}

impl<'a> LandmarkPriorities<'a> {
    pub fn new(base: &'a PreferenceTable) -> Self {
        Self {
            base,
            overrides: HashMap::new(),
        }
    }

    pub fn row(&self, scene: &Scene, entity: usize) -> PreferenceRow {
        self.overrides
            .get(&entity)
            .copied()
            .unwrap_or_else(|| *self.base.row(scene.landmark_type_of(entity)))
    }

    pub fn set(&mut self, entity: usize, row: PreferenceRow) {
        self.overrides.insert(entity, row);
    }
}

/// Result of one landmark-selection step.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionStep {
    pub description: VisualDescription,
    pub landmark: Option<usize>,
}

/// Candidate landmarks for `target` in priority order: ascending preference
/// entropy, then distance to the target, then id.
pub fn rank_candidates(
    target: usize,
    description: &AttributePhrase,
    domain: &[usize],
    scene: &Scene,
    priorities: &LandmarkPriorities,
) -> Vec<usize> {
    let t = scene.entity(target).pos;
    let mut keyed: Vec<(f64, f64, usize)> = domain
        .iter()
        .copied()
        .filter(|&o| !description.matches(scene, o))
        .map(|o| {
            let h = preference_entropy(&priorities.row(scene, o)).expect("preference rows are normalized");
            (h, scene.entity(o).pos.distance(t), o)
        })
        .collect();
    keyed.sort_by(|a, b| {
        let by_entropy = if (a.0 - b.0).abs() <= 1e-12 {
            Ordering::Equal
        } else {
            a.0.total_cmp(&b.0)
        };
        by_entropy
            .then(a.1.total_cmp(&b.1))
            .then_with(|| scene.entity(a.2).id.cmp(&scene.entity(b.2).id))
    });
    keyed.into_iter().map(|(_, _, o)| o).collect()
}

/// Whether `landmark` separates `target` from every distractor under `frame`.
pub fn discriminates(
    target: usize,
    landmark: usize,
    distractors: &[usize],
    scene: &Scene,
    frame: &FrameInstance,
) -> bool {
    let lm = scene.entity(landmark).pos;
    let r = relation(scene.entity(target).pos, lm, frame).expect("scene centroids are separated");
    distractors
        .iter()
        .all(|&d| relation(scene.entity(d).pos, lm, frame).expect("scene centroids are separated") != r)
}

/// One landmark-selection step: describe `target` visually and, if that is
/// not enough, find the highest-priority landmark whose relation to the
/// target differs from its relation to every distractor.
pub fn m_lia(
    target: usize,
    domain: &[usize],
    scene: &Scene,
    priorities: &LandmarkPriorities,
    default_frame: &FrameInstance,
) -> Option<SelectionStep> {
    let description = describe_visual(target, domain, scene);
    if description.distinguishing {
        return Some(SelectionStep {
            description,
            landmark: None,
        });
    }
    let distractors: Vec<usize> = matching(&description.attrs, domain, scene)
        .filter(|&o| o != target)
        .collect();
    let landmark = rank_candidates(target, &description.attrs, domain, scene, priorities)
        .into_iter()
        .find(|&q| discriminates(target, q, &distractors, scene, default_frame))?;
    Some(SelectionStep {
        description,
        landmark: Some(landmark),
    })
}

/// Selected landmarks with their descriptions, in selection order. The last
/// entry is the one whose description is distinguishing on its own.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LandmarkStack {
    entries: Vec<(usize, VisualDescription)>,
}

impl LandmarkStack {
    pub fn push(&mut self, entity: usize, description: VisualDescription) {
        debug_assert!(!self.contains(entity), "landmark selected twice");
        self.entries.push((entity, description));
    }

    pub fn pop(&mut self) -> Option<(usize, VisualDescription)> {
        self.entries.pop()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, entity: usize) -> bool {
        self.entries.iter().any(|(e, _)| *e == entity)
    }

    /// Entries bottom (first pushed) to top.
    pub fn iter(&self) -> impl Iterator<Item = &(usize, VisualDescription)> {
        self.entries.iter()
    }
}

/// Which frame landmark selection runs under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefaultFrame {
    Fixed(FrameKind),
    /// Uniform over egocentric, addressee-centered, and extrinsic.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub default_frame: DefaultFrame,
    /// Extra counterclockwise quarter turns applied to the default frame.
    pub quarter_turns: u8,
    pub k_max: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            default_frame: DefaultFrame::Fixed(FrameKind::Egocentric),
            quarter_turns: 0,
            k_max: K_MAX,
        }
    }
}

impl GeneratorConfig {
    pub fn default_frame(&self, scene: &Scene) -> FrameInstance {
        let kind = match self.default_frame {
            DefaultFrame::Fixed(FrameKind::Intrinsic) | DefaultFrame::Fixed(FrameKind::Egocentric) => {
                FrameKind::Egocentric
            }
            DefaultFrame::Fixed(kind) => kind,
            DefaultFrame::Seeded(seed) => *[
                FrameKind::Egocentric,
                FrameKind::AddresseeCentered,
                FrameKind::Extrinsic,
            ]
            .choose(&mut ChaCha8Rng::seed_from_u64(seed))
            .expect("non-empty"),
        };
        frame_instance(kind, scene, None)
            .expect("relative and extrinsic frames always exist")
            .rotated_quarters(self.quarter_turns)
    }
}

/// The landmark chain for one target after the preference update has settled.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkChain {
    pub target: usize,
    /// The target's own description.
    pub target_description: VisualDescription,
    pub stack: LandmarkStack,
    /// Per-unit frame preferences at the fixed point.
    pub preferences: PreferenceState,
    /// Number of times the chain was built before preferences stopped changing.
    pub outer_iterations: usize,
    pub default_frame: FrameInstance,
}

impl LandmarkChain {
    /// Number of spatial relation units.
    pub fn k(&self) -> usize {
        self.stack.len()
    }

    pub fn landmarks(&self) -> Vec<usize> {
        self.stack.iter().map(|(e, _)| *e).collect()
    }

    pub fn landmark_types(&self, scene: &Scene) -> Vec<LandmarkType> {
        self.stack.iter().map(|(e, _)| scene.landmark_type_of(*e)).collect()
    }

    /// The entity located by relation unit `unit`.
    pub fn unit_target(&self, unit: usize) -> usize {
        if unit == 0 {
            self.target
        } else {
            self.landmarks()[unit - 1]
        }
    }

    /// Descriptions from the target outwards, one per chain entity.
    pub fn descriptions(&self) -> Vec<&VisualDescription> {
        std::iter::once(&self.target_description)
            .chain(self.stack.iter().map(|(_, d)| d))
            .collect()
    }
}

fn build_once(
    target: usize,
    scene: &Scene,
    priorities: &LandmarkPriorities,
    frame: &FrameInstance,
    k_max: usize,
) -> Result<(VisualDescription, LandmarkStack), GenerationError> {
    let mut domain: Vec<usize> = (0..scene.len()).collect();
    let mut current = target;
    let mut target_description = None;
    let mut stack = LandmarkStack::default();
    loop {
        let step = m_lia(current, &domain, scene, priorities, frame).ok_or_else(|| {
            let best_effort = describe_visual(target, &(0..scene.len()).collect::<Vec<_>>(), scene);
            GenerationError::NoDiscriminatingLandmark {
                entity: scene.entity(current).id.clone(),
                depth: stack.len(),
                best_effort: Box::new(ExpressionTree::Leaf(best_effort.attrs)),
            }
        })?;
        let size_before = domain.len();
        domain.retain(|&o| !step.description.attrs.matches(scene, o));
        debug_assert!(domain.len() < size_before, "the described entity leaves the domain");

        if current == target {
            target_description = Some(step.description);
        } else {
            stack.push(current, step.description);
        }
        match step.landmark {
            None => break,
            Some(l) => {
                if stack.len() + 1 > k_max {
                    return Err(GenerationError::ChainTooLong(k_max));
                }
                current = l;
            }
        }
    }
    Ok((target_description.expect("first step describes the target"), stack))
}

/// Builds the landmark chain for `target`, rebuilding it with updated frame
/// preferences until they stop changing.
pub fn build_landmark_chain(
    target: usize,
    scene: &Scene,
    base: &PreferenceTable,
    config: &GeneratorConfig,
) -> Result<LandmarkChain, GenerationError> {
    let entity = scene.entity(target);
    if !entity.referable_as_target() {
        return Err(GenerationError::NotReferable(entity.id.clone()));
    }
    let frame = config.default_frame(scene);
    let mut priorities = LandmarkPriorities::new(base);
    let max_rebuilds = scene.len() + 2;
    for outer in 1..=max_rebuilds {
        let (target_description, stack) = build_once(target, scene, &priorities, &frame, config.k_max)?;
        let landmarks: Vec<usize> = stack.iter().map(|(e, _)| *e).collect();
        let types: Vec<LandmarkType> = landmarks.iter().map(|&l| scene.landmark_type_of(l)).collect();
        let state = PreferenceState {
            units: landmarks.iter().map(|&l| priorities.row(scene, l)).collect(),
            iteration: outer - 1,
        };
        let next = update_preferences(&state, &types).expect("one row per landmark");
        if next.units == state.units {
            log::debug!(
                "chain for {} settled after {outer} build(s), k = {}",
                entity.id,
                stack.len()
            );
            return Ok(LandmarkChain {
                target,
                target_description,
                stack,
                preferences: state,
                outer_iterations: outer,
                default_frame: frame,
            });
        }
        for (&l, row) in landmarks.iter().zip(&next.units) {
            priorities.set(l, *row);
        }
    }
    Err(GenerationError::NotConverged(max_rebuilds))
}
