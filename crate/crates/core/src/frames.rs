//! Reference frames, frame-preference tables, preference entropy, and the
//! content-window preference update.

use crate::geometry::Vec2;
use crate::scene::{LandmarkType, Scene};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Read;
use thiserror::Error;

/// Tolerance for "sums to one" on in-memory distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Tolerance accepted when reading preference files, before renormalizing.
pub const FILE_TOLERANCE: f64 = 1e-6;

/// Frame kinds in canonical order, which doubles as the tie-break order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Egocentric,
    AddresseeCentered,
    Intrinsic,
    Extrinsic,
}

impl FrameKind {
    pub const ALL: [FrameKind; 4] = [
        FrameKind::Egocentric,
        FrameKind::AddresseeCentered,
        FrameKind::Intrinsic,
        FrameKind::Extrinsic,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for FrameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrameKind::Egocentric => "egocentric",
            FrameKind::AddresseeCentered => "addressee",
            FrameKind::Intrinsic => "intrinsic",
            FrameKind::Extrinsic => "extrinsic",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("intrinsic frame needs an origin entity")]
    MissingIntrinsicOrigin,
    #[error("entity {0:?} is not an oriented object and cannot anchor an intrinsic frame")]
    UnorientedIntrinsicOrigin(String),
    #[error("distribution sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("distribution entry {value} is outside [0, 1]")]
    OutOfRange { value: f64 },
    #[error("preference state has {state} units but the chain has {chain}")]
    LengthMismatch { state: usize, chain: usize },
    #[error("content window {0:?} is not supported; only [0, 1] is implemented")]
    UnsupportedWindow([i64; 2]),
    #[error("preference row {row}: {source}")]
    Row {
        row: LandmarkType,
        #[source]
        source: Box<FrameError>,
    },
    #[error("malformed preference document: {0}")]
    Parse(String),
}

/// A concrete coordinate system: kind, anchoring entity, and "front" axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameInstance {
    pub kind: FrameKind,
    /// Anchoring entity index; `None` for the extrinsic frame.
    pub origin: Option<usize>,
    pub front: Vec2,
}

impl FrameInstance {
    pub fn behind(&self) -> Vec2 {
        -self.front
    }

    /// Viewer's right: clockwise from front, seen from above.
    pub fn right(&self) -> Vec2 {
        self.front.rotate_cw()
    }

    pub fn left(&self) -> Vec2 {
        self.front.rotate_ccw()
    }

    /// The same frame with its axes turned by `quarter_turns` × 90° counterclockwise.
    pub fn rotated_quarters(&self, quarter_turns: u8) -> Self {
        let mut front = self.front;
        for _ in 0..quarter_turns % 4 {
            front = front.rotate_ccw();
        }
        Self { front, ..*self }
    }
}

/// Instantiates a frame of `kind` in `scene`. `intrinsic_origin` is only
/// consulted for [`FrameKind::Intrinsic`].
pub fn frame_instance(
    kind: FrameKind,
    scene: &Scene,
    intrinsic_origin: Option<usize>,
) -> Result<FrameInstance, FrameError> {
    let anchored = |idx: usize| FrameInstance {
        kind,
        origin: Some(idx),
        front: scene.entity(idx).facing().expect("agents are oriented"),
    };
    match kind {
        FrameKind::Egocentric => Ok(anchored(scene.speaker())),
        FrameKind::AddresseeCentered => Ok(anchored(scene.listener())),
        FrameKind::Extrinsic => Ok(FrameInstance {
            kind,
            origin: None,
            front: scene.north(),
        }),
        FrameKind::Intrinsic => {
            let idx = intrinsic_origin.ok_or(FrameError::MissingIntrinsicOrigin)?;
            if scene.landmark_type_of(idx) != LandmarkType::OrientedObject {
                return Err(FrameError::UnorientedIntrinsicOrigin(scene.entity(idx).id.clone()));
            }
            Ok(anchored(idx))
        }
    }
}

/// Frame-preference distribution, ordered as [`FrameKind::ALL`].
pub type PreferenceRow = [f64; 4];

/// Per-landmark-type frame preferences.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceTable {
    rows: [PreferenceRow; 4],
}

impl PreferenceTable {
    /// Builds a table from rows in [`LandmarkType::ALL`] order. Each row must
    /// sum to one within [`FILE_TOLERANCE`]; rows are then renormalized.
    pub fn new(rows: [PreferenceRow; 4]) -> Result<Self, FrameError> {
        let mut out = [[0.0; 4]; 4];
        for (ty, (dst, src)) in LandmarkType::ALL.iter().zip(out.iter_mut().zip(rows)) {
            *dst = normalize_row(src, FILE_TOLERANCE).map_err(|e| FrameError::Row {
                row: *ty,
                source: Box::new(e),
            })?;
        }
        Ok(Self { rows: out })
    }

    /// Every landmark type gets the same row.
    pub fn uniform_rows(row: PreferenceRow) -> Result<Self, FrameError> {
        Self::new([row; 4])
    }

    pub fn row(&self, ty: LandmarkType) -> &PreferenceRow {
        &self.rows[ty.index()]
    }

    pub fn prob(&self, ty: LandmarkType, frame: FrameKind) -> f64 {
        self.rows[ty.index()][frame.index()]
    }

    pub fn rows(&self) -> &[PreferenceRow; 4] {
        &self.rows
    }

    pub fn to_document(&self) -> PreferenceDocument {
        PreferenceDocument {
            speaker: self.rows[0],
            listener: self.rows[1],
            oriented_object: self.rows[2],
            unoriented_object: self.rows[3],
            content_window: None,
        }
    }
}

impl Default for PreferenceTable {
    fn default() -> Self {
        default_preferences()
    }
}

/// Frame-usage rates observed per landmark type in a human–human corpus.
pub fn default_preferences() -> PreferenceTable {
    PreferenceTable::new([
        [1.0, 0.0, 0.0, 0.0],
        [0.0408, 0.9592, 0.0, 0.0],
        [0.045, 0.045, 0.905, 0.005],
        [0.6667, 0.2014, 0.1181, 0.0138],
    ])
    .expect("built-in table is normalized")
}

fn normalize_row(row: PreferenceRow, tolerance: f64) -> Result<PreferenceRow, FrameError> {
    if let Some(&value) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FrameError::OutOfRange { value });
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(FrameError::NotNormalized { sum });
    }
    Ok(row.map(|v| v / sum))
}

/// Preference file layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceDocument {
    pub speaker: PreferenceRow,
    pub listener: PreferenceRow,
    pub oriented_object: PreferenceRow,
    pub unoriented_object: PreferenceRow,
    /// Context window for the preference update. Only `[0, 1]` is accepted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_window: Option<[i64; 2]>,
}

impl TryFrom<PreferenceDocument> for PreferenceTable {
    type Error = FrameError;

    fn try_from(doc: PreferenceDocument) -> Result<Self, FrameError> {
        if let Some(w) = doc.content_window {
            if w != [0, 1] {
                return Err(FrameError::UnsupportedWindow(w));
            }
        }
        PreferenceTable::new([doc.speaker, doc.listener, doc.oriented_object, doc.unoriented_object])
    }
}

pub fn load_preferences<R: Read>(source: R) -> Result<PreferenceTable, FrameError> {
    let doc: PreferenceDocument = serde_json::from_reader(source).map_err(|e| FrameError::Parse(e.to_string()))?;
    doc.try_into()
}

/// Shannon entropy in bits. Zero-probability frames contribute nothing.
pub fn preference_entropy(p: &[f64]) -> Result<f64, FrameError> {
    if let Some(&value) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FrameError::OutOfRange { value });
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(FrameError::NotNormalized { sum });
    }
    Ok(p.iter().filter(|&&v| v > 0.0).map(|&v| v * (1.0 / v).log2()).sum())
}

/// Per-unit frame preferences for the current landmark chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceState {
    pub units: Vec<PreferenceRow>,
    pub iteration: usize,
}

impl PreferenceState {
    /// Initial state: every unit takes the table row for its landmark type.
    pub fn from_chain(chain: &[LandmarkType], base: &PreferenceTable) -> Self {
        Self {
            units: chain.iter().map(|&t| *base.row(t)).collect(),
            iteration: 0,
        }
    }
}

/// One step of the `[0, 1]` content-window update: a unit whose landmark has
/// no orientation takes the current distribution of the next unit to its
/// right. All units are updated from the same snapshot.
pub fn update_preferences(state: &PreferenceState, chain: &[LandmarkType]) -> Result<PreferenceState, FrameError> {
    if state.units.len() != chain.len() {
        return Err(FrameError::LengthMismatch {
            state: state.units.len(),
            chain: chain.len(),
        });
    }
    let units = state
        .units
        .iter()
        .enumerate()
        .map(|(i, row)| match (chain[i], state.units.get(i + 1)) {
            (LandmarkType::UnorientedObject, Some(right)) => *right,
            _ => *row,
        })
        .collect();
    Ok(PreferenceState {
        units,
        iteration: state.iteration + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scene::LandmarkType::*;
    use proptest::prelude::*;

    const SPEAKER: PreferenceRow = [1.0, 0.0, 0.0, 0.0];
    const LISTENER: PreferenceRow = [0.0408, 0.9592, 0.0, 0.0];
    const ORIENTED: PreferenceRow = [0.045, 0.045, 0.905, 0.005];
    const UNORIENTED: PreferenceRow = [0.6667, 0.2014, 0.1181, 0.0138];

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn default_table_rows() {
        let t = default_preferences();
        assert_eq!(t.row(Speaker), &SPEAKER);
        assert!(close(t.row(Listener), &LISTENER, 1e-15));
        assert!(close(t.row(OrientedObject), &ORIENTED, 1e-15));
        assert!(close(t.row(UnorientedObject), &UNORIENTED, 1e-15));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(preference_entropy(&SPEAKER).unwrap(), 0.0);
        assert_eq!(preference_entropy(&[0.25; 4]).unwrap(), 2.0);
        // Hand sum: 0.38995 + 0.46562 + 0.36398 + 0.08527 bits.
        let h = preference_entropy(&UNORIENTED).unwrap();
        assert!((h - 1.30480).abs() < 1e-4, "{h}");
        assert!(matches!(
            preference_entropy(&[0.5, 0.4, 0.0, 0.0]),
            Err(FrameError::NotNormalized { .. })
        ));
    }

    #[test]
    fn frame_instances() {
        let scene = fixtures::square_scene();
        let ego = frame_instance(FrameKind::Egocentric, &scene, None).unwrap();
        assert!(close(&[ego.front.x, ego.front.y], &[0.0, 1.0], 1e-15));
        assert_eq!(ego.origin, Some(scene.speaker()));
        let ext = frame_instance(FrameKind::Extrinsic, &scene, None).unwrap();
        assert_eq!(ext.front, Vec2::new(0.0, 1.0));
        assert_eq!(ext.right(), Vec2::new(1.0, 0.0));
        let cuboid = scene.index_of("C").unwrap();
        assert_eq!(
            frame_instance(FrameKind::Intrinsic, &scene, Some(cuboid)),
            Err(FrameError::UnorientedIntrinsicOrigin("C".into()))
        );
        assert_eq!(
            frame_instance(FrameKind::Intrinsic, &scene, None),
            Err(FrameError::MissingIntrinsicOrigin)
        );
        let car_scene = fixtures::twin_blocks_scene();
        let car = car_scene.index_of("car").unwrap();
        let intr = frame_instance(FrameKind::Intrinsic, &car_scene, Some(car)).unwrap();
        assert_eq!(intr.origin, Some(car));
    }

    #[test]
    fn update_copies_right_neighbor_for_unoriented() {
        let base = default_preferences();
        let chain = [UnorientedObject, OrientedObject];
        let s0 = PreferenceState::from_chain(&chain, &base);
        let s1 = update_preferences(&s0, &chain).unwrap();
        assert_eq!(s1.units[0], *base.row(OrientedObject));
        assert_eq!(s1.units[1], s0.units[1]);
        assert_eq!(s1.iteration, 1);

        let single = [OrientedObject];
        let s0 = PreferenceState::from_chain(&single, &base);
        assert_eq!(update_preferences(&s0, &single).unwrap().units, s0.units);
    }

    #[test]
    fn update_propagates_through_a_three_unit_chain() {
        let base = default_preferences();
        let chain = [UnorientedObject, UnorientedObject, Speaker];
        let s0 = PreferenceState::from_chain(&chain, &base);
        let s1 = update_preferences(&s0, &chain).unwrap();
        assert_eq!(s1.units, vec![*base.row(UnorientedObject), SPEAKER, SPEAKER]);
        let s2 = update_preferences(&s1, &chain).unwrap();
        assert_eq!(s2.units, vec![SPEAKER; 3]);
        let s3 = update_preferences(&s2, &chain).unwrap();
        assert_eq!(s3.units, s2.units);
    }

    #[test]
    fn update_length_mismatch() {
        let base = default_preferences();
        let s0 = PreferenceState::from_chain(&[Speaker], &base);
        assert_eq!(
            update_preferences(&s0, &[Speaker, Listener]),
            Err(FrameError::LengthMismatch { state: 1, chain: 2 })
        );
    }

    #[test]
    fn preference_file_renormalizes_and_checks_window() {
        let text = r#"{"speaker":[1,0,0,0],"listener":[0.0408,0.9592,0,0],
            "oriented_object":[0.045,0.045,0.905,0.005],"unoriented_object":[0.6667,0.2014,0.1181,0.01380001]}"#;
        let t = load_preferences(text.as_bytes()).unwrap();
        let sum: f64 = t.row(UnorientedObject).iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);

        let bad = text.replace("0.01380001", "0.1");
        assert!(matches!(load_preferences(bad.as_bytes()), Err(FrameError::Row { .. })));

        let window = text.replace("]}", r#"], "content_window": [-1, 1]}"#);
        assert_eq!(
            load_preferences(window.as_bytes()),
            Err(FrameError::UnsupportedWindow([-1, 1]))
        );
    }

    fn arb_row() -> impl Strategy<Value = PreferenceRow> {
        prop::array::uniform4(0.0f64..1.0).prop_filter_map("nonzero", |r| {
            let s: f64 = r.iter().sum();
            (s > 1e-6).then(|| r.map(|v| v / s))
        })
    }

    proptest! {
        #[test]
        fn entropy_is_bounded_and_base_invariant(a in arb_row(), b in arb_row()) {
            let (ha, hb) = (preference_entropy(&a).unwrap(), preference_entropy(&b).unwrap());
            prop_assert!((0.0..=2.0 + 1e-12).contains(&ha));
            let nat = |p: &PreferenceRow| -> f64 {
                p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
            };
            if (ha - hb).abs() > 1e-9 {
                prop_assert_eq!(ha < hb, nat(&a) < nat(&b));
            }
        }

        #[test]
        fn update_reaches_fixed_point_within_k_steps(
            types in prop::collection::vec(0usize..4, 1..6)
        ) {
            let chain: Vec<LandmarkType> = types.iter().map(|&i| LandmarkType::ALL[i]).collect();
            let base = default_preferences();
            let mut s = PreferenceState::from_chain(&chain, &base);
            for _ in 0..chain.len() {
                s = update_preferences(&s, &chain).unwrap();
                for row in &s.units {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
            let next = update_preferences(&s, &chain).unwrap();
            prop_assert_eq!(next.units, s.units);
        }

        #[test]
        fn axes_are_quarter_rotations(angle in -10.0f64..10.0) {
            let f = FrameInstance { kind: FrameKind::Extrinsic, origin: None, front: Vec2::from_heading(angle) };
            prop_assert_eq!(f.front.dot(f.right()), 0.0);
            prop_assert_eq!(f.right(), f.front.rotate_cw());
            prop_assert_eq!(f.left(), -f.right());
        }
    }
}
