//! Seeded random tabletop scenes.

use super::HarnessError;
use crate::geometry::Vec2;
use crate::scene::{Entity, EntityKind, Extent, Scene};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// An object that every sampled scene must contain. Unset attributes are
/// drawn from the pools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTemplate {
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    /// Inclusive bounds on the number of objects.
    pub object_count: (usize, usize),
    pub categories: Vec<String>,
    pub colors: Vec<String>,
    pub shapes: Vec<String>,
    /// Categories whose members get a random heading.
    pub oriented_categories: Vec<String>,
    /// Chance of copying one object's look onto another; a second pair is
    /// forced with the square of this.
    pub duplicate_probability: f64,
    pub required: Vec<ObjectTemplate>,
    /// Objects are placed uniformly in `[-half_width, half_width]²`.
    pub half_width: f64,
    pub min_separation: f64,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        let words = |w: &[&str]| w.iter().map(|s| s.to_string()).collect();
        Self {
            object_count: (3, 8),
            categories: words(&["block", "cup", "ball", "car"]),
            colors: words(&["red", "green", "blue", "yellow"]),
            shapes: words(&["round", "square", "triangle"]),
            oriented_categories: words(&["car"]),
            duplicate_probability: 0.75,
            required: Vec::new(),
            half_width: 0.6,
            min_separation: 0.05,
            max_attempts: 1000,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let (lo, hi) = self.object_count;
        let bad = |reason: &str| Err(HarnessError::InvalidSpec(reason.to_string()));
        if self.categories.is_empty() || self.colors.is_empty() || self.shapes.is_empty() {
            return bad("attribute pools must be non-empty");
        }
        if lo == 0 || lo > hi {
            return bad("object_count must be a non-empty range of positive counts");
        }
        if self.required.len() > hi {
            return bad("more required objects than the object_count maximum");
        }
        if !(0.0..=1.0).contains(&self.duplicate_probability) {
            return bad("duplicate_probability must lie in [0, 1]");
        }
        if !(self.half_width > 0.0 && self.half_width < 0.9) {
            return bad("half_width must lie in (0, 0.9)");
        }
        if self.min_separation.partial_cmp(&crate::scene::MIN_SEPARATION) != Some(std::cmp::Ordering::Greater) {
            return bad("min_separation is below the scene minimum");
        }
        Ok(())
    }
}

struct Look {
    category: String,
    color: String,
    shape: String,
}

fn pick(rng: &mut ChaCha8Rng, pool: &[String]) -> String {
    pool.choose(rng).expect("validated non-empty").clone()
}

/// Samples a scene with the speaker at the south edge facing north and the
/// listener opposite, facing south.
pub fn sample_scene(seed: u64, spec: &SceneSpec) -> Result<Scene, HarnessError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.object_count;
    let n = rng.gen_range(lo.max(spec.required.len())..=hi);

    let mut looks: Vec<Look> = spec
        .required
        .iter()
        .map(|t| Look {
            category: t.category.clone(),
            color: t.color.clone().unwrap_or_else(|| pick(&mut rng, &spec.colors)),
            shape: t.shape.clone().unwrap_or_else(|| pick(&mut rng, &spec.shapes)),
        })
        .collect();
    while looks.len() < n {
        looks.push(Look {
            category: pick(&mut rng, &spec.categories),
            color: pick(&mut rng, &spec.colors),
            shape: pick(&mut rng, &spec.shapes),
        });
    }
    let free = spec.required.len();
    let copy = |rng: &mut ChaCha8Rng, looks: &mut Vec<Look>, p: f64| {
        if n - free >= 1 && n >= 2 && rng.gen_bool(p) {
            let dst = rng.gen_range(free..n);
            let src = (dst + rng.gen_range(1..n)) % n;
            looks[dst] = Look {
                category: looks[src].category.clone(),
                color: looks[src].color.clone(),
                shape: looks[src].shape.clone(),
            };
        }
    };
    copy(&mut rng, &mut looks, spec.duplicate_probability);
    copy(
        &mut rng,
        &mut looks,
        spec.duplicate_probability * spec.duplicate_probability,
    );

    let speaker_pos = Vec2::new(0.0, -0.9);
    let listener_pos = Vec2::new(0.0, 0.9);
    let mut placed: Vec<Vec2> = vec![speaker_pos, listener_pos];
    let mut entities = Vec::with_capacity(n + 2);
    for (i, look) in looks.into_iter().enumerate() {
        let pos = (0..spec.max_attempts)
            .map(|_| {
                Vec2::new(
                    rng.gen_range(-spec.half_width..spec.half_width),
                    rng.gen_range(-spec.half_width..spec.half_width),
                )
            })
            .find(|p| placed.iter().all(|q| p.distance(*q) >= spec.min_separation))
            .ok_or(HarnessError::Placement {
                seed,
                attempts: spec.max_attempts,
            })?;
        placed.push(pos);
        let mut e = Entity::object(&format!("o{i}"), &look.category, pos)
            .with_color(&look.color)
            .with_shape(&look.shape);
        if spec.oriented_categories.contains(&look.category) {
            e = e.with_heading(rng.gen_range(-PI..PI));
        }
        entities.push(e);
    }
    entities.push(Entity::agent("speaker", EntityKind::Speaker, speaker_pos, FRAC_PI_2));
    entities.push(Entity::agent(
        "listener",
        EntityKind::Listener,
        listener_pos,
        -FRAC_PI_2,
    ));
    let table = Extent {
        min: Vec2::new(-1.0, -1.0),
        max: Vec2::new(1.0, 1.0),
    };
    Ok(Scene::new(entities, Vec2::new(0.0, 1.0), table)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::LandmarkType;

    #[test]
    fn deterministic_and_bounded() {
        let spec = SceneSpec::default();
        for seed in 0..50 {
            let a = sample_scene(seed, &spec).unwrap();
            assert_eq!(a.to_json(), sample_scene(seed, &spec).unwrap().to_json());
            let objects = a.referable().count();
            assert!((3..=8).contains(&objects), "{objects}");
            assert_eq!(a.len(), objects + 2);
        }
    }

    #[test]
    fn duplicates_are_common() {
        let spec = SceneSpec::default();
        let with_dup = (0..200)
            .filter(|&seed| {
                let s = sample_scene(seed, &spec).unwrap();
                let looks: Vec<_> = s
                    .referable()
                    .map(|i| {
                        let e = s.entity(i);
                        (e.category.clone(), e.color.clone(), e.shape.clone())
                    })
                    .collect();
                (0..looks.len()).any(|i| looks[i + 1..].contains(&looks[i]))
            })
            .count();
        assert!(with_dup >= 100, "{with_dup}");
    }

    #[test]
    fn required_objects_give_twin_block_layouts() {
        let yellow_block = ObjectTemplate {
            category: "block".into(),
            color: Some("yellow".into()),
            shape: Some("cuboid".into()),
        };
        let spec = SceneSpec {
            object_count: (3, 3),
            required: vec![
                yellow_block.clone(),
                yellow_block,
                ObjectTemplate {
                    category: "car".into(),
                    color: Some("red".into()),
                    shape: None,
                },
            ],
            duplicate_probability: 0.0,
            ..SceneSpec::default()
        };
        let s = sample_scene(3, &spec).unwrap();
        assert_eq!(s.entity(0).color.as_deref(), Some("yellow"));
        assert_eq!(s.entity(1).color.as_deref(), Some("yellow"));
        assert_eq!(s.landmark_type_of(2), LandmarkType::OrientedObject);
    }

    #[test]
    fn invalid_specs_and_crowding() {
        let spec = SceneSpec {
            colors: vec![],
            ..SceneSpec::default()
        };
        assert!(matches!(sample_scene(0, &spec), Err(HarnessError::InvalidSpec(_))));
        let crowded = SceneSpec {
            object_count: (8, 8),
            half_width: 0.05,
            min_separation: 0.09,
            max_attempts: 20,
            ..SceneSpec::default()
        };
        assert!(matches!(sample_scene(0, &crowded), Err(HarnessError::Placement { .. })));
    }
}
