//! Small hand-built scenes used by tests, docs, and the CLI examples.

use crate::geometry::Vec2;
use crate::scene::{Entity, EntityKind, Extent, Scene};
use std::f64::consts::FRAC_PI_2;

fn unit_table() -> Extent {
    Extent {
        min: Vec2::new(-1.0, -1.0),
        max: Vec2::new(1.0, 1.0),
    }
}

fn agents() -> [Entity; 2] {
    [
        Entity::agent("speaker", EntityKind::Speaker, Vec2::new(0.0, -1.0), FRAC_PI_2),
        Entity::agent("listener", EntityKind::Listener, Vec2::new(0.0, 1.0), -FRAC_PI_2),
    ]
}

/// Speaker and listener face each other across a square `C` at the origin,
/// with `A` on the speaker's side, `D` on the listener's side, and `B` to
/// the speaker's right.
pub fn square_scene() -> Scene {
    let [speaker, listener] = agents();
    let entities = vec![
        Entity::object("A", "block", Vec2::new(0.0, -0.5)).with_shape("round"),
        Entity::object("B", "block", Vec2::new(0.5, 0.0)).with_shape("triangle"),
        Entity::object("C", "block", Vec2::new(0.0, 0.0)).with_shape("square"),
        Entity::object("D", "block", Vec2::new(0.0, 0.5)).with_shape("round"),
        speaker,
        listener,
    ];
    Scene::new(entities, Vec2::new(0.0, 1.0), unit_table()).expect("fixture is valid")
}

/// Two identical yellow blocks on either side of a toy car that faces away
/// from the speaker.
pub fn twin_blocks_scene() -> Scene {
    let [speaker, listener] = agents();
    let entities = vec![
        Entity::object("A", "block", Vec2::new(-0.4, 0.0)).with_color("yellow"),
        Entity::object("B", "block", Vec2::new(0.4, 0.0)).with_color("yellow"),
        Entity::object("car", "car", Vec2::new(0.0, 0.0)).with_heading(FRAC_PI_2),
        speaker,
        listener,
    ];
    Scene::new(entities, Vec2::new(0.0, 1.0), unit_table()).expect("fixture is valid")
}
