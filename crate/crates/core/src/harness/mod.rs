//! Seeded evaluation: random scenes, simulated listeners, the brute-force
//! oracle, and per-method accuracy reports.

mod listener;
mod oracle;
mod scenes;

pub use listener::{
    frame_distribution, listener_expectation, simulate_listener, ListenerConfig, ListenerModel, ListenerOutcome,
};
pub use oracle::{oracle_denote, ORACLE_MAX_DEPTH, ORACLE_MAX_ENTITIES};
pub use scenes::{sample_scene, ObjectTemplate, SceneSpec};

use crate::frames::{FrameError, FrameKind, PreferenceDocument, PreferenceTable};
use crate::generator::{build_landmark_chain, describe_visual, expression_space, GeneratorConfig};
use crate::optimizer::{choose, Method};
use crate::resolver::denote;
use crate::scene::{Scene, SceneError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("could not place all objects for seed {seed} within {attempts} attempts")]
    Placement { seed: u64, attempts: usize },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("oracle limited to depth {ORACLE_MAX_DEPTH} and {ORACLE_MAX_ENTITIES} entities (got depth {depth}, {entities} entities)")]
    OracleTooLarge { depth: usize, entities: usize },
    #[error("invalid trial config: {0}")]
    InvalidConfig(String),
    #[error("invalid {field}: {source}")]
    Preferences {
        field: &'static str,
        #[source]
        source: FrameError,
    },
}

/// Mixes `parts` into one 64-bit seed (splitmix64 finalizer per part).
pub fn stream_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x9e37_79b9_7f4a_7c15u64, |acc, &p| {
        let mut z = acc ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(acc << 6);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}

const SCENE_STREAM: u64 = 1;
const METHOD_STREAM: u64 = 2;
const TRIAL_STREAM: u64 = 3;

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub trials_per_expression: usize,
    /// Per-method trial counts replacing `trials_per_expression`.
    pub trials_override: BTreeMap<Method, usize>,
    /// Preferences the simulated listeners actually hold.
    pub true_prefs: PreferenceTable,
    /// Preferences the generator assumes.
    pub assumed_prefs: PreferenceTable,
    pub methods: Vec<Method>,
    pub listener: ListenerConfig,
    pub scene: SceneSpec,
    pub generator: GeneratorConfig,
    /// Keep one record per trial for CSV export.
    pub record_trials: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_scenes: 100,
            trials_per_expression: 20,
            trials_override: BTreeMap::new(),
            true_prefs: PreferenceTable::default(),
            assumed_prefs: PreferenceTable::default(),
            methods: Method::ALL.to_vec(),
            listener: ListenerConfig::default(),
            scene: SceneSpec::default(),
            generator: GeneratorConfig::default(),
            record_trials: false,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.n_scenes == 0 || self.trials_per_expression == 0 || self.trials_override.values().any(|&n| n == 0) {
            return bad("scene and trial counts must be positive");
        }
        if self.methods.is_empty() {
            return bad("methods must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.listener.coupling) {
            return bad("coupling must lie in [0, 1]");
        }
        self.scene.validate()
    }

    pub fn trials_for(&self, method: Method) -> usize {
        self.trials_override
            .get(&method)
            .copied()
            .unwrap_or(self.trials_per_expression)
    }
}

/// Config file layout; every field is optional.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfigDocument {
    pub seed: u64,
    pub n_scenes: usize,
    pub trials_per_expression: usize,
    pub trials_override: BTreeMap<Method, usize>,
    pub true_prefs: Option<PreferenceDocument>,
    pub assumed_prefs: Option<PreferenceDocument>,
    pub methods: Vec<Method>,
    pub listener: ListenerConfig,
    pub scene: SceneSpec,
    pub record_trials: bool,
}

impl Default for TrialConfigDocument {
    fn default() -> Self {
        let c = TrialConfig::default();
        Self {
            seed: c.seed,
            n_scenes: c.n_scenes,
            trials_per_expression: c.trials_per_expression,
            trials_override: c.trials_override,
            true_prefs: None,
            assumed_prefs: None,
            methods: c.methods,
            listener: c.listener,
            scene: c.scene,
            record_trials: c.record_trials,
        }
    }
}

impl TryFrom<TrialConfigDocument> for TrialConfig {
    type Error = HarnessError;

    fn try_from(doc: TrialConfigDocument) -> Result<Self, HarnessError> {
        let table = |d: Option<PreferenceDocument>, field| match d {
            None => Ok(PreferenceTable::default()),
            Some(d) => PreferenceTable::try_from(d).map_err(|source| HarnessError::Preferences { field, source }),
        };
        let cfg = TrialConfig {
            seed: doc.seed,
            n_scenes: doc.n_scenes,
            trials_per_expression: doc.trials_per_expression,
            trials_override: doc.trials_override,
            true_prefs: table(doc.true_prefs, "true_prefs")?,
            assumed_prefs: table(doc.assumed_prefs, "assumed_prefs")?,
            methods: doc.methods,
            listener: doc.listener,
            scene: doc.scene,
            generator: GeneratorConfig::default(),
            record_trials: doc.record_trials,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_trial_config(text: &str) -> Result<TrialConfig, HarnessError> {
    let doc: TrialConfigDocument =
        serde_json::from_str(text).map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    doc.try_into()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub scene: usize,
    pub target: String,
    pub method: Method,
    /// Relation units; `None` when generation failed.
    pub k: Option<usize>,
    pub trial: usize,
    pub identified: Option<String>,
    pub correct: bool,
}

/// Accuracy figures for one slice of the trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Tally {
    pub expressions: usize,
    pub trials: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Mean probability the resolver assigns the target under the true preferences.
    pub expected_accuracy: f64,
    /// Mean exact hit rate of the simulated listener.
    pub listener_expectation: f64,
}

impl Tally {
    fn add(&mut self, trials: usize, correct: usize, expected: f64, listener: f64) {
        self.expressions += 1;
        self.trials += trials;
        self.correct += correct;
        self.expected_accuracy += expected;
        self.listener_expectation += listener;
    }

    fn finish(&mut self) {
        self.accuracy = ratio(self.correct as f64, self.trials);
        self.expected_accuracy = ratio(self.expected_accuracy, self.expressions);
        self.listener_expectation = ratio(self.listener_expectation, self.expressions);
    }
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: Method,
    #[serde(flatten)]
    pub overall: Tally,
    /// Chains with one relation unit.
    pub k1: Tally,
    /// Chains with more than one.
    pub k_more: Tally,
    /// Targets with no chain; every trial counts as incorrect.
    pub failed: Tally,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub n_scenes: usize,
    pub trials_per_expression: usize,
    pub listener: ListenerConfig,
    /// Targets whose own description was ambiguous.
    pub targets: usize,
    pub methods: Vec<MethodReport>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

struct Outcome {
    method_index: usize,
    k: Option<usize>,
    trials: usize,
    correct: usize,
    expected: f64,
    listener: f64,
}

struct SceneResult {
    targets: usize,
    outcomes: Vec<Outcome>,
    records: Vec<TrialRecord>,
}

/// The `index`-th scene of a comparison run.
pub fn comparison_scene(cfg: &TrialConfig, index: usize) -> Result<Scene, HarnessError> {
    sample_scene(stream_seed(&[cfg.seed, SCENE_STREAM, index as u64]), &cfg.scene)
}

fn run_scene(cfg: &TrialConfig, index: usize) -> Result<SceneResult, HarnessError> {
    let scene = comparison_scene(cfg, index)?;
    let everyone: Vec<usize> = (0..scene.len()).collect();
    let mut result = SceneResult {
        targets: 0,
        outcomes: Vec::new(),
        records: Vec::new(),
    };
    for target in scene.referable().collect::<Vec<_>>() {
        if describe_visual(target, &everyone, &scene).distinguishing {
            continue;
        }
        result.targets += 1;
        let chain = build_landmark_chain(target, &scene, &cfg.assumed_prefs, &cfg.generator);
        let space = chain
            .as_ref()
            .ok()
            .map(|c| expression_space(c, &scene, &FrameKind::ALL));
        for (method_index, &method) in cfg.methods.iter().enumerate() {
            let trials = cfg.trials_for(method);
            let Ok(chain) = &chain else {
                record_failure(cfg, &scene, index, target, method, trials, &mut result);
                result.outcomes.push(Outcome {
                    method_index,
                    k: None,
                    trials,
                    correct: 0,
                    expected: 0.0,
                    listener: 0.0,
                });
                continue;
            };
            let method_seed = stream_seed(&[cfg.seed, METHOD_STREAM, index as u64, target as u64]);
            let space = space.as_deref().expect("present with the chain");
            let selected = choose(method, chain, space, &scene, &cfg.assumed_prefs, method_seed);
            let expected = denote(&selected.tree, &scene, &cfg.true_prefs).prob(target);
            let listener = listener_expectation(&selected.tree, &scene, &cfg.true_prefs, target, &cfg.listener);
            let mut correct = 0;
            for trial in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(&[
                    cfg.seed,
                    TRIAL_STREAM,
                    index as u64,
                    target as u64,
                    trial as u64,
                ]));
                let out = simulate_listener(&selected.tree, &scene, &cfg.true_prefs, &mut rng, &cfg.listener);
                let hit = out.is(target);
                correct += hit as usize;
                if cfg.record_trials {
                    result.records.push(TrialRecord {
                        scene: index,
                        target: scene.entity(target).id.clone(),
                        method,
                        k: Some(chain.k()),
                        trial,
                        identified: match out {
                            ListenerOutcome::Identified(e) => Some(scene.entity(e).id.clone()),
                            ListenerOutcome::Confused => None,
                        },
                        correct: hit,
                    });
                }
            }
            result.outcomes.push(Outcome {
                method_index,
                k: Some(chain.k()),
                trials,
                correct,
                expected,
                listener,
            });
        }
    }
    Ok(result)
}

fn record_failure(
    cfg: &TrialConfig,
    scene: &Scene,
    index: usize,
    target: usize,
    method: Method,
    trials: usize,
    result: &mut SceneResult,
) {
    if cfg.record_trials {
        result.records.extend((0..trials).map(|trial| TrialRecord {
            scene: index,
            target: scene.entity(target).id.clone(),
            method,
            k: None,
            trial,
            identified: None,
            correct: false,
        }));
    }
}

/// Runs every method on the same scenes and listener randomness.
pub fn run_comparison(cfg: &TrialConfig) -> Result<TrialReport, HarnessError> {
    cfg.validate()?;
    let per_scene: Vec<SceneResult> = (0..cfg.n_scenes)
        .into_par_iter()
        .map(|i| run_scene(cfg, i))
        .collect::<Result<_, _>>()?;

    let mut methods: Vec<MethodReport> = cfg
        .methods
        .iter()
        .map(|&method| MethodReport {
            method,
            overall: Tally::default(),
            k1: Tally::default(),
            k_more: Tally::default(),
            failed: Tally::default(),
        })
        .collect();
    let mut targets = 0;
    let mut records = Vec::new();
    for scene in per_scene {
        targets += scene.targets;
        records.extend(scene.records);
        for o in scene.outcomes {
            let m = &mut methods[o.method_index];
            m.overall.add(o.trials, o.correct, o.expected, o.listener);
            let bucket = match o.k {
                None => &mut m.failed,
                Some(k) if k <= 1 => &mut m.k1,
                Some(_) => &mut m.k_more,
            };
            bucket.add(o.trials, o.correct, o.expected, o.listener);
        }
    }
    for m in &mut methods {
        for t in [&mut m.overall, &mut m.k1, &mut m.k_more, &mut m.failed] {
            t.finish();
        }
    }
    log::info!("evaluated {targets} ambiguous targets over {} scenes", cfg.n_scenes);
    Ok(TrialReport {
        seed: cfg.seed,
        n_scenes: cfg.n_scenes,
        trials_per_expression: cfg.trials_per_expression,
        listener: cfg.listener,
        targets,
        methods,
        records,
    })
}

impl TrialReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table, one row per method and complexity slice.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:<7} {:>6} {:>8} {:>8} {:>9} {:>9}",
            "method", "slice", "exprs", "trials", "accuracy", "expected", "listener"
        );
        for m in &self.methods {
            for (slice, t) in [
                ("all", &m.overall),
                ("k=1", &m.k1),
                ("k>1", &m.k_more),
                ("failed", &m.failed),
            ] {
                let _ = writeln!(
                    out,
                    "{:<8} {:<7} {:>6} {:>8} {:>8.4} {:>9.4} {:>9.4}",
                    m.method.name(),
                    slice,
                    t.expressions,
                    t.trials,
                    t.accuracy,
                    t.expected_accuracy,
                    t.listener_expectation
                );
            }
        }
        out
    }

    /// Per-trial records; empty unless the run kept them.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,target,method,k,trial,identified,correct\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.scene,
                r.target,
                r.method,
                r.k.map_or(String::new(), |k| k.to_string()),
                r.trial,
                r.identified.as_deref().unwrap_or(""),
                r.correct
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: Vec<Method>) -> TrialConfig {
        TrialConfig {
            n_scenes: 12,
            trials_per_expression: 5,
            methods,
            ..TrialConfig::default()
        }
    }

    #[test]
    fn reports_are_reproducible_and_consistent() {
        let cfg = TrialConfig {
            record_trials: true,
            ..small(Method::ALL.to_vec())
        };
        let a = run_comparison(&cfg).unwrap();
        let b = run_comparison(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
        for m in &a.methods {
            assert!((0.0..=1.0).contains(&m.overall.accuracy));
            assert_eq!(m.k1.trials + m.k_more.trials + m.failed.trials, m.overall.trials);
            assert_eq!(m.overall.expressions, a.targets);
        }
        assert_eq!(
            a.records.len(),
            a.methods.iter().map(|m| m.overall.trials).sum::<usize>()
        );
    }

    #[test]
    fn trial_counts_are_isolated_per_method() {
        let base = small(vec![Method::Pcsreg, Method::Robot]);
        let mut more = base.clone();
        more.trials_override.insert(Method::Robot, 9);
        let a = run_comparison(&base).unwrap();
        let b = run_comparison(&more).unwrap();
        assert_eq!(a.method(Method::Pcsreg), b.method(Method::Pcsreg));
        assert_ne!(
            a.method(Method::Robot).unwrap().overall.trials,
            b.method(Method::Robot).unwrap().overall.trials
        );
    }

    #[test]
    fn egocentric_listeners_follow_the_robot_when_landmarks_are_unique() {
        use crate::optimizer::{select_baseline, Baseline};
        use crate::resolver::consistent_set;
        let ego = PreferenceTable::uniform_rows([1.0, 0.0, 0.0, 0.0]).unwrap();
        let spec = SceneSpec::default();
        let mut checked = 0;
        for seed in 0..10 {
            let scene = sample_scene(seed, &spec).unwrap();
            let everyone: Vec<usize> = (0..scene.len()).collect();
            for t in scene.referable().collect::<Vec<_>>() {
                if describe_visual(t, &everyone, &scene).distinguishing {
                    continue;
                }
                let Ok(chain) = build_landmark_chain(t, &scene, &ego, &GeneratorConfig::default()) else {
                    continue;
                };
                // Landmark phrases are only guaranteed unique within the
                // shrunken domain; the claim needs them unique scene-wide.
                if chain
                    .stack
                    .iter()
                    .any(|(_, d)| consistent_set(&d.attrs, &scene).len() != 1)
                {
                    continue;
                }
                let robot = select_baseline(Baseline::Robot, &chain, &scene, 0);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..5 {
                    assert!(
                        simulate_listener(&robot.tree, &scene, &ego, &mut rng, &ListenerConfig::default()).is(t),
                        "{}",
                        robot.surface
                    );
                }
                checked += 1;
            }
        }
        assert!(checked >= 10, "{checked}");
    }

    #[test]
    fn config_documents() {
        let cfg = load_trial_config(r#"{"seed": 7, "methods": ["robot", "pcsreg"]}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.methods, vec![Method::Robot, Method::Pcsreg]);
        assert!(matches!(
            load_trial_config(r#"{"methods": []}"#),
            Err(HarnessError::InvalidConfig(_))
        ));
        assert!(matches!(
            load_trial_config(r#"{"n_scenes": 0}"#),
            Err(HarnessError::InvalidConfig(_))
        ));
        assert!(load_trial_config(r#"{"bogus": 1}"#).is_err());
        assert!(matches!(
            load_trial_config(
                r#"{"true_prefs": {"speaker":[1,0,0,0],"listener":[1,0,0,0],"oriented_object":[1,0,0,0],"unoriented_object":[0.5,0,0,0]}}"#
            ),
            Err(HarnessError::Preferences {
                field: "true_prefs",
                ..
            })
        ));
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(&[1, 2]), stream_seed(&[2, 1]));
        assert_ne!(stream_seed(&[0]), stream_seed(&[0, 0]));
    }
}
