use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Domain {
    #[default]
    Tabletop,
    Chole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDefinition {
    pub name: String,
    /// Maximum number of 10 Hz steps in a rollout.
    pub step_limit: u32,
    #[serde(default)]
    pub rubric: Vec<String>,
    #[serde(default)]
    pub domain: Domain,
}

impl TaskDefinition {
    pub fn new(name: &str, step_limit: u32, domain: Domain, rubric: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            step_limit,
            rubric: rubric.iter().map(|s| (*s).to_owned()).collect(),
            domain,
        }
    }
}

/// Built-in task definitions for the suture-pad and cholecystectomy benchmarks.
pub fn catalog() -> Vec<TaskDefinition> {
    use Domain::*;
    vec![
        TaskDefinition::new(
            "needle_pickup",
            750,
            Tabletop,
            &[
                "needle ends up held between the jaws",
                "no grasp attempt knocks the needle off the pad",
            ],
        ),
        TaskDefinition::new(
            "needle_handover",
            750,
            Tabletop,
            &[
                "needle is transferred from one gripper to the other",
                "needle is never dropped during the transfer",
            ],
        ),
        TaskDefinition::new(
            "needle_throw",
            1000,
            Tabletop,
            &[
                "needle passes through the tissue",
                "needle tip is visible on the exit side",
            ],
        ),
        TaskDefinition::new(
            "knot_tying",
            750,
            Tabletop,
            &[
                "a loop is formed around a gripper",
                "knot is tight when the arms stop moving",
            ],
        ),
        TaskDefinition::new(
            "apply_first_clip",
            500,
            Chole,
            &[
                "clip is left closed on the duct",
                "no other structure is clipped",
            ],
        ),
        TaskDefinition::new(
            "apply_third_clip",
            500,
            Chole,
            &[
                "new clip is left closed on the duct",
                "new clip does not touch the existing clips",
            ],
        ),
        TaskDefinition::new(
            "cut_cystic_duct",
            500,
            Chole,
            &["duct is fully divided", "cut lies between two clips"],
        ),
    ]
}

pub fn lookup(name: &str) -> Option<TaskDefinition> {
    catalog().into_iter().find(|t| t.name == name)
}
