//! Scripted scenarios loaded from JSON.

use std::path::Path;

use notebridge_core::{export_txt, NoteDocument, UsageEvent};
use serde::{Deserialize, Serialize};

use crate::action::ClientAction;
use crate::engine::{Participant, ScenarioReport, SimError, Simulation};
use crate::net::NetConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedAction {
    pub at: u64,
    pub session: String,
    #[serde(flatten)]
    pub action: ClientAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub title: String,
    pub sessions: Vec<Participant>,
    /// Network used when the caller does not supply one.
    #[serde(default)]
    pub net: Option<NetConfig>,
    pub actions: Vec<TimedAction>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Outcome of a scripted run, with the artifacts tests compare.
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub document: NoteDocument,
    pub usage: Vec<UsageEvent>,
    pub export: Vec<u8>,
    pub doc_id: String,
}

/// Runs a scenario. Every session joins at t=0 unless the script says
/// otherwise with an explicit `reconnect` at t=0.
pub fn run_scripted(
    scenario: &Scenario,
    net: Option<NetConfig>,
    data_dir: Option<&Path>,
) -> Result<ScenarioRun, SimError> {
    let net = net.or_else(|| scenario.net.clone()).unwrap_or_default();
    let mut sim = Simulation::new(net, &scenario.title, &scenario.sessions, data_dir)?;
    for i in 0..scenario.sessions.len() {
        sim.schedule(0, i, ClientAction::Reconnect);
    }
    for step in &scenario.actions {
        let client = sim
            .client_index(&step.session)
            .ok_or_else(|| SimError::InvalidScenario(format!("unknown session {:?}", step.session)))?;
        sim.schedule(step.at, client, step.action.clone());
    }
    let report = sim.run()?;
    let document = sim.authority_document();
    Ok(ScenarioRun {
        report,
        export: export_txt(&document),
        usage: sim.usage(),
        doc_id: sim.doc_id().to_owned(),
        document,
    })
}
