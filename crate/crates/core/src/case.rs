//! Case file schema (versioned JSON) and validation.
//!
//! The file is a single human-readable document with explicit per-unit
//! bases; unknown keys are rejected. See `docs/case_schema.md` for the field
//! reference and `cases/` for bundled systems.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CaseError;
use crate::network::{BusKind, BusRecord, LineRecord, LineStatus, LoadModel, NetworkData};
use crate::powerflow::GenDispatch;
use crate::problem::DaeProblem;
use crate::machines::GenrouParams;
use crate::solver::{DiscreteChange, Event, EventAction, EventSchedule, GammaPolicy, StepperKind};

pub const SCHEMA_VERSION: u32 = 1;

fn default_v() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: String,
    pub kind: BusKindSpec,
    #[serde(default = "default_v")]
    pub v: f64,
    #[serde(default)]
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKindSpec {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance (half stamped at each terminal).
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub status: LineStatusSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LineStatusSpec {
    #[default]
    In,
    Out,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub id: String,
    pub bus: String,
    pub p: f64,
    #[serde(default)]
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub id: String,
    pub bus: String,
    /// Machine MVA base; impedances and inertia are given on it.
    pub mva: f64,
    /// Active power dispatch on the system base (ignored for slack buses).
    #[serde(default)]
    pub p: f64,
    pub xd: f64,
    pub xq: f64,
    pub xdp: f64,
    pub xqp: f64,
    pub xpp: f64,
    pub xl: f64,
    #[serde(default)]
    pub ra: f64,
    pub td0p: f64,
    pub tq0p: f64,
    pub td0pp: f64,
    pub tq0pp: f64,
    pub h: f64,
    #[serde(default)]
    pub d: f64,
}

impl GeneratorSpec {
    pub fn machine_base_params(&self) -> GenrouParams {
        GenrouParams {
            xd: self.xd,
            xq: self.xq,
            xdp: self.xdp,
            xqp: self.xqp,
            xpp: self.xpp,
            xl: self.xl,
            ra: self.ra,
            td0p: self.td0p,
            tq0p: self.tq0p,
            td0pp: self.td0pp,
            tq0pp: self.tq0pp,
            h: self.h,
            d: self.d,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExciterSpec {
    pub id: String,
    pub gen: String,
    pub ka: f64,
    pub ta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorSpec {
    pub id: String,
    pub gen: String,
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: f64,
    pub action: EventKindSpec,
    pub target: String,
    /// Discrete field name for `set_discrete` (e.g. "tau_ref", "v_ref", "u").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKindSpec {
    LineTrip,
    LineReconnect,
    SetDiscrete,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub tf: f64,
    #[serde(default = "default_stepper")]
    pub stepper: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    /// "h" or a number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
}

fn default_stepper() -> String {
    "trap".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LoadModelSpec {
    #[default]
    Impedance,
    Power,
}

/// The whole ingested case.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemCase {
    pub schema_version: u32,
    pub name: String,
    pub base_mva: f64,
    #[serde(default = "default_base_frequency")]
    pub base_frequency_hz: f64,
    #[serde(default)]
    pub load_model: LoadModelSpec,
    pub buses: Vec<BusSpec>,
    #[serde(default)]
    pub lines: Vec<LineSpec>,
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
    #[serde(default)]
    pub generators: Vec<GeneratorSpec>,
    #[serde(default)]
    pub exciters: Vec<ExciterSpec>,
    #[serde(default)]
    pub governors: Vec<GovernorSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    pub simulation: SimulationSpec,
}

fn default_base_frequency() -> f64 {
    60.0
}

/// Parse and validate a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<SystemCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text)
}

/// Parse and validate case JSON from a string.
pub fn parse_case(text: &str) -> Result<SystemCase, CaseError> {
    let case: SystemCase = serde_json::from_str(text)?;
    case.validate()?;
    Ok(case)
}

impl SystemCase {
    pub fn validate(&self) -> Result<(), CaseError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CaseError::SchemaVersion(self.schema_version));
        }
        if self.base_mva <= 0.0 {
            return Err(CaseError::Invariant(format!(
                "base_mva must be positive, got {}",
                self.base_mva
            )));
        }
        if self.base_frequency_hz <= 0.0 {
            return Err(CaseError::Invariant("base_frequency_hz must be positive".into()));
        }
        if self.simulation.tf <= 0.0 {
            return Err(CaseError::Invariant("simulation.tf must be positive".into()));
        }
        if let Some(h) = self.simulation.h {
            if h <= 0.0 || h > self.simulation.tf {
                return Err(CaseError::Invariant(format!(
                    "simulation.h must lie in (0, tf], got {h}"
                )));
            }
        }
        self.stepper().map_err(CaseError::Invariant)?;
        self.gamma().map_err(CaseError::Invariant)?;

        unique_ids("bus", self.buses.iter().map(|b| b.id.as_str()))?;
        unique_ids("line", self.lines.iter().map(|l| l.id.as_str()))?;
        unique_ids("load", self.loads.iter().map(|l| l.id.as_str()))?;
        unique_ids("generator", self.generators.iter().map(|g| g.id.as_str()))?;
        unique_ids("exciter", self.exciters.iter().map(|e| e.id.as_str()))?;
        unique_ids("governor", self.governors.iter().map(|g| g.id.as_str()))?;

        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKindSpec::Slack)
            .count();
        if !self.buses.is_empty() && slack_count != 1 {
            return Err(CaseError::Invariant(format!(
                "expected exactly one slack bus, found {slack_count}"
            )));
        }
        for b in &self.buses {
            if b.v <= 0.0 {
                return Err(CaseError::Invariant(format!(
                    "bus `{}`: voltage setpoint must be positive",
                    b.id
                )));
            }
        }

        let bus_exists = |id: &str| self.buses.iter().any(|b| b.id == id);
        for l in &self.lines {
            for end in [&l.from, &l.to] {
                if !bus_exists(end) {
                    return Err(CaseError::DanglingReference {
                        element: format!("line `{}`", l.id),
                        reference: end.clone(),
                    });
                }
            }
            if l.from == l.to {
                return Err(CaseError::Invariant(format!(
                    "line `{}` connects a bus to itself",
                    l.id
                )));
            }
            if l.x == 0.0 && l.r == 0.0 {
                return Err(CaseError::Invariant(format!(
                    "line `{}` has zero series impedance",
                    l.id
                )));
            }
        }
        for load in &self.loads {
            if !bus_exists(&load.bus) {
                return Err(CaseError::DanglingReference {
                    element: format!("load `{}`", load.id),
                    reference: load.bus.clone(),
                });
            }
        }
        for gen in &self.generators {
            if !bus_exists(&gen.bus) {
                return Err(CaseError::DanglingReference {
                    element: format!("generator `{}`", gen.id),
                    reference: gen.bus.clone(),
                });
            }
            if gen.mva <= 0.0 {
                return Err(CaseError::Invariant(format!(
                    "generator `{}`: mva must be positive",
                    gen.id
                )));
            }
            gen.machine_base_params()
                .validate()
                .map_err(|m| CaseError::Invariant(format!("generator `{}`: {m}", gen.id)))?;
            let kind = self
                .buses
                .iter()
                .find(|b| b.id == gen.bus)
                .map(|b| b.kind)
                .unwrap();
            if kind == BusKindSpec::Pq {
                return Err(CaseError::Invariant(format!(
                    "generator `{}` sits on PQ bus `{}`",
                    gen.id, gen.bus
                )));
            }
        }
        // PV buses inject power in the flow; the dynamic model needs a
        // machine there to carry that injection.
        for b in &self.buses {
            if b.kind == BusKindSpec::Pv && !self.generators.iter().any(|g| g.bus == b.id) {
                return Err(CaseError::Invariant(format!(
                    "PV bus `{}` has no generator",
                    b.id
                )));
            }
        }
        let gen_exists = |id: &str| self.generators.iter().any(|g| g.id == id);
        let mut excited: HashSet<&str> = HashSet::new();
        for e in &self.exciters {
            if !gen_exists(&e.gen) {
                return Err(CaseError::DanglingReference {
                    element: format!("exciter `{}`", e.id),
                    reference: e.gen.clone(),
                });
            }
            if !excited.insert(e.gen.as_str()) {
                return Err(CaseError::Invariant(format!(
                    "generator `{}` has more than one exciter",
                    e.gen
                )));
            }
        }
        let mut governed: HashSet<&str> = HashSet::new();
        for g in &self.governors {
            if !gen_exists(&g.gen) {
                return Err(CaseError::DanglingReference {
                    element: format!("governor `{}`", g.id),
                    reference: g.gen.clone(),
                });
            }
            if !governed.insert(g.gen.as_str()) {
                return Err(CaseError::Invariant(format!(
                    "generator `{}` has more than one governor",
                    g.gen
                )));
            }
        }

        for (i, ev) in self.events.iter().enumerate() {
            if ev.time < 0.0 || ev.time > self.simulation.tf {
                return Err(CaseError::Invariant(format!(
                    "event #{i} ({:?} `{}`) at t = {} outside [0, {}]",
                    ev.action, ev.target, ev.time, self.simulation.tf
                )));
            }
            match ev.action {
                EventKindSpec::LineTrip | EventKindSpec::LineReconnect => {
                    if !self.lines.iter().any(|l| l.id == ev.target) {
                        return Err(CaseError::DanglingReference {
                            element: format!("event #{i}"),
                            reference: ev.target.clone(),
                        });
                    }
                }
                EventKindSpec::SetDiscrete => {
                    if ev.field.is_none() {
                        return Err(CaseError::Invariant(format!(
                            "event #{i}: set_discrete requires a field"
                        )));
                    }
                    if ev.value.is_none() == ev.delta.is_none() {
                        return Err(CaseError::Invariant(format!(
                            "event #{i}: set_discrete requires exactly one of value/delta"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Buses with aggregated loads plus branch records, in file order.
    pub fn network_data(&self) -> NetworkData {
        let buses = self
            .buses
            .iter()
            .map(|b| {
                let (p_load, q_load) = self
                    .loads
                    .iter()
                    .filter(|l| l.bus == b.id)
                    .fold((0.0, 0.0), |(p, q), l| (p + l.p, q + l.q));
                BusRecord {
                    id: b.id.clone(),
                    kind: match b.kind {
                        BusKindSpec::Slack => BusKind::Slack,
                        BusKindSpec::Pv => BusKind::Pv,
                        BusKindSpec::Pq => BusKind::Pq,
                    },
                    v0: b.v,
                    theta0: b.theta,
                    p_load,
                    q_load,
                }
            })
            .collect::<Vec<_>>();
        let bus_index = |id: &str| buses.iter().position(|b| b.id == id).unwrap();
        let lines = self
            .lines
            .iter()
            .map(|l| LineRecord {
                id: l.id.clone(),
                from: bus_index(&l.from),
                to: bus_index(&l.to),
                r: l.r,
                x: l.x,
                b_shunt: l.b,
                status: match l.status {
                    LineStatusSpec::In => LineStatus::In,
                    LineStatusSpec::Out => LineStatus::Out,
                },
            })
            .collect();
        NetworkData { buses, lines }
    }

    pub fn dispatch(&self) -> Vec<GenDispatch> {
        let net = self.network_data();
        self.generators
            .iter()
            .map(|g| GenDispatch {
                bus: net.bus_index(&g.bus).unwrap(),
                p_set: g.p,
            })
            .collect()
    }

    pub fn load_model_kind(&self) -> LoadModel {
        match self.load_model {
            LoadModelSpec::Impedance => LoadModel::Impedance,
            LoadModelSpec::Power => LoadModel::ConstantPower,
        }
    }

    pub fn event_schedule(&self) -> EventSchedule {
        EventSchedule::new(
            self.events
                .iter()
                .map(|ev| Event {
                    time: ev.time,
                    action: match ev.action {
                        EventKindSpec::LineTrip => EventAction::LineTrip(ev.target.clone()),
                        EventKindSpec::LineReconnect => {
                            EventAction::LineReconnect(ev.target.clone())
                        }
                        EventKindSpec::SetDiscrete => EventAction::SetDiscrete {
                            target: ev.target.clone(),
                            field: ev.field.clone().unwrap_or_default(),
                            change: match (ev.value, ev.delta) {
                                (Some(v), _) => DiscreteChange::Set(v),
                                (None, Some(d)) => DiscreteChange::Delta(d),
                                (None, None) => DiscreteChange::Delta(0.0),
                            },
                        },
                    },
                })
                .collect(),
        )
    }

    pub fn stepper(&self) -> Result<StepperKind, String> {
        self.simulation.stepper.parse()
    }

    pub fn gamma(&self) -> Result<GammaPolicy, String> {
        match self.simulation.gamma.as_deref() {
            None | Some("h") => Ok(GammaPolicy::EqualToH),
            Some(text) => text
                .parse::<f64>()
                .map(GammaPolicy::Fixed)
                .map_err(|_| format!("gamma must be \"h\" or a number, got `{text}`")),
        }
    }

    pub fn omega_base(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.base_frequency_hz
    }

    /// Variable count sanity used in reports: (generators, buses).
    pub fn element_counts(&self) -> (usize, usize) {
        (self.generators.len(), self.buses.len())
    }

    /// True when the assembled problem would have an all-positive mass
    /// diagonal (no zero time constants anywhere).
    pub fn is_unreduced(&self) -> bool {
        self.generators.iter().all(|g| g.td0pp > 0.0 && g.tq0pp > 0.0)
            && self.exciters.iter().all(|e| e.ta > 0.0)
            && self.governors.iter().all(|g| g.t1 > 0.0 && g.t3 > 0.0)
    }

    /// Convenience accessor used by tests and the CLI to tweak a bundled
    /// case (returns None when the problem cannot be found).
    pub fn generator_mut(&mut self, id: &str) -> Option<&mut GeneratorSpec> {
        self.generators.iter_mut().find(|g| g.id == id)
    }
}

fn unique_ids<'a>(kind: &str, ids: impl Iterator<Item = &'a str>) -> Result<(), CaseError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CaseError::Invariant(format!("duplicate {kind} id `{id}`")));
        }
    }
    Ok(())
}

/// Helper shared by the CLI and tests: the problem's mass diagonal must be
/// all-positive before a traditional-formulation run.
pub fn ensure_traditional_representable(problem: &DaeProblem) -> Result<(), String> {
    if problem.mass().all_positive() {
        Ok(())
    } else {
        let rows: Vec<&str> = problem
            .mass()
            .zero_rows()
            .into_iter()
            .map(|i| problem.layout().equation_name(i))
            .collect();
        Err(format!(
            "not representable in traditional form: zero mass on {}",
            rows.join(", ")
        ))
    }
}
