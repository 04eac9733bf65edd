//! Bus/branch grid model, JSON case files and the branch-bus incidence matrix.
//!
//! Buses are stored in id order (ids are contiguous `1..=n_b`), so the bus
//! with id `k` lives at index `k - 1` everywhere in the crate. Branches keep
//! their file order; `branch_index` maps a branch id to its position.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CaseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "R")]
    Reference,
    #[serde(rename = "G")]
    Generator,
    #[serde(rename = "L")]
    Load,
}

impl BusKind {
    pub fn letter(self) -> char {
        match self {
            BusKind::Reference => 'R',
            BusKind::Generator => 'G',
            BusKind::Load => 'L',
        }
    }

    /// Reference and generator buses both host a machine.
    pub fn is_source(self) -> bool {
        matches!(self, BusKind::Reference | BusKind::Generator)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Per-unit real power injection (positive = generation).
    pub injection: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub from_bus: usize,
    pub to_bus: usize,
    pub reactance: f64,
    /// Power threshold `c` in per unit.
    pub threshold: f64,
    /// `1 / reactance`.
    pub initial_susceptance: f64,
}

impl Branch {
    /// Zero-based (from, to) bus indices.
    pub fn endpoints(&self) -> (usize, usize) {
        (self.from_bus - 1, self.to_bus - 1)
    }
}

/// Immutable grid model. Cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    incidence: DMatrix<f64>,
    base_power: f64,
    branch_index: HashMap<usize, usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CaseFile {
    base_mva: f64,
    buses: Vec<BusRecord>,
    branches: Vec<BranchRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BusRecord {
    id: usize,
    #[serde(rename = "type")]
    kind: BusKind,
    injection: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BranchRecord {
    id: usize,
    from: usize,
    to: usize,
    reactance: f64,
    threshold: f64,
}

impl PowerNetwork {
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, index: usize) -> &Branch {
        &self.branches[index]
    }

    pub fn bus(&self, index: usize) -> &Bus {
        &self.buses[index]
    }

    pub fn base_power(&self) -> f64 {
        self.base_power
    }

    /// The `n × n_b` signed incidence matrix A.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    /// Position of the branch with the given id.
    pub fn branch_index(&self, id: usize) -> Option<usize> {
        self.branch_index.get(&id).copied()
    }

    pub fn injections(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.injection).collect()
    }

    pub fn nominal_susceptances(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.initial_susceptance).collect()
    }

    /// Index of the first bus marked as reference in the case file.
    pub fn case_reference(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Reference)
            .expect("validated networks have a reference bus")
    }

    /// Number of branches incident to each bus.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.bus_count()];
        for br in &self.branches {
            let (i, j) = br.endpoints();
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn from_json_str(text: &str) -> Result<Self, CaseError> {
        let file: CaseFile = serde_json::from_str(text)?;
        Self::from_case(file)
    }

    pub fn to_json_string(&self) -> String {
        let file = CaseFile {
            base_mva: self.base_power,
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id,
                    kind: b.kind,
                    injection: b.injection,
                })
                .collect(),
            branches: self
                .branches
                .iter()
                .map(|b| BranchRecord {
                    id: b.id,
                    from: b.from_bus,
                    to: b.to_bus,
                    reactance: b.reactance,
                    threshold: b.threshold,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("case data always serializes")
    }

    fn from_case(file: CaseFile) -> Result<Self, CaseError> {
        if file.buses.is_empty() {
            return Err(CaseError::Empty);
        }
        let count = file.buses.len();
        let mut slots: Vec<Option<Bus>> = vec![None; count];
        for rec in &file.buses {
            if rec.id == 0 || rec.id > count {
                return Err(CaseError::NonContiguousBus { id: rec.id, count });
            }
            if !rec.injection.is_finite() {
                return Err(CaseError::NonFiniteInjection(rec.id));
            }
            let slot = &mut slots[rec.id - 1];
            if slot.is_some() {
                return Err(CaseError::DuplicateBus(rec.id));
            }
            *slot = Some(Bus {
                id: rec.id,
                kind: rec.kind,
                injection: rec.injection,
            });
        }
        // ids are in range and unique, so every slot is filled
        let buses: Vec<Bus> = slots.into_iter().map(Option::unwrap).collect();
        if !buses.iter().any(|b| b.kind == BusKind::Reference) {
            return Err(CaseError::NoReferenceBus);
        }

        let mut branches = Vec::with_capacity(file.branches.len());
        let mut branch_index = HashMap::new();
        let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
        for rec in &file.branches {
            if branch_index.insert(rec.id, branches.len()).is_some() {
                return Err(CaseError::DuplicateBranch(rec.id));
            }
            for bus in [rec.from, rec.to] {
                if bus == 0 || bus > count {
                    return Err(CaseError::DanglingBus {
                        branch: rec.id,
                        bus,
                    });
                }
            }
            if rec.from == rec.to {
                return Err(CaseError::SelfLoop(rec.id));
            }
            let key = (rec.from.min(rec.to), rec.from.max(rec.to));
            if let Some(&other) = pairs.get(&key) {
                return Err(CaseError::ParallelBranch {
                    branch: rec.id,
                    other,
                });
            }
            pairs.insert(key, rec.id);
            if !(rec.reactance > 0.0) || !rec.reactance.is_finite() {
                return Err(CaseError::NonPositiveReactance(rec.id));
            }
            if !(rec.threshold > 0.0) || !rec.threshold.is_finite() {
                return Err(CaseError::NonPositiveThreshold(rec.id));
            }
            branches.push(Branch {
                id: rec.id,
                from_bus: rec.from,
                to_bus: rec.to,
                reactance: rec.reactance,
                threshold: rec.threshold,
                initial_susceptance: 1.0 / rec.reactance,
            });
        }

        let incidence = incidence_of(count, &branches);
        Ok(PowerNetwork {
            buses,
            branches,
            incidence,
            base_power: file.base_mva,
            branch_index,
        })
    }
}

fn incidence_of(bus_count: usize, branches: &[Branch]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(branches.len(), bus_count);
    for (l, br) in branches.iter().enumerate() {
        let (i, j) = br.endpoints();
        a[(l, i)] = 1.0;
        a[(l, j)] = -1.0;
    }
    a
}

/// Reads and validates a JSON case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<PowerNetwork, CaseError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    PowerNetwork::from_json_str(&text)
}

pub fn save_case(network: &PowerNetwork, path: impl AsRef<Path>) -> std::io::Result<()> {
    fs::write(path, network.to_json_string() + "\n")
}

/// Rebuilds the incidence matrix from the branch list.
pub fn build_incidence(network: &PowerNetwork) -> DMatrix<f64> {
    incidence_of(network.bus_count(), &network.branches)
}

/// Case files shipped with the crate.
pub mod cases {
    use super::PowerNetwork;

    pub const IEEE9_JSON: &str = include_str!("../../../cases/ieee9.json");
    pub const IEEE14_JSON: &str = include_str!("../../../cases/ieee14.json");
    pub const TWO_BUS_JSON: &str = include_str!("../../../cases/two_bus.json");
    pub const THREE_BUS_JSON: &str = include_str!("../../../cases/three_bus.json");

    pub fn ieee9() -> PowerNetwork {
        PowerNetwork::from_json_str(IEEE9_JSON).expect("bundled case is valid")
    }

    pub fn ieee14() -> PowerNetwork {
        PowerNetwork::from_json_str(IEEE14_JSON).expect("bundled case is valid")
    }

    pub fn two_bus() -> PowerNetwork {
        PowerNetwork::from_json_str(TWO_BUS_JSON).expect("bundled case is valid")
    }

    pub fn three_bus() -> PowerNetwork {
        PowerNetwork::from_json_str(THREE_BUS_JSON).expect("bundled case is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus_text(x: f64, c: f64) -> String {
        format!(
            r#"{{"base_mva":100,"buses":[{{"id":1,"type":"R","injection":1.0}},{{"id":2,"type":"L","injection":-1.0}}],
            "branches":[{{"id":1,"from":1,"to":2,"reactance":{x},"threshold":{c}}}]}}"#
        )
    }

    #[test]
    fn minimal_two_bus() {
        let net = PowerNetwork::from_json_str(&two_bus_text(0.5, 1.0)).unwrap();
        assert_eq!(net.bus_count(), 2);
        assert_eq!(net.branch_count(), 1);
        assert_eq!(net.branch(0).initial_susceptance, 2.0);
        assert_eq!(net.incidence().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);
    }

    #[test]
    fn bundled_ieee_cases() {
        let net9 = cases::ieee9();
        assert_eq!((net9.branch_count(), net9.bus_count()), (9, 9));
        assert!((net9.branch(1).initial_susceptance - 10.8696).abs() < 1e-4);
        assert_eq!(net9.branch(1).initial_susceptance, 1.0 / 0.092);
        let a = net9.incidence();
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(a[(0, 3)], -1.0);
        assert_eq!(a.row(0).iter().filter(|v| **v != 0.0).count(), 2);

        let net14 = cases::ieee14();
        assert_eq!((net14.branch_count(), net14.bus_count()), (20, 14));
        assert!((net14.branch(5).initial_susceptance - 5.8480).abs() < 1e-4);
    }

    #[test]
    fn triangle_incidence() {
        let text = r#"{"base_mva":100,"buses":[{"id":1,"type":"R","injection":1},{"id":2,"type":"L","injection":0},{"id":3,"type":"L","injection":-1}],
          "branches":[{"id":1,"from":1,"to":2,"reactance":1,"threshold":2},{"id":2,"from":2,"to":3,"reactance":1,"threshold":2},{"id":3,"from":1,"to":3,"reactance":1,"threshold":2}]}"#;
        let net = PowerNetwork::from_json_str(text).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1., -1., 0., 0., 1., -1., 1., 0., -1.]);
        assert_eq!(build_incidence(&net), expected);
    }

    #[test]
    fn rejects_bad_records() {
        let bad_x = two_bus_text(0.0, 1.0);
        assert!(matches!(
            PowerNetwork::from_json_str(&bad_x),
            Err(CaseError::NonPositiveReactance(1))
        ));
        let bad_c = two_bus_text(0.5, -1.0);
        assert!(matches!(
            PowerNetwork::from_json_str(&bad_c),
            Err(CaseError::NonPositiveThreshold(1))
        ));
        let dangling = r#"{"base_mva":100,"buses":[{"id":1,"type":"R","injection":0}],
            "branches":[{"id":7,"from":1,"to":2,"reactance":1,"threshold":1}]}"#;
        assert!(matches!(
            PowerNetwork::from_json_str(dangling),
            Err(CaseError::DanglingBus { branch: 7, bus: 2 })
        ));
        let dup_bus = r#"{"base_mva":100,"buses":[{"id":1,"type":"R","injection":0},{"id":1,"type":"L","injection":0}],"branches":[]}"#;
        assert!(matches!(
            PowerNetwork::from_json_str(dup_bus),
            Err(CaseError::DuplicateBus(1))
        ));
        let parallel = r#"{"base_mva":100,"buses":[{"id":1,"type":"R","injection":0},{"id":2,"type":"L","injection":0}],
            "branches":[{"id":1,"from":1,"to":2,"reactance":1,"threshold":1},{"id":2,"from":2,"to":1,"reactance":1,"threshold":1}]}"#;
        assert!(matches!(
            PowerNetwork::from_json_str(parallel),
            Err(CaseError::ParallelBranch { branch: 2, other: 1 })
        ));
        let no_ref = r#"{"base_mva":100,"buses":[{"id":1,"type":"G","injection":0}],"branches":[]}"#;
        assert!(matches!(
            PowerNetwork::from_json_str(no_ref),
            Err(CaseError::NoReferenceBus)
        ));
        assert!(matches!(
            PowerNetwork::from_json_str("{ not json"),
            Err(CaseError::Parse(_))
        ));
    }

    #[test]
    fn unbalanced_injections_are_accepted() {
        let text = r#"{"base_mva":100,"buses":[{"id":1,"type":"R","injection":0.3},{"id":2,"type":"L","injection":-1.0}],
            "branches":[{"id":1,"from":1,"to":2,"reactance":0.5,"threshold":1}]}"#;
        assert!(PowerNetwork::from_json_str(text).is_ok());
    }
}
