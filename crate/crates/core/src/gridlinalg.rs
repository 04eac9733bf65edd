//! Island decomposition of the live grid and the reduced-matrix operators.
//!
//! `star` zeroes the reference row and column of every island block;
//! `inv_star` inverts each island block with its reference row/column
//! deleted and re-embeds the inverse with zeros at the reference position.
//! Both operate on full `n_b × n_b` matrices in bus order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::network::{Branch, BusKind, PowerNetwork};

/// How each island picks the bus whose angle is pinned to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReferencePolicy {
    /// The case's reference bus when the island contains it, otherwise the
    /// highest-id generator bus, otherwise the lowest-id bus.
    #[default]
    CaseSlackThenGenerator,
    /// Always the lowest-id bus of the island.
    LowestId,
}

/// Rules that decide which branches are in service and where islands put
/// their slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Absolute floor on a live susceptance (per unit).
    pub tol_zero: f64,
    /// A branch whose susceptance drops to this fraction of its nominal
    /// value or below is open.
    pub open_fraction: f64,
    pub reference: ReferencePolicy,
}

impl Default for Topology {
    fn default() -> Self {
        Topology {
            tol_zero: 1e-9,
            open_fraction: 1e-3,
            reference: ReferencePolicy::default(),
        }
    }
}

impl Topology {
    /// Purely absolute liveness test `y > tol_zero`.
    pub fn absolute(tol_zero: f64) -> Self {
        Topology {
            tol_zero,
            open_fraction: 0.0,
            ..Topology::default()
        }
    }

    pub fn open_threshold(&self, branch: &Branch) -> f64 {
        self.tol_zero
            .max(self.open_fraction * branch.initial_susceptance)
    }

    pub fn is_live(&self, branch: &Branch, y: f64) -> bool {
        y > self.open_threshold(branch)
    }

    pub fn live_mask(&self, network: &PowerNetwork, y: &[f64]) -> Vec<bool> {
        network
            .branches()
            .iter()
            .zip(y)
            .map(|(br, &v)| self.is_live(br, v))
            .collect()
    }

    /// Susceptances with open branches set to zero.
    pub fn effective(&self, network: &PowerNetwork, y: &[f64]) -> Vec<f64> {
        network
            .branches()
            .iter()
            .zip(y)
            .map(|(br, &v)| if self.is_live(br, v) { v } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Island {
    /// Zero-based bus indices, ascending.
    pub buses: Vec<usize>,
    /// Zero-based index of the reference bus.
    pub reference: usize,
}

impl Island {
    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Buses other than the reference, ascending.
    pub fn reduced(&self) -> impl Iterator<Item = usize> + '_ {
        self.buses.iter().copied().filter(move |&b| b != self.reference)
    }
}

/// Connected components of the live grid, ordered by lowest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IslandDecomposition {
    islands: Vec<Island>,
    island_of: Vec<usize>,
}

impl IslandDecomposition {
    pub fn from_live_mask(network: &PowerNetwork, live: &[bool], policy: ReferencePolicy) -> Self {
        let nb = network.bus_count();
        let mut adjacency = vec![Vec::new(); nb];
        for (br, _) in network.branches().iter().zip(live).filter(|(_, &on)| on) {
            let (i, j) = br.endpoints();
            adjacency[i].push(j);
            adjacency[j].push(i);
        }

        let mut island_of = vec![usize::MAX; nb];
        let mut islands = Vec::new();
        for start in 0..nb {
            if island_of[start] != usize::MAX {
                continue;
            }
            let id = islands.len();
            let mut members = vec![start];
            island_of[start] = id;
            let mut cursor = 0;
            while cursor < members.len() {
                let bus = members[cursor];
                cursor += 1;
                for &next in &adjacency[bus] {
                    if island_of[next] == usize::MAX {
                        island_of[next] = id;
                        members.push(next);
                    }
                }
            }
            members.sort_unstable();
            let reference = pick_reference(network, &members, policy);
            islands.push(Island {
                buses: members,
                reference,
            });
        }
        IslandDecomposition { islands, island_of }
    }

    pub fn islands(&self) -> &[Island] {
        &self.islands
    }

    pub fn count(&self) -> usize {
        self.islands.len()
    }

    pub fn island_of(&self, bus: usize) -> usize {
        self.island_of[bus]
    }

    pub fn reference_of(&self, bus: usize) -> usize {
        self.islands[self.island_of[bus]].reference
    }

    pub fn is_reference(&self, bus: usize) -> bool {
        self.reference_of(bus) == bus
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.islands.iter().map(Island::len).collect()
    }

    /// One-based bus ids per island.
    pub fn bus_ids(&self) -> Vec<Vec<usize>> {
        self.islands
            .iter()
            .map(|isl| isl.buses.iter().map(|b| b + 1).collect())
            .collect()
    }

    pub fn bus_count(&self) -> usize {
        self.island_of.len()
    }
}

fn pick_reference(network: &PowerNetwork, members: &[usize], policy: ReferencePolicy) -> usize {
    match policy {
        ReferencePolicy::LowestId => members[0],
        ReferencePolicy::CaseSlackThenGenerator => {
            let kind = |b: usize| network.bus(b).kind;
            members
                .iter()
                .copied()
                .find(|&b| kind(b) == BusKind::Reference)
                .or_else(|| {
                    members
                        .iter()
                        .rev()
                        .copied()
                        .find(|&b| kind(b) == BusKind::Generator)
                })
                .unwrap_or(members[0])
        }
    }
}

pub fn find_islands(network: &PowerNetwork, y: &[f64], topology: &Topology) -> IslandDecomposition {
    let live = topology.live_mask(network, y);
    IslandDecomposition::from_live_mask(network, &live, topology.reference)
}

/// `A^T diag(y) A` over the live branches, with the islands it was built on.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalAdmittance {
    pub matrix: DMatrix<f64>,
    pub decomposition: IslandDecomposition,
}

impl NodalAdmittance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, actual })
    }
}

/// `A^T diag(weights) A`, assembled branch by branch.
pub fn weighted_laplacian(network: &PowerNetwork, weights: &[f64]) -> DMatrix<f64> {
    let nb = network.bus_count();
    let mut m = DMatrix::zeros(nb, nb);
    for (br, &w) in network.branches().iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let (i, j) = br.endpoints();
        m[(i, i)] += w;
        m[(j, j)] += w;
        m[(i, j)] -= w;
        m[(j, i)] -= w;
    }
    m
}

pub fn build_nodal_admittance(
    network: &PowerNetwork,
    y: &[f64],
    topology: &Topology,
) -> Result<NodalAdmittance> {
    check_len(network.branch_count(), y.len())?;
    let live = topology.live_mask(network, y);
    let effective: Vec<f64> = y
        .iter()
        .zip(&live)
        .map(|(&v, &on)| if on { v } else { 0.0 })
        .collect();
    Ok(NodalAdmittance {
        matrix: weighted_laplacian(network, &effective),
        decomposition: IslandDecomposition::from_live_mask(network, &live, topology.reference),
    })
}

/// Applies the `*` operator to an arbitrary matrix using a given decomposition.
pub fn star_with(matrix: &DMatrix<f64>, decomposition: &IslandDecomposition) -> DMatrix<f64> {
    let n = matrix.nrows();
    let mut out = DMatrix::zeros(n, n);
    for island in decomposition.islands() {
        for r in island.reduced() {
            for c in island.reduced() {
                out[(r, c)] = matrix[(r, c)];
            }
        }
    }
    out
}

pub fn star(admittance: &NodalAdmittance) -> DMatrix<f64> {
    star_with(&admittance.matrix, &admittance.decomposition)
}

/// Applies the `-1*` operator to an arbitrary matrix using a given decomposition.
pub fn inv_star_with(
    matrix: &DMatrix<f64>,
    decomposition: &IslandDecomposition,
) -> Result<DMatrix<f64>> {
    let n = matrix.nrows();
    let mut out = DMatrix::zeros(n, n);
    for island in decomposition.islands() {
        let idx: Vec<usize> = island.reduced().collect();
        if idx.is_empty() {
            continue;
        }
        let k = idx.len();
        let block = DMatrix::from_fn(k, k, |r, c| matrix[(idx[r], idx[c])]);
        let norm1 = one_norm(&block);
        let singular = |condition: f64| ModelError::SingularIsland {
            reference_bus: island.reference + 1,
            condition,
        };
        let inverse = block.lu().try_inverse().ok_or_else(|| singular(f64::INFINITY))?;
        let condition = norm1 * one_norm(&inverse);
        if !condition.is_finite() || condition > 1e14 {
            return Err(singular(condition));
        }
        for (r, &gr) in idx.iter().enumerate() {
            for (c, &gc) in idx.iter().enumerate() {
                out[(gr, gc)] = inverse[(r, c)];
            }
        }
    }
    Ok(out)
}

pub fn inv_star(admittance: &NodalAdmittance) -> Result<DMatrix<f64>> {
    inv_star_with(&admittance.matrix, &admittance.decomposition)
}

/// Diagonal projector with 0 at every island reference bus and 1 elsewhere.
pub fn reference_projector(decomposition: &IslandDecomposition) -> DMatrix<f64> {
    let n = decomposition.bus_count();
    DMatrix::from_fn(n, n, |r, c| {
        if r == c && !decomposition.is_reference(r) {
            1.0
        } else {
            0.0
        }
    })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::cases;

    fn two_bus_admittance(b: f64) -> NodalAdmittance {
        let net = cases::two_bus();
        build_nodal_admittance(&net, &[b], &Topology::default()).unwrap()
    }

    #[test]
    fn two_bus_operators() {
        let b = 2.0;
        let adm = two_bus_admittance(b);
        assert_eq!(adm.matrix, DMatrix::from_row_slice(2, 2, &[b, -b, -b, b]));
        assert_eq!(star(&adm), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, b]));
        assert_eq!(
            inv_star(&adm).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0 / b])
        );
    }

    #[test]
    fn ieee9_nominal_admittance() {
        let net = cases::ieee9();
        let y = net.nominal_susceptances();
        let adm = build_nodal_admittance(&net, &y, &Topology::default()).unwrap();
        assert!((adm.matrix[(0, 0)] - 1.0 / 0.058).abs() < 1e-12);
        assert!((adm.matrix[(0, 0)] - 17.2414).abs() < 1e-4);
        assert_eq!(adm.decomposition.count(), 1);
        assert_eq!(adm.decomposition.islands()[0].reference, 0);
        for r in 0..9 {
            assert!(adm.matrix.row(r).sum().abs() < 1e-12);
        }
        assert_eq!(adm.matrix, adm.matrix.transpose());

        let s = star(&adm);
        for k in 0..9 {
            assert_eq!(s[(0, k)], 0.0);
            assert_eq!(s[(k, 0)], 0.0);
        }
        for r in 1..9 {
            for c in 1..9 {
                assert_eq!(s[(r, c)], adm.matrix[(r, c)]);
            }
        }
    }

    #[test]
    fn dead_branch_isolates_bus() {
        let net = cases::ieee9();
        let mut y = net.nominal_susceptances();
        y[1] = 0.0;
        let adm = build_nodal_admittance(&net, &y, &Topology::default()).unwrap();
        assert_eq!(adm.matrix[(1, 6)], 0.0);
        assert_eq!(adm.decomposition.count(), 2);
        assert_eq!(adm.decomposition.bus_ids()[1], vec![2]);
    }

    #[test]
    fn island_counts() {
        let net = cases::ieee9();
        let topo = Topology::default();
        let nominal = find_islands(&net, &net.nominal_susceptances(), &topo);
        assert_eq!(nominal.bus_ids(), vec![(1..=9).collect::<Vec<_>>()]);

        let mut only_eight = vec![0.0; 9];
        only_eight[7] = 1.0 / 0.161;
        let isl = find_islands(&net, &only_eight, &topo);
        assert_eq!(isl.count(), 8);
        assert!(isl.bus_ids().contains(&vec![6, 9]));

        let none = find_islands(&net, &[0.0; 9], &topo);
        assert_eq!(none.count(), 9);
        assert!(none.sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn reference_policies() {
        let net = cases::ieee14();
        let mut live = vec![false; net.branch_count()];
        // island {4,5,7,8,9}: branches 4-5, 4-7, 7-8, 4-9
        for id in [7, 8, 14, 9] {
            live[net.branch_index(id).unwrap()] = true;
        }
        let d = IslandDecomposition::from_live_mask(&net, &live, ReferencePolicy::CaseSlackThenGenerator);
        let isl = &d.islands()[d.island_of(3)];
        assert_eq!(isl.reference, 7); // bus 8, the only generator
        let d = IslandDecomposition::from_live_mask(&net, &live, ReferencePolicy::LowestId);
        assert_eq!(d.islands()[d.island_of(3)].reference, 3);

        let all = vec![true; net.branch_count()];
        let d = IslandDecomposition::from_live_mask(&net, &all, ReferencePolicy::CaseSlackThenGenerator);
        assert_eq!(d.islands()[0].reference, 0);
    }

    #[test]
    fn singleton_island_contributes_zeros() {
        let net = cases::ieee9();
        let mut y = net.nominal_susceptances();
        y[2] = 0.0; // bus 3 alone
        let adm = build_nodal_admittance(&net, &y, &Topology::default()).unwrap();
        let x = inv_star(&adm).unwrap();
        for k in 0..9 {
            assert_eq!(x[(2, k)], 0.0);
            assert_eq!(x[(k, 2)], 0.0);
        }
    }

    #[test]
    fn liveness_is_signed_and_relative() {
        let net = cases::ieee9();
        let topo = Topology::default();
        let br = net.branch(1);
        assert!(!topo.is_live(br, -0.000435));
        assert!(!topo.is_live(br, 0.0));
        assert!(!topo.is_live(br, 0.0021736));
        assert!(topo.is_live(br, 0.02));
        let abs = Topology::absolute(1e-9);
        assert!(abs.is_live(br, 0.0021736));
        assert!(!abs.is_live(br, -0.000435));
    }

    #[test]
    fn singular_block_is_reported() {
        let net = cases::two_bus();
        let d = find_islands(&net, &[2.0], &Topology::default());
        let err = inv_star_with(&DMatrix::zeros(2, 2), &d).unwrap_err();
        assert!(matches!(err, ModelError::SingularIsland { reference_bus: 1, .. }));
    }
}
