//! Active channel sparsification.
//!
//! Users and the beams in their estimated downlink supports form a bipartite
//! graph. Solving the selection program on that graph yields the probed beam
//! set `𝓑` and the served users, such that each served user sees at most `T`
//! selected beams. The pre-beamformer `B = F_𝓑ᴴ` then maps every channel to
//! a `|𝓑|`-dimensional effective channel whose per-user support `Ω_k` is
//! known at the BS.

mod ilp;
mod instance;
mod lp;

use std::collections::BTreeMap;

use crate::channel::SupportSet;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub use ilp::{
    exhaustive_objective, greedy_selection, is_feasible, solve_ilp, solve_ilp_with, IlpOptions, IlpSolution,
};
pub use instance::{parse_instance, read_instance, write_instance, IlpInstance};

/// Bipartite beam/user graph with a dense adjacency matrix `W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamUserGraph {
    beams: Vec<usize>,
    users: Vec<usize>,
    /// Row-major `|𝓐| × K`.
    adjacency: Vec<bool>,
}

impl BeamUserGraph {
    /// `edges` are `(beam position, user position)` pairs. Every beam must
    /// have at least one edge.
    pub fn new(beams: Vec<usize>, users: Vec<usize>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let (na, nk) = (beams.len(), users.len());
        let mut adjacency = vec![false; na * nk];
        for (a, k) in edges {
            if a >= na || k >= nk {
                return Err(Error::InvalidArgument(format!("edge ({a}, {k}) out of range")));
            }
            adjacency[a * nk + k] = true;
        }
        if let Some(a) = (0..na).find(|&a| !(0..nk).any(|k| adjacency[a * nk + k])) {
            return Err(Error::InvalidArgument(format!("beam {} has no user", beams[a])));
        }
        Ok(BeamUserGraph {
            beams,
            users,
            adjacency,
        })
    }

    /// Beam indices `𝓐`, sorted.
    pub fn beams(&self) -> &[usize] {
        &self.beams
    }

    /// User ids, one per column of `W`.
    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn beam_count(&self) -> usize {
        self.beams.len()
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// `W[a, k]` by position.
    pub fn is_adjacent(&self, a: usize, k: usize) -> bool {
        self.adjacency[a * self.users.len() + k]
    }

    pub fn user_degree(&self, k: usize) -> usize {
        (0..self.beams.len()).filter(|&a| self.is_adjacent(a, k)).count()
    }

    pub fn beam_degree(&self, a: usize) -> usize {
        (0..self.users.len()).filter(|&k| self.is_adjacent(a, k)).count()
    }

    pub fn user_beam_positions(&self, k: usize) -> Vec<usize> {
        (0..self.beams.len()).filter(|&a| self.is_adjacent(a, k)).collect()
    }

    /// All `(beam position, user position)` edges in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nk = self.users.len();
        (0..self.adjacency.len())
            .filter(|&i| self.adjacency[i])
            .map(move |i| (i / nk, i % nk))
    }
}

/// Graph over users `0…K−1` from their downlink supports. Users with an empty
/// support keep an all-zero column.
pub fn build_graph(supports: &[SupportSet]) -> Result<BeamUserGraph> {
    let labelled: Vec<(usize, &SupportSet)> = supports.iter().enumerate().collect();
    build_graph_for(&labelled)
}

/// Same as [`build_graph`] with explicit user ids.
pub fn build_graph_for(supports: &[(usize, &SupportSet)]) -> Result<BeamUserGraph> {
    if supports.is_empty() {
        return Err(Error::InvalidArgument("no users".into()));
    }
    let mut beams: Vec<usize> = supports.iter().flat_map(|(_, s)| s.indices().iter().copied()).collect();
    beams.sort_unstable();
    beams.dedup();
    if beams.is_empty() {
        return Err(Error::NothingToProbe);
    }
    let users: Vec<usize> = supports.iter().map(|(id, _)| *id).collect();
    let edges: Vec<(usize, usize)> = supports
        .iter()
        .enumerate()
        .flat_map(|(k, (_, s))| {
            let beams = &beams;
            s.indices()
                .iter()
                .map(move |i| (beams.binary_search(i).expect("beam in union"), k))
        })
        .collect();
    BeamUserGraph::new(beams, users, edges)
}

/// Selected beams, served users and the pre-beamformer.
#[derive(Debug, Clone)]
pub struct SparsificationPlan {
    /// `z`, indexed like the graph's beams.
    pub beam_selected: Vec<bool>,
    /// `u`, indexed like the graph's users.
    pub user_served: Vec<bool>,
    /// `𝓑`: selected beam indices in `[M]`, sorted.
    pub selected_beams: Vec<usize>,
    /// `Ω_k` for every served user id: 0-based positions inside `𝓑`.
    pub omega: BTreeMap<usize, Vec<usize>>,
    /// `B = F_𝓑ᴴ`, `|𝓑| × M`.
    pub pre_beamformer: CMatrix,
    pub objective: usize,
}

impl SparsificationPlan {
    pub fn served_users(&self) -> Vec<usize> {
        self.omega.keys().copied().collect()
    }

    /// `Ω_k` as 1-based positions `{1, …, |𝓑|}`.
    pub fn omega_one_based(&self, user: usize) -> Option<Vec<usize>> {
        self.omega.get(&user).map(|o| o.iter().map(|p| p + 1).collect())
    }
}

/// Turns a feasible selection into the pre-beamformer and per-user positions.
pub fn build_plan(
    graph: &BeamUserGraph,
    z: &[bool],
    u: &[bool],
    f: &CMatrix,
    pilots: usize,
) -> Result<SparsificationPlan> {
    let m = f.nrows();
    if f.ncols() != m {
        return Err(Error::Dimension("DFT matrix must be square".into()));
    }
    if let Some(&b) = graph.beams().iter().find(|&&b| b >= m) {
        return Err(Error::Dimension(format!("beam {b} outside M = {m}")));
    }
    if !is_feasible(graph, z, u, pilots, m) {
        return Err(Error::Infeasible(
            "selection violates the sparsification constraints".into(),
        ));
    }
    let positions: Vec<usize> = (0..graph.beam_count()).filter(|&a| z[a]).collect();
    let selected_beams: Vec<usize> = positions.iter().map(|&a| graph.beams()[a]).collect();
    let mut omega = BTreeMap::new();
    for k in (0..graph.user_count()).filter(|&k| u[k]) {
        let o: Vec<usize> = positions
            .iter()
            .enumerate()
            .filter(|(_, &a)| graph.is_adjacent(a, k))
            .map(|(p, _)| p)
            .collect();
        debug_assert!(o.len() <= pilots);
        omega.insert(graph.users()[k], o);
    }
    let pre_beamformer = CMatrix::from_fn(selected_beams.len(), m, |r, c| f[(c, selected_beams[r])].conj());
    Ok(SparsificationPlan {
        beam_selected: z.to_vec(),
        user_served: u.to_vec(),
        selected_beams,
        omega,
        pre_beamformer,
        objective: z.iter().chain(u).filter(|&&b| b).count(),
    })
}
