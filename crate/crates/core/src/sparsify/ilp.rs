//! Exact solver for the beam/user selection program
//!
//! ```text
//! maximize   Σ_a z_a + Σ_k u_k
//! subject to z_a ≤ Σ_k W[a,k]·u_k                 ∀a
//!            u_k ≤ Σ_a W[a,k]·z_a                 ∀k
//!            Σ_a W[a,k]·z_a ≤ M·(1 − u_k) + T     ∀k
//!            z, u binary
//! ```
//!
//! by depth-first branch-and-bound over LP relaxations. The third family is
//! relaxed with the tightest valid big-M, `min(M, deg_k − T)`, which leaves
//! the integer feasible set unchanged but strengthens the LP bound. The
//! objective is internally `(K+1)·(Σz + Σu) + Σu` so that among equally good
//! selections the one serving more users wins.

use log::debug;

use super::lp::{maximize, LpOutcome};
use super::BeamUserGraph;
use crate::error::{Error, Result};

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IlpOptions {
    /// Branch-and-bound node budget; past it the best incumbent is returned
    /// with `proven_optimal = false`.
    pub node_limit: usize,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions { node_limit: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpSolution {
    /// Selected beams, indexed like `graph.beams()`.
    pub z: Vec<bool>,
    /// Served users, indexed like `graph.users()`.
    pub u: Vec<bool>,
    /// `Σz + Σu`.
    pub objective: usize,
    pub proven_optimal: bool,
    pub nodes: usize,
}

/// Checks all three constraint families of the original program.
pub fn is_feasible(graph: &BeamUserGraph, z: &[bool], u: &[bool], pilots: usize, antennas: usize) -> bool {
    let (na, nk) = (graph.beam_count(), graph.user_count());
    if z.len() != na || u.len() != nk {
        return false;
    }
    for a in 0..na {
        if z[a] && !(0..nk).any(|k| u[k] && graph.is_adjacent(a, k)) {
            return false;
        }
    }
    for k in 0..nk {
        let selected = (0..na).filter(|&a| z[a] && graph.is_adjacent(a, k)).count();
        if u[k] && selected == 0 {
            return false;
        }
        let cap = if u[k] { pilots } else { antennas + pilots };
        if selected > cap {
            return false;
        }
    }
    true
}

fn objective_of(z: &[bool], u: &[bool]) -> usize {
    z.iter().chain(u).filter(|&&b| b).count()
}

fn composite(z: &[bool], u: &[bool]) -> i64 {
    let k1 = u.len() as i64 + 1;
    k1 * objective_of(z, u) as i64 + u.iter().filter(|&&b| b).count() as i64
}

/// Feasible starting point: users in increasing order of degree, each taking
/// as many of its beams as every served user's budget allows.
pub fn greedy_selection(graph: &BeamUserGraph, pilots: usize) -> (Vec<bool>, Vec<bool>) {
    let (na, nk) = (graph.beam_count(), graph.user_count());
    let mut z = vec![false; na];
    let mut u = vec![false; nk];
    let mut load = vec![0usize; nk];
    let mut order: Vec<usize> = (0..nk).filter(|&k| graph.user_degree(k) > 0).collect();
    order.sort_by_key(|&k| (graph.user_degree(k), k));

    for &k in &order {
        let mut trial_z = z.clone();
        let mut trial_load = load.clone();
        for a in graph.user_beam_positions(k) {
            if trial_z[a] {
                continue;
            }
            // budget of k itself and of every served neighbour of a
            let fits = (0..nk).all(|j| {
                let bounded = u[j] || j == k;
                !graph.is_adjacent(a, j) || !bounded || trial_load[j] < pilots
            });
            if fits {
                trial_z[a] = true;
                for j in 0..nk {
                    if graph.is_adjacent(a, j) {
                        trial_load[j] += 1;
                    }
                }
            }
        }
        if trial_load[k] > 0 && trial_load[k] <= pilots {
            z = trial_z;
            load = trial_load;
            u[k] = true;
        }
    }
    // users whose beams were all picked by others
    for k in 0..nk {
        if !u[k] && load[k] > 0 && load[k] <= pilots {
            u[k] = true;
        }
    }
    (z, u)
}

struct Model {
    /// Constraint rows over `[z…, u…]`.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
}

fn build_model(graph: &BeamUserGraph, pilots: usize, antennas: usize) -> Model {
    let (na, nk) = (graph.beam_count(), graph.user_count());
    let n = na + nk;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for a in 0..na {
        let mut r = vec![0.0; n];
        r[a] = 1.0;
        for k in 0..nk {
            if graph.is_adjacent(a, k) {
                r[na + k] = -1.0;
            }
        }
        rows.push(r);
        rhs.push(0.0);
    }
    for k in 0..nk {
        let mut r = vec![0.0; n];
        r[na + k] = 1.0;
        for a in 0..na {
            if graph.is_adjacent(a, k) {
                r[a] = -1.0;
            }
        }
        rows.push(r);
        rhs.push(0.0);
    }
    for k in 0..nk {
        let deg = graph.user_degree(k);
        if deg <= pilots {
            continue;
        }
        let big = antennas.min(deg - pilots) as f64;
        let mut r = vec![0.0; n];
        for a in 0..na {
            if graph.is_adjacent(a, k) {
                r[a] = 1.0;
            }
        }
        r[na + k] = big;
        rows.push(r);
        rhs.push(pilots as f64 + big);
    }
    let k1 = nk as f64 + 1.0;
    let cost = (0..n).map(|j| if j < na { k1 } else { k1 + 1.0 }).collect();
    Model { rows, rhs, cost }
}

/// LP relaxation with some variables fixed; returns the bound and the full
/// relaxed point.
fn relax(model: &Model, fixed: &[Option<bool>]) -> Option<(f64, Vec<f64>)> {
    let free: Vec<usize> = (0..fixed.len()).filter(|&j| fixed[j].is_none()).collect();
    let mut constant = 0.0;
    for (j, f) in fixed.iter().enumerate() {
        if *f == Some(true) {
            constant += model.cost[j];
        }
    }
    let mut a = Vec::with_capacity(model.rows.len() + free.len());
    let mut b = Vec::with_capacity(model.rows.len() + free.len());
    for (row, &r) in model.rows.iter().zip(&model.rhs) {
        let mut shifted = r;
        for (j, f) in fixed.iter().enumerate() {
            if *f == Some(true) {
                shifted -= row[j];
            }
        }
        let reduced: Vec<f64> = free.iter().map(|&j| row[j]).collect();
        if reduced.iter().all(|&v| v == 0.0) {
            if shifted < -INT_TOL {
                return None;
            }
            continue;
        }
        a.push(reduced);
        b.push(shifted);
    }
    for i in 0..free.len() {
        let mut r = vec![0.0; free.len()];
        r[i] = 1.0;
        a.push(r);
        b.push(1.0);
    }
    let c: Vec<f64> = free.iter().map(|&j| model.cost[j]).collect();
    match maximize(&c, &a, &b) {
        LpOutcome::Optimal { x, value } => {
            let mut full: Vec<f64> = fixed.iter().map(|f| if *f == Some(true) { 1.0 } else { 0.0 }).collect();
            for (i, &j) in free.iter().enumerate() {
                full[j] = x[i].clamp(0.0, 1.0);
            }
            Some((value + constant, full))
        }
        LpOutcome::Infeasible => None,
        // all variables are bounded
        LpOutcome::Unbounded => unreachable!("bounded relaxation reported unbounded"),
    }
}

pub fn solve_ilp(graph: &BeamUserGraph, pilots: usize, antennas: usize) -> Result<IlpSolution> {
    solve_ilp_with(graph, pilots, antennas, &IlpOptions::default())
}

pub fn solve_ilp_with(graph: &BeamUserGraph, pilots: usize, antennas: usize, opts: &IlpOptions) -> Result<IlpSolution> {
    if pilots < 1 {
        return Err(Error::InvalidArgument("pilot dimension must be ≥ 1".into()));
    }
    let (na, nk) = (graph.beam_count(), graph.user_count());
    let n = na + nk;
    let model = build_model(graph, pilots, antennas);

    let (gz, gu) = greedy_selection(graph, pilots);
    debug_assert!(is_feasible(graph, &gz, &gu, pilots, antennas));
    let mut best = (composite(&gz, &gu), gz, gu);

    let mut stack: Vec<Vec<Option<bool>>> = vec![vec![None; n]];
    let mut nodes = 0usize;
    let mut exhausted = true;

    while let Some(fixed) = stack.pop() {
        if nodes >= opts.node_limit {
            exhausted = false;
            break;
        }
        nodes += 1;
        let Some((bound, x)) = relax(&model, &fixed) else {
            continue;
        };
        // composite objective is integral
        if ((bound + INT_TOL).floor() as i64) <= best.0 {
            continue;
        }
        let frac = |j: usize| (x[j] - x[j].round()).abs();
        let pick = |range: std::ops::Range<usize>| {
            range
                .filter(|&j| frac(j) > INT_TOL)
                .max_by(|&a, &b| frac(a).total_cmp(&frac(b)).then(b.cmp(&a)))
        };
        match pick(na..n).or_else(|| pick(0..na)) {
            None => {
                let z: Vec<bool> = x[..na].iter().map(|&v| v > 0.5).collect();
                let u: Vec<bool> = x[na..].iter().map(|&v| v > 0.5).collect();
                if is_feasible(graph, &z, &u, pilots, antennas) {
                    let value = composite(&z, &u);
                    if value > best.0 {
                        best = (value, z, u);
                    }
                }
            }
            Some(j) => {
                let mut zero = fixed.clone();
                zero[j] = Some(false);
                let mut one = fixed;
                one[j] = Some(true);
                stack.push(zero);
                stack.push(one);
            }
        }
    }

    let (_, z, u) = best;
    if !exhausted {
        debug!("ilp: node limit {} reached, returning incumbent", opts.node_limit);
    }
    Ok(IlpSolution {
        objective: objective_of(&z, &u),
        z,
        u,
        proven_optimal: exhausted,
        nodes,
    })
}

/// Optimal objective by enumerating every `(z, u)` pair. Only for small
/// instances (`|𝓐| + K ≤ 24`).
pub fn exhaustive_objective(graph: &BeamUserGraph, pilots: usize, antennas: usize) -> Result<usize> {
    let (na, nk) = (graph.beam_count(), graph.user_count());
    if na + nk > 24 {
        return Err(Error::InvalidArgument(format!(
            "exhaustive search over {} binaries refused",
            na + nk
        )));
    }
    let user_mask: Vec<u32> = (0..nk)
        .map(|k| (0..na).filter(|&a| graph.is_adjacent(a, k)).fold(0, |m, a| m | 1 << a))
        .collect();
    let beam_mask: Vec<u32> = (0..na)
        .map(|a| (0..nk).filter(|&k| graph.is_adjacent(a, k)).fold(0, |m, k| m | 1 << k))
        .collect();
    let mut best = 0usize;
    for zm in 0u32..(1 << na) {
        let counts: Vec<usize> = user_mask.iter().map(|&s| (s & zm).count_ones() as usize).collect();
        for um in 0u32..(1 << nk) {
            let value = (zm.count_ones() + um.count_ones()) as usize;
            if value <= best {
                continue;
            }
            let beams_ok = (0..na).all(|a| zm & (1 << a) == 0 || beam_mask[a] & um != 0);
            let users_ok = (0..nk).all(|k| {
                let served = um & (1 << k) != 0;
                let cap = if served { pilots } else { antennas + pilots };
                (!served || counts[k] > 0) && counts[k] <= cap
            });
            if beams_ok && users_ok {
                best = value;
            }
        }
    }
    Ok(best)
}
