use std::collections::{HashMap, VecDeque};

use nalgebra::DMatrix;

use super::{FeederModel, PhaseSet};
use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Line,
    Regulator,
}

/// A line or regulator oriented away from the source.
#[derive(Debug, Clone)]
pub struct Branch {
    pub kind: BranchKind,
    /// Index into `lines` or `regulators`.
    pub element: usize,
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub phases: PhaseSet,
    pub z: CMat,
    /// Per-phase voltage ratio, regulators only.
    pub ratio: Option<Vec<f64>>,
}

impl Branch {
    pub fn r_matrix(&self) -> Option<DMatrix<f64>> {
        self.ratio
            .as_ref()
            .map(|r| DMatrix::from_fn(r.len(), r.len(), |i, j| r[i] * r[j]))
    }

    pub fn has_zero_impedance(&self) -> bool {
        self.z.iter().all(|z| z.norm() == 0.0)
    }
}

/// Source-rooted traversal of a radial feeder.
#[derive(Debug, Clone)]
pub struct TopologyOrder {
    pub bus_ids: Vec<String>,
    pub bus_phases: Vec<PhaseSet>,
    pub source: usize,
    /// Breadth-first bus order starting at the source.
    pub order: Vec<usize>,
    /// Incoming branch per bus (`None` only at the source).
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub branches: Vec<Branch>,
    /// Generators attached at each bus.
    pub gens_at: Vec<Vec<usize>>,
    /// Generators at or below each bus.
    down: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl TopologyOrder {
    pub fn bus(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn n_buses(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn branch_by_id(&self, id: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    /// Branches from the source down to `bus`, source end first.
    pub fn path(&self, bus: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = bus;
        while let Some(b) = self.parent[cur] {
            out.push(b);
            cur = self.branches[b].from;
        }
        out.reverse();
        out
    }

    /// Buses on the path to `bus`, including both the source and `bus`.
    pub fn path_buses(&self, bus: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.path(bus).iter().map(|&b| self.branches[b].from).collect();
        out.push(bus);
        out
    }

    /// Generators located at `bus` or anywhere downstream of it.
    pub fn down(&self, bus: usize) -> &[usize] {
        &self.down[bus]
    }

    /// Depth-first order (children in reverse declaration order), for
    /// order-independence checks.
    pub fn depth_first_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_buses());
        let mut stack = vec![self.source];
        while let Some(b) = stack.pop() {
            out.push(b);
            for &c in &self.children[b] {
                stack.push(self.branches[c].to);
            }
        }
        out
    }
}

/// Orders the feeder from its source. Lines listed against the flow are
/// re-oriented; regulators must already point away from the source.
pub fn radial_order(model: &FeederModel) -> Result<TopologyOrder> {
    let index: HashMap<String, usize> = model
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.clone(), i))
        .collect();
    let lookup = |id: &str, kind: &'static str| {
        index.get(id).copied().ok_or_else(|| Error::UnknownId { kind, id: id.to_string() })
    };
    let n = model.buses.len();
    let source = lookup(&model.source.bus, "bus")?;

    // (element kind, element index, a, b)
    let mut edges = Vec::new();
    for (k, l) in model.lines.iter().enumerate() {
        edges.push((BranchKind::Line, k, lookup(&l.from, "bus")?, lookup(&l.to, "bus")?));
    }
    for (k, r) in model.regulators.iter().enumerate() {
        edges.push((BranchKind::Regulator, k, lookup(&r.from, "bus")?, lookup(&r.to, "bus")?));
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(_, _, a, b)) in edges.iter().enumerate() {
        if a == b {
            return Err(Error::NotRadial(format!("self loop at bus `{}`", model.buses[a].id)));
        }
        adj[a].push(e);
        adj[b].push(e);
    }

    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut used = vec![false; edges.len()];
    let mut children = vec![Vec::new(); n];
    let mut branches = Vec::with_capacity(edges.len());
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([source]);
    seen[source] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &e in &adj[u] {
            if used[e] {
                continue;
            }
            used[e] = true;
            let (kind, element, a, b) = edges[e];
            let v = if a == u { b } else { a };
            if seen[v] {
                return Err(Error::NotRadial(format!(
                    "cycle closes at bus `{}`",
                    model.buses[v].id
                )));
            }
            let (id, phases, z, ratio) = match kind {
                BranchKind::Line => {
                    let l = &model.lines[element];
                    (l.id.clone(), l.phases, l.z.clone(), None)
                }
                BranchKind::Regulator => {
                    let r = &model.regulators[element];
                    if a != u {
                        return Err(Error::InvalidModel(format!(
                            "regulator `{}` points toward the source",
                            r.id
                        )));
                    }
                    (r.id.clone(), r.phases, r.z.clone(), Some(r.ratio()))
                }
            };
            seen[v] = true;
            let bi = branches.len();
            branches.push(Branch { kind, element, id, from: u, to: v, phases, z, ratio });
            parent[v] = Some(bi);
            children[u].push(bi);
            queue.push_back(v);
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected(model.buses[i].id.clone()));
    }

    let mut gens_at = vec![Vec::new(); n];
    for (g, gen) in model.generators.iter().enumerate() {
        gens_at[lookup(&gen.bus, "bus")?].push(g);
    }
    let mut down = gens_at.clone();
    for &u in order.iter().rev() {
        if let Some(b) = parent[u] {
            let p = branches[b].from;
            let below = down[u].clone();
            down[p].extend(below);
        }
    }
    for d in &mut down {
        d.sort_unstable();
    }

    Ok(TopologyOrder {
        bus_ids: model.buses.iter().map(|b| b.id.clone()).collect(),
        bus_phases: model.buses.iter().map(|b| b.phases).collect(),
        source,
        order,
        parent,
        children,
        branches,
        gens_at,
        down,
        index,
    })
}
