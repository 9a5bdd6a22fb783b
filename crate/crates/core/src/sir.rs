//! Exact sampling of the SIR continuous-time Markov chain.
//!
//! Every susceptible vertex with `k` infected neighbors becomes infected at
//! rate `λk`, and every infected vertex recovers at rate `μ`. Three samplers
//! are provided:
//!
//! * [`simulate`]: event queue (next-reaction). When a vertex is infected it
//!   draws its recovery time and one candidate infection time per
//!   susceptible neighbor; a candidate fires only if it precedes the
//!   recovery and the target is still susceptible.
//! * [`simulate_gillespie`]: aggregate-rate (direct method) with total rate
//!   `λ·e(I, S) + μ|I|`. Slower, kept as an independent check on the first.
//! * [`simulate_tree`]: the event-queue sampler on the infinite tree in which
//!   every vertex has `κ` children, materialized when their parent is
//!   infected.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Range;

use rand::Rng;
use thiserror::Error;

use crate::graph::Graph;
use crate::rng;

/// Materialized tree vertices beyond which [`simulate_tree`] gives up.
pub const TREE_SAFETY_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SirError {
    #[error("rates must be finite, nonnegative and not both zero (lambda={lambda}, mu={mu})")]
    InvalidRates { lambda: f64, mu: f64 },
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("patient zero {0} is not a vertex")]
    PatientZeroOutOfRange(usize),
    #[error("time {t} lies beyond the resolved horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },
    #[error("trajectory has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no vertex is ever infected")]
    NoInfection,
    #[error("earliest infection time is shared by vertices {0} and {1}")]
    TiedPatientZero(usize, usize),
    #[error("tree needs at least one child per vertex")]
    InvalidKappa,
    #[error("tree simulation needs a finite horizon or a size cap")]
    NoStopCondition,
    #[error("trajectory invariant violated at vertex {vertex}: {what}")]
    Invalid { vertex: usize, what: &'static str },
}

/// Infection and recovery rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams {
    lambda: f64,
    mu: f64,
}

impl SirParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, SirError> {
        let ok = lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu >= 0.0;
        if !ok || lambda + mu == 0.0 {
            return Err(SirError::InvalidRates { lambda, mu });
        }
        Ok(Self { lambda, mu })
    }

    /// Infection rate per susceptible–infected edge.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Recovery rate per infected vertex.
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// An event time as seen by a (possibly truncated) sample path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stamp {
    /// The event happens at this time.
    At(f64),
    /// The event never happens.
    Never,
    /// Not determined by the sampled portion of the path.
    Unresolved,
}

impl Stamp {
    /// `At(t)` for finite `t`, `Never` for `+∞`.
    pub fn from_time(t: f64) -> Self {
        if t.is_finite() {
            Stamp::At(t)
        } else {
            Stamp::Never
        }
    }

    pub fn time(self) -> Option<f64> {
        match self {
            Stamp::At(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_at_most(self, t: f64) -> bool {
        matches!(self, Stamp::At(s) if s <= t)
    }
}

/// Who starts the epidemic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatientZero {
    Vertex(usize),
    /// Uniform over all vertices, drawn from the simulation stream.
    Uniform,
}

/// Per-vertex infection and recovery times of one sample path.
///
/// Everything at or before `horizon` is resolved. Later stamps are present
/// only where the sampler has already determined them (the tree sampler
/// knows its frontier infection times in advance); everything else later
/// than the horizon is [`Stamp::Unresolved`]. A horizon of `+∞` means the
/// path is complete.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    infection: Vec<Stamp>,
    recovery: Vec<Stamp>,
    horizon: f64,
    patient_zero: usize,
}

impl Trajectory {
    /// Assembles a trajectory from raw parts. Use [`Trajectory::validate`] to
    /// check it against a graph.
    pub fn from_parts(
        infection: Vec<Stamp>,
        recovery: Vec<Stamp>,
        horizon: f64,
        patient_zero: usize,
    ) -> Result<Self, SirError> {
        if recovery.len() != infection.len() {
            return Err(SirError::LengthMismatch {
                expected: infection.len(),
                got: recovery.len(),
            });
        }
        if patient_zero >= infection.len() {
            return Err(SirError::PatientZeroOutOfRange(patient_zero));
        }
        Ok(Self {
            infection,
            recovery,
            horizon,
            patient_zero,
        })
    }

    /// Observed infection times only (recoveries unknown). Patient zero is
    /// the unique earliest infection; ties are rejected.
    pub fn from_infection_times(infection: Vec<Stamp>, horizon: f64) -> Result<Self, SirError> {
        let mut best: Option<(usize, f64)> = None;
        let mut tie = None;
        for (v, stamp) in infection.iter().enumerate() {
            if let Stamp::At(t) = *stamp {
                match best {
                    Some((_, b)) if t > b => {}
                    Some((u, b)) if t == b => tie = Some((u, v)),
                    _ => {
                        best = Some((v, t));
                        tie = None;
                    }
                }
            }
        }
        let (patient_zero, _) = best.ok_or(SirError::NoInfection)?;
        if let Some((u, v)) = tie {
            return Err(SirError::TiedPatientZero(u, v));
        }
        let recovery = vec![Stamp::Unresolved; infection.len()];
        Self::from_parts(infection, recovery, horizon, patient_zero)
    }

    pub fn num_vertices(&self) -> usize {
        self.infection.len()
    }

    pub fn patient_zero(&self) -> usize {
        self.patient_zero
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn infection_time(&self, v: usize) -> Stamp {
        self.infection[v]
    }

    pub fn recovery_time(&self, v: usize) -> Stamp {
        self.recovery[v]
    }

    pub fn infection_times(&self) -> &[Stamp] {
        &self.infection
    }

    pub fn recovery_times(&self) -> &[Stamp] {
        &self.recovery
    }

    /// Number of vertices ever infected (known so far).
    pub fn final_size(&self) -> usize {
        self.infection.iter().filter(|s| s.time().is_some()).count()
    }

    /// `U(t)`: vertices infected at or before `t`, in ascending order.
    pub fn unsusceptible_at(&self, t: f64) -> Result<Vec<usize>, SirError> {
        self.check_resolved(t)?;
        Ok((0..self.infection.len())
            .filter(|&v| self.infection[v].is_at_most(t))
            .collect())
    }

    /// Number of vertices recovered at or before `t`.
    pub fn recovered_by(&self, t: f64) -> Result<usize, SirError> {
        self.check_resolved(t)?;
        Ok(self.recovery.iter().filter(|s| s.is_at_most(t)).count())
    }

    fn check_resolved(&self, t: f64) -> Result<(), SirError> {
        if t > self.horizon {
            return Err(SirError::BeyondHorizon {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// `inf{t : |U(t)| ≥ k}`, the `k`-th smallest infection time.
    pub fn first_time_u_reaches(&self, k: usize) -> Stamp {
        if k == 0 {
            return Stamp::At(0.0);
        }
        let mut times: Vec<f64> = self.infection.iter().filter_map(|s| s.time()).collect();
        if times.len() >= k {
            let (_, kth, _) = times.select_nth_unstable_by(k - 1, f64::total_cmp);
            if *kth <= self.horizon {
                return Stamp::At(*kth);
            }
            return Stamp::Unresolved;
        }
        if self.horizon == f64::INFINITY {
            Stamp::Never
        } else {
            Stamp::Unresolved
        }
    }

    /// Copy with every time multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |s: &Stamp| match *s {
            Stamp::At(t) => Stamp::At(t * factor),
            other => other,
        };
        Self {
            infection: self.infection.iter().map(scale).collect(),
            recovery: self.recovery.iter().map(scale).collect(),
            horizon: self.horizon * factor,
            patient_zero: self.patient_zero,
        }
    }

    /// Checks the sample-path invariants against the graph the path lives on.
    pub fn validate(&self, g: &Graph) -> Result<(), SirError> {
        let n = g.num_vertices();
        if self.infection.len() != n {
            return Err(SirError::LengthMismatch {
                expected: n,
                got: self.infection.len(),
            });
        }
        let invalid = |vertex, what| Err(SirError::Invalid { vertex, what });
        if self.infection[self.patient_zero] != Stamp::At(0.0) {
            return invalid(self.patient_zero, "patient zero not infected at time 0");
        }
        for v in 0..n {
            let infected = match self.infection[v] {
                Stamp::At(t) => t,
                Stamp::Never | Stamp::Unresolved => {
                    if self.recovery[v] != Stamp::Unresolved && self.recovery[v] != Stamp::Never {
                        return invalid(v, "recovery without infection");
                    }
                    continue;
                }
            };
            if !(0.0..=f64::MAX).contains(&infected) {
                return invalid(v, "negative infection time");
            }
            if let Stamp::At(r) = self.recovery[v] {
                if r <= infected {
                    return invalid(v, "recovery not after infection");
                }
            }
            if v == self.patient_zero {
                continue;
            }
            let has_source = g.neighbors(v).iter().any(|&u| match self.infection[u] {
                Stamp::At(s) if s < infected => match self.recovery[u] {
                    Stamp::At(r) => r > infected,
                    Stamp::Never => true,
                    Stamp::Unresolved => true,
                },
                _ => false,
            });
            if !has_source {
                return invalid(v, "infected without an infectious neighbor");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    vertex: usize,
    recovery: bool,
}

// Reversed so that `BinaryHeap` pops the earliest event; ties go to the
// earlier insertion.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

#[derive(Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, vertex: usize, recovery: bool) {
        self.heap.push(Event {
            time,
            seq: self.seq,
            vertex,
            recovery,
        });
        self.seq += 1;
    }

    fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.time)
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

fn pick_patient_zero<R: Rng + ?Sized>(
    g: &Graph,
    patient_zero: PatientZero,
    rng: &mut R,
) -> Result<usize, SirError> {
    let n = g.num_vertices();
    if n == 0 {
        return Err(SirError::EmptyGraph);
    }
    match patient_zero {
        PatientZero::Vertex(v) if v < n => Ok(v),
        PatientZero::Vertex(v) => Err(SirError::PatientZeroOutOfRange(v)),
        PatientZero::Uniform => Ok(rng::index(rng, n)),
    }
}

/// Event-queue sampler. Runs until `horizon` (`f64::INFINITY` for "until
/// nothing more can happen").
pub fn simulate<R: Rng + ?Sized>(
    g: &Graph,
    params: SirParams,
    patient_zero: PatientZero,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory, SirError> {
    let source = pick_patient_zero(g, patient_zero, rng)?;
    let n = g.num_vertices();
    let mut state = NextReaction {
        infection: vec![Stamp::Unresolved; n],
        recovery: vec![Stamp::Unresolved; n],
        queue: EventQueue::default(),
    };
    state.infect(g, params, source, 0.0, rng);

    while let Some(t) = state.queue.peek_time() {
        if t > horizon {
            break;
        }
        let event = state.queue.pop().expect("peeked");
        // Recovery stamps are written at infection; their events only mark
        // that something is still pending.
        if !event.recovery && state.infection[event.vertex] == Stamp::Unresolved {
            state.infect(g, params, event.vertex, t, rng);
        }
    }

    let NextReaction {
        mut infection,
        recovery,
        queue,
    } = state;
    let complete = queue.peek_time().is_none();
    if complete {
        for s in infection.iter_mut().filter(|s| **s == Stamp::Unresolved) {
            *s = Stamp::Never;
        }
    }
    Ok(Trajectory {
        infection,
        recovery,
        horizon: if complete { f64::INFINITY } else { horizon },
        patient_zero: source,
    })
}

struct NextReaction {
    infection: Vec<Stamp>,
    recovery: Vec<Stamp>,
    queue: EventQueue,
}

impl NextReaction {
    fn infect<R: Rng + ?Sized>(&mut self, g: &Graph, params: SirParams, v: usize, t: f64, rng: &mut R) {
        self.infection[v] = Stamp::At(t);
        let recovers = t + rng::exp(rng, params.mu);
        self.recovery[v] = Stamp::from_time(recovers);
        if recovers.is_finite() {
            self.queue.push(recovers, v, true);
        }
        for &w in g.neighbors(v) {
            if self.infection[w] == Stamp::Unresolved {
                let candidate = t + rng::exp(rng, params.lambda);
                if candidate < recovers {
                    self.queue.push(candidate, w, false);
                }
            }
        }
    }
}

/// Aggregate-rate sampler with the same contract as [`simulate`].
///
/// Each step costs `O(n)`; intended as an oracle on small graphs.
pub fn simulate_gillespie<R: Rng + ?Sized>(
    g: &Graph,
    params: SirParams,
    patient_zero: PatientZero,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory, SirError> {
    let source = pick_patient_zero(g, patient_zero, rng)?;
    let n = g.num_vertices();
    let mut infection = vec![Stamp::Unresolved; n];
    let mut recovery = vec![Stamp::Unresolved; n];
    // Infected-neighbor count of each susceptible vertex.
    let mut pressure = vec![0u64; n];
    let mut susceptible = vec![true; n];
    let mut infected: Vec<usize> = Vec::new();
    let mut si_edges: u64 = 0;

    let mut t = 0.0;
    let mut complete = false;
    let mut infect = |v: usize,
                      t: f64,
                      infected: &mut Vec<usize>,
                      pressure: &mut [u64],
                      susceptible: &mut [bool],
                      si_edges: &mut u64| {
        infection[v] = Stamp::At(t);
        susceptible[v] = false;
        *si_edges -= pressure[v];
        pressure[v] = 0;
        infected.push(v);
        for &w in g.neighbors(v) {
            if susceptible[w] {
                pressure[w] += 1;
                *si_edges += 1;
            }
        }
    };
    infect(source, 0.0, &mut infected, &mut pressure, &mut susceptible, &mut si_edges);

    loop {
        let infection_rate = params.lambda * si_edges as f64;
        let recovery_rate = params.mu * infected.len() as f64;
        let total = infection_rate + recovery_rate;
        if total <= 0.0 {
            complete = true;
            break;
        }
        t += rng::exp(rng, total);
        if t > horizon {
            break;
        }
        if rng::unit(rng) * total < recovery_rate {
            let slot = rng::index(rng, infected.len());
            let v = infected.swap_remove(slot);
            recovery[v] = Stamp::At(t);
            for &w in g.neighbors(v) {
                if susceptible[w] {
                    pressure[w] -= 1;
                    si_edges -= 1;
                }
            }
        } else {
            let mut target = rng.random_range(0..si_edges);
            let v = (0..n)
                .find(|&u| {
                    if target < pressure[u] {
                        true
                    } else {
                        target -= pressure[u];
                        false
                    }
                })
                .expect("si_edges counts the pressures");
            infect(v, t, &mut infected, &mut pressure, &mut susceptible, &mut si_edges);
        }
    }

    if complete {
        for v in 0..n {
            if infection[v] == Stamp::Unresolved {
                infection[v] = Stamp::Never;
            } else if recovery[v] == Stamp::Unresolved {
                // Only reachable with mu = 0.
                recovery[v] = Stamp::Never;
            }
        }
    }
    Ok(Trajectory {
        infection,
        recovery,
        horizon: if complete { f64::INFINITY } else { horizon },
        patient_zero: source,
    })
}

/// Lazily materialized tree: every infected vertex owns `κ` children with
/// consecutive ids. The root is vertex 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeArena {
    kappa: usize,
    parent: Vec<Option<usize>>,
    first_child: Vec<Option<usize>>,
}

impl TreeArena {
    fn new(kappa: usize) -> Self {
        Self {
            kappa,
            parent: vec![None],
            first_child: vec![None],
        }
    }

    fn materialize_children(&mut self, v: usize) -> Range<usize> {
        let first = self.parent.len();
        self.first_child[v] = Some(first);
        for _ in 0..self.kappa {
            self.parent.push(Some(v));
            self.first_child.push(None);
        }
        first..first + self.kappa
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn num_vertices(&self) -> usize {
        self.parent.len()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    /// Children of `v`, if they have been materialized.
    pub fn children(&self, v: usize) -> Option<Range<usize>> {
        self.first_child[v].map(|c| c..c + self.kappa)
    }

    pub fn depth(&self, mut v: usize) -> usize {
        let mut depth = 0;
        while let Some(p) = self.parent[v] {
            v = p;
            depth += 1;
        }
        depth
    }

    /// The materialized part as a finite graph with the same vertex ids.
    pub fn to_graph(&self) -> Graph {
        let edges = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (p, v)));
        Graph::from_edges(self.num_vertices(), edges).expect("a tree is simple")
    }
}

/// Stop rule for [`simulate_tree`]; at least one field must be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeStop {
    pub horizon: f64,
    /// Stop as soon as `|U| >= u_cap`.
    pub u_cap: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeStopReason {
    Horizon,
    UCap,
    /// No infected vertex left: `I = ∅`.
    Absorbed,
    /// More than [`TREE_SAFETY_CAP`] vertices were materialized.
    SafetyCap,
}

#[derive(Debug, Clone)]
pub struct TreeRun {
    pub trajectory: Trajectory,
    pub arena: TreeArena,
    pub stop: TreeStopReason,
}

/// SIR on the infinite tree with `kappa` children per vertex, started from
/// an infected root.
///
/// On a tree each vertex can only be infected by its parent, so a child's
/// infection time (or `Never`) is fixed as soon as the parent's clocks are
/// drawn. Those stamps are recorded even when they fall beyond the stopping
/// time; recoveries of vertices not yet infected stay unresolved.
pub fn simulate_tree<R: Rng + ?Sized>(
    kappa: usize,
    params: SirParams,
    stop: TreeStop,
    rng: &mut R,
) -> Result<TreeRun, SirError> {
    if kappa == 0 {
        return Err(SirError::InvalidKappa);
    }
    if stop.horizon == f64::INFINITY && stop.u_cap.is_none() {
        return Err(SirError::NoStopCondition);
    }
    let u_cap = stop.u_cap.unwrap_or(usize::MAX);
    let mut tree = TreeState {
        arena: TreeArena::new(kappa),
        infection: vec![Stamp::At(0.0)],
        recovery: vec![Stamp::Unresolved],
        queue: EventQueue::default(),
    };
    tree.infect(params, 0, 0.0, rng);

    let mut unsusceptible = 1usize;
    let (reason, horizon) = if unsusceptible >= u_cap {
        (TreeStopReason::UCap, 0.0)
    } else {
        loop {
            let Some(event) = tree.queue.pop() else {
                break (TreeStopReason::Absorbed, f64::INFINITY);
            };
            if event.time > stop.horizon {
                break (TreeStopReason::Horizon, stop.horizon);
            }
            tree.infect(params, event.vertex, event.time, rng);
            unsusceptible += 1;
            if unsusceptible >= u_cap {
                break (TreeStopReason::UCap, event.time);
            }
            if tree.arena.num_vertices() > TREE_SAFETY_CAP {
                break (TreeStopReason::SafetyCap, event.time);
            }
        }
    };

    let TreeState {
        arena,
        infection,
        recovery,
        ..
    } = tree;
    Ok(TreeRun {
        trajectory: Trajectory {
            infection,
            recovery,
            horizon,
            patient_zero: 0,
        },
        arena,
        stop: reason,
    })
}

struct TreeState {
    arena: TreeArena,
    infection: Vec<Stamp>,
    recovery: Vec<Stamp>,
    queue: EventQueue,
}

impl TreeState {
    fn infect<R: Rng + ?Sized>(&mut self, params: SirParams, v: usize, t: f64, rng: &mut R) {
        let recovers = t + rng::exp(rng, params.mu);
        self.recovery[v] = Stamp::from_time(recovers);
        for child in self.arena.materialize_children(v) {
            let candidate = t + rng::exp(rng, params.lambda);
            if candidate < recovers {
                self.infection.push(Stamp::At(candidate));
                self.queue.push(candidate, child, false);
            } else {
                self.infection.push(Stamp::Never);
            }
            self.recovery.push(Stamp::Unresolved);
        }
    }
}
