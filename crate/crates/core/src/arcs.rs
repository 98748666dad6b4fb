//! Replay of the open/closed arc structure during one placement pass.
//!
//! Symbols are placed in the order `l = n, n − 1, ..., 1`; placing symbol `l`
//! at place `Y_l` links `l → Y_l`. Before any placement every point is its
//! own open arc. An open arc `(a_1, ..., a_s)` has all points but the tail
//! `a_s` at or above the current step, its head `a_1` still unused as a
//! place, and `Y_{a_i} = a_{i+1}`. Placing `l` either closes the arc whose
//! head is `Y_l` and tail is `l`, or appends the arc headed by `Y_l` to the
//! arc tailed by `l`. After the last step the closed arcs are exactly the
//! cycles of the output permutation, traversed along `σ⁻¹`.
//!
//! Arc membership is kept in a union-find whose roots carry the arc's head,
//! tail and open/closed state; the ordered point sequences are recovered from
//! the `l → Y_l` links only when they are asked for.

use serde::Serialize;

use crate::error::{MallowsError, Result};
use crate::permutation::Permutation;
use crate::sampler::{counts_from_bounds, Bounds, PlacementTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcEventKind {
    Merge,
    Close,
}

/// One step transition. Arcs are identified by their head at the time of the
/// event; a merge lists the arc tailed by `l` first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArcEvent {
    pub step: usize,
    pub kind: ArcEventKind,
    pub arc_ids: Vec<usize>,
    /// Head and tail of the resulting arc.
    pub head: usize,
    pub tail: usize,
    /// Ordered points of the resulting arc.
    pub arc: Vec<usize>,
}

/// Read-only view of the arc containing a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArcView {
    pub head: usize,
    pub tail: usize,
    pub closed: bool,
    pub len: usize,
}

#[derive(Debug, Clone)]
pub struct ArcTracker {
    n: usize,
    b: Vec<f64>,
    /// The tracker describes the arcs at this step (`n + 1` down to `1`).
    step: usize,
    parent: Vec<usize>,
    // per-root data; index 0 unused
    head: Vec<usize>,
    tail: Vec<usize>,
    size: Vec<usize>,
    closed: Vec<bool>,
    /// `link[k] = Y_k` once symbol `k` is placed, else 0.
    link: Vec<usize>,
    used: Vec<bool>,
    log: Option<Vec<ArcEvent>>,
}

impl ArcTracker {
    /// Tracker at step `n + 1`: every point is a singleton open arc.
    pub fn new(b: &[f64]) -> Result<Self> {
        counts_from_bounds(b)?;
        let n = b.len();
        Ok(ArcTracker {
            n,
            b: b.to_vec(),
            step: n + 1,
            parent: (0..=n).collect(),
            head: (0..=n).collect(),
            tail: (0..=n).collect(),
            size: vec![1; n + 1],
            closed: vec![false; n + 1],
            link: vec![0; n + 1],
            used: vec![false; n + 1],
            log: None,
        })
    }

    /// Turns on the event log.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn events(&self) -> Option<&[ArcEvent]> {
        self.log.as_deref()
    }

    pub fn into_events(self) -> Option<Vec<ArcEvent>> {
        self.log
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn find_const(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    fn check_point(&self, x: usize) -> Result<()> {
        if x == 0 || x > self.n {
            Err(MallowsError::IndexOutOfRange {
                index: x,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn arc_of(&self, x: usize) -> Result<ArcView> {
        self.check_point(x)?;
        let r = self.find_const(x);
        Ok(ArcView {
            head: self.head[r],
            tail: self.tail[r],
            closed: self.closed[r],
            len: self.size[r],
        })
    }

    /// Points of an open arc from its head to its tail.
    fn open_sequence(&self, head: usize, tail: usize) -> Vec<usize> {
        let mut seq = vec![head];
        let mut cur = head;
        while cur != tail {
            cur = self.link[cur];
            seq.push(cur);
        }
        seq
    }

    /// Points of a closed arc, rotated to start at its minimum.
    fn closed_sequence(&self, start: usize) -> Vec<usize> {
        let mut seq = vec![start];
        let mut cur = self.link[start];
        while cur != start {
            seq.push(cur);
            cur = self.link[cur];
        }
        let min_pos = seq
            .iter()
            .enumerate()
            .min_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .unwrap();
        seq.rotate_left(min_pos);
        seq
    }

    fn roots(&self) -> Vec<usize> {
        (1..=self.n).filter(|&x| self.parent[x] == x).collect()
    }

    /// Open arcs as ordered sequences, sorted by tail.
    pub fn open_arcs(&self) -> Vec<Vec<usize>> {
        let mut arcs: Vec<_> = self
            .roots()
            .into_iter()
            .filter(|&r| !self.closed[r])
            .map(|r| self.open_sequence(self.head[r], self.tail[r]))
            .collect();
        arcs.sort_by_key(|a| *a.last().unwrap());
        arcs
    }

    /// Closed arcs, each starting at its minimum, sorted by that minimum.
    pub fn closed_arcs(&self) -> Vec<Vec<usize>> {
        let mut arcs: Vec<_> = self
            .roots()
            .into_iter()
            .filter(|&r| self.closed[r])
            .map(|r| self.closed_sequence(self.head[r]))
            .collect();
        arcs.sort_by_key(|a| a[0]);
        arcs
    }

    /// Applies the step-`l` transition with `Y_l = y`.
    pub fn transition(&mut self, l: usize, y: usize) -> Result<()> {
        if l + 1 != self.step {
            return Err(MallowsError::InvalidArgument(format!(
                "tracker is at step {}, cannot apply step {l}",
                self.step
            )));
        }
        self.check_point(y)?;
        if self.used[y] {
            return Err(MallowsError::InvalidArgument(format!(
                "place {y} was already chosen"
            )));
        }
        if !(self.b[y - 1] >= l as f64) {
            return Err(MallowsError::InvalidArgument(format!(
                "place {y} has cutoff {} below symbol {l}",
                self.b[y - 1]
            )));
        }
        let ra = self.find(l);
        let rc = self.find(y);
        if self.closed[ra] || self.tail[ra] != l {
            return Err(MallowsError::InvariantViolation(format!(
                "point {l} is not the tail of an open arc at step {}",
                self.step
            )));
        }
        if self.closed[rc] || self.head[rc] != y {
            return Err(MallowsError::InvariantViolation(format!(
                "place {y} is not the head of an open arc at step {}",
                self.step
            )));
        }

        self.link[l] = y;
        self.used[y] = true;
        self.step = l;

        let (kind, arc_ids, root) = if ra == rc {
            self.closed[ra] = true;
            (ArcEventKind::Close, vec![y], ra)
        } else {
            let (head, tail) = (self.head[ra], self.tail[rc]);
            let ids = vec![head, y];
            let (big, small) = if self.size[ra] >= self.size[rc] {
                (ra, rc)
            } else {
                (rc, ra)
            };
            self.parent[small] = big;
            self.size[big] += self.size[small];
            self.head[big] = head;
            self.tail[big] = tail;
            (ArcEventKind::Merge, ids, big)
        };

        if self.log.is_some() {
            let (head, tail) = (self.head[root], self.tail[root]);
            let arc = match kind {
                ArcEventKind::Close => self.closed_sequence(head),
                ArcEventKind::Merge => self.open_sequence(head, tail),
            };
            let (head, tail) = match kind {
                ArcEventKind::Close => (y, l),
                ArcEventKind::Merge => (head, tail),
            };
            let event = ArcEvent {
                step: l,
                kind,
                arc_ids,
                head,
                tail,
                arc,
            };
            if let Some(log) = &mut self.log {
                log.push(event);
            }
        }
        Ok(())
    }

    /// `(H'_l, H_l)` for the tracker at step `l + 1`: `H_l = {j ≤ l − 1 :
    /// b_j ≥ l}` and `H'_l` is the set of tails of open arcs whose head is a
    /// free place with cutoff at least `l`. Both sorted increasingly.
    pub fn available_heads(&self, l: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if l == 0 || l + 1 != self.step {
            return Err(MallowsError::InvariantViolation(format!(
                "available heads for step {l} requested at step {}",
                self.step
            )));
        }
        let lf = l as f64;
        let h: Vec<usize> = (1..l).filter(|&j| self.b[j - 1] >= lf).collect();
        let mut h_prime = Vec::new();
        for p in 1..=self.n {
            if self.used[p] || !(self.b[p - 1] >= lf) {
                continue;
            }
            let r = self.find_const(p);
            if self.closed[r] || self.head[r] != p {
                return Err(MallowsError::InvariantViolation(format!(
                    "free place {p} is not the head of an open arc"
                )));
            }
            h_prime.push(self.tail[r]);
        }
        h_prime.sort_unstable();
        Ok((h_prime, h))
    }

    /// Checks that the arcs at the current step partition `[n]` and satisfy
    /// the open/closed arc conditions.
    pub fn check_partition(&self) -> Result<()> {
        let l = self.step;
        let mut seen = vec![false; self.n + 1];
        let mut mark = |x: usize| -> Result<()> {
            if std::mem::replace(&mut seen[x], true) {
                Err(MallowsError::InvariantViolation(format!(
                    "point {x} lies in two arcs at step {l}"
                )))
            } else {
                Ok(())
            }
        };
        for arc in self.open_arcs() {
            let (&tail, body) = arc.split_last().unwrap();
            if tail >= l || body.iter().any(|&a| a < l) || self.used[arc[0]] {
                return Err(MallowsError::InvariantViolation(format!(
                    "malformed open arc {arc:?} at step {l}"
                )));
            }
            for &a in &arc {
                mark(a)?;
            }
        }
        for arc in self.closed_arcs() {
            if arc.iter().any(|&a| a < l) {
                return Err(MallowsError::InvariantViolation(format!(
                    "malformed closed arc {arc:?} at step {l}"
                )));
            }
            for &a in &arc {
                mark(a)?;
            }
        }
        if let Some(x) = (1..=self.n).find(|&x| !seen[x]) {
            return Err(MallowsError::InvariantViolation(format!(
                "point {x} is in no arc at step {l}"
            )));
        }
        Ok(())
    }
}

/// The walk `(W_t, Z_t)` following the tail of the arc containing `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackWalk {
    pub s: usize,
    /// `W_0, ..., W_T`.
    pub w: Vec<u8>,
    /// `Z_0, ..., Z_T`.
    pub z: Vec<usize>,
    /// `T`, the first `t` with `W_t = 0`.
    pub t_stop: usize,
    /// Whether every `Z_t` (for `t < T`, `t ≥ 1`) lies in `H_{Z_{t−1}}`.
    pub steps_in_heads: bool,
}

impl TrackWalk {
    /// `Z_{T−1}`, the minimum of the cycle through `s`.
    pub fn terminal(&self) -> usize {
        self.z[self.t_stop - 1]
    }
}

fn check_trace(bounds: &Bounds, trace: &PlacementTrace) -> Result<()> {
    if bounds.len() != trace.y.len() || trace.result.len() != trace.y.len() {
        return Err(MallowsError::SizeMismatch {
            left: bounds.len(),
            right: trace.y.len(),
        });
    }
    Ok(())
}

/// Replays a placement pass and records the tracking walk from `s`.
pub fn track_walk(s: usize, bounds: &Bounds, trace: &PlacementTrace) -> Result<TrackWalk> {
    check_trace(bounds, trace)?;
    let n = bounds.len();
    if s == 0 || s > n {
        return Err(MallowsError::IndexOutOfRange { index: s, n });
    }
    let mut tracker = ArcTracker::new(&bounds.b)?;
    let mut walk = TrackWalk {
        s,
        w: vec![1],
        z: vec![s],
        t_stop: 0,
        steps_in_heads: true,
    };
    for l in (1..=n).rev() {
        tracker.transition(l, trace.place_of(l))?;
        if l != *walk.z.last().unwrap() {
            continue;
        }
        let arc = tracker.arc_of(s)?;
        if arc.closed {
            walk.w.push(0);
            walk.z.push(l);
            walk.t_stop = walk.w.len() - 1;
            return Ok(walk);
        }
        let next = arc.tail;
        if !(next < l && bounds.cutoff(next) >= l as f64) {
            walk.steps_in_heads = false;
        }
        walk.w.push(1);
        walk.z.push(next);
    }
    Err(MallowsError::InvariantViolation(format!(
        "walk from {s} did not reach a closed arc"
    )))
}

/// Outcome of a fully checked replay.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    /// Number of steps at which the partition check failed.
    pub partition_violations: usize,
    /// Steps where `|H_l| = N_l − 1`, `|H'_l| = N_l` or `H'_l = H_l ∪ {l}` failed.
    pub head_set_violations: usize,
    /// Whether the final closed arcs match the output cycles.
    pub cycles_match: bool,
    pub messages: Vec<String>,
}

impl ReplayReport {
    pub fn violations(&self) -> usize {
        self.partition_violations + self.head_set_violations + usize::from(!self.cycles_match)
    }
}

/// Cycles of `σ` traversed along `σ⁻¹`, each starting at its minimum; this
/// is the orientation in which closed arcs list their points.
pub fn cycles_as_arcs(sigma: &Permutation) -> Vec<Vec<usize>> {
    sigma
        .cycle_decomposition()
        .into_iter()
        .map(|mut c| {
            c[1..].reverse();
            c
        })
        .collect()
}

/// Replays a placement pass checking, at every step, the arc partition and
/// the head-set identities against `N_l`, and at the end the closed arcs
/// against the cycles of the output.
pub fn replay_checked(bounds: &Bounds, trace: &PlacementTrace) -> Result<ReplayReport> {
    check_trace(bounds, trace)?;
    let n = bounds.len();
    let mut tracker = ArcTracker::new(&bounds.b)?;
    let mut report = ReplayReport::default();
    if let Err(e) = tracker.check_partition() {
        report.partition_violations += 1;
        report.messages.push(e.to_string());
    }
    for l in (1..=n).rev() {
        let (h_prime, h) = tracker.available_heads(l)?;
        let n_l = bounds.count(l);
        let mut union = h.clone();
        union.push(l);
        if h.len() + 1 != n_l || h_prime.len() != n_l || h_prime != union {
            report.head_set_violations += 1;
            report.messages.push(format!(
                "step {l}: |H| = {}, |H'| = {}, N = {n_l}, H' = {h_prime:?}, H = {h:?}",
                h.len(),
                h_prime.len()
            ));
        }
        tracker.transition(l, trace.place_of(l))?;
        if let Err(e) = tracker.check_partition() {
            report.partition_violations += 1;
            report.messages.push(e.to_string());
        }
    }
    report.cycles_match =
        tracker.open_arcs().is_empty() && tracker.closed_arcs() == cycles_as_arcs(&trace.result);
    if !report.cycles_match {
        report
            .messages
            .push("closed arcs differ from the output cycles".into());
    }
    Ok(report)
}

/// Full event log of a placement pass.
pub fn trace_events(bounds: &Bounds, trace: &PlacementTrace) -> Result<Vec<ArcEvent>> {
    check_trace(bounds, trace)?;
    let mut tracker = ArcTracker::new(&bounds.b)?.with_event_log();
    for l in (1..=bounds.len()).rev() {
        tracker.transition(l, trace.place_of(l))?;
    }
    Ok(tracker.into_events().unwrap_or_default())
}
