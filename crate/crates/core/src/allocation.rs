//! Sub-channel assignment for one communication round.
//!
//! An [`Assignment`] partitions the `S` orthogonal sub-channels among the
//! selected devices: every sub-channel has exactly one owner and every
//! selected device owns at least one. The round's upload time is
//! `Z · Σ_k 1/(Σ_{s∈S_k} c[k][s])`.
//!
//! Three allocators are provided: the coalition game (a local search that
//! moves or swaps single sub-channels while doing so strictly lowers the
//! upload time), an equal-count fairness baseline that ignores channel state,
//! and an exhaustive search for small instances.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::RateTable;
use crate::report;

/// Largest number of feasible partitions [`exhaustive_optimum`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Coalition,
    Fairness,
    Exhaustive,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Coalition => "coalition",
            Method::Fairness => "fairness",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coalition" => Ok(Method::Coalition),
            "fairness" => Ok(Method::Fairness),
            "exhaustive" => Ok(Method::Exhaustive),
            other => Err(Error::InvalidConfig(format!("unknown allocation method '{other}'"))),
        }
    }
}

/// Partition of sub-channels among selected devices.
///
/// Devices are held in ascending index order; `owner[s]` is the position in
/// that list of the device holding sub-channel `s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    selected: Vec<usize>,
    owner: Vec<usize>,
}

impl Assignment {
    /// Builds an assignment from explicit per-device channel sets.
    pub fn from_sets(selected: &[usize], channel_sets: &[Vec<usize>], subchannels: usize) -> Result<Self> {
        if selected.len() != channel_sets.len() {
            return Err(Error::InfeasibleAssignment(format!(
                "{} channel sets for {} devices",
                channel_sets.len(),
                selected.len()
            )));
        }
        let mut pairs: Vec<(usize, &Vec<usize>)> =
            selected.iter().copied().zip(channel_sets.iter()).collect();
        pairs.sort_by_key(|(d, _)| *d);
        let selected: Vec<usize> = pairs.iter().map(|(d, _)| *d).collect();
        let mut owner = vec![usize::MAX; subchannels];
        for (slot, (device, set)) in pairs.iter().enumerate() {
            for &s in set.iter() {
                if s >= subchannels {
                    return Err(Error::InfeasibleAssignment(format!(
                        "sub-channel {s} out of range for device {device}"
                    )));
                }
                if owner[s] != usize::MAX {
                    return Err(Error::InfeasibleAssignment(format!(
                        "sub-channel {s} assigned more than once"
                    )));
                }
                owner[s] = slot;
            }
        }
        let a = Self { selected, owner };
        a.validate()?;
        Ok(a)
    }

    fn from_owner(selected: Vec<usize>, owner: Vec<usize>) -> Self {
        Self { selected, owner }
    }

    /// Checks disjointness, full coverage and a non-empty set per device.
    pub fn validate(&self) -> Result<()> {
        if self.selected.is_empty() {
            return Err(Error::InfeasibleAssignment("no selected devices".into()));
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InfeasibleAssignment("selected devices must be distinct".into()));
        }
        let mut counts = vec![0usize; self.selected.len()];
        for (s, &slot) in self.owner.iter().enumerate() {
            if slot >= self.selected.len() {
                return Err(Error::InfeasibleAssignment(format!("sub-channel {s} is unassigned")));
            }
            counts[slot] += 1;
        }
        if let Some(slot) = counts.iter().position(|c| *c == 0) {
            return Err(Error::InfeasibleAssignment(format!(
                "device {} holds no sub-channel",
                self.selected[slot]
            )));
        }
        Ok(())
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn subchannels(&self) -> usize {
        self.owner.len()
    }

    /// Device holding sub-channel `s`.
    pub fn owner_of(&self, s: usize) -> usize {
        self.selected[self.owner[s]]
    }

    /// Sub-channels held by `device`, ascending.
    pub fn channels_of(&self, device: usize) -> Vec<usize> {
        match self.selected.iter().position(|d| *d == device) {
            Some(slot) => channels_of_slot(&self.owner, slot),
            None => Vec::new(),
        }
    }

    /// `(device, channels)` for every selected device.
    pub fn channel_sets(&self) -> Vec<(usize, Vec<usize>)> {
        (0..self.selected.len())
            .map(|slot| (self.selected[slot], channels_of_slot(&self.owner, slot)))
            .collect()
    }

    pub fn set_sizes(&self) -> Vec<usize> {
        let mut counts = vec![0; self.selected.len()];
        for &slot in &self.owner {
            counts[slot] += 1;
        }
        counts
    }
}

fn channels_of_slot(owner: &[usize], slot: usize) -> Vec<usize> {
    owner.iter().enumerate().filter(|(_, o)| **o == slot).map(|(s, _)| s).collect()
}

/// Upload time for an owner vector. Rates are summed per device in ascending
/// channel order so that every caller reproduces the same float.
fn total_time(
    owner: &[usize],
    selected: &[usize],
    table: &RateTable,
    z_bits: f64,
    sums: &mut Vec<f64>,
) -> Result<f64> {
    sums.clear();
    sums.resize(selected.len(), 0.0);
    for (s, &slot) in owner.iter().enumerate() {
        sums[slot] += table.get(selected[slot], s);
    }
    let mut total = 0.0;
    for (slot, &c) in sums.iter().enumerate() {
        if !(c > 0.0) {
            return Err(Error::ZeroRate { device: selected[slot] });
        }
        total += z_bits / c;
    }
    Ok(total)
}

fn check_against_table(assignment: &Assignment, table: &RateTable) -> Result<()> {
    assignment.validate()?;
    if assignment.subchannels() != table.subchannels() {
        return Err(Error::InfeasibleAssignment(format!(
            "assignment covers {} sub-channels, table has {}",
            assignment.subchannels(),
            table.subchannels()
        )));
    }
    if let Some(d) = assignment.selected.iter().find(|d| **d >= table.devices()) {
        return Err(Error::InfeasibleAssignment(format!("device {d} not in rate table")));
    }
    Ok(())
}

/// Total upload time of one round in seconds.
pub fn t_comp(assignment: &Assignment, table: &RateTable, z_bits: f64) -> Result<f64> {
    if !(z_bits > 0.0) {
        return Err(Error::InvalidParams(format!("model size must be positive, got {z_bits}")));
    }
    check_against_table(assignment, table)?;
    total_time(&assignment.owner, &assignment.selected, table, z_bits, &mut Vec::new())
}

fn normalize_selected(selected: &[usize], subchannels: usize) -> Result<Vec<usize>> {
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    if sel.len() != selected.len() || sel.is_empty() {
        return Err(Error::InfeasibleAssignment("selected devices must be distinct and non-empty".into()));
    }
    if subchannels < sel.len() {
        return Err(Error::TooFewChannels { devices: sel.len(), subchannels });
    }
    Ok(sel)
}

/// Deals sub-channels round-robin in index order, ignoring channel state.
pub fn fairness_assignment(selected: &[usize], subchannels: usize) -> Result<Assignment> {
    let sel = normalize_selected(selected, subchannels)?;
    let n = sel.len();
    Ok(Assignment::from_owner(sel, (0..subchannels).map(|s| s % n).collect()))
}

/// Random feasible start: one distinct random sub-channel per device, the
/// rest to uniformly random devices.
pub fn initial_assignment<R: Rng + ?Sized>(
    selected: &[usize],
    subchannels: usize,
    rng: &mut R,
) -> Result<Assignment> {
    let sel = normalize_selected(selected, subchannels)?;
    let n = sel.len();
    let mut order: Vec<usize> = (0..subchannels).collect();
    order.shuffle(rng);
    let mut owner = vec![0; subchannels];
    for (i, &s) in order.iter().enumerate() {
        owner[s] = if i < n { i } else { rng.random_range(0..n) };
    }
    Ok(Assignment::from_owner(sel, owner))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationOutcome {
    pub assignment: Assignment,
    pub t_comp_seconds: f64,
    /// Full sweeps performed (coalition) or partitions enumerated (exhaustive).
    pub iterations: usize,
    pub moves_accepted: usize,
    pub candidates_evaluated: usize,
    pub initial_t_comp: f64,
    /// Upload time after each accepted move.
    pub trace: Vec<f64>,
}

impl AllocationOutcome {
    fn fixed(assignment: Assignment, t: f64) -> Self {
        Self {
            assignment,
            t_comp_seconds: t,
            iterations: 0,
            moves_accepted: 0,
            candidates_evaluated: 0,
            initial_t_comp: t,
            trace: Vec::new(),
        }
    }
}

/// Evaluates the fairness baseline as an outcome.
pub fn fairness_outcome(table: &RateTable, selected: &[usize], z_bits: f64) -> Result<AllocationOutcome> {
    let a = fairness_assignment(selected, table.subchannels())?;
    let t = t_comp(&a, table, z_bits)?;
    Ok(AllocationOutcome::fixed(a, t))
}

/// When a candidate exchanges two sub-channels instead of moving one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapRule {
    /// Swap only if the current owner would otherwise be left empty.
    #[default]
    Donor,
    /// Also swap whenever the receiving device holds a single sub-channel.
    /// Such a device can then never grow beyond one sub-channel.
    DonorOrReceiver,
}

/// Coalition-game local search over sub-channel ownership.
///
/// Each sweep visits every sub-channel `s` in ascending order and, for every
/// selected device `k` other than the current owner `j`, builds a candidate:
/// if the [`SwapRule`] applies, the two devices swap `s` against a uniformly
/// chosen `s'` of `k`, otherwise `s` moves from `j` to `k`. A candidate
/// replaces the current structure only if it strictly lowers the upload time.
/// The search stops after a sweep with no accepted move.
///
/// Moves alone stall once every device holds a few sub-channels, since
/// trading two channels between such devices is never proposed. With
/// `exchange_on_reject` a rejected move is followed by the swap candidate,
/// so a sweep evaluates up to `2·S·K_SE` structures instead of `S·K_SE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoalitionGame {
    pub max_sweeps: usize,
    pub swap_rule: SwapRule,
    /// When a plain move is rejected, also try swapping `s` against a
    /// random `s'` of `k`.
    pub exchange_on_reject: bool,
}

impl Default for CoalitionGame {
    fn default() -> Self {
        Self { max_sweeps: 10_000, swap_rule: SwapRule::Donor, exchange_on_reject: true }
    }
}

impl CoalitionGame {
    pub fn run<R: Rng + ?Sized>(
        &self,
        table: &RateTable,
        selected: &[usize],
        z_bits: f64,
        rng: &mut R,
    ) -> Result<AllocationOutcome> {
        let init = initial_assignment(selected, table.subchannels(), rng)?;
        self.run_from(table, init, z_bits, rng)
    }

    pub fn run_from<R: Rng + ?Sized>(
        &self,
        table: &RateTable,
        initial: Assignment,
        z_bits: f64,
        rng: &mut R,
    ) -> Result<AllocationOutcome> {
        let initial_t = t_comp(&initial, table, z_bits)?;
        let Assignment { selected, mut owner } = initial;
        let n = selected.len();
        let mut counts = vec![0usize; n];
        for &slot in &owner {
            counts[slot] += 1;
        }

        let mut sums = Vec::with_capacity(n);
        let mut current = initial_t;
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut candidates = 0;
        let mut held: Vec<usize> = Vec::with_capacity(owner.len());

        loop {
            if sweeps == self.max_sweeps {
                return Err(Error::IterationCap { cap: self.max_sweeps });
            }
            sweeps += 1;
            let mut accepted = false;
            for s in 0..owner.len() {
                for k in 0..n {
                    let j = owner[s];
                    if k == j {
                        continue;
                    }
                    candidates += 1;
                    let swap_needed = match self.swap_rule {
                        SwapRule::Donor => counts[j] == 1,
                        SwapRule::DonorOrReceiver => counts[j] == 1 || counts[k] == 1,
                    };
                    if !swap_needed {
                        owner[s] = k;
                        let t = total_time(&owner, &selected, table, z_bits, &mut sums)?;
                        if t < current {
                            current = t;
                            trace.push(t);
                            accepted = true;
                            counts[j] -= 1;
                            counts[k] += 1;
                            continue;
                        }
                        owner[s] = j;
                        if !self.exchange_on_reject {
                            continue;
                        }
                        candidates += 1;
                    }
                    held.clear();
                    held.extend(owner.iter().enumerate().filter(|(_, o)| **o == k).map(|(c, _)| c));
                    let partner = held[rng.random_range(0..held.len())];
                    owner[s] = k;
                    owner[partner] = j;
                    let t = total_time(&owner, &selected, table, z_bits, &mut sums)?;
                    if t < current {
                        current = t;
                        trace.push(t);
                        accepted = true;
                    } else {
                        owner[s] = j;
                        owner[partner] = k;
                    }
                }
            }
            if !accepted {
                break;
            }
        }

        Ok(AllocationOutcome {
            assignment: Assignment::from_owner(selected, owner),
            t_comp_seconds: current,
            iterations: sweeps,
            moves_accepted: trace.len(),
            candidates_evaluated: candidates,
            initial_t_comp: initial_t,
            trace,
        })
    }
}

/// Coalition game with default settings from a random feasible start.
pub fn coalition_game<R: Rng + ?Sized>(
    table: &RateTable,
    selected: &[usize],
    z_bits: f64,
    rng: &mut R,
) -> Result<AllocationOutcome> {
    CoalitionGame::default().run(table, selected, z_bits, rng)
}

/// Number of surjections from `s` labelled channels onto `n` devices.
pub fn feasible_partitions(subchannels: usize, devices: usize) -> u128 {
    if devices == 0 || devices > subchannels {
        return 0;
    }
    // inclusion–exclusion: Σ (-1)^i C(n,i) (n-i)^S
    let mut total: i128 = 0;
    let mut binom: i128 = 1;
    for i in 0..=devices {
        let base = (devices - i) as i128;
        let term = binom.saturating_mul(base.saturating_pow(subchannels as u32));
        total = if i % 2 == 0 { total.saturating_add(term) } else { total.saturating_sub(term) };
        binom = binom * (devices - i) as i128 / (i + 1) as i128;
    }
    total.max(0) as u128
}

/// Enumerates every feasible partition and returns a minimiser (the first
/// found on ties).
pub fn exhaustive_optimum(table: &RateTable, selected: &[usize], z_bits: f64) -> Result<AllocationOutcome> {
    let subchannels = table.subchannels();
    let sel = normalize_selected(selected, subchannels)?;
    let partitions = feasible_partitions(subchannels, sel.len());
    if partitions > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge { partitions, limit: EXHAUSTIVE_LIMIT });
    }
    if let Some(d) = sel.iter().find(|d| **d >= table.devices()) {
        return Err(Error::InfeasibleAssignment(format!("device {d} not in rate table")));
    }

    struct Search<'a> {
        table: &'a RateTable,
        selected: &'a [usize],
        z_bits: f64,
        owner: Vec<usize>,
        counts: Vec<usize>,
        sums: Vec<f64>,
        best: Option<(f64, Vec<usize>)>,
        visited: usize,
    }

    impl Search<'_> {
        fn descend(&mut self, s: usize, empty: usize) -> Result<()> {
            let remaining = self.owner.len() - s;
            if remaining == 0 {
                self.visited += 1;
                let t = total_time(&self.owner, self.selected, self.table, self.z_bits, &mut self.sums)?;
                if self.best.as_ref().is_none_or(|(b, _)| t < *b) {
                    self.best = Some((t, self.owner.clone()));
                }
                return Ok(());
            }
            for slot in 0..self.counts.len() {
                // leave enough channels to fill every still-empty device
                let fills = self.counts[slot] == 0;
                let still_empty = empty - usize::from(fills);
                if remaining - 1 < still_empty {
                    continue;
                }
                self.owner[s] = slot;
                self.counts[slot] += 1;
                self.descend(s + 1, still_empty)?;
                self.counts[slot] -= 1;
            }
            Ok(())
        }
    }

    let n = sel.len();
    let mut search = Search {
        table,
        selected: &sel,
        z_bits,
        owner: vec![0; subchannels],
        counts: vec![0; n],
        sums: Vec::with_capacity(n),
        best: None,
        visited: 0,
    };
    search.descend(0, n)?;
    let visited = search.visited;
    let (t, owner) = search.best.expect("at least one feasible partition");
    let mut outcome = AllocationOutcome::fixed(Assignment::from_owner(sel, owner), t);
    outcome.iterations = visited;
    outcome.candidates_evaluated = visited;
    Ok(outcome)
}

/// Dispatches to the allocator named by `method`.
pub fn allocate<R: Rng + ?Sized>(
    method: Method,
    table: &RateTable,
    selected: &[usize],
    z_bits: f64,
    game: &CoalitionGame,
    rng: &mut R,
) -> Result<AllocationOutcome> {
    match method {
        Method::Coalition => game.run(table, selected, z_bits, rng),
        Method::Fairness => fairness_outcome(table, selected, z_bits),
        Method::Exhaustive => exhaustive_optimum(table, selected, z_bits),
    }
}

/// Writes `round,device,subchannel` rows.
pub fn write_assignments_csv(path: &Path, rounds: &[(u64, &Assignment)]) -> Result<()> {
    let mut w = report::writer(path)?;
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    w.write_record(["round", "device", "subchannel"]).map_err(err)?;
    for (round, a) in rounds {
        for s in 0..a.subchannels() {
            w.write_record([round.to_string(), a.owner_of(s).to_string(), s.to_string()]).map_err(err)?;
        }
    }
    report::finish(w, path)
}

/// Writes one `round,t_comp_s,iterations,method` row per round.
pub fn write_outcomes_csv(path: &Path, rounds: &[(u64, Method, &AllocationOutcome)]) -> Result<()> {
    let mut w = report::writer(path)?;
    let err = |source| Error::Csv { path: path.to_path_buf(), source };
    w.write_record(["round", "t_comp_s", "iterations", "method"]).map_err(err)?;
    for (round, method, o) in rounds {
        w.write_record([
            round.to_string(),
            report::fmt_f64(o.t_comp_seconds),
            o.iterations.to_string(),
            method.to_string(),
        ])
        .map_err(err)?;
    }
    report::finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, Stream};

    fn table(rows: Vec<Vec<f64>>) -> RateTable {
        RateTable::from_rows(0, rows).unwrap()
    }

    #[test]
    fn t_comp_two_devices() {
        let t = table(vec![vec![1e5, 1e5], vec![2e5, 2e5]]);
        let a = Assignment::from_sets(&[0, 1], &[vec![0], vec![1]], 2).unwrap();
        assert_eq!(t_comp(&a, &t, 1e5).unwrap(), 1.5);
        assert_eq!(t_comp(&a, &t, 2e5).unwrap(), 3.0);
    }

    #[test]
    fn t_comp_single_device_all_channels() {
        let t = table(vec![vec![3.0; 4]]);
        let a = Assignment::from_sets(&[0], &[vec![0, 1, 2, 3]], 4).unwrap();
        assert_eq!(t_comp(&a, &t, 12.0).unwrap(), 1.0);
    }

    #[test]
    fn infeasible_assignments_rejected() {
        assert!(Assignment::from_sets(&[0, 1], &[vec![0, 1], vec![1]], 2).is_err());
        assert!(Assignment::from_sets(&[0, 1], &[vec![0, 1], vec![]], 2).is_err());
        assert!(Assignment::from_sets(&[0, 1], &[vec![0], vec![1]], 3).is_err());
        assert!(Assignment::from_sets(&[0, 0], &[vec![0], vec![1]], 2).is_err());
        let t = table(vec![vec![1.0, 1.0]]);
        let a = Assignment::from_sets(&[3], &[vec![0, 1]], 2).unwrap();
        assert!(matches!(t_comp(&a, &t, 1.0), Err(Error::InfeasibleAssignment(_))));
    }

    #[test]
    fn fairness_sizes() {
        assert_eq!(fairness_assignment(&[0, 1], 4).unwrap().set_sizes(), vec![2, 2]);
        assert_eq!(fairness_assignment(&[0, 1, 2], 4).unwrap().set_sizes(), vec![2, 1, 1]);
        assert_eq!(fairness_assignment(&[5], 7).unwrap().set_sizes(), vec![7]);
        assert!(matches!(
            fairness_assignment(&[0, 1, 2], 2),
            Err(Error::TooFewChannels { devices: 3, subchannels: 2 })
        ));
    }

    #[test]
    fn initial_assignment_feasible_and_seeded() {
        for seed in 0..50 {
            let a =
                initial_assignment(&[2, 4, 9], 7, &mut derive_rng(seed, 0, 0, Stream::Allocation)).unwrap();
            a.validate().unwrap();
            let b =
                initial_assignment(&[2, 4, 9], 7, &mut derive_rng(seed, 0, 0, Stream::Allocation)).unwrap();
            assert_eq!(a, b);
        }
        let m = initial_assignment(&[0, 1, 2, 3], 4, &mut derive_rng(1, 0, 0, Stream::Allocation)).unwrap();
        assert_eq!(m.set_sizes(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn single_device_game_is_idle() {
        let t = table(vec![vec![1.0, 2.0, 3.0]]);
        let o = coalition_game(&t, &[0], 6.0, &mut derive_rng(0, 0, 0, Stream::Allocation)).unwrap();
        assert_eq!(o.moves_accepted, 0);
        assert_eq!(o.assignment.set_sizes(), vec![3]);
        assert_eq!(o.t_comp_seconds, 1.0);
    }

    #[test]
    fn game_matches_exhaustive_on_crafted_instance() {
        // device 0 fast on channels 0,1; device 1 fast on channel 2
        let t = table(vec![vec![10.0, 10.0, 1.0], vec![1.0, 1.0, 10.0]]);
        let best = exhaustive_optimum(&t, &[0, 1], 10.0).unwrap();
        assert_eq!(best.iterations, 6);
        assert_eq!(best.assignment.channels_of(0), vec![0, 1]);
        assert_eq!(best.assignment.channels_of(1), vec![2]);
        for seed in 0..20 {
            let o =
                coalition_game(&t, &[0, 1], 10.0, &mut derive_rng(seed, 0, 0, Stream::Allocation)).unwrap();
            assert_eq!(o.t_comp_seconds, best.t_comp_seconds);
        }
    }

    #[test]
    fn exchange_escapes_a_move_local_optimum() {
        let t = table(vec![vec![1.0; 4], vec![2.0, 2.0, 1.0, 1.0]]);
        let start = Assignment::from_sets(&[0, 1], &[vec![0, 1], vec![2, 3]], 4).unwrap();
        let moves_only = CoalitionGame { exchange_on_reject: false, ..CoalitionGame::default() };
        let o = moves_only
            .run_from(&t, start.clone(), 1.0, &mut derive_rng(0, 0, 0, Stream::Allocation))
            .unwrap();
        assert_eq!((o.moves_accepted, o.t_comp_seconds), (0, 1.0));
        let o = CoalitionGame::default()
            .run_from(&t, start, 1.0, &mut derive_rng(0, 0, 0, Stream::Allocation))
            .unwrap();
        assert!(o.t_comp_seconds < 1.0);
        assert_eq!(o.assignment.set_sizes(), vec![2, 2]);
    }

    #[test]
    fn receiver_guard_can_stall_single_channel_devices() {
        let t = table(vec![vec![10.0, 10.0, 1.0], vec![1.0, 1.0, 10.0]]);
        let start = Assignment::from_sets(&[0, 1], &[vec![0], vec![1, 2]], 3).unwrap();
        let printed = CoalitionGame {
            swap_rule: SwapRule::DonorOrReceiver,
            exchange_on_reject: false,
            ..CoalitionGame::default()
        };
        let o =
            printed.run_from(&t, start.clone(), 10.0, &mut derive_rng(0, 0, 0, Stream::Allocation)).unwrap();
        assert_eq!(o.moves_accepted, 0);
        let o = CoalitionGame::default()
            .run_from(&t, start, 10.0, &mut derive_rng(0, 0, 0, Stream::Allocation))
            .unwrap();
        assert_eq!(o.t_comp_seconds, 1.5);
    }

    #[test]
    fn two_by_two_reaches_optimum() {
        for seed in 0..50 {
            let mut rng = derive_rng(seed, 0, 0, Stream::Fading);
            let rows: Vec<Vec<f64>> =
                (0..2).map(|_| (0..2).map(|_| rng.random_range(1.0..10.0)).collect()).collect();
            let t = table(rows);
            let best = exhaustive_optimum(&t, &[0, 1], 1.0).unwrap();
            assert_eq!(best.iterations, 2);
            let o = coalition_game(&t, &[0, 1], 1.0, &mut rng).unwrap();
            assert_eq!(o.t_comp_seconds, best.t_comp_seconds);
        }
    }

    #[test]
    fn returned_time_recomputes_exactly() {
        let mut rng = derive_rng(9, 0, 0, Stream::Fading);
        let rows: Vec<Vec<f64>> =
            (0..6).map(|_| (0..12).map(|_| rng.random_range(1e5..3e6)).collect()).collect();
        let t = table(rows);
        let o = coalition_game(&t, &[0, 2, 3, 5], 1e6, &mut rng).unwrap();
        assert_eq!(t_comp(&o.assignment, &t, 1e6).unwrap(), o.t_comp_seconds);
        assert!(o.t_comp_seconds <= o.initial_t_comp);
        assert!(o.trace.windows(2).all(|w| w[1] < w[0]));
        assert!(o.candidates_evaluated <= o.iterations * 2 * 12 * 4);
    }

    #[test]
    fn iteration_cap_reported() {
        let t = table(vec![vec![10.0, 1.0, 1.0], vec![1.0, 1.0, 10.0]]);
        let start = Assignment::from_sets(&[0, 1], &[vec![2], vec![0, 1]], 3).unwrap();
        let game = CoalitionGame { max_sweeps: 1, ..CoalitionGame::default() };
        let r = game.run_from(&t, start, 1.0, &mut derive_rng(0, 0, 0, Stream::Allocation));
        assert!(matches!(r, Err(Error::IterationCap { cap: 1 })));
    }

    #[test]
    fn partition_counts() {
        assert_eq!(feasible_partitions(3, 2), 6);
        assert_eq!(feasible_partitions(2, 2), 2);
        assert_eq!(feasible_partitions(4, 1), 1);
        assert_eq!(feasible_partitions(6, 3), 540);
        assert_eq!(feasible_partitions(2, 3), 0);
    }

    #[test]
    fn exhaustive_enumerates_exactly_the_surjections() {
        let t = table(vec![vec![1.0; 6]; 3]);
        let o = exhaustive_optimum(&t, &[0, 1, 2], 1.0).unwrap();
        assert_eq!(o.iterations as u128, feasible_partitions(6, 3));
    }

    #[test]
    fn exhaustive_guard() {
        let t = table(vec![vec![1.0; 12]; 8]);
        assert!(matches!(
            exhaustive_optimum(&t, &(0..8).collect::<Vec<_>>(), 1.0),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn method_parsing() {
        for m in [Method::Coalition, Method::Fairness, Method::Exhaustive] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("random".parse::<Method>().is_err());
    }
}
