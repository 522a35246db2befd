use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::feature_io::{check_columns, csv_reader, record_line, Language, Position, Trial};

/// Step allowance (placements plus augmenting paths) before counterbalancing gives up.
pub const SEARCH_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentList {
    pub list_id: String,
    pub trial_ids: Vec<String>,
    pub participants: Vec<String>,
}

/// Lengths every list must have: `L` for all but the last, which takes the
/// remainder when `n·R` is not a multiple of `L`.
pub fn expected_list_lengths(n_trials: usize, list_size: usize, repetitions: usize) -> Vec<usize> {
    let total = n_trials * repetitions;
    if list_size == 0 || total == 0 {
        return Vec::new();
    }
    let lists = total.div_ceil(list_size);
    let mut lengths = vec![list_size; lists];
    lengths[lists - 1] = total - (lists - 1) * list_size;
    lengths
}

/// Dinic max-flow over small graphs; used to decide which placements carry
/// a first-position trial.
struct Flow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<i64>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

impl Flow {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            cursor: vec![0; nodes],
        }
    }

    fn add(&mut self, u: usize, v: usize, cap: i64) -> usize {
        let e = self.to.len();
        self.adj[u].push(e);
        self.to.push(v);
        self.cap.push(cap);
        self.adj[v].push(e + 1);
        self.to.push(u);
        self.cap.push(0);
        e
    }

    fn flow_on(&self, e: usize) -> i64 {
        self.cap[e ^ 1]
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: i64) -> i64 {
        if u == t {
            return pushed;
        }
        while self.cursor[u] < self.adj[u].len() {
            let e = self.adj[u][self.cursor[u]];
            let v = self.to[e];
            if self.cap[e] > 0 && self.level[v] == self.level[u] + 1 {
                let got = self.dfs(v, t, pushed.min(self.cap[e]));
                if got > 0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            self.cursor[u] += 1;
        }
        0
    }

    /// Augments until no path is left; each augmenting path costs one step.
    fn run(&mut self, s: usize, t: usize, steps: &mut u64) -> i64 {
        let mut total = 0;
        while self.bfs(s, t) {
            self.cursor.fill(0);
            loop {
                let got = self.dfs(s, t, i64::MAX);
                if got == 0 {
                    break;
                }
                *steps += 1;
                total += got;
            }
        }
        total
    }
}

/// Chooses `demand[c]` distinct lists for every contrast, always taking the
/// lists with the most room left. Fails only when no choice exists.
fn place(
    demand: &[usize],
    lengths: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>, usize> {
    let mut room = lengths.to_vec();
    let mut order: Vec<usize> = (0..demand.len()).collect();
    order.shuffle(rng);
    let mut placement = vec![Vec::new(); demand.len()];
    for c in order {
        let mut keyed: Vec<(usize, u32, usize)> = (0..room.len())
            .filter(|&l| room[l] > 0)
            .map(|l| (usize::MAX - room[l], rng.random(), l))
            .collect();
        if keyed.len() < demand[c] {
            return Err(c);
        }
        keyed.sort_unstable();
        for &(_, _, l) in &keyed[..demand[c]] {
            room[l] -= 1;
            placement[c].push(l);
        }
        placement[c].shuffle(rng);
    }
    Ok(placement)
}

/// Marks `firsts[c]` of each contrast's lists as first-position placements
/// so that every list ends with between `⌊len/2⌋` and `⌈len/2⌉` of them.
/// Lower bounds are met first and never undone by later augmentation.
fn label(
    placement: &[Vec<usize>],
    firsts: &[usize],
    lengths: &[usize],
    steps: &mut u64,
) -> Option<Vec<Vec<bool>>> {
    let n_c = placement.len();
    let (source, sink) = (0, n_c + lengths.len() + 1);
    let mut flow = Flow::new(sink + 1);
    let mut edges = Vec::with_capacity(n_c);
    for c in 0..n_c {
        flow.add(source, 1 + c, firsts[c] as i64);
        edges.push(
            placement[c]
                .iter()
                .map(|&l| flow.add(1 + c, 1 + n_c + l, 1))
                .collect::<Vec<_>>(),
        );
    }
    let mut sink_edges = Vec::with_capacity(lengths.len());
    for (l, &len) in lengths.iter().enumerate() {
        sink_edges.push(flow.add(1 + n_c + l, sink, (len / 2) as i64));
    }
    let lower: usize = lengths.iter().map(|len| len / 2).sum();
    if flow.run(source, sink, steps) != lower as i64 {
        return None;
    }
    for (&e, &len) in sink_edges.iter().zip(lengths) {
        flow.cap[e] += (len % 2) as i64;
    }
    let wanted: usize = firsts.iter().sum();
    if lower as i64 + flow.run(source, sink, steps) != wanted as i64 {
        return None;
    }
    Some(
        edges
            .iter()
            .map(|es| es.iter().map(|&e| flow.flow_on(e) == 1).collect())
            .collect(),
    )
}

/// Assigns every trial to `repetitions` lists of `list_size` trials so that
/// no list repeats a contrast and each list's correct positions are balanced
/// within one. Seeded greedy placement followed by augmenting-path repair of
/// the position labels; attempts are reseeded until [`SEARCH_BUDGET`] steps
/// have been spent.
pub fn counterbalance(
    trials: &[Trial],
    list_size: usize,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<ExperimentList>, DatasetError> {
    if list_size == 0 || repetitions == 0 {
        return Err(DatasetError::Infeasible(
            "list size and repetitions must be positive".into(),
        ));
    }
    if trials.is_empty() {
        return Ok(Vec::new());
    }
    let lengths = expected_list_lengths(trials.len(), list_size, repetitions);
    let n_lists = lengths.len();

    let mut contrast_ids: BTreeMap<(Language, &str), usize> = BTreeMap::new();
    for t in trials {
        let next = contrast_ids.len();
        contrast_ids.entry(t.contrast_key()).or_insert(next);
    }
    let mut members = vec![Vec::new(); contrast_ids.len()];
    for (i, t) in trials.iter().enumerate() {
        members[contrast_ids[&t.contrast_key()]].push(i);
    }
    let demand: Vec<usize> = members.iter().map(|m| m.len() * repetitions).collect();
    let firsts: Vec<usize> = members
        .iter()
        .map(|m| {
            m.iter()
                .filter(|&&t| trials[t].correct_position() == Position::First)
                .count()
                * repetitions
        })
        .collect();
    for (&(lang, name), &c) in &contrast_ids {
        if demand[c] > n_lists {
            return Err(DatasetError::Infeasible(format!(
                "contrast {}/{name} needs {} placements in distinct lists but only {n_lists} lists exist",
                lang.as_str(),
                demand[c]
            )));
        }
    }
    let total_firsts: usize = firsts.iter().sum();
    let total_seconds = trials.len() * repetitions - total_firsts;
    let odd_lists = lengths.iter().filter(|&&l| l % 2 == 1).count();
    if total_firsts.abs_diff(total_seconds) > odd_lists {
        return Err(DatasetError::Infeasible(format!(
            "correct-position balance: {total_firsts} first vs {total_seconds} second placements cannot be balanced within one across {n_lists} lists"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps: u64 = 0;
    let labels = loop {
        if steps > SEARCH_BUDGET {
            return Err(DatasetError::Infeasible(format!(
                "search budget of {SEARCH_BUDGET} steps exhausted (position balance could not be satisfied under the contrast constraint)"
            )));
        }
        let placement = place(&demand, &lengths, &mut rng).map_err(|c| {
            let (&(lang, name), _) = contrast_ids.iter().find(|&(_, &id)| id == c).expect("known contrast");
            DatasetError::Infeasible(format!(
                "contrast {}/{name} cannot be placed in {} distinct lists with room left",
                lang.as_str(),
                demand[c]
            ))
        })?;
        steps += demand.iter().sum::<usize>() as u64;
        if let Some(labels) = label(&placement, &firsts, &lengths, &mut steps) {
            break placement.into_iter().zip(labels).collect::<Vec<_>>();
        }
        log::debug!("counterbalance: balance repair failed, retrying ({steps} steps)");
    };

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n_lists];
    for (c, (lists, is_first)) in labels.into_iter().enumerate() {
        let mut pool = members[c].clone();
        pool.shuffle(&mut rng);
        for kind in [Position::First, Position::Second] {
            let copies = pool
                .iter()
                .filter(|&&t| trials[t].correct_position() == kind)
                .flat_map(|&t| std::iter::repeat_n(t, repetitions));
            let targets = lists
                .iter()
                .zip(&is_first)
                .filter(|&(_, &f)| f == (kind == Position::First))
                .map(|(&l, _)| l);
            for (t, l) in copies.zip(targets) {
                assigned[l].push(t);
            }
        }
    }

    Ok(assigned
        .into_iter()
        .enumerate()
        .map(|(i, mut members)| {
            members.shuffle(&mut rng);
            ExperimentList {
                list_id: format!("L{:03}", i + 1),
                trial_ids: members.into_iter().map(|t| trials[t].trial_id.clone()).collect(),
                participants: Vec::new(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ListCount { found: usize, expected: usize },
    Length { list_id: String, found: usize, expected: usize },
    ContrastRepeat { list_id: String, contrast: String, count: usize },
    Repetition { trial_id: String, found: usize, expected: usize },
    OrderBalance { list_id: String, first: usize, second: usize },
    UnknownTrial { list_id: String, trial_id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ListCount { found, expected } => {
                write!(f, "list-count: found {found} lists, expected {expected}")
            }
            Violation::Length { list_id, found, expected } => {
                write!(f, "length: list {list_id} has {found} trials, expected {expected}")
            }
            Violation::ContrastRepeat { list_id, contrast, count } => {
                write!(f, "contrast: list {list_id} contains contrast {contrast} {count} times")
            }
            Violation::Repetition { trial_id, found, expected } => {
                write!(f, "repetition: trial {trial_id} appears in {found} lists, expected {expected}")
            }
            Violation::OrderBalance { list_id, first, second } => {
                write!(f, "balance: list {list_id} has {first} first vs {second} second answers")
            }
            Violation::UnknownTrial { list_id, trial_id } => {
                write!(f, "unknown: list {list_id} references unknown trial {trial_id}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count_contrast_repeats(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::ContrastRepeat { .. }))
            .count()
    }
}

/// Lists every violated list constraint.
pub fn check_lists(
    lists: &[ExperimentList],
    trials: &[Trial],
    list_size: usize,
    repetitions: usize,
) -> ViolationReport {
    let mut violations = Vec::new();
    let index: HashMap<&str, &Trial> = trials.iter().map(|t| (t.trial_id.as_str(), t)).collect();
    let lengths = expected_list_lengths(trials.len(), list_size, repetitions);
    if lists.len() != lengths.len() {
        violations.push(Violation::ListCount {
            found: lists.len(),
            expected: lengths.len(),
        });
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for (i, list) in lists.iter().enumerate() {
        let expected = lengths.get(i).copied().unwrap_or(list_size);
        if list.trial_ids.len() != expected {
            violations.push(Violation::Length {
                list_id: list.list_id.clone(),
                found: list.trial_ids.len(),
                expected,
            });
        }
        let mut contrasts: BTreeMap<(Language, &str), usize> = BTreeMap::new();
        let (mut first, mut second) = (0usize, 0usize);
        for id in &list.trial_ids {
            *counts.entry(id).or_default() += 1;
            let Some(t) = index.get(id.as_str()) else {
                violations.push(Violation::UnknownTrial {
                    list_id: list.list_id.clone(),
                    trial_id: id.clone(),
                });
                continue;
            };
            *contrasts.entry(t.contrast_key()).or_default() += 1;
            match t.correct_position() {
                Position::First => first += 1,
                Position::Second => second += 1,
            }
        }
        for ((lang, contrast), count) in contrasts {
            if count > 1 {
                violations.push(Violation::ContrastRepeat {
                    list_id: list.list_id.clone(),
                    contrast: format!("{}/{contrast}", lang.as_str()),
                    count,
                });
            }
        }
        if first.abs_diff(second) > 1 {
            violations.push(Violation::OrderBalance {
                list_id: list.list_id.clone(),
                first,
                second,
            });
        }
    }
    for t in trials {
        let found = counts.get(t.trial_id.as_str()).copied().unwrap_or(0);
        if found != repetitions {
            violations.push(Violation::Repetition {
                trial_id: t.trial_id.clone(),
                found,
                expected: repetitions,
            });
        }
    }
    ViolationReport { violations }
}

pub fn write_lists<W: Write>(lists: &[ExperimentList], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["list_id", "position", "trial_id"])?;
    for list in lists {
        for (i, id) in list.trial_ids.iter().enumerate() {
            w.write_record([list.list_id.as_str(), &(i + 1).to_string(), id])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `list_id,position,trial_id` table; lists keep first-seen order
/// and trials are ordered by position.
pub fn read_lists(content: &[u8]) -> Result<Vec<ExperimentList>, DatasetError> {
    let mut reader = csv_reader(content);
    let headers = reader.headers().map_err(|e| DatasetError::Format {
        line: 1,
        message: e.to_string(),
    })?;
    check_columns(headers, &["list_id", "position", "trial_id"])
        .map_err(|message| DatasetError::Format { line: 1, message })?;
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(usize, String)>> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Format {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record_line(&record);
        let position: usize = record[1].parse().map_err(|_| DatasetError::Format {
            line,
            message: format!("bad position {:?}", &record[1]),
        })?;
        let id = record[0].to_string();
        if !rows.contains_key(&id) {
            order.push(id.clone());
        }
        rows.entry(id).or_default().push((position, record[2].to_string()));
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let mut members = rows.remove(&id).unwrap_or_default();
            members.sort_by_key(|(p, _)| *p);
            ExperimentList {
                list_id: id,
                trial_ids: members.into_iter().map(|(_, t)| t).collect(),
                participants: Vec::new(),
            }
        })
        .collect())
}
