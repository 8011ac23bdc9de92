//! Words, relators read from labelled graphs, pieces, small cancellation
//! conditions, and two inductive schedulers that grow a presentation stage
//! by stage from relator lengths and a control oracle.
//!
//! Letters are nonzero integers: `+(i+1)` is generator `i`, `-(i+1)` its
//! inverse. In text, generator `i` is the `i`-th lowercase letter and its
//! inverse the matching capital.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coverings::Verdict;
use crate::error::{Error, Result};
use crate::quantk::ControlOracle;

pub type Letter = i32;

pub fn letter_from_char(c: char) -> Result<Letter> {
    match c {
        'a'..='z' => Ok(c as i32 - 'a' as i32 + 1),
        'A'..='Z' => Ok(-(c as i32 - 'A' as i32 + 1)),
        _ => Err(Error::input(format!("'{c}' is not a letter a-z or A-Z"))),
    }
}

pub fn letter_to_char(l: Letter) -> char {
    let k = l.unsigned_abs() - 1;
    let base = if l > 0 { b'a' } else { b'A' };
    (base + k as u8) as char
}

/// A word read cyclically.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CyclicWord {
    letters: Vec<Letter>,
}

impl CyclicWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.iter().any(|&l| l == 0 || l.unsigned_abs() > 26) {
            return Err(Error::input("letters must be nonzero and at most 26 in absolute value"));
        }
        Ok(Self { letters })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.chars().map(letter_from_char).collect::<Result<_>>()?)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != -w[1])
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced() && (self.letters.len() < 2 || self.letters[0] != -self.letters[self.letters.len() - 1])
    }

    /// Free and cyclic reduction.
    pub fn cyclically_reduced(&self) -> Self {
        let mut out: Vec<Letter> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        let (mut lo, mut hi) = (0, out.len());
        while hi - lo >= 2 && out[lo] == -out[hi - 1] {
            lo += 1;
            hi -= 1;
        }
        Self {
            letters: out[lo..hi].to_vec(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|&l| -l).collect(),
        }
    }

    pub fn rotation(&self, k: usize) -> Self {
        let n = self.letters.len();
        Self {
            letters: (0..n).map(|i| self.letters[(i + k) % n]).collect(),
        }
    }

    /// Least rotation of the word or its inverse; equal for words that agree
    /// up to rotation and inversion.
    pub fn canonical(&self) -> Self {
        let inv = self.inverse();
        (0..self.len().max(1))
            .flat_map(|k| [self.rotation(k), inv.rotation(k)])
            .min()
            .unwrap_or_else(|| self.clone())
    }

    pub fn alphabet_size(&self) -> usize {
        self.letters.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

impl fmt::Display for CyclicWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &l in &self.letters {
            write!(f, "{}", letter_to_char(l))?;
        }
        Ok(())
    }
}

/// Generators plus cyclically reduced relators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub generators: usize,
    pub relators: Vec<CyclicWord>,
}

impl Presentation {
    pub fn new(generators: usize, relators: Vec<CyclicWord>) -> Result<Self> {
        for (i, r) in relators.iter().enumerate() {
            if !r.is_cyclically_reduced() || r.is_empty() {
                return Err(Error::input(format!("relator {i} ({r}) is not cyclically reduced")));
            }
            if r.alphabet_size() > generators {
                return Err(Error::input(format!("relator {i} uses a letter beyond {generators} generators")));
            }
        }
        Ok(Self { generators, relators })
    }

    /// One relator per line; `#` starts a comment. The generator count is the
    /// largest letter used.
    pub fn parse(text: &str) -> Result<Self> {
        let mut relators = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let w = CyclicWord::parse(body).map_err(|e| Error::input(format!("line {}: {e}", n + 1)))?;
            relators.push(w);
        }
        let generators = relators.iter().map(CyclicWord::alphabet_size).max().unwrap_or(0);
        Self::new(generators, relators)
    }

    /// Sorted relator lengths.
    pub fn profile(&self) -> Vec<usize> {
        let mut p: Vec<usize> = self.relators.iter().map(CyclicWord::len).collect();
        p.sort_unstable();
        p
    }

    pub fn to_text(&self) -> String {
        self.relators.iter().map(|r| format!("{r}\n")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledEdge {
    pub from: usize,
    pub to: usize,
    /// Read as `label` from `from` to `to` and inverted the other way.
    pub label: Letter,
}

/// Finite multigraph (loops and parallel edges allowed) with oriented,
/// labelled edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelledGraph {
    vertices: usize,
    edges: Vec<LabelledEdge>,
    adj: Vec<Vec<(usize, usize, Letter)>>,
}

#[derive(Deserialize, Serialize)]
struct GraphJson {
    vertices: usize,
    edges: Vec<EdgeJson>,
}

#[derive(Deserialize, Serialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    label: String,
}

impl LabelledGraph {
    pub fn new(vertices: usize, edges: Vec<LabelledEdge>) -> Result<Self> {
        let mut adj = vec![Vec::new(); vertices];
        for (id, e) in edges.iter().enumerate() {
            if e.from >= vertices || e.to >= vertices {
                return Err(Error::input(format!("edge {id} leaves the vertex range")));
            }
            if e.label == 0 || e.label.unsigned_abs() > 26 {
                return Err(Error::input(format!("edge {id} has an invalid label")));
            }
            adj[e.from].push((id, e.to, e.label));
            if e.from != e.to {
                adj[e.to].push((id, e.from, -e.label));
            }
        }
        Ok(Self { vertices, edges, adj })
    }

    /// `{"vertices": n, "edges": [{"from": u, "to": v, "label": "a"}, ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let g: GraphJson = serde_json::from_str(text)?;
        let edges = g
            .edges
            .into_iter()
            .map(|e| {
                let mut chars = e.label.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(LabelledEdge {
                        from: e.from,
                        to: e.to,
                        label: letter_from_char(c)?,
                    }),
                    _ => Err(Error::input(format!("edge label '{}' is not a single letter", e.label))),
                }
            })
            .collect::<Result<_>>()?;
        Self::new(g.vertices, edges)
    }

    pub fn to_json(&self) -> String {
        let g = GraphJson {
            vertices: self.vertices,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    from: e.from,
                    to: e.to,
                    label: letter_to_char(e.label).to_string(),
                })
                .collect(),
        };
        serde_json::to_string(&g).expect("plain data")
    }

    /// `n`-cycle with edges `i -> i+1` labelled by `labels[i % labels.len()]`.
    pub fn cycle(n: usize, labels: &[Letter]) -> Result<Self> {
        if n == 0 || labels.is_empty() {
            return Err(Error::input("cycle needs at least one vertex and one label"));
        }
        Self::new(
            n,
            (0..n)
                .map(|i| LabelledEdge {
                    from: i,
                    to: (i + 1) % n,
                    label: labels[i % labels.len()],
                })
                .collect(),
        )
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[LabelledEdge] {
        &self.edges
    }

    /// Length of the shortest cycle, counting loops (1) and parallel edges (2).
    pub fn girth(&self) -> Option<u64> {
        let mut best: Option<u64> = None;
        let mut dist = vec![usize::MAX; self.vertices];
        let mut queue = VecDeque::new();
        for (id, e) in self.edges.iter().enumerate() {
            if e.from == e.to {
                return Some(1);
            }
            dist.fill(usize::MAX);
            dist[e.from] = 0;
            queue.clear();
            queue.push_back(e.from);
            while let Some(u) = queue.pop_front() {
                if best.is_some_and(|b| (dist[u] + 1) as u64 >= b) {
                    break;
                }
                for &(eid, w, _) in &self.adj[u] {
                    if eid != id && dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        queue.push_back(w);
                    }
                }
            }
            if dist[e.to] != usize::MAX {
                let len = dist[e.to] as u64 + 1;
                best = Some(best.map_or(len, |b| b.min(len)));
            }
        }
        best
    }
}

/// A relator together with the cycle it was read from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRelator {
    pub word: CyclicWord,
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRelators {
    pub relators: Vec<GraphRelator>,
    pub cycles_examined: usize,
    /// Cycles whose label needed reduction (empty results are dropped).
    pub reduced: usize,
    pub note: Option<String>,
}

impl GraphRelators {
    pub fn words(&self) -> Vec<CyclicWord> {
        self.relators.iter().map(|r| r.word.clone()).collect()
    }
}

/// Labels of simple cycles of length at most `cap`, cyclically reduced and
/// deduplicated up to rotation and inversion (canonical representatives).
pub fn relators_from_graph(g: &LabelledGraph, cap: u64) -> Result<GraphRelators> {
    let Some(girth) = g.girth() else {
        return Ok(GraphRelators {
            relators: Vec::new(),
            cycles_examined: 0,
            reduced: 0,
            note: Some("graph is acyclic".to_string()),
        });
    };
    if cap < girth {
        return Err(Error::input(format!("length cap {cap} is below the girth {girth}")));
    }
    let mut cycles: BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for s in 0..g.vertices {
        let mut path_v = vec![s];
        let mut path_e: Vec<usize> = Vec::new();
        let mut on_path = vec![false; g.vertices];
        on_path[s] = true;
        walk(g, s, s, cap as usize, &mut path_v, &mut path_e, &mut on_path, &mut cycles);
    }
    let mut seen: BTreeMap<CyclicWord, GraphRelator> = BTreeMap::new();
    let mut reduced = 0;
    for (verts, edges) in cycles.values() {
        let mut letters = Vec::with_capacity(edges.len());
        for (k, &e) in edges.iter().enumerate() {
            let edge = &g.edges[e];
            letters.push(if edge.from == verts[k] { edge.label } else { -edge.label });
        }
        let raw = CyclicWord { letters };
        let word = raw.cyclically_reduced();
        if word != raw {
            reduced += 1;
        }
        if word.is_empty() {
            continue;
        }
        let key = word.canonical();
        seen.entry(key.clone()).or_insert(GraphRelator {
            word: key,
            vertices: verts.clone(),
            edges: edges.clone(),
        });
    }
    Ok(GraphRelators {
        cycles_examined: cycles.len(),
        relators: seen.into_values().collect(),
        reduced,
        note: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn walk(
    g: &LabelledGraph,
    s: usize,
    v: usize,
    cap: usize,
    path_v: &mut Vec<usize>,
    path_e: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut BTreeMap<Vec<usize>, (Vec<usize>, Vec<usize>)>,
) {
    for &(e, w, _) in &g.adj[v] {
        if path_e.last() == Some(&e) {
            continue;
        }
        if w == s {
            let mut key = path_e.clone();
            key.push(e);
            key.sort_unstable();
            let mut edges = path_e.clone();
            edges.push(e);
            out.entry(key).or_insert_with(|| (path_v.clone(), edges));
            continue;
        }
        if w > s && !on_path[w] && path_e.len() + 2 <= cap {
            on_path[w] = true;
            path_v.push(w);
            path_e.push(e);
            walk(g, s, w, cap, path_v, path_e, on_path, out);
            path_e.pop();
            path_v.pop();
            on_path[w] = false;
        }
    }
}

/// Follows a relator's recorded cycle through the graph and compares labels.
pub fn retrace(g: &LabelledGraph, r: &GraphRelator) -> bool {
    let k = r.edges.len();
    if k == 0 || r.vertices.len() != k {
        return false;
    }
    let mut letters = Vec::with_capacity(k);
    for i in 0..k {
        let Some(e) = g.edges.get(r.edges[i]) else {
            return false;
        };
        let (u, v) = (r.vertices[i], r.vertices[(i + 1) % k]);
        if e.from == u && e.to == v {
            letters.push(e.label);
        } else if e.from == v && e.to == u {
            letters.push(-e.label);
        } else {
            return false;
        }
    }
    CyclicWord { letters }.cyclically_reduced().canonical() == r.word
}

/// Longest common prefix of a relator read from `pos_a` and another relator
/// (possibly inverted) read from `pos_b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceOccurrence {
    pub relator: usize,
    pub position: usize,
    pub other: usize,
    pub other_position: usize,
    pub other_inverted: bool,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceTable {
    pub lengths: Vec<usize>,
    /// Longest piece of each relator.
    pub max_piece: Vec<usize>,
    /// `longest[i][p]`: longest piece of relator `i` starting at position `p`.
    pub longest: Vec<Vec<usize>>,
    /// The best match for every position with a nonempty piece.
    pub occurrences: Vec<PieceOccurrence>,
}

fn cyclic_lcp(a: &[Letter], pa: usize, b: &[Letter], pb: usize, limit: usize) -> usize {
    let (la, lb) = (a.len(), b.len());
    (0..limit).take_while(|&k| a[(pa + k) % la] == b[(pb + k) % lb]).count()
}

/// Pieces: words read at two different places in the symmetrised relator
/// set. A piece is proper: inside one relator it is shorter than the relator.
pub fn compute_pieces(relators: &[CyclicWord]) -> Result<PieceTable> {
    if let Some(i) = relators.iter().position(|r| !r.is_cyclically_reduced() || r.is_empty()) {
        return Err(Error::input(format!("relator {i} is not cyclically reduced")));
    }
    let inverses: Vec<CyclicWord> = relators.iter().map(CyclicWord::inverse).collect();
    let mut longest = Vec::with_capacity(relators.len());
    let mut occurrences = Vec::new();
    for (i, r) in relators.iter().enumerate() {
        let li = r.len();
        let mut row = vec![0usize; li];
        for (p, slot) in row.iter_mut().enumerate() {
            let mut best: Option<PieceOccurrence> = None;
            for (j, other) in relators.iter().enumerate() {
                for (inverted, word) in [(false, other), (true, &inverses[j])] {
                    let lj = word.len();
                    let limit = if i == j { li - 1 } else { li.min(lj) };
                    for q in 0..lj {
                        if i == j && !inverted && q == p {
                            continue;
                        }
                        let l = cyclic_lcp(&r.letters, p, &word.letters, q, limit);
                        if l > best.as_ref().map_or(0, |b| b.length) {
                            best = Some(PieceOccurrence {
                                relator: i,
                                position: p,
                                other: j,
                                other_position: q,
                                other_inverted: inverted,
                                length: l,
                            });
                        }
                    }
                }
            }
            if let Some(b) = best {
                *slot = b.length;
                occurrences.push(b);
            }
        }
        longest.push(row);
    }
    Ok(PieceTable {
        lengths: relators.iter().map(CyclicWord::len).collect(),
        max_piece: longest.iter().map(|r| r.iter().copied().max().unwrap_or(0)).collect(),
        longest,
        occurrences,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    /// Every piece of a relator `r` is shorter than `lambda |r|`.
    Metric { lambda: f64 },
    /// No relator is a product of fewer than `p` pieces.
    Pieces { p: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionWitness {
    pub relator: usize,
    /// Longest piece for the metric condition; the piece count for `C(p)`.
    pub value: usize,
    pub start: usize,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    pub witnesses: Vec<ConditionWitness>,
    /// Fewest pieces covering each relator (`None` if no cover exists).
    pub min_pieces: Vec<Option<usize>>,
}

/// Fewest pieces whose concatenation reads the whole cyclic word starting
/// at `start`, given the longest piece at each position.
fn min_cover_from(longest: &[usize], start: usize) -> Option<usize> {
    let n = longest.len();
    let (mut count, mut reach, mut next) = (0usize, 0usize, 0usize);
    let mut i = 0usize;
    while reach < n {
        while i <= reach && i < n {
            next = next.max(i + longest[(start + i) % n]);
            i += 1;
        }
        if next <= reach {
            return None;
        }
        count += 1;
        reach = next;
    }
    Some(count)
}

/// Fewest pieces covering the cyclic word, over all starting points.
pub fn min_piece_decomposition(longest: &[usize]) -> Option<(usize, usize)> {
    (0..longest.len())
        .filter_map(|s| min_cover_from(longest, s).map(|c| (c, s)))
        .min()
}

pub fn check_condition(relators: &[CyclicWord], condition: Condition) -> Result<ConditionReport> {
    match condition {
        Condition::Metric { lambda } if !(lambda > 0.0 && lambda < 1.0) => {
            return Err(Error::input(format!("lambda = {lambda} outside (0, 1)")));
        }
        Condition::Pieces { p } if p < 2 => return Err(Error::input("C(p) needs p >= 2")),
        _ => {}
    }
    let table = compute_pieces(relators)?;
    let decomp: Vec<Option<(usize, usize)>> = table.longest.iter().map(|l| min_piece_decomposition(l)).collect();
    let mut witnesses = Vec::new();
    for (i, r) in relators.iter().enumerate() {
        match condition {
            Condition::Metric { lambda } => {
                let bound = lambda * r.len() as f64;
                if table.max_piece[i] as f64 >= bound {
                    let start = table.longest[i].iter().position(|&l| l == table.max_piece[i]).unwrap_or(0);
                    witnesses.push(ConditionWitness {
                        relator: i,
                        value: table.max_piece[i],
                        start,
                        bound,
                    });
                }
            }
            Condition::Pieces { p } => {
                if let Some((count, start)) = decomp[i] {
                    if count < p {
                        witnesses.push(ConditionWitness {
                            relator: i,
                            value: count,
                            start,
                            bound: p as f64,
                        });
                    }
                }
            }
        }
    }
    Ok(ConditionReport {
        condition,
        holds: witnesses.is_empty(),
        witnesses,
        min_pieces: decomp.into_iter().map(|d| d.map(|x| x.0)).collect(),
    })
}

/// A relator in a schedule: `(block, index)`, where the block is the graph
/// it came from (always 0 for a plain length stream).
pub type RelatorId = (usize, usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub stage: usize,
    /// All relators so far, in the order added.
    pub relators: Vec<RelatorId>,
    pub added: Vec<RelatorId>,
    /// Longest relator length at this stage.
    pub r: u64,
    pub eps: f64,
    /// Oracle output `(t, eps')` for this stage's scale.
    pub t: u64,
    pub eps_prime: f64,
    pub gap: f64,
    /// Graph chosen at this stage, for graph schedules.
    pub graph: Option<usize>,
    pub girth: Option<u64>,
    /// `(shortest relator that can still be added)/2 - 1`, valid only under
    /// the small cancellation assumption named in the schedule.
    pub conditional_injectivity_bound: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shortfall {
    pub stage: usize,
    pub needed_girth_above: f64,
    pub best_available: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub stages: Vec<ScheduleState>,
    pub gap: f64,
    pub oracle_inputs: String,
    pub assumption: String,
    /// Stage lengths: the largest relator length at each stage.
    pub profile: Vec<u64>,
    pub selected_graphs: Vec<usize>,
    pub shortfall: Option<Shortfall>,
}

pub const SMALL_CANCELLATION_ASSUMPTION: &str =
    "the presentation satisfies a small cancellation condition strong enough for Greendlinger's lemma";
pub const DEFAULT_GAP: f64 = 4.0;

fn check_eps_prime(stage: usize, e: f64) -> Result<f64> {
    if !(e > 0.0 && e < 0.25) {
        return Err(Error::pre(format!("oracle returned eps' = {e} at stage {stage}, outside (0, 1/4)")));
    }
    Ok(e)
}

/// Method 1 on a stream of relator lengths (sorted ascending): stage 0 takes
/// every relator of length `<= r0`; stage `m` picks `r_m`, the smallest
/// stream length `>= gap * t_{m-1}`, and adds the relators with length in
/// `(t_{m-1}, r_m]`. With `stages = Some(k)` an exhausted stream before
/// stage `k` is an error; otherwise the schedule stops when it runs out.
pub fn schedule_general(
    lengths: &[u64],
    oracle: &dyn ControlOracle,
    r0: u64,
    eps0: f64,
    gap: f64,
    stages: Option<usize>,
) -> Result<Schedule> {
    if !(gap > 1.0) {
        return Err(Error::input(format!("gap factor {gap} must exceed 1")));
    }
    if !(eps0 > 0.0 && eps0 < 0.25) {
        return Err(Error::input(format!("eps0 = {eps0} outside (0, 1/4)")));
    }
    if lengths.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::input("relator lengths must be sorted ascending"));
    }
    let bound_after = |t: u64| lengths.iter().find(|&&l| l > t).map(|&l| (l / 2).saturating_sub(1));
    let first: Vec<RelatorId> = (0..lengths.len()).filter(|&i| lengths[i] <= r0).map(|i| (0, i)).collect();
    let r = first.iter().map(|&(_, i)| lengths[i]).max().unwrap_or(0);
    let (t, eps_prime) = oracle.qs(0, 0, r, eps0);
    let eps_prime = check_eps_prime(0, eps_prime)?;
    let mut out = vec![ScheduleState {
        stage: 0,
        relators: first.clone(),
        added: first,
        r,
        eps: eps0,
        t,
        eps_prime,
        gap,
        graph: None,
        girth: None,
        conditional_injectivity_bound: bound_after(t.max(r)),
    }];
    loop {
        let prev = out.last().expect("stage 0 exists");
        if stages.is_some_and(|k| out.len() >= k) {
            break;
        }
        let threshold = gap * prev.t as f64;
        let Some(rm) = lengths.iter().copied().find(|&l| l as f64 >= threshold) else {
            if let Some(k) = stages {
                return Err(Error::pre(format!(
                    "relator stream exhausted at stage {} of {k}: no length >= {threshold}",
                    out.len()
                )));
            }
            break;
        };
        let m = out.len();
        let added: Vec<RelatorId> = (0..lengths.len())
            .filter(|&i| lengths[i] > prev.t && lengths[i] <= rm)
            .map(|i| (0, i))
            .collect();
        let mut relators = prev.relators.clone();
        relators.extend(added.iter().copied());
        let eps = prev.eps_prime;
        let (t, eps_prime) = oracle.qs(m, 0, rm, eps);
        let eps_prime = check_eps_prime(m, eps_prime)?;
        out.push(ScheduleState {
            stage: m,
            relators,
            added,
            r: rm,
            eps,
            t,
            eps_prime,
            gap,
            graph: None,
            girth: None,
            conditional_injectivity_bound: bound_after(t.max(rm)),
        });
    }
    Ok(Schedule {
        profile: out.iter().map(|s| s.r).collect(),
        stages: out,
        gap,
        oracle_inputs: "r, eps".to_string(),
        assumption: SMALL_CANCELLATION_ASSUMPTION.to_string(),
        selected_graphs: Vec::new(),
        shortfall: None,
    })
}

/// Method 2: stage 0 uses graph 0; stage `n` takes the next graph whose
/// girth exceeds `gap * t_{n-1}` and adds all its relators. Cycles are
/// enumerated up to `cycle_cap(girth)` in each chosen graph.
pub fn schedule_from_graphs(
    graphs: &[LabelledGraph],
    oracle: &dyn ControlOracle,
    eps0: f64,
    gap: f64,
    extra_cycle_length: u64,
) -> Result<Schedule> {
    if graphs.is_empty() {
        return Err(Error::input("no graphs supplied"));
    }
    if !(gap > 1.0) {
        return Err(Error::input(format!("gap factor {gap} must exceed 1")));
    }
    if !(eps0 > 0.0 && eps0 < 0.25) {
        return Err(Error::input(format!("eps0 = {eps0} outside (0, 1/4)")));
    }
    let girths: Vec<Option<u64>> = graphs.iter().map(LabelledGraph::girth).collect();
    let relators_of = |k: usize| -> Result<Vec<CyclicWord>> {
        match girths[k] {
            Some(g) => Ok(relators_from_graph(&graphs[k], g + extra_cycle_length)?.words()),
            None => Ok(Vec::new()),
        }
    };
    let bound_after = |from: usize, t: u64| {
        girths[from..]
            .iter()
            .flatten()
            .filter(|&&g| g > t)
            .min()
            .map(|&g| (g / 2).saturating_sub(1))
    };
    let words0 = relators_of(0)?;
    let r = words0.iter().map(|w| w.len() as u64).max().unwrap_or(0);
    let (t, eps_prime) = oracle.qs(0, 0, r, eps0);
    let eps_prime = check_eps_prime(0, eps_prime)?;
    let first: Vec<RelatorId> = (0..words0.len()).map(|i| (0, i)).collect();
    let mut stages = vec![ScheduleState {
        stage: 0,
        relators: first.clone(),
        added: first,
        r,
        eps: eps0,
        t,
        eps_prime,
        gap,
        graph: Some(0),
        girth: girths[0],
        conditional_injectivity_bound: bound_after(1, t.max(r)),
    }];
    let mut selected = vec![0];
    let mut next = 1;
    let mut shortfall = None;
    while next < graphs.len() {
        let prev = stages.last().expect("stage 0 exists");
        let threshold = gap * prev.t as f64;
        let Some(k) = (next..graphs.len()).find(|&k| girths[k].is_some_and(|g| g as f64 > threshold)) else {
            shortfall = Some(Shortfall {
                stage: stages.len(),
                needed_girth_above: threshold,
                best_available: girths[next..].iter().flatten().max().copied(),
            });
            break;
        };
        let words = relators_of(k)?;
        let added: Vec<RelatorId> = (0..words.len()).map(|i| (k, i)).collect();
        let mut relators = prev.relators.clone();
        relators.extend(added.iter().copied());
        let r = prev.r.max(words.iter().map(|w| w.len() as u64).max().unwrap_or(0));
        let m = stages.len();
        let eps = prev.eps_prime;
        let (t, eps_prime) = oracle.qs(m, 0, r, eps);
        let eps_prime = check_eps_prime(m, eps_prime)?;
        stages.push(ScheduleState {
            stage: m,
            relators,
            added,
            r,
            eps,
            t,
            eps_prime,
            gap,
            graph: Some(k),
            girth: girths[k],
            conditional_injectivity_bound: bound_after(k + 1, t.max(r)),
        });
        selected.push(k);
        next = k + 1;
    }
    Ok(Schedule {
        profile: stages.iter().map(|s| s.r).collect(),
        stages,
        gap,
        oracle_inputs: "r, eps".to_string(),
        assumption: SMALL_CANCELLATION_ASSUMPTION.to_string(),
        selected_graphs: selected,
        shortfall,
    })
}

/// Independent pass over a schedule's stage invariants; returns one message
/// per violation.
pub fn verify_schedule(s: &Schedule) -> Vec<String> {
    let mut bad = Vec::new();
    for (i, st) in s.stages.iter().enumerate() {
        if !(st.eps > 0.0 && st.eps < 0.25) {
            bad.push(format!("stage {i}: eps = {} outside (0, 1/4)", st.eps));
        }
        if st.stage != i {
            bad.push(format!("stage {i} is numbered {}", st.stage));
        }
        if i == 0 {
            continue;
        }
        let prev = &s.stages[i - 1];
        if st.graph.is_none() && (st.r as f64) < s.gap * prev.t as f64 {
            bad.push(format!("stage {i}: r = {} below gap * t = {}", st.r, s.gap * prev.t as f64));
        }
        if let (Some(_), Some(g)) = (st.graph, st.girth) {
            if (g as f64) <= s.gap * prev.t as f64 {
                bad.push(format!("stage {i}: girth {g} not above gap * t"));
            }
        }
        if st.eps != prev.eps_prime {
            bad.push(format!("stage {i}: eps does not continue from the previous eps'"));
        }
        let have: BTreeSet<&RelatorId> = st.relators.iter().collect();
        if prev.relators.iter().any(|r| !have.contains(r)) {
            bad.push(format!("stage {i}: relators of stage {} are not all kept", i - 1));
        }
    }
    bad
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LacunarityReport {
    /// `delta_m / r_m` per stage.
    pub ratios: Vec<f64>,
    /// `r_m / r_{m-1}`.
    pub gaps: Vec<f64>,
    pub verdict: Verdict,
    pub evidence: String,
}

/// `delta_m = o(r_m)` on a window: over the second half the ratios never
/// rise, and the last ratio is at most half the first.
pub fn lacunarity_check(profile: &[u64], deltas: &[f64]) -> Result<LacunarityReport> {
    if profile.len() != deltas.len() {
        return Err(Error::input("one delta per stage is required"));
    }
    if profile.contains(&0) {
        return Err(Error::input("stage lengths must be positive"));
    }
    let ratios: Vec<f64> = deltas.iter().zip(profile).map(|(&d, &r)| d / r as f64).collect();
    let gaps = profile.windows(2).map(|w| w[1] as f64 / w[0] as f64).collect();
    let verdict = if ratios.len() < 2 {
        Verdict::InsufficientData
    } else {
        let tail = &ratios[ratios.len() / 2..];
        let tail = if tail.len() < 2 { &ratios[..] } else { tail };
        let falling = tail.windows(2).all(|w| w[1] <= w[0]);
        if falling && tail[tail.len() - 1] <= 0.5 * ratios[0] {
            Verdict::Increasing
        } else {
            Verdict::NotIncreasing
        }
    };
    Ok(LacunarityReport {
        ratios,
        gaps,
        verdict,
        evidence: crate::coverings::WINDOW_EVIDENCE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantk::LinearOracle;
    use proptest::prelude::*;

    fn w(s: &str) -> CyclicWord {
        CyclicWord::parse(s).unwrap()
    }

    const STUB: LinearOracle = LinearOracle {
        factor: 2,
        eps_factor: 0.5,
    };

    #[test]
    fn words() {
        assert_eq!(w("abAB").to_string(), "abAB");
        assert!(w("abAB").is_cyclically_reduced());
        assert!(!w("abA").is_cyclically_reduced());
        assert_eq!(w("aabBA").cyclically_reduced(), w("a"));
        assert_eq!(w("ab").inverse(), w("BA"));
        assert_eq!(w("ba").canonical(), w("ab").canonical());
        assert_eq!(w("BA").canonical(), w("ab").canonical());
        assert!(CyclicWord::parse("a1").is_err());
        let p = Presentation::parse("# surface\nabAB  \n\naaa # cube\n").unwrap();
        assert_eq!(p.generators, 2);
        assert_eq!(p.profile(), vec![3, 4]);
        assert!(Presentation::parse("aA").is_err());
        assert_eq!(Presentation::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn graph_relators() {
        let c5 = LabelledGraph::cycle(5, &[1]).unwrap();
        let r = relators_from_graph(&c5, 5).unwrap();
        assert_eq!(r.words(), vec![w("aaaaa").canonical()]);
        assert!(relators_from_graph(&c5, 4).is_err());

        // Theta graph: three parallel edges between two vertices.
        let theta = LabelledGraph::new(
            2,
            vec![
                LabelledEdge { from: 0, to: 1, label: 1 },
                LabelledEdge { from: 0, to: 1, label: 2 },
                LabelledEdge { from: 0, to: 1, label: 3 },
            ],
        )
        .unwrap();
        let r = relators_from_graph(&theta, 10).unwrap();
        let got: BTreeSet<CyclicWord> = r.words().into_iter().collect();
        let want: BTreeSet<CyclicWord> = ["aB", "aC", "bC"].iter().map(|s| w(s).canonical()).collect();
        assert_eq!(got, want);
        for rel in &r.relators {
            assert!(retrace(&theta, rel));
        }

        let tree = LabelledGraph::new(3, vec![LabelledEdge { from: 0, to: 1, label: 1 }, LabelledEdge { from: 1, to: 2, label: 2 }])
            .unwrap();
        let r = relators_from_graph(&tree, 10).unwrap();
        assert!(r.relators.is_empty());
        assert!(r.note.is_some());
    }

    #[test]
    fn graph_json_roundtrip() {
        let g = LabelledGraph::from_json(r#"{"vertices": 3, "edges": [{"from":0,"to":1,"label":"a"},{"from":1,"to":2,"label":"b"},{"from":2,"to":0,"label":"C"}]}"#).unwrap();
        assert_eq!(g.girth(), Some(3));
        assert_eq!(LabelledGraph::from_json(&g.to_json()).unwrap(), g);
        let r = relators_from_graph(&g, 3).unwrap();
        assert_eq!(r.words(), vec![w("abC").canonical()]);
        assert!(LabelledGraph::from_json(r#"{"vertices": 1, "edges": [{"from":0,"to":3,"label":"a"}]}"#).is_err());
    }

    /// Brute-force piece oracle: every subword occurrence in the
    /// symmetrised set, compared pairwise by position.
    fn piece_oracle(rels: &[CyclicWord]) -> Vec<usize> {
        let mut occ: Vec<(usize, bool, usize, Vec<Letter>)> = Vec::new();
        for (i, r) in rels.iter().enumerate() {
            for (inv, word) in [(false, r.clone()), (true, r.inverse())] {
                let n = word.len();
                for p in 0..n {
                    for l in 1..=n {
                        occ.push((i, inv, p, (0..l).map(|k| word.letters()[(p + k) % n]).collect()));
                    }
                }
            }
        }
        let mut best = vec![0; rels.len()];
        for a in &occ {
            if a.1 {
                continue;
            }
            for b in &occ {
                if (a.0, a.1, a.2) == (b.0, b.1, b.2) || a.3 != b.3 {
                    continue;
                }
                let l = a.3.len();
                let proper = if a.0 == b.0 { l < rels[a.0].len() } else { l <= rels[a.0].len().min(rels[b.0].len()) };
                if proper {
                    best[a.0] = best[a.0].max(l);
                }
            }
        }
        best
    }

    #[test]
    fn pieces() {
        let t = compute_pieces(&[w("aaaaaaa")]).unwrap();
        assert_eq!(t.max_piece, vec![6]);
        let t = compute_pieces(&[w("aabbbcc")]).unwrap();
        assert_eq!(t.max_piece, piece_oracle(&[w("aabbbcc")]));
        let t = compute_pieces(&[w("abab"), w("cdcd")]).unwrap();
        assert!(t.occurrences.iter().all(|o| o.relator == o.other));
        let disjoint = compute_pieces(&[w("abAB"), w("cdCD")]).unwrap();
        assert!(disjoint.occurrences.iter().all(|o| o.relator == o.other));
        let g2 = [w("abABcdCD")];
        assert_eq!(compute_pieces(&g2).unwrap().max_piece, piece_oracle(&g2));
        let mixed = [w("abcabd"), w("bcaBD"), w("aab")];
        assert_eq!(compute_pieces(&mixed).unwrap().max_piece, piece_oracle(&mixed));
        assert!(compute_pieces(&[w("aA")]).is_err());
    }

    #[test]
    fn conditions() {
        let a7 = [w("aaaaaaa")];
        let rep = check_condition(&a7, Condition::Metric { lambda: 1.0 / 6.0 }).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.witnesses[0].value, 6);
        assert!(check_condition(&[w("ab"), w("cd")], Condition::Metric { lambda: 0.01 }).unwrap().holds);
        let g2 = [w("abABcdCD")];
        let oracle = piece_oracle(&g2)[0];
        let rep = check_condition(&g2, Condition::Metric { lambda: 1.0 / 6.0 }).unwrap();
        assert_eq!(rep.holds, (oracle as f64) < 8.0 / 6.0);
        // Every letter is a piece, so the relator is a product of 8 pieces
        // or fewer; C(p) then fails for every p above the cover size.
        let c = check_condition(&g2, Condition::Pieces { p: 7 }).unwrap();
        let k = c.min_pieces[0].unwrap();
        assert_eq!(c.holds, k >= 7);
        assert!(check_condition(&g2, Condition::Pieces { p: 1 }).is_err());
        assert!(check_condition(&g2, Condition::Metric { lambda: 1.0 }).is_err());
    }

    #[test]
    fn cover_counts() {
        assert_eq!(min_piece_decomposition(&[6; 7]), Some((2, 0)));
        assert_eq!(min_piece_decomposition(&[1, 1, 1]), Some((3, 0)));
        assert_eq!(min_piece_decomposition(&[0, 0]), None);
        // Jumping short first is better: 0 -> 1 (len 1) then 1 -> 4 (len 3).
        assert_eq!(min_cover_from(&[2, 3, 1, 1], 0), Some(2));
    }

    fn powers_of_two(k: u32) -> Vec<u64> {
        (1..=k).map(|i| 1u64 << i).collect()
    }

    #[test]
    fn general_schedule() {
        let s = schedule_general(&powers_of_two(30), &STUB, 4, 0.2, 4.0, None).unwrap();
        assert!(verify_schedule(&s).is_empty(), "{:?}", verify_schedule(&s));
        assert!(s.stages.len() >= 4);
        for (i, st) in s.stages.iter().enumerate().skip(1) {
            assert!(st.r >= 4 * s.stages[i - 1].t);
            assert!(st.eps > 0.0 && st.eps < 0.25);
        }
        assert_eq!(s.stages[0].r, 4);
        assert_eq!(s.stages[1].r, 32);
        let empty = schedule_general(&[], &STUB, 4, 0.2, 4.0, None).unwrap();
        assert_eq!(empty.stages.len(), 1);
        assert!(empty.stages[0].relators.is_empty());
        let bad = LinearOracle {
            factor: 2,
            eps_factor: 1.5,
        };
        assert!(schedule_general(&powers_of_two(10), &bad, 4, 0.2, 4.0, None).is_err());
        assert!(schedule_general(&powers_of_two(5), &STUB, 4, 0.2, 4.0, Some(10)).is_err());
    }

    #[test]
    fn graph_schedule() {
        let graphs: Vec<LabelledGraph> = (2..=11).map(|k| LabelledGraph::cycle(1 << k, &[1, 2, 3]).unwrap()).collect();
        let s = schedule_from_graphs(&graphs, &STUB, 0.2, 4.0, 0).unwrap();
        assert!(verify_schedule(&s).is_empty());
        let g: Vec<u64> = s.stages.iter().map(|x| x.girth.unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(s.selected_graphs.len() >= 3);
        let flat: Vec<LabelledGraph> = (0..5).map(|_| LabelledGraph::cycle(6, &[1]).unwrap()).collect();
        let s = schedule_from_graphs(&flat, &STUB, 0.2, 4.0, 0).unwrap();
        assert_eq!(s.stages.len(), 1);
        assert!(s.shortfall.is_some());
        let one = schedule_from_graphs(&graphs[..1], &STUB, 0.2, 4.0, 0).unwrap();
        assert_eq!(one.stages.len(), 1);
        assert!(one.shortfall.is_none());
    }

    #[test]
    fn lacunarity() {
        let profile: Vec<u64> = (1..=50).map(|m| m * m).collect();
        let deltas: Vec<f64> = (1..=50).map(|m| m as f64).collect();
        assert_eq!(lacunarity_check(&profile, &deltas).unwrap().verdict, Verdict::Increasing);
        let same: Vec<f64> = profile.iter().map(|&r| r as f64).collect();
        assert_eq!(lacunarity_check(&profile, &same).unwrap().verdict, Verdict::NotIncreasing);
        assert_eq!(lacunarity_check(&[5], &[1.0]).unwrap().verdict, Verdict::InsufficientData);
    }

    proptest! {
        #[test]
        fn metric_condition_monotone(seed in proptest::collection::vec(-3i32..=3, 3..9), l1 in 0.05f64..0.9, dl in 0.0f64..0.09) {
            let letters: Vec<Letter> = seed.into_iter().filter(|&x| x != 0).collect();
            prop_assume!(!letters.is_empty());
            let word = CyclicWord::new(letters).unwrap().cyclically_reduced();
            prop_assume!(!word.is_empty());
            let rels = [word];
            if check_condition(&rels, Condition::Metric { lambda: l1 }).unwrap().holds {
                let wider = Condition::Metric { lambda: l1 + dl };
                prop_assert!(check_condition(&rels, wider).unwrap().holds);
            }
            prop_assert_eq!(compute_pieces(&rels).unwrap().max_piece, piece_oracle(&rels));
        }

        #[test]
        fn dedup_is_idempotent(n in 3usize..9, labels in proptest::collection::vec(1i32..=3, 1..4)) {
            let g = LabelledGraph::cycle(n, &labels).unwrap();
            let r = relators_from_graph(&g, n as u64).unwrap();
            for rel in &r.relators {
                prop_assert_eq!(rel.word.canonical(), rel.word.clone());
                prop_assert!(retrace(&g, rel));
            }
        }
    }
}
