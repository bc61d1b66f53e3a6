//! Two-level minimisation of class rules.
//!
//! A rule is mapped into a Boolean space with one atom per binary symbol and
//! one atom `x <= t` per threshold used on a real feature. Assignments that
//! cannot occur (two members of a one-hot block set, a complete block with
//! none set, or a non-monotone threshold chain) are don't-cares.
//!
//! Small rules are minimised exactly (all prime implicants, then a minimum
//! cover); larger ones by an expand / irredundant / merge loop.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules::{render_literal, Dnf, Exclusivity, Literal, Ruleset, Term, Threshold, Var};

/// Exact mode limits.
pub const EXACT_MAX_ATOMS: usize = 16;
pub const EXACT_MAX_TERMS: usize = 1024;

/// Valid spaces up to this size are checked exhaustively by [`equivalent`].
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 20;
/// Random valid assignments drawn when the space is larger.
pub const SAMPLES: usize = 100_000;

/// The heuristic works against explicit on/off tables up to this size.
const TABLE_LIMIT: u64 = 1 << 16;
/// Prime generation gives up beyond this many primes.
const MAX_PRIMES: usize = 20_000;
/// Branch-and-bound node budget for the exact cover.
const MAX_NODES: usize = 200_000;
/// Cube operations allowed for prime generation, and minterm visits for the
/// cover search, before exact mode gives up.
const MAX_WORK: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    Var(Var),
    /// `x[feature] <= threshold`
    AtMost {
        feature: usize,
        threshold: Threshold,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Heuristic,
    #[default]
    Auto,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "heuristic" => Ok(Mode::Heuristic),
            "auto" => Ok(Mode::Auto),
            _ => Err(Error::Config(format!("unknown minimiser mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Group {
    members: Vec<usize>,
    complete: bool,
}

/// Atoms plus the constraints that make some assignments impossible.
#[derive(Debug, Clone)]
pub struct BooleanSpace {
    atoms: Vec<Atom>,
    index: HashMap<Atom, usize>,
    groups: Vec<Group>,
    /// Threshold atoms of one feature, ascending.
    chains: Vec<Vec<usize>>,
    words: usize,
}

type Bits = Vec<u64>;

fn bit(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

fn set_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] |= 1 << (i % 64);
}

fn clear_bit(bits: &mut [u64], i: usize) {
    bits[i / 64] &= !(1 << (i % 64));
}

fn ones(bits: &[u64]) -> impl Iterator<Item = usize> + '_ {
    bits.iter()
        .enumerate()
        .flat_map(|(w, &word)| (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b))
}

/// A product of atom literals: `pos` atoms must be 1, `neg` atoms 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cube {
    pos: Bits,
    neg: Bits,
}

impl Cube {
    fn universe(words: usize) -> Self {
        Cube {
            pos: vec![0; words],
            neg: vec![0; words],
        }
    }

    fn literals(&self) -> usize {
        self.pos.iter().chain(&self.neg).map(|w| w.count_ones() as usize).sum()
    }

    fn is_universe(&self) -> bool {
        self.pos.iter().chain(&self.neg).all(|&w| w == 0)
    }

    /// `self` ⊇ `other` as point sets.
    fn contains(&self, other: &Cube) -> bool {
        self.pos.iter().zip(&other.pos).all(|(a, b)| a & !b == 0)
            && self.neg.iter().zip(&other.neg).all(|(a, b)| a & !b == 0)
    }

    fn intersects(&self, other: &Cube) -> bool {
        self.pos.iter().zip(&other.neg).all(|(a, b)| a & b == 0)
            && self.neg.iter().zip(&other.pos).all(|(a, b)| a & b == 0)
    }

    fn satisfied_by(&self, a: &[u64]) -> bool {
        self.pos.iter().zip(a).all(|(p, x)| p & !x == 0) && self.neg.iter().zip(a).all(|(n, x)| n & x == 0)
    }

    fn care(&self, i: usize) -> Option<bool> {
        if bit(&self.pos, i) {
            Some(true)
        } else if bit(&self.neg, i) {
            Some(false)
        } else {
            None
        }
    }

    fn without(&self, i: usize) -> Cube {
        let mut c = self.clone();
        clear_bit(&mut c.pos, i);
        clear_bit(&mut c.neg, i);
        c
    }

    fn literal_atoms(&self) -> Vec<usize> {
        let mut v: Vec<usize> = ones(&self.pos).chain(ones(&self.neg)).collect();
        v.sort_unstable();
        v
    }

    /// Consensus when the cubes clash on exactly one atom.
    fn consensus(&self, other: &Cube) -> Option<Cube> {
        let mut clash = None;
        for w in 0..self.pos.len() {
            let c = (self.pos[w] & other.neg[w]) | (self.neg[w] & other.pos[w]);
            if c == 0 {
                continue;
            }
            if clash.is_some() || c.count_ones() > 1 {
                return None;
            }
            clash = Some(w * 64 + c.trailing_zeros() as usize);
        }
        let i = clash?;
        let mut out = Cube {
            pos: self.pos.iter().zip(&other.pos).map(|(a, b)| a | b).collect(),
            neg: self.neg.iter().zip(&other.neg).map(|(a, b)| a | b).collect(),
        };
        clear_bit(&mut out.pos, i);
        clear_bit(&mut out.neg, i);
        Some(out)
    }
}

type Cost = (usize, usize);

fn cost(cubes: &[Cube]) -> Cost {
    (cubes.len(), cubes.iter().map(Cube::literals).sum())
}

impl BooleanSpace {
    /// The space spanned by the atoms of `dnfs`, with exclusivity groups
    /// restricted to the columns that appear.
    pub fn new(dnfs: &[&Dnf], excl: &Exclusivity) -> Self {
        let mut atoms: Vec<Atom> = Vec::new();
        for d in dnfs {
            for t in d.terms() {
                atoms.extend(t.bools().map(|(v, _)| Atom::Var(v)));
                for (feature, iv) in t.bounds() {
                    for threshold in [iv.lower, iv.upper].into_iter().flatten() {
                        atoms.push(Atom::AtMost { feature, threshold });
                    }
                }
            }
        }
        atoms.sort();
        atoms.dedup();
        let index: HashMap<Atom, usize> = atoms.iter().enumerate().map(|(i, &a)| (a, i)).collect();

        let groups = excl
            .groups()
            .iter()
            .filter_map(|g| {
                let members: Vec<usize> = g
                    .iter()
                    .filter_map(|&col| index.get(&Atom::Var(Var::Input(col))).copied())
                    .collect();
                let complete = members.len() == g.len();
                (members.len() > 1 || (complete && !members.is_empty())).then_some(Group { members, complete })
            })
            .collect();

        let mut by_feature: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, a) in atoms.iter().enumerate() {
            if let Atom::AtMost { feature, .. } = a {
                by_feature.entry(*feature).or_default().push(i);
            }
        }
        let words = atoms.len().div_ceil(64).max(1);
        BooleanSpace {
            atoms,
            index,
            groups,
            chains: by_feature.into_values().collect(),
            words,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Independent blocks of the space; each option lists the atoms set to 1.
    fn blocks(&self) -> Vec<Vec<Vec<usize>>> {
        let mut claimed = vec![false; self.atoms.len()];
        let mut blocks = Vec::new();
        for g in &self.groups {
            let mut opts: Vec<Vec<usize>> = g.members.iter().map(|&m| vec![m]).collect();
            if !g.complete {
                opts.push(Vec::new());
            }
            for &m in &g.members {
                claimed[m] = true;
            }
            blocks.push(opts);
        }
        for chain in &self.chains {
            // x <= t_k implies x <= t_j for every j > k
            blocks.push((0..=chain.len()).map(|k| chain[k..].to_vec()).collect());
            for &a in chain {
                claimed[a] = true;
            }
        }
        for (a, c) in claimed.iter().enumerate() {
            if !c {
                blocks.push(vec![Vec::new(), vec![a]]);
            }
        }
        blocks
    }

    /// Number of valid assignments, saturating.
    pub fn valid_count(&self) -> u64 {
        self.blocks()
            .iter()
            .fold(1u64, |acc, b| acc.saturating_mul(b.len() as u64))
    }

    /// All valid assignments, in mixed-radix order over the blocks.
    fn enumerate_valid(&self) -> Vec<Bits> {
        let blocks = self.blocks();
        let mut out = Vec::with_capacity(self.valid_count() as usize);
        let mut digits = vec![0usize; blocks.len()];
        loop {
            let mut a = vec![0u64; self.words];
            for (b, &d) in blocks.iter().zip(&digits) {
                for &i in &b[d] {
                    set_bit(&mut a, i);
                }
            }
            out.push(a);
            let mut pos = 0;
            loop {
                if pos == blocks.len() {
                    return out;
                }
                digits[pos] += 1;
                if digits[pos] < blocks[pos].len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }

    fn random_valid(&self, blocks: &[Vec<Vec<usize>>], rng: &mut ChaCha8Rng) -> Bits {
        let mut a = vec![0u64; self.words];
        for b in blocks {
            for &i in &b[rng.gen_range(0..b.len())] {
                set_bit(&mut a, i);
            }
        }
        a
    }

    /// Cubes covering every invalid assignment.
    fn dont_cares(&self) -> Vec<Cube> {
        let mut out = Vec::new();
        for g in &self.groups {
            for (k, &a) in g.members.iter().enumerate() {
                for &b in &g.members[k + 1..] {
                    let mut c = Cube::universe(self.words);
                    set_bit(&mut c.pos, a);
                    set_bit(&mut c.pos, b);
                    out.push(c);
                }
            }
            if g.complete {
                let mut c = Cube::universe(self.words);
                for &m in &g.members {
                    set_bit(&mut c.neg, m);
                }
                out.push(c);
            }
        }
        for chain in &self.chains {
            for w in chain.windows(2) {
                let mut c = Cube::universe(self.words);
                set_bit(&mut c.pos, w[0]);
                set_bit(&mut c.neg, w[1]);
                out.push(c);
            }
        }
        out
    }

    fn cube(&self, t: &Term) -> Result<Cube> {
        let mut c = Cube::universe(self.words);
        let idx = |a: Atom| {
            self.index
                .get(&a)
                .copied()
                .ok_or_else(|| Error::UnknownSymbol(format!("{a:?} is not an atom of this space")))
        };
        for (v, value) in t.bools() {
            let i = idx(Atom::Var(v))?;
            set_bit(if value { &mut c.pos } else { &mut c.neg }, i);
        }
        for (feature, iv) in t.bounds() {
            if let Some(threshold) = iv.upper {
                set_bit(&mut c.pos, idx(Atom::AtMost { feature, threshold })?);
            }
            if let Some(threshold) = iv.lower {
                set_bit(&mut c.neg, idx(Atom::AtMost { feature, threshold })?);
            }
        }
        Ok(c)
    }

    fn cubes(&self, d: &Dnf) -> Result<Vec<Cube>> {
        d.terms().iter().map(|t| self.cube(t)).collect()
    }

    /// `None` for cubes that lie entirely in the don't-care set.
    fn term(&self, c: &Cube) -> Option<Term> {
        let lits = c.literal_atoms().into_iter().map(|i| {
            let value = bit(&c.pos, i);
            match self.atoms[i] {
                Atom::Var(var) => Literal::Is { var, value },
                Atom::AtMost { feature, threshold } if value => Literal::AtMost { feature, threshold },
                Atom::AtMost { feature, threshold } => Literal::Above { feature, threshold },
            }
        });
        Term::from_literals(lits)
    }

    fn dnf(&self, cubes: &[Cube]) -> Dnf {
        Dnf::from_terms(cubes.iter().filter_map(|c| self.term(c)))
    }

    /// Berkeley PLA text for one rule, for inspection with external tools.
    pub fn to_pla(&self, d: &Dnf, names: &[String]) -> Result<String> {
        let cubes = self.cubes(d)?;
        let mut out = String::new();
        writeln!(out, ".i {}\n.o 1", self.atoms.len()).unwrap();
        let labels: Vec<String> = self
            .atoms
            .iter()
            .map(|a| {
                let lit = match *a {
                    Atom::Var(var) => Literal::Is { var, value: true },
                    Atom::AtMost { feature, threshold } => Literal::AtMost { feature, threshold },
                };
                render_literal(&lit, names).replace(' ', "")
            })
            .collect();
        writeln!(out, ".ilb {}\n.ob f\n.p {}", labels.join(" "), cubes.len()).unwrap();
        for c in &cubes {
            let row: String = (0..self.atoms.len())
                .map(|i| match c.care(i) {
                    Some(true) => '1',
                    Some(false) => '0',
                    None => '-',
                })
                .collect();
            writeln!(out, "{row} 1").unwrap();
        }
        out.push_str(".e\n");
        Ok(out)
    }
}

/// Is every point of `c` covered by `cover`?
fn covers(cover: &[Cube], c: &Cube) -> bool {
    let cof: Vec<Cube> = cover
        .iter()
        .filter(|d| d.intersects(c))
        .map(|d| Cube {
            pos: d
                .pos
                .iter()
                .zip(c.pos.iter().zip(&c.neg))
                .map(|(a, (p, n))| a & !(p | n))
                .collect(),
            neg: d
                .neg
                .iter()
                .zip(c.pos.iter().zip(&c.neg))
                .map(|(a, (p, n))| a & !(p | n))
                .collect(),
        })
        .collect();
    tautology(cof)
}

fn tautology(cubes: Vec<Cube>) -> bool {
    if cubes.iter().any(Cube::is_universe) {
        return true;
    }
    if cubes.is_empty() {
        return false;
    }
    let words = cubes[0].pos.len();
    let mut pos_count = vec![0usize; words * 64];
    let mut neg_count = vec![0usize; words * 64];
    for c in &cubes {
        for i in ones(&c.pos) {
            pos_count[i] += 1;
        }
        for i in ones(&c.neg) {
            neg_count[i] += 1;
        }
    }
    // A unate cover without the universal cube is not a tautology.
    let split = (0..words * 64)
        .filter(|&i| pos_count[i] > 0 && neg_count[i] > 0)
        .max_by_key(|&i| (pos_count[i] + neg_count[i], std::cmp::Reverse(i)));
    let Some(v) = split else { return false };
    let branch = |value: bool| -> Vec<Cube> {
        cubes
            .iter()
            .filter(|c| c.care(v) != Some(!value))
            .map(|c| c.without(v))
            .collect()
    };
    tautology(branch(true)) && tautology(branch(false))
}

/// How implicant and redundancy questions are answered.
enum Oracle {
    /// Explicit valid on-set and off-set.
    Table { on: Vec<Bits>, off: Vec<Bits> },
    /// Tautology checks against the function plus its don't-cares.
    Symbolic { care: Vec<Cube>, dc: Vec<Cube> },
}

impl Oracle {
    fn new(space: &BooleanSpace, f: &[Cube]) -> Oracle {
        if space.valid_count() <= TABLE_LIMIT {
            let (on, off) = space
                .enumerate_valid()
                .into_iter()
                .partition(|a| f.iter().any(|c| c.satisfied_by(a)));
            Oracle::Table { on, off }
        } else {
            let dc = space.dont_cares();
            let mut care = f.to_vec();
            care.extend(dc.iter().cloned());
            Oracle::Symbolic { care, dc }
        }
    }

    fn is_implicant(&self, c: &Cube) -> bool {
        match self {
            Oracle::Table { off, .. } => !off.iter().any(|a| c.satisfied_by(a)),
            Oracle::Symbolic { care, .. } => covers(care, c),
        }
    }

    /// Does the cube contain any valid point at all?
    fn reachable(&self, c: &Cube) -> bool {
        match self {
            Oracle::Table { on, off } => on.iter().chain(off).any(|a| c.satisfied_by(a)),
            Oracle::Symbolic { dc, .. } => !covers(dc, c),
        }
    }

    /// Drops cubes whose valid points are all covered by the others.
    fn irredundant(&self, cubes: Vec<Cube>) -> Vec<Cube> {
        // Cubes with most literals go first: they cover least.
        let mut order: Vec<usize> = (0..cubes.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(cubes[i].literals()), i));
        let mut alive = vec![true; cubes.len()];
        match self {
            Oracle::Table { on, .. } => {
                let covered: Vec<Vec<usize>> = cubes
                    .iter()
                    .map(|c| (0..on.len()).filter(|&m| c.satisfied_by(&on[m])).collect())
                    .collect();
                let mut count = vec![0usize; on.len()];
                for ms in &covered {
                    for &m in ms {
                        count[m] += 1;
                    }
                }
                for i in order {
                    if covered[i].iter().all(|&m| count[m] >= 2) {
                        alive[i] = false;
                        for &m in &covered[i] {
                            count[m] -= 1;
                        }
                    }
                }
            }
            Oracle::Symbolic { dc, .. } => {
                for i in order {
                    let others: Vec<Cube> = cubes
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i && alive[j])
                        .map(|(_, c)| c.clone())
                        .chain(dc.iter().cloned())
                        .collect();
                    if covers(&others, &cubes[i]) {
                        alive[i] = false;
                    }
                }
            }
        }
        cubes
            .into_iter()
            .zip(alive)
            .filter_map(|(c, a)| a.then_some(c))
            .collect()
    }
}

/// Removes duplicates and cubes contained in another.
fn single_cube_containment(mut cubes: Vec<Cube>) -> Vec<Cube> {
    cubes.sort_by(|a, b| a.literals().cmp(&b.literals()).then_with(|| a.cmp(b)));
    cubes.dedup();
    let mut kept: Vec<Cube> = Vec::new();
    for c in cubes {
        if !kept.iter().any(|k| k.contains(&c)) {
            kept.push(c);
        }
    }
    kept
}

fn expand(cubes: Vec<Cube>, oracle: &Oracle) -> Vec<Cube> {
    let mut cubes = single_cube_containment(cubes);
    let mut removed = vec![false; cubes.len()];
    for i in 0..cubes.len() {
        if removed[i] {
            continue;
        }
        let mut c = cubes[i].clone();
        for a in c.literal_atoms() {
            let bigger = c.without(a);
            if oracle.is_implicant(&bigger) {
                c = bigger;
            }
        }
        for j in 0..cubes.len() {
            if j != i && !removed[j] && c.contains(&cubes[j]) {
                removed[j] = true;
            }
        }
        cubes[i] = c;
    }
    cubes
        .into_iter()
        .zip(removed)
        .filter_map(|(c, r)| (!r).then_some(c))
        .collect()
}

/// Joins pairs of cubes that differ only in the polarity of one atom.
fn merge(cubes: Vec<Cube>) -> Vec<Cube> {
    let mut set: Vec<Cube> = cubes;
    loop {
        set.sort();
        set.dedup();
        let lookup: HashSet<Cube> = set.iter().cloned().collect();
        let mut merged: Option<(Cube, Cube, Cube)> = None;
        'outer: for c in &set {
            for i in ones(&c.pos) {
                let mut twin = c.clone();
                clear_bit(&mut twin.pos, i);
                set_bit(&mut twin.neg, i);
                if lookup.contains(&twin) {
                    merged = Some((c.clone(), twin, c.without(i)));
                    break 'outer;
                }
            }
        }
        let Some((a, b, m)) = merged else { return set };
        set.retain(|c| *c != a && *c != b);
        set.push(m);
    }
}

fn heuristic(f: &[Cube], oracle: &Oracle) -> Vec<Cube> {
    let mut cubes: Vec<Cube> = f.iter().filter(|c| oracle.reachable(c)).cloned().collect();
    let mut best = cost(&cubes);
    loop {
        cubes = expand(cubes, oracle);
        cubes = oracle.irredundant(cubes);
        cubes = merge(cubes);
        cubes.sort();
        let now = cost(&cubes);
        if now >= best {
            return cubes;
        }
        best = now;
    }
}

/// All prime implicants of `f ∪ dc` by iterated consensus. Each cube is
/// paired once with every cube before it; cubes absorbed by a newer one are
/// dropped. `None` once the prime or work budget runs out.
fn primes(f: &[Cube], dc: &[Cube]) -> Option<Vec<Cube>> {
    let mut cubes = single_cube_containment(f.iter().chain(dc).cloned().collect());
    let mut alive = vec![true; cubes.len()];
    let mut live = cubes.len();
    let mut work = 0usize;
    let mut i = 1;
    while i < cubes.len() {
        for j in 0..i {
            if !alive[i] {
                break;
            }
            if !alive[j] {
                continue;
            }
            let Some(c) = cubes[i].consensus(&cubes[j]) else {
                continue;
            };
            work += cubes.len();
            if work > MAX_WORK {
                return None;
            }
            if (0..cubes.len()).any(|k| alive[k] && cubes[k].contains(&c)) {
                continue;
            }
            for k in 0..cubes.len() {
                if alive[k] && c.contains(&cubes[k]) {
                    alive[k] = false;
                    live -= 1;
                }
            }
            cubes.push(c);
            alive.push(true);
            live += 1;
            if live > MAX_PRIMES {
                return None;
            }
        }
        i += 1;
    }
    let mut out: Vec<Cube> = cubes
        .into_iter()
        .zip(alive)
        .filter_map(|(c, a)| a.then_some(c))
        .collect();
    out.sort();
    Some(out)
}

struct CoverSearch<'a> {
    /// Minterms covered by each candidate.
    covers: &'a [Vec<usize>],
    /// Candidates covering each minterm, cheapest first.
    by_minterm: Vec<Vec<usize>>,
    lits: &'a [usize],
    best: Option<(Cost, Vec<usize>)>,
    nodes: usize,
    max_nodes: usize,
}

impl CoverSearch<'_> {
    fn lower_bound(&self, count: &[usize]) -> usize {
        // Minterms no two of which share a candidate need distinct cubes.
        let mut used = HashSet::new();
        let mut bound = 0;
        for (m, cands) in self.by_minterm.iter().enumerate() {
            if count[m] == 0 && cands.iter().all(|c| !used.contains(c)) {
                bound += 1;
                used.extend(cands.iter().copied());
            }
        }
        bound
    }

    fn search(&mut self, chosen: &mut Vec<usize>, count: &mut [usize], lits: usize) {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return;
        }
        let target = (0..count.len())
            .filter(|&m| count[m] == 0)
            .min_by_key(|&m| (self.by_minterm[m].len(), m));
        let Some(m) = target else {
            let c = (chosen.len(), lits);
            if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
                let mut sel = chosen.clone();
                sel.sort_unstable();
                self.best = Some((c, sel));
            }
            return;
        };
        if let Some(((terms, best_lits), _)) = self.best {
            if (chosen.len() + self.lower_bound(count), lits) >= (terms, best_lits) {
                return;
            }
        }
        for p in self.by_minterm[m].clone() {
            chosen.push(p);
            for &q in &self.covers[p] {
                count[q] += 1;
            }
            self.search(chosen, count, lits + self.lits[p]);
            for &q in &self.covers[p] {
                count[q] -= 1;
            }
            chosen.pop();
        }
    }
}

/// Minimum cover of the on-set by primes; `None` if the search budget ran out.
fn exact(space: &BooleanSpace, f: &[Cube]) -> Option<Vec<Cube>> {
    let on: Vec<Bits> = space
        .enumerate_valid()
        .into_iter()
        .filter(|a| f.iter().any(|c| c.satisfied_by(a)))
        .collect();
    if on.is_empty() {
        return Some(Vec::new());
    }
    let primes: Vec<Cube> = primes(f, &space.dont_cares())?;
    if primes.len().saturating_mul(on.len()) > MAX_WORK {
        return None;
    }
    let candidates: Vec<(Cube, Vec<usize>)> = primes
        .into_iter()
        .map(|p| {
            let ms = (0..on.len()).filter(|&m| p.satisfied_by(&on[m])).collect::<Vec<_>>();
            (p, ms)
        })
        .filter(|(_, ms)| !ms.is_empty())
        .collect();
    let covers: Vec<Vec<usize>> = candidates.iter().map(|(_, ms)| ms.clone()).collect();
    let lits: Vec<usize> = candidates.iter().map(|(p, _)| p.literals()).collect();
    let mut by_minterm = vec![Vec::new(); on.len()];
    for (p, ms) in covers.iter().enumerate() {
        for &m in ms {
            by_minterm[m].push(p);
        }
    }
    for cands in &mut by_minterm {
        cands.sort_by_key(|&p| (std::cmp::Reverse(covers[p].len()), lits[p], p));
    }
    let mut search = CoverSearch {
        covers: &covers,
        by_minterm,
        lits: &lits,
        best: None,
        nodes: 0,
        max_nodes: MAX_NODES.min(MAX_WORK / on.len()),
    };
    let mut count = vec![0usize; on.len()];
    search.search(&mut Vec::new(), &mut count, 0);
    if search.nodes > search.max_nodes {
        return None;
    }
    let (_, sel) = search.best?;
    Some(sel.into_iter().map(|p| candidates[p].0.clone()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    pub dnf: Dnf,
    /// `Exact` or `Heuristic`: the procedure whose result was kept.
    pub mode: Mode,
    /// Why the requested procedure's result was not used, if it wasn't.
    pub fallback: Option<String>,
}

/// Minimises one rule. The result is equivalent to `dnf` on every valid
/// assignment and has no more terms and no more literals.
pub fn minimize(dnf: &Dnf, excl: &Exclusivity, mode: Mode) -> Result<Minimized> {
    let space = BooleanSpace::new(&[dnf], excl);
    let f = space.cubes(dnf)?;
    let input_cost = (dnf.len(), dnf.literal_count());
    let small = space.len() <= EXACT_MAX_ATOMS && dnf.len() <= EXACT_MAX_TERMS;
    if mode == Mode::Exact && !small {
        return Err(Error::ExactTooLarge {
            atoms: space.len(),
            terms: dnf.len(),
            max_atoms: EXACT_MAX_ATOMS,
            max_terms: EXACT_MAX_TERMS,
        });
    }
    let fits = |d: &Dnf| d.len() <= input_cost.0 && d.literal_count() <= input_cost.1;
    let run_heuristic = || space.dnf(&heuristic(&f, &Oracle::new(&space, &f)));

    if mode != Mode::Heuristic && small {
        let fallback = match exact(&space, &f) {
            Some(cover) => {
                let d = space.dnf(&cover);
                if fits(&d) {
                    return Ok(Minimized {
                        dnf: d,
                        mode: Mode::Exact,
                        fallback: None,
                    });
                }
                "minimum cover has more literals than the input"
            }
            None => "exact search budget exhausted",
        };
        let d = run_heuristic();
        return Ok(Minimized {
            dnf: if fits(&d) { d } else { dnf.clone() },
            mode: Mode::Heuristic,
            fallback: Some(fallback.to_string()),
        });
    }
    let d = run_heuristic();
    Ok(if fits(&d) {
        Minimized {
            dnf: d,
            mode: Mode::Heuristic,
            fallback: None,
        }
    } else {
        Minimized {
            dnf: dnf.clone(),
            mode: Mode::Heuristic,
            fallback: Some("heuristic result larger than input".into()),
        }
    })
}

/// Minimises every class rule; the conflict policy is kept unchanged.
pub fn minimize_ruleset(rs: &Ruleset, excl: &Exclusivity, mode: Mode) -> Result<(Ruleset, Vec<Minimized>)> {
    let results: Vec<Minimized> = rs
        .rules
        .iter()
        .map(|d| minimize(d, excl, mode))
        .collect::<Result<_>>()?;
    let rules = results.iter().map(|m| m.dnf.clone()).collect();
    Ok((rs.with_rules(rules), results))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Equivalence {
    pub equal: bool,
    /// True when only a random sample of valid assignments was checked.
    pub sampled: bool,
    pub checked: u64,
    /// A valid assignment on which the rules differ, atom by atom.
    pub witness: Option<Vec<(Atom, bool)>>,
}

/// Compares two rules on the valid assignments of their joint space.
pub fn equivalent(a: &Dnf, b: &Dnf, excl: &Exclusivity, seed: u64) -> Result<Equivalence> {
    let space = BooleanSpace::new(&[a, b], excl);
    let ca = space.cubes(a)?;
    let cb = space.cubes(b)?;
    let differs = |x: &Bits| ca.iter().any(|c| c.satisfied_by(x)) != cb.iter().any(|c| c.satisfied_by(x));
    let witness = |x: &Bits| {
        Some(
            space
                .atoms
                .iter()
                .enumerate()
                .map(|(i, &atom)| (atom, bit(x, i)))
                .collect(),
        )
    };
    let total = space.valid_count();
    if total <= EXHAUSTIVE_LIMIT {
        let all = space.enumerate_valid();
        let bad = all.iter().find(|x| differs(x));
        return Ok(Equivalence {
            equal: bad.is_none(),
            sampled: false,
            checked: total,
            witness: bad.and_then(witness),
        });
    }
    let blocks = space.blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLES {
        let x = space.random_valid(&blocks, &mut rng);
        if differs(&x) {
            return Ok(Equivalence {
                equal: false,
                sampled: true,
                checked: SAMPLES as u64,
                witness: witness(&x),
            });
        }
    }
    Ok(Equivalence {
        equal: true,
        sampled: true,
        checked: SAMPLES as u64,
        witness: None,
    })
}
