//! Compilation of policy expressions into table-driven monitors.
//!
//! Every DFA reads one valuation per step: a bitset whose bit `i` says
//! whether `atoms[i]` holds for the current event. Transitions are
//! precomputed for every (state, valuation) pair, so stepping is a single
//! table lookup.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dsl::{Atom, PolicyExpr};
use crate::error::{CompileError, MonitorError};

/// Largest atom alphabet a single compiled rule may use.
pub const MAX_ATOMS: usize = 30;

/// Cap on `state_count * 2^atoms`, the transition table size.
pub const MAX_TABLE_ENTRIES: usize = 1 << 24;

/// Bitset over a DFA's atom sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Valuation(pub u32);

impl Valuation {
    pub fn from_bits(bits: &[bool]) -> Valuation {
        Valuation(
            bits.iter()
                .enumerate()
                .fold(0, |acc, (i, &b)| acc | (u32::from(b) << i)),
        )
    }

    pub fn holds(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    pub fn set(&mut self, index: usize) {
        self.0 |= 1 << index;
    }
}

/// Outcome of running a monitor over a complete finite trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "index", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceVerdict {
    /// First step (0-based) at which the property became violated.
    Violated(usize),
    /// The trace ended with an obligation still open.
    Pending,
    Satisfied,
}

const VIOLATING: u8 = 1;
const PENDING: u8 = 2;
const SATISFIED: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    atoms: Vec<Atom>,
    state_count: usize,
    initial: u32,
    /// Row-major: `table[state << atoms.len() | valuation]`.
    table: Vec<u32>,
    flags: Vec<u8>,
}

impl Dfa {
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn initial(&self) -> usize {
        self.initial as usize
    }

    pub fn is_violating(&self, state: usize) -> bool {
        self.flags[state] & VIOLATING != 0
    }

    pub fn is_pending(&self, state: usize) -> bool {
        self.flags[state] & PENDING != 0
    }

    pub fn is_satisfied_absorbing(&self, state: usize) -> bool {
        self.flags[state] & SATISFIED != 0
    }

    pub fn violating(&self) -> BTreeSet<usize> {
        self.states_with(VIOLATING)
    }

    pub fn pending(&self) -> BTreeSet<usize> {
        self.states_with(PENDING)
    }

    pub fn satisfied_absorbing(&self) -> BTreeSet<usize> {
        self.states_with(SATISFIED)
    }

    fn states_with(&self, flag: u8) -> BTreeSet<usize> {
        (0..self.state_count)
            .filter(|&s| self.flags[s] & flag != 0)
            .collect()
    }

    /// Number of distinct valuations, `2^atoms`.
    pub fn alphabet_size(&self) -> usize {
        1 << self.atoms.len()
    }

    /// Table lookup. Bits above the atom count are ignored.
    pub fn step(&self, state: usize, valuation: Valuation) -> Result<usize, MonitorError> {
        if state >= self.state_count {
            return Err(MonitorError::StateOutOfRange {
                state,
                count: self.state_count,
            });
        }
        Ok(self.step_unchecked(state, valuation))
    }

    #[inline]
    pub(crate) fn step_unchecked(&self, state: usize, valuation: Valuation) -> usize {
        let mask = (1u32 << self.atoms.len()) - 1;
        self.table[(state << self.atoms.len()) | (valuation.0 & mask) as usize] as usize
    }

    /// Runs the monitor from the initial state and classifies the trace.
    pub fn run(&self, trace: &[Valuation]) -> TraceVerdict {
        let mut state = self.initial();
        for (i, &v) in trace.iter().enumerate() {
            state = self.step_unchecked(state, v);
            if self.is_violating(state) {
                return TraceVerdict::Violated(i);
            }
        }
        if self.is_pending(state) {
            TraceVerdict::Pending
        } else {
            TraceVerdict::Satisfied
        }
    }

    /// Builds a DFA by evaluating `delta` on every (state, valuation) pair.
    /// `holds(atom)` inside `delta` reads the current valuation.
    fn tabulate(
        atoms: Vec<Atom>,
        state_count: usize,
        flags: Vec<u8>,
        delta: impl Fn(usize, &dyn Fn(&Atom) -> bool) -> usize,
    ) -> Result<Dfa, CompileError> {
        check_size(atoms.len(), state_count)?;
        let width = 1usize << atoms.len();
        let mut table = Vec::with_capacity(state_count * width);
        for state in 0..state_count {
            for v in 0..width {
                let valuation = Valuation(v as u32);
                let holds = |a: &Atom| {
                    let i = atoms.iter().position(|x| x == a).expect("atom in alphabet");
                    valuation.holds(i)
                };
                table.push(delta(state, &holds) as u32);
            }
        }
        Ok(Dfa {
            atoms,
            state_count,
            initial: 0,
            table,
            flags,
        })
    }
}

fn check_size(atom_count: usize, state_count: usize) -> Result<(), CompileError> {
    if atom_count > MAX_ATOMS {
        return Err(CompileError::TooManyAtoms(atom_count));
    }
    let entries = state_count.checked_shl(atom_count as u32).filter(|_| atom_count < usize::BITS as usize);
    match entries {
        Some(n) if n <= MAX_TABLE_ENTRIES && state_count <= u32::MAX as usize => Ok(()),
        _ => Err(CompileError::TableTooLarge {
            states: state_count,
            atoms: atom_count,
        }),
    }
}

/// Compiles an expression into its monitor.
///
/// | form | states |
/// |---|---|
/// | `G !a` | 2 |
/// | `a -> F b` | 3 |
/// | `a U b` | 3 |
/// | `a -> F[<=k] b` | k + 2 |
/// | chain with n obligations | n + 2 (n + 1 progress states and the violation state) |
/// | `(A) AND (B)`, `(A) OR (B)` | \|Q_A\| × \|Q_B\| |
pub fn compile(expr: &PolicyExpr) -> Result<Dfa, CompileError> {
    let atoms = expr.atoms();
    if atoms.len() > MAX_ATOMS {
        return Err(CompileError::TooManyAtoms(atoms.len()));
    }
    match expr {
        PolicyExpr::Forbidden(a) => forbidden(a),
        PolicyExpr::ImplFuture {
            trigger,
            obligation,
        } => chain(trigger, std::slice::from_ref(obligation)),
        PolicyExpr::Chain {
            trigger,
            obligations,
        } => chain(trigger, obligations),
        PolicyExpr::Until { holder, release } => until(holder, release),
        PolicyExpr::Bounded {
            trigger,
            obligation,
            k,
        } => bounded(trigger, obligation, *k as usize),
        PolicyExpr::And(l, r) => product(&compile(l)?, &compile(r)?, Combine::And),
        PolicyExpr::Or(l, r) => product(&compile(l)?, &compile(r)?, Combine::Or),
    }
}

fn dedup(atoms: &[&Atom]) -> Vec<Atom> {
    let mut out: Vec<Atom> = Vec::new();
    for a in atoms {
        if !out.contains(a) {
            out.push((*a).clone());
        }
    }
    out
}

/// 0 = safe, 1 = violated.
fn forbidden(atom: &Atom) -> Result<Dfa, CompileError> {
    Dfa::tabulate(dedup(&[atom]), 2, vec![0, VIOLATING], |s, holds| {
        if s == 1 || holds(atom) {
            1
        } else {
            0
        }
    })
}

/// 0 = waiting for the release, 1 = released (absorbing), 2 = violated.
fn until(holder: &Atom, release: &Atom) -> Result<Dfa, CompileError> {
    Dfa::tabulate(
        dedup(&[holder, release]),
        3,
        vec![PENDING, SATISFIED, VIOLATING],
        |s, holds| match s {
            0 if holds(release) => 1,
            0 if holds(holder) => 0,
            0 => 2,
            s => s,
        },
    )
}

/// 0 = idle, `j` in 1..=k = obligation open with `j` steps of budget left,
/// k + 1 = violated.
fn bounded(trigger: &Atom, obligation: &Atom, k: usize) -> Result<Dfa, CompileError> {
    let states = k.checked_add(2).ok_or(CompileError::TableTooLarge {
        states: usize::MAX,
        atoms: 2,
    })?;
    check_size(2, states)?;
    let violated = k + 1;
    let mut flags = vec![PENDING; states];
    flags[0] = 0;
    flags[violated] = VIOLATING;
    Dfa::tabulate(dedup(&[trigger, obligation]), states, flags, |s, holds| {
        if s == violated {
            violated
        } else if s == 0 {
            if holds(trigger) && !holds(obligation) {
                k
            } else {
                0
            }
        } else if holds(obligation) {
            0
        } else if s == 1 {
            violated
        } else {
            s - 1
        }
    })
}

/// 0 = idle, `i` in 1..=n = waiting for obligation `i`, n + 1 = violated.
///
/// One obligation is discharged per step. A step that completes the chain
/// while the trigger holds starts a fresh chain; a trigger on a step that
/// makes no progress while a chain is open is a violation.
fn chain(trigger: &Atom, obligations: &[Atom]) -> Result<Dfa, CompileError> {
    let n = obligations.len();
    let violated = n + 1;
    let mut all: Vec<&Atom> = vec![trigger];
    all.extend(obligations);
    let mut flags = vec![PENDING; n + 2];
    flags[0] = 0;
    flags[violated] = VIOLATING;
    let advance = |i: usize| if i == n { 0 } else { i + 1 };
    Dfa::tabulate(dedup(&all), n + 2, flags, |s, holds| {
        let start = |holds: &dyn Fn(&Atom) -> bool| {
            if holds(&obligations[0]) {
                advance(1)
            } else {
                1
            }
        };
        if s == violated {
            violated
        } else if s == 0 {
            if holds(trigger) {
                start(holds)
            } else {
                0
            }
        } else if holds(&obligations[s - 1]) {
            match advance(s) {
                0 if holds(trigger) => start(holds),
                next => next,
            }
        } else if holds(trigger) {
            violated
        } else {
            s
        }
    })
}

/// Synchronous product of two monitors over the union of their atoms
/// (left atoms first, then right atoms not already present).
pub fn product(left: &Dfa, right: &Dfa, mode: Combine) -> Result<Dfa, CompileError> {
    let mut atoms = left.atoms.clone();
    for a in &right.atoms {
        if !atoms.contains(a) {
            atoms.push(a.clone());
        }
    }
    let rq = right.state_count;
    let state_count = left
        .state_count
        .checked_mul(rq)
        .ok_or(CompileError::TableTooLarge {
            states: usize::MAX,
            atoms: atoms.len(),
        })?;
    check_size(atoms.len(), state_count)?;

    let width = 1usize << atoms.len();
    let left_mask = (1u32 << left.atoms.len()) - 1;
    let right_pos: Vec<usize> = right
        .atoms
        .iter()
        .map(|a| atoms.iter().position(|x| x == a).expect("union contains right atoms"))
        .collect();
    let right_vals: Vec<Valuation> = (0..width as u32)
        .map(|v| {
            let mut rv = Valuation::default();
            for (j, &p) in right_pos.iter().enumerate() {
                if Valuation(v).holds(p) {
                    rv.set(j);
                }
            }
            rv
        })
        .collect();

    let flags: Vec<u8> = (0..state_count)
        .map(|s| {
            let (l, r) = (s / rq, s % rq);
            let (lv, rv) = (left.is_violating(l), right.is_violating(r));
            let (lp, rp) = (left.is_pending(l), right.is_pending(r));
            let (ls, rs) = (left.is_satisfied_absorbing(l), right.is_satisfied_absorbing(r));
            let (viol, pend, sat) = match mode {
                Combine::And => (lv || rv, (lp || rp) && !(lv || rv), ls && rs),
                Combine::Or => (lv && rv, (lp && rp) || (lp && rv) || (lv && rp), ls || rs),
            };
            (u8::from(viol) * VIOLATING) | (u8::from(pend) * PENDING) | (u8::from(sat) * SATISFIED)
        })
        .collect();

    let mut table = Vec::with_capacity(state_count * width);
    for (s, &flag) in flags.iter().enumerate() {
        let (l, r) = (s / rq, s % rq);
        // A combined violation is final even if one side could still move.
        if flag & VIOLATING != 0 {
            table.extend(std::iter::repeat_n(s as u32, width));
            continue;
        }
        for (v, &rv) in right_vals.iter().enumerate() {
            let nl = left.step_unchecked(l, Valuation(v as u32 & left_mask));
            let nr = right.step_unchecked(r, rv);
            table.push((nl * rq + nr) as u32);
        }
    }
    Ok(Dfa {
        atoms,
        state_count,
        initial: (left.initial() * rq + right.initial()) as u32,
        table,
        flags,
    })
}
