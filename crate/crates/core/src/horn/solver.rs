//! SLD resolution with leftmost goal selection, source-order clause trial and
//! depth-first search. Bindings live in a trail-backed store so backtracking is O(undo).

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use thiserror::Error;

use super::term::{is_comparison, Program, Term};

pub const DEFAULT_DEPTH_LIMIT: usize = 10_000;
pub const DEFAULT_EXPLORED_LIMIT: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("nontermination: resolution depth exceeded {limit}")]
    DepthLimit { limit: usize },
    #[error("nontermination: more than {limit} resolution steps explored")]
    ExploredLimit { limit: u64 },
    #[error("instantiation error: {0}")]
    Instantiation(String),
    #[error("query must not be a variable or number, got `{0}`")]
    BadQuery(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Maximum number of resolution steps on a single derivation path.
    pub depth_limit: usize,
    /// Maximum resolution steps over the whole search, backtracking included.
    pub explored_limit: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { depth_limit: DEFAULT_DEPTH_LIMIT, explored_limit: DEFAULT_EXPLORED_LIMIT }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProofResult {
    pub success: bool,
    pub bindings: BTreeMap<String, Term>,
    /// Clause-resolution steps on the returned proof.
    pub steps: u64,
    /// Clause-resolution steps performed overall, including backtracked branches.
    pub explored: u64,
}

#[derive(Debug, Clone)]
enum Tm {
    Var(usize),
    Atom(u32),
    Int(i64),
    Cmp(u32, Rc<[Tm]>),
}

struct CompiledClause {
    head: Tm,
    body: Vec<Tm>,
    nvars: usize,
}

#[derive(Default)]
struct Symbols {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }
}

fn compile_term(t: &Term, syms: &mut Symbols, vars: &mut Vec<String>) -> Tm {
    match t {
        Term::Var(name) => {
            let idx = vars.iter().position(|v| v == name).unwrap_or_else(|| {
                vars.push(name.clone());
                vars.len() - 1
            });
            Tm::Var(idx)
        }
        Term::Atom(a) => Tm::Atom(syms.intern(a)),
        Term::Int(i) => Tm::Int(*i),
        Term::Compound(f, args) => {
            let f = syms.intern(f);
            Tm::Cmp(f, args.iter().map(|a| compile_term(a, syms, vars)).collect())
        }
    }
}

/// A program compiled for repeated querying. Immutable; one per program text.
pub struct CompiledProgram {
    syms: Symbols,
    clauses: Vec<CompiledClause>,
    index: HashMap<(u32, usize), Vec<usize>>,
    comparison_ids: Vec<u32>,
}

impl CompiledProgram {
    pub fn new(program: &Program) -> Self {
        let mut syms = Symbols::default();
        let mut clauses = Vec::with_capacity(program.clauses.len());
        let mut index: HashMap<(u32, usize), Vec<usize>> = HashMap::new();
        for clause in &program.clauses {
            let mut vars = Vec::new();
            let head = compile_term(&clause.head, &mut syms, &mut vars);
            let body = clause.body.iter().map(|g| compile_term(g, &mut syms, &mut vars)).collect();
            let key = match &head {
                Tm::Atom(a) => (*a, 0),
                Tm::Cmp(f, args) => (*f, args.len()),
                _ => unreachable!("parser rejects non-callable heads"),
            };
            index.entry(key).or_default().push(clauses.len());
            clauses.push(CompiledClause { head, body, nvars: vars.len() });
        }
        let comparison_ids = super::term::COMPARISON_OPS.iter().map(|op| syms.intern(op)).collect();
        CompiledProgram { syms, clauses, index, comparison_ids }
    }

    /// First solution of `query`.
    pub fn solve(&self, query: &Term, opts: SolveOptions) -> Result<ProofResult, SolveError> {
        let mut solver = Solver::new(self, query, opts)?;
        match solver.next_solution()? {
            Some(r) => Ok(r),
            None => Ok(ProofResult { explored: solver.explored, ..ProofResult::default() }),
        }
    }

    /// Up to `limit` solutions in SLD order.
    pub fn solve_all(&self, query: &Term, opts: SolveOptions, limit: usize) -> Result<Vec<ProofResult>, SolveError> {
        let mut solver = Solver::new(self, query, opts)?;
        let mut out = Vec::new();
        while out.len() < limit {
            match solver.next_solution()? {
                Some(r) => out.push(r),
                None => break,
            }
        }
        Ok(out)
    }
}

pub fn solve(program: &Program, query: &Term) -> Result<ProofResult, SolveError> {
    CompiledProgram::new(program).solve(query, SolveOptions::default())
}

pub fn solve_with(program: &Program, query: &Term, opts: SolveOptions) -> Result<ProofResult, SolveError> {
    CompiledProgram::new(program).solve(query, opts)
}

struct GoalNode {
    goal: Tm,
    next: Goals,
}

type Goals = Option<Rc<GoalNode>>;

impl Drop for GoalNode {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(rc) = next {
            match Rc::try_unwrap(rc) {
                Ok(mut node) => next = node.next.take(),
                Err(_) => break,
            }
        }
    }
}

fn push(goal: Tm, next: Goals) -> Goals {
    Some(Rc::new(GoalNode { goal, next }))
}

struct ChoicePoint {
    goal: Tm,
    rest: Goals,
    next_clause: usize,
    trail_len: usize,
    var_top: usize,
    steps: u64,
}

/// Lazily enumerates solutions of one query.
pub struct Solver<'p> {
    prog: &'p CompiledProgram,
    opts: SolveOptions,
    bindings: Vec<Option<Tm>>,
    trail: Vec<usize>,
    choices: Vec<ChoicePoint>,
    goals: Goals,
    steps: u64,
    explored: u64,
    query_vars: Vec<String>,
    names: Vec<String>,
    started: bool,
    exhausted: bool,
}

enum Flow {
    Continue,
    Fail,
}

impl<'p> Solver<'p> {
    pub fn new(prog: &'p CompiledProgram, query: &Term, opts: SolveOptions) -> Result<Self, SolveError> {
        if matches!(query, Term::Var(_) | Term::Int(_)) {
            return Err(SolveError::BadQuery(query.to_string()));
        }
        // Query symbols absent from the program cannot match; intern into a scratch table.
        let mut syms = Symbols { names: prog.syms.names.clone(), ids: prog.syms.ids.clone() };
        let mut vars = Vec::new();
        let goal = compile_term(query, &mut syms, &mut vars);
        Ok(Solver {
            prog,
            opts,
            bindings: vec![None; vars.len()],
            trail: Vec::new(),
            choices: Vec::new(),
            goals: push(goal, None),
            steps: 0,
            explored: 0,
            query_vars: vars,
            names: syms.names,
            started: false,
            exhausted: false,
        })
    }

    fn deref(&self, t: &Tm) -> Tm {
        let mut cur = t.clone();
        while let Tm::Var(v) = cur {
            match &self.bindings[v] {
                Some(b) => cur = b.clone(),
                None => return Tm::Var(v),
            }
        }
        cur
    }

    fn bind(&mut self, v: usize, t: Tm) {
        self.bindings[v] = Some(t);
        self.trail.push(v);
    }

    fn unify(&mut self, a: &Tm, b: &Tm) -> bool {
        let mut stack = vec![(a.clone(), b.clone())];
        while let Some((x, y)) = stack.pop() {
            let x = self.deref(&x);
            let y = self.deref(&y);
            match (&x, &y) {
                (Tm::Var(i), Tm::Var(j)) if i == j => {}
                (Tm::Var(i), _) => self.bind(*i, y),
                (_, Tm::Var(j)) => self.bind(*j, x),
                (Tm::Atom(p), Tm::Atom(q)) if p == q => {}
                (Tm::Int(p), Tm::Int(q)) if p == q => {}
                (Tm::Cmp(f, xs), Tm::Cmp(g, ys)) if f == g && xs.len() == ys.len() => {
                    stack.extend(xs.iter().cloned().zip(ys.iter().cloned()));
                }
                _ => return false,
            }
        }
        true
    }

    fn undo(&mut self, trail_len: usize, var_top: usize) {
        while self.trail.len() > trail_len {
            let v = self.trail.pop().expect("trail");
            self.bindings[v] = None;
        }
        self.bindings.truncate(var_top);
    }

    fn rename(t: &Tm, offset: usize) -> Tm {
        match t {
            Tm::Var(v) => Tm::Var(v + offset),
            Tm::Cmp(f, args) => Tm::Cmp(*f, args.iter().map(|a| Self::rename(a, offset)).collect()),
            other => other.clone(),
        }
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    fn to_term(&self, t: &Tm) -> Term {
        match self.deref(t) {
            Tm::Var(v) => Term::Var(format!("_G{v}")),
            Tm::Atom(a) => Term::Atom(self.name(a).to_string()),
            Tm::Int(i) => Term::Int(i),
            Tm::Cmp(f, args) => Term::Compound(self.name(f).to_string(), args.iter().map(|a| self.to_term(a)).collect()),
        }
    }

    fn compare(&self, op: &str, args: &[Tm]) -> Result<bool, SolveError> {
        let mut vals = [0i64; 2];
        for (slot, a) in vals.iter_mut().zip(args) {
            match self.deref(a) {
                Tm::Int(i) => *slot = i,
                Tm::Var(_) => {
                    return Err(SolveError::Instantiation(format!("unbound argument to `{op}`")));
                }
                other => {
                    return Err(SolveError::Instantiation(format!(
                        "non-integer argument `{}` to `{op}`",
                        self.to_term(&other)
                    )));
                }
            }
        }
        let [l, r] = vals;
        Ok(match op {
            "<" => l < r,
            ">" => l > r,
            "=<" => l <= r,
            ">=" => l >= r,
            _ => l == r,
        })
    }

    /// Tries clauses for `goal` starting at candidate `start`; on success the goal list is updated.
    fn resolve(&mut self, goal: Tm, rest: Goals, start: usize, steps_before: u64) -> Result<Flow, SolveError> {
        let key = match &goal {
            Tm::Atom(a) => (*a, 0),
            Tm::Cmp(f, args) => (*f, args.len()),
            _ => return Ok(Flow::Fail),
        };
        let Some(cands) = self.prog.index.get(&key) else {
            return Ok(Flow::Fail);
        };
        for (pos, &ci) in cands.iter().enumerate().skip(start) {
            let clause = &self.prog.clauses[ci];
            let trail_len = self.trail.len();
            let var_top = self.bindings.len();
            self.bindings.resize(var_top + clause.nvars, None);
            let head = Self::rename(&clause.head, var_top);
            if !self.unify(&goal, &head) {
                self.undo(trail_len, var_top);
                continue;
            }
            if pos + 1 < cands.len() {
                self.choices.push(ChoicePoint {
                    goal: goal.clone(),
                    rest: rest.clone(),
                    next_clause: pos + 1,
                    trail_len,
                    var_top,
                    steps: steps_before,
                });
            }
            self.steps = steps_before + 1;
            self.explored += 1;
            if self.steps as usize > self.opts.depth_limit {
                return Err(SolveError::DepthLimit { limit: self.opts.depth_limit });
            }
            if self.explored > self.opts.explored_limit {
                return Err(SolveError::ExploredLimit { limit: self.opts.explored_limit });
            }
            let mut goals = rest;
            for g in clause.body.iter().rev() {
                goals = push(Self::rename(g, var_top), goals);
            }
            self.goals = goals;
            return Ok(Flow::Continue);
        }
        Ok(Flow::Fail)
    }

    fn backtrack(&mut self) -> Result<bool, SolveError> {
        while let Some(cp) = self.choices.pop() {
            self.undo(cp.trail_len, cp.var_top);
            if let Flow::Continue = self.resolve(cp.goal, cp.rest, cp.next_clause, cp.steps)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn next_solution(&mut self) -> Result<Option<ProofResult>, SolveError> {
        if self.exhausted {
            return Ok(None);
        }
        if self.started && !self.backtrack()? {
            self.exhausted = true;
            return Ok(None);
        }
        self.started = true;
        loop {
            let Some(node) = self.goals.clone() else {
                let bindings = self
                    .query_vars
                    .iter()
                    .enumerate()
                    .filter(|(_, name)| !name.starts_with('_'))
                    .map(|(i, name)| (name.clone(), self.to_term(&Tm::Var(i))))
                    .collect();
                return Ok(Some(ProofResult { success: true, bindings, steps: self.steps, explored: self.explored }));
            };
            let goal = self.deref(&node.goal);
            let rest = node.next.clone();
            drop(node);
            let flow = match &goal {
                Tm::Var(_) => return Err(SolveError::Instantiation("goal is an unbound variable".into())),
                Tm::Int(_) => Flow::Fail,
                Tm::Cmp(f, args) if args.len() == 2 && self.prog.comparison_ids.contains(f) => {
                    let op = self.name(*f).to_string();
                    debug_assert!(is_comparison(&op, 2));
                    if self.compare(&op, args)? {
                        self.goals = rest;
                        Flow::Continue
                    } else {
                        Flow::Fail
                    }
                }
                _ => self.resolve(goal, rest, 0, self.steps)?,
            };
            if let Flow::Fail = flow {
                if !self.backtrack()? {
                    self.exhausted = true;
                    return Ok(None);
                }
            }
        }
    }

    pub fn explored(&self) -> u64 {
        self.explored
    }
}
