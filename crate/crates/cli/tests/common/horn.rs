//! Random non-recursive definite programs and two oracles: a bottom-up
//! fixpoint for truth, and an ordered ground enumeration for answer order.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use rand::Rng;

const CONSTS: [&str; 3] = ["c0", "c1", "c2"];
const VARS: [&str; 3] = ["X", "Y", "Z"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Const(usize),
    Var(usize),
}

#[derive(Debug, Clone)]
pub struct Atom {
    pub pred: usize,
    pub args: Vec<Arg>,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Atom>,
}

#[derive(Debug, Clone)]
pub struct RandomProgram {
    /// (name, arity, level)
    pub preds: Vec<(String, usize, usize)>,
    pub clauses: Vec<Rule>,
    pub query_pred: usize,
}

fn fmt_arg(a: &Arg) -> &'static str {
    match a {
        Arg::Const(c) => CONSTS[*c],
        Arg::Var(v) => VARS[*v],
    }
}

impl RandomProgram {
    pub fn source(&self) -> String {
        let mut s = String::new();
        for c in &self.clauses {
            s.push_str(&self.fmt_atom(&c.head));
            if !c.body.is_empty() {
                s.push_str(" :- ");
                let goals: Vec<String> = c.body.iter().map(|g| self.fmt_atom(g)).collect();
                s.push_str(&goals.join(", "));
            }
            s.push_str(".\n");
        }
        s
    }

    fn fmt_atom(&self, a: &Atom) -> String {
        let mut out = self.preds[a.pred].0.clone();
        out.push('(');
        for (i, arg) in a.args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(fmt_arg(arg));
        }
        out.push(')');
        out
    }

    /// `p(X)` or `p(X, Y)` over the query predicate.
    pub fn query(&self) -> String {
        let (name, arity, _) = &self.preds[self.query_pred];
        let mut q = format!("{name}(X");
        if *arity == 2 {
            q.push_str(", Y");
        }
        q.push(')');
        q
    }

    pub fn query_arity(&self) -> usize {
        self.preds[self.query_pred].1
    }
}

/// At most 4 ground facts and 2 rules over 3 constants. The second rule
/// may build on the first, so derivations run up to two rule levels deep.
pub fn random_program(rng: &mut impl Rng) -> RandomProgram {
    let preds: Vec<(String, usize, usize)> = [("e0", 0), ("e1", 0), ("r0", 1), ("r1", 2)]
        .iter()
        .map(|(name, level)| (name.to_string(), rng.random_range(1..=2), *level))
        .collect();
    let mut clauses = Vec::new();
    for _ in 0..rng.random_range(1..=4) {
        let pred = rng.random_range(0..2);
        let args = (0..preds[pred].1).map(|_| Arg::Const(rng.random_range(0..CONSTS.len()))).collect();
        clauses.push(Rule { head: Atom { pred, args }, body: vec![] });
    }
    let n_rules = rng.random_range(1..=2);
    let stacked = n_rules == 2 && rng.random_bool(0.5);
    for r in 0..n_rules {
        let (head_pred, lower): (usize, &[usize]) = if r == 1 && stacked { (3, &[0, 1, 2]) } else { (2, &[0, 1]) };
        let n_vars = rng.random_range(1..=3);
        let mut body = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            let q = lower[rng.random_range(0..lower.len())];
            let args = (0..preds[q].1)
                .map(|_| if rng.random_bool(0.8) { Arg::Var(rng.random_range(0..n_vars)) } else { Arg::Const(rng.random_range(0..CONSTS.len())) })
                .collect();
            body.push(Atom { pred: q, args });
        }
        if r == 1 && stacked && !body.iter().any(|g| g.pred == 2) {
            let args = (0..preds[2].1).map(|_| Arg::Var(rng.random_range(0..n_vars))).collect();
            body.insert(rng.random_range(0..=body.len()), Atom { pred: 2, args });
        }
        let mut body_vars: Vec<usize> =
            body.iter().flat_map(|g| g.args.iter()).filter_map(|a| match a { Arg::Var(v) => Some(*v), _ => None }).collect();
        body_vars.sort_unstable();
        body_vars.dedup();
        // range-restricted head: every head variable occurs in the body
        let head_args = (0..preds[head_pred].1)
            .map(|_| {
                if !body_vars.is_empty() && rng.random_bool(0.85) {
                    Arg::Var(body_vars[rng.random_range(0..body_vars.len())])
                } else {
                    Arg::Const(rng.random_range(0..CONSTS.len()))
                }
            })
            .collect();
        clauses.push(Rule { head: Atom { pred: head_pred, args: head_args }, body });
    }
    // rules and facts in arbitrary source order
    for i in (1..clauses.len()).rev() {
        let j = rng.random_range(0..=i);
        clauses.swap(i, j);
    }
    let query_pred = if stacked { 3 } else { 2 };
    RandomProgram { preds, clauses, query_pred }
}

type Fact = (usize, Vec<usize>);

/// Least fixpoint by naive forward chaining.
pub fn fixpoint(prog: &RandomProgram) -> HashSet<Fact> {
    let mut facts: HashSet<Fact> = HashSet::new();
    loop {
        let mut added = false;
        for c in &prog.clauses {
            let mut env = [0usize; 3];
            let n = CONSTS.len().pow(3);
            for code in 0..n {
                let mut k = code;
                for slot in env.iter_mut() {
                    *slot = k % CONSTS.len();
                    k /= CONSTS.len();
                }
                let ground = |a: &Atom| -> Fact {
                    (a.pred, a.args.iter().map(|x| match x { Arg::Const(c) => *c, Arg::Var(v) => env[*v] }).collect())
                };
                if c.body.iter().all(|g| facts.contains(&ground(g))) && facts.insert(ground(&c.head)) {
                    added = true;
                }
            }
        }
        if !added {
            return facts;
        }
    }
}

/// Ground answers of `pred(pattern)` in leftmost-goal, source-order, depth-first order.
fn answers(prog: &RandomProgram, pred: usize, pattern: &[Option<usize>]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for c in prog.clauses.iter().filter(|c| c.head.pred == pred) {
        let mut env: BTreeMap<usize, usize> = BTreeMap::new();
        let mut ok = true;
        for (h, p) in c.head.args.iter().zip(pattern) {
            match (h, p) {
                (Arg::Const(a), Some(b)) => ok &= a == b,
                (Arg::Const(_), None) => {}
                (Arg::Var(v), Some(b)) => match env.get(v) {
                    Some(x) => ok &= x == b,
                    None => {
                        env.insert(*v, *b);
                    }
                },
                (Arg::Var(_), None) => {}
            }
        }
        if !ok {
            continue;
        }
        body_answers(prog, &c.body, env, &mut |env| {
            let tuple: Vec<usize> = c
                .head
                .args
                .iter()
                .map(|a| match a {
                    Arg::Const(k) => *k,
                    Arg::Var(v) => env[v],
                })
                .collect();
            out.push(tuple);
        });
    }
    out
}

fn body_answers(prog: &RandomProgram, goals: &[Atom], env: BTreeMap<usize, usize>, emit: &mut dyn FnMut(&BTreeMap<usize, usize>)) {
    let Some((g, rest)) = goals.split_first() else {
        emit(&env);
        return;
    };
    let pattern: Vec<Option<usize>> = g
        .args
        .iter()
        .map(|a| match a {
            Arg::Const(c) => Some(*c),
            Arg::Var(v) => env.get(v).copied(),
        })
        .collect();
    for tuple in answers(prog, g.pred, &pattern) {
        let mut next = env.clone();
        let mut consistent = true;
        for (a, val) in g.args.iter().zip(&tuple) {
            if let Arg::Var(v) = a {
                match next.get(v) {
                    Some(x) => consistent &= x == val,
                    None => {
                        next.insert(*v, *val);
                    }
                }
            }
        }
        if consistent {
            body_answers(prog, rest, next, emit);
        }
    }
}

/// First answer of the query in SLD order, as constant names.
pub fn first_answer(prog: &RandomProgram) -> Option<Vec<&'static str>> {
    let pattern = vec![None; prog.query_arity()];
    answers(prog, prog.query_pred, &pattern).into_iter().next().map(|t| t.into_iter().map(|c| CONSTS[c]).collect())
}

/// Whether any derived fact matches the query.
pub fn query_holds(prog: &RandomProgram, facts: &HashSet<Fact>) -> bool {
    facts.iter().any(|(p, _)| *p == prog.query_pred)
}

pub fn describe(prog: &RandomProgram) -> String {
    let mut s = String::new();
    let _ = write!(s, "?- {}\n{}", prog.query(), prog.source());
    s
}
