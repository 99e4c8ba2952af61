//! Parser for the definite-clause subset: `.`-terminated clauses, `:-` rules,
//! integer comparisons in bodies, quoted atoms, `%` line and `/* */` block comments.

use std::fmt;

use thiserror::Error;

use super::term::{Clause, Program, Term, COMPARISON_OPS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at line {line}, column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Atom(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    End,
    Neck,
    Op(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Atom(a) => write!(f, "atom `{a}`"),
            Tok::Var(v) => write!(f, "variable `{v}`"),
            Tok::Int(i) => write!(f, "integer `{i}`"),
            Tok::LParen => f.write_str("\"(\""),
            Tok::RParen => f.write_str("\")\""),
            Tok::Comma => f.write_str("\",\""),
            Tok::End => f.write_str("\".\""),
            Tok::Neck => f.write_str("\":-\""),
            Tok::Op(op) => write!(f, "operator `{op}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { chars: src.chars().peekable(), line: 1, column: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, expected: &str, found: impl Into<String>) -> ParseError {
        ParseError { line: self.line, column: self.column, expected: expected.into(), found: found.into() }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('%') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('/') => {
                    let mut look = self.chars.clone();
                    look.next();
                    if look.peek() != Some(&'*') {
                        return Ok(());
                    }
                    let (line, column) = (self.line, self.column);
                    self.bump();
                    self.bump();
                    let mut prev = '\0';
                    loop {
                        match self.bump() {
                            Some('/') if prev == '*' => break,
                            Some(c) => prev = c,
                            None => {
                                return Err(ParseError {
                                    line,
                                    column,
                                    expected: "\"*/\" closing block comment".into(),
                                    found: "end of input".into(),
                                })
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_token(&mut self) -> Result<Spanned, ParseError> {
        self.skip_trivia()?;
        let (line, column) = (self.line, self.column);
        let spanned = |tok| Ok(Spanned { tok, line, column });
        let Some(&c) = self.chars.peek() else {
            return spanned(Tok::Eof);
        };
        match c {
            '(' => {
                self.bump();
                spanned(Tok::LParen)
            }
            ')' => {
                self.bump();
                spanned(Tok::RParen)
            }
            ',' => {
                self.bump();
                spanned(Tok::Comma)
            }
            '.' => {
                self.bump();
                spanned(Tok::End)
            }
            ':' => {
                self.bump();
                if self.chars.peek() == Some(&'-') {
                    self.bump();
                    spanned(Tok::Neck)
                } else {
                    Err(ParseError { line, column, expected: "\":-\"".into(), found: "\":\"".into() })
                }
            }
            '<' | '>' | '=' => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if matches!(c, '<' | '>' | '=' | ':') {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                match COMPARISON_OPS.iter().find(|op| **op == s) {
                    Some(op) => spanned(Tok::Op(op)),
                    None => Err(ParseError {
                        line,
                        column,
                        expected: "one of <, >, =<, >=, =:=".into(),
                        found: format!("`{s}`"),
                    }),
                }
            }
            '\'' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some('\'') => {
                            if self.chars.peek() == Some(&'\'') {
                                self.bump();
                                s.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(c) => s.push(c),
                            None => return Err(self.err("closing quote", "end of input")),
                        },
                        Some(c) => s.push(c),
                        None => {
                            return Err(ParseError {
                                line,
                                column,
                                expected: "closing quote".into(),
                                found: "end of input".into(),
                            })
                        }
                    }
                }
                spanned(Tok::Atom(s))
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut s = String::new();
                if c == '-' {
                    s.push('-');
                    self.bump();
                    if !self.chars.peek().is_some_and(|c| c.is_ascii_digit()) {
                        return Err(self.err("digit after `-`", "something else"));
                    }
                }
                while let Some(&c) = self.chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                s.parse::<i64>()
                    .map(Tok::Int)
                    .map_err(|_| ParseError { line, column, expected: "integer in range".into(), found: s })
                    .map(|tok| Spanned { tok, line, column })
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        s.push(c);
                        self.bump();
                    } else {
                        break;
                    }
                }
                if c.is_uppercase() || c == '_' {
                    spanned(Tok::Var(s))
                } else {
                    spanned(Tok::Atom(s))
                }
            }
            other => Err(self.err("a term", format!("`{other}`"))),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Spanned>,
    anon: usize,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&Spanned, ParseError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("peeked"))
    }

    fn next(&mut self) -> Result<Spanned, ParseError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next_token(),
        }
    }

    fn unexpected(t: &Spanned, expected: &str) -> ParseError {
        ParseError { line: t.line, column: t.column, expected: expected.into(), found: t.tok.to_string() }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Var(v) if v == "_" => {
                self.anon += 1;
                Ok(Term::Var(format!("_{}", self.anon)))
            }
            Tok::Var(v) => Ok(Term::Var(v)),
            Tok::Int(i) => Ok(Term::Int(i)),
            Tok::Atom(name) => {
                if self.peek()?.tok != Tok::LParen {
                    return Ok(Term::Atom(name));
                }
                self.next()?;
                let mut args = vec![self.term()?];
                loop {
                    let t = self.next()?;
                    match t.tok {
                        Tok::Comma => args.push(self.term()?),
                        Tok::RParen => break,
                        _ => return Err(Self::unexpected(&t, "\",\" or \")\"")),
                    }
                }
                Ok(Term::Compound(name, args))
            }
            _ => Err(Self::unexpected(&t, "a term")),
        }
    }

    fn goal(&mut self) -> Result<Term, ParseError> {
        let lhs = self.term()?;
        if let Tok::Op(op) = self.peek()?.tok {
            self.next()?;
            let rhs = self.term()?;
            return Ok(Term::Compound(op.to_string(), vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let start = self.peek()?.clone();
        let head = self.term()?;
        if !matches!(head, Term::Atom(_) | Term::Compound(..)) {
            return Err(ParseError {
                line: start.line,
                column: start.column,
                expected: "clause head (atom or compound term)".into(),
                found: start.tok.to_string(),
            });
        }
        let mut body = Vec::new();
        let t = self.next()?;
        match t.tok {
            Tok::End => return Ok(Clause { head, body }),
            Tok::Neck => {}
            _ => return Err(Self::unexpected(&t, "\":-\" or \".\"")),
        }
        body.push(self.goal()?);
        loop {
            let t = self.next()?;
            match t.tok {
                Tok::Comma => body.push(self.goal()?),
                Tok::End => return Ok(Clause { head, body }),
                _ => return Err(Self::unexpected(&t, "\",\" or \".\"")),
            }
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut parser = Parser { lexer: Lexer::new(text), peeked: None, anon: 0 };
    let mut clauses = Vec::new();
    while parser.peek()?.tok != Tok::Eof {
        clauses.push(parser.clause()?);
    }
    Ok(Program { clauses })
}

/// Parses a single query term, with or without a trailing `.`.
pub fn parse_query(text: &str) -> Result<Term, ParseError> {
    let mut parser = Parser { lexer: Lexer::new(text), peeked: None, anon: 0 };
    let goal = parser.goal()?;
    if parser.peek()?.tok == Tok::End {
        parser.next()?;
    }
    let t = parser.next()?;
    if t.tok != Tok::Eof {
        return Err(Parser::unexpected(&t, "end of query"));
    }
    Ok(goal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_fact() {
        let p = parse_program("p(a).").unwrap();
        assert_eq!(p.clauses.len(), 1);
        assert_eq!(p.clauses[0], Clause::fact(Term::compound("p", vec![Term::atom("a")])));
    }

    #[test]
    fn rule_with_comparison() {
        let p = parse_program("better(X,Y) :- cost(X,CX), cost(Y,CY), CX < CY.").unwrap();
        assert_eq!(p.clauses.len(), 1);
        let body = &p.clauses[0].body;
        assert_eq!(body.len(), 3);
        assert_eq!(body[2], Term::compound("<", vec![Term::var("CX"), Term::var("CY")]));
        assert_eq!(p.to_string().trim(), "better(X, Y) :- cost(X, CX), cost(Y, CY), CX < CY.");
    }

    #[test]
    fn unterminated_argument_list() {
        let err = parse_program("p(a").unwrap_err();
        assert_eq!((err.line, err.column), (1, 4));
        assert!(err.expected.contains("\")\""), "{err}");
        assert_eq!(err.found, "end of input");
    }

    #[test]
    fn comments_and_quoted_atoms() {
        let src = "% header\nq('Hello world'). /* block\n comment */ r(-3).\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.clauses[0].head, Term::compound("q", vec![Term::atom("Hello world")]));
        assert_eq!(p.clauses[1].head, Term::compound("r", vec![Term::Int(-3)]));
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn rejects_variable_head() {
        let err = parse_program("X :- p(X).").unwrap_err();
        assert!(err.expected.contains("clause head"));
        assert!(parse_program("3.").is_err());
    }

    #[test]
    fn error_position_on_second_line() {
        let err = parse_program("p(a).\nq(b) r.").unwrap_err();
        assert_eq!((err.line, err.column), (2, 6));
    }

    #[test]
    fn query_parsing() {
        assert_eq!(parse_query("decision(X)").unwrap(), Term::compound("decision", vec![Term::var("X")]));
        assert_eq!(parse_query("p(a).").unwrap(), Term::compound("p", vec![Term::atom("a")]));
        assert!(parse_query("p(a) q").is_err());
    }

    #[test]
    fn anonymous_variables_are_distinct() {
        let p = parse_program("p(_, _).").unwrap();
        let Term::Compound(_, args) = &p.clauses[0].head else { panic!() };
        assert_ne!(args[0], args[1]);
    }
}
