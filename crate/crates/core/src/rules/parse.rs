use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::relational::Signature;
use crate::rules::ast::{Literal, Rule, RuleAtom, RuleProgram};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    If,
    Dot,
    Neq,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn tokenize(lines: &[(usize, &str)]) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for &(ln, line) in lines {
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            let col = i + 1;
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: ln, col });
            match c {
                b' ' | b'\t' | b'\r' => {
                    i += 1;
                }
                b'(' => {
                    push(&mut out, Tok::LParen);
                    i += 1;
                }
                b')' => {
                    push(&mut out, Tok::RParen);
                    i += 1;
                }
                b',' => {
                    push(&mut out, Tok::Comma);
                    i += 1;
                }
                b'.' => {
                    push(&mut out, Tok::Dot);
                    i += 1;
                }
                b':' if bytes.get(i + 1) == Some(&b'-') => {
                    push(&mut out, Tok::If);
                    i += 2;
                }
                b'!' if bytes.get(i + 1) == Some(&b'=') => {
                    push(&mut out, Tok::Neq);
                    i += 2;
                }
                c if c.is_ascii_alphanumeric() || c == b'_' => {
                    let start = i;
                    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                        i += 1;
                    }
                    push(&mut out, Tok::Ident(line[start..i].to_string()));
                }
                _ => return Err(syntax(ln, col, format!("unexpected character `{}`", c as char))),
            }
        }
    }
    Ok(out)
}

struct RuleParser<'a> {
    toks: &'a [Token],
    pos: usize,
    sig: &'a Signature,
    vars: Vec<String>,
    end: (usize, usize),
}

impl RuleParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.toks.get(self.pos) {
            Some(Token {
                tok: Tok::Ident(s),
                line,
                col,
            }) => {
                self.pos += 1;
                Ok((s.clone(), *line, *col))
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn var(&mut self) -> Result<usize> {
        let (name, line, col) = self.ident("variable")?;
        if !name.as_bytes()[0].is_ascii_uppercase() {
            return Err(syntax(
                line,
                col,
                format!("constant `{name}` encountered; rule arguments must be variables"),
            ));
        }
        Ok(match self.vars.iter().position(|v| *v == name) {
            Some(i) => i,
            None => {
                self.vars.push(name);
                self.vars.len() - 1
            }
        })
    }

    fn atom(&mut self) -> Result<RuleAtom> {
        let (name, line, col) = self.ident("predicate")?;
        let pred = self.sig.index_of(&name).ok_or_else(|| {
            let _ = (line, col);
            Error::UnknownRelation(name.clone())
        })?;
        let mut args = Vec::new();
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            args.push(self.var()?);
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                args.push(self.var()?);
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        let arity = self.sig.relation(pred).arity;
        if args.len() != arity {
            return Err(Error::Arity {
                name,
                expected: arity,
                found: args.len(),
            });
        }
        Ok(RuleAtom { pred, args })
    }

    fn literal(&mut self) -> Result<Literal> {
        let next = self.toks.get(self.pos + 1).map(|t| &t.tok);
        match (self.peek(), next) {
            (Some(Tok::Ident(_)), Some(Tok::Neq)) => {
                let x = self.var()?;
                self.pos += 1;
                let y = self.var()?;
                Ok(Literal::Neq(x, y))
            }
            (Some(Tok::Ident(s)), Some(Tok::Ident(_))) if s == "not" => {
                self.pos += 1;
                Ok(Literal::Neg(self.atom()?))
            }
            _ => Ok(Literal::Pos(self.atom()?)),
        }
    }

    fn rule(&mut self) -> Result<Rule> {
        self.vars.clear();
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.peek() == Some(&Tok::If) {
            self.pos += 1;
            body.push(self.literal()?);
            while self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Dot, "`.` at end of rule")?;
        Ok(Rule {
            head,
            body,
            vars: std::mem::take(&mut self.vars),
        })
    }
}

fn parse_decls(rest: &str, line: usize, col0: usize, out: &mut Vec<(String, usize)>) -> Result<()> {
    for item in rest.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
        let col = col0 + rest.find(item).unwrap_or(0);
        let (name, arity) = item
            .split_once('/')
            .ok_or_else(|| syntax(line, col, format!("expected `name/arity`, found `{item}`")))?;
        let arity = arity
            .parse::<usize>()
            .map_err(|_| syntax(line, col, format!("bad arity in `{item}`")))?;
        out.push((name.to_string(), arity));
    }
    Ok(())
}

/// Parses a program: `#free`, `#derived` and `#stage` header lines, then rules.
/// `%` starts a comment.
pub fn parse_program(text: &str) -> Result<RuleProgram> {
    let mut free = Vec::new();
    let mut derived = Vec::new();
    let mut stages = BTreeMap::new();
    let mut body_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = strip_comment(raw);
        let trimmed = line.trim_start();
        let indent = line.len() - trimmed.len();
        let Some(directive) = trimmed.strip_prefix('#') else {
            body_lines.push((ln, line));
            continue;
        };
        let word_len = directive.find(char::is_whitespace).unwrap_or(directive.len());
        let (word, rest) = directive.split_at(word_len);
        let rest_col = indent + 2 + word_len;
        match word {
            "free" => parse_decls(rest, ln, rest_col, &mut free)?,
            "derived" => parse_decls(rest, ln, rest_col, &mut derived)?,
            "stage" => {
                for item in rest.split_whitespace() {
                    let (name, k) = item
                        .split_once('=')
                        .ok_or_else(|| syntax(ln, rest_col, format!("expected `pred=k`, found `{item}`")))?;
                    let k = k
                        .parse::<usize>()
                        .map_err(|_| syntax(ln, rest_col, format!("bad stage number in `{item}`")))?;
                    stages.insert(name.to_string(), k);
                }
            }
            _ => return Err(syntax(ln, indent + 1, format!("unknown directive `#{word}`"))),
        }
    }
    let free = Arc::new(Signature::new(free)?);
    let derived = Arc::new(Signature::new(derived)?);
    let full = free.concat(&derived)?;
    let toks = tokenize(&body_lines)?;
    let end = body_lines.last().map(|(l, s)| (*l, s.len() + 1)).unwrap_or((1, 1));
    let mut p = RuleParser {
        toks: &toks,
        pos: 0,
        sig: &full,
        vars: Vec::new(),
        end,
    };
    let mut rules = Vec::new();
    while p.pos < toks.len() {
        let (line, col) = p.here();
        let r = p.rule()?;
        if r.head.pred < free.len() {
            return Err(Error::Program(format!(
                "{line}:{col}: rule head uses free relation `{}`",
                full.relation(r.head.pred).name
            )));
        }
        rules.push(r);
    }
    RuleProgram::new(free, derived, rules, stages)
}
