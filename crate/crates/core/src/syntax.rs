//! Formula syntax: signatures, counting specifications, the formula AST,
//! a textual parser/printer and the fluted-fragment classifier.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Predicate symbols with their arities. Equality is implicit.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    preds: BTreeMap<String, usize>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("line {line}: expected `name/arity`, found `{text}`")]
    Malformed { line: usize, text: String },
    #[error("predicate `{name}` declared with arities {first} and {second}")]
    Conflict { name: String, first: usize, second: usize },
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a str, usize)>,
    ) -> Result<Self, SignatureError> {
        let mut sig = Signature::new();
        for (name, arity) in pairs {
            sig.declare(name, arity)?;
        }
        Ok(sig)
    }

    /// Parses the `name/arity` per line format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, SignatureError> {
        let mut sig = Signature::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = || SignatureError::Malformed { line: i + 1, text: line.to_string() };
            let (name, arity) = line.split_once('/').ok_or_else(malformed)?;
            let name = name.trim();
            if !is_identifier(name) || is_keyword(name) {
                return Err(malformed());
            }
            let arity: usize = arity.trim().parse().map_err(|_| malformed())?;
            sig.declare(name, arity)?;
        }
        Ok(sig)
    }

    pub fn declare(&mut self, name: &str, arity: usize) -> Result<(), SignatureError> {
        match self.preds.get(name) {
            Some(&a) if a != arity => Err(SignatureError::Conflict {
                name: name.to_string(),
                first: a,
                second: arity,
            }),
            _ => {
                self.preds.insert(name.to_string(), arity);
                Ok(())
            }
        }
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.preds.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.preds.contains_key(name)
    }

    pub fn remove(&mut self, name: &str) {
        self.preds.remove(name);
    }

    /// Predicates in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.preds.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn max_arity(&self) -> usize {
        self.preds.values().copied().max().unwrap_or(0)
    }

    /// Merges `other` into `self`, failing on arity conflicts.
    pub fn extend(&mut self, other: &Signature) -> Result<(), SignatureError> {
        for (n, a) in other.iter() {
            self.declare(n, a)?;
        }
        Ok(())
    }

    /// A name with the given prefix that is not yet declared.
    pub fn fresh_name(&self, prefix: &str) -> String {
        (0..)
            .map(|i| format!("{prefix}{i}"))
            .find(|n| !self.contains(n))
            .expect("unbounded supply of names")
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, a) in self.iter() {
            writeln!(f, "{n}/{a}")?;
        }
        Ok(())
    }
}

/// The set of admissible witness counts `{ base + i * period | i >= 0 }`,
/// optionally together with the infinite cardinal.
///
/// Threshold quantifiers (`exists`, `exists[>=n]`) admit infinitely many
/// witnesses; periodic and exact ones do not.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CountSpec {
    pub base: u64,
    pub period: u64,
    pub admits_infinite: bool,
}

impl CountSpec {
    pub const fn periodic(base: u64, period: u64) -> Self {
        CountSpec { base, period, admits_infinite: false }
    }

    pub const fn exactly(n: u64) -> Self {
        CountSpec::periodic(n, 0)
    }

    pub const fn at_least(n: u64) -> Self {
        CountSpec { base: n, period: 1, admits_infinite: true }
    }

    /// Plain existential quantification.
    pub const fn some() -> Self {
        CountSpec::at_least(1)
    }

    pub fn is_plain_exists(&self) -> bool {
        *self == CountSpec::some()
    }

    /// Membership of a finite count.
    pub fn contains(&self, k: u64) -> bool {
        crate::ext::linear_set_member(crate::ext::ExtNat::Fin(k), self.base, self.period)
    }

    /// Membership of a count in the extended naturals.
    pub fn contains_ext(&self, k: crate::ext::ExtNat) -> bool {
        match k {
            crate::ext::ExtNat::Inf => self.admits_infinite,
            crate::ext::ExtNat::Fin(k) => self.contains(k),
        }
    }
}

impl fmt::Display for CountSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.period, self.admits_infinite) {
            (1, true) if self.base == 1 => write!(f, "exists"),
            (1, true) => write!(f, "exists[>={}]", self.base),
            (0, false) => write!(f, "exists[={}]", self.base),
            (p, false) => write!(f, "exists[{}+{}]", self.base, p),
            // not producible from the grammar; printed for diagnostics only
            (p, true) => write!(f, "exists[{}+{}|inf]", self.base, p),
        }
    }
}

/// First-order formulas with counting quantifiers over named variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom { pred: String, args: Vec<String> },
    Equal(String, String),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Exists { count: CountSpec, var: String, body: Box<Formula> },
    Forall { var: String, body: Box<Formula> },
}

impl Formula {
    pub fn atom(pred: &str, args: &[&str]) -> Formula {
        Formula::Atom { pred: pred.to_string(), args: args.iter().map(|s| s.to_string()).collect() }
    }

    pub fn eq(a: &str, b: &str) -> Formula {
        Formula::Equal(a.to_string(), b.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction; a single conjunct is returned unchanged and none yields `True`.
    pub fn and(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::True,
            1 => fs.pop().unwrap(),
            _ => Formula::And(fs),
        }
    }

    pub fn or(mut fs: Vec<Formula>) -> Formula {
        match fs.len() {
            0 => Formula::False,
            1 => fs.pop().unwrap(),
            _ => Formula::Or(fs),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn exists(count: CountSpec, var: &str, body: Formula) -> Formula {
        Formula::Exists { count, var: var.to_string(), body: Box::new(body) }
    }

    pub fn forall(var: &str, body: Formula) -> Formula {
        Formula::Forall { var: var.to_string(), body: Box::new(body) }
    }

    /// `exists[<=n]`, expanded into a disjunction of exact counts.
    pub fn exists_at_most(n: u64, var: &str, body: Formula) -> Formula {
        Formula::or((0..=n).map(|k| Formula::exists(CountSpec::exactly(k), var, body.clone())).collect())
    }

    /// Nested universal quantifiers over `vars`, outermost first.
    pub fn forall_many(vars: &[&str], body: Formula) -> Formula {
        vars.iter().rev().fold(body, |acc, v| Formula::forall(v, acc))
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom { .. } | Formula::Equal(..) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
            Formula::Implies(a, b) | Formula::Iff(a, b) => 1 + a.size() + b.size(),
            Formula::Exists { body, .. } | Formula::Forall { body, .. } => 1 + body.size(),
        }
    }

    /// Free variables in first-occurrence order.
    pub fn free_variables(&self) -> Vec<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut Vec<String>) {
            let note = |v: &String, bound: &Vec<String>, out: &mut Vec<String>| {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            };
            match f {
                Formula::True | Formula::False => {}
                Formula::Atom { args, .. } => args.iter().for_each(|v| note(v, bound, out)),
                Formula::Equal(a, b) => {
                    note(a, bound, out);
                    note(b, bound, out);
                }
                Formula::Not(g) => go(g, bound, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, bound, out)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Formula::Exists { var, body, .. } | Formula::Forall { var, body } => {
                    bound.push(var.clone());
                    go(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn is_sentence(&self) -> bool {
        self.free_variables().is_empty()
    }

    /// Collects every predicate used together with its argument count.
    pub fn predicates(&self) -> Vec<(String, usize)> {
        fn go(f: &Formula, out: &mut Vec<(String, usize)>) {
            match f {
                Formula::Atom { pred, args } => {
                    if !out.iter().any(|(p, _)| p == pred) {
                        out.push((pred.clone(), args.len()));
                    }
                }
                Formula::Not(g) => go(g, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, out)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Formula::Exists { body, .. } | Formula::Forall { body, .. } => go(body, out),
                _ => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }

    /// Checks arities against `sig` and rejects rebinding of in-scope variables.
    pub fn check(&self, sig: &Signature) -> Result<(), ParseError> {
        fn go(f: &Formula, sig: &Signature, scope: &mut Vec<String>) -> Result<(), ParseErrorKind> {
            match f {
                Formula::Atom { pred, args } => match sig.arity(pred) {
                    None => Err(ParseErrorKind::UndeclaredPredicate(pred.clone())),
                    Some(a) if a != args.len() => Err(ParseErrorKind::ArityMismatch {
                        pred: pred.clone(),
                        expected: a,
                        found: args.len(),
                    }),
                    _ => Ok(()),
                },
                Formula::Not(g) => go(g, sig, scope),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().try_for_each(|g| go(g, sig, scope)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    go(a, sig, scope)?;
                    go(b, sig, scope)
                }
                Formula::Exists { var, body, .. } | Formula::Forall { var, body } => {
                    if scope.contains(var) {
                        return Err(ParseErrorKind::Rebinding(var.clone()));
                    }
                    scope.push(var.clone());
                    let r = go(body, sig, scope);
                    scope.pop();
                    r
                }
                _ => Ok(()),
            }
        }
        go(self, sig, &mut Vec::new()).map_err(|kind| ParseError { offset: 0, line: 0, column: 0, kind })
    }
}

fn is_binary(f: &Formula) -> bool {
    matches!(f, Formula::And(_) | Formula::Or(_) | Formula::Implies(..) | Formula::Iff(..))
}

struct Operand<'a>(&'a Formula);

impl fmt::Display for Operand<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_binary(self.0) {
            write!(f, "({})", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom { pred, args } if args.is_empty() => write!(f, "{pred}"),
            Formula::Atom { pred, args } => write!(f, "{pred}({})", args.join(",")),
            Formula::Equal(a, b) => write!(f, "{a} = {b}"),
            Formula::Not(g) => write!(f, "!{}", Operand(g)),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{}", Operand(g))?;
                }
                Ok(())
            }
            Formula::Implies(a, b) => write!(f, "{} -> {}", Operand(a), Operand(b)),
            Formula::Iff(a, b) => write!(f, "{} <-> {}", Operand(a), Operand(b)),
            Formula::Exists { count, var, body } => write!(f, "{count} {var} ({body})"),
            Formula::Forall { var, body } => write!(f, "forall {var} ({body})"),
        }
    }
}

/// Renders a formula in the concrete grammar accepted by [`parse_formula`].
pub fn print_formula(f: &Formula) -> String {
    f.to_string()
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    UnexpectedChar(char),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: String, found: String },
    #[error("number out of range")]
    NumberRange,
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("predicate `{pred}` has arity {expected} but is applied to {found} arguments")]
    ArityMismatch { pred: String, expected: usize, found: usize },
    #[error("variable `{0}` is already bound in this scope")]
    Rebinding(String),
    #[error("variable `{0}` is not bound")]
    UnboundVariable(String),
    #[error("bare atom `{pred}` needs {arity} bound variables, only {bound} in scope")]
    BareAtomScope { pred: String, arity: usize, bound: usize },
    #[error("{0}")]
    Signature(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bang,
    Amp,
    Bar,
    Arrow,
    DArrow,
    Equals,
    Ge,
    Le,
    Plus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(n) => write!(f, "`{n}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::LBrack => write!(f, "`[`"),
            Tok::RBrack => write!(f, "`]`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Bar => write!(f, "`|`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::DArrow => write!(f, "`<->`"),
            Tok::Equals => write!(f, "`=`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "forall" | "exists" | "true" | "false")
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, (usize, ParseErrorKind)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let rest = &text[i..];
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), start));
            continue;
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i].parse().map_err(|_| (start, ParseErrorKind::NumberRange))?;
            out.push((Tok::Num(n), start));
            continue;
        } else if rest.starts_with("<->") {
            i += 3;
            Tok::DArrow
        } else if rest.starts_with("->") {
            i += 2;
            Tok::Arrow
        } else if rest.starts_with(">=") {
            i += 2;
            Tok::Ge
        } else if rest.starts_with("<=") {
            i += 2;
            Tok::Le
        } else {
            i += c.len_utf8();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                ',' => Tok::Comma,
                '!' => Tok::Bang,
                '&' => Tok::Amp,
                '|' => Tok::Bar,
                '=' => Tok::Equals,
                '+' => Tok::Plus,
                _ => {
                    let ch = rest.chars().next().unwrap();
                    return Err((start, ParseErrorKind::UnexpectedChar(ch)));
                }
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

/// How predicates are resolved while parsing.
enum SigMode<'a> {
    Fixed(&'a Signature),
    Infer(Signature),
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    sig: SigMode<'a>,
    scope: Vec<String>,
}

type PResult<T> = Result<T, (usize, ParseErrorKind)>;

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        Err((
            self.offset(),
            ParseErrorKind::Unexpected { expected: expected.to_string(), found: self.peek().to_string() },
        ))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.unexpected(what)
        }
    }

    fn number(&mut self) -> PResult<u64> {
        match self.peek() {
            Tok::Num(n) => {
                let n = *n;
                self.bump();
                Ok(n)
            }
            _ => self.unexpected("a number"),
        }
    }

    fn iff(&mut self) -> PResult<Formula> {
        let mut lhs = self.imp()?;
        while *self.peek() == Tok::DArrow {
            self.bump();
            let rhs = self.imp()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn imp(&mut self) -> PResult<Formula> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.imp()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Formula> {
        let mut fs = vec![self.and()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            fs.push(self.and()?);
        }
        Ok(Formula::or(fs))
    }

    fn and(&mut self) -> PResult<Formula> {
        let mut fs = vec![self.unary()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            fs.push(self.unary()?);
        }
        Ok(Formula::and(fs))
    }

    fn unary(&mut self) -> PResult<Formula> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Formula::not(self.unary()?));
        }
        self.primary()
    }

    fn arity_of(&mut self, pred: &str, used: usize, at: usize) -> PResult<usize> {
        match &mut self.sig {
            SigMode::Fixed(sig) => sig
                .arity(pred)
                .ok_or_else(|| (at, ParseErrorKind::UndeclaredPredicate(pred.to_string()))),
            SigMode::Infer(sig) => {
                if let Some(a) = sig.arity(pred) {
                    Ok(a)
                } else {
                    sig.declare(pred, used).map_err(|e| (at, ParseErrorKind::Signature(e.to_string())))?;
                    Ok(used)
                }
            }
        }
    }

    fn variable(&mut self) -> PResult<String> {
        let at = self.offset();
        match self.bump() {
            Tok::Ident(v) if !is_keyword(&v) => {
                if !self.scope.contains(&v) {
                    return Err((at, ParseErrorKind::UnboundVariable(v)));
                }
                Ok(v)
            }
            _ => {
                self.pos -= 1;
                self.unexpected("a variable")
            }
        }
    }

    fn quantifier(&mut self, count: Option<CountSpecOrAtMost>) -> PResult<Formula> {
        let at = self.offset();
        let var = match self.peek().clone() {
            Tok::Ident(v) if !is_keyword(&v) => {
                self.bump();
                v
            }
            Tok::LParen => format!("x{}", self.scope.len() + 1),
            _ => return self.unexpected("a variable or `(`"),
        };
        if self.scope.contains(&var) {
            return Err((at, ParseErrorKind::Rebinding(var)));
        }
        self.expect(Tok::LParen, "`(`")?;
        self.scope.push(var.clone());
        let body = self.iff();
        self.scope.pop();
        let body = body?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(match count {
            None => Formula::forall(&var, body),
            Some(CountSpecOrAtMost::Spec(c)) => Formula::exists(c, &var, body),
            Some(CountSpecOrAtMost::AtMost(n)) => Formula::exists_at_most(n, &var, body),
        })
    }

    fn count_spec(&mut self) -> PResult<CountSpecOrAtMost> {
        if *self.peek() != Tok::LBrack {
            return Ok(CountSpecOrAtMost::Spec(CountSpec::some()));
        }
        self.bump();
        let spec = match self.peek() {
            Tok::Equals => {
                self.bump();
                CountSpecOrAtMost::Spec(CountSpec::exactly(self.number()?))
            }
            Tok::Ge => {
                self.bump();
                CountSpecOrAtMost::Spec(CountSpec::at_least(self.number()?))
            }
            Tok::Le => {
                self.bump();
                CountSpecOrAtMost::AtMost(self.number()?)
            }
            Tok::Num(_) => {
                let n = self.number()?;
                self.expect(Tok::Plus, "`+`")?;
                let p = self.number()?;
                CountSpecOrAtMost::Spec(CountSpec::periodic(n, p))
            }
            _ => return self.unexpected("a counting specification"),
        };
        self.expect(Tok::RBrack, "`]`")?;
        Ok(spec)
    }

    fn primary(&mut self) -> PResult<Formula> {
        let at = self.offset();
        match self.bump() {
            Tok::LParen => {
                let f = self.iff()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(w) => match w.as_str() {
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                "forall" => self.quantifier(None),
                "exists" => {
                    let c = self.count_spec()?;
                    self.quantifier(Some(c))
                }
                _ => self.atom_or_equality(w, at),
            },
            _ => {
                self.pos -= 1;
                self.unexpected("a formula")
            }
        }
    }

    fn atom_or_equality(&mut self, name: String, at: usize) -> PResult<Formula> {
        match self.peek() {
            Tok::LParen => {
                self.bump();
                let mut args = vec![self.variable()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.variable()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                let arity = self.arity_of(&name, args.len(), at)?;
                if arity != args.len() {
                    return Err((
                        at,
                        ParseErrorKind::ArityMismatch { pred: name, expected: arity, found: args.len() },
                    ));
                }
                Ok(Formula::Atom { pred: name, args })
            }
            Tok::Equals => {
                if !self.scope.contains(&name) {
                    return Err((at, ParseErrorKind::UnboundVariable(name)));
                }
                self.bump();
                let rhs = self.variable()?;
                Ok(Formula::Equal(name, rhs))
            }
            _ => {
                // bare atom: inherits the innermost suffix of bound variables
                let arity = self.arity_of(&name, 0, at)?;
                if arity > self.scope.len() {
                    return Err((
                        at,
                        ParseErrorKind::BareAtomScope { pred: name, arity, bound: self.scope.len() },
                    ));
                }
                let args = self.scope[self.scope.len() - arity..].to_vec();
                Ok(Formula::Atom { pred: name, args })
            }
        }
    }
}

enum CountSpecOrAtMost {
    Spec(CountSpec),
    AtMost(u64),
}

fn locate(text: &str, offset: usize, kind: ParseErrorKind) -> ParseError {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    ParseError { offset, line, column, kind }
}

fn run_parser(text: &str, sig: SigMode<'_>) -> Result<(Formula, Option<Signature>), ParseError> {
    let toks = tokenize(text).map_err(|(o, k)| locate(text, o, k))?;
    let mut p = Parser { toks, pos: 0, sig, scope: Vec::new() };
    let f = p.iff().map_err(|(o, k)| locate(text, o, k))?;
    if *p.peek() != Tok::Eof {
        let (o, k) = p.unexpected::<()>("end of input").unwrap_err();
        return Err(locate(text, o, k));
    }
    let inferred = match p.sig {
        SigMode::Infer(s) => Some(s),
        SigMode::Fixed(_) => None,
    };
    Ok((f, inferred))
}

/// Parses a formula whose predicates must all be declared in `sig`.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    run_parser(text, SigMode::Fixed(sig)).map(|(f, _)| f)
}

/// Parses a formula, inferring predicate arities from their first use.
/// Bare atoms whose predicate was not seen before are taken to be nullary.
pub fn parse_formula_infer(text: &str) -> Result<(Formula, Signature), ParseError> {
    run_parser(text, SigMode::Infer(Signature::new())).map(|(f, s)| (f, s.unwrap_or_default()))
}

/// Result of [`classify_fragment`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FragmentReport {
    pub variable_width: usize,
    pub is_fluted: bool,
    pub is_fluted_rev: bool,
    pub uses_counting: bool,
    pub uses_periodic: bool,
    pub free_variables: Vec<String>,
    pub offending_atoms: Vec<(String, String)>,
}

/// Classifies `f` against the fluted fragment and its reversed-atom extension.
///
/// Variables are indexed by quantifier depth. An atom of arity `a` at depth
/// `d` is fluted when its arguments are exactly the variables bound at depths
/// `d-a+1, ..., d` in that order; it is fluted-reversed when they also may
/// appear in the opposite order. Equality is symmetric, so both orientations
/// of `x_{d-1} = x_d` are fluted.
pub fn classify_fragment(f: &Formula) -> FragmentReport {
    struct Walk {
        report: FragmentReport,
        fluted: bool,
        rev: bool,
    }
    fn indices(scope: &[String], args: &[&String]) -> Option<Vec<usize>> {
        args.iter()
            .map(|v| scope.iter().rposition(|s| s == *v).map(|i| i + 1))
            .collect()
    }
    fn check_atom(w: &mut Walk, scope: &[String], text: String, args: Vec<&String>, symmetric: bool) {
        let d = scope.len();
        let Some(idx) = indices(scope, &args) else {
            w.fluted = false;
            w.rev = false;
            w.report.offending_atoms.push((text, "mentions a free variable".into()));
            return;
        };
        let a = idx.len();
        let suffix: Vec<usize> = if a <= d { (d + 1 - a..=d).collect() } else { Vec::new() };
        let mut reversed = suffix.clone();
        reversed.reverse();
        let is_suffix = a <= d && idx == suffix;
        let is_rev = a <= d && idx == reversed;
        if is_suffix || (symmetric && is_rev) {
            return;
        }
        w.fluted = false;
        if is_rev {
            w.report.offending_atoms.push((text, "arguments are a reversed suffix".into()));
            return;
        }
        w.rev = false;
        let mut distinct = idx.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let reason = if distinct.len() != idx.len() {
            "repeated variable".to_string()
        } else {
            format!("arguments at depths {idx:?} are not a suffix of depth {d}")
        };
        w.report.offending_atoms.push((text, reason));
    }
    fn go(f: &Formula, scope: &mut Vec<String>, w: &mut Walk) {
        w.report.variable_width = w.report.variable_width.max(scope.len());
        match f {
            Formula::True | Formula::False => {}
            Formula::Atom { args, .. } => {
                let text = f.to_string();
                check_atom(w, scope, text, args.iter().collect(), false)
            }
            Formula::Equal(a, b) => {
                let text = f.to_string();
                check_atom(w, scope, text, vec![a, b], true)
            }
            Formula::Not(g) => go(g, scope, w),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, scope, w)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                go(a, scope, w);
                go(b, scope, w);
            }
            Formula::Exists { count, var, body } => {
                if !count.is_plain_exists() {
                    w.report.uses_counting = true;
                }
                if count.period > 0 && !count.admits_infinite {
                    w.report.uses_periodic = true;
                }
                scope.push(var.clone());
                go(body, scope, w);
                scope.pop();
            }
            Formula::Forall { var, body } => {
                scope.push(var.clone());
                go(body, scope, w);
                scope.pop();
            }
        }
    }
    let mut w = Walk {
        report: FragmentReport {
            variable_width: 0,
            is_fluted: true,
            is_fluted_rev: true,
            uses_counting: false,
            uses_periodic: false,
            free_variables: f.free_variables(),
            offending_atoms: Vec::new(),
        },
        fluted: true,
        rev: true,
    };
    go(f, &mut Vec::new(), &mut w);
    w.report.is_fluted = w.fluted;
    w.report.is_fluted_rev = w.rev;
    w.report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(pairs: &[(&str, usize)]) -> Signature {
        Signature::from_pairs(pairs.iter().copied()).unwrap()
    }

    const CONDUCTOR: &str = "forall x1 (cond(x1) -> exists x2 (solo(x2) & fav(x1,x2) & \
                             forall x3 (conc(x3) -> nom(x1,x2,x3))))";

    fn conductor_sig() -> Signature {
        sig(&[("cond", 1), ("solo", 1), ("fav", 2), ("conc", 1), ("nom", 3)])
    }

    #[test]
    fn parses_conductor_sentence() {
        let f = parse_formula(CONDUCTOR, &conductor_sig()).unwrap();
        let expected = Formula::forall(
            "x1",
            Formula::implies(
                Formula::atom("cond", &["x1"]),
                Formula::exists(
                    CountSpec::some(),
                    "x2",
                    Formula::and(vec![
                        Formula::atom("solo", &["x2"]),
                        Formula::atom("fav", &["x1", "x2"]),
                        Formula::forall(
                            "x3",
                            Formula::implies(
                                Formula::atom("conc", &["x3"]),
                                Formula::atom("nom", &["x1", "x2", "x3"]),
                            ),
                        ),
                    ]),
                ),
            ),
        );
        assert_eq!(f, expected);
        let r = classify_fragment(&f);
        assert_eq!(r.variable_width, 3);
        assert!(r.is_fluted && r.is_fluted_rev);
        assert!(!r.uses_counting);
    }

    #[test]
    fn variable_free_notation_matches_explicit() {
        let text = "forall (cond -> exists (solo & fav & forall (conc -> nom)))";
        let f = parse_formula(text, &conductor_sig()).unwrap();
        assert_eq!(f, parse_formula(CONDUCTOR, &conductor_sig()).unwrap());
    }

    #[test]
    fn simple_forms() {
        let s = sig(&[("p", 1)]);
        assert_eq!(
            parse_formula("forall x1 (p(x1))", &s).unwrap(),
            Formula::forall("x1", Formula::atom("p", &["x1"]))
        );
        let f = parse_formula("exists[0+2] x1 (p(x1))", &s).unwrap();
        assert_eq!(f, Formula::exists(CountSpec::periodic(0, 2), "x1", Formula::atom("p", &["x1"])));
        assert_eq!(parse_formula(&print_formula(&f), &s).unwrap(), f);
    }

    #[test]
    fn counting_sugar() {
        let s = sig(&[("p", 1)]);
        let f = parse_formula("exists[<=2] x (p(x))", &s).unwrap();
        match &f {
            Formula::Or(fs) => {
                assert_eq!(fs.len(), 3);
                for (k, g) in fs.iter().enumerate() {
                    assert!(matches!(g, Formula::Exists { count, .. } if *count == CountSpec::exactly(k as u64)));
                }
            }
            _ => panic!("expected a disjunction"),
        }
        let g = parse_formula("exists[>=3] x (p(x)) & exists[=4] y (p(y))", &s).unwrap();
        assert_eq!(parse_formula(&print_formula(&g), &s).unwrap(), g);
    }

    #[test]
    fn printing_nullary_and_double_negation() {
        let s = sig(&[("q", 0)]);
        let f = Formula::not(Formula::not(Formula::atom("q", &[])));
        let text = print_formula(&f);
        assert_eq!(text, "!!q");
        assert_eq!(parse_formula(&text, &s).unwrap(), f);
        assert_eq!(print_formula(&Formula::atom("q", &[])), "q");
    }

    #[test]
    fn nested_connectives_keep_structure() {
        let a = Formula::atom("a", &[]);
        let b = Formula::atom("b", &[]);
        let c = Formula::atom("c", &[]);
        let s = sig(&[("a", 0), ("b", 0), ("c", 0)]);
        for f in [
            Formula::And(vec![Formula::And(vec![a.clone(), b.clone()]), c.clone()]),
            Formula::implies(Formula::implies(a.clone(), b.clone()), c.clone()),
            Formula::iff(a.clone(), Formula::Or(vec![b.clone(), c.clone()])),
            Formula::not(Formula::And(vec![a, b])),
        ] {
            assert_eq!(parse_formula(&print_formula(&f), &s).unwrap(), f);
        }
    }

    #[test]
    fn parse_errors() {
        let s = sig(&[("p", 1), ("r", 2)]);
        let e = parse_formula("forall x (p(x) & )", &s).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Unexpected { .. }));
        assert_eq!((e.line, e.column), (1, 18));
        let e = parse_formula("forall x (q(x))", &s).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UndeclaredPredicate("q".into()));
        let e = parse_formula("forall x (r(x))", &s).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ArityMismatch { expected: 2, found: 1, .. }));
        let e = parse_formula("forall x (forall x (p(x)))", &s).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Rebinding("x".into()));
        let e = parse_formula("forall x (p(y))", &s).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnboundVariable("y".into()));
        let e = parse_formula("forall x (p(x) $ p(x))", &s).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnexpectedChar('$'));
        // siblings may reuse a name
        assert!(parse_formula("forall x (p(x)) & forall x (p(x))", &s).is_ok());
    }

    #[test]
    fn hilbert_sum_conjunct_is_reversed_fluted() {
        let s = sig(&[("A_w", 1), ("A_u", 1), ("A_v", 1), ("R_e", 2)]);
        let f = parse_formula("forall y (A_w(y) -> exists[=1] x ((A_u(x) | A_v(x)) & R_e(x,y)))", &s).unwrap();
        let r = classify_fragment(&f);
        assert_eq!(r.variable_width, 2);
        assert!(!r.is_fluted);
        assert!(r.is_fluted_rev);
        assert!(r.uses_counting);
        assert!(!r.uses_periodic);
    }

    #[test]
    fn repeated_variable_is_neither() {
        let s = sig(&[("r", 2)]);
        let f = parse_formula("forall x (r(x,x))", &s).unwrap();
        let r = classify_fragment(&f);
        assert!(!r.is_fluted && !r.is_fluted_rev);
        assert_eq!(r.offending_atoms.len(), 1);
        assert_eq!(r.offending_atoms[0].0, "r(x,x)");
    }

    #[test]
    fn non_suffix_atom_is_offending() {
        let s = sig(&[("p", 1), ("r", 2)]);
        let f = parse_formula("forall x (exists y (p(x) & r(x,y)))", &s).unwrap();
        let r = classify_fragment(&f);
        assert!(!r.is_fluted && !r.is_fluted_rev);
        let eq = parse_formula("forall x (exists y (y = x & x = y))", &s).unwrap();
        assert!(classify_fragment(&eq).is_fluted);
    }

    #[test]
    fn signature_file_format() {
        let s = Signature::parse("p/1\n# comment\nr / 2\n\nq/0\n").unwrap();
        assert_eq!(s.arity("r"), Some(2));
        assert_eq!(s.arity("q"), Some(0));
        assert!(matches!(Signature::parse("p1"), Err(SignatureError::Malformed { line: 1, .. })));
        assert!(matches!(Signature::parse("p/1\np/2"), Err(SignatureError::Conflict { .. })));
    }

    #[test]
    fn inferred_signature() {
        let (f, s) = parse_formula_infer("forall x (p(x) -> exists y (r(x,y)))").unwrap();
        assert_eq!(s.arity("p"), Some(1));
        assert_eq!(s.arity("r"), Some(2));
        assert!(f.is_sentence());
        assert!(parse_formula_infer("forall x (exists y (r(x,y) & r(y)))").is_err());
    }
}
