use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Upper bound standing for "until the end of the trace" (`T` in the text syntax).
pub const HORIZON: usize = usize::MAX;

/// Atoms the monitor knows how to evaluate on a [`super::VehicleState`].
pub const ATOMS: [&str; 3] = ["BER", "C", "Y"];

/// Bounded LTL formula over step indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// Holds at every step of `[i+lo, i+hi]`.
    Globally(usize, usize, Box<Formula>),
    /// Holds at some step of `[i+lo, i+hi]`.
    Finally(usize, usize, Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(f: Formula, g: Formula) -> Self {
        Formula::And(Box::new(f), Box::new(g))
    }

    pub fn or(f: Formula, g: Formula) -> Self {
        Formula::Or(Box::new(f), Box::new(g))
    }

    pub fn implies(f: Formula, g: Formula) -> Self {
        Formula::Implies(Box::new(f), Box::new(g))
    }

    /// Panics if `lo > hi`; use [`Formula::parse`] for untrusted bounds.
    pub fn globally(lo: usize, hi: usize, f: Formula) -> Self {
        assert!(lo <= hi, "interval [{lo},{hi}] is empty");
        Formula::Globally(lo, hi, Box::new(f))
    }

    pub fn finally(lo: usize, hi: usize, f: Formula) -> Self {
        assert!(lo <= hi, "interval [{lo},{hi}] is empty");
        Formula::Finally(lo, hi, Box::new(f))
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Globally(_, _, f) | Formula::Finally(_, _, f) => {
                1 + f.depth()
            }
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Implies(f, g) => {
                1 + f.depth().max(g.depth())
            }
        }
    }

    /// Checks every atom against [`ATOMS`].
    pub fn check_atoms(&self) -> Result<()> {
        match self {
            Formula::Atom(name) if ATOMS.contains(&name.as_str()) => Ok(()),
            Formula::Atom(name) => Err(Error::Evaluation(format!(
                "unknown atom `{name}` (known: BER, C, Y)"
            ))),
            Formula::Not(f) | Formula::Globally(_, _, f) | Formula::Finally(_, _, f) => {
                f.check_atoms()
            }
            Formula::And(f, g) | Formula::Or(f, g) | Formula::Implies(f, g) => {
                f.check_atoms()?;
                g.check_atoms()
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parser = Parser { text, pos: 0 };
        let formula = parser.implication()?;
        parser.skip_ws();
        if parser.pos < text.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(formula)
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formula::parse(s)
    }
}

fn fmt_bound(b: usize) -> String {
    if b == HORIZON {
        "T".to_string()
    } else {
        b.to_string()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(name) => write!(f, "{name}"),
            Formula::Not(g) => write!(f, "!{g}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Globally(lo, hi, g) => write!(f, "G[{},{}]{g}", lo, fmt_bound(*hi)),
            Formula::Finally(lo, hi, g) => write!(f, "F[{},{}]{g}", lo, fmt_bound(*hi)),
        }
    }
}

/// Recursive-descent parser.
///
/// ```text
/// implication := disjunction ( "->" implication )?
/// disjunction := conjunction ( "|" conjunction )*
/// conjunction := unary ( "&" unary )*
/// unary       := "!" unary | ("G" | "F") "[" int "," (int | "T") "]" unary
///              | "(" implication ")" | ident
/// ```
struct Parser<'a> {
    text: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<()> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{token}`")))
        }
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.eat("->") {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.conjunction()?;
        while self.eat("|") {
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.eat("&") {
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        self.skip_ws();
        if self.eat("!") {
            return Ok(Formula::not(self.unary()?));
        }
        if self.eat("(") {
            let inner = self.implication()?;
            self.expect(")")?;
            return Ok(inner);
        }
        for (op, globally) in [("G", true), ("F", false)] {
            let after = self.rest()[op.len().min(self.rest().len())..].trim_start();
            if self.rest().starts_with(op) && after.starts_with('[') {
                self.pos += op.len();
                self.expect("[")?;
                let lo = self.bound(false)?;
                self.expect(",")?;
                let hi = self.bound(true)?;
                self.expect("]")?;
                if lo > hi {
                    return Err(self.error("interval lower bound exceeds upper bound"));
                }
                let body = Box::new(self.unary()?);
                return Ok(if globally {
                    Formula::Globally(lo, hi, body)
                } else {
                    Formula::Finally(lo, hi, body)
                });
            }
        }
        self.ident().map(Formula::Atom)
    }

    fn bound(&mut self, allow_horizon: bool) -> Result<usize> {
        self.skip_ws();
        if allow_horizon && self.eat("T") {
            return Ok(HORIZON);
        }
        let digits: String = self.rest().chars().take_while(char::is_ascii_digit).collect();
        if digits.is_empty() {
            return Err(self.error("expected a non-negative integer bound"));
        }
        let value = digits
            .parse()
            .map_err(|_| self.error("interval bound out of range"))?;
        self.pos += digits.len();
        Ok(value)
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let mut chars = self.rest().char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return Err(self.error("expected an atom, `!`, `(`, `G[` or `F[`")),
        }
        let len = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(self.rest().len(), |(i, _)| i);
        let name = self.rest()[..len].to_string();
        self.pos += len;
        Ok(name)
    }
}
