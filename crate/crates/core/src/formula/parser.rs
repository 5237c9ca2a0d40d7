use super::{Binder, Expr, FormulaError, QuantifiedFormula, Quantifier};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Forall,
    Exists,
    Globally,
    Eventually,
    Next,
    Until,
    Release,
    Dot,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Arrow,
    DoubleArrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, FormulaError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, expected: &str| FormulaError::Syntax { position, expected: expected.to_string() };
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '.' => Tok::Dot,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '!' => Tok::Bang,
            '&' => Tok::Amp,
            '|' => Tok::Pipe,
            '-' => {
                if chars.get(i + 1) == Some(&'>') {
                    i += 1;
                    Tok::Arrow
                } else {
                    return Err(err(start, "`->`"));
                }
            }
            '<' => {
                if chars.get(i + 1) == Some(&'-') && chars.get(i + 2) == Some(&'>') {
                    i += 2;
                    Tok::DoubleArrow
                } else {
                    return Err(err(start, "`<->`"));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = i;
                while end < chars.len() && (chars[end].is_ascii_alphanumeric() || chars[end] == '_') {
                    end += 1;
                }
                let word: String = chars[i..end].iter().collect();
                i = end - 1;
                match word.as_str() {
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    "G" => Tok::Globally,
                    "F" => Tok::Eventually,
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    _ => Tok::Ident(word),
                }
            }
            _ => return Err(err(start, "operator, identifier or parenthesis")),
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::Eof, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            position: self.offset(),
            expected: format!("{expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormulaError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(what)
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FormulaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn prefix(&mut self) -> Result<Vec<Binder>, FormulaError> {
        let mut prefix = Vec::new();
        loop {
            let quantifier = match self.peek() {
                Tok::Forall => Quantifier::Forall,
                Tok::Exists => Quantifier::Exists,
                _ if prefix.is_empty() => return self.fail("`forall` or `exists`"),
                _ => break,
            };
            self.bump();
            let var = self.ident("trace variable")?;
            self.expect(Tok::Dot, "`.`")?;
            prefix.push(Binder { quantifier, var });
        }
        Ok(prefix)
    }

    // iff := implies ('<->' implies)*
    fn iff(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.implies()?;
        while *self.peek() == Tok::DoubleArrow {
            self.bump();
            let rhs = self.implies()?;
            lhs = Expr::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    // implies := or ('->' implies)?
    fn implies(&mut self) -> Result<Expr, FormulaError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Expr::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.and()?;
            lhs = Expr::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, FormulaError> {
        let mut lhs = self.binary_temporal()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.binary_temporal()?;
            lhs = Expr::and(lhs, rhs);
        }
        Ok(lhs)
    }

    // U and R do not associate: `a U b U c` must be parenthesized.
    fn binary_temporal(&mut self) -> Result<Expr, FormulaError> {
        let lhs = self.unary()?;
        let make: fn(Expr, Expr) -> Expr = match self.peek() {
            Tok::Until => Expr::until,
            Tok::Release => Expr::release,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.unary()?;
        if matches!(self.peek(), Tok::Until | Tok::Release) {
            return self.fail("parenthesized operand (`U`/`R` chains need parentheses)");
        }
        Ok(make(lhs, rhs))
    }

    fn unary(&mut self) -> Result<Expr, FormulaError> {
        let make: fn(Expr) -> Expr = match self.peek() {
            Tok::Bang => Expr::not,
            Tok::Globally => Expr::globally,
            Tok::Eventually => Expr::eventually,
            Tok::Next => Expr::next,
            _ => return self.primary(),
        };
        self.bump();
        Ok(make(self.unary()?))
    }

    fn primary(&mut self) -> Result<Expr, FormulaError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.iff()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::LBracket, "`[` after atom name")?;
                let trace = self.ident("trace variable")?;
                self.expect(Tok::RBracket, "`]`")?;
                Ok(Expr::atom(name, trace))
            }
            _ => self.fail("atom, unary operator or `(`"),
        }
    }
}

/// Parses the ASCII surface syntax, e.g.
/// `forall p. forall q. G (i[p] <-> i[q]) -> G (o[p] <-> o[q])`.
pub fn parse_formula(text: &str) -> Result<QuantifiedFormula, FormulaError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let prefix = p.prefix()?;
    let body = p.iff()?;
    if *p.peek() != Tok::Eof {
        return p.fail("end of input");
    }
    QuantifiedFormula::new(prefix, body)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(text: &str) -> Expr {
        parse_formula(text).unwrap().body_expr()
    }

    #[test]
    fn observational_determinism() {
        let f = parse_formula("forall p. forall q. G (i[p] <-> i[q]) -> G (o[p] <-> o[q])").unwrap();
        assert_eq!(f.prefix(), &[Binder::forall("p"), Binder::forall("q")]);
        let expected = Expr::implies(
            Expr::globally(Expr::iff(Expr::atom("i", "p"), Expr::atom("i", "q"))),
            Expr::globally(Expr::iff(Expr::atom("o", "p"), Expr::atom("o", "q"))),
        );
        assert_eq!(f.body_expr(), expected);
    }

    #[test]
    fn smallest_formula() {
        assert_eq!(body("forall p. G a[p]"), Expr::globally(Expr::atom("a", "p")));
    }

    #[test]
    fn unbound_trace_var() {
        assert_eq!(parse_formula("forall p. G a[q]"), Err(FormulaError::UnboundTraceVar("q".into())));
    }

    #[test]
    fn duplicate_trace_var() {
        assert_eq!(parse_formula("forall p. exists p. a[p]"), Err(FormulaError::DuplicateTraceVar("p".into())));
    }

    #[test]
    fn precedence() {
        // unary > U/R > & > | > -> > <->
        assert_eq!(
            body("forall p. G a[p] U b[p]"),
            Expr::until(Expr::globally(Expr::atom("a", "p")), Expr::atom("b", "p"))
        );
        assert_eq!(
            body("forall p. a[p] | b[p] & c[p]"),
            Expr::or(Expr::atom("a", "p"), Expr::and(Expr::atom("b", "p"), Expr::atom("c", "p")))
        );
        assert_eq!(
            body("forall p. a[p] -> b[p] -> c[p]"),
            Expr::implies(Expr::atom("a", "p"), Expr::implies(Expr::atom("b", "p"), Expr::atom("c", "p")))
        );
        assert_eq!(
            body("forall p. a[p] <-> b[p] <-> c[p]"),
            Expr::iff(Expr::iff(Expr::atom("a", "p"), Expr::atom("b", "p")), Expr::atom("c", "p"))
        );
        assert_eq!(
            body("forall p. a[p] -> b[p] <-> c[p]"),
            Expr::iff(Expr::implies(Expr::atom("a", "p"), Expr::atom("b", "p")), Expr::atom("c", "p"))
        );
    }

    #[test]
    fn until_chains_need_parentheses() {
        let err = parse_formula("forall p. a[p] U b[p] U c[p]").unwrap_err();
        assert!(matches!(err, FormulaError::Syntax { position: 22, .. }), "{err:?}");
        assert!(parse_formula("forall p. (a[p] U b[p]) U c[p]").is_ok());
    }

    #[test]
    fn underscore_names() {
        let f = parse_formula("forall pi. forall pi_1. G (req_0[pi] <-> req_1[pi_1])").unwrap();
        assert_eq!(f.atom_names(), vec!["req_0", "req_1"]);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_formula("forall p. G (a[p] &").unwrap_err() {
            FormulaError::Syntax { position, .. } => assert_eq!(position, 19),
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_formula("G a[p]"), Err(FormulaError::Syntax { position: 0, .. })));
        assert!(matches!(parse_formula("forall p. a[p] - b[p]"), Err(FormulaError::Syntax { position: 15, .. })));
        assert!(matches!(parse_formula("forall p. a[p]) "), Err(FormulaError::Syntax { position: 14, .. })));
    }
}
