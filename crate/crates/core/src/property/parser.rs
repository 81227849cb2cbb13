//! Recursive-descent parser for the property language:
//!
//! ```text
//! prop := "P=?" "[" path "]"
//! path := "X" st | st "U" st | st "U<=" INT st
//!       | "F" st | "F<=" INT st | "G" st | "G<=" INT st
//! st   := st "&" st | st "|" st | "!" st | "(" st ")"
//!       | IDENT | "s" "=" INT | "s" "!=" INT | "true" | "false"
//! ```
//!
//! Precedence is `!` > `&` > `|`. Whitespace is insignificant.

use super::{PathFormula, PropertyError, StateExpr};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Eq,
    Ne,
    Le,
    Question,
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(i) => format!("'{i}'"),
            Tok::Eq => "'='".into(),
            Tok::Ne => "'!='".into(),
            Tok::Le => "'<='".into(),
            Tok::Question => "'?'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Pipe => "'|'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

const TEMPORAL: [&str; 5] = ["X", "U", "F", "G", "P"];

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, PropertyError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = match c {
            '=' => {
                i += 1;
                Tok::Eq
            }
            '?' => {
                i += 1;
                Tok::Question
            }
            '&' => {
                i += 1;
                Tok::Amp
            }
            '|' => {
                i += 1;
                Tok::Pipe
            }
            '(' => {
                i += 1;
                Tok::LParen
            }
            ')' => {
                i += 1;
                Tok::RParen
            }
            '[' => {
                i += 1;
                Tok::LBracket
            }
            ']' => {
                i += 1;
                Tok::RBracket
            }
            '!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::Ne
            }
            '!' => {
                i += 1;
                Tok::Bang
            }
            '<' if bytes.get(i + 1) == Some(&b'=') => {
                i += 2;
                Tok::Le
            }
            c if c.is_ascii_digit() => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let value = text[start..i].parse().map_err(|_| PropertyError::Syntax {
                    position: start,
                    expected: vec!["integer".into()],
                    found: text[start..i].to_string(),
                })?;
                Tok::Int(value)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..i].to_string())
            }
            _ => {
                return Err(PropertyError::Syntax {
                    position: start,
                    expected: vec!["token".into()],
                    found: text[start..]
                        .chars()
                        .next()
                        .map(String::from)
                        .unwrap_or_default(),
                })
            }
        };
        out.push((start, tok));
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> PropertyError {
        if let Tok::Ident(name) = self.peek() {
            if TEMPORAL.contains(&name.as_str()) {
                return PropertyError::NestedTemporal {
                    position: self.offset(),
                };
            }
        }
        PropertyError::Syntax {
            position: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), PropertyError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn prop(&mut self) -> Result<PathFormula, PropertyError> {
        if !self.is_keyword("P") {
            return Err(PropertyError::Syntax {
                position: self.offset(),
                expected: vec!["'P=?'".into()],
                found: self.peek().describe(),
            });
        }
        self.bump();
        self.expect(Tok::Eq, "'='")?;
        self.expect(Tok::Question, "'?'")?;
        self.expect(Tok::LBracket, "'['")?;
        let path = self.path()?;
        self.expect(Tok::RBracket, "']'")?;
        if *self.peek() != Tok::Eof {
            return Err(self.error(&["end of input"]));
        }
        Ok(path)
    }

    fn bound(&mut self) -> Result<Option<u32>, PropertyError> {
        if *self.peek() != Tok::Le {
            return Ok(None);
        }
        self.bump();
        let position = self.offset();
        match self.bump() {
            Tok::Int(k) => u32::try_from(k)
                .map(Some)
                .map_err(|_| PropertyError::Syntax {
                    position,
                    expected: vec!["step bound below 2^32".into()],
                    found: k.to_string(),
                }),
            other => Err(PropertyError::Syntax {
                position,
                expected: vec!["integer".into()],
                found: other.describe(),
            }),
        }
    }

    fn path(&mut self) -> Result<PathFormula, PropertyError> {
        if self.is_keyword("X") {
            self.bump();
            return Ok(PathFormula::Next(self.state()?));
        }
        if self.is_keyword("F") {
            self.bump();
            let bound = self.bound()?;
            return Ok(PathFormula::eventually(self.state()?, bound));
        }
        if self.is_keyword("G") {
            self.bump();
            let bound = self.bound()?;
            return Ok(PathFormula::globally(self.state()?, bound));
        }
        let lhs = self.state()?;
        if !self.is_keyword("U") {
            return Err(PropertyError::Syntax {
                position: self.offset(),
                expected: vec!["'U'".into(), "'U<='".into()],
                found: self.peek().describe(),
            });
        }
        self.bump();
        let bound = self.bound()?;
        let rhs = self.state()?;
        Ok(PathFormula::until(lhs, rhs, bound))
    }

    fn state(&mut self) -> Result<StateExpr, PropertyError> {
        let mut e = self.conj()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            e = e.or(self.conj()?);
        }
        Ok(e)
    }

    fn conj(&mut self) -> Result<StateExpr, PropertyError> {
        let mut e = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            e = e.and(self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<StateExpr, PropertyError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(self.unary()?.not());
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<StateExpr, PropertyError> {
        const EXPECTED: [&str; 6] = ["'!'", "'('", "atom", "'s'", "'true'", "'false'"];
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let e = self.state()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if TEMPORAL.contains(&name.as_str()) {
                    return Err(PropertyError::NestedTemporal {
                        position: self.offset(),
                    });
                }
                match name.as_str() {
                    "true" => {
                        self.bump();
                        Ok(StateExpr::True)
                    }
                    "false" => {
                        self.bump();
                        Ok(StateExpr::False)
                    }
                    "s" if matches!(self.peek_at(1), Tok::Eq | Tok::Ne) => {
                        self.bump();
                        let eq = self.bump() == Tok::Eq;
                        let position = self.offset();
                        let k = match self.bump() {
                            Tok::Int(k) => k as usize,
                            other => {
                                return Err(PropertyError::Syntax {
                                    position,
                                    expected: vec!["state index".into()],
                                    found: other.describe(),
                                })
                            }
                        };
                        Ok(if eq {
                            StateExpr::StateEq(k)
                        } else {
                            StateExpr::StateNe(k)
                        })
                    }
                    _ => {
                        self.bump();
                        Ok(StateExpr::Atom(name))
                    }
                }
            }
            _ => Err(self.error(&EXPECTED)),
        }
    }
}

/// Parses `P=? [ path ]` into a path formula with `F`/`G` desugared.
pub fn parse_property(text: &str) -> Result<PathFormula, PropertyError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.prop()
}

#[cfg(test)]
mod tests {
    use super::*;
    use StateExpr as S;

    #[test]
    fn bounded_until_with_negation() {
        let phi = parse_property("P=? [ !hazard U<=6 goal ]").unwrap();
        assert_eq!(
            phi,
            PathFormula::until(S::atom("hazard").not(), S::atom("goal"), Some(6))
        );
    }

    #[test]
    fn bounded_eventually() {
        let phi = parse_property("P=? [ F<=10 delivered ]").unwrap();
        assert_eq!(
            phi,
            PathFormula::until(S::True, S::atom("delivered"), Some(10))
        );
    }

    #[test]
    fn state_comparisons() {
        let phi = parse_property("P=? [s!=5 U s=24]").unwrap();
        assert_eq!(phi, PathFormula::until(S::StateNe(5), S::StateEq(24), None));
        let phi = parse_property("P=?[(s!=2)U<=10(s=3)]").unwrap();
        assert_eq!(
            phi,
            PathFormula::until(S::StateNe(2), S::StateEq(3), Some(10))
        );
    }

    #[test]
    fn globally_and_next() {
        let phi = parse_property("P=? [ G<=4 safe ]").unwrap();
        assert_eq!(phi, PathFormula::globally(S::atom("safe"), Some(4)));
        let phi = parse_property("P=? [ G safe ]").unwrap();
        assert_eq!(phi, PathFormula::globally(S::atom("safe"), None));
        let phi = parse_property("P=? [ X a | b ]").unwrap();
        assert_eq!(phi, PathFormula::Next(S::atom("a").or(S::atom("b"))));
    }

    #[test]
    fn precedence() {
        let phi = parse_property("P=? [ F a | b & !c ]").unwrap();
        let expect = S::atom("a").or(S::atom("b").and(S::atom("c").not()));
        assert_eq!(phi, PathFormula::eventually(expect, None));
        let phi = parse_property("P=? [ F (a | b) & c ]").unwrap();
        let expect = S::atom("a").or(S::atom("b")).and(S::atom("c"));
        assert_eq!(phi, PathFormula::eventually(expect, None));
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "P=? [ !hazard U<=6 goal ]",
            "P=? [ F<=10 delivered ]",
            "P=? [ s!=5 U s=24 ]",
            "P=? [ G<=3 !(a | b) & c ]",
            "P=? [ X true ]",
        ] {
            let phi = parse_property(text).unwrap();
            assert_eq!(parse_property(&phi.to_string()).unwrap(), phi, "{text}");
        }
    }

    #[test]
    fn nested_temporal_rejected() {
        for text in [
            "P=? [ F (F a) ]",
            "P=? [ F a & F b ]",
            "P=? [ a U b U c ]",
            "P=? [ X X a ]",
            "P=? [ F P=? [ F a ] ]",
        ] {
            assert!(
                matches!(
                    parse_property(text),
                    Err(PropertyError::NestedTemporal { .. })
                ),
                "{text}"
            );
        }
    }

    #[test]
    fn syntax_errors_report_position() {
        match parse_property("P=? [ a U ]") {
            Err(PropertyError::Syntax { position, .. }) => assert_eq!(position, 10),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_property("P>=0.5 [ F a ]"),
            Err(PropertyError::Syntax { position: 1, .. })
        ));
        assert!(matches!(
            parse_property("P=? [ a ]"),
            Err(PropertyError::Syntax { .. })
        ));
        assert!(matches!(
            parse_property("P=? [ F<=x a ]"),
            Err(PropertyError::Syntax { .. })
        ));
        assert!(parse_property("P=? [ F a ] junk").is_err());
    }
}
