//! Parser for the polynomial expression language and the `.vf` vector-field
//! file format.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := base ('^' nonneg-int)?
//! base   := 'x' | 'y' | number | '(' expr ')' | '-' factor
//! ```
//!
//! Division is only accepted by a nonzero constant. Decimal literals are read
//! exactly (`0.25` is `1/4`).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};
use thiserror::Error;

use super::field::{FieldError, SearchBox, VectorField};
use super::poly::Poly2;

/// Largest exponent accepted after `^`.
pub const MAX_EXPONENT: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("exponent must be a nonnegative integer literal (at most {MAX_EXPONENT})")]
    BadExponent,
    #[error("division is only allowed by a nonzero numeric constant")]
    BadDivisor,
    #[error("malformed number '{0}'")]
    BadNumber(String),
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("expected 'key = value'")]
    NotAnAssignment,
    #[error("malformed box, expected '[a, b] x [c, d]'")]
    BadBox,
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    X,
    Y,
    Num(BigRational),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::X => "'x'".into(),
            Tok::Y => "'y'".into(),
            Tok::Num(n) => format!("number {n}"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
    /// Literal text, kept for exponent validation.
    text: String,
}

fn lex(src: &str, line0: usize, col0: usize) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut line, mut col) = (line0, col0);
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        let (tl, tc) = (line, col);
        let simple = match c {
            '\n' => {
                line += 1;
                col = 1;
                k += 1;
                continue;
            }
            c if c.is_whitespace() => {
                col += 1;
                k += 1;
                continue;
            }
            'x' => Some(Tok::X),
            'y' => Some(Tok::Y),
            '+' => Some(Tok::Plus),
            '-' | '\u{2212}' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Spanned {
                tok,
                line: tl,
                column: tc,
                text: c.to_string(),
            });
            k += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                k += 1;
            }
            let text: String = chars[start..k].iter().collect();
            col += k - start;
            let value = parse_decimal(&text).ok_or_else(|| ParseError {
                line: tl,
                column: tc,
                kind: ParseErrorKind::BadNumber(text.clone()),
            })?;
            out.push(Spanned {
                tok: Tok::Num(value),
                line: tl,
                column: tc,
                text,
            });
            continue;
        }
        return Err(ParseError {
            line: tl,
            column: tc,
            kind: ParseErrorKind::UnexpectedChar(c),
        });
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
        text: String::new(),
    });
    Ok(out)
}

/// Exact value of `digits[.digits]`.
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (int, frac) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer = BigInt::from_str_radix(&digits, 10).ok()?;
    let denom = num_traits::pow(BigInt::from(10u32), frac.len());
    Some(BigRational::new(numer, denom))
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, expected: &str) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            column: t.column,
            kind: ParseErrorKind::Unexpected {
                found: t.tok.describe(),
                expected: expected.to_string(),
            },
        }
    }

    fn expr(&mut self) -> Result<Poly2, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly2, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    self.bump();
                    acc = &acc * &self.factor()?;
                }
                Tok::Slash => {
                    let at = self.bump();
                    let d = self.factor()?;
                    match d.as_constant() {
                        Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                        _ => {
                            return Err(ParseError {
                                line: at.line,
                                column: at.column,
                                kind: ParseErrorKind::BadDivisor,
                            })
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Poly2, ParseError> {
        let base = self.base()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let t = self.bump();
        let exp = match &t.tok {
            Tok::Num(n) if n.is_integer() && !t.text.contains('.') => {
                n.to_integer().to_u32().filter(|&e| e <= MAX_EXPONENT)
            }
            _ => None,
        };
        match exp {
            Some(e) => Ok(base.pow(e)),
            None => Err(ParseError {
                line: t.line,
                column: t.column,
                kind: ParseErrorKind::BadExponent,
            }),
        }
    }

    fn base(&mut self) -> Result<Poly2, ParseError> {
        match self.peek().tok.clone() {
            Tok::X => {
                self.bump();
                Ok(Poly2::x())
            }
            Tok::Y => {
                self.bump();
                Ok(Poly2::y())
            }
            Tok::Num(n) => {
                self.bump();
                Ok(Poly2::constant(n))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if self.peek().tok != Tok::RParen {
                    return Err(self.error_here("')'"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Minus => {
                self.bump();
                Ok(-self.factor()?)
            }
            _ => Err(self.error_here("'x', 'y', a number, '(' or '-'")),
        }
    }
}

fn parse_poly_at(text: &str, line: usize, column: usize) -> Result<Poly2, ParseError> {
    let mut parser = Parser {
        toks: lex(text, line, column)?,
        pos: 0,
    };
    let p = parser.expr()?;
    if parser.peek().tok != Tok::End {
        return Err(parser.error_here("an operator or end of input"));
    }
    Ok(p)
}

/// Parses a polynomial expression in `x` and `y` into its expanded form.
pub fn parse_poly(text: &str) -> Result<Poly2, ParseError> {
    parse_poly_at(text, 1, 1)
}

fn parse_constant(text: &str, line: usize, column: usize) -> Result<BigRational, ParseError> {
    let p = parse_poly_at(text, line, column)?;
    p.as_constant().ok_or(ParseError {
        line,
        column,
        kind: ParseErrorKind::BadBox,
    })
}

fn parse_box(value: &str, line: usize, column: usize) -> Result<SearchBox, ParseError> {
    let bad = || ParseError {
        line,
        column,
        kind: ParseErrorKind::BadBox,
    };
    let mut ranges = Vec::new();
    let mut rest = value;
    let mut offset = 0;
    while let Some(open) = rest.find('[') {
        let close = rest[open..].find(']').ok_or_else(bad)? + open;
        let inner = &rest[open + 1..close];
        let (a, b) = inner.split_once(',').ok_or_else(bad)?;
        let col_a = column + offset + open + 1;
        let col_b = col_a + a.len() + 1;
        ranges.push((parse_constant(a, line, col_a)?, parse_constant(b, line, col_b)?));
        let between = &rest[..open];
        if ranges.len() == 2 && between.trim() != "x" && between.trim() != "×" {
            return Err(bad());
        }
        offset += close + 1;
        rest = &rest[close + 1..];
    }
    if ranges.len() != 2 || !rest.trim().is_empty() {
        return Err(bad());
    }
    let [(x0, x1), (y0, y1)]: [(BigRational, BigRational); 2] = ranges.try_into().map_err(|_| bad())?;
    SearchBox::new(x0, x1, y0, y1).map_err(|e| ParseError {
        line,
        column,
        kind: e.into(),
    })
}

/// Parses the contents of a `.vf` file.
pub fn parse_vector_field(src: &str) -> Result<VectorField, ParseError> {
    let mut p = None;
    let mut q = None;
    let mut bounds = None;
    let mut name = None;
    let mut last_line = 1;
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let lead = raw.len() - trimmed.len();
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ParseError {
                line,
                column: lead + 1,
                kind: ParseErrorKind::NotAnAssignment,
            });
        };
        let key_name = key.trim();
        let value_col = lead + key.len() + 2;
        let dup = |k: &str| ParseError {
            line,
            column: lead + 1,
            kind: ParseErrorKind::DuplicateKey(k.to_string()),
        };
        match key_name {
            "P" => {
                if p.is_some() {
                    return Err(dup("P"));
                }
                p = Some(parse_poly_at(value, line, value_col)?);
            }
            "Q" => {
                if q.is_some() {
                    return Err(dup("Q"));
                }
                q = Some(parse_poly_at(value, line, value_col)?);
            }
            "box" => {
                if bounds.is_some() {
                    return Err(dup("box"));
                }
                bounds = Some(parse_box(value, line, value_col)?);
            }
            "name" => {
                if name.is_some() {
                    return Err(dup("name"));
                }
                name = Some(value.trim().to_string());
            }
            other => {
                return Err(ParseError {
                    line,
                    column: lead + 1,
                    kind: ParseErrorKind::UnknownKey(other.to_string()),
                })
            }
        }
    }
    let missing = |k| ParseError {
        line: last_line,
        column: 1,
        kind: ParseErrorKind::MissingKey(k),
    };
    let p = p.ok_or_else(|| missing("P"))?;
    let q = q.ok_or_else(|| missing("Q"))?;
    let bounds = bounds.unwrap_or_default();
    let field = VectorField::new(p, q, bounds).map_err(|e| ParseError {
        line: 1,
        column: 1,
        kind: e.into(),
    })?;
    Ok(match name {
        Some(n) => field.with_name(n),
        None => field,
    })
}

/// Renders a number as it would be typed in a `.vf` file.
pub(crate) fn render_number(r: &BigRational) -> String {
    let s = super::poly::render_rational(&r.abs());
    if r.is_negative() {
        format!("-{s}")
    } else {
        s
    }
}
