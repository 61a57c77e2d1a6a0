//! Textual forms for matrices, norms, points and builtin fields.
//!
//! Errors carry the character offset of the failure within the full input.
//!
//! - matrix: JSON rows `[[4,0],[0,1]]` or inline `4,0;0,1`
//! - norm: `quad:<matrix>` or `q:<exponent>` (dimension supplied separately)
//! - points: `1,1;2,0`
//! - field: `poly:<terms>`, `harmonic-pullback:<terms>`, `liouville`,
//!   `constant:<c>`, `log-radius`, `exp:<a1>,<a2>,...`, where `<terms>` is a
//!   sum of monomials such as `3*y1^2*y2-0.5*y2+1`.

use crate::error::{Error, Result};
use crate::fields::{
    constant_field, exponential_field, log_radius_field, make_harmonic_pullback, make_liouville_profile, Polynomial,
    ScalarField,
};
use crate::linalg::Matrix;
use crate::norms::Norm;
use crate::spd::SpdMatrix;

fn parse_err(position: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position,
        message: message.into(),
    }
}

fn shift(err: Error, offset: usize) -> Error {
    match err {
        Error::Parse { position, message } => Error::Parse {
            position: position + offset,
            message,
        },
        other => other,
    }
}

fn parse_number(s: &str, offset: usize) -> Result<f64> {
    let t = s.trim();
    let lead = s.len() - s.trim_start().len();
    t.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(offset + lead, format!("expected a finite number, found {t:?}")))
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_rows(s: &str) -> Result<Vec<Vec<f64>>> {
    let trimmed = s.trim_start();
    if trimmed.starts_with('[') {
        let lead = s.len() - trimmed.len();
        return serde_json::from_str::<Vec<Vec<f64>>>(trimmed).map_err(|e| {
            // serde_json columns are 1-based and count chars on the line.
            let column = e.column().saturating_sub(1);
            parse_err(lead + column, format!("invalid JSON matrix: {e}"))
        });
    }
    let mut rows = Vec::new();
    let mut offset = 0;
    for row in s.split(';') {
        let mut cells = Vec::new();
        let mut cell_offset = offset;
        for cell in row.split(',') {
            cells.push(parse_number(cell, cell_offset)?);
            cell_offset += cell.len() + 1;
        }
        rows.push(cells);
        offset += row.len() + 1;
    }
    Ok(rows)
}

pub fn parse_matrix(s: &str) -> Result<Matrix> {
    let rows = parse_rows(s)?;
    Matrix::from_rows(&rows)
}

pub fn parse_points(s: &str) -> Result<Vec<Vec<f64>>> {
    parse_rows(s)
}

/// Parses `quad:<matrix>` or `q:<exponent>`. `dim` is required for `q:`
/// and must agree with the matrix size for `quad:` when given.
pub fn parse_norm(spec: &str, dim: Option<usize>) -> Result<Norm> {
    if let Some(rest) = spec.strip_prefix("quad:") {
        let offset = "quad:".len();
        let m = parse_matrix(rest).map_err(|e| shift(e, offset))?;
        let m = SpdMatrix::new(&m)?;
        if let Some(n) = dim {
            if n != m.dim() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.dim(),
                });
            }
        }
        Ok(Norm::quadratic(m))
    } else if let Some(rest) = spec.strip_prefix("q:") {
        let q = parse_number(rest, 2)?;
        let n = dim.ok_or_else(|| parse_err(0, "q-norm needs an explicit dimension"))?;
        Norm::q_norm(q, n)
    } else {
        Err(parse_err(
            0,
            format!("unknown norm kind in {spec:?} (expected quad: or q:)"),
        ))
    }
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.char_indices().collect(),
            pos: 0,
            src,
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i)
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.offset();
        let begin = self.pos;
        while let Some(c) = self.peek() {
            let prev_is_exp = self.pos > begin && matches!(self.chars[self.pos - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || ((c == '-' || c == '+') && prev_is_exp) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = &self.src[start..self.offset()];
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| parse_err(start, format!("invalid number {text:?}")))
    }

    fn integer(&mut self) -> Result<u32> {
        let start = self.offset();
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        self.src[start..self.offset()]
            .parse::<u32>()
            .map_err(|_| parse_err(start, "expected a non-negative integer"))
    }
}

/// Parses a polynomial such as `3*y1^2*y2 - 0.5*y2 + 1` in `n` variables
/// (`x1..xn` is accepted as well as `y1..yn`).
pub fn parse_polynomial(spec: &str, n: usize) -> Result<Polynomial> {
    let mut cur = Cursor::new(spec);
    let mut terms = Vec::new();
    cur.skip_ws();
    if cur.peek().is_none() {
        return Err(parse_err(0, "empty polynomial"));
    }
    let mut sign = 1.0;
    loop {
        let mut coeff = sign;
        loop {
            if cur.eat('-') {
                coeff = -coeff;
            } else if !cur.eat('+') {
                break;
            }
        }
        let mut exps = vec![0u32; n];
        loop {
            cur.skip_ws();
            match cur.peek() {
                Some(c) if c.is_ascii_digit() || c == '.' => coeff *= cur.number()?,
                Some('x' | 'y') => {
                    let at = cur.offset();
                    cur.pos += 1;
                    let idx = cur.integer()? as usize;
                    if idx == 0 || idx > n {
                        return Err(parse_err(at, format!("variable index {idx} outside 1..={n}")));
                    }
                    let power = if cur.eat('^') {
                        cur.skip_ws();
                        cur.integer()?
                    } else {
                        1
                    };
                    exps[idx - 1] += power;
                }
                _ => return Err(parse_err(cur.offset(), "expected a number or variable")),
            }
            if !cur.eat('*') {
                break;
            }
        }
        terms.push((exps, coeff));
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some('+') => {
                cur.pos += 1;
                sign = 1.0;
            }
            Some('-') => {
                cur.pos += 1;
                sign = -1.0;
            }
            Some(_) => return Err(parse_err(cur.offset(), "expected '+', '-' or end of input")),
        }
    }
    Polynomial::new(n, terms)
}

/// Builds a builtin field in the norm's dimension. `harmonic-pullback`
/// pulls back through `√M` of the (quadratic) norm; `liouville` uses its
/// dual.
pub fn parse_field(spec: &str, norm: &Norm) -> Result<ScalarField> {
    let n = norm.dim();
    if let Some(rest) = spec.strip_prefix("poly:") {
        let p = parse_polynomial(rest, n).map_err(|e| shift(e, 5))?;
        Ok(p.to_field())
    } else if let Some(rest) = spec.strip_prefix("harmonic-pullback:") {
        let offset = "harmonic-pullback:".len();
        let p = parse_polynomial(rest, n).map_err(|e| shift(e, offset))?;
        let m = norm.matrix().ok_or(Error::UnsupportedNorm)?;
        make_harmonic_pullback(&p, m)
    } else if spec == "liouville" {
        make_liouville_profile(&norm.dual(), 0.0)
    } else if let Some(rest) = spec.strip_prefix("constant:") {
        Ok(constant_field(n, parse_number(rest, 9)?))
    } else if spec == "log-radius" {
        Ok(log_radius_field(n))
    } else if let Some(rest) = spec.strip_prefix("exp:") {
        let a = parse_rows(rest).map_err(|e| shift(e, 4))?;
        if a.len() != 1 || a[0].len() != n {
            return Err(parse_err(4, format!("expected {n} comma-separated coefficients")));
        }
        Ok(exponential_field(a.into_iter().next().unwrap()))
    } else {
        Err(parse_err(0, format!("unknown field {spec:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_forms_agree() {
        let a = parse_matrix("[[4,0],[0,1]]").unwrap();
        let b = parse_matrix("4,0;0,1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, Matrix::from_diag(&[4.0, 1.0]));
    }

    #[test]
    fn matrix_errors_carry_positions() {
        match parse_matrix("4,0;0,x") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        match parse_norm("quad:[[4,0],[0,]]", None) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 15),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_matrix("1,2;3"), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn norms() {
        let q = parse_norm("q:4", Some(2)).unwrap();
        assert_eq!(q, Norm::q_norm(4.0, 2).unwrap());
        assert!(matches!(parse_norm("q:4", None), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_norm("quad:1,0;0,1", Some(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            parse_norm("quad:1,2;2,1", None),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(matches!(parse_norm("l2", None), Err(Error::Parse { position: 0, .. })));
        let n = parse_norm("quad:[[4,0],[0,1]]", Some(2)).unwrap();
        assert_eq!(parse_norm(&n.label(), None).unwrap(), n);
    }

    #[test]
    fn polynomials() {
        let p = parse_polynomial("y1^2+y2^2", 2).unwrap();
        assert_eq!(p, Polynomial::new(2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap());
        let p = parse_polynomial(" -3*x1^2*y2 + 2.5e-1*y2 - 1 ", 2).unwrap();
        assert_eq!(
            p,
            Polynomial::new(2, [(vec![2, 1], -3.0), (vec![0, 1], 0.25), (vec![0, 0], -1.0)]).unwrap()
        );
        assert_eq!(parse_polynomial(&p.to_string(), 2).unwrap(), p);
        match parse_polynomial("y1+y3", 2) {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_polynomial("y1 y2", 2),
            Err(Error::Parse { position: 3, .. })
        ));
        assert!(parse_polynomial("", 2).is_err());
    }

    #[test]
    fn fields() {
        let norm = parse_norm("quad:4,0;0,1", None).unwrap();
        let u = parse_field("poly:y1^2+y2^2", &norm).unwrap();
        assert_eq!(u.value(&[1.0, 2.0]).unwrap(), 5.0);
        let h = parse_field("harmonic-pullback:y1^2-y2^2", &norm).unwrap();
        assert!((h.value(&[1.0, 1.0]).unwrap() + 0.75).abs() < 1e-15);
        assert!(matches!(
            parse_field("harmonic-pullback:y1^2+y2^2", &norm),
            Err(Error::NotHarmonic)
        ));
        assert_eq!(
            parse_field("constant:2.5", &norm).unwrap().value(&[9.0, 9.0]).unwrap(),
            2.5
        );
        assert_eq!(
            parse_field("liouville", &norm).unwrap().value(&[0.0, 0.0]).unwrap(),
            0.0
        );
        assert!(parse_field("exp:1,2", &norm).is_ok());
        assert!(matches!(
            parse_field("poly:y1+", &norm),
            Err(Error::Parse { position: 8, .. })
        ));
        assert!(parse_field("bogus", &norm).is_err());
    }
}
