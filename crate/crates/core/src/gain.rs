//! One-variable polynomial gain functions such as `10 + 4*s^4`.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := ['-'] coeff ['*' power] | ['-'] power
//! power := 's' ['^' integer]
//! coeff := decimal | decimal '/' decimal
//! ```
//!
//! Repeated powers are summed. Decimals accept an exponent (`1e-3`).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("bad polynomial `{input}` at offset {offset}: {reason}")]
pub struct PolyParseError {
    pub input: String,
    pub offset: usize,
    pub reason: String,
}

/// Polynomial in `s` with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// True when every coefficient is non-negative, only even powers appear and
    /// the constant term is at least `bound`; then `p(s) >= bound` everywhere.
    pub fn bounded_below_by(&self, bound: f64) -> bool {
        self.coeffs[0] >= bound
            && self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .all(|(k, &c)| c == 0.0 || (k % 2 == 0 && c > 0.0))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && !(first && k + 1 == self.coeffs.len()) {
                continue;
            }
            let (sign, mag) = if c.is_sign_negative() && c != 0.0 { ("-", -c) } else { ("+", c) };
            if first {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            match k {
                0 => write!(f, "{mag:?}")?,
                1 => write!(f, "{mag:?}*s")?,
                _ => write!(f, "{mag:?}*s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = PolyParseError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        Parser { input, chars: input.char_indices().filter(|(_, c)| !c.is_whitespace()).collect(), pos: 0 }
            .parse()
    }
}

struct Parser<'a> {
    input: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: impl Into<String>) -> PolyParseError {
        let offset = self.chars.get(self.pos).map_or(self.input.len(), |(i, _)| *i);
        PolyParseError { input: self.input.to_string(), offset, reason: reason.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Polynomial, PolyParseError> {
        if self.chars.is_empty() {
            return Err(self.err("empty expression"));
        }
        let mut coeffs: Vec<f64> = Vec::new();
        let mut sign = if self.eat('-') {
            -1.0
        } else {
            self.eat('+');
            1.0
        };
        loop {
            let (c, k) = self.term()?;
            if coeffs.len() <= k {
                coeffs.resize(k + 1, 0.0);
            }
            coeffs[k] += sign * c;
            match self.peek() {
                None => break,
                Some('+') => sign = 1.0,
                Some('-') => sign = -1.0,
                Some(other) => return Err(self.err(format!("unexpected `{other}`"))),
            }
            self.pos += 1;
        }
        Ok(Polynomial::new(coeffs))
    }

    fn term(&mut self) -> Result<(f64, usize), PolyParseError> {
        if self.peek() == Some('s') {
            return Ok((1.0, self.power()?));
        }
        let c = self.coeff()?;
        if self.eat('*') {
            if self.peek() != Some('s') {
                return Err(self.err("expected `s` after `*`"));
            }
            return Ok((c, self.power()?));
        }
        Ok((c, 0))
    }

    fn power(&mut self) -> Result<usize, PolyParseError> {
        self.pos += 1; // the `s`
        if !self.eat('^') {
            return Ok(1);
        }
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        digits.parse().map_err(|_| self.err("expected an integer exponent"))
    }

    fn decimal(&mut self) -> Result<f64, PolyParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let exp_sign = (c == '-' || c == '+')
                && self.pos > start
                && matches!(self.chars[self.pos - 1].1, 'e' | 'E');
            if c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        let value: f64 = text.parse().map_err(|_| {
            self.pos = start;
            self.err("expected a number")
        })?;
        if !value.is_finite() {
            return Err(self.err("coefficient is not finite"));
        }
        Ok(value)
    }

    fn coeff(&mut self) -> Result<f64, PolyParseError> {
        let num = self.decimal()?;
        if self.eat('/') {
            let den = self.decimal()?;
            if den == 0.0 {
                return Err(self.err("zero denominator"));
            }
            return Ok(num / den);
        }
        Ok(num)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    #[test]
    fn parses_benchmark_gains() {
        assert_eq!(p("10 + 4*s^4").coeffs(), &[10.0, 0.0, 0.0, 0.0, 4.0]);
        assert_eq!(p("s^2 + 1").coeffs(), &[1.0, 0.0, 1.0]);
        assert_eq!(p("1").coeffs(), &[1.0]);
        assert_eq!(p("10 + 4*s^4").eval(1.0), 14.0);
        assert_eq!(p("s^2+1").eval(2.0), 5.0);
    }

    #[test]
    fn parses_signs_rationals_and_exponents() {
        assert_eq!(p("-1/2 + 3*s - s^3").coeffs(), &[-0.5, 3.0, 0.0, -1.0]);
        assert_eq!(p("2.5e-1*s + 1e+1").coeffs(), &[10.0, 0.25]);
        assert_eq!(p("s + s").coeffs(), &[0.0, 2.0]);
        assert_eq!(p("0").coeffs(), &[0.0]);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "s^", "1 +", "3 * 4", "x", "1/0", "2s", "1e999"] {
            assert!(bad.parse::<Polynomial>().is_err(), "{bad}");
        }
    }

    #[test]
    fn lower_bound_check() {
        assert!(p("10 + 4*s^4").bounded_below_by(1.0));
        assert!(p("1 + s^2").bounded_below_by(1.0));
        assert!(!p("1 + s").bounded_below_by(1.0));
        assert!(!p("0.5 + s^2").bounded_below_by(1.0));
        assert!(!p("1 - s^2").bounded_below_by(1.0));
    }

    proptest! {
        #[test]
        fn display_round_trips(c in prop::collection::vec(-100.0f64..100.0, 1..6)) {
            let poly = Polynomial::new(c);
            let back: Polynomial = poly.to_string().parse().unwrap();
            prop_assert_eq!(back, poly);
        }
    }
}
