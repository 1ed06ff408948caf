//! Tiny arbitrary-precision evaluator for real constants such as
//! `pi*(sqrt(5)-1)/2`. Supports `+ - * / ^`, parentheses, `pi`, decimal
//! literals and the functions `sqrt sin cos exp ln`.

use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision;

pub fn parse_real_expr(src: &str, prec: u32) -> Result<Float> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, prec };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    if !v.is_finite() {
        return Err(Error::Parse(format!("{src:?} does not evaluate to a finite number")));
    }
    Ok(v)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    prec: u32,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let src = String::from_utf8_lossy(self.src);
        Error::Parse(format!("{msg} at offset {} in {src:?}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Float> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc += self.term()?;
            } else if self.eat(b'-') {
                acc -= self.term()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Float> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc *= self.unary()?;
            } else if self.eat(b'/') {
                let d = self.unary()?;
                if d.is_zero() {
                    return Err(self.error("division by zero"));
                }
                acc /= d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Float> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Float> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(base.pow(exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Float> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_ascii_lowercase();
                if name == "pi" {
                    return Ok(precision::pi(self.prec));
                }
                if !self.eat(b'(') {
                    return Err(self.error(&format!("unknown identifier {name:?}")));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                match name.as_str() {
                    "sqrt" => Ok(arg.sqrt()),
                    "sin" => Ok(arg.sin()),
                    "cos" => Ok(arg.cos()),
                    "exp" => Ok(arg.exp()),
                    "ln" | "log" => Ok(arg.ln()),
                    _ => Err(self.error(&format!("unknown function {name:?}"))),
                }
            }
            _ => Err(self.error("expected a number, 'pi', a function or '('")),
        }
    }

    fn number(&mut self) -> Result<Float> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(self);
            if self.pos == exp_start {
                self.pos = save;
            }
        }
        let lexeme = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        precision::from_decimal(lexeme, self.prec).map_err(|_| self.error("malformed number"))
    }
}
