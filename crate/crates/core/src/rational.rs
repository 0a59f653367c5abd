//! Exact rationals and exact complex rationals used by the combinatorial modules.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;

/// Exact rational number.
pub type Q = BigRational;

/// Exact complex rational `re + i·im`.
pub type CQ = Complex<Q>;

/// Builds `n/d`; panics on `d == 0`.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Builds the integer `n` as a rational.
pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Exact complex rational with real part `re` and imaginary part zero.
pub fn cq_real(re: Q) -> CQ {
    Complex::new(re, Q::zero())
}

/// Exact complex zero.
pub fn cq_zero() -> CQ {
    Complex::new(Q::zero(), Q::zero())
}

/// Floor of a rational as a big integer.
pub fn floor(x: &Q) -> BigInt {
    x.numer().div_floor(x.denom())
}

/// Ceiling of a rational as a big integer.
pub fn ceil(x: &Q) -> BigInt {
    -((-x.numer()).div_floor(x.denom()))
}

/// Integer `n` such that `x + n` lies in the window `(a-1, a]`.
pub fn window_shift(x: &Q, a: &Q) -> BigInt {
    floor(&(a - x))
}

/// Reduces `x` into the window `(a-1, a]` by an integer shift.
pub fn reduce_to_window(x: &Q, a: &Q) -> Q {
    x + Q::from_integer(window_shift(x, a))
}

/// True when `x` lies in `(a-1, a]`.
pub fn in_window(x: &Q, a: &Q) -> bool {
    x <= a && x > &(a - Q::one())
}

/// True when `x` is an integer.
pub fn is_integer(x: &Q) -> bool {
    x.denom().is_one()
}

/// Nearest `f64` to a rational.
pub fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or_else(|| {
        // Very large numerators/denominators: go through a scaled quotient.
        let n = x.numer().to_f64().unwrap_or(f64::NAN);
        let d = x.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Converts an exact complex rational to floating point.
pub fn cq_to_c64(z: &CQ) -> num_complex::Complex64 {
    num_complex::Complex64::new(to_f64(&z.re), to_f64(&z.im))
}

/// Squared modulus `|z|^2` of an exact complex rational.
pub fn cq_norm_sqr(z: &CQ) -> Q {
    &z.re * &z.re + &z.im * &z.im
}

/// Multiplies an exact complex rational by a rational scalar.
pub fn cq_scale(z: &CQ, s: &Q) -> CQ {
    Complex::new(&z.re * s, &z.im * s)
}

/// Total order on exact complex rationals: by real part, then imaginary part.
pub fn cq_cmp(a: &CQ, b: &CQ) -> std::cmp::Ordering {
    a.re.cmp(&b.re).then_with(|| a.im.cmp(&b.im))
}

/// Error parsing a rational or complex rational from text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {what} from {text:?}")]
pub struct ParseRationalError {
    pub what: &'static str,
    pub text: String,
}

/// Parses `"p"`, `"p/q"` or a decimal literal such as `"0.25"` exactly.
pub fn parse_q(text: &str) -> Result<Q, ParseRationalError> {
    let err = || ParseRationalError { what: "rational", text: text.to_string() };
    let t = text.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(Q::new(n, d));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.trim_start().starts_with('-');
        let ip_digits = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) {
            return Err(err());
        }
        let whole = if ip_digits.is_empty() {
            BigInt::zero()
        } else {
            BigInt::from_str(ip_digits).map_err(|_| err())?
        };
        let frac = if fp.is_empty() { BigInt::zero() } else { BigInt::from_str(fp).map_err(|_| err())? };
        let scale = num_traits::pow(BigInt::from(10), fp.len());
        let mag = Q::new(whole * &scale + frac, scale);
        return Ok(if neg { -mag } else { mag });
    }
    BigInt::from_str(t).map(Q::from_integer).map_err(|_| err())
}

/// Formats a rational exactly as `"p"` or `"p/q"`.
pub fn fmt_q(x: &Q) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Display adapter printing a complex rational as `re` or `re+im*i`.
pub struct CqDisplay<'a>(pub &'a CQ);

impl fmt::Display for CqDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = self.0;
        if z.im.is_zero() {
            write!(f, "{}", fmt_q(&z.re))
        } else if z.im.is_negative() {
            write!(f, "{}-{}i", fmt_q(&z.re), fmt_q(&-z.im.clone()))
        } else {
            write!(f, "{}+{}i", fmt_q(&z.re), fmt_q(&z.im))
        }
    }
}

/// Parses `"re"`, `"re+im i"`, `"re-im i"` or `"im i"`; parts are rationals.
pub fn parse_cq(text: &str) -> Result<CQ, ParseRationalError> {
    let err = || ParseRationalError { what: "complex rational", text: text.to_string() };
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(err());
    }
    let Some(body) = t.strip_suffix('i') else {
        return parse_q(&t).map(cq_real).map_err(|_| err());
    };
    // Split at the last sign that is not the leading one.
    let split = body
        .char_indices()
        .skip(1)
        .filter(|(_, c)| *c == '+' || *c == '-')
        .map(|(i, _)| i)
        .last();
    let (re, im) = match split {
        Some(i) => (&body[..i], &body[i..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        s => s.trim_start_matches('+'),
    };
    Ok(Complex::new(parse_q(re).map_err(|_| err())?, parse_q(im).map_err(|_| err())?))
}

/// Formats a complex rational exactly; see [`CqDisplay`].
pub fn fmt_cq(z: &CQ) -> String {
    CqDisplay(z).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_reduction() {
        assert_eq!(reduce_to_window(&q(-1, 1), &qi(0)), qi(0));
        assert_eq!(reduce_to_window(&q(1, 3), &qi(0)), q(-2, 3));
        assert_eq!(reduce_to_window(&q(-7, 4), &q(1, 2)), q(1, 4));
        assert!(in_window(&qi(0), &qi(0)));
        assert!(!in_window(&qi(-1), &qi(0)));
    }

    #[test]
    fn floor_ceil() {
        assert_eq!(floor(&q(-1, 2)), BigInt::from(-1));
        assert_eq!(ceil(&q(-1, 2)), BigInt::from(0));
        assert_eq!(ceil(&q(5, 3)), BigInt::from(2));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_q("-3/6").unwrap(), q(-1, 2));
        assert_eq!(parse_q("0.25").unwrap(), q(1, 4));
        assert_eq!(parse_q("-.5").unwrap(), q(-1, 2));
        assert_eq!(parse_q("7").unwrap(), qi(7));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("x").is_err());
        assert_eq!(fmt_q(&q(6, -4)), "-3/2");
        let z = parse_cq("1/2-1/3i").unwrap();
        assert_eq!(z, Complex::new(q(1, 2), q(-1, 3)));
        assert_eq!(fmt_cq(&z), "1/2-1/3i");
        assert_eq!(parse_cq("i").unwrap(), Complex::new(qi(0), qi(1)));
        assert_eq!(parse_cq("-2i").unwrap(), Complex::new(qi(0), qi(-2)));
        assert_eq!(parse_cq(&fmt_cq(&Complex::new(q(-5, 7), q(2, 9)))).unwrap(), Complex::new(q(-5, 7), q(2, 9)));
    }
}
