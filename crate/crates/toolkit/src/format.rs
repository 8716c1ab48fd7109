//! Real-number text format shared by every CSV the toolkit writes.
//!
//! Values are printed with 9 significant digits in the style of C's `%.9g`:
//! fixed notation for decimal exponents in `[-4, 9)`, scientific otherwise,
//! trailing zeros dropped.

/// Formats `x` with 9 significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    if !(-4..9).contains(&exp) {
        let mut m = format!("{}.{}", &digits[..1], &digits[1..]);
        trim_fraction(&mut m);
        return format!("{sign}{m}e{exp}");
    }
    let mut s = if exp >= 0 {
        let split = exp as usize + 1;
        format!("{}.{}", &digits[..split], &digits[split..])
    } else {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    };
    trim_fraction(&mut s);
    format!("{sign}{s}")
}

fn trim_fraction(s: &mut String) {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
}

/// Rounds `x` to the value its 9-digit text form parses back to.
///
/// Decisions on persisted thresholds compare quantized scores, so a verdict
/// can always be reproduced from the printed numbers alone.
pub fn quantize(x: f64) -> f64 {
    sig9(x).parse().expect("sig9 output parses")
}
