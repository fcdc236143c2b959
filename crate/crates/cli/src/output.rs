//! Deterministic CSV assembly. Floating-point fields are printed with nine
//! significant digits, in plain decimal when the exponent allows and in
//! scientific notation otherwise, so output bytes are reproducible across
//! runs and thread counts.

pub fn fmt_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exponent.parse().expect("float exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

/// Builds a CSV document: header first, comma-separated fields, one row per
/// line, trailing newline.
pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            lines: vec![header.join(",")],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn finish(self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_nine_significant_digits() {
        assert_eq!(fmt_sig9(12.3), "12.3");
        assert_eq!(fmt_sig9(15.1875), "15.1875");
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(-118.0), "-118");
        assert_eq!(fmt_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig9(123456789.123), "123456789");
        assert_eq!(fmt_sig9(1e-5), "1e-5");
        assert_eq!(fmt_sig9(2.5e12), "2.5e12");
        assert_eq!(fmt_sig9(f64::INFINITY), "inf");
        assert_eq!(fmt_sig9(-0.000123456789), "-0.000123456789");
    }

    #[test]
    fn rounds_rather_than_truncates() {
        assert_eq!(fmt_sig9(0.9999999999), "1");
        assert_eq!(fmt_sig9(1.0000000049), "1");
    }

    #[test]
    fn csv_layout() {
        let mut csv = Csv::new(&["a", "b"]);
        csv.row(&["1".into(), "2".into()]);
        assert_eq!(csv.finish(), "a,b\n1,2\n");
    }
}
