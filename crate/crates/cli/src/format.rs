//! Locale-independent number formatting and the two output encodings.
//!
//! Every float leaves the program with 12 significant digits, in `%g` style:
//! fixed notation for exponents in `[-5, 12)`, scientific otherwise, trailing
//! zeros dropped. Lines end in `\n` on every platform.

use serde::Serialize;
use serde_json::{Map, Number, Value};
use wedgeq_core::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Formats a finite float with [`SIGNIFICANT_DIGITS`] significant digits.
/// Non-finite values format as the empty string.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent in LowerExp output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_num(x).parse().expect("formatted float re-parses")
    } else {
        x
    }
}

/// Rounds every float in `v`; non-finite floats become `null`.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serializes `value` into a rounded JSON tree.
pub fn to_rounded_value<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Inconsistent(format!("serialization failed: {e}")))?;
    round_json(&mut v);
    Ok(v)
}

pub fn render_json(v: &Value) -> String {
    let mut out = serde_json::to_string_pretty(v).expect("a JSON value always serializes");
    out.push('\n');
    out
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer does not fail");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// Flattens a JSON tree into `key,value` rows with dotted keys.
pub fn render_flat_csv(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_owned()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, v)| walk(&key(k), v, rows)),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(&key(&i.to_string()), v, rows)),
            Value::Null => rows.push((prefix.to_owned(), String::new())),
            Value::Bool(b) => rows.push((prefix.to_owned(), b.to_string())),
            Value::Number(n) => rows.push((
                prefix.to_owned(),
                n.as_f64()
                    .filter(|_| n.is_f64())
                    .map_or_else(|| n.to_string(), fmt_num),
            )),
            Value::String(s) => rows.push((prefix.to_owned(), s.clone())),
        }
    }
    let mut rows = Vec::new();
    walk("", v, &mut rows);
    let mut w = csv_writer();
    w.write_record(["key", "value"]).expect("in-memory write");
    for (k, v) in rows {
        w.write_record([k, v]).expect("in-memory write");
    }
    finish(w)
}

/// One CSV cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => Number::from_f64(round_sig(*x)).map_or(Value::Null, Value::Number),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

/// A fixed-header table with optional `# key=value` metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Vec<(String, f64)>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={}\n", fmt_num(*v)));
        }
        let mut w = csv_writer();
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
        }
        out.push_str(&finish(w));
        out
    }

    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| ((*h).to_owned(), c.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut out = Map::new();
        if !self.meta.is_empty() {
            let meta: Map<String, Value> = self
                .meta
                .iter()
                .map(|(k, v)| (k.clone(), Cell::Num(*v).json()))
                .collect();
            out.insert("meta".into(), Value::Object(meta));
        }
        out.insert("rows".into(), Value::Array(rows));
        Value::Object(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.7067934782608696), "0.706793478261");
        assert_eq!(fmt_num(0.55), "0.55");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1234567.0), "1234567");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(fmt_num(6.02e23), "6.02e+23");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(f64::NAN), "");
        assert_eq!(fmt_num(9.9999999999996), "10");
    }

    #[test]
    fn json_rounding_and_nulls() {
        let mut v = serde_json::json!({"a": 0.7067934782608696, "b": [1, 2.0], "c": {"d": 1e-20}});
        round_json(&mut v);
        assert_eq!(v["a"].as_f64(), Some(0.706793478261));
        assert_eq!(v["b"][0].as_u64(), Some(1));
        let v = to_rounded_value(&f64::INFINITY).unwrap();
        assert!(v.is_null());
    }

    #[test]
    fn flat_csv() {
        let v = serde_json::json!({"a": {"b": 0.5, "c": null}, "d": [true, "x"]});
        assert_eq!(render_flat_csv(&v), "key,value\na.b,0.5\na.c,\nd.0,true\nd.1,x\n");
    }

    #[test]
    fn table_encodings() {
        let mut t = Table::new(&["x", "y", "ok"]);
        t.meta.push(("n".into(), 3.0));
        t.push(vec![Cell::Num(0.1), Cell::Empty, Cell::Bool(false)]);
        assert_eq!(t.to_csv(), "# n=3\nx,y,ok\n0.1,,false\n");
        let j = t.to_json();
        assert!(j["rows"][0]["y"].is_null());
        assert_eq!(j["meta"]["n"].as_f64(), Some(3.0));
    }

    proptest::proptest! {
        #[test]
        fn formatting_is_idempotent_and_close(x in proptest::num::f64::NORMAL) {
            let once = round_sig(x);
            proptest::prop_assert_eq!(fmt_num(once), fmt_num(x));
            proptest::prop_assert!(((once - x) / x).abs() <= 5e-12);
        }
    }
}
