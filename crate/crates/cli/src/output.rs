//! Deterministic CSV/JSON formatting. Floats in CSV use 17 significant digits.

use serde_json::{json, Value};
use thermlab::linalg::C64;
use thermlab::model::DensityMatrix;

pub const STATE_COLUMNS: [&str; 9] = [
    "rho_ee",
    "rho_g1g1",
    "rho_g2g2",
    "re_rho_g2g1",
    "im_rho_g2g1",
    "re_rho_eg1",
    "im_rho_eg1",
    "re_rho_eg2",
    "im_rho_eg2",
];

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Populations, `⟨σ_g2g1⟩ = ρ_g1g2` and the two excited–ground elements.
pub fn state_values(rho: &DensityMatrix) -> [f64; 9] {
    let m = rho.matrix();
    let c = m[(1, 2)];
    [
        m[(0, 0)].re,
        m[(1, 1)].re,
        m[(2, 2)].re,
        c.re,
        c.im,
        m[(0, 1)].re,
        m[(0, 1)].im,
        m[(0, 2)].re,
        m[(0, 2)].im,
    ]
}

pub fn state_json(rho: &DensityMatrix) -> Value {
    let m = rho.matrix();
    let part = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> { (0..3).map(|i| (0..3).map(|j| f(&m[(i, j)])).collect()).collect() };
    json!({ "re": part(|z| z.re), "im": part(|z| z.im) })
}

pub struct Csv {
    text: String,
}

impl Csv {
    /// Comment preamble with the version and resolved config, then the header row.
    pub fn new(version: &str, command: &str, config: &Value, columns: &[&str]) -> Self {
        let mut text = format!("# {version}\n# command: {command}\n# config: {config}\n");
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn comment(&mut self, line: &str) {
        // comments stay above the header
        let header_start = self.text.trim_end_matches('\n').rfind('\n').map_or(0, |k| k + 1);
        self.text.insert_str(header_start, &format!("# {line}\n"));
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn artifact(version: &str, command: &str, config: &Value, result: Value) -> String {
    let doc = json!({ "version": version, "command": command, "config": config, "result": result });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use thermlab::model::Level;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new("v", "evolve", &json!({"a": 1}), &["t", "x"]);
        c.comment("note");
        c.row(&[num(0.0), num(1.0)]);
        let text = c.finish();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[3], "# note");
        assert_eq!(lines[4], "t,x");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn state_columns() {
        let v = state_values(&DensityMatrix::basis_state(Level::G2));
        assert_eq!(v[2], 1.0);
        assert_eq!(v.iter().sum::<f64>(), 1.0);
    }
}
