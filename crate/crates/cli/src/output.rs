use std::fmt::Write as _;

pub const SCHEMA_LINE: &str = "# schema=v1";

pub struct Column {
    pub name: &'static str,
    /// Logarithmic or energy-valued; converted when bits are requested.
    pub scaled: bool,
}

impl Column {
    pub fn plain(name: &'static str) -> Self {
        Self { name, scaled: false }
    }

    pub fn scaled(name: &'static str) -> Self {
        Self { name, scaled: true }
    }
}

pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<f64>>) -> Self {
        Self { columns, rows }
    }

    pub fn to_csv(&self, task: &str, bits: bool) -> String {
        let mut out = String::new();
        out.push_str(SCHEMA_LINE);
        out.push('\n');
        let _ = writeln!(out, "# task={task} units={}", if bits { "bits" } else { "nats" });
        let names: Vec<&str> = self.columns.iter().map(|c| c.name).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .zip(&self.columns)
                .map(|(&v, c)| {
                    let v = if bits && c.scaled { v / std::f64::consts::LN_2 } else { v };
                    format!("{v:.16e}")
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}
