//! CSV artifacts with a `#`-commented config header and results footer.
//!
//! Layout: a `# fp8sim <subcommand>` marker line, one `# key = value` line
//! per resolved setting, the column-name row, the data rows, then
//! `# key = value` result lines. The header block doubles as a config file,
//! so a run reproduces itself with
//! `fp8sim <subcommand> --config <artifact> --out <elsewhere>`.

use crate::error::{CliError, Result};
use std::fmt::Display;
use std::fs;
use std::io::{self, Write};

#[derive(Debug)]
pub struct Artifact {
    pub subcommand: String,
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footer: Vec<(String, String)>,
}

impl Artifact {
    pub fn new(subcommand: &str, columns: &[&str]) -> Artifact {
        Artifact {
            subcommand: subcommand.to_string(),
            config: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        }
    }

    /// Echo one resolved setting into the header.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Record one result line in the footer.
    pub fn note(&mut self, key: &str, value: impl Display) {
        self.footer.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut text = String::new();
        text.push_str("# fp8sim ");
        text.push_str(&self.subcommand);
        text.push('\n');
        for (key, value) in &self.config {
            text.push_str(&format!("# {key} = {value}\n"));
        }
        text.push_str(&self.columns.join(","));
        text.push('\n');
        for row in &self.rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        for (key, value) in &self.footer {
            text.push_str(&format!("# {key} = {value}\n"));
        }
        text
    }

    /// Write the artifact to `out`, or to stdout when `out` is None.
    pub fn emit(&self, out: Option<&str>) -> Result<()> {
        let text = self.render();
        match out {
            Some(path) => fs::write(path, &text)
                .map_err(|e| CliError::Data(format!("cannot write {path}: {e}"))),
            None => io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Data(format!("cannot write to stdout: {e}"))),
        }
    }

    /// Parse a file written by `emit`. Structural damage is a data error.
    pub fn parse(path: &str) -> Result<Artifact> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {path}: {e}")))?;
        let mut lines = text.lines().enumerate();

        let subcommand = match lines.next() {
            Some((_, first)) if first.starts_with("# fp8sim ") => {
                first.trim_start_matches("# fp8sim ").trim().to_string()
            }
            _ => {
                return Err(CliError::Data(format!(
                    "{path}: not an fp8sim artifact (first line must be `# fp8sim <subcommand>`)"
                )));
            }
        };

        let mut config = Vec::new();
        let mut columns = Vec::new();
        for (_, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    config.push((key.trim().to_string(), value.trim().to_string()));
                }
                continue;
            }
            columns = line.split(',').map(|c| c.trim().to_string()).collect();
            break;
        }
        if columns.is_empty() {
            return Err(CliError::Data(format!("{path}: no column header row")));
        }

        let mut rows = Vec::new();
        let mut footer = Vec::new();
        for (idx, line) in lines {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once('=') {
                    footer.push((key.trim().to_string(), value.trim().to_string()));
                }
                continue;
            }
            if !footer.is_empty() {
                return Err(CliError::Data(format!(
                    "{path}:{}: data row after the results footer",
                    idx + 1
                )));
            }
            let row: Vec<String> = line.split(',').map(|f| f.to_string()).collect();
            if row.len() != columns.len() {
                return Err(CliError::Data(format!(
                    "{path}:{}: schema mismatch: expected {} fields, got {}",
                    idx + 1,
                    columns.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }

        Ok(Artifact { subcommand, config, columns, rows, footer })
    }

    pub fn config_get(&self, key: &str) -> Option<&str> {
        self.config.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn footer_get(&self, key: &str) -> Option<&str> {
        self.footer.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Shortest round-trip decimal rendering; `inf`, `-inf` and `NaN` spell
/// themselves the way `f64::from_str` reads them back.
pub fn float_field(value: f64) -> String {
    format!("{value}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Artifact {
        let mut art = Artifact::new("train", &["step", "loss"]);
        art.set("policy", "fp32");
        art.set("steps", 2);
        art.push_row(vec!["0".into(), "2.5".into()]);
        art.push_row(vec!["1".into(), "1.25".into()]);
        art.note("final_loss", 1.25);
        art
    }

    fn parse_str(text: &str) -> Result<Artifact> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f.flush().unwrap();
        Artifact::parse(f.path().to_str().unwrap())
    }

    #[test]
    fn test_render_layout() {
        let text = sample().render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "# fp8sim train",
                "# policy = fp32",
                "# steps = 2",
                "step,loss",
                "0,2.5",
                "1,1.25",
                "# final_loss = 1.25",
            ]
        );
    }

    #[test]
    fn test_parse_inverts_render() {
        let art = sample();
        let parsed = parse_str(&art.render()).unwrap();
        assert_eq!(parsed.subcommand, "train");
        assert_eq!(parsed.config, art.config);
        assert_eq!(parsed.columns, art.columns);
        assert_eq!(parsed.rows, art.rows);
        assert_eq!(parsed.footer, art.footer);
        assert_eq!(parsed.config_get("policy"), Some("fp32"));
        assert_eq!(parsed.footer_get("final_loss"), Some("1.25"));
        assert_eq!(parsed.column("loss"), Some(1));
    }

    #[test]
    fn test_parse_rejects_missing_marker() {
        let err = parse_str("step,loss\n0,1\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn test_parse_rejects_wrong_field_count() {
        let err = parse_str("# fp8sim train\nstep,loss\n0,1,9\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("schema mismatch"), "{err}");
    }

    #[test]
    fn test_parse_rejects_rows_after_footer() {
        let err = parse_str("# fp8sim train\nstep,loss\n0,1\n# final_loss = 1\n1,2\n").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn test_float_field_spellings_round_trip() {
        for v in [0.1, -3.0, f64::INFINITY, f64::NEG_INFINITY, 448.0] {
            let s = float_field(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert!(float_field(f64::NAN).parse::<f64>().unwrap().is_nan());
    }
}
