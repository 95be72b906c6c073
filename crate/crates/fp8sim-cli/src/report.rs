//! `report`: summarize previously written artifacts, cross-checking each
//! file's schema against the subcommand named in its header.

use crate::artifact::Artifact;
use crate::error::{CliError, Result};
use crate::{ablate, bench, codec_table, plan, train_cmd};
use std::fmt::Write as _;

#[derive(clap::Args)]
pub struct ReportArgs {
    /// Artifact files to summarize; at least one.
    #[arg(required = true, num_args = 1..)]
    files: Vec<String>,
}

fn expected_columns(subcommand: &str) -> Option<&'static [&'static str]> {
    match subcommand {
        "codec-table" => Some(&codec_table::COLUMNS),
        "allreduce-bench" => Some(&bench::COLUMNS),
        "ablate-optimizer" => Some(&ablate::COLUMNS),
        "zero-plan" => Some(&plan::COLUMNS),
        "train" => Some(&train_cmd::COLUMNS),
        _ => None,
    }
}

fn check_schema(art: &Artifact, path: &str) -> Result<()> {
    let expected = expected_columns(&art.subcommand).ok_or_else(|| {
        CliError::Data(format!("{path}: unknown artifact kind {:?}", art.subcommand))
    })?;
    if art.columns != expected {
        return Err(CliError::Data(format!(
            "{path}: schema mismatch: {} artifacts carry columns {}, found {}",
            art.subcommand,
            expected.join(","),
            art.columns.join(",")
        )));
    }
    Ok(())
}

fn field(art: &Artifact, row: &[String], name: &str) -> Option<f64> {
    art.column(name).and_then(|i| row.get(i)).and_then(|v| v.parse().ok())
}

/// Footer value if present, else the fallback computed from the rows.
fn footer_f64(art: &Artifact, key: &str, fallback: impl FnOnce() -> Option<f64>) -> Option<f64> {
    art.footer_get(key).and_then(|v| v.parse().ok()).or_else(fallback)
}

fn mean_finite(values: impl Iterator<Item = f64>) -> Option<f64> {
    let finite: Vec<f64> = values.filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        None
    } else {
        Some(finite.iter().sum::<f64>() / finite.len() as f64)
    }
}

fn opt(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => "n/a".to_string(),
    }
}

struct Summary {
    text: String,
    diverged: Vec<String>,
    train_finals: Vec<(String, f64)>,
}

fn summarize(art: &Artifact, path: &str, sum: &mut Summary) {
    let cfg = |key: &str| art.config_get(key).unwrap_or("?").to_string();
    match art.subcommand.as_str() {
        "codec-table" => {
            let class_col = art.column("class");
            let count = |class: &str| {
                art.rows
                    .iter()
                    .filter(|r| class_col.and_then(|i| r.get(i)).map(String::as_str) == Some(class))
                    .count()
            };
            writeln!(
                sum.text,
                "{path}: codec-table format={} codes={} (zero {}, subnormal {}, normal {}, inf {}, nan {})",
                cfg("format"),
                art.rows.len(),
                count("zero"),
                count("subnormal"),
                count("normal"),
                count("inf"),
                count("nan"),
            )
            .unwrap();
        }
        "allreduce-bench" => {
            let mean_snr = footer_f64(art, "mean_snr_db", || {
                mean_finite(art.rows.iter().filter_map(|r| field(art, r, "snr_db")))
            });
            let bytes: f64 = art
                .rows
                .iter()
                .filter_map(|r| field(art, r, "bytes"))
                .sum();
            let reduction = footer_f64(art, "reduction_fraction", || None);
            writeln!(
                sum.text,
                "{path}: allreduce-bench strategy={} workers={} dist={} sigma={} steps={} mean_snr_db={} bytes_total={} reduction_fraction={}",
                cfg("strategy"),
                cfg("workers"),
                cfg("dist"),
                cfg("sigma"),
                art.rows.len(),
                opt(mean_snr),
                bytes,
                opt(reduction),
            )
            .unwrap();
        }
        "ablate-optimizer" => {
            writeln!(
                sum.text,
                "{path}: ablate-optimizer specs={} steps={} seed={}",
                cfg("specs"),
                cfg("steps"),
                cfg("seed")
            )
            .unwrap();
            let spec_col = art.column("spec");
            let mut seen: Vec<String> = Vec::new();
            for row in &art.rows {
                if let Some(spec) = spec_col.and_then(|i| row.get(i)) {
                    if !seen.contains(spec) {
                        seen.push(spec.clone());
                    }
                }
            }
            for spec in seen {
                let last = art
                    .rows
                    .iter()
                    .rev()
                    .find(|r| spec_col.and_then(|i| r.get(i)) == Some(&spec));
                let final_loss = footer_f64(art, &format!("final_loss_{spec}"), || {
                    last.and_then(|r| field(art, r, "loss"))
                });
                let flag = last
                    .and_then(|r| field(art, r, "diverged_flag"))
                    .map(|f| f != 0.0)
                    .unwrap_or(false);
                writeln!(
                    sum.text,
                    "  spec {spec}: final_loss={} diverged={}",
                    opt(final_loss),
                    if flag { "yes" } else { "no" }
                )
                .unwrap();
                if flag {
                    sum.diverged.push(format!("{path} (spec {spec})"));
                }
            }
        }
        "zero-plan" => {
            let max_load = footer_f64(art, "max_load", || None);
            let min_load = footer_f64(art, "min_load", || None);
            let imbalance = footer_f64(art, "imbalance_ratio", || None);
            writeln!(
                sum.text,
                "{path}: zero-plan devices={} tensors={} max_load={} min_load={} imbalance_ratio={}",
                cfg("devices"),
                art.rows.len(),
                opt(max_load),
                opt(min_load),
                opt(imbalance),
            )
            .unwrap();
        }
        "train" => {
            let final_loss = footer_f64(art, "final_loss", || {
                art.rows.last().and_then(|r| field(art, r, "loss"))
            });
            let mean_snr = footer_f64(art, "mean_snr_db", || {
                mean_finite(art.rows.iter().filter_map(|r| field(art, r, "snr_db")))
            });
            let reduction = footer_f64(art, "reduction_fraction", || None);
            let diverged = art.footer_get("diverged") == Some("1");
            writeln!(
                sum.text,
                "{path}: train policy={} workers={} steps={} seed={} final_loss={} mean_snr_db={} reduction_fraction={} diverged={}",
                cfg("policy"),
                cfg("workers"),
                cfg("steps"),
                cfg("seed"),
                opt(final_loss),
                opt(mean_snr),
                opt(reduction),
                if diverged { "yes" } else { "no" },
            )
            .unwrap();
            if let Some(f) = final_loss {
                sum.train_finals.push((format!("{path} ({})", cfg("policy")), f));
            }
            if diverged {
                sum.diverged.push(path.to_string());
            }
        }
        // check_schema already rejected anything else
        other => unreachable!("unchecked artifact kind {other}"),
    }
}

pub fn run(args: ReportArgs) -> Result<()> {
    let mut sum = Summary {
        text: String::from("# fp8sim report\n"),
        diverged: Vec::new(),
        train_finals: Vec::new(),
    };
    for path in &args.files {
        let art = Artifact::parse(path)?;
        check_schema(&art, path)?;
        summarize(&art, path, &mut sum);
    }
    if sum.train_finals.len() >= 2 {
        let (min_name, min) = sum
            .train_finals
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        let (max_name, max) = sum
            .train_finals
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        writeln!(
            sum.text,
            "train final losses: min={min} ({min_name}), max={max} ({max_name}), rel_spread={}",
            if *min > 0.0 { format!("{}", (max - min) / min) } else { "n/a".to_string() }
        )
        .unwrap();
    }
    if sum.diverged.is_empty() {
        sum.text.push_str("no divergence flagged\n");
    } else {
        writeln!(sum.text, "DIVERGED: {}", sum.diverged.join(", ")).unwrap();
    }
    print!("{}", sum.text);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(sub: &str, columns: &[&str]) -> Artifact {
        Artifact::new(sub, columns)
    }

    #[test]
    fn test_schema_check_matches_writers() {
        for (sub, cols) in [
            ("codec-table", &codec_table::COLUMNS[..]),
            ("allreduce-bench", &bench::COLUMNS[..]),
            ("ablate-optimizer", &ablate::COLUMNS[..]),
            ("zero-plan", &plan::COLUMNS[..]),
            ("train", &train_cmd::COLUMNS[..]),
        ] {
            assert!(check_schema(&art(sub, cols), "x").is_ok(), "{sub}");
        }
    }

    #[test]
    fn test_schema_check_rejects_wrong_columns_and_kinds() {
        let wrong = art("train", &["step", "loss"]);
        assert_eq!(check_schema(&wrong, "x").unwrap_err().exit_code(), 1);
        let unknown = art("mystery", &["a"]);
        assert_eq!(check_schema(&unknown, "x").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn test_train_summary_flags_divergence_and_collects_finals() {
        let mut a = art("train", &train_cmd::COLUMNS[..]);
        a.set("policy", "fp32");
        a.push_row(vec![
            "0".into(),
            "2.5".into(),
            "inf".into(),
            "0".into(),
            "0".into(),
            "1".into(),
            "0".into(),
        ]);
        a.note("final_loss", 2.5);
        a.note("diverged", 1);
        let mut sum = Summary {
            text: String::new(),
            diverged: Vec::new(),
            train_finals: Vec::new(),
        };
        summarize(&a, "a.csv", &mut sum);
        assert_eq!(sum.diverged, ["a.csv"]);
        assert_eq!(sum.train_finals.len(), 1);
        assert!(sum.text.contains("diverged=yes"), "{}", sum.text);
    }
}
