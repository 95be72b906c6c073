//! Setting resolution: command-line flag beats config file beats default,
//! and `FP8SIM_SEED` beats everything for the seed.

use crate::error::{CliError, Result};
use fp8sim::Fp8Format;
use std::env;
use std::fmt::Display;
use std::fs;
use std::str::FromStr;

/// `key = value` settings loaded from a config file.
///
/// Lines are trimmed and blank lines skipped. A leading `#` is stripped
/// before parsing; commented lines without `=` (prose notes) are ignored,
/// while a bare line without `=` is an error. The last occurrence of a key
/// wins. A written artifact also loads as a config file: its `# fp8sim ...`
/// first line switches the parser to read only the leading header block, so
/// `--config <artifact>` replays the settings of the run that wrote it
/// without tripping over data rows or result footers.
#[derive(Debug)]
pub struct ConfigFile {
    path: String,
    pairs: Vec<(String, String)>,
}

fn is_artifact(text: &str) -> bool {
    text.lines()
        .find(|l| !l.trim().is_empty())
        .map(|l| {
            let t = l.trim();
            t.starts_with('#') && t.trim_start_matches('#').trim().starts_with("fp8sim ")
        })
        .unwrap_or(false)
}

impl ConfigFile {
    pub fn load(path: &str) -> Result<ConfigFile> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config file {path}: {e}")))?;
        let header_only = is_artifact(&text);
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            let commented = trimmed.starts_with('#');
            if header_only && !commented && !trimmed.is_empty() {
                break;
            }
            let line = trimmed.trim_start_matches('#').trim();
            if line.is_empty() {
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    pairs.push((key.trim().to_string(), value.trim().to_string()));
                }
                None if commented => {}
                None => {
                    return Err(CliError::Config(format!(
                        "{path}:{}: expected `key = value`, got {raw:?}",
                        idx + 1
                    )));
                }
            }
        }
        Ok(ConfigFile { path: path.to_string(), pairs })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Reject keys this subcommand does not understand.
    pub fn check_keys(&self, known: &[&str]) -> Result<()> {
        for (key, _) in &self.pairs {
            if !known.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "{}: unknown config key {key:?} (known keys: {})",
                    self.path,
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }
}

/// Load the `--config` file, if given, and validate its keys.
pub fn load(config: Option<&str>, known: &[&str]) -> Result<Option<ConfigFile>> {
    match config {
        Some(path) => {
            let file = ConfigFile::load(path)?;
            file.check_keys(known)?;
            Ok(Some(file))
        }
        None => Ok(None),
    }
}

fn parse_value<T>(raw: &str, key: &str) -> Result<T>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    raw.parse().map_err(|e| {
        CliError::Config(format!("setting {key}: cannot parse {raw:?}: {e}"))
    })
}

/// Resolve one setting: flag, then config file, then the default.
pub fn setting<T>(flag: Option<T>, cfg: Option<&ConfigFile>, key: &str, default: T) -> Result<T>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => match cfg.and_then(|c| c.get(key)) {
            Some(raw) => parse_value(raw, key),
            None => Ok(default),
        },
    }
}

/// Resolve a setting that has no default.
pub fn required<T>(flag: Option<T>, cfg: Option<&ConfigFile>, key: &str) -> Result<T>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => match cfg.and_then(|c| c.get(key)) {
            Some(raw) => parse_value(raw, key),
            None => Err(CliError::Config(format!(
                "missing setting {key:?}: pass --{key} or put `{key} = ...` in the config file"
            ))),
        },
    }
}

/// Resolve a setting whose absence is fine.
pub fn optional<T>(flag: Option<T>, cfg: Option<&ConfigFile>, key: &str) -> Result<Option<T>>
where
    T: FromStr,
    <T as FromStr>::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => match cfg.and_then(|c| c.get(key)) {
            Some(raw) => parse_value(raw, key).map(Some),
            None => Ok(None),
        },
    }
}

/// Resolve the RNG seed. The `FP8SIM_SEED` environment variable overrides
/// the flag, the config file, and the default.
pub fn seed_setting(flag: Option<u64>, cfg: Option<&ConfigFile>, default: u64) -> Result<u64> {
    match env::var("FP8SIM_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|e| {
            CliError::Config(format!("FP8SIM_SEED: cannot parse {raw:?}: {e}"))
        }),
        Err(env::VarError::NotPresent) => setting(flag, cfg, "seed", default),
        Err(e) => Err(CliError::Config(format!("FP8SIM_SEED: {e}"))),
    }
}

/// Parse an FP8 format name as it appears in flags and config files.
pub fn parse_format(name: &str) -> Result<Fp8Format> {
    match name.to_ascii_lowercase().as_str() {
        "e4m3" => Ok(Fp8Format::E4M3),
        "e5m2" => Ok(Fp8Format::E5M2),
        other => Err(CliError::Config(format!(
            "unknown format {other:?} (expected e4m3 or e5m2)"
        ))),
    }
}

/// Require a positive count.
pub fn positive(value: usize, key: &str) -> Result<usize> {
    if value == 0 {
        return Err(CliError::Config(format!("setting {key} must be at least 1")));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn load_str(contents: &str) -> ConfigFile {
        let f = write_temp(contents);
        ConfigFile::load(f.path().to_str().unwrap()).unwrap()
    }

    #[test]
    fn test_flag_beats_config_beats_default() {
        let cfg = load_str("steps = 50\n");
        assert_eq!(setting(Some(9usize), Some(&cfg), "steps", 1).unwrap(), 9);
        assert_eq!(setting(None::<usize>, Some(&cfg), "steps", 1).unwrap(), 50);
        assert_eq!(setting(None::<usize>, Some(&cfg), "workers", 1).unwrap(), 1);
        assert_eq!(setting(None::<usize>, None, "steps", 4).unwrap(), 4);
    }

    #[test]
    fn test_artifact_header_block_loads_as_config() {
        let cfg = load_str("# fp8sim train\n# policy = fp32\n# steps = 12\n\n# just a note\n");
        assert_eq!(cfg.get("policy"), Some("fp32"));
        assert_eq!(cfg.get("steps"), Some("12"));
        assert_eq!(cfg.get("fp8sim"), None);
    }

    #[test]
    fn test_whole_artifact_stops_at_data_and_skips_footer() {
        let cfg = load_str(
            "# fp8sim train\n# policy = fp32\nstep,loss\n0,2.5\n# final_loss = 2.5\n",
        );
        assert_eq!(cfg.get("policy"), Some("fp32"));
        assert_eq!(cfg.get("final_loss"), None);
        assert!(cfg.check_keys(&["policy"]).is_ok());
    }

    #[test]
    fn test_last_occurrence_of_a_key_wins() {
        let cfg = load_str("seed = 1\nseed = 2\n");
        assert_eq!(cfg.get("seed"), Some("2"));
    }

    #[test]
    fn test_bare_line_without_equals_rejected() {
        let f = write_temp("steps 50\n");
        let err = ConfigFile::load(f.path().to_str().unwrap()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("key = value"), "{err}");
    }

    #[test]
    fn test_unknown_key_rejected() {
        let cfg = load_str("steps = 5\nbogus = 1\n");
        let err = cfg.check_keys(&["steps"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn test_missing_config_file_is_a_data_error() {
        let err = ConfigFile::load("/nonexistent/path.conf").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn test_unparseable_value_reports_key() {
        let cfg = load_str("steps = many\n");
        let err = setting(None::<usize>, Some(&cfg), "steps", 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("steps"), "{err}");
    }

    #[test]
    fn test_required_setting_missing_reports_key() {
        let err = required::<String>(None, None, "format").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("format"), "{err}");
    }

    #[test]
    fn test_format_names_parse() {
        assert_eq!(parse_format("e4m3").unwrap(), Fp8Format::E4M3);
        assert_eq!(parse_format("E5M2").unwrap(), Fp8Format::E5M2);
        assert!(parse_format("fp8").is_err());
    }
}
