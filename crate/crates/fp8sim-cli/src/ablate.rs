//! `ablate-optimizer`: train the desk-scale model once per optimizer storage
//! spec and log the loss curves side by side.

use crate::artifact::{float_field, Artifact};
use crate::config;
use crate::error::{CliError, Result};
use fp8sim::{ablation_grid, ablation_policy, train, AblationSetting, TrainConfig};

#[derive(clap::Args)]
pub struct AblateArgs {
    /// Comma-separated spec labels, a subset of 0,1,2a,2b,3,4.
    #[arg(long)]
    specs: Option<String>,
    /// Training steps per spec.
    #[arg(long)]
    steps: Option<usize>,
    /// RNG seed shared by every spec; FP8SIM_SEED overrides it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Config file with `key = value` lines for any flag above.
    #[arg(long)]
    config: Option<String>,
}

const KEYS: [&str; 4] = ["specs", "steps", "seed", "out"];
pub const COLUMNS: [&str; 4] = ["step", "spec", "loss", "diverged_flag"];

/// Resolve the comma-separated label list against the ablation grid,
/// preserving order and rejecting duplicates and unknown labels.
fn parse_specs(raw: &str) -> Result<Vec<AblationSetting>> {
    let grid = ablation_grid();
    let mut picked: Vec<AblationSetting> = Vec::new();
    for label in raw.split(',') {
        let label = label.trim();
        if label.is_empty() {
            return Err(CliError::Config(format!("empty spec label in {raw:?}")));
        }
        let setting = grid
            .iter()
            .find(|s| s.spec_label == label)
            .copied()
            .ok_or_else(|| {
                let known: Vec<&str> = grid.iter().map(|s| s.spec_label).collect();
                CliError::Config(format!(
                    "unknown spec label {label:?} (known: {})",
                    known.join(", ")
                ))
            })?;
        if picked.iter().any(|s| s.spec_label == label) {
            return Err(CliError::Config(format!("spec label {label:?} listed twice")));
        }
        picked.push(setting);
    }
    Ok(picked)
}

pub fn run(args: AblateArgs) -> Result<()> {
    let cfg = config::load(args.config.as_deref(), &KEYS)?;
    let cfg = cfg.as_ref();
    let specs_raw: String =
        config::setting(args.specs, cfg, "specs", "0,1,2a,2b,3,4".to_string())?;
    let specs = parse_specs(&specs_raw)?;
    let base = TrainConfig::default();
    let steps = config::positive(config::setting(args.steps, cfg, "steps", base.steps)?, "steps")?;
    let seed = config::seed_setting(args.seed, cfg, base.seed)?;
    let out: Option<String> = config::optional(args.out, cfg, "out")?;

    let mut art = Artifact::new("ablate-optimizer", &COLUMNS);
    let labels: Vec<&str> = specs.iter().map(|s| s.spec_label).collect();
    art.set("specs", labels.join(","));
    art.set("steps", steps);
    art.set("seed", seed);

    for setting in &specs {
        let policy = ablation_policy(*setting);
        let config = TrainConfig { steps, seed, ..TrainConfig::default() };
        let run = train(&config, &policy)
            .map_err(|e| CliError::Data(format!("spec {}: {e}", setting.spec_label)))?;
        let flag = u8::from(run.diverged);
        for rec in &run.records {
            art.push_row(vec![
                rec.step.to_string(),
                setting.spec_label.to_string(),
                float_field(rec.loss),
                flag.to_string(),
            ]);
        }
        art.note(&format!("final_loss_{}", setting.spec_label), float_field(run.final_loss));
        art.note(&format!("diverged_{}", setting.spec_label), flag);
        if let Some(note) = &run.divergence_note {
            art.note(&format!("divergence_note_{}", setting.spec_label), note);
        }
    }
    art.emit(out.as_deref())
}
