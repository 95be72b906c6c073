//! `train`: run the desk-scale model under one mixed-precision policy and
//! log per-step loss, reduction quality, and gradient traffic.

use crate::artifact::{float_field, Artifact};
use crate::config;
use crate::error::{CliError, Result};
use fp8sim::{comm_reduction_report, train, MixedPrecisionPolicy, TrainConfig, POLICY_NAMES};

#[derive(clap::Args)]
pub struct TrainArgs {
    /// Mixed-precision policy: fp32, bf16, fp8-l1, fp8-l2, or fp8-l3.
    #[arg(long)]
    policy: Option<String>,
    /// Number of data-parallel workers.
    #[arg(long)]
    workers: Option<usize>,
    /// Number of optimizer steps.
    #[arg(long)]
    steps: Option<usize>,
    /// RNG seed for model init and data; FP8SIM_SEED overrides it.
    #[arg(long)]
    seed: Option<u64>,
    /// Global batch size; must divide evenly across the workers.
    #[arg(long)]
    batch: Option<usize>,
    /// Number of training samples in the synthetic dataset.
    #[arg(long)]
    samples: Option<usize>,
    /// Fraction of labels flipped to a wrong class, in [0, 0.5].
    #[arg(long = "label-noise")]
    label_noise: Option<f64>,
    /// Peak learning rate of the cosine schedule.
    #[arg(long = "peak-lr")]
    peak_lr: Option<f64>,
    /// Floor of the cosine schedule as a fraction of the peak, in [0, 1].
    #[arg(long = "final-lr-fraction")]
    final_lr_fraction: Option<f64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Config file with `key = value` lines for any flag above.
    #[arg(long)]
    config: Option<String>,
}

const KEYS: [&str; 10] = [
    "policy",
    "workers",
    "steps",
    "seed",
    "batch",
    "samples",
    "label-noise",
    "peak-lr",
    "final-lr-fraction",
    "out",
];
pub const COLUMNS: [&str; 7] =
    ["step", "loss", "snr_db", "underflow", "overflow", "mu", "grad_bytes"];

pub fn run(args: TrainArgs) -> Result<()> {
    let cfg = config::load(args.config.as_deref(), &KEYS)?;
    let cfg = cfg.as_ref();
    let policy_name: String = config::required(args.policy, cfg, "policy")?;
    let policy = MixedPrecisionPolicy::by_name(&policy_name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown policy {policy_name:?} (known: {})",
            POLICY_NAMES.join(", ")
        ))
    })?;
    let base = TrainConfig::default();
    let train_config = TrainConfig {
        workers: config::setting(args.workers, cfg, "workers", base.workers)?,
        steps: config::setting(args.steps, cfg, "steps", base.steps)?,
        seed: config::seed_setting(args.seed, cfg, base.seed)?,
        batch: config::setting(args.batch, cfg, "batch", base.batch)?,
        dataset_samples: config::setting(args.samples, cfg, "samples", base.dataset_samples)?,
        label_noise: config::setting(args.label_noise, cfg, "label-noise", base.label_noise)?,
        peak_lr: config::setting(args.peak_lr, cfg, "peak-lr", base.peak_lr)?,
        final_lr_fraction: config::setting(
            args.final_lr_fraction,
            cfg,
            "final-lr-fraction",
            base.final_lr_fraction,
        )?,
        ..base
    };
    train_config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let out: Option<String> = config::optional(args.out, cfg, "out")?;

    let mut art = Artifact::new("train", &COLUMNS);
    art.set("policy", &policy.name);
    art.set("workers", train_config.workers);
    art.set("steps", train_config.steps);
    art.set("seed", train_config.seed);
    art.set("batch", train_config.batch);
    art.set("samples", train_config.dataset_samples);
    art.set("label-noise", float_field(train_config.label_noise));
    art.set("peak-lr", float_field(train_config.peak_lr));
    art.set("final-lr-fraction", float_field(train_config.final_lr_fraction));

    let run = train(&train_config, &policy).map_err(|e| CliError::Data(e.to_string()))?;
    for rec in &run.records {
        art.push_row(vec![
            rec.step.to_string(),
            float_field(rec.loss),
            float_field(rec.snr_db),
            float_field(rec.underflow_rate),
            float_field(rec.overflow_rate),
            float_field(rec.mu),
            rec.grad_bytes.to_string(),
        ]);
    }

    let finite: Vec<f64> =
        run.records.iter().map(|r| r.snr_db).filter(|s| s.is_finite()).collect();
    let mean_snr = if finite.is_empty() {
        f64::INFINITY
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    let reduction = comm_reduction_report(&run);
    art.note("initial_loss", float_field(run.initial_loss));
    art.note("final_loss", float_field(run.final_loss));
    art.note("diverged", u8::from(run.diverged));
    if let Some(note) = &run.divergence_note {
        art.note("divergence_note", note);
    }
    art.note("mean_snr_db", float_field(mean_snr));
    art.note("grad_bytes_total", reduction.fp8_bytes);
    art.note("fp32_grad_bytes_total", reduction.fp32_bytes);
    art.note("reduction_fraction", float_field(reduction.reduction_fraction));
    if let Some((plan, stats)) = &run.partition {
        let loads: Vec<String> = plan.loads.iter().map(|l| l.to_string()).collect();
        art.note("partition_loads", loads.join(" "));
        art.note("partition_max_load", stats.max_load);
        art.note("partition_min_load", stats.min_load);
        art.note("partition_imbalance_ratio", float_field(stats.imbalance_ratio));
    }
    art.emit(out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_every_policy_name_resolves() {
        for name in POLICY_NAMES {
            assert!(MixedPrecisionPolicy::by_name(name).is_some(), "{name}");
        }
        assert!(MixedPrecisionPolicy::by_name("fp64").is_none());
    }
}
