//! `zero-plan`: distribute tensors over devices, largest first onto the
//! least-loaded device, and report the per-device placement and balance.

use crate::artifact::{float_field, Artifact};
use crate::config;
use crate::error::{CliError, Result};
use fp8sim::{greedy_distribute, plan_stats, TensorDescriptor};
use std::fs;

#[derive(clap::Args)]
pub struct PlanArgs {
    /// File with one tensor size in bytes per line; `#` lines are comments.
    #[arg(long = "sizes-file")]
    sizes_file: Option<String>,
    /// Number of devices to spread the tensors across.
    #[arg(long)]
    devices: Option<usize>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Config file with `key = value` lines for any flag above.
    #[arg(long)]
    config: Option<String>,
}

const KEYS: [&str; 3] = ["sizes-file", "devices", "out"];
pub const COLUMNS: [&str; 3] = ["device", "tensor_id", "size"];

/// Parse the newline-delimited sizes file. Tensor ids are the zero-based
/// positions among the size lines, matching the order they were listed in.
fn read_sizes(path: &str) -> Result<Vec<TensorDescriptor>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read sizes file {path}: {e}")))?;
    let mut tensors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let size: u64 = line.parse().map_err(|e| {
            CliError::Data(format!("{path}:{}: expected a size in bytes: {e}", idx + 1))
        })?;
        if size == 0 {
            return Err(CliError::Data(format!(
                "{path}:{}: tensor size must be positive",
                idx + 1
            )));
        }
        tensors.push(TensorDescriptor::new(tensors.len(), size, 1.0));
    }
    if tensors.is_empty() {
        return Err(CliError::Data(format!("{path}: no tensor sizes found")));
    }
    Ok(tensors)
}

pub fn run(args: PlanArgs) -> Result<()> {
    let cfg = config::load(args.config.as_deref(), &KEYS)?;
    let cfg = cfg.as_ref();
    let sizes_file: String = config::required(args.sizes_file, cfg, "sizes-file")?;
    let devices =
        config::positive(config::required(args.devices, cfg, "devices")?, "devices")?;
    let out: Option<String> = config::optional(args.out, cfg, "out")?;

    let tensors = read_sizes(&sizes_file)?;
    let plan = greedy_distribute(&tensors, devices)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let stats = plan_stats(&plan);

    let mut art = Artifact::new("zero-plan", &COLUMNS);
    art.set("sizes-file", &sizes_file);
    art.set("devices", devices);
    for (device, partition) in plan.partitions.iter().enumerate() {
        for tensor in partition {
            art.push_row(vec![
                device.to_string(),
                tensor.id.to_string(),
                tensor.size_bytes.to_string(),
            ]);
        }
    }
    for (device, load) in plan.loads.iter().enumerate() {
        art.note(&format!("load_{device}"), load);
    }
    art.note("min_load", stats.min_load);
    art.note("max_load", stats.max_load);
    art.note("imbalance_ratio", float_field(stats.imbalance_ratio));
    art.emit(out.as_deref())
}
