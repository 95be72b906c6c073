//! `codec-table`: dump all 256 codes of an FP8 format.

use crate::artifact::{float_field, Artifact};
use crate::config;
use crate::error::Result;

#[derive(clap::Args)]
pub struct CodecTableArgs {
    /// FP8 format: e4m3 or e5m2.
    #[arg(long)]
    format: Option<String>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<String>,
    /// Config file with `key = value` lines for any flag above.
    #[arg(long)]
    config: Option<String>,
}

const KEYS: [&str; 2] = ["format", "out"];
pub const COLUMNS: [&str; 3] = ["bits_hex", "value", "class"];

pub fn run(args: CodecTableArgs) -> Result<()> {
    let cfg = config::load(args.config.as_deref(), &KEYS)?;
    let cfg = cfg.as_ref();
    let format = config::parse_format(&config::required(args.format, cfg, "format")?)?;
    let out: Option<String> = config::optional(args.out, cfg, "out")?;

    let mut art = Artifact::new("codec-table", &COLUMNS);
    art.set("format", format.name().to_ascii_lowercase());
    for code in 0..=255u8 {
        art.push_row(vec![
            format!("0x{code:02x}"),
            float_field(format.decode(code)),
            format.classify(code).label().to_string(),
        ]);
    }
    art.note("max_normal", float_field(format.max_normal()));
    art.note("min_normal", float_field(format.min_normal()));
    art.note("min_subnormal", float_field(format.min_subnormal()));
    art.emit(out.as_deref())
}
