//! Software emulation of FP8 mixed-precision training at desk scale.
//!
//! Everything runs in f64 with explicit quantization at the boundaries a real
//! low-precision system would have: 8-bit tensor payloads with per-tensor
//! scales, gradient all-reduce over those payloads, an AdamW whose state
//! storage precisions are decoupled knob by knob, greedy partitioning of the
//! resulting state tensors across devices, and a small trainable model to
//! drive it all end to end against full-precision oracles.

pub mod codec;
pub mod collective;
pub mod error;
pub mod harness;
pub mod model;
pub mod optimizer;
pub mod tensor;
pub mod zero;

pub use codec::{max_relative_error, ErrorRegime, FloatClass, Fp8Code, Fp8Format, MiniFloat, RelErrorInterval};
pub use collective::{
    allreduce_autoscale, allreduce_postscale, allreduce_prescale, allreduce_sharedscale,
    bytes_fp32, comm_stats, AllReduceStrategy, AutoScaleController, CommLog, CommStats, MuRule,
    WorkerSet,
};
pub use error::{Error, Result};
pub use harness::{
    ablation_grid, ablation_policy, bf16_gemm, comm_reduction_report, cosine_lr, fp8_gemm,
    fp8_gemm_mixed, train, AblationSetting, CommPrecision, CommReduction, GemmPrecision,
    MixedPrecisionPolicy, StepRecord, TrainConfig, TrainRun, POLICY_NAMES,
};
pub use model::{
    exact_gemm, gaussian_clusters, gaussian_clusters_with_noise, Dataset, GemmFn, GemmPair,
    TinyModel,
};
pub use optimizer::{
    adamw_step, AdamWHyper, GradientInput, OptimizerState, PrecisionSpec, StepCounts,
    StoredTensor, VarPrecision, PRESET_LABELS,
};
pub use tensor::{AmaxHistory, QuantCounts, ScaledTensor};
pub use zero::{greedy_distribute, plan_stats, PlanStats, TensorDescriptor, ZeroPlan};
