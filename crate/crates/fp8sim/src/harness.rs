//! Desk-scale training runs wiring the pieces together: quantized matrix
//! products, per-step gradient reduction across simulated workers, the
//! precision-specced optimizer, and the byte accounting behind the
//! communication-savings report.

use std::f64::consts::PI;

use crate::codec::{Fp8Format, MiniFloat};
use crate::collective::{
    allreduce_autoscale, allreduce_postscale, allreduce_prescale, allreduce_sharedscale,
    bytes_fp32, AllReduceStrategy, AutoScaleController, WorkerSet,
};
use crate::error::{Error, Result};
use crate::model::{exact_gemm, gaussian_clusters_with_noise, GemmPair, TinyModel};
use crate::optimizer::{
    adamw_step, AdamWHyper, GradientInput, OptimizerState, PrecisionSpec, StepCounts,
    StoredTensor, VarPrecision,
};
use crate::tensor::{QuantCounts, ScaledTensor};
use crate::zero::{greedy_distribute, plan_stats, PlanStats, TensorDescriptor, ZeroPlan};

/// Matrix product with each operand routed through its own per-tensor scaled
/// FP8 representation.
///
/// `a` is `m x k`, `b` is `k x n`, both row-major. Each operand picks a
/// just-in-time scale, the product is accumulated in full precision on the
/// scaled payload values, and a single division by the product of the two
/// scales restores magnitude. Non-finite operands skip quantization so the
/// poison reaches the output instead of failing the call.
pub fn fp8_gemm_mixed(
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    fmt_a: Fp8Format,
    fmt_b: Fp8Format,
) -> Vec<f64> {
    let quantized = (
        ScaledTensor::quantize_jit(a, fmt_a, 0),
        ScaledTensor::quantize_jit(b, fmt_b, 0),
    );
    let (qa, qb) = match quantized {
        (Ok((qa, _)), Ok((qb, _))) => (qa, qb),
        _ => return exact_gemm(a, b, m, k, n),
    };
    let pa: Vec<f64> = qa.payload().iter().map(|&c| fmt_a.decode(c)).collect();
    let pb: Vec<f64> = qb.payload().iter().map(|&c| fmt_b.decode(c)).collect();
    let scale = qa.scale() * qb.scale();
    let mut out = exact_gemm(&pa, &pb, m, k, n);
    for v in out.iter_mut() {
        // division, not multiplication by a rounded reciprocal: keeps
        // exactly representable products exact
        *v /= scale;
    }
    out
}

/// [`fp8_gemm_mixed`] with one format for both operands.
pub fn fp8_gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, format: Fp8Format) -> Vec<f64> {
    fp8_gemm_mixed(a, b, m, k, n, format, format)
}

/// Matrix product with both operands rounded to BF16; the accumulation
/// itself stays in full precision.
pub fn bf16_gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let round = |v: &[f64]| -> Vec<f64> {
        v.iter().map(|&x| MiniFloat::BF16.decode(MiniFloat::BF16.encode(x))).collect()
    };
    exact_gemm(&round(a), &round(b), m, k, n)
}

/// Numeric treatment of the model's matrix products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GemmPrecision {
    /// Untouched operands, full-precision accumulate. The reference.
    Fp32,
    /// Operands rounded to BF16 before the product.
    Bf16,
    /// Per-tensor scaled FP8 operands: `forward` for activations and
    /// weights, `backward` for the gradient operand of backward products.
    Fp8 { forward: Fp8Format, backward: Fp8Format },
}

/// Gradient-reduction treatment across data-parallel workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommPrecision {
    /// Exact f64 averaging, charged at the wire cost of 32-bit words.
    Fp32,
    /// Quantized reduction in `format` under `strategy`.
    Fp8 { strategy: AllReduceStrategy, format: Fp8Format },
}

/// Everything numeric about a run apart from data and schedule: how matrix
/// products are computed, how gradients are reduced, how optimizer state is
/// stored, the optional global gradient scale, and whether optimizer state
/// is partitioned across workers.
#[derive(Debug, Clone)]
pub struct MixedPrecisionPolicy {
    pub name: String,
    pub gemm: GemmPrecision,
    pub comm: CommPrecision,
    pub optimizer_spec: PrecisionSpec,
    /// Global gradient scaling for narrow-range fixed-scale formats.
    /// Per-tensor scales already track gradient magnitude, so the canned
    /// policies leave this off; the knob exists for fixed-format
    /// comparisons.
    pub loss_scaling: Option<f64>,
    /// Partition optimizer state across the run's workers and report the
    /// resulting plan.
    pub partition_state: bool,
}

/// Names accepted by [`MixedPrecisionPolicy::by_name`], mildest first.
pub const POLICY_NAMES: [&str; 5] = ["fp32", "bf16", "fp8-l1", "fp8-l2", "fp8-l3"];

impl MixedPrecisionPolicy {
    /// Canned policies, from the full-precision reference to the most
    /// aggressive 8-bit setup.
    ///
    /// - `fp32` — exact everything; the reference and the byte baseline.
    /// - `bf16` — BF16 matrix products, everything else full precision.
    /// - `fp8-l1` — FP8 products and FP8 gradient reduction; optimizer
    ///   state stays FP32 (13 bytes per parameter).
    /// - `fp8-l2` — adds 8-bit/16-bit optimizer storage (6 bytes).
    /// - `fp8-l3` — `fp8-l2` plus optimizer state partitioned across
    ///   workers.
    pub fn by_name(name: &str) -> Option<MixedPrecisionPolicy> {
        let fp8_compute = GemmPrecision::Fp8 {
            forward: Fp8Format::E4M3,
            backward: Fp8Format::E5M2,
        };
        // Reductions ship the precision-favoring format; the per-tensor
        // scales absorb the range instead of the exponent bits.
        let fp8_comm = CommPrecision::Fp8 {
            strategy: AllReduceStrategy::SharedScale,
            format: Fp8Format::E4M3,
        };
        let fp32_state = PrecisionSpec::preset("0").expect("known preset");
        let policy = match name {
            "fp32" => MixedPrecisionPolicy {
                name: name.to_string(),
                gemm: GemmPrecision::Fp32,
                comm: CommPrecision::Fp32,
                optimizer_spec: fp32_state,
                loss_scaling: None,
                partition_state: false,
            },
            "bf16" => MixedPrecisionPolicy {
                name: name.to_string(),
                gemm: GemmPrecision::Bf16,
                comm: CommPrecision::Fp32,
                optimizer_spec: fp32_state,
                loss_scaling: None,
                partition_state: false,
            },
            "fp8-l1" => MixedPrecisionPolicy {
                name: name.to_string(),
                gemm: fp8_compute,
                comm: fp8_comm,
                optimizer_spec: PrecisionSpec {
                    gradient: VarPrecision::Fp8Scaled,
                    ..fp32_state
                },
                loss_scaling: None,
                partition_state: false,
            },
            "fp8-l2" => MixedPrecisionPolicy {
                name: name.to_string(),
                gemm: fp8_compute,
                comm: fp8_comm,
                optimizer_spec: PrecisionSpec::preset("2a").expect("known preset"),
                loss_scaling: None,
                partition_state: false,
            },
            "fp8-l3" => MixedPrecisionPolicy {
                name: name.to_string(),
                gemm: fp8_compute,
                comm: fp8_comm,
                optimizer_spec: PrecisionSpec::preset("2a").expect("known preset"),
                loss_scaling: None,
                partition_state: true,
            },
            _ => return None,
        };
        Some(policy)
    }
}

/// Run shape: data, schedule, and parallelism. `Default` is the desk
/// benchmark: a `[32, 64, 64, 16]` classifier on 65536 samples with 2%
/// label noise, global batch 128, 2000 steps of cosine decay from 3e-3 down
/// to a tenth of it. The dataset deliberately dwarfs the parameter count so
/// the model cannot memorize the flipped labels; the training loss then
/// converges to the noise floor and stays there, which is what makes
/// relative comparisons between converged policies meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub workers: usize,
    pub steps: usize,
    pub seed: u64,
    /// Layer widths, input first.
    pub dims: Vec<usize>,
    pub dataset_samples: usize,
    /// Fraction of labels flipped to a random other class; gives the
    /// converged loss a stable floor so relative comparisons mean something.
    pub label_noise: f64,
    /// Global batch size, split evenly across workers.
    pub batch: usize,
    pub peak_lr: f64,
    /// The schedule ends at `peak_lr * final_lr_fraction`.
    pub final_lr_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            workers: 1,
            steps: 2000,
            seed: 7,
            dims: vec![32, 64, 64, 16],
            dataset_samples: 65536,
            label_noise: 0.02,
            batch: 128,
            peak_lr: 3e-3,
            final_lr_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1"));
        }
        if self.dims.len() < 2 {
            return Err(Error::InvalidConfig("model needs an input and an output width"));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig("zero-width layer"));
        }
        if *self.dims.last().expect("nonempty") < 2 {
            return Err(Error::InvalidConfig("classification needs at least two classes"));
        }
        if self.batch == 0 || self.batch % self.workers != 0 {
            return Err(Error::InvalidConfig("batch must be a positive multiple of workers"));
        }
        if self.dataset_samples == 0 {
            return Err(Error::InvalidConfig("dataset must be nonempty"));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::InvalidConfig("label noise outside [0, 0.5]"));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return Err(Error::InvalidConfig("peak learning rate must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::InvalidConfig("final lr fraction outside [0, 1]"));
        }
        Ok(())
    }
}

/// Cosine decay from `peak` at step 0 to `peak * final_fraction` at step
/// `steps - 1`.
pub fn cosine_lr(step: usize, steps: usize, peak: f64, final_fraction: f64) -> f64 {
    if steps <= 1 {
        return peak;
    }
    let floor = peak * final_fraction;
    let t = step as f64 / (steps - 1) as f64;
    floor + (peak - floor) * 0.5 * (1.0 + (PI * t).cos())
}

/// Per-step observables; one CSV row each.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub step: usize,
    /// Global-batch loss before this step's update.
    pub loss: f64,
    /// Reduction fidelity against the f64 mean, in dB; +inf when exact.
    pub snr_db: f64,
    pub underflow_rate: f64,
    pub overflow_rate: f64,
    /// Mean auto-scaling factor across tensors; 1 under other strategies.
    pub mu: f64,
    /// Gradient bytes shipped this step.
    pub grad_bytes: u64,
}

/// Complete record of one training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub policy: String,
    pub workers: usize,
    pub records: Vec<StepRecord>,
    pub initial_loss: f64,
    /// Mean loss over the last 5% of recorded steps (at least one).
    pub final_loss: f64,
    pub diverged: bool,
    pub divergence_note: Option<String>,
    /// Gradient traffic actually shipped, summed over steps.
    pub grad_bytes: u64,
    /// What the same reductions would cost in 32-bit words.
    pub fp32_grad_bytes: u64,
    /// Quantization events inside the optimizer, summed over the run.
    pub optimizer_counts: StepCounts,
    /// State-partition plan and stats when the policy asked for one.
    pub partition: Option<(ZeroPlan, PlanStats)>,
}

/// Byte-traffic summary of a run.
#[derive(Debug, Clone, Copy)]
pub struct CommReduction {
    /// Bytes the run actually shipped.
    pub fp8_bytes: u64,
    /// The 32-bit baseline for the same reductions.
    pub fp32_bytes: u64,
    /// `1 - actual/baseline`; 0 when nothing was shipped at all.
    pub reduction_fraction: f64,
}

/// Compare a run's gradient traffic against the 32-bit baseline.
pub fn comm_reduction_report(run: &TrainRun) -> CommReduction {
    let reduction_fraction = if run.fp32_grad_bytes == 0 {
        0.0
    } else {
        1.0 - run.grad_bytes as f64 / run.fp32_grad_bytes as f64
    };
    CommReduction {
        fp8_bytes: run.grad_bytes,
        fp32_bytes: run.fp32_grad_bytes,
        reduction_fraction,
    }
}

/// A reduced gradient on its way into the optimizer.
enum Reduced {
    Dense(Vec<f64>),
    Quantized(ScaledTensor),
}

/// Accumulators for one step's reduction quality and traffic.
#[derive(Default)]
struct CommAccum {
    osq: f64,
    esq: f64,
    counts: QuantCounts,
    under_weight: f64,
    over_weight: f64,
    rate_weight: f64,
    bytes: u64,
}

/// One tensor's quantized reduction, with quality tracked against the f64
/// mean of the same shards.
fn reduce_fp8(
    shards: Vec<Vec<f64>>,
    strategy: AllReduceStrategy,
    format: Fp8Format,
    fold_margin: u32,
    ctrl: &mut AutoScaleController,
    acc: &mut CommAccum,
) -> Result<ScaledTensor> {
    let n = shards.len();
    let len = shards[0].len();
    let mut oracle = vec![0.0; len];
    for shard in &shards {
        for (o, &g) in oracle.iter_mut().zip(shard) {
            *o += g;
        }
    }
    for o in &mut oracle {
        *o /= n as f64;
    }

    let result = match strategy {
        AllReduceStrategy::SharedScale => {
            let mut quantized = Vec::with_capacity(n);
            for shard in &shards {
                let (tensor, counts) = ScaledTensor::quantize_jit(shard, format, fold_margin)?;
                acc.counts.merge(counts);
                quantized.push(tensor);
            }
            let (result, log) = allreduce_sharedscale(&quantized)?;
            acc.counts.merge(log.counts);
            acc.bytes += log.bytes_transferred;
            result
        }
        unit_scale => {
            let ws = WorkerSet::new(shards)?;
            let (result, stats) = match unit_scale {
                AllReduceStrategy::PreScale => allreduce_prescale(&ws, format)?,
                AllReduceStrategy::PostScale => allreduce_postscale(&ws, format)?,
                AllReduceStrategy::AutoScale => allreduce_autoscale(&ws, format, ctrl)?,
                AllReduceStrategy::SharedScale => unreachable!("handled above"),
            };
            // every tensor sees the same events-per-element multiplier, so
            // element-weighted rate averaging is exact
            acc.under_weight += stats.underflow_rate * len as f64;
            acc.over_weight += stats.overflow_rate * len as f64;
            acc.rate_weight += len as f64;
            acc.bytes += stats.bytes_transferred;
            result
        }
    };

    for (got, &want) in result.dequantize().iter().zip(&oracle) {
        acc.osq += want * want;
        let e = got - want;
        acc.esq += e * e;
    }
    Ok(result)
}

type BoxedGemm = Box<dyn Fn(&[f64], &[f64], usize, usize, usize) -> Vec<f64>>;

fn gemm_closures(precision: GemmPrecision) -> (BoxedGemm, BoxedGemm) {
    match precision {
        GemmPrecision::Fp32 => (Box::new(exact_gemm), Box::new(exact_gemm)),
        GemmPrecision::Bf16 => (Box::new(bf16_gemm), Box::new(bf16_gemm)),
        GemmPrecision::Fp8 { forward, backward } => (
            Box::new(move |a, b, m, k, n| fp8_gemm(a, b, m, k, n, forward)),
            // the gradient rides on the left; weights and activations keep
            // the forward format on the right
            Box::new(move |a, b, m, k, n| fp8_gemm_mixed(a, b, m, k, n, backward, forward)),
        ),
    }
}

/// Persistent optimizer-state bytes for one parameter tensor: master and
/// both moments at their storage widths, plus the 8-byte scale riding with
/// each scaled variable.
fn persisted_state_bytes(len: usize, spec: &PrecisionSpec) -> u64 {
    let mut bytes = 0u64;
    for var in [spec.master_weight, spec.moment1, spec.moment2] {
        bytes += (len * var.width_bytes()) as u64;
        if matches!(var, VarPrecision::Fp16Scaled | VarPrecision::Fp8Scaled) {
            bytes += 8;
        }
    }
    bytes
}

/// Run the classifier for `config.steps` optimizer steps under `policy`.
///
/// Every worker computes gradients on its shard of the same global batch;
/// the shards are reduced to a mean per the policy's communication
/// precision and fed to one optimizer step per parameter tensor. Divergence
/// is reported in the returned record, never raised.
pub fn train(config: &TrainConfig, policy: &MixedPrecisionPolicy) -> Result<TrainRun> {
    config.validate()?;
    let spec = policy.optimizer_spec;
    spec.validate()?;
    if let Some(s) = policy.loss_scaling {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidConfig("loss scaling must be positive and finite"));
        }
    }

    let classes = *config.dims.last().expect("validated");
    let data = gaussian_clusters_with_noise(
        config.dims[0],
        classes,
        config.dataset_samples,
        config.label_noise,
        config.seed.wrapping_add(1),
    );
    let mut model = TinyModel::new(&config.dims, config.seed);

    let lr0 = cosine_lr(0, config.steps, config.peak_lr, config.final_lr_fraction);
    let mut states: Vec<OptimizerState> = model
        .params
        .iter()
        .map(|p| OptimizerState::new(p, AdamWHyper::with_lr(lr0), &spec))
        .collect();
    // the network computes on exactly what the optimizer stores
    for (p, s) in model.params.iter_mut().zip(&states) {
        *p = s.weights();
    }

    let (fwd, bwd) = gemm_closures(policy.gemm);
    let gemm = GemmPair { forward: &*fwd, backward: &*bwd };

    let n_tensors = states.len();
    let workers = config.workers;
    let shard = config.batch / workers;
    // headroom so the shared-scale fold cannot saturate: summing N payloads
    // grows magnitude by at most N
    let fold_margin = workers.next_power_of_two().trailing_zeros();

    let mut controllers = vec![AutoScaleController::default(); n_tensors];
    let mut records: Vec<StepRecord> = Vec::with_capacity(config.steps);
    let mut optimizer_counts = StepCounts::default();
    let mut grad_bytes_total = 0u64;
    let mut fp32_bytes_total = 0u64;
    let mut note: Option<String> = None;

    'training: for step in 0..config.steps {
        let lr = cosine_lr(step, config.steps, config.peak_lr, config.final_lr_fraction);

        // the same global batch regardless of worker count; workers take
        // contiguous shards of it
        let start = (step * config.batch) % data.len();
        let mut loss_sum = 0.0;
        let mut worker_grads: Vec<Vec<Vec<f64>>> = Vec::with_capacity(workers);
        for w in 0..workers {
            let (x, y) = data.batch(start + w * shard, shard);
            let (loss, cache) = model.forward_loss(&x, &y, gemm);
            loss_sum += loss;
            let grads = match policy.loss_scaling {
                None => model.backward(&cache, gemm),
                Some(s) => {
                    let mut grads = model.backward_with_scale(&cache, gemm, s);
                    for tensor in &mut grads {
                        for v in tensor.iter_mut() {
                            *v /= s;
                        }
                    }
                    grads
                }
            };
            worker_grads.push(grads);
        }
        let loss = loss_sum / workers as f64;

        let mut reduced: Vec<Reduced> = Vec::with_capacity(n_tensors);
        let mut acc = CommAccum::default();
        for t in 0..n_tensors {
            if workers == 1 {
                reduced.push(Reduced::Dense(std::mem::take(&mut worker_grads[0][t])));
                continue;
            }
            let len = worker_grads[0][t].len();
            fp32_bytes_total += bytes_fp32(workers, len);
            match policy.comm {
                CommPrecision::Fp32 => {
                    let mut mean = vec![0.0; len];
                    for wg in &worker_grads {
                        for (m, &g) in mean.iter_mut().zip(&wg[t]) {
                            *m += g;
                        }
                    }
                    for m in &mut mean {
                        *m /= workers as f64;
                    }
                    acc.bytes += bytes_fp32(workers, len);
                    reduced.push(Reduced::Dense(mean));
                }
                CommPrecision::Fp8 { strategy, format } => {
                    let shards: Vec<Vec<f64>> =
                        worker_grads.iter().map(|wg| wg[t].clone()).collect();
                    match reduce_fp8(shards, strategy, format, fold_margin, &mut controllers[t], &mut acc)
                    {
                        Ok(tensor) => reduced.push(Reduced::Quantized(tensor)),
                        Err(e) => {
                            note = Some(format!("gradient reduction failed at step {step}: {e}"));
                            records.push(StepRecord {
                                step,
                                loss,
                                snr_db: f64::NAN,
                                underflow_rate: 0.0,
                                overflow_rate: 0.0,
                                mu: 1.0,
                                grad_bytes: 0,
                            });
                            break 'training;
                        }
                    }
                }
            }
        }

        let (underflow_rate, overflow_rate) = if acc.rate_weight > 0.0 {
            (acc.under_weight / acc.rate_weight, acc.over_weight / acc.rate_weight)
        } else {
            (acc.counts.underflow_rate(), acc.counts.overflow_rate())
        };
        let snr_db =
            if acc.esq == 0.0 { f64::INFINITY } else { 10.0 * (acc.osq / acc.esq).log10() };
        let mu = controllers.iter().map(|c| c.mu).sum::<f64>() / n_tensors as f64;
        grad_bytes_total += acc.bytes;
        records.push(StepRecord {
            step,
            loss,
            snr_db,
            underflow_rate,
            overflow_rate,
            mu,
            grad_bytes: acc.bytes,
        });

        if !loss.is_finite() {
            note = Some(format!("non-finite loss at step {step}"));
            break 'training;
        }

        for (t, grad) in reduced.iter().enumerate() {
            states[t].hyper.lr = lr;
            let input = match grad {
                Reduced::Dense(v) => GradientInput::Dense(v),
                Reduced::Quantized(tensor) => GradientInput::Quantized(tensor),
            };
            match adamw_step(&states[t], input, &spec) {
                Ok((next, counts)) => {
                    optimizer_counts.merge(counts);
                    states[t] = next;
                    model.params[t] = states[t].weights();
                }
                Err(e) => {
                    note = Some(format!("optimizer rejected step {step}: {e}"));
                    break 'training;
                }
            }
        }
    }

    let initial_loss = records.first().map_or(f64::NAN, |r| r.loss);
    let final_loss = if records.is_empty() {
        f64::NAN
    } else {
        let window = (config.steps / 20).max(1).min(records.len());
        let tail = &records[records.len() - window..];
        tail.iter().map(|r| r.loss).sum::<f64>() / tail.len() as f64
    };
    if note.is_none() && !(initial_loss.is_finite() && final_loss.is_finite()) {
        note = Some("run produced non-finite losses".to_string());
    }
    if note.is_none() && final_loss > 10.0 * initial_loss {
        note = Some(format!(
            "final loss {final_loss:.3e} exceeds 10x the initial {initial_loss:.3e}"
        ));
    }
    let diverged = note.is_some();

    let partition = if policy.partition_state && workers > 1 {
        let descriptors: Vec<TensorDescriptor> = states
            .iter()
            .enumerate()
            .map(|(id, s)| {
                let scale = match &s.master {
                    StoredTensor::F32(_) => 1.0,
                    StoredTensor::Coded { scale, .. } => *scale,
                };
                TensorDescriptor::new(id, persisted_state_bytes(s.master.len(), &spec), scale)
            })
            .collect();
        let plan = greedy_distribute(&descriptors, workers)?;
        let stats = plan_stats(&plan);
        Some((plan, stats))
    } else {
        None
    };

    Ok(TrainRun {
        policy: policy.name.clone(),
        workers,
        records,
        initial_loss,
        final_loss,
        diverged,
        divergence_note: note,
        grad_bytes: grad_bytes_total,
        fp32_grad_bytes: fp32_bytes_total,
        optimizer_counts,
        partition,
    })
}

/// One row of the optimizer-storage ablation: a named storage spec plus the
/// compute precision that historically rode with it.
#[derive(Debug, Clone, Copy)]
pub struct AblationSetting {
    pub spec_label: &'static str,
    pub gemm: GemmPrecision,
}

/// The six storage specs in ablation order: two full-storage baselines
/// (full-precision and 16-bit compute), then the progressively narrower
/// 8-bit variants.
pub fn ablation_grid() -> Vec<AblationSetting> {
    let fp8 = GemmPrecision::Fp8 { forward: Fp8Format::E4M3, backward: Fp8Format::E5M2 };
    vec![
        AblationSetting { spec_label: "0", gemm: GemmPrecision::Fp32 },
        AblationSetting { spec_label: "1", gemm: GemmPrecision::Bf16 },
        AblationSetting { spec_label: "2a", gemm: fp8 },
        AblationSetting { spec_label: "2b", gemm: fp8 },
        AblationSetting { spec_label: "3", gemm: fp8 },
        AblationSetting { spec_label: "4", gemm: fp8 },
    ]
}

/// Materialize one ablation row as a runnable policy. Gradient averaging
/// stays exact so row differences trace back to storage and compute alone.
pub fn ablation_policy(setting: AblationSetting) -> MixedPrecisionPolicy {
    MixedPrecisionPolicy {
        name: format!("spec-{}", setting.spec_label),
        gemm: setting.gemm,
        comm: CommPrecision::Fp32,
        optimizer_spec: PrecisionSpec::preset(setting.spec_label).expect("grid uses known labels"),
        loss_scaling: None,
        partition_state: false,
    }
}
