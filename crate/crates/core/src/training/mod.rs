//! Loss assembly and the pre-training pipeline.
//!
//! A run trains on `(0, T₁]`, then on `(0, T₂]` starting from the previous
//! parameters and supervised by labels the previous network assigns on
//! `(0, T₁]`, and so on; the formal stage covers `(0, T]`. A standard PINN
//! run is a single formal stage from a random initialization.

mod loss;

pub use loss::{
    augmented_loss, evaluate_loss, pinn_loss, reference_loss_grad, LossContext, LossWeights, PinnObjective,
};

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::network::{write_checkpoint, CheckpointError, NetworkError, NetworkParams, NetworkSpec};
use crate::optimizers::{combined_train, CombinedSettings, LbfgsStatus, LossComponents, OptimError, TrainingLog};
use crate::problems::PdeProblem;
use crate::sampling::{
    build_supervised_set, resample_residuals, sample_rng, sample_training_data, DataSizes, ResamplePolicy,
    SamplingError, SupervisedSet,
};
use crate::{derive_seed, Real};

#[derive(Debug, thiserror::Error)]
pub enum TrainingError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Settings of one training stage on `(0, t_end]`. `sizes.n_sp` is the
/// number of labels drawn from the previous stage's network; it is ignored
/// for the first stage and for standard runs.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSettings {
    pub t_end: Real,
    pub sizes: DataSizes,
    pub optimizer: CombinedSettings,
    pub resample: ResamplePolicy,
    pub weights: LossWeights,
}

impl StageSettings {
    pub fn validate(&self) -> Result<(), TrainingError> {
        self.resample.validate(self.optimizer.adam_steps)?;
        self.weights.validate().map_err(TrainingError::Schedule)
    }
}

/// Pre-training ladder `T₁ < … < T_k` followed by the formal stage on
/// `(0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PtSchedule {
    pub network: NetworkSpec,
    pub pretrain: Vec<StageSettings>,
    pub formal: StageSettings,
}

impl PtSchedule {
    pub fn validate(&self, problem: &PdeProblem) -> Result<(), TrainingError> {
        self.network.validate()?;
        if self.network.input_dim() != problem.spatial_dim() + 1 {
            return Err(TrainingError::Schedule(format!(
                "network input dimension {} does not match the problem's {}",
                self.network.input_dim(),
                problem.spatial_dim() + 1
            )));
        }
        if self.pretrain.is_empty() {
            return Err(TrainingError::Schedule(
                "at least one pre-training interval is required".into(),
            ));
        }
        let horizon = problem.horizon();
        let mut prev = 0.0;
        for (i, s) in self.pretrain.iter().enumerate() {
            if !(s.t_end > prev && s.t_end <= horizon) {
                return Err(TrainingError::Schedule(format!(
                    "pre-training end time {} (stage {}) must exceed {prev} and not exceed {horizon}",
                    s.t_end,
                    i + 1
                )));
            }
            prev = s.t_end;
            s.validate()?;
        }
        if self.formal.t_end != horizon {
            return Err(TrainingError::Schedule(format!(
                "formal stage must end at the horizon {horizon}, not {}",
                self.formal.t_end
            )));
        }
        self.formal.validate()
    }

    pub fn endpoints(&self) -> Vec<Real> {
        self.pretrain
            .iter()
            .map(|s| s.t_end)
            .chain([self.formal.t_end])
            .collect()
    }
}

/// How the formal stage is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormalInit {
    /// From the last pre-trained parameters.
    Pretrained,
    /// Fresh Xavier draw (ablation).
    Random,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: NetworkParams,
    /// 1-based stage number; the formal stage is `k + 1`.
    pub stage: usize,
    pub t_end: Real,
    pub log: TrainingLog,
    pub loss: Real,
    pub components: LossComponents,
    pub lbfgs_status: Option<LbfgsStatus>,
}

// Seed streams. The formal stage and a standard run share theirs, so with
// identical settings both see identical data.
const STREAM_INIT: u64 = 1;
const STREAM_RANDOM_FORMAL_INIT: u64 = 2;
const STREAM_FORMAL: u64 = 1000;

fn stage_stream(stage: usize) -> u64 {
    10 * stage as u64
}

#[allow(clippy::too_many_arguments)]
fn train_stage(
    problem: &PdeProblem,
    spec: &NetworkSpec,
    init: NetworkParams,
    settings: &StageSettings,
    supervised: SupervisedSet,
    stage: usize,
    seed: u64,
    stream: u64,
) -> Result<TrainedModel, TrainingError> {
    let sizes = DataSizes {
        n_sp: 0,
        ..settings.sizes
    };
    let mut data = sample_training_data(problem, settings.t_end, sizes, derive_seed(seed, stream))?;
    data.supervised = supervised;
    let mut rng = sample_rng(derive_seed(seed, stream + 1));
    let policy = settings.resample;
    let mut obj = PinnObjective::new(problem, spec, data, settings.weights);
    let report = combined_train(&mut obj, init.into_values(), &settings.optimizer, |step, o| {
        resample_residuals(&mut o.data, &policy, step, problem, &mut rng);
    })?;
    log::info!(
        "{} stage {stage} on (0, {}]: loss {:.3e} after {} Adam + {} L-BFGS iterations ({})",
        problem.name(),
        settings.t_end,
        report.evaluation.loss,
        settings.optimizer.adam_steps,
        report.lbfgs_iterations,
        report.lbfgs_status.map_or("adam only", |s| s.as_str()),
    );
    Ok(TrainedModel {
        params: NetworkParams::from_flat(*spec, report.params)?,
        stage,
        t_end: settings.t_end,
        log: report.log,
        loss: report.evaluation.loss,
        components: report.evaluation.components,
        lbfgs_status: report.lbfgs_status,
    })
}

/// Stage 1: Xavier init, plain PINN loss on `(0, T₁]`.
pub fn pretrain_first(problem: &PdeProblem, schedule: &PtSchedule, seed: u64) -> Result<TrainedModel, TrainingError> {
    schedule.validate(problem)?;
    let init = NetworkParams::xavier_init(schedule.network, derive_seed(seed, STREAM_INIT))?;
    let empty = SupervisedSet::empty(problem.spatial_dim() + 1);
    train_stage(
        problem,
        &schedule.network,
        init,
        &schedule.pretrain[0],
        empty,
        1,
        seed,
        stage_stream(1),
    )
}

/// Stage `prev.stage + 1`: starts from `prev`'s parameters, supervised by
/// `n_sp` labels `prev` assigns on `(0, prev.t_end]`.
pub fn pretrain_next(
    problem: &PdeProblem,
    prev: &TrainedModel,
    settings: &StageSettings,
    seed: u64,
) -> Result<TrainedModel, TrainingError> {
    settings.validate()?;
    let stage = prev.stage + 1;
    let stream = stage_stream(stage);
    let sp = build_supervised_set(
        &prev.params,
        problem,
        prev.t_end,
        settings.sizes.n_sp,
        derive_seed(seed, stream + 2),
    )?;
    let spec = *prev.params.spec();
    train_stage(problem, &spec, prev.params.clone(), settings, sp, stage, seed, stream)
}

/// Formal stage on `(0, T]`, supervised by `last_pre`.
pub fn formal_train(
    problem: &PdeProblem,
    last_pre: &TrainedModel,
    settings: &StageSettings,
    init: FormalInit,
    seed: u64,
) -> Result<TrainedModel, TrainingError> {
    settings.validate()?;
    let spec = *last_pre.params.spec();
    let sp = build_supervised_set(
        &last_pre.params,
        problem,
        last_pre.t_end,
        settings.sizes.n_sp,
        derive_seed(seed, STREAM_FORMAL + 2),
    )?;
    let start = match init {
        FormalInit::Pretrained => last_pre.params.clone(),
        FormalInit::Random => NetworkParams::xavier_init(spec, derive_seed(seed, STREAM_RANDOM_FORMAL_INIT))?,
    };
    train_stage(
        problem,
        &spec,
        start,
        settings,
        sp,
        last_pre.stage + 1,
        seed,
        STREAM_FORMAL,
    )
}

/// Standard PINN: Xavier init, plain loss on `(0, T]`.
pub fn train_standard(
    problem: &PdeProblem,
    network: &NetworkSpec,
    settings: &StageSettings,
    seed: u64,
) -> Result<TrainedModel, TrainingError> {
    settings.validate()?;
    if settings.t_end != problem.horizon() {
        return Err(TrainingError::Schedule(format!(
            "standard training must cover (0, {}]",
            problem.horizon()
        )));
    }
    let init = NetworkParams::xavier_init(*network, derive_seed(seed, STREAM_INIT))?;
    let empty = SupervisedSet::empty(problem.spatial_dim() + 1);
    train_stage(problem, network, init, settings, empty, 1, seed, STREAM_FORMAL)
}

/// All stage models of a pre-training run; the last one is the formal
/// result.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub stages: Vec<TrainedModel>,
}

impl PipelineResult {
    pub fn final_model(&self) -> &TrainedModel {
        self.stages.last().expect("at least the formal stage")
    }
}

/// Runs the whole ladder and the formal stage. With `artifacts`, writes
/// `stage_<i>.ckpt` and `stage_<i>_log.csv` per stage plus `manifest.txt`.
pub fn run_pt_pinn(
    problem: &PdeProblem,
    schedule: &PtSchedule,
    seed: u64,
    init: FormalInit,
    artifacts: Option<&Path>,
) -> Result<PipelineResult, TrainingError> {
    schedule.validate(problem)?;
    if let Some(dir) = artifacts {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.txt"), manifest(problem, schedule, seed, init))?;
    }
    let mut stages = Vec::with_capacity(schedule.pretrain.len() + 1);
    let mut current = pretrain_first(problem, schedule, seed)?;
    save_stage(artifacts, &current)?;
    for settings in &schedule.pretrain[1..] {
        let next = pretrain_next(problem, &current, settings, seed)?;
        save_stage(artifacts, &next)?;
        stages.push(std::mem::replace(&mut current, next));
    }
    let formal = formal_train(problem, &current, &schedule.formal, init, seed)?;
    save_stage(artifacts, &formal)?;
    stages.push(current);
    stages.push(formal);
    Ok(PipelineResult { stages })
}

fn save_stage(dir: Option<&Path>, model: &TrainedModel) -> Result<(), TrainingError> {
    let Some(dir) = dir else { return Ok(()) };
    let ckpt = fs::File::create(dir.join(format!("stage_{}.ckpt", model.stage)))?;
    write_checkpoint(&model.params, BufWriter::new(ckpt))?;
    let log = fs::File::create(dir.join(format!("stage_{}_log.csv", model.stage)))?;
    model
        .log
        .write_csv(BufWriter::new(log))
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(())
}

fn describe_stage(out: &mut String, name: &str, s: &StageSettings) {
    let o = &s.optimizer;
    let _ = writeln!(
        out,
        "{name}: t_end={} n_i={} n_b={} n_r={} n_sp={} adam_steps={} lr={} decay={}/{} lbfgs={} \
         eta={} k={} f={} w_i={} w_b={} w_r={} w_sp={}",
        s.t_end,
        s.sizes.n_i,
        s.sizes.n_b,
        s.sizes.n_r,
        s.sizes.n_sp,
        o.adam_steps,
        o.adam.lr,
        o.adam.decay_rate,
        o.adam.decay_steps,
        if o.use_lbfgs { "on" } else { "off" },
        s.resample.eta,
        s.resample.k,
        s.resample.f,
        s.weights.initial,
        s.weights.boundary,
        s.weights.residual,
        s.weights.supervised,
    );
}

/// Plain-text record of a run's schedule, seeds, sizes and weights.
pub fn manifest(problem: &PdeProblem, schedule: &PtSchedule, seed: u64, init: FormalInit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "benchmark: {}", problem.name());
    if let Some(p) = problem.parameter() {
        let _ = writeln!(out, "parameter: {p}");
    }
    let _ = writeln!(out, "network: {:?}", schedule.network);
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(out, "precision: {}", crate::PRECISION);
    let _ = writeln!(out, "formal_init: {init:?}");
    for (i, s) in schedule.pretrain.iter().enumerate() {
        describe_stage(&mut out, &format!("stage {}", i + 1), s);
    }
    describe_stage(&mut out, "formal", &schedule.formal);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizers::AdamSettings;
    use crate::problems::{make_convection, make_heat1d_nl};
    use crate::sampling::sample_training_data;

    fn quick_stage(t_end: Real, n_sp: usize) -> StageSettings {
        StageSettings {
            t_end,
            sizes: DataSizes::new(16, 8, 24, n_sp),
            optimizer: CombinedSettings {
                adam: AdamSettings::default(),
                adam_steps: 20,
                lbfgs: crate::optimizers::LbfgsSettings {
                    max_iter: 15,
                    ..Default::default()
                },
                use_lbfgs: true,
            },
            resample: ResamplePolicy { eta: 0.5, k: 5, f: 15 },
            weights: LossWeights::default(),
        }
    }

    fn schedule() -> PtSchedule {
        PtSchedule {
            network: NetworkSpec::mlp(2, 2, 6),
            pretrain: vec![quick_stage(0.2, 0), quick_stage(0.6, 10)],
            formal: quick_stage(1.0, 10),
        }
    }

    #[test]
    fn schedule_validation() {
        let p = make_convection(10.0).unwrap();
        assert!(schedule().validate(&p).is_ok());
        let mut bad = schedule();
        bad.pretrain[1].t_end = 0.1;
        assert!(bad.validate(&p).is_err());
        let mut bad = schedule();
        bad.formal.t_end = 0.9;
        assert!(bad.validate(&p).is_err());
        let mut bad = schedule();
        bad.network = NetworkSpec::mlp(3, 2, 6);
        assert!(bad.validate(&p).is_err());
        let mut bad = schedule();
        bad.pretrain.clear();
        assert!(bad.validate(&p).is_err());
    }

    #[test]
    fn pipeline_is_deterministic_and_hands_off() {
        let p = make_convection(10.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = run_pt_pinn(&p, &schedule(), 7, FormalInit::Pretrained, Some(dir.path())).unwrap();
        let b = run_pt_pinn(&p, &schedule(), 7, FormalInit::Pretrained, None).unwrap();
        assert_eq!(a.stages.len(), 3);
        for (x, y) in a.stages.iter().zip(&b.stages) {
            assert_eq!(x.params, y.params);
            assert_eq!(x.log, y.log);
        }
        for f in [
            "manifest.txt",
            "stage_1.ckpt",
            "stage_2.ckpt",
            "stage_3.ckpt",
            "stage_3_log.csv",
        ] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let ckpt = fs::File::open(dir.path().join("stage_3.ckpt")).unwrap();
        assert_eq!(crate::network::read_checkpoint(ckpt).unwrap(), a.stages[2].params);
    }

    #[test]
    fn stage_start_equals_previous_result() {
        // zero optimizer work: the next stage returns its initial parameters
        let p = make_convection(10.0).unwrap();
        let first = pretrain_first(&p, &schedule(), 3).unwrap();
        let mut idle = quick_stage(0.6, 10);
        idle.optimizer.adam_steps = 0;
        idle.optimizer.use_lbfgs = false;
        idle.resample = ResamplePolicy::none();
        let next = pretrain_next(&p, &first, &idle, 3).unwrap();
        assert_eq!(next.params, first.params);
        assert_eq!(next.stage, 2);
        let probe = [0.4, first.t_end + 1e-3];
        assert_eq!(
            next.params.forward(&probe).unwrap(),
            first.params.forward(&probe).unwrap()
        );
    }

    #[test]
    fn inactive_resampling_reproduces_standard_trajectory() {
        let p = make_heat1d_nl(2).unwrap();
        let spec = NetworkSpec::mlp(2, 2, 5);
        let mut plain = quick_stage(1.0, 0);
        plain.resample = ResamplePolicy::none();
        let base = train_standard(&p, &spec, &plain, 11).unwrap();
        for policy in [
            ResamplePolicy { eta: 0.0, k: 5, f: 20 },
            ResamplePolicy { eta: 0.6, k: 10, f: 10 },
        ] {
            let mut s = plain.clone();
            s.resample = policy;
            let other = train_standard(&p, &spec, &s, 11).unwrap();
            assert_eq!(other.log, base.log);
            assert_eq!(other.params, base.params);
        }
        let mut active = plain.clone();
        active.resample = ResamplePolicy { eta: 0.6, k: 5, f: 20 };
        let moved = train_standard(&p, &spec, &active, 11).unwrap();
        assert_ne!(moved.log, base.log);
    }

    #[test]
    fn single_full_interval_formal_matches_standard_problem() {
        let p = make_heat1d_nl(1).unwrap();
        let mut formal = quick_stage(1.0, 0);
        formal.resample = ResamplePolicy::none();
        let sched = PtSchedule {
            network: NetworkSpec::mlp(2, 2, 5),
            pretrain: vec![formal.clone()],
            formal: formal.clone(),
        };
        let run = run_pt_pinn(&p, &sched, 5, FormalInit::Pretrained, None).unwrap();
        // the formal stage sees the same data as a standard run and starts
        // from the pre-trained parameters
        let standard = train_standard(&p, &sched.network, &formal, 5).unwrap();
        let data = sample_training_data(&p, 1.0, formal.sizes, derive_seed(5, STREAM_FORMAL)).unwrap();
        let w = LossWeights::default();
        let (l_formal, _) = pinn_loss(&run.final_model().params, &data, w, &p).unwrap();
        let (l_std, _) = pinn_loss(&standard.params, &data, w, &p).unwrap();
        assert!((l_formal - run.final_model().loss).abs() <= 1e-12 * l_formal.max(1e-300));
        assert!((l_std - standard.loss).abs() <= 1e-12 * l_std.max(1e-300));
        assert_eq!(run.final_model().log.records[0].components.supervised, 0.0);
    }

    #[test]
    fn random_formal_init_differs() {
        let p = make_convection(10.0).unwrap();
        let first = pretrain_first(&p, &schedule(), 3).unwrap();
        let mut idle = quick_stage(1.0, 5);
        idle.optimizer.adam_steps = 0;
        idle.optimizer.use_lbfgs = false;
        idle.resample = ResamplePolicy::none();
        let pre = formal_train(&p, &first, &idle, FormalInit::Pretrained, 3).unwrap();
        let rnd = formal_train(&p, &first, &idle, FormalInit::Random, 3).unwrap();
        assert_eq!(pre.params, first.params);
        assert_ne!(rnd.params, first.params);
    }
}
