//! Class-incremental task streams and the train-after-every-task loop.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::buffer::ReplayBuffer;
use crate::codecs::{Codec, CodecSpec, Normalizer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learner::{evaluate, train_on_buffer, TrainConfig};
use crate::rng::{derive_rng, SeededRng};
use crate::types::{ByteBudget, ClassId, ImageShape, Instance};
use crate::Mlp;

#[derive(Clone, Debug)]
pub struct Task {
    pub index: usize,
    pub classes: Vec<ClassId>,
    pub instances: Vec<Instance>,
}

/// Tasks with pairwise-disjoint class sets.
#[derive(Clone, Debug)]
pub struct TaskStream {
    pub tasks: Vec<Task>,
    pub num_classes: usize,
    pub shape: ImageShape,
}

impl TaskStream {
    pub fn classes(&self) -> Vec<ClassId> {
        self.tasks
            .iter()
            .flat_map(|t| t.classes.iter().copied())
            .collect()
    }
}

/// New-classes split: shuffle the class labels, cut them into
/// `num_tasks` groups of `classes_per_task`, and shuffle each task's training
/// instances.
pub fn split_nc(
    dataset: &Dataset,
    num_tasks: usize,
    classes_per_task: usize,
    rng: &mut SeededRng,
) -> Result<TaskStream> {
    let present: BTreeSet<ClassId> = dataset.train.iter().map(Instance::class).collect();
    let needed = num_tasks * classes_per_task;
    if needed == 0 {
        return Err(Error::Config(
            "num_tasks and classes_per_task must be positive".into(),
        ));
    }
    if needed > present.len() {
        return Err(Error::InsufficientClasses {
            needed,
            available: present.len(),
        });
    }
    let mut classes: Vec<ClassId> = present.into_iter().collect();
    classes.shuffle(rng);
    let tasks = classes
        .chunks(classes_per_task)
        .take(num_tasks)
        .enumerate()
        .map(|(index, chunk)| {
            let mut task_classes = chunk.to_vec();
            task_classes.sort_unstable();
            let mut instances: Vec<Instance> = dataset
                .train
                .iter()
                .filter(|i| task_classes.contains(&i.class()))
                .cloned()
                .collect();
            instances.shuffle(rng);
            Task {
                index,
                classes: task_classes,
                instances,
            }
        })
        .collect();
    Ok(TaskStream {
        tasks,
        num_classes: dataset.num_classes,
        shape: dataset.shape,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub codec: String,
    pub budget_bytes: usize,
    /// Accuracy after each task over the classes seen so far.
    pub task_accuracies: Vec<f64>,
    pub final_accuracy: f64,
    /// Epochs trained after each task.
    pub task_epochs: Vec<usize>,
    pub instance_bytes: usize,
    pub buffer_instances: usize,
    pub buffer_bytes: usize,
    pub param_bytes: usize,
    pub total_bytes: usize,
}

/// Fills the byte accounting from the buffer occupancy and `model`'s parameters.
pub fn resource_report(mut report: RunReport, model: &Mlp) -> RunReport {
    report.buffer_bytes = report.buffer_instances * report.instance_bytes;
    report.param_bytes = model.param_bytes();
    report.total_bytes = report.buffer_bytes + report.param_bytes;
    report
}

/// One rehearsal run, advanced task by task.
pub struct Experiment {
    spec: CodecSpec,
    codec: Codec,
    cfg: TrainConfig,
    seed: u64,
    num_classes: usize,
    buffer: ReplayBuffer,
    buffer_rng: SeededRng,
    test: Vec<Instance>,
    seen: Vec<ClassId>,
    accuracies: Vec<f64>,
    epochs: Vec<usize>,
    model: Option<Mlp>,
}

impl Experiment {
    /// `test` is given raw; it is encoded with the run's codec once here.
    pub fn new(
        shape: ImageShape,
        num_classes: usize,
        spec: &CodecSpec,
        budget: ByteBudget,
        cfg: &TrainConfig,
        test: &[Instance],
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let codec = Codec::prepare(spec, shape)?;
        let buffer = ReplayBuffer::new(budget, codec.output_bytes())?;
        let test = codec.encode_all(test)?;
        Ok(Experiment {
            spec: spec.clone(),
            codec,
            cfg: cfg.clone(),
            seed,
            num_classes,
            buffer,
            buffer_rng: derive_rng(seed, "buffer"),
            test,
            seen: Vec::new(),
            accuracies: Vec::new(),
            epochs: Vec::new(),
            model: None,
        })
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn model(&self) -> Option<&Mlp> {
        self.model.as_ref()
    }

    /// Overwrites the current model. The next task retrains from scratch regardless.
    pub fn replace_model(&mut self, model: Mlp) {
        self.model = Some(model);
    }

    /// Streams `task` through the codec into memory, retrains a fresh model on
    /// the memory snapshot, and returns its accuracy over seen classes.
    pub fn run_task(&mut self, task: &Task) -> Result<f64> {
        let index = task.index;
        let mut step = || -> Result<(f64, usize, Mlp)> {
            for c in &task.classes {
                if !self.seen.contains(c) {
                    self.seen.push(*c);
                }
            }
            for inst in self.codec.encode_all(&task.instances)? {
                self.buffer.offer(inst, &mut self.buffer_rng)?;
            }
            let snapshot = self.buffer.snapshot();
            let normalizer = Normalizer::fit(snapshot.iter().map(|(_, i)| i))?;
            let rng = derive_rng(self.seed, &format!("learner/task{index}"));
            let out =
                train_on_buffer::<f32>(&snapshot, &normalizer, &self.cfg, self.num_classes, &rng)?;
            let test: Vec<Instance> = self
                .test
                .iter()
                .filter(|i| self.seen.contains(&i.class()))
                .cloned()
                .collect();
            let acc = evaluate(&out.model, &test, &normalizer, Some(&self.seen))?;
            Ok((acc, out.epochs_run, out.model))
        };
        let (acc, epochs, model) = step().map_err(|e| e.in_task(index))?;
        self.accuracies.push(acc);
        self.epochs.push(epochs);
        self.model = Some(model);
        Ok(acc)
    }

    pub fn report(&self) -> RunReport {
        let report = RunReport {
            seed: self.seed,
            codec: self.spec.to_string(),
            budget_bytes: self.buffer.budget().capacity(),
            task_accuracies: self.accuracies.clone(),
            final_accuracy: self.accuracies.last().copied().unwrap_or(0.0),
            task_epochs: self.epochs.clone(),
            instance_bytes: self.buffer.instance_bytes(),
            buffer_instances: self.buffer.len(),
            buffer_bytes: 0,
            param_bytes: 0,
            total_bytes: 0,
        };
        match &self.model {
            Some(m) => resource_report(report, m),
            None => RunReport {
                buffer_bytes: self.buffer.stored_bytes(),
                total_bytes: self.buffer.stored_bytes(),
                ..report
            },
        }
    }
}

/// Runs every task of `stream` in order and reports the final state.
pub fn run_experiment(
    stream: &TaskStream,
    codec_spec: &CodecSpec,
    budget: ByteBudget,
    cfg: &TrainConfig,
    test: &[Instance],
    seed: u64,
) -> Result<RunReport> {
    let classes = stream.classes();
    let test: Vec<Instance> = test
        .iter()
        .filter(|i| classes.contains(&i.class()))
        .cloned()
        .collect();
    for c in &classes {
        if !test.iter().any(|i| i.class() == *c) {
            return Err(Error::Config(format!(
                "test set has no instance of class {c}"
            )));
        }
    }
    let mut exp = Experiment::new(
        stream.shape,
        stream.num_classes,
        codec_spec,
        budget,
        cfg,
        &test,
        seed,
    )?;
    for task in &stream.tasks {
        exp.run_task(task)?;
    }
    Ok(exp.report())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Mean ± population std of final accuracy over runs of one configuration.
pub fn aggregate_runs(reports: &[RunReport]) -> Result<Aggregate> {
    let first = reports.first().ok_or(Error::Empty("run reports"))?;
    if let Some(r) = reports
        .iter()
        .find(|r| r.codec != first.codec || r.budget_bytes != first.budget_bytes)
    {
        return Err(Error::MixedConfigs(format!(
            "{} @ {} B vs {} @ {} B",
            first.codec, first.budget_bytes, r.codec, r.budget_bytes
        )));
    }
    let n = reports.len() as f64;
    let mean = reports.iter().map(|r| r.final_accuracy).sum::<f64>() / n;
    let var = reports
        .iter()
        .map(|r| (r.final_accuracy - mean).powi(2))
        .sum::<f64>()
        / n;
    Ok(Aggregate {
        runs: reports.len(),
        mean,
        std: var.sqrt(),
    })
}
