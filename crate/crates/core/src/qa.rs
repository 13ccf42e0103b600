//! Plausibility head, multiple-choice loss and prediction, and a
//! finite-difference trainer for tiny models.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, EncoderConfig, ModelDims, ModelParams};
use crate::error::{dim_err, Error, Result};
use crate::numkit::{self as io, glorot_init, DenseMatrix, Rng};
use crate::relgraph::{MultiRelGraph, NodeType};

/// One answer option: its statement vector, schema graph and node features.
#[derive(Clone, Debug)]
pub struct QaOption {
    pub s: Vec<f64>,
    pub graph: MultiRelGraph,
    pub features: DenseMatrix,
}

#[derive(Clone, Debug)]
pub struct QaInstance {
    options: Vec<QaOption>,
    correct: usize,
}

#[derive(Serialize, Deserialize)]
struct OptionFile {
    s_csv: PathBuf,
    graph_json: PathBuf,
    features: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    options: Vec<OptionFile>,
    correct: usize,
}

impl QaInstance {
    pub fn new(options: Vec<QaOption>, correct: usize) -> Result<Self> {
        if options.len() < 2 {
            return Err(Error::IndexOutOfRange { index: options.len(), len: 2 });
        }
        if correct >= options.len() {
            return Err(Error::IndexOutOfRange { index: correct, len: options.len() });
        }
        for o in &options {
            if o.features.rows() != o.graph.n() {
                return dim_err(format!("{} feature rows for {} nodes", o.features.rows(), o.graph.n()));
            }
        }
        Ok(Self { options, correct })
    }

    pub fn options(&self) -> &[QaOption] {
        &self.options
    }

    pub fn correct(&self) -> usize {
        self.correct
    }

    /// Loads an instance file; option paths are relative to its directory.
    /// `m` overrides the relation count stored in the graph files.
    pub fn load(path: impl AsRef<Path>, m: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let file: InstanceFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let options = file
            .options
            .iter()
            .map(|o| {
                let s = io::read_matrix(base.join(&o.s_csv))?.into_data();
                let graph = MultiRelGraph::load(base.join(&o.graph_json), m)?;
                let features = io::read_matrix(base.join(&o.features))?;
                Ok(QaOption { s, graph, features })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(options, file.correct)
    }

    /// Writes `<stem>.json` plus per-option statement, graph and feature files
    /// into `dir`, returning the instance file path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let mut options = Vec::new();
        for (a, o) in self.options.iter().enumerate() {
            let names = OptionFile {
                s_csv: format!("{stem}_opt{a}_s.csv").into(),
                graph_json: format!("{stem}_opt{a}_graph.json").into(),
                features: format!("{stem}_opt{a}_h.fmat").into(),
            };
            io::write_matrix_csv(dir.join(&names.s_csv), &DenseMatrix::from_vec(1, o.s.len(), o.s.clone())?)?;
            o.graph.save(dir.join(&names.graph_json))?;
            io::write_matrix_fmat(dir.join(&names.features), &o.features)?;
            options.push(names);
        }
        let path = dir.join(format!("{stem}.json"));
        let file = InstanceFile { options, correct: self.correct };
        std::fs::write(&path, serde_json::to_string_pretty(&file)?)?;
        Ok(path)
    }
}

/// `rho(s ++ g)`.
pub fn plausibility(s: &[f64], g_vec: &[f64], params: &ModelParams) -> Result<f64> {
    if s.len() + g_vec.len() != params.rho.input_dim() {
        return dim_err(format!(
            "rho expects {} inputs, got {} + {}",
            params.rho.input_dim(),
            s.len(),
            g_vec.len()
        ));
    }
    Ok(params.rho.forward(&[s, g_vec].concat())?[0])
}

/// `-log softmax(scores)[correct]`.
pub fn qa_loss(scores: &[f64], correct: usize) -> Result<f64> {
    if correct >= scores.len() {
        return Err(Error::IndexOutOfRange { index: correct, len: scores.len() });
    }
    if scores.len() < 2 {
        return Err(Error::IndexOutOfRange { index: scores.len(), len: 2 });
    }
    let top = scores.iter().enumerate().fold(0, |best, (i, &v)| if v > scores[best] { i } else { best });
    let mx = scores[top];
    if !mx.is_finite() {
        return Err(Error::NonFinite("option scores"));
    }
    let rest: f64 = scores.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, v)| (v - mx).exp()).sum();
    // loss = (mx - s_c) + log(1 + rest)
    Ok((mx - scores[correct]) + rest.ln_1p())
}

/// Plausibility of every option.
pub fn option_scores(instance: &QaInstance, params: &ModelParams, config: &EncoderConfig) -> Result<Vec<f64>> {
    instance
        .options
        .iter()
        .map(|o| {
            let out = encode(&o.graph, &o.features, &o.s, params, config)?;
            plausibility(&o.s, &out.g_vec, params)
        })
        .collect()
}

/// Index of the highest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    scores.iter().enumerate().fold(0, |best, (i, &v)| if v > scores[best] { i } else { best })
}

pub fn predict(instance: &QaInstance, params: &ModelParams, config: &EncoderConfig) -> Result<usize> {
    Ok(argmax(&option_scores(instance, params, config)?))
}

/// Mean loss over a batch.
pub fn batch_loss(params: &ModelParams, batch: &[QaInstance], config: &EncoderConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for inst in batch {
        total += qa_loss(&option_scores(inst, params, config)?, inst.correct)?;
    }
    Ok(total / batch.len() as f64)
}

pub fn accuracy(params: &ModelParams, batch: &[QaInstance], config: &EncoderConfig) -> Result<f64> {
    let mut hits = 0usize;
    for inst in batch {
        hits += usize::from(predict(inst, params, config)? == inst.correct);
    }
    Ok(hits as f64 / batch.len().max(1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    pub eps: f64,
    pub lr: f64,
    pub max_params: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { eps: 1e-5, lr: 0.05, max_params: 5000 }
    }
}

/// Worker count from `MHGRN_THREADS`, defaulting to rayon's choice.
pub fn thread_count() -> usize {
    std::env::var("MHGRN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// Central difference of the batch loss along one flat parameter.
pub fn fd_gradient_component(
    params: &ModelParams,
    batch: &[QaInstance],
    config: &EncoderConfig,
    index: usize,
    eps: f64,
) -> Result<f64> {
    let mut shifted = params.clone();
    let slot = shifted
        .scalar_mut(index)
        .ok_or(Error::IndexOutOfRange { index, len: params.num_scalars() })?;
    let base = *slot;
    *slot = base + eps;
    let plus = batch_loss(&shifted, batch, config)?;
    *shifted.scalar_mut(index).expect("checked") = base - eps;
    let minus = batch_loss(&shifted, batch, config)?;
    Ok((plus - minus) / (2.0 * eps))
}

/// Full finite-difference gradient in `to_flat` order.
pub fn fd_gradient(
    params: &ModelParams,
    batch: &[QaInstance],
    config: &EncoderConfig,
    fd: &FdConfig,
) -> Result<Vec<f64>> {
    let count = params.num_scalars();
    if count > fd.max_params {
        return Err(Error::ParamBudgetExceeded { count, cap: fd.max_params });
    }
    if fd.eps.is_nan() || fd.eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", fd.eps)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|p| fd_gradient_component(params, batch, config, p, fd.eps))
            .collect()
    })
}

/// One full-batch gradient step. Returns the updated parameters and the loss
/// before the step.
pub fn fd_train_step(
    params: &ModelParams,
    batch: &[QaInstance],
    config: &EncoderConfig,
    fd: &FdConfig,
) -> Result<(ModelParams, f64)> {
    if fd.lr.is_nan() || fd.lr < 0.0 {
        return Err(Error::InvalidArgument(format!("learning rate must be non-negative, got {}", fd.lr)));
    }
    let loss = batch_loss(params, batch, config)?;
    let grad = fd_gradient(params, batch, config, fd)?;
    let mut flat = params.to_flat();
    for (theta, g) in flat.iter_mut().zip(&grad) {
        *theta -= fd.lr * g;
    }
    let mut next = params.clone();
    next.set_flat(&flat)?;
    Ok((next, loss))
}

/// Dimensions used by [`separable_task`].
pub fn separable_dims(seed: u64) -> ModelDims {
    ModelDims { d_in: 4, d: 4, d_out: 4, d_s: 3, k: 2, m: 3, h_att: 2, rho_hidden: 4, seed, ..Default::default() }
}

/// Two-option instances whose correct option alone has a question -> answer
/// edge of relation 1. Every option graph has one question node, one answer
/// node and three others with noise edges of relations 2 and 3. Node features
/// come from one table shared by all graphs and both options of an instance
/// share their statement, so only graph structure separates them.
pub fn separable_task(instances: usize, seed: u64) -> Vec<QaInstance> {
    let dims = separable_dims(seed);
    let mut rng = Rng::new(seed);
    let features = glorot_init(5, dims.d_in, &mut rng);
    let option = |rng: &mut Rng, s: &[f64], linked: bool| {
        let phi = vec![NodeType::Question, NodeType::Answer, NodeType::Other, NodeType::Other, NodeType::Other];
        let mut edges = Vec::new();
        for j in 0..5 {
            for i in 0..5 {
                if j != i && rng.bernoulli(0.3) {
                    edges.push((j, 2 + rng.below(dims.m - 1), i));
                }
            }
        }
        if linked {
            edges.push((0, 1, 1));
        }
        let graph = MultiRelGraph::new(phi, None, dims.m, edges).expect("valid");
        QaOption { s: s.to_vec(), graph, features: features.clone() }
    };
    (0..instances)
        .map(|_| {
            let correct = rng.below(2);
            let s: Vec<f64> = (0..dims.d_s).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let options = (0..2).map(|a| option(&mut rng, &s, a == correct)).collect();
            QaInstance::new(options, correct).expect("two options")
        })
        .collect()
}
