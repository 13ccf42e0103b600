//! Command implementations behind the `mhgrn` binary.
//!
//! Exit codes: 0 on success, 1 for a failed check or a missing path, 2 for
//! usage and I/O errors. Successful commands print one JSON document.

mod bench;

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use mhgrn::encoder::{multihop_pass, type_transform};
use mhgrn::pathreason::{brute_force_zk, count_paths, decode_path};
use mhgrn::numkit::glorot_init;
use mhgrn::qa::{self, QaInstance, QaOption};
use mhgrn::relgraph::{extract_subgraph, load_kg};
use mhgrn::{encode, synth, DenseMatrix, EncoderConfig, Error, ModelDims, ModelParams, MultiRelGraph, RelationVocab, Rng};
use serde_json::{json, Value};

pub use bench::{bench, linear_fit, BenchArgs, BenchRecord, LinearFit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "mhgrn", version, about = "Multi-hop graph relation network tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract the schema graph for question and answer mentions from a triple file
    Extract {
        #[arg(long)]
        kg: PathBuf,
        /// comma separated question entity names
        #[arg(long, default_value = "")]
        q: String,
        /// comma separated answer entity names
        #[arg(long, default_value = "")]
        a: String,
        #[arg(long)]
        out: PathBuf,
        /// relation vocabulary JSON replacing the built-in one
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Compare the dynamic program against walk enumeration on random graphs
    OracleCheck {
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(2..=12))]
        n: u64,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
    },
    /// Time MHGRN and RGCN forward passes for K = 1..k-max and fit time against K
    Bench {
        #[arg(long, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
        k_max: u64,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(2..))]
        n: u64,
        #[arg(long, default_value_t = 34, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
        #[arg(long, default_value_t = 10.0)]
        deg: f64,
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(3..))]
        trials: u64,
        /// hidden size of both models
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
        dim: u64,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count walks of each length 1..=k
    CountPaths {
        #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
        graph: Option<PathBuf>,
        /// complete:n, chain:n or erdos:n:deg:m[:seed]
        #[arg(long)]
        synthetic: Option<String>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
    },
    /// Score every option of an instance
    Score(ScoreArgs),
    /// Score an instance and decode the best path for the predicted option
    Decode(ScoreArgs),
    /// Write random parameters
    InitParams {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        d_in: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 8)]
        d_out: usize,
        #[arg(long, default_value_t = 4)]
        d_s: usize,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        k: u64,
        #[arg(long, default_value_t = 34)]
        m: usize,
    },
    /// Write a seeded toy instance and matching parameters into a directory
    Toy {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
    },
}

#[derive(clap::Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub instance: PathBuf,
    /// comma separated: type-transform, rel-attention, node-attention
    #[arg(long)]
    pub ablate: Option<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoPath(_) => EXIT_FAIL,
        _ => EXIT_USAGE,
    }
}

/// Runs a command, printing its JSON result or an error message.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok((code, value)) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("serializable"));
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> mhgrn::Result<(i32, Value)> {
    match command {
        Command::Extract { kg, q, a, out, vocab } => {
            let vocab = match vocab {
                Some(p) => RelationVocab::load(p)?,
                None => RelationVocab::conceptnet(),
            };
            let graph = extract(&kg, &q, &a, &vocab)?;
            graph.save(&out)?;
            let [nq, na, no] = graph.count_by_type();
            Ok((
                EXIT_OK,
                json!({"n": graph.n(), "edges": graph.num_edges(), "types": {"q": nq, "a": na, "o": no}}),
            ))
        }
        Command::OracleCheck { seed, n, m, k, trials } => {
            oracle_check(seed, n as usize, m as usize, k as usize, trials as usize)
        }
        Command::Bench { k_max, n, m, deg, trials, dim, seed, out } => {
            let args = BenchArgs {
                k_max: k_max as usize,
                n: n as usize,
                m: m as usize,
                deg,
                trials: trials as usize,
                dim: dim as usize,
                seed,
            };
            if deg.is_nan() || deg <= 0.0 {
                return Err(Error::InvalidArgument(format!("--deg must be positive, got {deg}")));
            }
            let report = bench(&args)?;
            report.write_csv(&out)?;
            Ok((EXIT_OK, report.summary()))
        }
        Command::CountPaths { graph, synthetic, k } => {
            let g = match (graph, synthetic) {
                (Some(p), _) => MultiRelGraph::load(p, None)?,
                (None, Some(spec)) => synth::parse(&spec)?,
                (None, None) => return Err(Error::InvalidArgument("--graph or --synthetic".into())),
            };
            let counts = count_paths(&g, k as usize)?;
            Ok((EXIT_OK, json!({ "counts": counts })))
        }
        Command::Score(args) => score(&args, false),
        Command::Decode(args) => score(&args, true),
        Command::InitParams { out, seed, d_in, d, d_out, d_s, k, m } => {
            let dims = ModelDims { d_in, d, d_out, d_s, k: k as usize, m, seed, ..Default::default() };
            let params = ModelParams::random(dims);
            params.save(&out)?;
            Ok((EXIT_OK, json!({"out": out, "scalars": params.num_scalars()})))
        }
        Command::Toy { dir, seed } => {
            std::fs::create_dir_all(&dir)?;
            let (params, instance) = toy(seed);
            let params_path = dir.join("params.json");
            params.save(&params_path)?;
            let instance = instance.save(&dir, "instance")?;
            Ok((EXIT_OK, json!({"params": params_path, "instance": instance})))
        }
    }
}

/// Three-option instance over the full relation vocabulary with random
/// parameters. Every answer node is reachable by walks of each length.
pub fn toy(seed: u64) -> (ModelParams, QaInstance) {
    let dims = ModelDims { d_in: 6, d: 6, d_out: 6, d_s: 4, k: 3, m: 34, h_att: 4, rho_hidden: 8, seed, ..Default::default() };
    let mut rng = Rng::new(seed);
    let options = (0..3)
        .map(|_| {
            let graph = synth::answer_reachable(8, dims.m, 0.01, &mut rng);
            let features = glorot_init(8, dims.d_in, &mut rng);
            let s = (0..dims.d_s).map(|_| rng.uniform(-1.0, 1.0)).collect();
            QaOption { s, graph, features }
        })
        .collect();
    let correct = rng.below(3);
    (ModelParams::random(dims), QaInstance::new(options, correct).expect("three options"))
}

fn mentions(list: &str) -> Vec<&str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn extract(kg: &std::path::Path, q: &str, a: &str, vocab: &RelationVocab) -> mhgrn::Result<MultiRelGraph> {
    let store = load_kg(kg, vocab)?;
    let (q, a) = (mentions(q), mentions(a));
    if q.is_empty() && a.is_empty() {
        return Err(Error::EmptyMentionSet);
    }
    let q: BTreeSet<usize> = store.link(&q)?;
    let a: BTreeSet<usize> = store.link(&a)?;
    extract_subgraph(&store, &q, &a)
}

/// Largest absolute difference between the DP and the enumeration oracle on one
/// random graph. Normalizers are compared relative to their magnitude.
pub fn oracle_trial(seed: u64, n: usize, m: usize, k: usize) -> mhgrn::Result<f64> {
    let mut rng = Rng::new(seed);
    let graph = synth::bernoulli(n, m, 1.5 / (n * m) as f64 + 0.1, &mut rng);
    let dims = ModelDims { d_in: 3, d: 3, d_out: 3, d_s: 2, k, m, h_att: 3, rho_hidden: 2, seed: rng.next_u64(), ..Default::default() };
    let mut params = ModelParams::random(dims);
    for b in params.b.iter_mut().flatten() {
        *b = rng.uniform(-0.5, 0.5);
    }
    let h = DenseMatrix::from_vec(n, 3, (0..n * 3).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
    let s = [rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)];
    let config = EncoderConfig::for_params(&params);
    let x = type_transform(&h, graph.phi(), &params, &config)?;
    let dp = multihop_pass(&x, &graph, &s, &params, k)?;
    let mut worst: f64 = 0.0;
    for hop in 1..=k {
        let (z, norm) = brute_force_zk(&graph, &x, &s, &params, hop, k)?;
        worst = worst.max(dp.z[hop - 1].max_abs_diff(&z));
        for (a, b) in dp.d_norm[hop - 1].iter().zip(&norm) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

pub const ORACLE_TOLERANCE: f64 = 1e-9;

fn oracle_check(seed: u64, n: usize, m: usize, k: usize, trials: usize) -> mhgrn::Result<(i32, Value)> {
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for t in 0..trials as u64 {
        let trial_seed = seed.wrapping_add(t);
        let diff = oracle_trial(trial_seed, n, m, k)?;
        if diff.is_nan() || diff >= ORACLE_TOLERANCE {
            eprintln!("violation: seed {trial_seed} max abs diff {diff:e}");
            failed.push(trial_seed);
        }
        worst = worst.max(diff);
    }
    let code = if failed.is_empty() { EXIT_OK } else { EXIT_FAIL };
    Ok((code, json!({"trials": trials, "max_abs_diff": worst, "failed_seeds": failed, "pass": failed.is_empty()})))
}

fn score(args: &ScoreArgs, with_path: bool) -> mhgrn::Result<(i32, Value)> {
    let params = ModelParams::load(&args.params)?;
    let instance = QaInstance::load(&args.instance, Some(params.dims().m))?;
    let mut config = EncoderConfig::for_params(&params);
    if let Some(flags) = &args.ablate {
        config = config.ablate(flags)?;
    }
    let mut outputs = Vec::new();
    let mut scores = Vec::new();
    for o in instance.options() {
        let out = encode(&o.graph, &o.features, &o.s, &params, &config)?;
        scores.push(qa::plausibility(&o.s, &out.g_vec, &params)?);
        outputs.push(out);
    }
    let prediction = qa::argmax(&scores);
    let mut result = json!({
        "scores": scores,
        "prediction": prediction,
        "correct": instance.correct(),
        "loss": qa::qa_loss(&scores, instance.correct())?,
    });
    if with_path {
        let option = &instance.options()[prediction];
        let path = decode_path(&option.graph, &outputs[prediction], &option.s, &params, &config)?;
        let vocab = RelationVocab::conceptnet();
        let names = (params.dims().m == vocab.m()).then_some(&vocab);
        result["path"] = path.to_json(names);
    }
    Ok((EXIT_OK, result))
}
