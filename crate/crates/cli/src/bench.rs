//! Forward-pass timing for MHGRN and RGCN against the number of hops.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use mhgrn::baselines::{rgcn_encode, RgcnParams};
use mhgrn::{encode, synth, Activation, DenseMatrix, EncoderConfig, ModelDims, ModelParams, Result, Rng};
use serde_json::{json, Value};

pub const CSV_HEADER: &str = "model,K,n,m,deg,wall_ns_median,trials";

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub k_max: usize,
    pub n: usize,
    pub m: usize,
    pub deg: f64,
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub model: &'static str,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub mean_degree: f64,
    pub wall_ns: u64,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares line through `(x, y)`. `None` with fewer than two distinct x.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.len() < 2 || sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r2 })
}

pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub edges: usize,
}

impl BenchReport {
    pub fn fit(&self, model: &str) -> Option<LinearFit> {
        let points: Vec<(f64, f64)> =
            self.records.iter().filter(|r| r.model == model).map(|r| (r.k as f64, r.wall_ns as f64)).collect();
        linear_fit(&points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(f, "{},{},{},{},{},{},{}", r.model, r.k, r.n, r.m, r.mean_degree, r.wall_ns, r.trials)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> Value {
        let fit_json = |model: &str| match self.fit(model) {
            Some(f) => json!({"slope_ns_per_hop": f.slope, "intercept_ns": f.intercept, "r2": f.r2}),
            None => json!("undefined"),
        };
        let ratios: Vec<Value> = self
            .records
            .iter()
            .filter(|r| r.model == "MHGRN")
            .filter_map(|a| {
                let b = self.records.iter().find(|b| b.model == "RGCN" && b.k == a.k)?;
                Some(json!({"K": a.k, "mhgrn_over_rgcn": a.wall_ns as f64 / b.wall_ns as f64}))
            })
            .collect();
        json!({
            "records": self.records.len(),
            "edges": self.edges,
            "fit": {"MHGRN": fit_json("MHGRN"), "RGCN": fit_json("RGCN")},
            "ratio": ratios,
        })
    }
}

fn median(mut times: Vec<u64>) -> u64 {
    times.sort_unstable();
    times[times.len() / 2]
}

fn time_ns(f: impl FnOnce() -> Result<()>) -> Result<u64> {
    let t = Instant::now();
    f()?;
    Ok((t.elapsed().as_nanos() as u64).max(1))
}

/// Times one forward pass per model and K on a seeded random graph. Trials are
/// interleaved across all (model, K) cells so slow drift in machine speed
/// spreads evenly over K. Runs on the calling thread.
pub fn bench(args: &BenchArgs) -> Result<BenchReport> {
    let graph = synth::erdos(args.n, args.deg, args.m, args.seed)?;
    let mut rng = Rng::new(args.seed ^ 0x5eed);
    let d = args.dim;
    let h = DenseMatrix::from_vec(args.n, d, (0..args.n * d).map(|_| rng.uniform(-1.0, 1.0)).collect())?;
    let d_s = 16;
    let s: Vec<f64> = (0..d_s).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let models: Vec<(ModelParams, EncoderConfig, RgcnParams)> = (1..=args.k_max)
        .map(|k| {
            let dims = ModelDims { d_in: d, d, d_out: d, d_s, k, m: args.m, seed: args.seed, ..Default::default() };
            let params = ModelParams::random(dims);
            let config = EncoderConfig::for_params(&params);
            (params, config, RgcnParams::random(k, args.m, d, args.seed))
        })
        .collect();
    let mhgrn = |(params, config, _): &(ModelParams, EncoderConfig, RgcnParams)| {
        encode(&graph, &h, &s, params, config).map(drop)
    };
    let rgcn = |(_, _, weights): &(ModelParams, EncoderConfig, RgcnParams)| {
        rgcn_encode(&h, &graph, weights, Activation::Tanh).map(drop)
    };
    // warm-up
    for m in &models {
        mhgrn(m)?;
        rgcn(m)?;
    }
    let mut times = vec![[Vec::new(), Vec::new()]; args.k_max];
    for _ in 0..args.trials {
        for (cell, m) in times.iter_mut().zip(&models) {
            cell[0].push(time_ns(|| mhgrn(m))?);
            cell[1].push(time_ns(|| rgcn(m))?);
        }
    }
    let mut records = Vec::new();
    for (k, [a, b]) in (1..=args.k_max).zip(times) {
        for (model, t) in [("MHGRN", a), ("RGCN", b)] {
            records.push(BenchRecord {
                model,
                k,
                n: args.n,
                m: args.m,
                mean_degree: args.deg,
                wall_ns: median(t),
                trials: args.trials,
            });
        }
    }
    Ok(BenchReport { records, edges: graph.num_edges() })
}
