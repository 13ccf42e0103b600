use std::borrow::Cow;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::AttentionParams;
use crate::error::{dim_err, Error, Result};
use crate::numkit::{glorot_init, DenseMatrix, Mlp, Rng};
use crate::relgraph::NodeType;

/// Output nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        })
    }
}

/// Shape header stored with every parameter file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_in: usize,
    pub d: usize,
    pub d_out: usize,
    pub d_s: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub m: usize,
    pub h_att: usize,
    pub rho_hidden: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            d_in: 32,
            d: 32,
            d_out: 32,
            d_s: 16,
            k: 3,
            m: 34,
            h_att: 16,
            rho_hidden: 32,
            activation: Activation::Tanh,
            seed: 0,
        }
    }
}

/// Every learnable tensor of the encoder and its scoring head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub header: ModelDims,
    /// per node type (`NodeType::index`), `d x d_in`
    #[serde(rename = "U")]
    pub u: Vec<DenseMatrix>,
    /// per node type, length `d`
    pub b: Vec<Vec<f64>>,
    /// `w[t - 1][r]` for hop `t` in `1..=K` and relation `r` in `0..=m`;
    /// `r = 0` holds the padding matrices
    #[serde(rename = "W")]
    pub w: Vec<Vec<DenseMatrix>>,
    /// `d_out x d_in`
    #[serde(rename = "V")]
    pub v: DenseMatrix,
    /// `d_out x d`
    #[serde(rename = "V_prime")]
    pub v_prime: DenseMatrix,
    pub att: AttentionParams,
    /// `d_s x d`, hop attention bilinear form
    #[serde(rename = "B_hop")]
    pub b_hop: DenseMatrix,
    /// `d_s x d_out`, answer pooling bilinear form
    #[serde(rename = "P_pool")]
    pub p_pool: DenseMatrix,
    /// plausibility head on `s ++ g`
    pub rho: Mlp,
}

impl ModelParams {
    pub fn random(dims: ModelDims) -> Self {
        let mut rng = Rng::new(dims.seed);
        let ModelDims { d_in, d, d_out, d_s, k, m, h_att, rho_hidden, .. } = dims;
        let u = (0..NodeType::COUNT).map(|_| glorot_init(d, d_in, &mut rng)).collect();
        let b = vec![vec![0.0; d]; NodeType::COUNT];
        let w = (0..k).map(|_| (0..=m).map(|_| glorot_init(d, d, &mut rng)).collect()).collect();
        let v = glorot_init(d_out, d_in, &mut rng);
        let v_prime = glorot_init(d_out, d, &mut rng);
        let att = AttentionParams::random(m, d_s, h_att, &mut rng);
        let b_hop = glorot_init(d_s, d, &mut rng);
        let p_pool = glorot_init(d_s, d_out, &mut rng);
        let rho = Mlp::random(d_s + d_out, rho_hidden, 1, &mut rng);
        Self { header: dims, u, b, w, v, v_prime, att, b_hop, p_pool, rho }
    }

    /// Identity-like parameters: `U = [I; 0]`-style truncated identities, all
    /// `W = I`, zero attention, zero bilinear forms and a zero head.
    pub fn neutral(dims: ModelDims) -> Self {
        let ModelDims { d_in, d, d_out, d_s, k, m, h_att, rho_hidden, .. } = dims;
        let eye = |rows: usize, cols: usize| {
            let mut e = DenseMatrix::zeros(rows, cols);
            for i in 0..rows.min(cols) {
                e.set(i, i, 1.0);
            }
            e
        };
        Self {
            u: vec![eye(d, d_in); NodeType::COUNT],
            b: vec![vec![0.0; d]; NodeType::COUNT],
            w: vec![vec![DenseMatrix::identity(d); m + 1]; k],
            v: eye(d_out, d_in),
            v_prime: eye(d_out, d),
            att: AttentionParams::zeros(m, d_s, h_att),
            b_hop: DenseMatrix::zeros(d_s, d),
            p_pool: DenseMatrix::zeros(d_s, d_out),
            rho: Mlp::zeros(d_s + d_out, rho_hidden, 1),
            header: dims,
        }
    }

    pub fn dims(&self) -> &ModelDims {
        &self.header
    }

    pub fn validate(&self) -> Result<()> {
        let ModelDims { d_in, d, d_out, d_s, k, m, .. } = self.header;
        let check = |name: &str, mat: &DenseMatrix, shape: (usize, usize)| {
            if mat.shape() != shape {
                return dim_err(format!("{name} is {:?}, expected {shape:?}", mat.shape()));
            }
            Ok(())
        };
        if self.u.len() != NodeType::COUNT || self.b.len() != NodeType::COUNT {
            return dim_err("U and b need one entry per node type");
        }
        for (u, b) in self.u.iter().zip(&self.b) {
            check("U", u, (d, d_in))?;
            if b.len() != d {
                return dim_err(format!("b has {} entries, expected {d}", b.len()));
            }
        }
        if self.w.len() != k || self.w.iter().any(|hop| hop.len() != m + 1) {
            return dim_err(format!("W must be {k} hops x {} relations (with padding)", m + 1));
        }
        for hop in &self.w {
            for w in hop {
                check("W", w, (d, d))?;
            }
        }
        check("V", &self.v, (d_out, d_in))?;
        check("V_prime", &self.v_prime, (d_out, d))?;
        check("B_hop", &self.b_hop, (d_s, d))?;
        check("P_pool", &self.p_pool, (d_s, d_out))?;
        self.att.validate()?;
        if self.att.m() != m || self.att.d_s() != d_s {
            return dim_err("attention parameters disagree with the header");
        }
        if self.rho.input_dim() != d_s + d_out || self.rho.output_dim() != 1 {
            return dim_err("rho MLP must map d_s + d_out to a scalar");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Every scalar parameter, tensor by tensor, in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        out.extend(self.u.iter().map(DenseMatrix::data));
        out.extend(self.b.iter().map(Vec::as_slice));
        out.extend(self.w.iter().flatten().map(DenseMatrix::data));
        out.push(self.v.data());
        out.push(self.v_prime.data());
        for mlp in [&self.att.f_mlp, &self.att.g_mlp, &self.att.delta_mlp] {
            out.extend(mlp.tensors());
        }
        out.push(self.att.tau.data());
        out.push(self.b_hop.data());
        out.push(self.p_pool.data());
        out.extend(self.rho.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        out.extend(self.u.iter_mut().map(DenseMatrix::data_mut));
        out.extend(self.b.iter_mut().map(Vec::as_mut_slice));
        out.extend(self.w.iter_mut().flatten().map(DenseMatrix::data_mut));
        out.push(self.v.data_mut());
        out.push(self.v_prime.data_mut());
        let att = &mut self.att;
        for mlp in [&mut att.f_mlp, &mut att.g_mlp, &mut att.delta_mlp] {
            out.extend(mlp.tensors_mut());
        }
        out.push(att.tau.data_mut());
        out.push(self.b_hop.data_mut());
        out.push(self.p_pool.data_mut());
        out.extend(self.rho.tensors_mut());
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return dim_err(format!("{} values for {} parameters", flat.len(), self.num_scalars()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    /// Mutable reference to the `index`-th scalar in `to_flat` order.
    pub fn scalar_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for t in self.tensors_mut() {
            if index < t.len() {
                return Some(&mut t[index]);
            }
            index -= t.len();
        }
        None
    }
}

/// Encoder switches. A disabled component is replaced by its neutral element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    #[serde(rename = "K")]
    pub k: usize,
    /// off: every node uses the `U`/`b` of the "other" type
    pub use_type_transform: bool,
    /// off: `delta = tau = 0`
    pub use_rel_attention: bool,
    /// off: `f = g = 0`
    pub use_node_attention: bool,
    pub activation: Activation,
}

impl EncoderConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            use_type_transform: true,
            use_rel_attention: true,
            use_node_attention: true,
            activation: Activation::Tanh,
        }
    }

    pub fn for_params(params: &ModelParams) -> Self {
        Self { activation: params.header.activation, ..Self::new(params.header.k) }
    }

    /// Applies comma separated ablations: `type-transform`, `rel-attention`,
    /// `node-attention`.
    pub fn ablate(mut self, flags: &str) -> Result<Self> {
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "type-transform" => self.use_type_transform = false,
                "rel-attention" => self.use_rel_attention = false,
                "node-attention" => self.use_node_attention = false,
                other => return Err(Error::InvalidArgument(format!("unknown ablation `{other}`"))),
            }
        }
        Ok(self)
    }

    pub fn is_full(&self) -> bool {
        self.use_type_transform && self.use_rel_attention && self.use_node_attention
    }

    /// Parameters with disabled components swapped for their neutral elements.
    pub fn apply<'a>(&self, params: &'a ModelParams) -> Cow<'a, ModelParams> {
        if self.is_full() {
            return Cow::Borrowed(params);
        }
        let mut p = params.clone();
        if !self.use_type_transform {
            let shared = NodeType::Other.index();
            let (u, b) = (p.u[shared].clone(), p.b[shared].clone());
            p.u.iter_mut().for_each(|x| *x = u.clone());
            p.b.iter_mut().for_each(|x| *x = b.clone());
        }
        let (m, d_s, h) = (p.att.m(), p.att.d_s(), p.att.h_att());
        let zero = AttentionParams::zeros(m, d_s, h);
        if !self.use_rel_attention {
            p.att.delta_mlp = zero.delta_mlp;
            p.att.tau = zero.tau;
        }
        if !self.use_node_attention {
            p.att.f_mlp = zero.f_mlp;
            p.att.g_mlp = zero.g_mlp;
        }
        Cow::Owned(p)
    }
}
