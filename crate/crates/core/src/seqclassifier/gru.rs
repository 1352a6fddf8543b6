use rand::Rng;

use super::linalg::{sigmoid, Matrix};
use super::SeqError;

/// One GRU layer: update gate `z`, reset gate `r`, candidate `ĥ`.
///
/// ```text
/// z = σ(x W_z + h U_z + b_z)
/// r = σ(x W_r + h U_r + b_r)
/// ĥ = tanh(x W_h + (r ⊙ h) U_h + b_h)
/// h' = z ⊙ h + (1 - z) ⊙ ĥ
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_h: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_h: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_h: Vec<f64>,
}

pub const GRU_BLOCKS: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Matrix::zeros(input, hidden),
            w_r: Matrix::zeros(input, hidden),
            w_h: Matrix::zeros(input, hidden),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_h: Matrix::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        }
    }

    /// Glorot-uniform input weights, orthogonal recurrent weights, zero biases.
    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_z: Matrix::glorot_uniform(input, hidden, rng),
            w_r: Matrix::glorot_uniform(input, hidden, rng),
            w_h: Matrix::glorot_uniform(input, hidden, rng),
            u_z: Matrix::orthogonal(hidden, rng),
            u_r: Matrix::orthogonal(hidden, rng),
            u_h: Matrix::orthogonal(hidden, rng),
            b_z: vec![0.0; hidden],
            b_r: vec![0.0; hidden],
            b_h: vec![0.0; hidden],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn check(&self) -> Result<(), SeqError> {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        let consistent = [&self.w_z, &self.w_r, &self.w_h].iter().all(|m| m.shape() == [d, h])
            && [&self.u_z, &self.u_r, &self.u_h].iter().all(|m| m.shape() == [h, h])
            && [&self.b_z, &self.b_r, &self.b_h].iter().all(|b| b.len() == h);
        if consistent {
            Ok(())
        } else {
            Err(SeqError::ShapeMismatch("GRU parameter shapes disagree".into()))
        }
    }

    /// Parameter blocks in checkpoint order.
    pub fn blocks(&self) -> [&[f64]; 9] {
        [
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_h.as_slice(),
            self.u_z.as_slice(),
            self.u_r.as_slice(),
            self.u_h.as_slice(),
            &self.b_z,
            &self.b_r,
            &self.b_h,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_h.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_h.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    pub fn shapes(&self) -> [Vec<usize>; 9] {
        let (d, h) = (self.input_dim(), self.hidden_dim());
        [
            vec![d, h],
            vec![d, h],
            vec![d, h],
            vec![h, h],
            vec![h, h],
            vec![h, h],
            vec![h],
            vec![h],
            vec![h],
        ]
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    hh: Vec<f64>,
    pub(crate) h: Vec<f64>,
}

fn step(p: &GruParams, x: &[f64], h_prev: &[f64]) -> StepCache {
    let mut z = p.b_z.clone();
    p.w_z.vecmul_acc(x, &mut z);
    p.u_z.vecmul_acc(h_prev, &mut z);
    z.iter_mut().for_each(|v| *v = sigmoid(*v));

    let mut r = p.b_r.clone();
    p.w_r.vecmul_acc(x, &mut r);
    p.u_r.vecmul_acc(h_prev, &mut r);
    r.iter_mut().for_each(|v| *v = sigmoid(*v));

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut hh = p.b_h.clone();
    p.w_h.vecmul_acc(x, &mut hh);
    p.u_h.vecmul_acc(&rh, &mut hh);
    hh.iter_mut().for_each(|v| *v = v.tanh());

    let h = (0..hh.len()).map(|i| z[i] * h_prev[i] + (1.0 - z[i]) * hh[i]).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        hh,
        h,
    }
}

pub fn gru_cell(p: &GruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, SeqError> {
    p.check()?;
    if x.len() != p.input_dim() || h_prev.len() != p.hidden_dim() {
        return Err(SeqError::ShapeMismatch(format!(
            "cell expects x of {} and h of {}, got {} and {}",
            p.input_dim(),
            p.hidden_dim(),
            x.len(),
            h_prev.len()
        )));
    }
    Ok(step(p, x, h_prev).h)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GruOutput {
    Full(Vec<Vec<f64>>),
    Final(Vec<f64>),
}

impl GruOutput {
    pub fn last(&self) -> &[f64] {
        match self {
            GruOutput::Full(seq) => seq.last().map(Vec::as_slice).unwrap_or(&[]),
            GruOutput::Final(h) => h,
        }
    }
}

pub(crate) fn check_sequence(p: &GruParams, seq: &[Vec<f64>]) -> Result<(), SeqError> {
    if seq.is_empty() {
        return Err(SeqError::EmptySequence);
    }
    if let Some(bad) = seq.iter().find(|x| x.len() != p.input_dim()) {
        return Err(SeqError::ShapeMismatch(format!(
            "sequence row has {} values, layer expects {}",
            bad.len(),
            p.input_dim()
        )));
    }
    Ok(())
}

/// Runs the layer over the sequence from `h_0 = 0`.
pub fn gru_layer(p: &GruParams, seq: &[Vec<f64>], return_full: bool) -> Result<GruOutput, SeqError> {
    p.check()?;
    check_sequence(p, seq)?;
    let caches = run_layer(p, seq);
    Ok(if return_full {
        GruOutput::Full(caches.into_iter().map(|c| c.h).collect())
    } else {
        GruOutput::Final(caches.into_iter().next_back().map(|c| c.h).unwrap_or_default())
    })
}

pub(crate) fn run_layer(p: &GruParams, seq: &[Vec<f64>]) -> Vec<StepCache> {
    let mut h = vec![0.0; p.hidden_dim()];
    let mut caches = Vec::with_capacity(seq.len());
    for x in seq {
        let c = step(p, x, &h);
        h.clone_from(&c.h);
        caches.push(c);
    }
    caches
}

/// Backpropagation through time. `dh_out[t]` is the loss gradient arriving
/// at step `t`'s output from above. Accumulates into `grad` and returns the
/// gradient with respect to each input row.
pub(crate) fn backward_layer(
    p: &GruParams,
    caches: &[StepCache],
    dh_out: &[Vec<f64>],
    grad: &mut GruParams,
) -> Vec<Vec<f64>> {
    let h = p.hidden_dim();
    let mut dx_all = vec![Vec::new(); caches.len()];
    let mut carry = vec![0.0; h];
    for t in (0..caches.len()).rev() {
        let c = &caches[t];
        let dh: Vec<f64> = (0..h).map(|i| carry[i] + dh_out[t][i]).collect();

        let mut da_z = vec![0.0; h];
        let mut da_h = vec![0.0; h];
        for i in 0..h {
            da_z[i] = dh[i] * (c.h_prev[i] - c.hh[i]) * c.z[i] * (1.0 - c.z[i]);
            da_h[i] = dh[i] * (1.0 - c.z[i]) * (1.0 - c.hh[i] * c.hh[i]);
        }
        let rh: Vec<f64> = c.r.iter().zip(&c.h_prev).map(|(a, b)| a * b).collect();
        let mut d_rh = vec![0.0; h];
        p.u_h.vecmul_t_acc(&da_h, &mut d_rh);
        let da_r: Vec<f64> = (0..h)
            .map(|i| d_rh[i] * c.h_prev[i] * c.r[i] * (1.0 - c.r[i]))
            .collect();

        grad.w_z.add_outer(&c.x, &da_z);
        grad.w_r.add_outer(&c.x, &da_r);
        grad.w_h.add_outer(&c.x, &da_h);
        grad.u_z.add_outer(&c.h_prev, &da_z);
        grad.u_r.add_outer(&c.h_prev, &da_r);
        grad.u_h.add_outer(&rh, &da_h);
        for i in 0..h {
            grad.b_z[i] += da_z[i];
            grad.b_r[i] += da_r[i];
            grad.b_h[i] += da_h[i];
        }

        let mut dh_prev: Vec<f64> = (0..h).map(|i| dh[i] * c.z[i] + d_rh[i] * c.r[i]).collect();
        p.u_z.vecmul_t_acc(&da_z, &mut dh_prev);
        p.u_r.vecmul_t_acc(&da_r, &mut dh_prev);
        carry = dh_prev;

        let mut dx = vec![0.0; p.input_dim()];
        p.w_z.vecmul_t_acc(&da_z, &mut dx);
        p.w_r.vecmul_t_acc(&da_r, &mut dx);
        p.w_h.vecmul_t_acc(&da_h, &mut dx);
        dx_all[t] = dx;
    }
    dx_all
}
