use crate::error::{Error, Result};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{BackwardOp, Tensor};

use super::elementwise::sigmoid_scalar;

/// Weights of one GRU direction.
///
/// Input kernels are `[D, H]`, recurrent kernels `[H, H]`, biases `[H]`.
/// Gates: `z` (update), `r` (reset), `h` (candidate).
#[derive(Clone, Debug)]
pub struct GruParams<S: Scalar> {
    pub w_z: Tensor<S>,
    pub w_r: Tensor<S>,
    pub w_h: Tensor<S>,
    pub u_z: Tensor<S>,
    pub u_r: Tensor<S>,
    pub u_h: Tensor<S>,
    pub b_z: Tensor<S>,
    pub b_r: Tensor<S>,
    pub b_h: Tensor<S>,
}

impl<S: Scalar> GruParams<S> {
    fn tensors(&self) -> [&Tensor<S>; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r, &self.b_h,
        ]
    }

    fn hidden(&self) -> usize {
        self.u_z.shape().first().copied().unwrap_or(0)
    }

    fn validate(&self, d: usize) -> Result<usize> {
        let h = self.hidden();
        for (name, t, want) in [
            ("w_z", &self.w_z, [d, h]),
            ("w_r", &self.w_r, [d, h]),
            ("w_h", &self.w_h, [d, h]),
            ("u_z", &self.u_z, [h, h]),
            ("u_r", &self.u_r, [h, h]),
            ("u_h", &self.u_h, [h, h]),
        ] {
            if t.shape() != want {
                return Err(Error::Shape(format!(
                    "gru {name} expected {want:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        for (name, t) in [("b_z", &self.b_z), ("b_r", &self.b_r), ("b_h", &self.b_h)] {
            if t.shape() != [h] {
                return Err(Error::dim(format!("gru {name}"), h, t.numel()));
            }
        }
        Ok(h)
    }
}

struct GruOp<S: Scalar> {
    input: Tensor<S>,
    params: GruParams<S>,
    reverse: bool,
    dims: (usize, usize, usize, usize),
    // per step, indexed [(t * B + b) * H + j]
    z: Vec<S>,
    r: Vec<S>,
    cand: Vec<S>,
    h_prev: Vec<S>,
}

/// `x[B*T, D] · W + b` laid out as `[B*T, H]`.
fn project<S: Scalar>(x: &[S], w: &Tensor<S>, b: &Tensor<S>, rows: usize, d: usize, h: usize) -> Vec<S> {
    let mut out = vec![S::zero(); rows * h];
    let bd = b.data();
    for row in out.chunks_exact_mut(h) {
        row.copy_from_slice(&bd);
    }
    let wd = w.data();
    gemm(
        S::one(),
        MatRef::new(x, rows, d),
        MatRef::new(&wd, d, h),
        S::one(),
        &mut out,
    );
    out
}

impl<S: Scalar> BackwardOp<S> for GruOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        let mut v = vec![&self.input];
        v.extend(self.params.tensors());
        v
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let (b, t_len, d, h) = self.dims;
        let one = S::one();
        let p = &self.params;
        let (uz, ur, uh) = (p.u_z.data(), p.u_r.data(), p.u_h.data());
        let rows = b * t_len;
        let mut da_z = vec![S::zero(); rows * h];
        let mut da_r = vec![S::zero(); rows * h];
        let mut da_h = vec![S::zero(); rows * h];
        let mut gu_z = vec![S::zero(); h * h];
        let mut gu_r = vec![S::zero(); h * h];
        let mut gu_h = vec![S::zero(); h * h];
        let mut carry = vec![S::zero(); b * h];
        let mut step_az = vec![S::zero(); b * h];
        let mut step_ar = vec![S::zero(); b * h];
        let mut step_ah = vec![S::zero(); b * h];
        let mut rh = vec![S::zero(); b * h];
        let mut drh = vec![S::zero(); b * h];
        let mut dh_prev = vec![S::zero(); b * h];

        let steps: Vec<usize> = if self.reverse {
            (0..t_len).collect()
        } else {
            (0..t_len).rev().collect()
        };
        for t in steps {
            let cache = t * b * h..(t + 1) * b * h;
            let (z, r) = (&self.z[cache.clone()], &self.r[cache.clone()]);
            let (cand, hp) = (&self.cand[cache.clone()], &self.h_prev[cache]);
            for bi in 0..b {
                let g_row = &grad[(bi * t_len + t) * h..(bi * t_len + t + 1) * h];
                for (j, &g) in g_row.iter().enumerate() {
                    let k = bi * h + j;
                    let dh = g + carry[k];
                    let dz = dh * (hp[k] - cand[k]);
                    let dcand = dh * (one - z[k]);
                    dh_prev[k] = dh * z[k];
                    step_ah[k] = dcand * (one - cand[k] * cand[k]);
                    step_az[k] = dz * z[k] * (one - z[k]);
                    rh[k] = r[k] * hp[k];
                }
            }
            gemm(
                one,
                MatRef::new(&step_ah, b, h),
                MatRef::new(&uh, h, h).t(),
                S::zero(),
                &mut drh,
            );
            for k in 0..b * h {
                let dr = drh[k] * hp[k];
                dh_prev[k] += drh[k] * r[k];
                step_ar[k] = dr * r[k] * (one - r[k]);
            }
            gemm(
                one,
                MatRef::new(&step_az, b, h),
                MatRef::new(&uz, h, h).t(),
                one,
                &mut dh_prev,
            );
            gemm(
                one,
                MatRef::new(&step_ar, b, h),
                MatRef::new(&ur, h, h).t(),
                one,
                &mut dh_prev,
            );
            gemm(
                one,
                MatRef::new(&rh, b, h).t(),
                MatRef::new(&step_ah, b, h),
                one,
                &mut gu_h,
            );
            gemm(
                one,
                MatRef::new(hp, b, h).t(),
                MatRef::new(&step_az, b, h),
                one,
                &mut gu_z,
            );
            gemm(
                one,
                MatRef::new(hp, b, h).t(),
                MatRef::new(&step_ar, b, h),
                one,
                &mut gu_r,
            );
            for bi in 0..b {
                let dst = (bi * t_len + t) * h;
                da_z[dst..dst + h].copy_from_slice(&step_az[bi * h..(bi + 1) * h]);
                da_r[dst..dst + h].copy_from_slice(&step_ar[bi * h..(bi + 1) * h]);
                da_h[dst..dst + h].copy_from_slice(&step_ah[bi * h..(bi + 1) * h]);
            }
            std::mem::swap(&mut carry, &mut dh_prev);
        }
        drop((uz, ur, uh));

        p.u_z.accumulate_slice(&gu_z);
        p.u_r.accumulate_slice(&gu_r);
        p.u_h.accumulate_slice(&gu_h);
        let x = self.input.data();
        let xmat = MatRef::new(&x, rows, d);
        for (w, bias, da) in [
            (&p.w_z, &p.b_z, &da_z),
            (&p.w_r, &p.b_r, &da_r),
            (&p.w_h, &p.b_h, &da_h),
        ] {
            w.accumulate(|gw| gemm(one, xmat.t(), MatRef::new(da, rows, h), one, gw));
            bias.accumulate(|gb| {
                for row in da.chunks_exact(h) {
                    for (a, &v) in gb.iter_mut().zip(row) {
                        *a += v;
                    }
                }
            });
        }
        if self.input.requires_grad() {
            let mut dx = vec![S::zero(); rows * d];
            for (w, da) in [(&p.w_z, &da_z), (&p.w_r, &da_r), (&p.w_h, &da_h)] {
                let wd = w.data();
                gemm(one, MatRef::new(da, rows, h), MatRef::new(&wd, d, h).t(), one, &mut dx);
            }
            drop(x);
            self.input.accumulate_slice(&dx);
        }
    }
}

/// Single-direction GRU over `[B, T, D]`, returning every hidden state `[B, T, H]`.
///
/// Recurrence with zero initial state:
/// `z = σ(x W_z + h U_z + b_z)`, `r = σ(x W_r + h U_r + b_r)`,
/// `c = tanh(x W_h + (r ⊙ h) U_h + b_h)`, `h' = z ⊙ h + (1 − z) ⊙ c`.
/// With `reverse` the sequence is consumed from the last step and the
/// outputs are written back in original time order.
pub fn gru<S: Scalar>(input: &Tensor<S>, params: &GruParams<S>, reverse: bool) -> Result<Tensor<S>> {
    let xs = input.shape();
    if xs.len() != 3 {
        return Err(Error::Shape(format!("gru input must be [B,T,D], got {xs:?}")));
    }
    let (b, t_len, d) = (xs[0], xs[1], xs[2]);
    if t_len == 0 {
        return Err(Error::Shape("gru needs a sequence of at least one step".into()));
    }
    let h = params.validate(d)?;
    let rows = b * t_len;
    let (xz, xr, xh) = {
        let x = input.data();
        (
            project(&x, &params.w_z, &params.b_z, rows, d, h),
            project(&x, &params.w_r, &params.b_r, rows, d, h),
            project(&x, &params.w_h, &params.b_h, rows, d, h),
        )
    };
    let one = S::one();
    let mut out = vec![S::zero(); rows * h];
    let mut z_all = vec![S::zero(); rows * h];
    let mut r_all = vec![S::zero(); rows * h];
    let mut c_all = vec![S::zero(); rows * h];
    let mut hp_all = vec![S::zero(); rows * h];
    let mut state = vec![S::zero(); b * h];
    let mut az = vec![S::zero(); b * h];
    let mut ar = vec![S::zero(); b * h];
    let mut ac = vec![S::zero(); b * h];
    let mut rh = vec![S::zero(); b * h];
    {
        let (uz, ur, uh) = (params.u_z.data(), params.u_r.data(), params.u_h.data());
        let steps: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        for t in steps {
            for bi in 0..b {
                let src = (bi * t_len + t) * h;
                az[bi * h..(bi + 1) * h].copy_from_slice(&xz[src..src + h]);
                ar[bi * h..(bi + 1) * h].copy_from_slice(&xr[src..src + h]);
                ac[bi * h..(bi + 1) * h].copy_from_slice(&xh[src..src + h]);
            }
            gemm(one, MatRef::new(&state, b, h), MatRef::new(&uz, h, h), one, &mut az);
            gemm(one, MatRef::new(&state, b, h), MatRef::new(&ur, h, h), one, &mut ar);
            let cache = t * b * h;
            for k in 0..b * h {
                let z = sigmoid_scalar(az[k]);
                let r = sigmoid_scalar(ar[k]);
                z_all[cache + k] = z;
                r_all[cache + k] = r;
                hp_all[cache + k] = state[k];
                rh[k] = r * state[k];
            }
            gemm(one, MatRef::new(&rh, b, h), MatRef::new(&uh, h, h), one, &mut ac);
            for bi in 0..b {
                for j in 0..h {
                    let k = bi * h + j;
                    let c = ac[k].tanh();
                    let z = z_all[cache + k];
                    c_all[cache + k] = c;
                    state[k] = z * state[k] + (one - z) * c;
                    out[(bi * t_len + t) * h + j] = state[k];
                }
            }
        }
    }
    Ok(Tensor::from_op(
        vec![b, t_len, h],
        out,
        GruOp {
            input: input.clone(),
            params: params.clone(),
            reverse,
            dims: (b, t_len, d, h),
            z: z_all,
            r: r_all,
            cand: c_all,
            h_prev: hp_all,
        },
    ))
}
