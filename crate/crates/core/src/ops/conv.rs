use crate::error::{Error, Result};
use crate::scalar::{gemm, MatRef, Scalar};
use crate::tensor::{BackwardOp, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Padding {
    /// Zero padding that preserves the spatial size; kernel dims must be odd.
    #[default]
    Same,
    Valid,
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    batch: usize,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn col_rows(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    /// Pointwise kernel without padding reads the input image directly.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.ph == 0 && self.pw == 0
    }
}

fn im2col<S: Scalar>(g: &Geometry, image: &[S], col: &mut [S]) {
    let npos = g.positions();
    for ci in 0..g.c_in {
        let plane = &image[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let dst = &mut col[row * npos..(row + 1) * npos];
                // output columns whose input column lands inside the image
                let lo = g.pw.saturating_sub(kj).min(g.ow);
                let hi = (g.w + g.pw).saturating_sub(kj).min(g.ow).max(lo);
                for oy in 0..g.oh {
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    let iy = oy + ki;
                    if iy < g.ph || iy - g.ph >= g.h {
                        line.fill(S::zero());
                        continue;
                    }
                    let src = &plane[(iy - g.ph) * g.w..(iy - g.ph + 1) * g.w];
                    line[..lo].fill(S::zero());
                    line[hi..].fill(S::zero());
                    if hi > lo {
                        let start = lo + kj - g.pw;
                        line[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                    }
                }
            }
        }
    }
}

fn col2im<S: Scalar>(g: &Geometry, col: &[S], image: &mut [S]) {
    let npos = g.positions();
    for ci in 0..g.c_in {
        let plane = &mut image[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let src = &col[row * npos..(row + 1) * npos];
                let lo = g.pw.saturating_sub(kj).min(g.ow);
                let hi = (g.w + g.pw).saturating_sub(kj).min(g.ow).max(lo);
                if hi <= lo {
                    continue;
                }
                for oy in 0..g.oh {
                    let iy = oy + ki;
                    if iy < g.ph || iy - g.ph >= g.h {
                        continue;
                    }
                    let line = &src[oy * g.ow..(oy + 1) * g.ow];
                    let start = lo + kj - g.pw;
                    let dst = &mut plane[(iy - g.ph) * g.w + start..(iy - g.ph) * g.w + start + (hi - lo)];
                    for (d, &s) in dst.iter_mut().zip(&line[lo..hi]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

struct Conv2dOp<S: Scalar> {
    input: Tensor<S>,
    weight: Tensor<S>,
    bias: Option<Tensor<S>>,
    geo: Geometry,
}

impl<S: Scalar> BackwardOp<S> for Conv2dOp<S> {
    fn inputs(&self) -> Vec<&Tensor<S>> {
        let mut v = vec![&self.input, &self.weight];
        if let Some(b) = &self.bias {
            v.push(b);
        }
        v
    }

    fn backward(&self, _out: &[S], grad: &[S]) {
        let g = self.geo;
        let (rows, npos) = (g.col_rows(), g.positions());
        let in_plane = g.c_in * g.h * g.w;
        let out_plane = g.c_out * npos;
        let x = self.input.data();
        let w = self.weight.data();
        let need_w = self.weight.requires_grad();
        let need_x = self.input.requires_grad();

        let mut gw = vec![S::zero(); w.len()];
        let mut gx = if need_x { vec![S::zero(); x.len()] } else { Vec::new() };
        let mut col = if g.is_pointwise() {
            Vec::new()
        } else {
            vec![S::zero(); rows * npos]
        };
        let mut dcol = if need_x && !g.is_pointwise() {
            vec![S::zero(); rows * npos]
        } else {
            Vec::new()
        };

        for b in 0..g.batch {
            let gout = &grad[b * out_plane..(b + 1) * out_plane];
            let image = &x[b * in_plane..(b + 1) * in_plane];
            if need_w {
                let cols: &[S] = if g.is_pointwise() {
                    image
                } else {
                    im2col(&g, image, &mut col);
                    &col
                };
                // dW += dOut · colᵀ
                gemm(
                    S::one(),
                    MatRef::new(gout, g.c_out, npos),
                    MatRef::new(cols, rows, npos).t(),
                    S::one(),
                    &mut gw,
                );
            }
            if need_x {
                let wmat = MatRef::new(&w, g.c_out, rows).t();
                if g.is_pointwise() {
                    let dst = &mut gx[b * in_plane..(b + 1) * in_plane];
                    gemm(S::one(), wmat, MatRef::new(gout, g.c_out, npos), S::one(), dst);
                } else {
                    gemm(S::one(), wmat, MatRef::new(gout, g.c_out, npos), S::zero(), &mut dcol);
                    col2im(&g, &dcol, &mut gx[b * in_plane..(b + 1) * in_plane]);
                }
            }
        }
        drop(x);
        drop(w);
        if need_w {
            self.weight.accumulate_slice(&gw);
        }
        if need_x {
            self.input.accumulate_slice(&gx);
        }
        if let Some(bias) = &self.bias {
            bias.accumulate(|gb| {
                for item in grad.chunks(out_plane) {
                    for (acc, plane) in gb.iter_mut().zip(item.chunks(npos)) {
                        *acc += plane.iter().copied().sum::<S>();
                    }
                }
            });
        }
    }
}

/// 2-D cross-correlation over `[B, C_in, H, W]` with a `[C_out, C_in, kH, kW]` kernel.
pub fn conv2d<S: Scalar>(
    input: &Tensor<S>,
    weight: &Tensor<S>,
    bias: Option<&Tensor<S>>,
    padding: Padding,
) -> Result<Tensor<S>> {
    let (xs, ws) = (input.shape(), weight.shape());
    if xs.len() != 4 {
        return Err(Error::Shape(format!("conv2d input must be [B,C,H,W], got {xs:?}")));
    }
    if ws.len() != 4 {
        return Err(Error::Shape(format!("conv2d weight must be [Co,Ci,kH,kW], got {ws:?}")));
    }
    if ws[1] != xs[1] {
        return Err(Error::dim("input channels", ws[1], xs[1]));
    }
    let (kh, kw) = (ws[2], ws[3]);
    let (ph, pw) = match padding {
        Padding::Same => {
            if kh % 2 == 0 {
                return Err(Error::Shape(format!(
                    "same padding needs an odd kernel height, got {kh}"
                )));
            }
            if kw % 2 == 0 {
                return Err(Error::Shape(format!(
                    "same padding needs an odd kernel width, got {kw}"
                )));
            }
            (kh / 2, kw / 2)
        }
        Padding::Valid => (0, 0),
    };
    let (h, w) = (xs[2], xs[3]);
    if h + 2 * ph < kh {
        return Err(Error::dim("height", kh, h));
    }
    if w + 2 * pw < kw {
        return Err(Error::dim("width", kw, w));
    }
    if let Some(b) = bias {
        if b.shape() != [ws[0]] {
            return Err(Error::dim("bias", ws[0], b.numel()));
        }
    }
    let geo = Geometry {
        batch: xs[0],
        c_in: xs[1],
        c_out: ws[0],
        h,
        w,
        kh,
        kw,
        ph,
        pw,
        oh: h + 2 * ph - kh + 1,
        ow: w + 2 * pw - kw + 1,
    };
    let (rows, npos) = (geo.col_rows(), geo.positions());
    let in_plane = geo.c_in * h * w;
    let out_plane = geo.c_out * npos;
    let mut out = vec![S::zero(); geo.batch * out_plane];
    {
        let x = input.data();
        let wd = weight.data();
        let bd = bias.map(|b| b.data());
        let mut col = if geo.is_pointwise() {
            Vec::new()
        } else {
            vec![S::zero(); rows * npos]
        };
        for b in 0..geo.batch {
            let image = &x[b * in_plane..(b + 1) * in_plane];
            let dst = &mut out[b * out_plane..(b + 1) * out_plane];
            if let Some(bd) = &bd {
                for co in 0..geo.c_out {
                    dst[co * npos..(co + 1) * npos].fill(bd[co]);
                }
            }
            let cols: &[S] = if geo.is_pointwise() {
                image
            } else {
                im2col(&geo, image, &mut col);
                &col
            };
            gemm(
                S::one(),
                MatRef::new(&wd, geo.c_out, rows),
                MatRef::new(cols, rows, npos),
                S::one(),
                dst,
            );
        }
    }
    Ok(Tensor::from_op(
        vec![geo.batch, geo.c_out, geo.oh, geo.ow],
        out,
        Conv2dOp {
            input: input.clone(),
            weight: weight.clone(),
            bias: bias.cloned(),
            geo,
        },
    ))
}
