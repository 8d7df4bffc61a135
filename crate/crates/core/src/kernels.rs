//! Convolution kernels built on im2col/col2im and a strided GEMM.

use alloc::vec;
use alloc::vec::Vec;

use crate::real::Real;

/// Matrix operand: a slice viewed as `rows x cols` with the given strides.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a, F> {
    pub data: &'a [F],
    pub rs: isize,
    pub cs: isize,
}

impl<'a, F> Mat<'a, F> {
    /// Row-major `rows x cols`.
    pub fn rm(data: &'a [F], cols: usize) -> Self {
        Mat {
            data,
            rs: cols as isize,
            cs: 1,
        }
    }

    /// Transpose of a row-major matrix with `cols` columns.
    pub fn rm_t(data: &'a [F], cols: usize) -> Self {
        Mat {
            data,
            rs: 1,
            cs: cols as isize,
        }
    }
}

fn max_offset(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize
}

/// `c (m x n, row-major) = alpha * a (m x k) * b (k x n) + beta * c`.
pub(crate) fn gemm<F: Real>(
    m: usize,
    k: usize,
    n: usize,
    alpha: F,
    a: Mat<'_, F>,
    b: Mat<'_, F>,
    beta: F,
    c: &mut [F],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k == 0 {
        for v in &mut c[..m * n] {
            *v *= beta;
        }
        return;
    }
    assert!(max_offset(m, k, a.rs, a.cs) < a.data.len());
    assert!(max_offset(k, n, b.rs, b.cs) < b.data.len());
    // SAFETY: extents were bounds-checked against the slices above.
    unsafe {
        F::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a square-kernel 2D convolution over one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn col_rows(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    pub fn col_cols(&self) -> usize {
        self.out_height() * self.out_width()
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Valid output columns `lo..hi` for kernel column `kx` (those reading
/// inside the image).
fn valid_span(g: &ConvGeom, kx: usize, wo: usize) -> (usize, usize) {
    let lo = if g.pad > kx {
        (g.pad - kx).div_ceil(g.stride)
    } else {
        0
    };
    let hi = if g.width + g.pad > kx {
        ((g.width + g.pad - kx - 1) / g.stride + 1).min(wo)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Unfolds one `(C, H, W)` image into a `(C*k*k, Ho*Wo)` column matrix whose
/// rows start `ld` elements apart.
pub(crate) fn im2col<F: Real>(x: &[F], g: &ConvGeom, cols: &mut [F], ld: usize) {
    let (ho, wo) = (g.out_height(), g.out_width());
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * ld..row * ld + ho * wo];
                let (lo, hi) = valid_span(g, kx, wo);
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= g.height as isize {
                        line.fill(F::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    line[..lo].fill(F::zero());
                    line[hi..].fill(F::zero());
                    if lo < hi {
                        let first = lo * g.stride + kx - g.pad;
                        if g.stride == 1 {
                            line[lo..hi].copy_from_slice(&src[first..first + hi - lo]);
                        } else {
                            for (j, d) in line[lo..hi].iter_mut().enumerate() {
                                *d = src[first + j * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates a column matrix back into `(C, H, W)`.
pub(crate) fn col2im<F: Real>(cols: &[F], g: &ConvGeom, x: &mut [F], ld: usize) {
    let (ho, wo) = (g.out_height(), g.out_width());
    let k = g.kernel;
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * ld..row * ld + ho * wo];
                let (lo, hi) = valid_span(g, kx, wo);
                if lo >= hi {
                    continue;
                }
                let first = lo * g.stride + kx - g.pad;
                for oy in 0..ho {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let line = &src[oy * wo + lo..oy * wo + hi];
                    for (j, &v) in line.iter().enumerate() {
                        dst[first + j * g.stride] += v;
                    }
                }
            }
        }
    }
}

/// `(N, C, P)` to `(C, N*P)`.
fn to_channel_major<F: Real>(x: &[F], n: usize, c: usize, p: usize) -> Vec<F> {
    let mut out = vec![F::zero(); n * c * p];
    for i in 0..n {
        for ci in 0..c {
            out[(ci * n + i) * p..(ci * n + i + 1) * p]
                .copy_from_slice(&x[(i * c + ci) * p..(i * c + ci + 1) * p]);
        }
    }
    out
}

/// Adds a `(C, N*P)` matrix into `(N, C, P)` storage.
fn add_batch_major<F: Real>(y: &[F], n: usize, c: usize, p: usize, out: &mut [F]) {
    for i in 0..n {
        for ci in 0..c {
            let src = &y[(ci * n + i) * p..(ci * n + i + 1) * p];
            let dst = &mut out[(i * c + ci) * p..(i * c + ci + 1) * p];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
    }
}

/// Column matrix `(C*k*k, N*Ho*Wo)` of a whole batch.
fn batch_cols<F: Real>(x: &[F], n: usize, g: &ConvGeom) -> Vec<F> {
    if g.is_pointwise() {
        return to_channel_major(x, n, g.channels, g.height * g.width);
    }
    let in_len = g.channels * g.height * g.width;
    let (rows, cols_n) = (g.col_rows(), g.col_cols());
    let ld = n * cols_n;
    let mut cols = vec![F::zero(); rows * ld];
    for i in 0..n {
        im2col(&x[i * in_len..(i + 1) * in_len], g, &mut cols[i * cols_n..], ld);
    }
    cols
}

/// Accumulates a batch column matrix into `(N, C, H, W)` storage.
fn add_batch_cols<F: Real>(cols: &[F], n: usize, g: &ConvGeom, x: &mut [F]) {
    if g.is_pointwise() {
        add_batch_major(cols, n, g.channels, g.height * g.width, x);
        return;
    }
    let in_len = g.channels * g.height * g.width;
    let cols_n = g.col_cols();
    let ld = n * cols_n;
    for i in 0..n {
        col2im(&cols[i * cols_n..], g, &mut x[i * in_len..(i + 1) * in_len], ld);
    }
}

fn add_bias<F: Real>(out: &mut [F], bias: &[F], plane: usize) {
    let c = bias.len();
    for (j, chunk) in out.chunks_mut(plane).enumerate() {
        let b = bias[j % c];
        for v in chunk {
            *v += b;
        }
    }
}

fn bias_grad<F: Real>(dout: &[F], plane: usize, db: &mut [F]) {
    let c = db.len();
    for (j, chunk) in dout.chunks(plane).enumerate() {
        db[j % c] += chunk.iter().copied().sum::<F>();
    }
}

/// Forward convolution of a batch. `x: (N, C, H, W)`, `w: (Co, C, k, k)`.
/// Returns `(N, Co, Ho, Wo)` data.
pub(crate) fn conv2d_forward<F: Real>(
    x: &[F],
    n: usize,
    g: &ConvGeom,
    w: &[F],
    out_channels: usize,
    bias: Option<&[F]>,
) -> Vec<F> {
    let (rows, cols_n) = (g.col_rows(), g.col_cols());
    let cols = batch_cols(x, n, g);
    let mut y = vec![F::zero(); out_channels * n * cols_n];
    gemm(
        out_channels,
        rows,
        n * cols_n,
        F::one(),
        Mat::rm(w, rows),
        Mat::rm(&cols, n * cols_n),
        F::zero(),
        &mut y,
    );
    let mut out = vec![F::zero(); n * out_channels * cols_n];
    add_batch_major(&y, n, out_channels, cols_n, &mut out);
    if let Some(b) = bias {
        add_bias(&mut out, b, cols_n);
    }
    out
}

/// Backward of [`conv2d_forward`]. Accumulates into `dx`, `dw`, `db` when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_backward<F: Real>(
    x: &[F],
    n: usize,
    g: &ConvGeom,
    w: &[F],
    out_channels: usize,
    dout: &[F],
    dx: Option<&mut [F]>,
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
) {
    let (rows, cols_n) = (g.col_rows(), g.col_cols());
    let ld = n * cols_n;
    let dy = to_channel_major(dout, n, out_channels, cols_n);
    if let Some(dw) = dw {
        let cols = batch_cols(x, n, g);
        gemm(
            out_channels,
            ld,
            rows,
            F::one(),
            Mat::rm(&dy, ld),
            Mat::rm_t(&cols, ld),
            F::one(),
            dw,
        );
    }
    if let Some(dx) = dx {
        let mut dcols = vec![F::zero(); rows * ld];
        gemm(
            rows,
            out_channels,
            ld,
            F::one(),
            Mat::rm_t(w, rows),
            Mat::rm(&dy, ld),
            F::zero(),
            &mut dcols,
        );
        add_batch_cols(&dcols, n, g, dx);
    }
    if let Some(db) = db {
        bias_grad(dout, cols_n, db);
    }
}

/// Forward transposed convolution. `x: (N, Ci, Hi, Wi)`, `w: (Ci, Co, k, k)`.
///
/// `g` describes the *output* image as the input of the adjoint convolution,
/// so `g.out_height() == Hi`. Returns `(N, Co, H, W)` data.
pub(crate) fn conv_transpose2d_forward<F: Real>(
    x: &[F],
    n: usize,
    in_channels: usize,
    g: &ConvGeom,
    w: &[F],
    bias: Option<&[F]>,
) -> Vec<F> {
    let (rows, cols_n) = (g.col_rows(), g.col_cols());
    let ld = n * cols_n;
    let xc = to_channel_major(x, n, in_channels, cols_n);
    let mut cols = vec![F::zero(); rows * ld];
    gemm(
        rows,
        in_channels,
        ld,
        F::one(),
        Mat::rm_t(w, rows),
        Mat::rm(&xc, ld),
        F::zero(),
        &mut cols,
    );
    let mut out = vec![F::zero(); n * g.channels * g.height * g.width];
    add_batch_cols(&cols, n, g, &mut out);
    if let Some(b) = bias {
        add_bias(&mut out, b, g.height * g.width);
    }
    out
}

/// Backward of [`conv_transpose2d_forward`].
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_transpose2d_backward<F: Real>(
    x: &[F],
    n: usize,
    in_channels: usize,
    g: &ConvGeom,
    w: &[F],
    dout: &[F],
    dx: Option<&mut [F]>,
    dw: Option<&mut [F]>,
    db: Option<&mut [F]>,
) {
    let (rows, cols_n) = (g.col_rows(), g.col_cols());
    let ld = n * cols_n;
    let dcols = batch_cols(dout, n, g);
    if let Some(dx) = dx {
        let mut dxc = vec![F::zero(); in_channels * ld];
        gemm(
            in_channels,
            rows,
            ld,
            F::one(),
            Mat::rm(w, rows),
            Mat::rm(&dcols, ld),
            F::zero(),
            &mut dxc,
        );
        add_batch_major(&dxc, n, in_channels, cols_n, dx);
    }
    if let Some(dw) = dw {
        let xc = to_channel_major(x, n, in_channels, cols_n);
        gemm(
            in_channels,
            ld,
            rows,
            F::one(),
            Mat::rm(&xc, ld),
            Mat::rm_t(&dcols, ld),
            F::one(),
            dw,
        );
    }
    if let Some(db) = db {
        bias_grad(dout, g.height * g.width, db);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(
        x: &[f64],
        c: usize,
        h: usize,
        wd: usize,
        w: &[f64],
        co: usize,
        k: usize,
        s: usize,
        p: usize,
    ) -> Vec<f64> {
        let ho = (h + 2 * p - k) / s + 1;
        let wo = (wd + 2 * p - k) / s + 1;
        let mut out = vec![0.0; co * ho * wo];
        for o in 0..co {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let iy = (oy * s + ky) as isize - p as isize;
                                let ix = (ox * s + kx) as isize - p as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                    acc += x[(ci * h + iy as usize) * wd + ix as usize]
                                        * w[((o * c + ci) * k + ky) * k + kx];
                                }
                            }
                        }
                    }
                    out[(o * ho + oy) * wo + ox] = acc;
                }
            }
        }
        out
    }

    fn seq(n: usize, scale: f64) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 23) as f64 * scale - 0.5).collect()
    }

    #[test]
    fn conv_matches_direct_loops() {
        for &(c, h, w, co, k, s, p) in &[
            (2, 5, 6, 3, 3, 1, 1),
            (1, 8, 8, 4, 4, 2, 1),
            (3, 4, 4, 2, 1, 1, 0),
            (2, 7, 5, 2, 3, 2, 0),
        ] {
            let x = seq(c * h * w, 0.05);
            let wt = seq(co * c * k * k, 0.03);
            let g = ConvGeom {
                channels: c,
                height: h,
                width: w,
                kernel: k,
                stride: s,
                pad: p,
            };
            let got = conv2d_forward(&x, 1, &g, &wt, co, None);
            let want = naive_conv(&x, c, h, w, &wt, co, k, s, p);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transposed_conv_is_adjoint_of_conv() {
        // <conv(x), y> == <x, convT(y)> with the same kernel.
        let (c, h, w, co, k, s, p) = (2, 8, 8, 3, 4, 2, 1);
        let g = ConvGeom {
            channels: c,
            height: h,
            width: w,
            kernel: k,
            stride: s,
            pad: p,
        };
        let x = seq(c * h * w, 0.05);
        let y = seq(co * g.col_cols(), 0.07);
        // conv weight (co, c, k, k); transposed weight (co, c, k, k) read as (Ci=co, Co=c).
        let wt = seq(co * c * k * k, 0.03);
        let cx = conv2d_forward(&x, 1, &g, &wt, co, None);
        let ty = conv_transpose2d_forward(&y, 1, co, &g, &wt, None);
        let lhs: f64 = cx.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn batched_kernels_match_per_sample_calls() {
        let n = 3;
        for &(c, h, w, co, k, s, p) in &[(2, 6, 6, 3, 3, 1, 1), (3, 8, 8, 2, 4, 2, 1), (4, 3, 3, 2, 1, 1, 0)] {
            let g = ConvGeom {
                channels: c,
                height: h,
                width: w,
                kernel: k,
                stride: s,
                pad: p,
            };
            let in_len = c * h * w;
            let out_len = co * g.col_cols();
            let x = seq(n * in_len, 0.05);
            let wt = seq(co * c * k * k, 0.03);
            let b = seq(co, 0.1);
            let dy = seq(n * out_len, 0.02);
            let batched = conv2d_forward(&x, n, &g, &wt, co, Some(&b));
            let (mut dx, mut dw, mut db) = (vec![0.0; n * in_len], vec![0.0; wt.len()], vec![0.0; co]);
            conv2d_backward(&x, n, &g, &wt, co, &dy, Some(&mut dx), Some(&mut dw), Some(&mut db));
            let (mut dx1, mut dw1, mut db1) = (vec![0.0; n * in_len], vec![0.0; wt.len()], vec![0.0; co]);
            for i in 0..n {
                let xi = &x[i * in_len..(i + 1) * in_len];
                let one = conv2d_forward(xi, 1, &g, &wt, co, Some(&b));
                assert_eq!(&batched[i * out_len..(i + 1) * out_len], &one[..]);
                let dyi = &dy[i * out_len..(i + 1) * out_len];
                conv2d_backward(xi, 1, &g, &wt, co, dyi, Some(&mut dx1[i * in_len..(i + 1) * in_len]), Some(&mut dw1), Some(&mut db1));
            }
            for (a, b) in dx.iter().chain(&dw).chain(&db).zip(dx1.iter().chain(&dw1).chain(&db1)) {
                assert!((a - b).abs() < 1e-12);
            }

            // transposed: input lives on the conv output grid
            let xt = seq(n * out_len, 0.04);
            let dyt = seq(n * in_len, 0.03);
            let bt = seq(c, 0.2);
            let batched = conv_transpose2d_forward(&xt, n, co, &g, &wt, Some(&bt));
            let (mut dx, mut dw, mut db) = (vec![0.0; n * out_len], vec![0.0; wt.len()], vec![0.0; c]);
            conv_transpose2d_backward(&xt, n, co, &g, &wt, &dyt, Some(&mut dx), Some(&mut dw), Some(&mut db));
            let (mut dx1, mut dw1, mut db1) = (vec![0.0; n * out_len], vec![0.0; wt.len()], vec![0.0; c]);
            for i in 0..n {
                let xi = &xt[i * out_len..(i + 1) * out_len];
                let one = conv_transpose2d_forward(xi, 1, co, &g, &wt, Some(&bt));
                assert_eq!(&batched[i * in_len..(i + 1) * in_len], &one[..]);
                let dyi = &dyt[i * in_len..(i + 1) * in_len];
                conv_transpose2d_backward(xi, 1, co, &g, &wt, dyi, Some(&mut dx1[i * out_len..(i + 1) * out_len]), Some(&mut dw1), Some(&mut db1));
            }
            for (a, b) in dx.iter().chain(&dw).chain(&db).zip(dx1.iter().chain(&dw1).chain(&db1)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
