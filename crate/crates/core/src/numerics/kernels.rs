//! Raw convolution arithmetic over flat slices. Zero padding keeps spatial
//! dims; kernels have odd spatial extents so the padding is symmetric.

use super::scalar::Scalar;

/// `x`: [ci, h, w], `k`: [co, ci, kh, kw], `bias`: [co], `out`: [co, h, w].
/// Accumulates `out = conv(x, k) + bias` with zero padding.
pub fn conv2d_forward<S: Scalar>(
    x: &[S],
    (ci, h, w): (usize, usize, usize),
    k: &[S],
    (co, kci, kh, kw): (usize, usize, usize, usize),
    bias: Option<&[S]>,
    out: &mut [S],
) {
    debug_assert_eq!(ci, kci);
    debug_assert_eq!(out.len(), co * h * w);
    let ph = (kh / 2) as isize;
    let pw = (kw / 2) as isize;
    for oc in 0..co {
        let out_c = &mut out[oc * h * w..(oc + 1) * h * w];
        let b = bias.map_or(S::zero(), |b| b[oc]);
        for v in out_c.iter_mut() {
            *v = b;
        }
        for ic in 0..ci {
            let x_c = &x[ic * h * w..(ic + 1) * h * w];
            for dy in 0..kh {
                for dx in 0..kw {
                    let wv = k[((oc * ci + ic) * kh + dy) * kw + dx];
                    let sy = dy as isize - ph;
                    let sx = dx as isize - pw;
                    // out[y][x] += wv * x[y+sy][x+sx] over in-bounds source pixels
                    let y0 = 0.max(-sy) as usize;
                    let y1 = (h as isize).min(h as isize - sy) as usize;
                    let x0 = 0.max(-sx) as usize;
                    let x1 = (w as isize).min(w as isize - sx) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let iy = (y as isize + sy) as usize;
                        let ix0 = (x0 as isize + sx) as usize;
                        let len = x1 - x0;
                        let orow = &mut out_c[y * w + x0..y * w + x0 + len];
                        let irow = &x_c[iy * w + ix0..iy * w + ix0 + len];
                        for (o, &i) in orow.iter_mut().zip(irow) {
                            *o = *o + wv * i;
                        }
                    }
                }
            }
        }
    }
}

/// Gradient of the convolution output w.r.t. its input.
/// `g`: [co, h, w] upstream gradient; accumulates into `dx`: [ci, h, w].
pub fn conv2d_backward_input<S: Scalar>(
    g: &[S],
    (ci, h, w): (usize, usize, usize),
    k: &[S],
    (co, _kci, kh, kw): (usize, usize, usize, usize),
    dx: &mut [S],
) {
    let ph = (kh / 2) as isize;
    let pw = (kw / 2) as isize;
    for oc in 0..co {
        let g_c = &g[oc * h * w..(oc + 1) * h * w];
        for ic in 0..ci {
            let dx_c = &mut dx[ic * h * w..(ic + 1) * h * w];
            for dy in 0..kh {
                for dx_k in 0..kw {
                    let wv = k[((oc * ci + ic) * kh + dy) * kw + dx_k];
                    let sy = dy as isize - ph;
                    let sx = dx_k as isize - pw;
                    // dx[y][x] += wv * g[y-sy][x-sx] over in-bounds g pixels
                    let y0 = 0.max(sy) as usize;
                    let y1 = (h as isize).min(h as isize + sy) as usize;
                    let x0 = 0.max(sx) as usize;
                    let x1 = (w as isize).min(w as isize + sx) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let gy = (y as isize - sy) as usize;
                        let gx0 = (x0 as isize - sx) as usize;
                        let len = x1 - x0;
                        let drow = &mut dx_c[y * w + x0..y * w + x0 + len];
                        let grow = &g_c[gy * w + gx0..gy * w + gx0 + len];
                        for (d, &gv) in drow.iter_mut().zip(grow) {
                            *d = *d + wv * gv;
                        }
                    }
                }
            }
        }
    }
}

/// Gradient w.r.t. the kernel. Accumulates into `dk`: [co, ci, kh, kw].
pub fn conv2d_backward_kernel<S: Scalar>(
    g: &[S],
    x: &[S],
    (ci, h, w): (usize, usize, usize),
    (co, _kci, kh, kw): (usize, usize, usize, usize),
    dk: &mut [S],
) {
    let ph = (kh / 2) as isize;
    let pw = (kw / 2) as isize;
    for oc in 0..co {
        let g_c = &g[oc * h * w..(oc + 1) * h * w];
        for ic in 0..ci {
            let x_c = &x[ic * h * w..(ic + 1) * h * w];
            for dy in 0..kh {
                for dx in 0..kw {
                    let sy = dy as isize - ph;
                    let sx = dx as isize - pw;
                    let y0 = 0.max(-sy) as usize;
                    let y1 = (h as isize).min(h as isize - sy) as usize;
                    let x0 = 0.max(-sx) as usize;
                    let x1 = (w as isize).min(w as isize - sx) as usize;
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = S::zero();
                    for y in y0..y1 {
                        let iy = (y as isize + sy) as usize;
                        let ix0 = (x0 as isize + sx) as usize;
                        let len = x1 - x0;
                        let grow = &g_c[y * w + x0..y * w + x0 + len];
                        let xrow = &x_c[iy * w + ix0..iy * w + ix0 + len];
                        let mut dot = S::zero();
                        for (&gv, &xv) in grow.iter().zip(xrow) {
                            dot = dot + gv * xv;
                        }
                        acc = acc + dot;
                    }
                    let idx = ((oc * ci + ic) * kh + dy) * kw + dx;
                    dk[idx] = dk[idx] + acc;
                }
            }
        }
    }
}

/// Gradient w.r.t. the bias: per-channel sum of the upstream gradient.
pub fn conv2d_backward_bias<S: Scalar>(g: &[S], (co, h, w): (usize, usize, usize), db: &mut [S]) {
    for oc in 0..co {
        let mut acc = S::zero();
        for &v in &g[oc * h * w..(oc + 1) * h * w] {
            acc = acc + v;
        }
        db[oc] = db[oc] + acc;
    }
}
