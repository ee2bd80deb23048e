"""Vectorized numpy implementations of the hot kernels.

Shared conventions with the compiled core (``_core.pyx``):

* arrays are C-contiguous float64,
* convolution is cross-correlation with zero padding,
* unfold/neighborhood channel layout is ``channel * (k*k) + patch_index``
  with the patch scanned row-major over (dy, dx),
* offset fields carry 9 (dy, dx) pairs, channel ``2*p`` is dy of point p.
"""

import numpy as np

NAME = "numpy"

# Canonical 3x3 sampling grid, row-major over (dy, dx).
_GRID_DY = np.repeat(np.arange(-1.0, 2.0), 3)
_GRID_DX = np.tile(np.arange(-1.0, 2.0), 3)


def conv2d_fwd(x, w, b, stride, pad, groups):
    n, cin, h, wd = x.shape
    cout, cin_g, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    cols = _im2col(x, kh, kw, stride, pad, ho, wo)
    if groups == 1:
        wmat = w.reshape(cout, cin * kh * kw)
        y = np.matmul(wmat, cols.reshape(n, cin * kh * kw, ho * wo))
        y = y.reshape(n, cout, ho, wo)
    else:
        cols_g = cols.reshape(n, groups, cin_g, kh, kw, ho, wo)
        w_g = w.reshape(groups, cout // groups, cin_g, kh, kw)
        y = np.einsum("ngiuvhw,goiuv->ngohw", cols_g, w_g, optimize=True)
        y = y.reshape(n, cout, ho, wo)
    if b is not None:
        y = y + b.reshape(1, cout, 1, 1)
    return np.ascontiguousarray(y)


def conv2d_bwd(x, w, gy, stride, pad, groups, with_bias):
    n, cin, h, wd = x.shape
    cout, cin_g, kh, kw = w.shape
    ho, wo = gy.shape[2], gy.shape[3]
    cols = _im2col(x, kh, kw, stride, pad, ho, wo)
    if groups == 1:
        gy2 = gy.reshape(n, cout, ho * wo)
        cols2 = cols.reshape(n, cin * kh * kw, ho * wo)
        gw = np.einsum("nos,nks->ok", gy2, cols2, optimize=True)
        gw = gw.reshape(cout, cin, kh, kw)
        gcols = np.matmul(w.reshape(cout, -1).T, gy2).reshape(n, cin, kh, kw, ho, wo)
    else:
        cols_g = cols.reshape(n, groups, cin_g, kh, kw, ho, wo)
        gy_g = gy.reshape(n, groups, cout // groups, ho, wo)
        w_g = w.reshape(groups, cout // groups, cin_g, kh, kw)
        gw = np.einsum("ngohw,ngiuvhw->goiuv", gy_g, cols_g, optimize=True)
        gw = gw.reshape(cout, cin_g, kh, kw)
        gcols = np.einsum("ngohw,goiuv->ngiuvhw", gy_g, w_g, optimize=True)
        gcols = gcols.reshape(n, cin, kh, kw, ho, wo)
    gx = _col2im(gcols, (n, cin, h, wd), stride, pad)
    gb = gy.sum(axis=(0, 2, 3)) if with_bias else None
    return gx, np.ascontiguousarray(gw), gb


def unfold_fwd(x, k, pad):
    n, c, h, wd = x.shape
    cols = _im2col(x, k, k, 1, pad, h, wd)
    return np.ascontiguousarray(cols.reshape(n, c * k * k, h, wd))


def unfold_bwd(in_shape, k, pad, gy):
    n, c, h, wd = in_shape
    gcols = gy.reshape(n, c, k, k, h, wd)
    return _col2im(gcols, in_shape, 1, pad)


def gather_fwd(feat, off):
    """Deformable 9-point gather with bilinear interpolation.

    feat: [n, c, h, w]; off: [n, 18, h, w] -> [n, c*9, h, w].
    Coordinates outside the map contribute zero.
    """
    n, c, h, wd = feat.shape
    yy, xx, y0, x0, ty, tx = _sample_coords(off, h, wd)
    flat = feat.reshape(n, c, h * wd)
    out = np.zeros((n, c, 9, h, wd))
    for ay in (0, 1):
        wy = ty if ay else 1.0 - ty
        for ax in (0, 1):
            wx = tx if ax else 1.0 - tx
            vals, weight = _corner(flat, y0 + ay, x0 + ax, wy * wx, h, wd)
            out += vals * weight[:, None]
    return np.ascontiguousarray(out.reshape(n, c * 9, h, wd))


def gather_bwd(feat, off, gy):
    n, c, h, wd = feat.shape
    yy, xx, y0, x0, ty, tx = _sample_coords(off, h, wd)
    g = gy.reshape(n, c, 9, h, wd)
    flat = feat.reshape(n, c, h * wd)
    gfeat = np.zeros(n * c * h * wd)
    gty = np.zeros((n, 9, h, wd))
    gtx = np.zeros((n, 9, h, wd))
    nc_base = (np.arange(n)[:, None, None, None, None] * c
               + np.arange(c)[None, :, None, None, None]) * (h * wd)
    for ay in (0, 1):
        wy = ty if ay else 1.0 - ty
        sy = 1.0 if ay else -1.0
        for ax in (0, 1):
            wx = tx if ax else 1.0 - tx
            sx = 1.0 if ax else -1.0
            yc = y0 + ay
            xc = x0 + ax
            valid = (yc >= 0) & (yc < h) & (xc >= 0) & (xc < wd)
            lin = np.clip(yc, 0, h - 1) * wd + np.clip(xc, 0, wd - 1)
            vals = np.take_along_axis(
                flat, lin.reshape(n, 1, 9 * h * wd), axis=2
            ).reshape(n, c, 9, h, wd) * valid[:, None]
            # feature gradient: scatter g * (wy*wx) into the corner pixels
            contrib = (g * (wy * wx * valid)[:, None]).ravel()
            idx = np.broadcast_to(nc_base + lin[:, None], (n, c, 9, h, wd)).ravel()
            gfeat += np.bincount(idx, weights=contrib, minlength=gfeat.size)
            # offset gradient via d/dty, d/dtx of the bilinear weights
            gsum = (g * vals).sum(axis=1)
            gty += gsum * (sy * wx)
            gtx += gsum * (sx * wy)
    goff = np.empty((n, 18, h, wd))
    goff[:, 0::2] = gty
    goff[:, 1::2] = gtx
    return gfeat.reshape(n, c, h, wd), goff


def dynconv_fwd(q, f, groups, k):
    """Per-position grouped filter application.

    q: [n, c, h, w]; f: [n, g*k*k, h, w] -> [n, c, h, w], where channel ch
    uses the filter of group ch // (c/groups), zero padding for k > 1.
    """
    n, c, h, wd = q.shape
    patches = _im2col(q, k, k, 1, k // 2, h, wd)  # [n, c, k, k, h, w]
    pr = patches.reshape(n, groups, c // groups, k * k, h, wd)
    fr = f.reshape(n, groups, k * k, h, wd)
    y = np.einsum("ngcshw,ngshw->ngchw", pr, fr, optimize=True)
    return np.ascontiguousarray(y.reshape(n, c, h, wd))


def dynconv_bwd(q, f, groups, k, gy):
    n, c, h, wd = q.shape
    patches = _im2col(q, k, k, 1, k // 2, h, wd)
    pr = patches.reshape(n, groups, c // groups, k * k, h, wd)
    fr = f.reshape(n, groups, k * k, h, wd)
    gr = gy.reshape(n, groups, c // groups, h, wd)
    gf = np.einsum("ngchw,ngcshw->ngshw", gr, pr, optimize=True)
    gf = gf.reshape(n, groups * k * k, h, wd)
    gpatch = np.einsum("ngchw,ngshw->ngcshw", gr, fr, optimize=True)
    gpatch = gpatch.reshape(n, c, k, k, h, wd)
    gq = _col2im(gpatch, q.shape, 1, k // 2)
    return gq, np.ascontiguousarray(gf)


def _im2col(x, kh, kw, stride, pad, ho, wo):
    n, c, h, wd = x.shape
    if pad:
        xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
        xp[:, :, pad:pad + h, pad:pad + wd] = x
    else:
        xp = x
    cols = np.empty((n, c, kh, kw, ho, wo))
    for u in range(kh):
        for v in range(kw):
            cols[:, :, u, v] = xp[:, :, u:u + stride * ho:stride,
                                  v:v + stride * wo:stride]
    return cols


def _col2im(gcols, in_shape, stride, pad):
    n, c, h, wd = in_shape
    kh, kw = gcols.shape[2], gcols.shape[3]
    ho, wo = gcols.shape[4], gcols.shape[5]
    gxp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad))
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + stride * ho:stride,
                v:v + stride * wo:stride] += gcols[:, :, u, v]
    return np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wd])


def _sample_coords(off, h, wd):
    n = off.shape[0]
    ii = np.arange(h, dtype=np.float64)[:, None]
    jj = np.arange(wd, dtype=np.float64)[None, :]
    yy = ii + _GRID_DY[None, :, None, None] + off[:, 0::2]
    xx = jj + _GRID_DX[None, :, None, None] + off[:, 1::2]
    y0 = np.floor(yy).astype(np.int64)
    x0 = np.floor(xx).astype(np.int64)
    return yy, xx, y0, x0, yy - y0, xx - x0


def _corner(flat, yc, xc, weight, h, wd):
    n = flat.shape[0]
    valid = (yc >= 0) & (yc < h) & (xc >= 0) & (xc < wd)
    lin = np.clip(yc, 0, h - 1) * wd + np.clip(xc, 0, wd - 1)
    vals = np.take_along_axis(flat, lin.reshape(n, 1, lin[0].size), axis=2)
    vals = vals.reshape(n, flat.shape[1], *yc.shape[1:])
    return vals, weight * valid
