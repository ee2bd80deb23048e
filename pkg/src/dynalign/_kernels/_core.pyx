# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel core. Mirrors numpy_backend's signatures and conventions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

NAME = "cython"


def conv2d_fwd(double[:, :, :, ::1] x, double[:, :, :, ::1] w, b,
               int stride, int pad, int groups):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cin_g = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * pad - kw) // stride + 1
    cdef Py_ssize_t cout_g = cout // groups
    out = np.zeros((n, cout, ho, wo))
    cdef double[:, :, :, ::1] y = out
    cdef double[::1] bv
    cdef bint with_bias = b is not None
    if with_bias:
        bv = b
    cdef Py_ssize_t b_i, g, co, ci, u, v, i, j, yy, xx
    cdef double wgt
    for b_i in range(n):
        for g in range(groups):
            for co in range(cout_g):
                for ci in range(cin_g):
                    for u in range(kh):
                        for v in range(kw):
                            wgt = w[g * cout_g + co, ci, u, v]
                            if wgt == 0.0:
                                continue
                            for i in range(ho):
                                yy = i * stride + u - pad
                                if yy < 0 or yy >= h:
                                    continue
                                for j in range(wo):
                                    xx = j * stride + v - pad
                                    if 0 <= xx < wd:
                                        y[b_i, g * cout_g + co, i, j] += \
                                            wgt * x[b_i, g * cin_g + ci, yy, xx]
    if with_bias:
        for b_i in range(n):
            for co in range(cout):
                for i in range(ho):
                    for j in range(wo):
                        y[b_i, co, i, j] += bv[co]
    return out


def conv2d_bwd(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
               double[:, :, :, ::1] gy, int stride, int pad, int groups,
               bint with_bias):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], cin_g = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t cout_g = cout // groups
    gx_arr = np.zeros((n, cin, h, wd))
    gw_arr = np.zeros((cout, cin_g, kh, kw))
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b_i, g, co, ci, u, v, i, j, yy, xx
    cdef double go, wgt
    for b_i in range(n):
        for g in range(groups):
            for co in range(cout_g):
                for i in range(ho):
                    for j in range(wo):
                        go = gy[b_i, g * cout_g + co, i, j]
                        if go == 0.0:
                            continue
                        for ci in range(cin_g):
                            for u in range(kh):
                                yy = i * stride + u - pad
                                if yy < 0 or yy >= h:
                                    continue
                                for v in range(kw):
                                    xx = j * stride + v - pad
                                    if 0 <= xx < wd:
                                        gw[g * cout_g + co, ci, u, v] += \
                                            go * x[b_i, g * cin_g + ci, yy, xx]
                                        gx[b_i, g * cin_g + ci, yy, xx] += \
                                            go * w[g * cout_g + co, ci, u, v]
    gb = None
    if with_bias:
        gb = np.asarray(gy).sum(axis=(0, 2, 3))
    return gx_arr, gw_arr, gb


def unfold_fwd(double[:, :, :, ::1] x, int k, int pad):
    cdef Py_ssize_t n = x.shape[0], c = x.shape[1], h = x.shape[2], wd = x.shape[3]
    out = np.zeros((n, c * k * k, h, wd))
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t b_i, ci, u, v, i, j, yy, xx
    for b_i in range(n):
        for ci in range(c):
            for u in range(k):
                for v in range(k):
                    for i in range(h):
                        yy = i + u - pad
                        if yy < 0 or yy >= h:
                            continue
                        for j in range(wd):
                            xx = j + v - pad
                            if 0 <= xx < wd:
                                y[b_i, ci * k * k + u * k + v, i, j] = x[b_i, ci, yy, xx]
    return out


def unfold_bwd(in_shape, int k, int pad, double[:, :, :, ::1] gy):
    cdef Py_ssize_t n = in_shape[0], c = in_shape[1], h = in_shape[2], wd = in_shape[3]
    out = np.zeros((n, c, h, wd))
    cdef double[:, :, :, ::1] gx = out
    cdef Py_ssize_t b_i, ci, u, v, i, j, yy, xx
    for b_i in range(n):
        for ci in range(c):
            for u in range(k):
                for v in range(k):
                    for i in range(h):
                        yy = i + u - pad
                        if yy < 0 or yy >= h:
                            continue
                        for j in range(wd):
                            xx = j + v - pad
                            if 0 <= xx < wd:
                                gx[b_i, ci, yy, xx] += gy[b_i, ci * k * k + u * k + v, i, j]
    return out


def gather_fwd(double[:, :, :, ::1] feat, double[:, :, :, ::1] off):
    cdef Py_ssize_t n = feat.shape[0], c = feat.shape[1], h = feat.shape[2], wd = feat.shape[3]
    out = np.zeros((n, c * 9, h, wd))
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t b_i, p, i, j, ci, y0, x0
    cdef double yy, xx, ty, tx, w00, w01, w10, w11, v
    for b_i in range(n):
        for p in range(9):
            for i in range(h):
                for j in range(wd):
                    yy = i + (p // 3 - 1) + off[b_i, 2 * p, i, j]
                    xx = j + (p % 3 - 1) + off[b_i, 2 * p + 1, i, j]
                    y0 = <Py_ssize_t>floor(yy)
                    x0 = <Py_ssize_t>floor(xx)
                    ty = yy - y0
                    tx = xx - x0
                    w00 = (1 - ty) * (1 - tx)
                    w01 = (1 - ty) * tx
                    w10 = ty * (1 - tx)
                    w11 = ty * tx
                    for ci in range(c):
                        v = 0.0
                        if 0 <= y0 < h:
                            if 0 <= x0 < wd:
                                v += w00 * feat[b_i, ci, y0, x0]
                            if 0 <= x0 + 1 < wd:
                                v += w01 * feat[b_i, ci, y0, x0 + 1]
                        if 0 <= y0 + 1 < h:
                            if 0 <= x0 < wd:
                                v += w10 * feat[b_i, ci, y0 + 1, x0]
                            if 0 <= x0 + 1 < wd:
                                v += w11 * feat[b_i, ci, y0 + 1, x0 + 1]
                        y[b_i, ci * 9 + p, i, j] = v
    return out


def gather_bwd(double[:, :, :, ::1] feat, double[:, :, :, ::1] off,
               double[:, :, :, ::1] gy):
    cdef Py_ssize_t n = feat.shape[0], c = feat.shape[1], h = feat.shape[2], wd = feat.shape[3]
    gf_arr = np.zeros((n, c, h, wd))
    go_arr = np.zeros((n, 18, h, wd))
    cdef double[:, :, :, ::1] gf = gf_arr
    cdef double[:, :, :, ::1] go = go_arr
    cdef Py_ssize_t b_i, p, i, j, ci, y0, x0
    cdef double yy, xx, ty, tx, g, f00, f01, f10, f11, gdty, gdtx
    for b_i in range(n):
        for p in range(9):
            for i in range(h):
                for j in range(wd):
                    yy = i + (p // 3 - 1) + off[b_i, 2 * p, i, j]
                    xx = j + (p % 3 - 1) + off[b_i, 2 * p + 1, i, j]
                    y0 = <Py_ssize_t>floor(yy)
                    x0 = <Py_ssize_t>floor(xx)
                    ty = yy - y0
                    tx = xx - x0
                    gdty = 0.0
                    gdtx = 0.0
                    for ci in range(c):
                        g = gy[b_i, ci * 9 + p, i, j]
                        f00 = f01 = f10 = f11 = 0.0
                        if 0 <= y0 < h:
                            if 0 <= x0 < wd:
                                f00 = feat[b_i, ci, y0, x0]
                                gf[b_i, ci, y0, x0] += g * (1 - ty) * (1 - tx)
                            if 0 <= x0 + 1 < wd:
                                f01 = feat[b_i, ci, y0, x0 + 1]
                                gf[b_i, ci, y0, x0 + 1] += g * (1 - ty) * tx
                        if 0 <= y0 + 1 < h:
                            if 0 <= x0 < wd:
                                f10 = feat[b_i, ci, y0 + 1, x0]
                                gf[b_i, ci, y0 + 1, x0] += g * ty * (1 - tx)
                            if 0 <= x0 + 1 < wd:
                                f11 = feat[b_i, ci, y0 + 1, x0 + 1]
                                gf[b_i, ci, y0 + 1, x0 + 1] += g * ty * tx
                        gdty += g * ((1 - tx) * (f10 - f00) + tx * (f11 - f01))
                        gdtx += g * ((1 - ty) * (f01 - f00) + ty * (f11 - f10))
                    go[b_i, 2 * p, i, j] = gdty
                    go[b_i, 2 * p + 1, i, j] = gdtx
    return gf_arr, go_arr


def dynconv_fwd(double[:, :, :, ::1] q, double[:, :, :, ::1] f,
                int groups, int k):
    cdef Py_ssize_t n = q.shape[0], c = q.shape[1], h = q.shape[2], wd = q.shape[3]
    cdef Py_ssize_t cg = c // groups, pad = k // 2
    out = np.zeros((n, c, h, wd))
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t b_i, ch, u, v, i, j, yy, xx, g
    cdef double acc
    for b_i in range(n):
        for ch in range(c):
            g = ch // cg
            for i in range(h):
                for j in range(wd):
                    acc = 0.0
                    for u in range(k):
                        yy = i + u - pad
                        if yy < 0 or yy >= h:
                            continue
                        for v in range(k):
                            xx = j + v - pad
                            if 0 <= xx < wd:
                                acc += f[b_i, g * k * k + u * k + v, i, j] * q[b_i, ch, yy, xx]
                    y[b_i, ch, i, j] = acc
    return out


def dynconv_bwd(double[:, :, :, ::1] q, double[:, :, :, ::1] f,
                int groups, int k, double[:, :, :, ::1] gy):
    cdef Py_ssize_t n = q.shape[0], c = q.shape[1], h = q.shape[2], wd = q.shape[3]
    cdef Py_ssize_t cg = c // groups, pad = k // 2
    gq_arr = np.zeros((n, c, h, wd))
    gf_arr = np.zeros((n, groups * k * k, h, wd))
    cdef double[:, :, :, ::1] gq = gq_arr
    cdef double[:, :, :, ::1] gf = gf_arr
    cdef Py_ssize_t b_i, ch, u, v, i, j, yy, xx, g
    cdef double go
    for b_i in range(n):
        for ch in range(c):
            g = ch // cg
            for i in range(h):
                for j in range(wd):
                    go = gy[b_i, ch, i, j]
                    if go == 0.0:
                        continue
                    for u in range(k):
                        yy = i + u - pad
                        if yy < 0 or yy >= h:
                            continue
                        for v in range(k):
                            xx = j + v - pad
                            if 0 <= xx < wd:
                                gf[b_i, g * k * k + u * k + v, i, j] += go * q[b_i, ch, yy, xx]
                                gq[b_i, ch, yy, xx] += go * f[b_i, g * k * k + u * k + v, i, j]
    return gq_arr, gf_arr
