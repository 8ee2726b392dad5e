"""Numba kernels for grid interpolation and the collision operators.

Every lookup evaluates ``w(x) * multilinear(values / w at nodes)`` where
w is the grid's reference weight (Gaussian-phase model, |x|^p, or 1).
Multilinear weights are nonnegative and sum to one, so comparisons
between grids sharing a reference inherit pointwise inequalities from
the node values; this monotonicity is what the discrete comparison
principle and the pointwise Lipschitz bound rest on.  Outside the node
hull the lookup continues with the nearest node's ratio, and inside an
optional core radius it returns an analytic near-origin model instead
of interpolating (sub-cell structure of the field is not representable
by cell interpolation).

All loops parallelize over output nodes only; each node writes its own
slot, so results are deterministic for any thread count.
"""

import numpy as np
from numba import njit, prange

EXP_CLIP = 300.0

REF_PLAIN = 0
REF_CHAR = 1
REF_POWER = 2

CORE_NONE = 0
CORE_MODEL = 1
CORE_DIFF = 2


# ---------------------------------------------------------------------------
# shared inline pieces
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _g_interp(gtab, s):
    """Cubic Lagrange on the uniform kernel table over [-1, 1], clamped at 0."""
    T = gtab.shape[0] - 1
    if s < -1.0:
        s = -1.0
    elif s > 1.0:
        s = 1.0
    u = (s + 1.0) * 0.5 * T
    i = int(np.floor(u))
    if i < 1:
        i = 1
    elif i > T - 3:
        i = T - 3
    t = u - i
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) * 0.5
    w2 = -(t + 1.0) * t * (t - 2.0) * 0.5
    w3 = (t + 1.0) * t * (t - 1.0) / 6.0
    g = w0 * gtab[i - 1] + w1 * gtab[i] + w2 * gtab[i + 1] + w3 * gtab[i + 2]
    if g < 0.0:
        g = 0.0
    return g


@njit(cache=True, inline="always")
def _poly3(x0, x1, x2, exps, coeffs, nt):
    acc = 0.0 + 0.0j
    for t in range(nt):
        term = coeffs[t]
        for _ in range(exps[t, 0]):
            term = term * x0
        for _ in range(exps[t, 1]):
            term = term * x1
        for _ in range(exps[t, 2]):
            term = term * x2
        acc += term
    return acc


@njit(cache=True, inline="always")
def _poly2(x0, x1, exps, coeffs, nt):
    acc = 0.0 + 0.0j
    for t in range(nt):
        term = coeffs[t]
        for _ in range(exps[t, 0]):
            term = term * x0
        for _ in range(exps[t, 1]):
            term = term * x1
        acc += term
    return acc


@njit(cache=True, inline="always")
def _gauss_phase3(x0, x1, x2, U, B):
    re = -0.5 * (x0 * (B[0, 0] * x0 + B[0, 1] * x1 + B[0, 2] * x2)
                 + x1 * (B[1, 0] * x0 + B[1, 1] * x1 + B[1, 2] * x2)
                 + x2 * (B[2, 0] * x0 + B[2, 1] * x1 + B[2, 2] * x2))
    if re < -EXP_CLIP:
        re = -EXP_CLIP
    im = -(U[0] * x0 + U[1] * x1 + U[2] * x2)
    return np.exp(re) * (np.cos(im) + 1j * np.sin(im))


@njit(cache=True, inline="always")
def _gauss_phase2(x0, x1, U, B):
    re = -0.5 * (x0 * (B[0, 0] * x0 + B[0, 1] * x1)
                 + x1 * (B[1, 0] * x0 + B[1, 1] * x1))
    if re < -EXP_CLIP:
        re = -EXP_CLIP
    im = -(U[0] * x0 + U[1] * x1)
    return np.exp(re) * (np.cos(im) + 1j * np.sin(im))


@njit(cache=True, inline="always")
def _ref_w3(x0, x1, x2, ref_kind, rU, rB, rp):
    if ref_kind == REF_CHAR:
        return _gauss_phase3(x0, x1, x2, rU, rB)
    if ref_kind == REF_POWER:
        r2 = x0 * x0 + x1 * x1 + x2 * x2
        return r2 ** (0.5 * rp) + 0.0j
    return 1.0 + 0.0j


@njit(cache=True, inline="always")
def _ref_w2(x0, x1, ref_kind, rU, rB, rp):
    if ref_kind == REF_CHAR:
        return _gauss_phase2(x0, x1, rU, rB)
    if ref_kind == REF_POWER:
        r2 = x0 * x0 + x1 * x1
        return r2 ** (0.5 * rp) + 0.0j
    return 1.0 + 0.0j


@njit(cache=True, inline="always")
def _core3(x0, x1, x2, core_kind, cU, cB, cexps, ccoeffs, cnt):
    a = _gauss_phase3(x0, x1, x2, cU[0], cB[0]) * _poly3(x0, x1, x2, cexps[0], ccoeffs[0], cnt[0])
    if core_kind == CORE_MODEL:
        return a
    b = _gauss_phase3(x0, x1, x2, cU[1], cB[1]) * _poly3(x0, x1, x2, cexps[1], ccoeffs[1], cnt[1])
    return abs(a - b) + 0.0j


@njit(cache=True, inline="always")
def _core2(x0, x1, core_kind, cU, cB, cexps, ccoeffs, cnt):
    a = _gauss_phase2(x0, x1, cU[0], cB[0]) * _poly2(x0, x1, cexps[0], ccoeffs[0], cnt[0])
    if core_kind == CORE_MODEL:
        return a
    b = _gauss_phase2(x0, x1, cU[1], cB[1]) * _poly2(x0, x1, cexps[1], ccoeffs[1], cnt[1])
    return abs(a - b) + 0.0j


@njit(cache=True, inline="always")
def _lookup3(x0, x1, x2, ratio, n, h, half,
             ref_kind, rU, rB, rp,
             core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2):
    if core_kind != CORE_NONE:
        if x0 * x0 + x1 * x1 + x2 * x2 < rcore2:
            return _core3(x0, x1, x2, core_kind, cU, cB, cexps, ccoeffs, cnt)
    fx = x0 / h + half
    fy = x1 / h + half
    fz = x2 / h + half
    w = _ref_w3(x0, x1, x2, ref_kind, rU, rB, rp)
    nm1 = n - 1
    if fx < 0.0 or fy < 0.0 or fz < 0.0 or fx > nm1 or fy > nm1 or fz > nm1:
        # beyond the hull: continue with the nearest node's ratio
        ix = int(np.floor(fx + 0.5))
        iy = int(np.floor(fy + 0.5))
        iz = int(np.floor(fz + 0.5))
        if ix < 0:
            ix = 0
        elif ix > nm1:
            ix = nm1
        if iy < 0:
            iy = 0
        elif iy > nm1:
            iy = nm1
        if iz < 0:
            iz = 0
        elif iz > nm1:
            iz = nm1
        return w * ratio[(ix * n + iy) * n + iz]
    i0 = int(np.floor(fx))
    j0 = int(np.floor(fy))
    l0 = int(np.floor(fz))
    if i0 > n - 2:
        i0 = n - 2
    if j0 > n - 2:
        j0 = n - 2
    if l0 > n - 2:
        l0 = n - 2
    tx = fx - i0
    ty = fy - j0
    tz = fz - l0
    b = (i0 * n + j0) * n + l0
    nn = n * n
    c00 = ratio[b] * (1.0 - tx) + ratio[b + nn] * tx
    c10 = ratio[b + n] * (1.0 - tx) + ratio[b + nn + n] * tx
    c01 = ratio[b + 1] * (1.0 - tx) + ratio[b + nn + 1] * tx
    c11 = ratio[b + n + 1] * (1.0 - tx) + ratio[b + nn + n + 1] * tx
    return w * ((c00 * (1.0 - ty) + c10 * ty) * (1.0 - tz)
                + (c01 * (1.0 - ty) + c11 * ty) * tz)


@njit(cache=True, inline="always")
def _lookup2(x0, x1, ratio, n, h, half,
             ref_kind, rU, rB, rp,
             core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2):
    if core_kind != CORE_NONE:
        if x0 * x0 + x1 * x1 < rcore2:
            return _core2(x0, x1, core_kind, cU, cB, cexps, ccoeffs, cnt)
    fx = x0 / h + half
    fy = x1 / h + half
    w = _ref_w2(x0, x1, ref_kind, rU, rB, rp)
    nm1 = n - 1
    if fx < 0.0 or fy < 0.0 or fx > nm1 or fy > nm1:
        ix = int(np.floor(fx + 0.5))
        iy = int(np.floor(fy + 0.5))
        if ix < 0:
            ix = 0
        elif ix > nm1:
            ix = nm1
        if iy < 0:
            iy = 0
        elif iy > nm1:
            iy = nm1
        return w * ratio[ix * n + iy]
    i0 = int(np.floor(fx))
    j0 = int(np.floor(fy))
    if i0 > n - 2:
        i0 = n - 2
    if j0 > n - 2:
        j0 = n - 2
    tx = fx - i0
    ty = fy - j0
    b = i0 * n + j0
    return w * ((ratio[b] * (1.0 - tx) + ratio[b + n] * tx) * (1.0 - ty)
                + (ratio[b + 1] * (1.0 - tx) + ratio[b + n + 1] * tx) * ty)


@njit(cache=True, inline="always")
def _clamp_disk(v):
    m = abs(v)
    if m > 1.0:
        return v / m
    return v


# ---------------------------------------------------------------------------
# operators, d = 3
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def gamma3(ratio, v0, n, h, half, qn, qw, gtab,
           ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
           clamp, out):
    N = n * n * n
    Q = qn.shape[0]
    for idx in prange(N):
        i = idx // (n * n)
        j = (idx // n) % n
        l = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        kz = (l - half) * h
        kk = np.sqrt(kx * kx + ky * ky + kz * kz)
        if kk == 0.0:
            out[idx] = v0 * v0
            continue
        inv = 1.0 / kk
        acc = 0.0 + 0.0j
        for q in range(Q):
            nx = qn[q, 0]
            ny = qn[q, 1]
            nz = qn[q, 2]
            s = (kx * nx + ky * ny + kz * nz) * inv
            g = _g_interp(gtab, s)
            if g == 0.0:
                continue
            px = 0.5 * (kx + kk * nx)
            py = 0.5 * (ky + kk * ny)
            pz = 0.5 * (kz + kk * nz)
            mx = kx - px
            my = ky - py
            mz = kz - pz
            vp = _lookup3(px, py, pz, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            vm = _lookup3(mx, my, mz, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            if clamp == 1:
                vp = _clamp_disk(vp)
                vm = _clamp_disk(vm)
            acc += qw[q] * g * vp * vm
        out[idx] = acc


@njit(cache=True, parallel=True)
def lin3(ratio, v0, n, h, half, qn, qw, gtab,
         ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
         out):
    N = n * n * n
    Q = qn.shape[0]
    for idx in prange(N):
        i = idx // (n * n)
        j = (idx // n) % n
        l = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        kz = (l - half) * h
        kk = np.sqrt(kx * kx + ky * ky + kz * kz)
        if kk == 0.0:
            out[idx] = 2.0 * v0
            continue
        inv = 1.0 / kk
        acc = 0.0 + 0.0j
        for q in range(Q):
            nx = qn[q, 0]
            ny = qn[q, 1]
            nz = qn[q, 2]
            s = (kx * nx + ky * ny + kz * nz) * inv
            g = _g_interp(gtab, s)
            if g == 0.0:
                continue
            px = 0.5 * (kx + kk * nx)
            py = 0.5 * (ky + kk * ny)
            pz = 0.5 * (kz + kk * nz)
            vp = _lookup3(px, py, pz, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            vm = _lookup3(kx - px, ky - py, kz - pz, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            acc += qw[q] * g * (vp + vm)
        out[idx] = acc


@njit(cache=True, parallel=True)
def map_eval3(ratio, n, h, half, M, scale,
              ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
              out):
    """out[idx] = scale * lookup(M @ k_idx) over all nodes."""
    N = n * n * n
    for idx in prange(N):
        i = idx // (n * n)
        j = (idx // n) % n
        l = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        kz = (l - half) * h
        x0 = M[0, 0] * kx + M[0, 1] * ky + M[0, 2] * kz
        x1 = M[1, 0] * kx + M[1, 1] * ky + M[1, 2] * kz
        x2 = M[2, 0] * kx + M[2, 1] * ky + M[2, 2] * kz
        out[idx] = scale * _lookup3(x0, x1, x2, ratio, n, h, half, ref_kind, rU, rB, rp,
                                    core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)


@njit(cache=True, parallel=True)
def points_eval3(ratio, n, h, half, pts,
                 ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
                 out):
    for m in prange(pts.shape[0]):
        out[m] = _lookup3(pts[m, 0], pts[m, 1], pts[m, 2], ratio, n, h, half,
                          ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)


# ---------------------------------------------------------------------------
# operators, d = 2
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def gamma2(ratio, v0, n, h, half, qn, qw, gtab,
           ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
           clamp, out):
    N = n * n
    Q = qn.shape[0]
    for idx in prange(N):
        i = idx // n
        j = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        kk = np.sqrt(kx * kx + ky * ky)
        if kk == 0.0:
            out[idx] = v0 * v0
            continue
        inv = 1.0 / kk
        acc = 0.0 + 0.0j
        for q in range(Q):
            nx = qn[q, 0]
            ny = qn[q, 1]
            s = (kx * nx + ky * ny) * inv
            g = _g_interp(gtab, s)
            if g == 0.0:
                continue
            px = 0.5 * (kx + kk * nx)
            py = 0.5 * (ky + kk * ny)
            vp = _lookup2(px, py, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            vm = _lookup2(kx - px, ky - py, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            if clamp == 1:
                vp = _clamp_disk(vp)
                vm = _clamp_disk(vm)
            acc += qw[q] * g * vp * vm
        out[idx] = acc


@njit(cache=True, parallel=True)
def lin2(ratio, v0, n, h, half, qn, qw, gtab,
         ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
         out):
    N = n * n
    Q = qn.shape[0]
    for idx in prange(N):
        i = idx // n
        j = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        kk = np.sqrt(kx * kx + ky * ky)
        if kk == 0.0:
            out[idx] = 2.0 * v0
            continue
        inv = 1.0 / kk
        acc = 0.0 + 0.0j
        for q in range(Q):
            nx = qn[q, 0]
            ny = qn[q, 1]
            s = (kx * nx + ky * ny) * inv
            g = _g_interp(gtab, s)
            if g == 0.0:
                continue
            px = 0.5 * (kx + kk * nx)
            py = 0.5 * (ky + kk * ny)
            vp = _lookup2(px, py, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            vm = _lookup2(kx - px, ky - py, ratio, n, h, half, ref_kind, rU, rB, rp,
                          core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
            acc += qw[q] * g * (vp + vm)
        out[idx] = acc


@njit(cache=True, parallel=True)
def map_eval2(ratio, n, h, half, M, scale,
              ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
              out):
    N = n * n
    for idx in prange(N):
        i = idx // n
        j = idx % n
        kx = (i - half) * h
        ky = (j - half) * h
        x0 = M[0, 0] * kx + M[0, 1] * ky
        x1 = M[1, 0] * kx + M[1, 1] * ky
        out[idx] = scale * _lookup2(x0, x1, ratio, n, h, half, ref_kind, rU, rB, rp,
                                    core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)


@njit(cache=True, parallel=True)
def points_eval2(ratio, n, h, half, pts,
                 ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2,
                 out):
    for m in prange(pts.shape[0]):
        out[m] = _lookup2(pts[m, 0], pts[m, 1], ratio, n, h, half,
                          ref_kind, rU, rB, rp, core_kind, cU, cB, cexps, ccoeffs, cnt, rcore2)
