"""Inner-loop kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports cleanly and the environment
variable ``DECOHIST_DISABLE_NUMBA`` is unset (or ``0``).  Both paths are
always importable so tests and ``benchmarks/bench_kernels.py`` can compare
them directly via :data:`NUMPY` and :data:`NUMBA`.
"""
from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_flag = os.environ.get("DECOHIST_DISABLE_NUMBA", "0").strip().lower()
USE_NUMBA = numba is not None and _flag in ("", "0", "false", "no")


# ---------------------------------------------------------------------------
# numpy implementations


def _split_masked_np(vecs, labels, ncells):
    m, d = vecs.shape
    out = np.zeros((m, ncells, d), dtype=vecs.dtype)
    cols = np.arange(d)
    keep = labels >= 0
    out[:, labels[keep], cols[keep]] = vecs[:, keep]
    return out.reshape(m * ncells, d)


def _offdiag_scan_np(gram, weights, eps, floor, real_only):
    k = gram.shape[0]
    if k < 2:
        return 0.0, 0.0, -1, -1
    vals = np.abs(gram.real) if real_only else np.abs(gram)
    scale = np.maximum(np.sqrt(np.outer(weights, weights)), floor)
    iu = np.triu_indices(k, 1)
    v = vals[iu]
    r = v / scale[iu]
    w = int(np.argmax(r))
    return float(v.max()), float(r[w]), int(iu[0][w]), int(iu[1][w])


def _binomial_pmf_np(p, n):
    m = np.arange(n + 1)
    if p <= 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p >= 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    if n <= 50:
        coef = np.array([math.comb(n, int(j)) for j in m], dtype=float)
        return coef * p**m * (1.0 - p) ** (n - m)
    lg = np.vectorize(math.lgamma, otypes=[float])
    logc = math.lgamma(n + 1) - lg(m + 1) - lg(n - m + 1)
    return np.exp(logc + m * math.log(p) + (n - m) * math.log1p(-p))


def _part_matrix_np(coefs, gcoefs, norms2, coef_tol, ortho_tol, zero_tol):
    e, k = coefs.shape
    out = np.zeros((e, e), dtype=np.bool_)
    for b in range(e):
        d = coefs - coefs[b]
        cross = np.conj(coefs[b]) @ gcoefs.T  # <b|g> for every g
        nd2 = norms2 + norms2[b] - 2.0 * cross.real
        same = nd2 <= zero_tol
        near = np.minimum(np.abs(d), np.abs(d - 1.0)) <= coef_tol
        ip = np.conj(d) @ gcoefs[b]  # <delta|b>
        orth = np.abs(ip) <= ortho_tol * np.sqrt(np.maximum(nd2, 0.0) * norms2[b]) + zero_tol
        out[b] = same | (near.all(axis=1) & orth)
    return out


def _fusion_scan_np(rel):
    e = rel.shape[0]
    idx = np.arange(e)
    for x in range(e):
        ys = idx[x:]
        u = ((x + 1) | (ys + 1)) - 1
        is_ub = rel[x, u] & rel[ys, u]
        if not is_ub.all():
            y = int(ys[np.argmin(is_ub)])
            return 1, x, y, -1
        ub = rel[x][None, :] & rel[ys]
        bad = ub & ~rel[u]
        if bad.any():
            r, w = np.argwhere(bad)[0]
            return 2, x, int(ys[r]), int(w)
    return 0, -1, -1, -1


NUMPY = SimpleNamespace(
    name="numpy",
    split_masked=_split_masked_np,
    offdiag_scan=_offdiag_scan_np,
    binomial_pmf=_binomial_pmf_np,
    part_matrix=_part_matrix_np,
    fusion_scan=_fusion_scan_np,
)


# ---------------------------------------------------------------------------
# numba implementations

if numba is not None:
    _jit = numba.njit(cache=True, nogil=True)

    @_jit
    def _split_masked_nb(vecs, labels, ncells):
        m, d = vecs.shape
        out = np.zeros((m * ncells, d), dtype=vecs.dtype)
        for i in range(m):
            base = i * ncells
            for j in range(d):
                c = labels[j]
                if c >= 0:
                    out[base + c, j] = vecs[i, j]
        return out

    @_jit
    def _offdiag_scan_nb(gram, weights, eps, floor, real_only):
        k = gram.shape[0]
        best_v = 0.0
        best_r = -1.0
        bi = -1
        bj = -1
        for i in range(k):
            for j in range(i + 1, k):
                g = gram[i, j]
                v = abs(g.real) if real_only else abs(g)
                s = math.sqrt(weights[i] * weights[j])
                if s < floor:
                    s = floor
                r = v / s
                if v > best_v:
                    best_v = v
                if r > best_r:
                    best_r = r
                    bi = i
                    bj = j
        if best_r < 0.0:
            best_r = 0.0
        return best_v, best_r, bi, bj

    @_jit
    def _binomial_pmf_nb(p, n):
        out = np.zeros(n + 1)
        if p <= 0.0:
            out[0] = 1.0
            return out
        if p >= 1.0:
            out[n] = 1.0
            return out
        if n <= 50:
            c = 1.0
            for m in range(n + 1):
                if m > 0:
                    c = c * (n - m + 1) / m
                out[m] = c * p**m * (1.0 - p) ** (n - m)
            return out
        lp = math.log(p)
        lq = math.log1p(-p)
        top = math.lgamma(n + 1.0)
        for m in range(n + 1):
            out[m] = math.exp(top - math.lgamma(m + 1.0) - math.lgamma(n - m + 1.0) + m * lp + (n - m) * lq)
        return out

    @_jit
    def _part_matrix_nb(coefs, gcoefs, norms2, coef_tol, ortho_tol, zero_tol):
        e, k = coefs.shape
        out = np.zeros((e, e), dtype=np.bool_)
        for b in range(e):
            for g in range(e):
                cross = 0.0 + 0.0j
                for i in range(k):
                    cross += np.conj(coefs[b, i]) * gcoefs[g, i]
                nd2 = norms2[g] + norms2[b] - 2.0 * cross.real
                if nd2 <= zero_tol:
                    out[b, g] = True
                    continue
                ok = True
                ip = 0.0 + 0.0j
                for i in range(k):
                    di = coefs[g, i] - coefs[b, i]
                    if abs(di) > coef_tol and abs(di - 1.0) > coef_tol:
                        ok = False
                        break
                    ip += np.conj(di) * gcoefs[b, i]
                if not ok:
                    continue
                bound = ortho_tol * math.sqrt(max(nd2, 0.0) * norms2[b]) + zero_tol
                out[b, g] = abs(ip) <= bound
        return out

    @_jit
    def _fusion_scan_nb(rel):
        e = rel.shape[0]
        for x in range(e):
            for y in range(x, e):
                u = ((x + 1) | (y + 1)) - 1
                if not (rel[x, u] and rel[y, u]):
                    return 1, x, y, -1
                for w in range(e):
                    if rel[x, w] and rel[y, w] and not rel[u, w]:
                        return 2, x, y, w
        return 0, -1, -1, -1

    NUMBA = SimpleNamespace(
        name="numba",
        split_masked=_split_masked_nb,
        offdiag_scan=_offdiag_scan_nb,
        binomial_pmf=_binomial_pmf_nb,
        part_matrix=_part_matrix_nb,
        fusion_scan=_fusion_scan_nb,
    )
else:  # pragma: no cover
    NUMBA = None

ACTIVE = NUMBA if USE_NUMBA else NUMPY
BACKEND = ACTIVE.name

split_masked = ACTIVE.split_masked
offdiag_scan = ACTIVE.offdiag_scan
binomial_pmf = ACTIVE.binomial_pmf
part_matrix = ACTIVE.part_matrix
fusion_scan = ACTIVE.fusion_scan


def warmup():
    """Trigger compilation of every kernel on tiny inputs."""
    z = np.zeros((1, 2), dtype=complex)
    split_masked(z, np.array([0, 1], dtype=np.int64), 2)
    offdiag_scan(np.eye(2, dtype=complex), np.ones(2), 1e-8, 1e-12, False)
    binomial_pmf(0.5, 3)
    binomial_pmf(0.5, 60)
    c = np.eye(1, dtype=complex)
    part_matrix(c, c, np.ones(1), 1e-8, 1e-8, 1e-14)
    fusion_scan(np.ones((1, 1), dtype=np.bool_))
