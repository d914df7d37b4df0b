"""Pure-numpy kernel implementations (fallback backend).

The regularized incomplete beta function is evaluated with the modified
Lentz continued fraction, vectorized over the input arrays with a
convergence mask.  Must stay numerically identical to ``numba_impl``.
"""

import numpy as np
from scipy.special import gammaln

_EPS = 1e-12
_FPMIN = 1e-300
_MAXIT = 300


def _betacf(a, b, x):
    """Continued fraction of the incomplete beta, elementwise on arrays."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, _MAXIT + 1):
        m2 = 2.0 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        step = d * c
        h = np.where(done, h, h * step)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        step = d * c
        h = np.where(done, h, h * step)
        done = done | (np.abs(step - 1.0) < _EPS)
        if done.all():
            break
    return h


def betainc(a, b, x):
    """Regularized incomplete beta function I_x(a, b), elementwise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a, b, x = np.broadcast_arrays(a, b, x)
    out = np.empty(x.shape, dtype=np.float64)

    lo = x <= 0.0
    hi = x >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    if np.any(mid):
        am, bm, xm = a[mid], b[mid], x[mid]
        ln_front = (
            gammaln(am + bm)
            - gammaln(am)
            - gammaln(bm)
            + am * np.log(xm)
            + bm * np.log1p(-xm)
        )
        front = np.exp(ln_front)
        direct = xm < (am + 1.0) / (am + bm + 2.0)
        res = np.empty(xm.shape)
        if np.any(direct):
            res[direct] = (
                front[direct]
                * _betacf(am[direct], bm[direct], xm[direct])
                / am[direct]
            )
        flipped = ~direct
        if np.any(flipped):
            res[flipped] = 1.0 - front[flipped] * _betacf(
                bm[flipped], am[flipped], 1.0 - xm[flipped]
            ) / bm[flipped]
        out[mid] = res
    return out


def bilinear(img, xs, ys):
    """Bilinear sample of ``img[y, x]`` at float coordinates, edge-clamped."""
    h, w = img.shape
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.minimum(xs.astype(np.int64), w - 2)
    y0 = np.minimum(ys.astype(np.int64), h - 2)
    tx = xs - x0
    ty = ys - y0
    v00 = img[y0, x0]
    v10 = img[y0, x0 + 1]
    v01 = img[y0 + 1, x0]
    v11 = img[y0 + 1, x0 + 1]
    return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * (
        (1.0 - tx) * v01 + tx * v11
    )
