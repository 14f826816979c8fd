"""Empirical dependence estimators and Bhattacharyya-distance utilities.

pearson and distance_correlation are the classical baselines.
mutual_dependence is the direct estimator: it fits three band-limited
maximum-likelihood densities (joint, both marginals) with one shared
cut-off frequency and evaluates

    d_hat = sqrt(1 - (1/n) sum_i c_i_joint / (c_i_x * c_i_y))

in closed form, so no numerical integration appears anywhere in the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import blml
from .numerics import NonConvergenceError, integrate_1d, integrate_2d

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


class UndefinedMeasureError(ValueError):
    """The measure is undefined on this input (e.g. a constant variable)."""


class MeasureKind(str, Enum):
    PEARSON = "pearson"
    DISTANCE_CORRELATION = "dcorr"
    MUTUAL_DEPENDENCE = "mdep"
    MUTUAL_INFORMATION = "mi"


class Flavor(str, Enum):
    EMPIRICAL = "empirical"
    THEORETICAL = "theoretical"


_RANGE_EPS = 1e-9


@dataclass(frozen=True)
class MeasureValue:
    """A tagged scalar result.

    Mutual information is only ever theoretical here: the toolkit never
    estimates it from data, it serves as the ground-truth axis.
    """

    kind: MeasureKind
    value: float
    flavor: Flavor
    n: Optional[int] = None
    fc: Optional[float] = None
    runtime_ns: Optional[int] = None

    def __post_init__(self):
        v = self.value
        if math.isnan(v):
            return
        if self.kind in (MeasureKind.MUTUAL_DEPENDENCE, MeasureKind.DISTANCE_CORRELATION):
            ok = -_RANGE_EPS <= v <= 1.0 + _RANGE_EPS
        elif self.kind is MeasureKind.PEARSON:
            ok = -1.0 - _RANGE_EPS <= v <= 1.0 + _RANGE_EPS
        else:
            ok = v >= -_RANGE_EPS
            if self.flavor is not Flavor.THEORETICAL:
                raise ValueError("mutual information is theoretical-only")
        if not ok:
            raise ValueError(f"{self.kind.value} value {v} outside its valid range")


def pearson(sample):
    """Sample Pearson correlation, O(n) single pass."""
    xs, ys = np.asarray(sample.xs, float), np.asarray(sample.ys, float)
    n = xs.size
    if n < 2:
        raise ValueError("pearson needs n >= 2")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedMeasureError("zero variance: Pearson correlation undefined")
    return float(dx @ dy) / math.sqrt(vx * vy)


_DCORR_DENSE_MAX = 256
_DCORR_CAP = 200_000
_DCORR_TILE_ELEMENTS = 24_000_000


def distance_correlation(sample):
    """Sample distance correlation (the V-statistic with double-centered
    distance matrices).

    O(n^2) time, capped at n <= 2e5.  Small samples materialize and
    double-center the distance matrices directly; larger ones use an O(n)
    memory streaming pass over the pairs that accumulates the identical
    sums (compiled when numba is available).
    """
    xs, ys = np.asarray(sample.xs, float), np.asarray(sample.ys, float)
    n = xs.size
    if n < 2:
        raise ValueError("distance_correlation needs n >= 2")
    if n > _DCORR_CAP:
        raise ValueError(f"distance_correlation capped at n <= {_DCORR_CAP}")
    if n <= _DCORR_DENSE_MAX:
        dcov2, dvarx, dvary = _dcov_terms_dense(xs, ys)
    elif numba is not None:
        dcov2, dvarx, dvary = _dcov_terms_streamed(xs, ys)
    else:
        dcov2, dvarx, dvary = _dcov_terms_tiled(xs, ys)
    if dvarx <= 0 or dvary <= 0:
        raise UndefinedMeasureError("constant variable: distance correlation undefined")
    if dcov2 < 0:
        if dcov2 < -1e-12:
            raise FloatingPointError(f"dCov^2 = {dcov2} below the roundoff floor")
        dcov2 = 0.0
    return math.sqrt(dcov2 / math.sqrt(dvarx * dvary))


def _dcov_terms_dense(xs, ys):
    n = xs.size
    a = np.abs(xs[:, None] - xs[None, :])
    b = np.abs(ys[:, None] - ys[None, :])
    A = a - a.mean(axis=0)[None, :] - a.mean(axis=1)[:, None] + a.mean()
    B = b - b.mean(axis=0)[None, :] - b.mean(axis=1)[:, None] + b.mean()
    return (float((A * B).sum()) / n ** 2,
            float((A * A).sum()) / n ** 2,
            float((B * B).sum()) / n ** 2)


if numba is not None:
    @numba.njit(cache=True)
    def _pair_sums_nb(x, y):  # pragma: no cover - exercised via wrapper
        n = x.size
        arow = np.zeros(n)
        brow = np.zeros(n)
        s_ab = s_aa = s_bb = 0.0
        for i in range(n):
            xi = x[i]
            yi = y[i]
            for j in range(i + 1, n):
                a = abs(xi - x[j])
                b = abs(yi - y[j])
                arow[i] += a
                arow[j] += a
                brow[i] += b
                brow[j] += b
                s_ab += a * b
                s_aa += a * a
                s_bb += b * b
        return 2.0 * s_ab, 2.0 * s_aa, 2.0 * s_bb, arow, brow


def _dcov_terms_streamed(xs, ys):
    # single deterministic pass over the pairs; no distance matrices
    n = xs.size
    s_ab, s_aa, s_bb, arow, brow = _pair_sums_nb(xs, ys)
    ta, tb = float(arow.sum()), float(brow.sum())

    def combine(s_xy, rx, ry, tx, ty):
        return s_xy / n ** 2 - 2.0 * float(rx @ ry) / n ** 3 + tx * ty / n ** 4

    return (combine(s_ab, arow, brow, ta, tb),
            combine(s_aa, arow, arow, ta, ta),
            combine(s_bb, brow, brow, tb, tb))


def _dcov_terms_tiled(xs, ys):
    # dCov^2 = S1 - 2 S2 + S3 expanded from the double-centering; one tiled
    # pass accumulates all cross and squared sums plus the row sums.
    n = xs.size
    tile = max(64, _DCORR_TILE_ELEMENTS // n)
    arow = np.empty(n)
    brow = np.empty(n)
    s_ab = s_aa = s_bb = 0.0
    for i0 in range(0, n, tile):
        at = np.abs(xs[i0:i0 + tile, None] - xs[None, :])
        bt = np.abs(ys[i0:i0 + tile, None] - ys[None, :])
        arow[i0:i0 + tile] = at.sum(axis=1)
        brow[i0:i0 + tile] = bt.sum(axis=1)
        s_ab += float(np.einsum("ij,ij->", at, bt))
        s_aa += float(np.einsum("ij,ij->", at, at))
        s_bb += float(np.einsum("ij,ij->", bt, bt))
    ta, tb = float(arow.sum()), float(brow.sum())

    def combine(s_xy, rx, ry, tx, ty):
        return s_xy / n ** 2 - 2.0 * float(rx @ ry) / n ** 3 + tx * ty / n ** 4

    return (combine(s_ab, arow, brow, ta, tb),
            combine(s_aa, arow, arow, ta, ta),
            combine(s_bb, brow, brow, tb, tb))


def mutual_dependence(sample, fc, use_quick=True, tol=1e-9, max_iter=200):
    """Mutual dependence estimate d_hat in [0, 1].

    Fits three BLML densities with the same scalar cut-off fc: the joint on
    (x, y) pairs with the 2-D product kernel, and the two marginals.  With
    use_quick all three fits are binned at Nyquist spacing and each sample
    uses the coefficient of its containing bin in each fit.  The radicand
    is clamped to [0, 1] before the square root.

    The computation runs in a canonical axis order (the estimator is
    symmetric), so swapping x and y returns the bit-identical value.
    """
    xs, ys = np.asarray(sample.xs, float), np.asarray(sample.ys, float)
    if xs.size < 1:
        raise ValueError("mutual_dependence needs n >= 1")
    if fc <= 0:
        raise ValueError("fc must be positive")
    if ys.tobytes() < xs.tobytes():
        xs, ys = ys, xs
    n = xs.size
    if use_quick:
        ratio_sum = _quick_ratio_sum(xs, ys, fc, tol, max_iter)
    else:
        ratio_sum = _unbinned_ratio_sum(xs, ys, fc, tol, max_iter)
    radicand = min(max(1.0 - ratio_sum / n, 0.0), 1.0)
    if radicand < 64 * np.finfo(float).eps:  # exact-independence roundoff
        radicand = 0.0
    return math.sqrt(radicand)


def _fit(points, weights, fc, dims, tol, max_iter, label):
    try:
        return blml.solve_blml(points, weights, fc, dims=dims, tol=tol, max_iter=max_iter)
    except NonConvergenceError as exc:
        raise NonConvergenceError(
            f"{label} BLML fit failed to converge: {exc}", exc.x, exc.residual_norm
        ) from exc


def _quick_ratio_sum(xs, ys, fc, tol, max_iter):
    delta = blml.bin_width(fc)
    ix = np.floor(xs / delta).astype(np.int64)
    iy = np.floor(ys / delta).astype(np.int64)
    joint_idx, joint_w = np.unique(np.stack([ix, iy], axis=1), axis=0, return_counts=True)
    x_idx, x_w = np.unique(ix, return_counts=True)
    y_idx, y_w = np.unique(iy, return_counts=True)

    fit_j = _fit((joint_idx + 0.5) * delta, joint_w, fc, 2, tol, max_iter, "joint")
    fit_x = _fit((x_idx + 0.5) * delta, x_w, fc, 1, tol, max_iter, "x-marginal")
    fit_y = _fit((y_idx + 0.5) * delta, y_w, fc, 1, tol, max_iter, "y-marginal")

    # every sample in a joint bin shares that bin's axis cells, so the
    # per-sample ratio sum groups by joint bin
    kx = np.searchsorted(x_idx, joint_idx[:, 0])
    ky = np.searchsorted(y_idx, joint_idx[:, 1])
    terms = joint_w * fit_j.coeffs / (fit_x.coeffs[kx] * fit_y.coeffs[ky])
    return math.fsum(terms.tolist())


def _unbinned_ratio_sum(xs, ys, fc, tol, max_iter):
    pairs = np.stack([xs, ys], axis=1)
    ones = np.ones(xs.size)
    fit_j = _fit(pairs, ones, fc, 2, tol, max_iter, "joint")
    fit_x = _fit(xs, ones, fc, 1, tol, max_iter, "x-marginal")
    fit_y = _fit(ys, ones, fc, 1, tol, max_iter, "y-marginal")
    terms = fit_j.coeffs / (fit_x.coeffs * fit_y.coeffs)
    return math.fsum(terms.tolist())


def bhattacharyya(p, q, spec, dims=1):
    """Bhattacharyya (Hellinger) distance sqrt(1 - integral sqrt(p q)).

    p and q must each integrate to one within 1e-4 over spec.domain; that
    is validated before the overlap integral is taken.
    """
    integrate = integrate_1d if dims == 1 else integrate_2d
    for name, f in (("p", p), ("q", q)):
        mass = integrate(f, spec)
        if abs(mass - 1.0) > 1e-4:
            raise ValueError(f"density {name} integrates to {mass:.6f}, not 1 within 1e-4")
    if dims == 1:
        bc = integrate(lambda x: np.sqrt(p(x) * q(x)), spec)
    else:
        bc = integrate(lambda x, y: np.sqrt(p(x, y) * q(x, y)), spec)
    return math.sqrt(1.0 - min(max(bc, 0.0), 1.0))


def gaussian_mdep(rho):
    """Closed-form mutual dependence of a bivariate normal with
    correlation rho: sqrt(1 - (1-rho^2)**(1/4) / (1 - rho^2/4)**(1/2))."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    return math.sqrt(1.0 - (1.0 - rho ** 2) ** 0.25 / math.sqrt(1.0 - rho ** 2 / 4.0))


def gaussian_bhattacharyya(mu1, mu2, sigma1, sigma2):
    """Bhattacharyya distance between two Gaussians (dimension 1 or 2).

    d^2 = 1 - (|S1|^(1/4) |S2|^(1/4) / |(S1+S2)/2|^(1/2))
              * exp(-(1/8) dmu' ((S1+S2)/2)^(-1) dmu)
    """
    mu1 = np.atleast_1d(np.asarray(mu1, float))
    mu2 = np.atleast_1d(np.asarray(mu2, float))
    s1 = np.atleast_2d(np.asarray(sigma1, float))
    s2 = np.atleast_2d(np.asarray(sigma2, float))
    d = mu1.size
    if d not in (1, 2) or mu2.size != d or s1.shape != (d, d) or s2.shape != (d, d):
        raise ValueError("means and covariances must share dimension 1 or 2")
    for s in (s1, s2):
        if not np.allclose(s, s.T):
            raise ValueError("covariance matrices must be symmetric")
        try:
            np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            raise ValueError("covariance matrices must be positive definite") from None
    mid = 0.5 * (s1 + s2)
    dmu = mu1 - mu2
    det_term = (np.linalg.det(s1) ** 0.25 * np.linalg.det(s2) ** 0.25
                / math.sqrt(np.linalg.det(mid)))
    expo = math.exp(-0.125 * float(dmu @ np.linalg.solve(mid, dmu)))
    d2 = 1.0 - det_term * expo
    if abs(d2) < 64 * np.finfo(float).eps:  # identical-input roundoff
        d2 = 0.0
    return math.sqrt(min(max(d2, 0.0), 1.0))
