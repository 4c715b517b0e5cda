"""Product-kernel smoothing primitives.

Nadaraya-Watson numerator/denominator sums, leave-one-out variants, and the
one-step L2-boosting correction. Everything is direct O(n*m) summation: sample
sizes stay at desk scale and the oracle tests require exact sums.

Ratios follow the zero-denominator convention: wherever the denominator sum is
zero the ratio is set to 0, which keeps every downstream formula total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandwidthNonPositive, DimensionMismatch
from .types import KernelSpec

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SmoothEval:
    """Numerator / denominator sums of a kernel smooth at a set of points.

    ``ratio`` is numerator/denominator with the zero-denominator convention.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    ratio: np.ndarray


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    pos = den > 0
    out[pos] = num[pos] / den[pos]
    return out


def kernel_value(u, spec: KernelSpec = KernelSpec()) -> float:
    """Product over coordinates of the standard Gaussian density at u."""
    u = np.asarray(u, dtype=np.float64).ravel()
    return float(np.prod(_INV_SQRT_2PI * np.exp(-0.5 * u * u)))


def _check_h(h, dim: int) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if h.size == 1 and dim > 1:
        h = np.full(dim, h[0])
    if h.shape != (dim,):
        raise DimensionMismatch(f"bandwidth has shape {h.shape}, points have dim {dim}")
    if np.any(h <= 0):
        raise BandwidthNonPositive(f"bandwidths must be positive, got {h}")
    return h


def _check_weights(weights, n: int):
    if weights is None:
        return None
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape != (n,):
        raise DimensionMismatch(f"weights have length {w.size}, expected {n}")
    if not np.all((w == 0.0) | (w == 1.0)):
        raise ValueError("weights must be 0/1 trimming indicators")
    return w


def pairwise_kernel(eval_at: np.ndarray, points: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Matrix K((eval_m - point_i)/h), product Gaussian, shape (m, n)."""
    eval_at = np.atleast_2d(eval_at)
    points = np.atleast_2d(points)
    dim = points.shape[1]
    h = _check_h(h, dim)
    # In-place accumulation: this sits in the optimizer hot loop.
    buf = np.subtract.outer(eval_at[:, 0], points[:, 0])
    buf *= 1.0 / h[0]
    np.square(buf, out=buf)
    for k in range(1, dim):
        tmp = np.subtract.outer(eval_at[:, k], points[:, k])
        tmp *= 1.0 / h[k]
        np.square(tmp, out=tmp)
        buf += tmp
    buf *= -0.5
    # Subnormal results of exp are orders of magnitude slower to produce than
    # normal ones; exponents below -705 are indistinguishable from 0 at any
    # tolerance used here, so clamp them (exp(-705) ~ 1.4e-306, still normal).
    if buf.min() < -705.0:
        np.maximum(buf, -705.0, out=buf)
    np.exp(buf, out=buf)
    buf *= _INV_SQRT_2PI**dim
    return buf


def _sums(kmat, targets, h, weights):
    n = kmat.shape[1]
    scale = 1.0 / (n * np.prod(h))
    w = np.ones(n) if weights is None else weights
    num = scale * (kmat @ (targets * w))
    den = scale * (kmat @ w)
    return num, den


def nw_fit(targets, points, eval_at, h, spec: KernelSpec = KernelSpec(),
           weights=None) -> SmoothEval:
    """Nadaraya-Watson sums of ``targets`` on ``points`` at ``eval_at``.

    numerator[m] = (1/(n prod h)) sum_i targets_i w_i K((eval_m - point_i)/h);
    the denominator uses targets identically 1 and is the usual kernel density
    estimate when no weights are supplied.
    """
    points = np.atleast_2d(points)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    n = points.shape[0]
    if targets.shape != (n,):
        raise DimensionMismatch(f"targets length {targets.size} != n = {n}")
    h = _check_h(h, points.shape[1])
    w = _check_weights(weights, n)
    kmat = pairwise_kernel(eval_at, points, h)
    num, den = _sums(kmat, targets, h, w)
    return SmoothEval(num, den, _safe_ratio(num, den))


def nw_fit_loo(targets, points, h, spec: KernelSpec = KernelSpec(),
               weights=None) -> SmoothEval:
    """Leave-one-out Nadaraya-Watson sums at the data points themselves."""
    points = np.atleast_2d(points)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    n = points.shape[0]
    if n < 2:
        raise DimensionMismatch("leave-one-out needs n >= 2")
    if targets.shape != (n,):
        raise DimensionMismatch(f"targets length {targets.size} != n = {n}")
    h = _check_h(h, points.shape[1])
    w = _check_weights(weights, n)
    kmat = pairwise_kernel(points, points, h)
    np.fill_diagonal(kmat, 0.0)
    num, den = _sums(kmat, targets, h, w)
    return SmoothEval(num, den, _safe_ratio(num, den))


def boost_correct(targets, points, h, spec: KernelSpec = KernelSpec(),
                  weights=None, base_fit: SmoothEval | None = None) -> SmoothEval:
    """One-step L2-boosting correction of ``base_fit`` at the data points.

    Smooths the residuals targets_i - base_ratio_i (times the 0/1 weights) and
    divides by the denominator of the base fit, then adds the result back to
    the base ratio. The correction is 0 wherever the base denominator is 0.
    """
    if base_fit is None:
        raise ValueError("base_fit is required")
    points = np.atleast_2d(points)
    targets = np.asarray(targets, dtype=np.float64).ravel()
    n = points.shape[0]
    if targets.shape != (n,) or base_fit.ratio.shape != (n,):
        raise DimensionMismatch("targets and base_fit must match the data points")
    h = _check_h(h, points.shape[1])
    w = _check_weights(weights, n)
    resid = targets - base_fit.ratio
    kmat = pairwise_kernel(points, points, h)
    corr_num, _ = _sums(kmat, resid, h, w)
    correction = _safe_ratio(corr_num, base_fit.denominator)
    return SmoothEval(
        base_fit.numerator + corr_num,
        base_fit.denominator,
        base_fit.ratio + correction,
    )
