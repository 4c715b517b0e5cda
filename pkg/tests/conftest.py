"""Shared fixtures and brute-force oracle helpers.

The oracles here are deliberately written as plain scalar loops, independent
of the vectorized library code they check.
"""

import math

import numpy as np
import pytest

from semigen import DgpSpec, Sample, generate_dgp


def gauss1(u):
    return math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def product_kernel_scalar(u_vec):
    out = 1.0
    for u in u_vec:
        out *= gauss1(u)
    return out


def nw_sums_loop(targets, points, eval_at, h, weights=None):
    """Scalar-loop Nadaraya-Watson numerator/denominator sums."""
    points = np.atleast_2d(points)
    eval_at = np.atleast_2d(eval_at)
    n, dim = points.shape
    h = np.broadcast_to(np.atleast_1d(h), (dim,))
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    scale = 1.0 / (n * float(np.prod(h)))
    nums, dens = [], []
    for m in range(eval_at.shape[0]):
        num = 0.0
        den = 0.0
        for i in range(n):
            k = product_kernel_scalar((eval_at[m] - points[i]) / h)
            num += targets[i] * w[i] * k
            den += w[i] * k
        nums.append(scale * num)
        dens.append(scale * den)
    return np.array(nums), np.array(dens)


def safe_ratio_loop(num, den):
    return np.array([n / d if d > 0 else 0.0 for n, d in zip(num, den)])


@pytest.fixture
def small_sample():
    rng = np.random.default_rng(12345)
    n = 8
    return Sample(
        y=rng.normal(size=n),
        d=rng.normal(size=n),
        x=rng.normal(size=(n, 2)),
        z=rng.normal(size=(n, 2)),
    )


@pytest.fixture
def dgp_sample():
    rng = np.random.default_rng(777)
    return generate_dgp(DgpSpec(n=120), rng)
