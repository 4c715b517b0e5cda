"""First-step estimation of the conditional mean of d given z.

Produces the plain Nadaraya-Watson fit, its one-step bias-corrected (boosted)
version, the trimming indicators, and the rule-of-thumb bandwidths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateColumn
from .kernels import SmoothEval, boost_correct, nw_fit
from .types import (
    BandwidthSpec,
    KernelSpec,
    Sample,
    TrimmingMode,
    TrimmingSpec,
)


@dataclass(frozen=True)
class FirstStepFit:
    """First-step quantities at the data points.

    h_hat : plain Nadaraya-Watson fit of d on z
    h_tilde : bias-corrected fit (equal to h_hat when the correction is off)
    trim : 0/1 indicators; units with 0 are ignored by downstream sums
    f_z : kernel density estimate of z at the data points
    h_used : bandwidth vector actually applied
    """

    h_hat: np.ndarray
    h_tilde: np.ndarray
    trim: np.ndarray
    f_z: np.ndarray
    h_used: np.ndarray


def silverman_bandwidth(z, order: int = 2) -> np.ndarray:
    """Per-coordinate rule-of-thumb bandwidth sigma_k * n**(-1/(2 + 2*order))."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    n = z.shape[0]
    sd = z.std(axis=0, ddof=1)
    if np.any(sd <= 0):
        bad = int(np.argmax(sd <= 0))
        raise DegenerateColumn(f"column {bad} has zero sample standard deviation")
    return sd * n ** (-1.0 / (2.0 + 2.0 * order))


def compute_trimming(sample: Sample, spec: TrimmingSpec,
                     kspec: KernelSpec = KernelSpec(),
                     h_density=None) -> np.ndarray:
    """0/1 keep indicators for each unit.

    Quantile-prior mode drops unit i if any coordinate of (|x_i|, |z_i|)
    exceeds that coordinate's empirical (1 - rate) quantile of absolute
    values. Density-threshold mode keeps unit i iff the joint product-kernel
    density estimate of (x, z) at unit i is >= tau.
    """
    u = np.column_stack([sample.x, sample.z])
    n = u.shape[0]
    if spec.mode is TrimmingMode.QUANTILE_PRIOR:
        if spec.rate == 0.0:
            return np.ones(n)
        absu = np.abs(u)
        cut = np.quantile(absu, 1.0 - spec.rate, axis=0)
        keep = np.all(absu <= cut, axis=1)
        return keep.astype(np.float64)
    if h_density is None:
        h_density = silverman_bandwidth(u, order=kspec.order)
    dens = nw_fit(np.ones(n), u, u, h_density, kspec).denominator
    return (dens >= spec.tau).astype(np.float64)


def fit_first_step(sample: Sample, kspec: KernelSpec = KernelSpec(),
                   bands: BandwidthSpec = BandwidthSpec(),
                   trim=None, bias_corrected: bool = True) -> FirstStepFit:
    """Fit the first-step regression of d on z at the data points.

    The plain fit uses untrimmed sums; the one-step correction smooths the
    trimmed residuals and divides by the same (untrimmed) density estimate.
    With ``bias_corrected`` off, h_tilde is identical to h_hat.
    """
    z = sample.z
    n = sample.n
    h = bands.h_first if bands.h_first is not None else silverman_bandwidth(z, kspec.order)
    if trim is None:
        trim = np.ones(n)
    trim = np.asarray(trim, dtype=np.float64).ravel()
    base = nw_fit(sample.d, z, z, h, kspec)
    if bias_corrected:
        boosted = boost_correct(sample.d, z, h, kspec, weights=trim, base_fit=base)
        h_tilde = boosted.ratio
    else:
        h_tilde = base.ratio.copy()
    return FirstStepFit(
        h_hat=base.ratio,
        h_tilde=h_tilde,
        trim=trim,
        f_z=base.denominator,
        h_used=np.atleast_1d(np.asarray(h, dtype=np.float64)),
    )
