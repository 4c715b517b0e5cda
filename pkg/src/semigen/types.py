"""Core data model: samples, model forms, bandwidths, trimming, and test configuration.

All containers are frozen dataclasses holding read-only numpy arrays, so they can
be shared freely across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NonFiniteValue, TooFewObservations


def _as_readonly(a, dtype=np.float64):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Sample:
    """Observed data for n units.

    y : outcome, shape (n,)
    d : projected variable entering the first-step regression, shape (n,)
    x : covariates, shape (n, p_x)
    z : first-step conditioning variables, shape (n, p)
    """

    y: np.ndarray
    d: np.ndarray
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _as_readonly(self.y))
        object.__setattr__(self, "d", _as_readonly(self.d))
        object.__setattr__(self, "x", _as_readonly(np.atleast_2d(self.x)))
        object.__setattr__(self, "z", _as_readonly(np.atleast_2d(self.z)))

    @property
    def n(self) -> int:
        return self.y.shape[0]


def validate_sample(sample: Sample) -> Sample:
    """Check the Sample invariants and return the sample unchanged.

    Raises DimensionMismatch, NonFiniteValue, or TooFewObservations; rejection is
    total, no partially validated state is produced.
    """
    y, d, x, z = sample.y, sample.d, sample.x, sample.z
    if y.ndim != 1 or d.ndim != 1 or x.ndim != 2 or z.ndim != 2:
        raise DimensionMismatch(
            "expected y, d as vectors and x, z as matrices; got shapes "
            f"y{y.shape} d{d.shape} x{x.shape} z{z.shape}"
        )
    n = y.shape[0]
    if not (d.shape[0] == n and x.shape[0] == n and z.shape[0] == n):
        raise DimensionMismatch(
            f"inconsistent lengths: y has {n} rows, d {d.shape[0]}, "
            f"x {x.shape[0]}, z {z.shape[0]}"
        )
    if n < 2:
        raise TooFewObservations(f"need n >= 2, got n = {n}")
    for name, arr in (("y", y), ("d", d), ("x", x), ("z", z)):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"non-finite entry in {name}")
    return sample


class GeneratedCovariate(Enum):
    """Whether the generated variable entering nu and q is the first-step
    residual (control-function applications) or the fitted value itself
    (sample selection, games)."""

    RESIDUAL = "residual"
    LEVEL = "level"


class IndexForm(Enum):
    """Shape of the index q: a single combined scalar index, or the pair
    (linear index in x, generated covariate)."""

    COMBINED = "combined"
    PARTIAL = "partial"


@dataclass(frozen=True)
class ModelSpec:
    """Configuration of the null-hypothesis model form.

    ``normalization`` is an optional position in the full coefficient vector
    (x columns first, then the generated covariate for the combined form)
    whose coefficient is fixed to 1 and excluded from the free parameters.
    ``beta_box`` gives per-coordinate bounds for the free parameters.
    """

    generated_covariate: GeneratedCovariate
    index_form: IndexForm
    beta_dim: int
    beta_box: tuple = ()
    normalization: int | None = None

    def __post_init__(self):
        if self.beta_dim < 1:
            raise ValueError("beta_dim must be >= 1")
        box = self.beta_box
        if not box:
            box = tuple((-3.0, 3.0) for _ in range(self.beta_dim))
            object.__setattr__(self, "beta_box", box)
        if len(box) != self.beta_dim:
            raise DimensionMismatch(
                f"beta_box has {len(box)} intervals for beta_dim={self.beta_dim}"
            )
        for lo, hi in box:
            if not hi > lo:
                raise ValueError("each beta_box interval needs positive width")

    @property
    def index_dim(self) -> int:
        return 1 if self.index_form is IndexForm.COMBINED else 2


class KernelFamily(Enum):
    GAUSSIAN_ORDER2 = "gaussian_order2"


@dataclass(frozen=True)
class KernelSpec:
    """Product of univariate kernels applied coordinate-wise."""

    family: KernelFamily = KernelFamily.GAUSSIAN_ORDER2

    @property
    def order(self) -> int:
        return 2


AUTO = "auto"


@dataclass(frozen=True)
class BandwidthSpec:
    """Bandwidths for the three smoothing stages.

    h_first : per-coordinate first-step bandwidths, or None for the
        Silverman rule computed from the data.
    h_third : positive scalar, or the marker AUTO for the data-driven
        selector minimizing the leave-one-out Cramer-von Mises distance.
    h_density : per-coordinate bandwidths for the joint density used by
        density-threshold trimming, or None for the Silverman rule.
    """

    h_first: np.ndarray | None = None
    h_third: float | str = AUTO
    h_density: np.ndarray | None = None

    def __post_init__(self):
        if self.h_first is not None:
            h = _as_readonly(self.h_first)
            if np.any(h <= 0):
                raise ValueError("h_first must be strictly positive")
            object.__setattr__(self, "h_first", h)
        if self.h_third != AUTO and not float(self.h_third) > 0:
            raise ValueError("h_third must be positive or AUTO")
        if self.h_density is not None:
            h = _as_readonly(self.h_density)
            if np.any(h <= 0):
                raise ValueError("h_density must be strictly positive")
            object.__setattr__(self, "h_density", h)


class TrimmingMode(Enum):
    QUANTILE_PRIOR = "quantile_prior"
    DENSITY_THRESHOLD = "density_threshold"


@dataclass(frozen=True)
class TrimmingSpec:
    """Rule for dropping low-density / extreme observations.

    Quantile-prior trimming drops the units whose (|x|, |z|) coordinates fall
    beyond the per-coordinate (1 - rate) empirical quantile; the density
    threshold keeps units with joint density estimate >= tau.
    """

    mode: TrimmingMode = TrimmingMode.QUANTILE_PRIOR
    rate: float = 0.01
    tau: float = 0.0

    def __post_init__(self):
        if self.mode is TrimmingMode.QUANTILE_PRIOR:
            if not 0.0 <= self.rate < 0.5:
                raise ValueError("trimming rate must be in [0, 0.5)")
        else:
            if not self.tau > 0:
                raise ValueError("density threshold tau must be positive")


@dataclass(frozen=True)
class TestConfig:
    """Knobs of the bootstrap test itself."""

    n_bootstrap: int = 999
    alpha_levels: tuple = (0.01, 0.05, 0.10)
    bias_corrected: bool = True
    seed: int = 0
    standardize_nu: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_bootstrap < 1:
            raise ValueError("n_bootstrap must be >= 1")
        for a in self.alpha_levels:
            if not 0.0 < a < 1.0:
                raise ValueError("alpha levels must lie in (0, 1)")
        object.__setattr__(self, "alpha_levels", tuple(float(a) for a in self.alpha_levels))
