"""Wild bootstrap: coupled resampling scheme, the full three-step bootstrap
replication of the statistic, critical values, p-values, and warp-speed
p-values.

The resampling perturbs both the outcome and the projected variable with the
same Rademacher weight per unit, and the bootstrap data-generating process is
built from the *uncorrected* first- and third-step fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cvm import (
    NuValues,
    build_nu,
    fit_third_step,
    reference_bandwidth,
    select_bandwidth,
    statistic,
)
from .errors import LengthMismatch
from .first_step import FirstStepFit, compute_trimming, fit_first_step, silverman_bandwidth
from .kernels import _safe_ratio, nw_fit, pairwise_kernel
from .sls import SlsFit, build_index, fit_sls
from .types import (
    AUTO,
    BandwidthSpec,
    KernelSpec,
    ModelSpec,
    Sample,
    TestConfig,
    TrimmingSpec,
    validate_sample,
)


@dataclass(frozen=True)
class BootstrapDraw:
    """One bootstrap sample: both equations share the same weight vector."""

    y_star: np.ndarray
    d_star: np.ndarray
    xi: np.ndarray


@dataclass(frozen=True)
class TestResult:
    s_n: float
    s_star: np.ndarray
    critical_values: dict
    p_value: float
    beta_hat: np.ndarray
    h_selected: float
    reject: dict
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PipelineFit:
    """Everything the three-step procedure produces on one (possibly
    bootstrap) sample."""

    s: float
    beta_hat: np.ndarray
    h: float
    sls: SlsFit
    third: object
    nu: NuValues
    first: FirstStepFit


def rademacher(rng, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0


def draw_bootstrap(sample: Sample, fitted_g_hat_at_w_hat, h_hat, rng) -> BootstrapDraw:
    """Coupled wild draw: y* and d* reflect the residuals around the
    uncorrected fits with one shared Rademacher weight per unit."""
    g = np.asarray(fitted_g_hat_at_w_hat, dtype=np.float64).ravel()
    hh = np.asarray(h_hat, dtype=np.float64).ravel()
    n = sample.n
    if g.shape != (n,) or hh.shape != (n,):
        raise LengthMismatch("fitted vectors must have length n")
    xi = rademacher(rng, n)
    y_star = g + xi * (sample.y - g)
    d_star = hh + xi * (sample.d - hh)
    return BootstrapDraw(y_star=y_star, d_star=d_star, xi=xi)


def bootstrap_first_step(sample: Sample, d_star, first: FirstStepFit,
                         kspec: KernelSpec = KernelSpec(),
                         bias_corrected: bool = True) -> FirstStepFit:
    """First step on the bootstrap sample.

    Numerator sums carry the trimming indicators; the denominator is the
    density estimate from the original sample. The correction residual is
    d*_i minus the original-sample fit, matching the resampling scheme.
    """
    z = sample.z
    n = sample.n
    h = first.h_used
    t = first.trim
    kmat = pairwise_kernel(z, z, h)
    scale = 1.0 / (n * np.prod(h))
    num = scale * (kmat @ (np.asarray(d_star) * t))
    h_hat_star = _safe_ratio(num, first.f_z)
    if bias_corrected:
        corr = scale * (kmat @ ((np.asarray(d_star) - first.h_hat) * t))
        h_tilde_star = h_hat_star + _safe_ratio(corr, first.f_z)
    else:
        h_tilde_star = h_hat_star.copy()
    return FirstStepFit(h_hat=h_hat_star, h_tilde=h_tilde_star, trim=t,
                        f_z=first.f_z, h_used=h)


def run_pipeline(sample: Sample, first: FirstStepFit, model: ModelSpec,
                 kspec: KernelSpec, config: TestConfig,
                 bandwidth_mode=("auto",)) -> PipelineFit:
    """Second and third step on a prepared sample: estimate the coefficients,
    pick the third-step bandwidth, and evaluate the closed-form statistic.

    ``bandwidth_mode`` is ("auto",) for the data-driven selector,
    ("rule", C) for C * sigma(index) * n**(-1/6), or ("fixed", h).
    """
    sls_fit = fit_sls(sample, first, model, kspec, config)
    beta_hat = sls_fit.beta_hat
    nu = build_nu(sample, first, model, config.standardize_nu)
    mode = bandwidth_mode[0]
    if mode == "auto":
        h = select_bandwidth(sample, first, beta_hat, model, kspec,
                             bias_corrected=config.bias_corrected, nu=nu)
    elif mode == "rule":
        h = bandwidth_mode[1] * reference_bandwidth(sample, first, beta_hat, model)
    elif mode == "fixed":
        h = float(bandwidth_mode[1])
    else:
        raise ValueError(f"unknown bandwidth mode {bandwidth_mode!r}")
    third = fit_third_step(sample, first, beta_hat, h, model, kspec,
                           bias_corrected=config.bias_corrected)
    s = statistic(third, nu, first.trim)
    return PipelineFit(s=s, beta_hat=beta_hat, h=h, sls=sls_fit, third=third,
                       nu=nu, first=first)


def uncorrected_dgp_fits(sample: Sample, first: FirstStepFit, beta_hat,
                         h: float, model: ModelSpec,
                         kspec: KernelSpec = KernelSpec()):
    """The two uncorrected fits entering the bootstrap data-generating
    process: the plain first-step fit and the trimmed regression of y on the
    index built from it."""
    idx = build_index(beta_hat, sample, first, model, use_boosted=False)
    g_hat = nw_fit(sample.y, idx.w, idx.w, np.full(idx.d, h), kspec,
                   weights=first.trim).ratio
    return g_hat, first.h_hat


def bootstrap_statistic(sample: Sample, draw: BootstrapDraw, model: ModelSpec,
                        kspec: KernelSpec, first: FirstStepFit,
                        config: TestConfig, bandwidth_mode=("auto",),
                        pinned=None) -> float:
    """Statistic on one bootstrap sample by re-running the whole pipeline.

    ``pinned`` = (beta_hat, h) skips the bootstrap-side optimizations; this is
    a non-conforming fast mode for smoke tests only.
    """
    boot_sample = Sample(y=draw.y_star, d=draw.d_star, x=sample.x, z=sample.z)
    boot_first = bootstrap_first_step(sample, draw.d_star, first, kspec,
                                      bias_corrected=config.bias_corrected)
    if pinned is not None:
        beta_hat, h = pinned
        nu = build_nu(boot_sample, boot_first, model, config.standardize_nu)
        third = fit_third_step(boot_sample, boot_first, beta_hat, h, model,
                               kspec, bias_corrected=config.bias_corrected)
        return statistic(third, nu, boot_first.trim)
    return run_pipeline(boot_sample, boot_first, model, kspec, config,
                        bandwidth_mode).s


def critical_values(s_star, alpha_levels) -> dict:
    """Per-level critical value: the ceil((1-alpha)(J+1))-th order statistic
    of the bootstrap draws (capped at the largest draw)."""
    s_sorted = np.sort(np.asarray(s_star, dtype=np.float64))
    j = s_sorted.size
    out = {}
    for a in alpha_levels:
        k = int(np.ceil((1.0 - a) * (j + 1)))
        k = min(max(k, 1), j)
        out[float(a)] = float(s_sorted[k - 1])
    return out


def p_value(s_n: float, s_star) -> float:
    s_star = np.asarray(s_star, dtype=np.float64)
    return float((1 + np.sum(s_star >= s_n)) / (s_star.size + 1))


def _boot_rng(seed: int, j: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1, j)))


def run_test(sample: Sample, model: ModelSpec, kspec: KernelSpec = KernelSpec(),
             trim_spec: TrimmingSpec = TrimmingSpec(),
             config: TestConfig = TestConfig(),
             bands: BandwidthSpec = BandwidthSpec(),
             bandwidth_mode=None, fast: bool = False) -> TestResult:
    """Full test: three-step statistic, J bootstrap replications, critical
    values, and the finite-sample p-value. Deterministic given the seed."""
    validate_sample(sample)
    h_density = bands.h_density
    trim = compute_trimming(sample, trim_spec, kspec, h_density)
    first = fit_first_step(sample, kspec, bands, trim,
                           bias_corrected=config.bias_corrected)
    if bandwidth_mode is None:
        bandwidth_mode = ("auto",) if bands.h_third == AUTO else ("fixed", bands.h_third)
    pipe = run_pipeline(sample, first, model, kspec, config, bandwidth_mode)

    g_hat_w, h_hat_z = uncorrected_dgp_fits(sample, first, pipe.beta_hat,
                                            pipe.h, model, kspec)
    pinned = (pipe.beta_hat, pipe.h) if fast else None

    def one_draw(j):
        draw = draw_bootstrap(sample, g_hat_w, h_hat_z, _boot_rng(config.seed, j))
        return bootstrap_statistic(sample, draw, model, kspec, first, config,
                                   bandwidth_mode, pinned=pinned)

    if config.n_jobs > 1:
        from joblib import Parallel, delayed

        s_star = np.array(Parallel(n_jobs=config.n_jobs)(
            delayed(one_draw)(j) for j in range(config.n_bootstrap)))
    else:
        s_star = np.array([one_draw(j) for j in range(config.n_bootstrap)])

    crit = critical_values(s_star, config.alpha_levels)
    pv = p_value(pipe.s, s_star)
    reject = {a: bool(pipe.s > c) for a, c in crit.items()}
    diagnostics = {
        "n": sample.n,
        "trimmed_out": int(sample.n - np.sum(first.trim)),
        "h_first": [float(v) for v in first.h_used],
        "sls_criterion": pipe.sls.criterion_value,
        "sls_h_bar": pipe.sls.h_bar,
        "optimizer_trace": pipe.sls.optimizer_trace,
        "seed": config.seed,
        "fast_mode_nonconforming": bool(fast),
    }
    return TestResult(s_n=pipe.s, s_star=s_star, critical_values=crit,
                      p_value=pv, beta_hat=pipe.beta_hat, h_selected=pipe.h,
                      reject=reject, diagnostics=diagnostics)


def warp_speed_pvalues(mc_statistics, pooled_bootstrap) -> np.ndarray:
    """p-value of each replication's statistic against the pooled set of
    single-draw bootstrap statistics."""
    s = np.asarray(mc_statistics, dtype=np.float64)
    pooled = np.asarray(pooled_bootstrap, dtype=np.float64)
    if s.ndim != 1 or s.shape != pooled.shape or s.size < 1:
        raise LengthMismatch(
            f"need equal-length vectors, got {s.shape} and {pooled.shape}")
    m = s.size
    pooled_sorted = np.sort(pooled)
    n_below = np.searchsorted(pooled_sorted, s, side="left")
    return (1 + (m - n_below)) / (m + 1)
