"""Third step: bias-corrected residuals, the data-driven bandwidth selector,
and the Cramer-von Mises statistic in closed form.

The weighting family is fixed to the complex exponential with a standard
Gaussian integrating measure over the whole space, which collapses the
integral into the quadratic form (1/n) a' G a with G_ij the Gaussian
characteristic function exp(-||nu_i - nu_j||^2 / 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .first_step import FirstStepFit
from .kernels import boost_correct, nw_fit, pairwise_kernel, _safe_ratio
from .sls import build_index, generated_covariate
from .types import KernelSpec, ModelSpec, Sample


@dataclass(frozen=True)
class ThirdStepFit:
    """Regression fits, density values, and residuals at the data indices."""

    g_hat: np.ndarray
    g_tilde: np.ndarray
    f_w: np.ndarray
    residuals: np.ndarray
    h_selected: float


@dataclass(frozen=True)
class NuValues:
    """Weighting covariates nu_i and their Gaussian gram matrix."""

    nu: np.ndarray
    gram: np.ndarray


def gram_matrix(nu) -> np.ndarray:
    """Symmetric PSD matrix with entries exp(-||nu_i - nu_j||^2 / 2)."""
    nu = np.atleast_2d(np.asarray(nu, dtype=np.float64))
    sq = np.zeros((nu.shape[0], nu.shape[0]))
    for k in range(nu.shape[1]):
        diff = nu[:, k, None] - nu[None, :, k]
        sq += diff * diff
    g = np.exp(-0.5 * sq)
    np.fill_diagonal(g, 1.0)
    return g


def build_nu(sample: Sample, first_step: FirstStepFit, model: ModelSpec,
             standardize: bool = False) -> NuValues:
    """nu_i = (x_i, generated covariate at i), optionally column-standardized
    to unit variance before forming the gram (off by default)."""
    g = generated_covariate(sample, first_step, model, use_boosted=True)
    nu = np.column_stack([sample.x, g])
    if standardize:
        sd = nu.std(axis=0, ddof=1)
        sd[sd <= 0] = 1.0
        nu = nu / sd
    return NuValues(nu=nu, gram=gram_matrix(nu))


def golden_section(f, a: float, b: float, tol: float = 1e-4):
    """Golden-section minimization of f on [a, b]; returns (x, f(x))."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def _loo_cvm_residuals(y, w, h: float, trim, bias_corrected: bool) -> np.ndarray:
    """Leave-one-out residuals entering the bandwidth-selection objective."""
    n, d = w.shape
    kmat = pairwise_kernel(w, w, np.full(d, h))
    np.fill_diagonal(kmat, 0.0)
    num = kmat @ y
    den = kmat @ np.ones(n)
    g_loo = _safe_ratio(num, den)
    eps_loo = y - g_loo
    if not bias_corrected:
        return eps_loo
    scale = 1.0 / (n * h**d)
    t_num = scale * (kmat @ (eps_loo * trim))
    f_loo = scale * (kmat @ trim)
    return eps_loo - _safe_ratio(t_num, f_loo)


def selection_objective(sample: Sample, first_step: FirstStepFit, beta_hat,
                        model: ModelSpec, nu: NuValues, h: float,
                        bias_corrected: bool = True) -> float:
    """Closed-form double sum (1/n^2) sum_ij r_i r_j G_ij of the leave-one-out
    residuals against the Gaussian gram; nonnegative by positive
    semi-definiteness of the gram."""
    idx = build_index(beta_hat, sample, first_step, model)
    r = _loo_cvm_residuals(sample.y, idx.w, h, first_step.trim, bias_corrected)
    n = sample.n
    return float(r @ nu.gram @ r) / (n * n)


def reference_bandwidth(sample: Sample, first_step: FirstStepFit, beta_hat,
                        model: ModelSpec) -> float:
    """Rule-of-thumb starting value: geometric mean of the index standard
    deviations times n**(-1/6); falls back to 1 for a degenerate index."""
    idx = build_index(beta_hat, sample, first_step, model)
    sd = idx.w.std(axis=0, ddof=1)
    if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
        return 1.0
    return float(np.exp(np.mean(np.log(sd))) * sample.n ** (-1.0 / 6.0))


def select_bandwidth(sample: Sample, first_step: FirstStepFit, beta_hat,
                     model: ModelSpec, kspec: KernelSpec = KernelSpec(),
                     bias_corrected: bool = True,
                     nu: NuValues | None = None) -> float:
    """Bandwidth minimizing the leave-one-out Cramer-von Mises distance
    between the fitted model and the null, by golden-section search over
    log h around the rule-of-thumb value. Ties go to the rule-of-thumb."""
    if nu is None:
        nu = build_nu(sample, first_step, model)
    h_s = reference_bandwidth(sample, first_step, beta_hat, model)

    def obj_log(t):
        return selection_objective(sample, first_step, beta_hat, model, nu,
                                   float(np.exp(t)), bias_corrected)

    # Coarse grid to bracket the global minimum over the search window (the
    # objective can be multimodal in h), then golden-section refinement.
    log_hs = np.log(h_s)
    grid = np.linspace(log_hs - 2.0, log_hs + 2.0, 25)
    vals = np.array([obj_log(t) for t in grid])
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.size - 1)]
    t_best, f_best = golden_section(obj_log, a, b, tol=1e-4)
    if vals[k] < f_best:
        t_best, f_best = grid[k], vals[k]
    if f_best >= obj_log(log_hs) - 1e-12:
        return h_s
    return float(np.exp(t_best))


def fit_third_step(sample: Sample, first_step: FirstStepFit, beta_hat,
                   h: float, model: ModelSpec, kspec: KernelSpec = KernelSpec(),
                   bias_corrected: bool = True) -> ThirdStepFit:
    """Trimmed kernel regression of y on the index, with the one-step bias
    correction of the fit (skipped for the uncorrected variant)."""
    idx = build_index(beta_hat, sample, first_step, model)
    h_vec = np.full(idx.d, float(h))
    base = nw_fit(sample.y, idx.w, idx.w, h_vec, kspec, weights=first_step.trim)
    if bias_corrected:
        g_tilde = boost_correct(sample.y, idx.w, h_vec, kspec,
                                weights=first_step.trim, base_fit=base).ratio
    else:
        g_tilde = base.ratio.copy()
    return ThirdStepFit(
        g_hat=base.ratio,
        g_tilde=g_tilde,
        f_w=base.denominator,
        residuals=sample.y - g_tilde,
        h_selected=float(h),
    )


def statistic(third: ThirdStepFit, nu: NuValues, trim) -> float:
    """Closed-form statistic (1/n) a' G a with a_i = resid_i * f_w_i * trim_i."""
    trim = np.asarray(trim, dtype=np.float64).ravel()
    a = third.residuals * third.f_w * trim
    n = a.shape[0]
    return float(a @ nu.gram @ a) / n
