"""Second-step semiparametric least squares.

Builds the index variable for every model form and jointly minimizes the
leave-one-out squared-residual criterion over the free coefficients and the
log bandwidth with a multi-start Nelder-Mead search.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import DimensionMismatch, OptimizerDidNotMove
from .first_step import FirstStepFit
from .kernels import nw_fit_loo
from .types import GeneratedCovariate, IndexForm, KernelSpec, ModelSpec, Sample, TestConfig

_BOX_PENALTY = 1e6


@dataclass(frozen=True)
class IndexValues:
    """Index variable w_i = q(beta, x_i, generated covariate), shape (n, d)."""

    w: np.ndarray
    d: int


@dataclass(frozen=True)
class SlsFit:
    beta_hat: np.ndarray
    h_bar: float
    criterion_value: float
    optimizer_trace: tuple


def generated_covariate(sample: Sample, first_step: FirstStepFit,
                        model: ModelSpec, use_boosted: bool = True) -> np.ndarray:
    """The covariate built from the first step: residual d - fit, or the fit."""
    fit = first_step.h_tilde if use_boosted else first_step.h_hat
    if model.generated_covariate is GeneratedCovariate.RESIDUAL:
        return sample.d - fit
    return fit


def full_coefficients(beta, model: ModelSpec, n_cols: int) -> np.ndarray:
    """Expand the free parameters into the full coefficient vector of length
    ``n_cols``, inserting 1 at the normalized position when one is set."""
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if model.normalization is None:
        if beta.size != n_cols:
            raise DimensionMismatch(
                f"beta has {beta.size} entries, index needs {n_cols}")
        return beta
    if beta.size != n_cols - 1:
        raise DimensionMismatch(
            f"beta has {beta.size} entries, index needs {n_cols - 1} free ones")
    coef = np.empty(n_cols)
    pos = model.normalization
    coef[:pos] = beta[:pos]
    coef[pos] = 1.0
    coef[pos + 1:] = beta[pos:]
    return coef


def build_index(beta, sample: Sample, first_step: FirstStepFit,
                model: ModelSpec, use_boosted: bool = True) -> IndexValues:
    """W_i(beta) for the configured model form.

    Combined form: scalar index coef' (x_i, g_i) over the x columns and the
    generated covariate. Partial form: the pair (coef' x_i, g_i).
    """
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.size != model.beta_dim:
        raise DimensionMismatch(f"beta has {beta.size} entries, beta_dim={model.beta_dim}")
    g = generated_covariate(sample, first_step, model, use_boosted)
    if model.index_form is IndexForm.COMBINED:
        cols = np.column_stack([sample.x, g])
        coef = full_coefficients(beta, model, cols.shape[1])
        w = cols @ coef
        return IndexValues(w[:, None], 1)
    coef = full_coefficients(beta, model, sample.x.shape[1])
    w = np.column_stack([sample.x @ coef, g])
    return IndexValues(w, 2)


def sls_criterion(beta, log_h: float, sample: Sample, first_step: FirstStepFit,
                  model: ModelSpec, kspec: KernelSpec = KernelSpec()) -> float:
    """Sum over trimmed-in units of the squared leave-one-out residual of y
    smoothed on the index at bandwidth exp(log_h)."""
    h = float(np.exp(log_h))
    idx = build_index(beta, sample, first_step, model)
    loo = nw_fit_loo(sample.y, idx.w, h, kspec)
    resid = sample.y - loo.ratio
    return float(np.sum(first_step.trim * resid * resid))


def _index_bandwidth_start(beta, sample, first_step, model, kspec) -> float:
    idx = build_index(beta, sample, first_step, model)
    sd = idx.w.std(axis=0, ddof=1)
    if np.any(sd <= 0) or not np.all(np.isfinite(sd)):
        return 0.0
    n = sample.n
    return float(np.exp(np.mean(np.log(sd))) * n ** (-1.0 / 6.0))


def _starts(model: ModelSpec, sample, first_step, kspec, max_starts: int = 9):
    box = np.asarray(model.beta_box, dtype=np.float64)
    center = box.mean(axis=1)
    corners = [np.array(c) for c in itertools.product(*box)]
    betas = [center] + corners
    betas = betas[:max_starts]
    offsets = [0.0] + [(-0.7 if k % 2 == 0 else 0.7) for k in range(len(betas) - 1)]
    out = []
    for b, off in zip(betas, offsets):
        h0 = _index_bandwidth_start(b, sample, first_step, model, kspec)
        log_h0 = np.log(h0) if h0 > 0 else 0.0
        out.append(np.concatenate([b, [log_h0 + off]]))
    return out


def fit_sls(sample: Sample, first_step: FirstStepFit, model: ModelSpec,
            kspec: KernelSpec = KernelSpec(),
            config: TestConfig = TestConfig()) -> SlsFit:
    """Multi-start Nelder-Mead minimization of the leave-one-out criterion
    over (beta, log h). Deterministic: ties go to the lowest start index."""
    box = np.asarray(model.beta_box, dtype=np.float64)
    lo, hi = box[:, 0], box[:, 1]

    def objective(theta):
        beta, log_h = theta[:-1], theta[-1]
        clipped = np.clip(beta, lo, hi)
        excess = beta - clipped
        penalty = _BOX_PENALTY * float(excess @ excess)
        return sls_criterion(clipped, log_h, sample, first_step, model, kspec) + penalty

    best = None
    trace = []
    moved_any = False
    for k, x0 in enumerate(_starts(model, sample, first_step, kspec)):
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"maxiter": 500, "xatol": 1e-6, "fatol": 1e-6})
        moved = bool(np.max(np.abs(res.x - x0)) > 1e-12)
        moved_any = moved_any or moved
        trace.append({"start": k, "x0": tuple(x0), "x": tuple(res.x),
                      "criterion": float(res.fun), "nfev": int(res.nfev),
                      "moved": moved})
        if best is None or res.fun < best[1]:
            best = (res.x, float(res.fun))
    x, val = best
    if not moved_any and val > 0.0:
        raise OptimizerDidNotMove(
            "no start improved on its initial point; the criterion appears flat")
    beta_hat = np.clip(x[:-1], lo, hi)
    return SlsFit(beta_hat=beta_hat, h_bar=float(np.exp(x[-1])),
                  criterion_value=val, optimizer_trace=tuple(trace))
