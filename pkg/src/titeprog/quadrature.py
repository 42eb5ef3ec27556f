"""Gauss-Hermite posterior quadrature kernels.

The posterior mean of the model slope is the hot inner loop of every
simulated trial: it is evaluated once per dose assignment, against every
quadrature node. Two interchangeable kernel implementations are provided:

* a numba ``@njit`` kernel (default when numba imports), and
* a pure-numpy fallback.

Selection is controlled by the ``TITEPROG_BACKEND`` environment variable
(``numba`` or ``numpy``); unset means numba when available. The two paths
agree to float roundoff but are not guaranteed bit-identical to each other;
each path is individually deterministic.

Quadrature: 191-node Gauss-Hermite against the centred normal prior.
Observations are pre-grouped so that full-weight terms collapse into
per-dose counts and only partial-weight censored terms pay a per-node log.
"""

import math
import os

import numpy as np

GH_NODES = 191

# Clamp for w*psi inside likelihood terms; keeps log() finite at extreme slopes.
CLAMP_EPS = 1e-12

_gh_x, _gh_w = np.polynomial.hermite.hermgauss(GH_NODES)
_GH_X = np.ascontiguousarray(_gh_x)
_GH_LOGW = np.ascontiguousarray(np.log(_gh_w))


def _select_backend() -> str:
    choice = os.environ.get("TITEPROG_BACKEND", "").strip().lower()
    if choice == "numpy":
        return "numpy"
    if choice == "numba":
        import numba  # noqa: F401  (raises if unavailable, which is the point)

        return "numba"
    if choice:
        raise ValueError(f"TITEPROG_BACKEND must be 'numba' or 'numpy', got {choice!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


_BACKEND = _select_backend()


def backend_name() -> str:
    """Active kernel backend, recorded in run manifests."""
    return _BACKEND


class QuadTable:
    """Per-(skeleton, prior sd) quadrature tables.

    betas      : slope value at each node (sqrt(2)*sd*x_j)
    log_prior_w: log Gauss-Hermite weight per node (prior absorbed)
    psi        : K x J dose-toxicity probabilities p_k^exp(beta_j), clamped
    log_psi    : log of psi
    log1m_psi  : log(1 - psi)
    """

    __slots__ = ("betas", "log_prior_w", "psi", "log_psi", "log1m_psi")

    def __init__(self, probs: tuple, prior_sd: float):
        betas = math.sqrt(2.0) * prior_sd * _GH_X
        exp_beta = np.exp(betas)
        log_p = np.log(np.asarray(probs, dtype=np.float64))
        # psi[k, j] = p_k ** exp(beta_j); underflow to 0 is benign, clamped below
        with np.errstate(under="ignore"):
            psi = np.exp(np.outer(log_p, exp_beta))
        psi = np.clip(psi, CLAMP_EPS, 1.0 - CLAMP_EPS)
        self.betas = np.ascontiguousarray(betas)
        self.log_prior_w = _GH_LOGW
        self.psi = np.ascontiguousarray(psi)
        self.log_psi = np.ascontiguousarray(np.log(psi))
        self.log1m_psi = np.ascontiguousarray(np.log1p(-psi))


_TABLE_CACHE: dict = {}


def quad_table(probs: tuple, prior_sd: float) -> QuadTable:
    key = (probs, prior_sd)
    table = _TABLE_CACHE.get(key)
    if table is None:
        if len(_TABLE_CACHE) > 64:
            _TABLE_CACHE.clear()
        table = QuadTable(probs, prior_sd)
        _TABLE_CACHE[key] = table
    return table


def _posterior_mean_numpy(tox_counts, cens_counts, part_dose, part_w, table):
    s = table.log_prior_w + tox_counts @ table.log_psi + cens_counts @ table.log1m_psi
    if part_dose.size:
        x = np.clip(part_w[:, None] * table.psi[part_dose, :], CLAMP_EPS, 1.0 - CLAMP_EPS)
        s = s + np.log1p(-x).sum(axis=0)
    m = s.max()
    if not np.isfinite(m):
        raise FloatingPointError("non-finite posterior integrand")
    e = np.exp(s - m)
    return float((table.betas * e).sum() / e.sum())


def _posterior_mean_loop(tox_counts, cens_counts, part_dose, part_w,
                         betas, log_prior_w, psi, log_psi, log1m_psi):
    nj = betas.shape[0]
    nk = tox_counts.shape[0]
    np_part = part_dose.shape[0]
    s = np.empty(nj)
    m = -1e300
    for j in range(nj):
        ll = log_prior_w[j]
        for k in range(nk):
            if tox_counts[k] > 0.0:
                ll += tox_counts[k] * log_psi[k, j]
            if cens_counts[k] > 0.0:
                ll += cens_counts[k] * log1m_psi[k, j]
        for i in range(np_part):
            x = part_w[i] * psi[part_dose[i], j]
            if x < CLAMP_EPS:
                x = CLAMP_EPS
            elif x > 1.0 - CLAMP_EPS:
                x = 1.0 - CLAMP_EPS
            ll += math.log1p(-x)
        s[j] = ll
        if ll > m:
            m = ll
    num = 0.0
    den = 0.0
    for j in range(nj):
        e = math.exp(s[j] - m)
        num += betas[j] * e
        den += e
    return num / den


if _BACKEND == "numba":
    from numba import njit

    _posterior_mean_jit = njit(cache=True)(_posterior_mean_loop)

    def _posterior_mean_numba(tox_counts, cens_counts, part_dose, part_w, table):
        out = _posterior_mean_jit(
            tox_counts, cens_counts, part_dose, part_w,
            table.betas, table.log_prior_w, table.psi, table.log_psi, table.log1m_psi,
        )
        if not math.isfinite(out):
            raise FloatingPointError("non-finite posterior integrand")
        return out

    posterior_mean_grouped = _posterior_mean_numba
else:
    posterior_mean_grouped = _posterior_mean_numpy


def posterior_mean_for(tox_counts, cens_counts, part_dose, part_w, probs, prior_sd):
    """Posterior mean slope for grouped observations against skeleton ``probs``."""
    table = quad_table(probs, prior_sd)
    return posterior_mean_grouped(tox_counts, cens_counts, part_dose, part_w, table)


def warmup() -> None:
    """Force JIT compilation ahead of worker forks; no-op on the numpy path."""
    probs = (0.05, 0.10, 0.25, 0.40, 0.55)
    posterior_mean_for(
        np.zeros(5), np.zeros(5), np.zeros(0, dtype=np.int64), np.zeros(0), probs, 1.0
    )
