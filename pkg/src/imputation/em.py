"""Multivariate-normal EM under ignorable missingness, with sweep-operator conditionals."""
import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from ..core.dataset import IncompleteDataset
from ..core.exceptions import ConvergenceWarning, ImputationError, SingularCovarianceError
from ..stochastics.streams import RngStream

logger = logging.getLogger(__name__)

SINGULAR_CONDITION = 1e12
PSD_TOLERANCE = 1e-8
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class MvnParams:
    mu: np.ndarray
    sigma: np.ndarray
    iterations: int = 0
    converged: bool = True
    loglik_trace: Tuple[float, ...] = ()

    def __post_init__(self):
        mu = np.atleast_1d(np.array(self.mu, dtype=float))
        sigma = np.atleast_2d(np.array(self.sigma, dtype=float))
        if sigma.shape != (mu.shape[0], mu.shape[0]):
            raise ImputationError("mu and sigma disagree in dimension")
        sigma = (sigma + sigma.T) / 2.0
        eigenvalues, eigenvectors = np.linalg.eigh(sigma)
        scale = max(1.0, float(np.max(np.abs(eigenvalues)))) if eigenvalues.size else 1.0
        if eigenvalues.size and eigenvalues.min() < -PSD_TOLERANCE * scale:
            raise ImputationError(f"sigma is not positive semi-definite (eigenvalue {eigenvalues.min():.3g})")
        if eigenvalues.size and eigenvalues.min() < 0:
            sigma = (eigenvectors * np.clip(eigenvalues, 0.0, None)) @ eigenvectors.T
            sigma = (sigma + sigma.T) / 2.0
        mu.flags.writeable = False
        sigma.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "loglik_trace", tuple(self.loglik_trace))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def sweep(matrix, pivot: int, reverse: bool = False) -> np.ndarray:
    """Sweep (or reverse-sweep) a square matrix on one pivot"""
    g = np.array(matrix, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ImputationError("sweep needs a square matrix")
    d = g[pivot, pivot]
    if d == 0.0:
        raise ImputationError(f"zero pivot at index {pivot}")
    column = g[:, pivot].copy()
    row = g[pivot, :].copy()
    out = g - np.outer(column, row) / d
    sign = -1.0 if reverse else 1.0
    out[:, pivot] = sign * column / d
    out[pivot, :] = sign * row / d
    out[pivot, pivot] = -1.0 / d
    return out


def sweep_block(matrix, pivots: Sequence[int], reverse: bool = False) -> np.ndarray:
    """Sweep on a set of distinct pivots at once; equals successive single sweeps"""
    g = np.array(matrix, dtype=float)
    pivots = np.asarray(pivots, dtype=np.intp)
    if pivots.size == 0:
        return g
    if np.unique(pivots).size != pivots.size:
        raise ImputationError("block sweep needs distinct pivots")
    rest = np.setdiff1d(np.arange(g.shape[0]), pivots)
    try:
        inverse = np.linalg.inv(g[np.ix_(pivots, pivots)])
    except np.linalg.LinAlgError:
        raise ImputationError("singular pivot block") from None
    sign = -1.0 if reverse else 1.0
    left = g[np.ix_(rest, pivots)] @ inverse
    right = inverse @ g[np.ix_(pivots, rest)]
    out = np.empty_like(g)
    out[np.ix_(pivots, pivots)] = -inverse
    out[np.ix_(rest, pivots)] = sign * left
    out[np.ix_(pivots, rest)] = sign * right
    out[np.ix_(rest, rest)] = g[np.ix_(rest, rest)] - left @ g[np.ix_(pivots, rest)]
    return out


def _ridge(sigma: np.ndarray, ridge: float) -> float:
    return ridge * float(np.trace(sigma)) / sigma.shape[0] if ridge > 0 else 0.0


def conditional_normal(
    mu: np.ndarray, sigma: np.ndarray, observed: np.ndarray, ridge: float = 0.0
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Intercept, coefficients and residual covariance of missing-on-observed.

    Sweeps the augmented moment matrix [[-1, mu'], [mu, sigma]] on the
    observed coordinates; returns (intercept[m], coef[m x o], residual[m x m]).
    """
    d = mu.shape[0]
    observed = np.asarray(observed, dtype=np.intp)
    missing = np.setdiff1d(np.arange(d), observed)
    augmented = np.empty((d + 1, d + 1))
    augmented[0, 0] = -1.0
    augmented[0, 1:] = mu
    augmented[1:, 0] = mu
    augmented[1:, 1:] = sigma
    bump = _ridge(sigma, ridge)
    if bump:
        augmented[observed + 1, observed + 1] += bump
    swept = sweep_block(augmented, observed + 1)
    m_idx = missing + 1
    intercept = swept[0, m_idx]
    coef = swept[np.ix_(observed + 1, m_idx)].T
    residual = swept[np.ix_(m_idx, m_idx)]
    return intercept, coef, (residual + residual.T) / 2.0


def _pattern_groups(mask: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """(rows, observed columns, missing columns) per distinct missingness pattern"""
    patterns, inverse = np.unique(mask, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(patterns.shape[0] + 1))
    groups = []
    for p, pattern in enumerate(patterns):
        rows = order[bounds[p]:bounds[p + 1]]
        groups.append((rows, np.flatnonzero(~pattern), np.flatnonzero(pattern)))
    return groups


def _gaussian_loglik(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    try:
        factor = linalg.cho_factor(sigma, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise ImputationError("singular marginal covariance") from None
    centered = x - mu
    solved = linalg.cho_solve(factor, centered.T, check_finite=False)
    quad = float(np.sum(centered.T * solved))
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    k, dim = x.shape
    return -0.5 * (k * (dim * _LOG_2PI + logdet) + quad)


def _loglik_from_groups(values, groups, mu, sigma, ridge) -> float:
    bump = _ridge(sigma, ridge)
    total = 0.0
    for rows, obs, _ in groups:
        if obs.size == 0:
            continue
        block = sigma[np.ix_(obs, obs)]
        if bump:
            block = block + bump * np.eye(obs.size)
        total += _gaussian_loglik(values[np.ix_(rows, obs)], mu[obs], block)
    return total


def observed_loglik(dataset: IncompleteDataset, params: MvnParams, ridge: float = 0.0) -> float:
    """Observed-data log-likelihood: each row's observed sub-vector under its marginal"""
    if params.dim != dataset.n_cols:
        raise ImputationError("params dimension does not match the dataset")
    values = np.where(dataset.mask, 0.0, dataset.values)
    return _loglik_from_groups(values, _pattern_groups(dataset.mask), params.mu, params.sigma, ridge)


def correlation_condition(sigma: np.ndarray) -> float:
    scale = np.sqrt(np.diag(sigma))
    if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
        return np.inf
    return float(np.linalg.cond(sigma / np.outer(scale, scale)))


def _complete_mle(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mu = values.mean(axis=0)
    centered = values - mu
    return mu, centered.T @ centered / values.shape[0]


def em_fit(
    dataset: IncompleteDataset,
    tol: float = 1e-8,
    max_iter: int = 1000,
    ridge: float = 1e-8,
) -> MvnParams:
    """Maximum-likelihood mean and covariance of a multivariate normal with missing cells.

    Stops when the relative change of the observed-data log-likelihood drops
    below ``tol``. Reaching ``max_iter`` returns the current estimate with
    ``converged=False`` and a ConvergenceWarning.
    """
    if max_iter < 1:
        raise ImputationError("max_iter must be positive")
    values = np.where(dataset.mask, 0.0, dataset.values)
    n, d = values.shape

    if dataset.is_complete:
        mu, sigma = _complete_mle(values)
        condition = correlation_condition(sigma)
        if condition > SINGULAR_CONDITION:
            raise SingularCovarianceError(1, condition)
        return MvnParams(mu, sigma, iterations=1, converged=True)

    groups = _pattern_groups(dataset.mask)
    observed_counts = (~dataset.mask).sum(axis=0)
    mu = values.sum(axis=0) / observed_counts
    variances = np.array([
        np.var(values[~dataset.mask[:, j], j]) for j in range(d)
    ])
    sigma = np.diag(variances)
    condition = correlation_condition(sigma)
    if condition > SINGULAR_CONDITION:
        raise SingularCovarianceError(0, condition)

    trace: List[float] = []
    previous: Optional[float] = None
    for iteration in range(1, max_iter + 1):
        t1 = np.zeros(d)
        t2 = np.zeros((d, d))
        loglik = 0.0
        bump = _ridge(sigma, ridge)
        for rows, obs, mis in groups:
            x_obs = values[np.ix_(rows, obs)]
            k = rows.size
            if obs.size:
                block = sigma[np.ix_(obs, obs)]
                if bump:
                    block = block + bump * np.eye(obs.size)
                loglik += _gaussian_loglik(x_obs, mu[obs], block)
            if mis.size == 0:
                t1 += x_obs.sum(axis=0)
                t2 += x_obs.T @ x_obs
                continue
            full = np.empty((k, d))
            if obs.size:
                intercept, coef, residual = conditional_normal(mu, sigma, obs, ridge)
                full[:, obs] = x_obs
                full[:, mis] = intercept + x_obs @ coef.T
            else:
                residual = sigma
                full[:] = mu
            t1 += full.sum(axis=0)
            t2 += full.T @ full
            t2[np.ix_(mis, mis)] += k * residual

        trace.append(loglik)
        if previous is not None and abs(loglik - previous) <= tol * abs(previous):
            return MvnParams(mu, sigma, iterations=iteration - 1, converged=True, loglik_trace=trace)
        previous = loglik

        mu = t1 / n
        sigma = t2 / n - np.outer(mu, mu)
        sigma = (sigma + sigma.T) / 2.0
        condition = correlation_condition(sigma)
        if condition > SINGULAR_CONDITION:
            raise SingularCovarianceError(iteration, condition)

    logger.warning("EM stopped at max_iter=%d without meeting tol=%g", max_iter, tol)
    warnings.warn(f"EM did not converge in {max_iter} iterations", ConvergenceWarning, stacklevel=2)
    return MvnParams(mu, sigma, iterations=max_iter, converged=False, loglik_trace=trace)


def _normal_draws(gen: np.random.Generator, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Rows of N(mean_i, cov); a degenerate cov returns the means exactly"""
    k, m = mean.shape
    eigenvalues, eigenvectors = np.linalg.eigh((cov + cov.T) / 2.0)
    root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
    z = gen.standard_normal((k, m))
    return mean + z @ root.T


def _finish_binary(draws: np.ndarray, binary: np.ndarray) -> np.ndarray:
    if binary.any():
        draws[:, binary] = (np.clip(draws[:, binary], 0.0, 1.0) >= 0.5).astype(float)
    return draws


def draw_missing(
    values: np.ndarray,
    mask: np.ndarray,
    params: MvnParams,
    gen: np.random.Generator,
    binary: Optional[np.ndarray] = None,
    ridge: float = 0.0,
) -> np.ndarray:
    """Complete every masked cell by a conditional-normal draw, pattern by pattern"""
    completed = np.where(mask, 0.0, values)
    binary = np.zeros(values.shape[1], dtype=bool) if binary is None else np.asarray(binary, dtype=bool)
    for rows, obs, mis in _pattern_groups(mask):
        if mis.size == 0:
            continue
        if obs.size:
            intercept, coef, residual = conditional_normal(params.mu, params.sigma, obs, ridge)
            mean = intercept + completed[np.ix_(rows, obs)] @ coef.T
        else:
            residual = params.sigma
            mean = np.tile(params.mu, (rows.size, 1))
        draws = _normal_draws(gen, mean, residual)
        completed[np.ix_(rows, mis)] = _finish_binary(draws, binary[mis])
    return completed


def conditional_draw(
    row,
    missing,
    params: MvnParams,
    stream: RngStream,
    binary: Optional[Sequence[bool]] = None,
    ridge: float = 0.0,
) -> np.ndarray:
    """Complete one partially observed row from its conditional normal"""
    row = np.asarray(row, dtype=float)
    missing = np.asarray(missing, dtype=bool)
    if not missing.any():
        return row.copy()
    if missing.all():
        raise ImputationError("conditional draw needs at least one observed coordinate")
    completed = draw_missing(row[None, :], missing[None, :], params, stream.generator(), binary, ridge)
    return completed[0]

