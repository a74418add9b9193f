"""Rubin's rules for multiply-imputed estimates."""
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import special

from .dataset import EstimateVector
from .exceptions import CombiningError

UNBOUNDED = math.inf


@dataclass(frozen=True)
class PooledEstimate:
    theta_bar: np.ndarray
    W: np.ndarray
    V: np.ndarray
    total_cov: np.ndarray
    df: np.ndarray
    M: int

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.total_cov), 0.0, None))

    def fraction_missing(self) -> np.ndarray:
        return np.array([
            mi_fraction_missing(w, v) if w + v > 0 else 0.0
            for w, v in zip(np.diag(self.W), np.diag(self.V))
        ])


def _stack(estimates: Sequence[EstimateVector]) -> np.ndarray:
    if len(estimates) == 0:
        raise CombiningError("cannot pool an empty sequence of estimates")
    lengths = {estimate.k for estimate in estimates}
    if len(lengths) != 1:
        raise CombiningError(f"estimates have ragged lengths {sorted(lengths)}")
    return np.vstack([estimate.theta_hat for estimate in estimates])


def pool_point(estimates: Sequence[EstimateVector]) -> np.ndarray:
    return _stack(estimates).mean(axis=0)


def pool_cov(estimates: Sequence[EstimateVector]) -> PooledEstimate:
    thetas = _stack(estimates)
    M = thetas.shape[0]
    if M < 2:
        raise CombiningError("between-variance undefined for M < 2")
    if any(estimate.cov_hat is None for estimate in estimates):
        raise CombiningError("every estimate needs a covariance to pool")
    theta_bar = thetas.mean(axis=0)
    W = np.mean([estimate.cov_hat for estimate in estimates], axis=0)
    centered = thetas - theta_bar
    V = centered.T @ centered / (M - 1)
    total = W + ((M + 1) / M) * V
    df = np.array([barnard_rubin_df(w, v, M) for w, v in zip(np.diag(W), np.diag(V))])
    return PooledEstimate(theta_bar, W, V, total, df, M)


def barnard_rubin_df(W_j: float, V_j: float, M: int) -> float:
    """Degrees of freedom (M-1)(1 + M W / ((M+1) V))^2; unbounded when V = 0"""
    if M < 2:
        raise CombiningError("degrees of freedom need M >= 2")
    if W_j < 0 or V_j < 0:
        raise CombiningError("variances must be non-negative")
    if V_j == 0:
        return UNBOUNDED
    return (M - 1) * (1.0 + M * W_j / ((M + 1) * V_j)) ** 2


def mi_fraction_missing(W_j: float, V_j: float) -> float:
    if W_j + V_j <= 0:
        raise CombiningError("fraction of missing information undefined when W = V = 0")
    return V_j / (W_j + V_j)


def relative_efficiency(gamma: float, M: int) -> float:
    if not 0.0 <= gamma <= 1.0 or M < 1:
        raise CombiningError("need gamma in [0, 1] and M >= 1")
    return 1.0 / (1.0 + gamma / M)


def t_quantile(p: float, df: float) -> float:
    """Quantile of Student's t through the inverse regularized incomplete beta"""
    if not 0.0 < p < 1.0:
        raise CombiningError("quantile level must lie in (0, 1)")
    if math.isinf(df):
        return float(special.ndtri(p))
    if df <= 0:
        raise CombiningError("degrees of freedom must be positive")
    if p == 0.5:
        return 0.0
    tail = 2.0 * min(p, 1.0 - p)
    x = special.betaincinv(df / 2.0, 0.5, tail)
    magnitude = math.sqrt(df * (1.0 - x) / x)
    return magnitude if p > 0.5 else -magnitude


def t_interval(theta_bar_j: float, total_var_j: float, df_j: float, alpha: float) -> Tuple[float, float]:
    if total_var_j < 0:
        raise CombiningError("total variance must be non-negative")
    half = t_quantile(1.0 - alpha, df_j) * math.sqrt(total_var_j)
    return theta_bar_j - half, theta_bar_j + half
