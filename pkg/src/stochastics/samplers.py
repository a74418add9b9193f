from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy import special

from ..core.exceptions import SamplerError
from .streams import RngStream

# Setting 3 survival law
BASELINE_HAZARD = 0.1
CENSORING_RATE = 0.2
SURVIVAL_BETA = (-0.3, 0.3)

_U_LOW = np.finfo(float).tiny
_U_HIGH = np.nextafter(1.0, 0.0)


def bootstrap_indices(stream: RngStream, n: int) -> np.ndarray:
    """n row indices drawn uniformly with replacement"""
    if n < 1:
        raise SamplerError("bootstrap needs at least one row")
    return stream.generator().integers(0, n, size=n)


@dataclass(frozen=True)
class Marginal:
    """Inverse-CDF description of one copula coordinate"""

    kind: str
    params: Tuple[float, ...] = ()

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "Marginal":
        if sigma <= 0:
            raise SamplerError("normal marginal needs sigma > 0")
        return cls("normal", (mu, sigma))

    @classmethod
    def bernoulli(cls, p: float) -> "Marginal":
        if not 0.0 <= p <= 1.0:
            raise SamplerError("bernoulli marginal needs p in [0, 1]")
        return cls("bernoulli", (p,))

    @classmethod
    def lognormal(cls, mu_log: float, sigma_log: float) -> "Marginal":
        if sigma_log <= 0:
            raise SamplerError("lognormal marginal needs sigma_log > 0")
        return cls("lognormal", (mu_log, sigma_log))

    @classmethod
    def uniform(cls) -> "Marginal":
        return cls("uniform", ())

    def ppf(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return u
        if self.kind == "bernoulli":
            return (u > 1.0 - self.params[0]).astype(float)
        z = special.ndtri(u)
        if self.kind == "normal":
            return self.params[0] + self.params[1] * z
        if self.kind == "lognormal":
            return np.exp(self.params[0] + self.params[1] * z)
        raise SamplerError(f"unknown marginal kind '{self.kind}'")


@dataclass(frozen=True)
class ClaytonSpec:
    theta: float
    marginals: Tuple[Marginal, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.theta > 0:
            raise SamplerError(f"Clayton theta must be positive, got {self.theta}")
        if len(self.marginals) < 2:
            raise SamplerError("Clayton copula needs dim >= 2")
        object.__setattr__(self, "marginals", tuple(self.marginals))

    @property
    def dim(self) -> int:
        return len(self.marginals)


def sample_clayton(stream: RngStream, spec: ClaytonSpec, n: int) -> np.ndarray:
    """n x dim draws joined by a Clayton copula (gamma-frailty construction)"""
    if n < 1:
        raise SamplerError("n must be positive")
    gen = stream.generator()
    frailty = gen.gamma(1.0 / spec.theta, 1.0, size=n)
    exponentials = gen.standard_exponential(size=(n, spec.dim))
    uniforms = np.power(1.0 + exponentials / frailty[:, None], -1.0 / spec.theta)
    uniforms = np.clip(uniforms, _U_LOW, _U_HIGH)
    return np.column_stack([m.ppf(uniforms[:, j]) for j, m in enumerate(spec.marginals)])


@dataclass(frozen=True)
class TruncationSpec:
    """Replacement bands for a truncated normal: below a -> U(a1, a2), above b -> U(b1, b2)"""

    a: float
    b: float
    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        if self.a1 > self.a2 or self.b1 > self.b2:
            raise SamplerError("truncation bands need a1 <= a2 and b1 <= b2")
        if self.a > self.b:
            raise SamplerError("truncation levels need a <= b")

    @classmethod
    def from_bands(cls, a1: float, a2: float, b1: float, b2: float) -> "TruncationSpec":
        return cls(a=a1, b=b1, a1=a1, a2=a2, b1=b1, b2=b2)


def sample_truncated_normal(stream: RngStream, mu: float, sigma: float, trunc: TruncationSpec) -> float:
    if not sigma > 0:
        raise SamplerError("sigma must be positive")
    gen = stream.generator()
    x = gen.normal(mu, sigma)
    if x < trunc.a:
        return float(gen.uniform(trunc.a1, trunc.a2))
    if x > trunc.b:
        return float(gen.uniform(trunc.b1, trunc.b2))
    return float(x)


def sample_truncated_normal_array(
    gen: np.random.Generator, mu, sigma, trunc: TruncationSpec, size: int
) -> np.ndarray:
    """Vector form; always consumes three draws per element"""
    if np.any(np.asarray(sigma) <= 0):
        raise SamplerError("sigma must be positive")
    x = gen.normal(mu, sigma, size=size)
    low = gen.uniform(trunc.a1, trunc.a2, size=size)
    high = gen.uniform(trunc.b1, trunc.b2, size=size)
    return np.where(x < trunc.a, low, np.where(x > trunc.b, high, x))


def setting3_linear_predictor(x1, x2) -> np.ndarray:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(x1 <= 0) or np.any(x2 <= 0):
        raise SamplerError("survival covariates must be positive")
    return SURVIVAL_BETA[0] * np.log(x1) + SURVIVAL_BETA[1] * np.log10(x2)


def setting3_event_time(u, x1, x2) -> np.ndarray:
    """Inverse-transform event time for a uniform draw u in (0, 1]"""
    return -np.log(u) / (BASELINE_HAZARD * np.exp(setting3_linear_predictor(x1, x2)))


def sample_survival_setting3(stream: RngStream, x_row: Sequence[float]) -> Tuple[float, bool]:
    if len(x_row) != 2:
        raise SamplerError("x_row must hold (X1, X2)")
    gen = stream.generator()
    u_event = 1.0 - gen.random()
    u_censor = 1.0 - gen.random()
    y = float(setting3_event_time(u_event, x_row[0], x_row[1]))
    c = float(-np.log(u_censor) / CENSORING_RATE)
    return min(y, c), bool(y <= c)


def sample_survival_setting3_array(gen: np.random.Generator, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    u_event = 1.0 - gen.random(n)
    u_censor = 1.0 - gen.random(n)
    y = setting3_event_time(u_event, x[:, 0], x[:, 1])
    c = -np.log(u_censor) / CENSORING_RATE
    return np.minimum(y, c), (y <= c)
