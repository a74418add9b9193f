"""Cross-sectional simulation settings 1, 2 and 3."""
import functools
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import optimize

from ..core.dataset import IncompleteDataset
from ..core.exceptions import SamplerError
from ..core.models import ASource, ColumnKind, ColumnMeta, SdConvention, Transform
from ..stochastics.samplers import ClaytonSpec, Marginal, sample_clayton, sample_survival_setting3_array
from ..stochastics.streams import RngStream
from .missingness import cubic_pi, impose, quadratic_pi, setting1_rules, setting2_rules, setting3_rules

logger = logging.getLogger(__name__)

SETTING1_BETA = (0.0, 0.4)
SETTING2_BETA = (3.0, -2.0, 0.0, 3.0, 0.0, -4.0, 0.0)
SETTING3_BETA = (-0.3, 0.3)

# published constants for the setting 2 mechanisms
SETTING2_PUBLISHED_A = {"low": 0.75, "high": 0.4}
SETTING2_B = {"low": 0.25, "high": 2.5}
SETTING2_TARGET_RATE = {"low": 0.06, "high": 0.45}

CALIBRATION_DRAWS = 1_000_000
CALIBRATION_SEED = 73102024


def second_arg(value: float, convention: SdConvention) -> float:
    """Standard deviation implied by the second argument of N(mu, .) or logN(mu, .)"""
    if SdConvention(convention) == SdConvention.VARIANCE:
        return math.sqrt(value)
    return value


def _require_n(n: int, minimum: int = 10) -> None:
    if n < minimum:
        raise SamplerError(f"sample size must be at least {minimum}, got {n}")


def _masked_dataset(columns: Dict[str, np.ndarray], masks: Dict[str, np.ndarray], meta: List[ColumnMeta]) -> IncompleteDataset:
    names = [m.name for m in meta]
    values = np.column_stack([columns[name] for name in names])
    mask = np.column_stack([masks.get(name, np.zeros(values.shape[0], dtype=bool)) for name in names])
    return IncompleteDataset(values, mask, meta)


def gen_setting1(n: int, stream: RngStream, sd_convention: SdConvention = SdConvention.SD) -> IncompleteDataset:
    """X1 ~ N(0, 1), y ~ N(0.4 X1, 2), X1 missing at random given y"""
    _require_n(n)
    gen = stream.child("complete").generator()
    x1 = gen.standard_normal(n)
    y = SETTING1_BETA[0] + SETTING1_BETA[1] * x1 + second_arg(2.0, sd_convention) * gen.standard_normal(n)
    columns = {"y": y, "X1": x1}
    masks = impose(columns, setting1_rules(), stream)
    return _masked_dataset(columns, masks, [ColumnMeta(name="y"), ColumnMeta(name="X1")])


def setting2_copula() -> ClaytonSpec:
    return ClaytonSpec(
        theta=1.0,
        marginals=(
            Marginal.normal(0.0, 1.0),
            Marginal.normal(0.0, 1.0),
            Marginal.normal(0.0, 1.0),
            Marginal.bernoulli(0.5),
            Marginal.bernoulli(0.7),
            Marginal.bernoulli(0.3),
        ),
    )


def _setting2_complete(n: int, stream: RngStream, sd_convention: SdConvention) -> Dict[str, np.ndarray]:
    x = sample_clayton(stream.child("covariates"), setting2_copula(), n)
    beta = np.asarray(SETTING2_BETA)
    noise = stream.child("noise").generator().standard_normal(n)
    y = beta[0] + x @ beta[1:] + second_arg(2.0, sd_convention) * noise
    columns = {"y": y}
    columns.update({f"X{j + 1}": x[:, j] for j in range(6)})
    return columns


def setting2_rate(a: float, y: np.ndarray) -> float:
    """Marginal X1 missingness implied by scale a over outcome draws y"""
    return float(np.mean(quadratic_pi(a)(y)))


@functools.lru_cache(maxsize=8)
def calibrate_setting2_a(
    level: str,
    sd_convention: SdConvention = SdConvention.SD,
    draws: int = CALIBRATION_DRAWS,
    seed: int = CALIBRATION_SEED,
) -> float:
    """Root of setting2_rate(a) = target rate, against a fixed Monte Carlo sample of y"""
    target = SETTING2_TARGET_RATE[level]
    y = _setting2_complete(draws, RngStream(seed, ("setting2-calibration",)), sd_convention)["y"]
    a = optimize.brentq(lambda value: setting2_rate(value, y) - target, 1e-6, 100.0, xtol=1e-10)
    logger.info("calibrated setting 2 (%s) scale a=%.6f for target rate %.2f", level, a, target)
    return float(a)


def setting2_constants(level: str, a_source: ASource = ASource.CALIBRATED,
                       sd_convention: SdConvention = SdConvention.SD) -> Tuple[float, float]:
    if level not in SETTING2_B:
        raise SamplerError(f"setting 2 level must be 'low' or 'high', got '{level}'")
    if ASource(a_source) == ASource.PUBLISHED:
        a = SETTING2_PUBLISHED_A[level]
    else:
        a = calibrate_setting2_a(level, SdConvention(sd_convention))
    return a, SETTING2_B[level]


def gen_setting2(
    n: int,
    stream: RngStream,
    level: str,
    a: Optional[float] = None,
    sd_convention: SdConvention = SdConvention.SD,
) -> IncompleteDataset:
    _require_n(n)
    if a is None:
        a, b = setting2_constants(level, sd_convention=sd_convention)
    elif level in SETTING2_B:
        b = SETTING2_B[level]
    else:
        raise SamplerError(f"setting 2 level must be 'low' or 'high', got '{level}'")
    columns = _setting2_complete(n, stream.child("complete"), sd_convention)
    masks = impose(columns, setting2_rules(a, b), stream)
    meta = [ColumnMeta(name="y")]
    meta += [ColumnMeta(name=f"X{j}") for j in (1, 2, 3)]
    meta += [ColumnMeta(name=f"X{j}", kind=ColumnKind.BINARY) for j in (4, 5, 6)]
    return _masked_dataset(columns, masks, meta)


def setting3_copula(sd_convention: SdConvention = SdConvention.SD) -> ClaytonSpec:
    return ClaytonSpec(
        theta=1.0,
        marginals=(
            Marginal.lognormal(4.286, second_arg(1.086, sd_convention)),
            Marginal.lognormal(10.76, second_arg(1.8086, sd_convention)),
        ),
    )


def gen_setting3(n: int, stream: RngStream, sd_convention: SdConvention = SdConvention.SD) -> IncompleteDataset:
    """Survival layout (time, event, X1, X2) with X1 missing at random given time"""
    _require_n(n)
    x = sample_clayton(stream.child("covariates"), setting3_copula(sd_convention), n)
    time, event = sample_survival_setting3_array(stream.child("survival").generator(), x)
    columns = {"time": time, "event": event.astype(float), "X1": x[:, 0], "X2": x[:, 1]}
    masks = impose(columns, setting3_rules(), stream)
    meta = [
        ColumnMeta(name="time", transform=Transform.LOG),
        ColumnMeta(name="event", kind=ColumnKind.BINARY),
        ColumnMeta(name="X1", transform=Transform.LOG),
        ColumnMeta(name="X2", transform=Transform.LOG),
    ]
    return _masked_dataset(columns, masks, meta)


def x3_rate(b: float, p_x4: float = 0.5) -> float:
    """Marginal X3 missingness for a Bernoulli(p_x4) driver"""
    pi = cubic_pi(b)
    return float(p_x4 * pi(1.0) + (1.0 - p_x4) * pi(0.0))
