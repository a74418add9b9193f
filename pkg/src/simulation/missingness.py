"""Missingness mechanisms used by the simulation settings.

Every rule masks one target column with probability pi(drivers), where the
drivers are other columns of the complete data. A rule never lists its own
target among its drivers.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from ..core.exceptions import SamplerError
from ..stochastics.streams import RngStream

Probability = Callable[..., np.ndarray]


def quadratic_pi(scale: float, shift: float = 1.0) -> Probability:
    """pi(x) = 1 - 1 / ((scale * x)^2 + shift)"""
    def pi(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - 1.0 / ((scale * x) ** 2 + shift)
    return pi


def cubic_pi(scale: float, shift: float = 1.05) -> Probability:
    """pi(x) = 1 - 1 / (scale * x^3 + shift), for x in {0, 1}"""
    def pi(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - 1.0 / (scale * x ** 3 + shift)
    return pi


def constant_pi(p: float) -> Probability:
    def pi():
        return np.asarray(float(p))
    return pi


@dataclass(frozen=True)
class MissingnessRule:
    target: str
    drivers: Tuple[str, ...]
    probability: Probability
    description: str = ""

    def __post_init__(self):
        if self.target in self.drivers:
            raise SamplerError(f"rule for '{self.target}' may not depend on its own values")
        object.__setattr__(self, "drivers", tuple(self.drivers))

    def evaluate(self, columns: Mapping[str, np.ndarray]) -> np.ndarray:
        n = len(columns[self.target])
        p = np.broadcast_to(self.probability(*[columns[name] for name in self.drivers]), (n,))
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise SamplerError(f"missingness probability for '{self.target}' left [0, 1]")
        return p


def impose(columns: Mapping[str, np.ndarray], rules: Sequence[MissingnessRule], stream: RngStream) -> Dict[str, np.ndarray]:
    """Draw a mask per rule target from the complete columns"""
    masks = {}
    for rule in rules:
        p = rule.evaluate(columns)
        u = stream.child("missing", rule.target).generator().random(np.shape(p))
        masks[rule.target] = u < p
    return masks


def setting1_rules() -> List[MissingnessRule]:
    return [MissingnessRule("X1", ("y",), quadratic_pi(0.25), "1 - 1/((0.25 y)^2 + 1)")]


def setting2_rules(a: float, b: float) -> List[MissingnessRule]:
    return [
        MissingnessRule("X1", ("y",), quadratic_pi(a), f"1 - 1/(({a:g} y)^2 + 1)"),
        MissingnessRule("X3", ("X4",), cubic_pi(b), f"1 - 1/({b:g} X4^3 + 1.05)"),
    ]


def setting3_rules() -> List[MissingnessRule]:
    return [MissingnessRule("X1", ("time",), quadratic_pi(0.075), "1 - 1/((0.075 T)^2 + 1)")]


def setting4_rules(horizon: int) -> List[MissingnessRule]:
    """Per-time rules on the longitudinal columns L1_t, L2_t, L3_t, Y_t"""
    rules = []
    for t in range(horizon + 1):
        rules.append(MissingnessRule(f"L1_{t}", (), constant_pi(0.1), "0.1"))
        if t == 0:
            rules.extend([
                MissingnessRule("L2_0", ("L1_0",), quadratic_pi(0.001), "1 - 1/((0.001 L1_0)^2 + 1)"),
                MissingnessRule("L3_0", ("Y_0",), _absolute(quadratic_pi(0.2)), "1 - 1/((0.2 |Y_0|)^2 + 1)"),
                MissingnessRule("Y_0", ("L3_0",), _absolute(quadratic_pi(0.7)), "1 - 1/((0.7 |L3_0|)^2 + 1)"),
            ])
        else:
            rules.extend([
                MissingnessRule(f"L2_{t}", (f"L1_{t}",), quadratic_pi(0.00005 * t),
                                f"1 - 1/((0.00005 * {t} * L1_{t})^2 + 1)"),
                MissingnessRule(f"L3_{t}", (f"Y_{t}",), _absolute(quadratic_pi(0.015 * t)),
                                f"1 - 1/((0.015 * {t} * |Y_{t}|)^2 + 1)"),
                MissingnessRule(f"Y_{t}", (f"L3_{t}",), _absolute(quadratic_pi(0.015 * t)),
                                f"1 - 1/((0.015 * {t} * |L3_{t}|)^2 + 1)"),
            ])
    return rules


def _absolute(pi: Probability) -> Probability:
    def wrapped(x):
        return pi(np.abs(np.asarray(x, dtype=float)))
    return wrapped
