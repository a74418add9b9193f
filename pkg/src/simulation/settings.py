from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

from ..core.models import ASource, RegimeName, SdConvention, SettingId
from ..stochastics.streams import RngStream
from .generators import (
    CALIBRATION_DRAWS,
    CALIBRATION_SEED,
    SETTING1_BETA,
    SETTING2_B,
    SETTING2_BETA,
    SETTING2_PUBLISHED_A,
    SETTING2_TARGET_RATE,
    SETTING3_BETA,
    gen_setting1,
    gen_setting2,
    gen_setting3,
    setting2_constants,
)
from .longitudinal import HORIZON, SemParameters, calibrate_sem, gen_setting4, setting4_truth

ORACLE_SEED = 20240613
# reference values reported for the unpublished original SEM
PUBLISHED_SETTING4_TRUTH = {RegimeName.ALWAYS: -1.03, RegimeName.NEVER: -2.45}


@dataclass(frozen=True)
class SettingSpec:
    """Everything needed to generate one setting's data and score its intervals"""

    id: SettingId
    n: int
    truth: Tuple[float, ...]
    coordinates: Tuple[str, ...]
    sd_convention: SdConvention = SdConvention.SD
    constants: Dict[str, float] = field(default_factory=dict)
    sem: Optional[SemParameters] = None
    horizon: int = HORIZON

    def generate(self, stream: RngStream):
        if self.id == SettingId.SETTING_1:
            return gen_setting1(self.n, stream, self.sd_convention)
        if self.id == SettingId.SETTING_2_LOW:
            return gen_setting2(self.n, stream, "low", self.constants["a"], self.sd_convention)
        if self.id == SettingId.SETTING_2_HIGH:
            return gen_setting2(self.n, stream, "high", self.constants["a"], self.sd_convention)
        if self.id == SettingId.SETTING_3:
            return gen_setting3(self.n, stream, self.sd_convention)
        return gen_setting4(self.n, stream, self.horizon, self.sem)

    def describe(self) -> Dict[str, object]:
        return {
            "setting": self.id.value,
            "n": self.n,
            "truth": dict(zip(self.coordinates, self.truth)),
            "sd_convention": self.sd_convention.value,
            "constants": self.constants,
            "sem_version": self.sem.version if self.sem is not None else None,
        }


def _setting2_constants(level: str, a_source: ASource, sd_convention: SdConvention, store) -> Tuple[float, float]:
    if a_source == ASource.PUBLISHED or store is None:
        return setting2_constants(level, a_source, sd_convention)
    key = f"setting2-a/{level}/{sd_convention.value}/{CALIBRATION_DRAWS}/{CALIBRATION_SEED}"
    cached = store.get(key)
    if cached is None:
        cached, _ = setting2_constants(level, a_source, sd_convention)
        store.put(key, cached)
    return float(cached), SETTING2_B[level]


def setting_spec(
    setting,
    n: int = 1000,
    sd_convention: SdConvention = SdConvention.SD,
    a_source: ASource = ASource.CALIBRATED,
    horizon: int = HORIZON,
    regimes: Sequence = (RegimeName.ALWAYS, RegimeName.NEVER),
    oracle_subjects: int = 1_000_000,
    store=None,
) -> SettingSpec:
    setting = SettingId(setting)
    sd_convention = SdConvention(sd_convention)
    if setting == SettingId.SETTING_1:
        return SettingSpec(setting, n, SETTING1_BETA, ("intercept", "X1"), sd_convention)
    if setting in (SettingId.SETTING_2_LOW, SettingId.SETTING_2_HIGH):
        level = "low" if setting == SettingId.SETTING_2_LOW else "high"
        a, b = _setting2_constants(level, ASource(a_source), sd_convention, store)
        constants = {"a": a, "b": b, "a_published": SETTING2_PUBLISHED_A[level],
                     "target_rate": SETTING2_TARGET_RATE[level]}
        coordinates = ("intercept",) + tuple(f"X{j}" for j in range(1, 7))
        return SettingSpec(setting, n, SETTING2_BETA, coordinates, sd_convention, constants)
    if setting == SettingId.SETTING_3:
        return SettingSpec(setting, n, SETTING3_BETA, ("X1", "X2"), sd_convention)

    sem = calibrate_sem()
    names = [RegimeName(r) for r in regimes]
    oracle = RngStream(ORACLE_SEED, ("oracle",))
    truth = tuple(
        setting4_truth(regime, oracle, sem, horizon, oracle_subjects, store) for regime in names
    )
    constants = {f"published_{r.value}": PUBLISHED_SETTING4_TRUTH[r] for r in names if r in PUBLISHED_SETTING4_TRUTH}
    constants.update({f"delta_{k}": d for k, d in zip(("L1", "L2", "L3", "Y"), sem.deltas)})
    return SettingSpec(
        setting, n, truth, tuple(f"psi_{r.value}" for r in names), sd_convention, constants, sem, horizon,
    )
