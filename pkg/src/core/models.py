import hashlib
import math
from enum import Enum
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import InvalidPlanError


class ColumnKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    COUNT = "count"


class Transform(str, Enum):
    NONE = "none"
    LOG = "log"
    LOG10 = "log10"
    SQRT = "sqrt"


class MethodTag(str, Enum):
    MI_BOOT_PS = "mi-boot-ps"
    MI_BOOT = "mi-boot"
    BOOT_MI_PS = "boot-mi-ps"
    BOOT_MI = "boot-mi"
    BOOT_MI_T = "boot-mi-t"
    NO_BOOTSTRAP = "no-boot"


PERCENTILE_METHODS = (MethodTag.MI_BOOT_PS, MethodTag.BOOT_MI_PS, MethodTag.BOOT_MI)


class EngineType(str, Enum):
    EMB = "emb"
    ABB = "abb"
    IDENTITY = "identity"


class EstimatorType(str, Enum):
    OLS = "ols"
    COX = "cox"
    SEQG = "seqg"


class SettingId(str, Enum):
    SETTING_1 = "1"
    SETTING_2_LOW = "2low"
    SETTING_2_HIGH = "2high"
    SETTING_3 = "3"
    SETTING_4 = "4"


class RegimeName(str, Enum):
    ALWAYS = "always"
    NEVER = "never"
    CD4_THRESHOLD = "cd4_threshold"


class SdConvention(str, Enum):
    SD = "second-arg-is-sd"
    VARIANCE = "second-arg-is-variance"


class ASource(str, Enum):
    CALIBRATED = "calibrated"
    PUBLISHED = "published"


class GformulaDesign(str, Enum):
    LINEAR = "linear"
    SATURATED = "saturated"


class GformulaFitting(str, Enum):
    RULE_CONSISTENT = "rule-consistent"
    POOLED = "pooled"


class Profile(str, Enum):
    CI = "ci"
    FULL = "full"


class ColumnMeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: ColumnKind = ColumnKind.CONTINUOUS
    transform: Transform = Transform.NONE


class ResamplingPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    M: int = Field(ge=1)
    B: int = Field(ge=0)
    alpha: float = Field(default=0.025, gt=0.0, lt=0.5)
    method_tag: MethodTag

    def pooled_size(self) -> int:
        if self.method_tag in (MethodTag.MI_BOOT_PS, MethodTag.BOOT_MI_PS):
            return self.M * self.B
        return self.B

    def check(self, expected: Optional[MethodTag] = None) -> "ResamplingPlan":
        """Raise InvalidPlanError unless the plan can drive its constructor"""
        if expected is not None and self.method_tag != expected:
            raise InvalidPlanError(
                f"plan is tagged {self.method_tag.value}, constructor expects {expected.value}"
            )
        tag = self.method_tag
        if tag in PERCENTILE_METHODS and self.pooled_size() < math.ceil(1.0 / self.alpha):
            raise InvalidPlanError(
                f"{tag.value} needs at least {math.ceil(1.0 / self.alpha)} pooled replicates, "
                f"plan gives {self.pooled_size()}"
            )
        if tag in (MethodTag.MI_BOOT, MethodTag.NO_BOOTSTRAP) and self.M < 2:
            raise InvalidPlanError(f"{tag.value} needs M >= 2")
        if tag in (MethodTag.MI_BOOT, MethodTag.BOOT_MI_T) and self.B < 2:
            raise InvalidPlanError(f"{tag.value} needs B >= 2")
        return self


_CI_PROFILE_SETTING_4 = {"R": 250, "n": 500, "B": 100, "M": 5}
_LIST_FIELDS = ("methods", "regimes", "m_values")


class ExperimentConfig(BaseModel):
    setting: SettingId
    R: int = Field(default=1000, ge=1)
    n: int = Field(default=1000, ge=10)
    M: int = Field(default=10, ge=1)
    B: int = Field(default=200, ge=0)
    alpha: float = Field(default=0.025, gt=0.0, lt=0.5)
    methods: List[MethodTag] = Field(min_length=1)
    engine: EngineType = EngineType.EMB
    estimator: Optional[EstimatorType] = None
    master_seed: int = Field(default=20240601, ge=0)
    thread_budget: int = Field(default=1, ge=1)
    results_dir: str = "results"
    sd_convention: SdConvention = SdConvention.SD
    a_source: ASource = ASource.CALIBRATED
    horizon: int = Field(default=12, ge=0)
    regimes: List[RegimeName] = Field(default_factory=lambda: [RegimeName.ALWAYS, RegimeName.NEVER])
    gformula_fitting: GformulaFitting = GformulaFitting.RULE_CONSISTENT
    abb_strata_column: Optional[str] = None
    oracle_subjects: int = Field(default=1_000_000, ge=1000)
    profile: Profile = Profile.FULL
    m_values: List[int] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _apply_profile(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        profile = getattr(data.get("profile"), "value", data.get("profile"))
        setting = getattr(data.get("setting"), "value", data.get("setting"))
        if profile == Profile.CI.value and str(setting) == SettingId.SETTING_4.value:
            data = dict(data)
            for key, value in _CI_PROFILE_SETTING_4.items():
                data.setdefault(key, value)
        return data

    @model_validator(mode="after")
    def _check_estimator(self) -> "ExperimentConfig":
        if self.estimator is None:
            self.estimator = default_estimator(self.setting)
        if (self.estimator == EstimatorType.COX) != (self.setting == SettingId.SETTING_3):
            raise ValueError("the Cox estimator pairs with setting 3 only")
        if (self.estimator == EstimatorType.SEQG) != (self.setting == SettingId.SETTING_4):
            raise ValueError("the sequential g-formula pairs with setting 4 only")
        return self

    def config_hash(self) -> str:
        payload = self.model_dump_json(exclude={"thread_budget", "results_dir", "m_values"})
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def plan(self, method: MethodTag, M: Optional[int] = None) -> ResamplingPlan:
        B = 0 if method == MethodTag.NO_BOOTSTRAP else self.B
        return ResamplingPlan(M=M or self.M, B=B, alpha=self.alpha, method_tag=method)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """Parse a flat KEY=value file; list fields are comma-separated"""
        raw = {key.lower(): value for key, value in dotenv_values(path).items() if value is not None}
        fields = {name.lower(): name for name in cls.model_fields}
        data: Dict[str, Any] = {}
        for key, value in raw.items():
            if key not in fields:
                raise ValueError(f"unknown config key: {key}")
            name = fields[key]
            if name in _LIST_FIELDS:
                data[name] = [item.strip() for item in value.split(",") if item.strip()]
            else:
                data[name] = value
        return cls.model_validate(data)


def default_estimator(setting: SettingId) -> EstimatorType:
    if setting == SettingId.SETTING_3:
        return EstimatorType.COX
    if setting == SettingId.SETTING_4:
        return EstimatorType.SEQG
    return EstimatorType.OLS


class SimulateRequest(BaseModel):
    setting: SettingId
    n: int = Field(default=1000, ge=10)
    seed: int = Field(default=1, ge=0)
    sd_convention: SdConvention = SdConvention.SD
    horizon: int = Field(default=12, ge=0)


class AnalyzeRequest(BaseModel):
    csv: Optional[str] = None
    setting: Optional[SettingId] = None
    n: int = Field(default=1000, ge=10)
    method: MethodTag = MethodTag.BOOT_MI
    M: int = Field(default=10, ge=1)
    B: int = Field(default=200, ge=0)
    alpha: float = Field(default=0.025, gt=0.0, lt=0.5)
    engine: EngineType = EngineType.EMB
    estimator: EstimatorType = EstimatorType.OLS
    outcome: str = "y"
    seed: int = Field(default=1, ge=0)
    regimes: List[RegimeName] = Field(default_factory=lambda: [RegimeName.ALWAYS, RegimeName.NEVER])
    horizon: int = Field(default=12, ge=0)

    @model_validator(mode="after")
    def _check_source(self) -> "AnalyzeRequest":
        if (self.csv is None) == (self.setting is None):
            raise ValueError("provide exactly one of 'csv' or 'setting'")
        return self


class CellRequest(BaseModel):
    config: ExperimentConfig
    method: MethodTag
