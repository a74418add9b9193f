from typing import Any, Dict, Optional

from ..estimators.base import Estimator
from ..estimators.cox import CoxEstimator
from ..estimators.gformula import SeqGformulaEstimator
from ..estimators.ols import OlsEstimator
from ..imputation.abb import AbbEngine
from ..imputation.base import IdentityEngine, ImputationEngine, LongitudinalEngine
from ..imputation.emb import EmbEngine
from .exceptions import IncompatibleConfigError
from .models import EngineType, EstimatorType, GformulaDesign, GformulaFitting, RegimeName, SettingId, Transform

SETTING3_ANALYSIS_TRANSFORMS = {"X1": Transform.LOG, "X2": Transform.LOG10}


class EngineFactory:
    """Factory for creating imputation engines"""

    def create_engine(self, engine_type, longitudinal: bool = False, **options) -> ImputationEngine:
        """Create an engine; longitudinal data is imputed in its wide layout"""
        engine_type = EngineType(engine_type)

        if engine_type == EngineType.EMB:
            engine = EmbEngine(
                tol=options.get("tol"), max_iter=options.get("max_iter"), ridge=options.get("ridge")
            )
        elif engine_type == EngineType.ABB:
            engine = AbbEngine(strata_column=options.get("strata_column"))
        else:
            engine = IdentityEngine()

        return LongitudinalEngine(engine) if longitudinal else engine

    def get_engine_template(self, engine_type) -> Dict[str, Any]:
        """Describe the options an engine accepts"""
        templates = {
            EngineType.EMB: {
                "description": "Bootstrap EM under a multivariate normal model",
                "options": ["tol", "max_iter", "ridge"],
            },
            EngineType.ABB: {
                "description": "Approximate Bayesian Bootstrap hot deck",
                "options": ["strata_column"],
            },
            EngineType.IDENTITY: {
                "description": "Pass-through for complete data",
                "options": [],
            },
        }
        return templates.get(EngineType(engine_type), {})


class EstimatorFactory:
    """Factory for creating analysis estimators"""

    def create_estimator(self, estimator_type, setting: Optional[SettingId] = None, **options) -> Estimator:
        estimator_type = EstimatorType(estimator_type)
        if setting is not None:
            self._check_pairing(estimator_type, SettingId(setting))

        if estimator_type == EstimatorType.OLS:
            return OlsEstimator(
                outcome=options.get("outcome", "y"),
                covariates=options.get("covariates"),
                transforms=options.get("transforms"),
            )
        if estimator_type == EstimatorType.COX:
            transforms = options.get("transforms")
            if transforms is None and setting is not None:
                transforms = SETTING3_ANALYSIS_TRANSFORMS
            return CoxEstimator(
                time=options.get("time", "time"),
                event=options.get("event", "event"),
                covariates=options.get("covariates"),
                transforms=transforms,
            )
        return SeqGformulaEstimator(
            regimes=options.get("regimes") or (RegimeName.ALWAYS, RegimeName.NEVER),
            outcome_time=options.get("outcome_time"),
            design=options.get("design", GformulaDesign.LINEAR),
            fitting=options.get("fitting", GformulaFitting.RULE_CONSISTENT),
        )

    def _check_pairing(self, estimator_type: EstimatorType, setting: SettingId) -> None:
        if (estimator_type == EstimatorType.COX) != (setting == SettingId.SETTING_3):
            raise IncompatibleConfigError(f"estimator '{estimator_type.value}' does not fit setting {setting.value}")
        if (estimator_type == EstimatorType.SEQG) != (setting == SettingId.SETTING_4):
            raise IncompatibleConfigError(f"estimator '{estimator_type.value}' does not fit setting {setting.value}")
