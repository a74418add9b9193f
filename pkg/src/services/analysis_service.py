import logging
from typing import Any, Dict, List, Optional, Sequence, Union

from src.core.dataset import IncompleteDataset, LongitudinalDataset
from src.core.factory import SETTING3_ANALYSIS_TRANSFORMS, EngineFactory, EstimatorFactory
from src.core.models import EngineType, EstimatorType, GformulaFitting, MethodTag, RegimeName, ResamplingPlan
from src.data.repositories import ReportRepository
from src.services.interval_service import IntervalService
from src.stochastics.streams import RngStream

logger = logging.getLogger(__name__)

Dataset = Union[IncompleteDataset, LongitudinalDataset]


class AnalysisService:
    """Single-dataset imputation and interval construction"""

    def __init__(self):
        self.engine_factory = EngineFactory()
        self.estimator_factory = EstimatorFactory()
        self.interval_service = IntervalService()

    def impute(self, dataset: Dataset, engine: EngineType, M: int, seed: int,
               strata_column: Optional[str] = None) -> List[Dataset]:
        """M completed copies of a dataset on the ``impute`` lane of the seed"""
        imputer = self.engine_factory.create_engine(
            engine, longitudinal=isinstance(dataset, LongitudinalDataset), strata_column=strata_column
        )
        completions = imputer.impute(dataset, M, RngStream(seed, ("impute",)))
        logger.info("imputed %d datasets with %s", len(completions), imputer)
        return completions

    def analyze(
        self,
        dataset: Dataset,
        method: MethodTag,
        M: int,
        B: int,
        alpha: float,
        engine: EngineType,
        estimator: EstimatorType,
        seed: int,
        outcome: str = "y",
        regimes: Sequence[RegimeName] = (RegimeName.ALWAYS, RegimeName.NEVER),
        horizon: Optional[int] = None,
        strata_column: Optional[str] = None,
        fitting: GformulaFitting = GformulaFitting.RULE_CONSISTENT,
        replicates_path: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Build one interval and return its JSON record with coordinate names.

        With ``replicates_path`` the raw bootstrap replicates are also written
        there as CSV and the record carries the path.
        """
        method = MethodTag(method)
        longitudinal = isinstance(dataset, LongitudinalDataset)
        if longitudinal != (EstimatorType(estimator) == EstimatorType.SEQG):
            raise ValueError("the sequential g-formula needs longitudinal data and vice versa")

        imputer = self.engine_factory.create_engine(engine, longitudinal=longitudinal, strata_column=strata_column)
        analysis = self.estimator_factory.create_estimator(
            estimator, outcome=outcome, regimes=regimes, outcome_time=horizon,
            fitting=fitting,
            transforms=self._default_transforms(dataset, estimator),
        )
        plan = ResamplingPlan(M=M, B=0 if method == MethodTag.NO_BOOTSTRAP else B, alpha=alpha, method_tag=method)
        stream = RngStream(seed, ("analyze", method.value))
        interval = self.interval_service.construct(dataset, imputer, analysis, plan, stream)

        record = interval.to_record()
        record["coordinates"] = list(analysis.coordinates)
        record["engine"] = imputer.name
        record["estimator"] = analysis.name
        record["seed"] = seed
        if replicates_path:
            record["replicates_path"] = ReportRepository().save_replicates(
                interval, list(analysis.coordinates), replicates_path
            )
        return record

    def _default_transforms(self, dataset: Dataset, estimator: EstimatorType):
        if EstimatorType(estimator) != EstimatorType.COX or not isinstance(dataset, IncompleteDataset):
            return None
        if set(SETTING3_ANALYSIS_TRANSFORMS).issubset(dataset.names):
            return SETTING3_ANALYSIS_TRANSFORMS
        return None
