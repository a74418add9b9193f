import logging
from typing import Any, Dict, List, Optional, Sequence

from src.core.dataset import LongitudinalDataset
from src.core.models import ASource, RegimeName, SdConvention, SettingId
from src.data.repositories import OracleRepository
from src.simulation.longitudinal import sem_summary, simulate_sem
from src.simulation.settings import SettingSpec, setting_spec
from src.stochastics.streams import RngStream

logger = logging.getLogger(__name__)


def data_stream(master_seed: int, run: int) -> RngStream:
    """Lane of the dataset generated for Monte Carlo run ``run``"""
    return RngStream(master_seed, ("run", run, "data"))


class SimulationService:
    def __init__(self, oracle_repo: Optional[OracleRepository] = None):
        self.oracle_repo = oracle_repo or OracleRepository()

    def get_spec(
        self,
        setting: SettingId,
        n: int = 1000,
        sd_convention: SdConvention = SdConvention.SD,
        a_source: ASource = ASource.CALIBRATED,
        horizon: int = 12,
        regimes: Sequence[RegimeName] = (RegimeName.ALWAYS, RegimeName.NEVER),
        oracle_subjects: int = 1_000_000,
    ) -> SettingSpec:
        """Resolve a setting's constants and truth, caching oracle values"""
        return setting_spec(
            setting, n, sd_convention, a_source, horizon, regimes, oracle_subjects, store=self.oracle_repo
        )

    def generate(self, spec: SettingSpec, seed: int, run: int = 1):
        """The dataset Monte Carlo run ``run`` sees under master seed ``seed``"""
        return spec.generate(data_stream(seed, run))

    def truth(self, spec: SettingSpec) -> Dict[str, float]:
        return dict(zip(spec.coordinates, spec.truth))

    def list_settings(self) -> List[Dict[str, Any]]:
        descriptions = {
            SettingId.SETTING_1: "linear model, X1 missing at random given y",
            SettingId.SETTING_2_LOW: "six Clayton-coupled covariates, low missingness on X1 and X3",
            SettingId.SETTING_2_HIGH: "six Clayton-coupled covariates, high missingness on X1 and X3",
            SettingId.SETTING_3: "Cox survival model, X1 missing at random given follow-up time",
            SettingId.SETTING_4: "longitudinal treatment regimes estimated by the sequential g-formula",
        }
        return [{"setting": key.value, "description": text} for key, text in descriptions.items()]

    def sem_check(self, spec: SettingSpec, subjects: int, seed: int) -> Dict[str, float]:
        """Summary statistics of complete natural-course data for Setting 4"""
        data: LongitudinalDataset = simulate_sem(spec.sem, subjects, RngStream(seed, ("sem-summary",)), spec.horizon)
        return sem_summary(data)
