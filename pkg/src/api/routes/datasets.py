from fastapi import APIRouter, HTTPException

from src.core.dataset import LongitudinalDataset
from src.core.models import SimulateRequest
from src.data.repositories import dataset_to_csv_text, longitudinal_to_csv_text
from src.services.simulation_service import SimulationService

router = APIRouter(prefix="/datasets", tags=["datasets"])
simulation_service = SimulationService()


@router.post("/simulate", response_model=dict)
async def simulate_dataset(request: SimulateRequest):
    """Generate one dataset of a setting as CSV text"""
    try:
        spec = simulation_service.get_spec(
            request.setting, n=request.n, sd_convention=request.sd_convention, horizon=request.horizon
        )
        data = simulation_service.generate(spec, request.seed)
        if isinstance(data, LongitudinalDataset):
            return {
                "setting": request.setting.value,
                "layout": "long",
                "n": data.n_rows,
                "csv": longitudinal_to_csv_text(data),
            }
        return {
            "setting": request.setting.value,
            "layout": "wide",
            "n": data.n_rows,
            "missing_fraction": {name: data.missing_fraction(j) for j, name in enumerate(data.names)},
            "csv": dataset_to_csv_text(data),
        }
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to simulate dataset: {str(e)}")
