from typing import List, Optional

from fastapi import APIRouter, HTTPException, Query

from src.core.models import RegimeName, SdConvention, SettingId
from src.services.simulation_service import SimulationService

router = APIRouter(prefix="/settings", tags=["settings"])
simulation_service = SimulationService()


@router.get("/", response_model=dict)
async def list_settings():
    """List the simulation settings"""
    settings = simulation_service.list_settings()
    return {"count": len(settings), "settings": settings}


@router.get("/{setting}/truth", response_model=dict)
async def get_truth(
    setting: SettingId,
    sd_convention: SdConvention = Query(SdConvention.SD, description="Meaning of the second normal argument"),
    horizon: int = Query(12, ge=0, le=12),
    regimes: Optional[List[RegimeName]] = Query(None, description="Setting 4 regimes"),
):
    """True parameter values a setting's intervals are scored against"""
    try:
        spec = simulation_service.get_spec(
            setting, sd_convention=sd_convention, horizon=horizon,
            regimes=regimes or (RegimeName.ALWAYS, RegimeName.NEVER),
        )
        return {"setting": setting.value, "truth": simulation_service.truth(spec), "constants": spec.constants}
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to resolve truth: {str(e)}")
