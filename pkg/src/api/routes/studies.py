from fastapi import APIRouter, HTTPException

from src.core.models import CellRequest
from src.services.study_service import StudyService

router = APIRouter(prefix="/studies", tags=["studies"])
study_service = StudyService()


@router.post("/cell", response_model=dict)
async def run_cell(request: CellRequest):
    """Run one (setting, method) coverage cell; meant for small R"""
    try:
        report = study_service.run_cell(request.config, request.method, save=False)
        report.pop("runs")
        return report
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to run cell: {str(e)}")
