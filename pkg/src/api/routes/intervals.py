from fastapi import APIRouter, HTTPException

from src.core.models import AnalyzeRequest
from src.data.repositories import dataset_from_csv_text
from src.services.analysis_service import AnalysisService
from src.services.simulation_service import SimulationService

router = APIRouter(prefix="/intervals", tags=["intervals"])
analysis_service = AnalysisService()
simulation_service = SimulationService()


@router.post("/analyze", response_model=dict)
async def analyze(request: AnalyzeRequest):
    """Confidence interval for an inline CSV dataset or a freshly generated one"""
    try:
        if request.csv is not None:
            data = dataset_from_csv_text(request.csv)
        else:
            spec = simulation_service.get_spec(request.setting, n=request.n, horizon=request.horizon)
            data = simulation_service.generate(spec, request.seed)
        return analysis_service.analyze(
            data,
            method=request.method,
            M=request.M,
            B=request.B,
            alpha=request.alpha,
            engine=request.engine,
            estimator=request.estimator,
            seed=request.seed,
            outcome=request.outcome,
            regimes=request.regimes,
            horizon=request.horizon,
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to build interval: {str(e)}")
