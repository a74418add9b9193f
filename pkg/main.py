from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from src.api.routes import datasets, intervals, settings, studies
from src.core.config import configure_logging

configure_logging()

app = FastAPI(
    title="MI Bootstrap Intervals API",
    description="Bootstrap confidence intervals for multiply imputed data",
    version="1.0.0"
)

# CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(settings.router)
app.include_router(datasets.router)
app.include_router(intervals.router)
app.include_router(studies.router)


@app.get("/")
async def root():
    return {"message": "MI Bootstrap Intervals API", "status": "running"}


@app.get("/health")
async def health_check():
    return {"status": "healthy"}


if __name__ == "__main__":
    import uvicorn
    uvicorn.run(app, host="0.0.0.0", port=8000)
