import logging
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from fastapi import FastAPI, HTTPException, Query, status
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import analytics
from .config import settings
from .exceptions import AccountingError, ConfigError, SimulatorError, TraceError
from .experiment import run_experiment, sweep
from .models import Architecture, ExperimentConfig, MetricReport, ReliabilityReport

logger = logging.getLogger(__name__)


class SweepRequest(BaseModel):
    config: ExperimentConfig
    grid: Dict[str, List[Any]]
    normalize: Optional[Architecture] = None


# Create FastAPI app
app = FastAPI(
    title=settings.APP_NAME,
    description=settings.APP_DESCRIPTION,
    version=settings.APP_VERSION,
    debug=settings.DEBUG
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["GET", "POST", "OPTIONS"],
    allow_headers=["Content-Type"],
)


def to_http_error(e: SimulatorError) -> HTTPException:
    """Map simulator errors to HTTP status codes."""
    if isinstance(e, (ConfigError, TraceError)):
        return HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=str(e))
    if isinstance(e, AccountingError):
        logger.error(f"Accounting error during run: {e}")
        return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))
    return HTTPException(status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail=str(e))


# Health check endpoint
@app.get("/health")
def health():
    """
    Health check endpoint that returns the status and version of the service.
    """
    return {
        "status": "ok",
        "version": settings.APP_VERSION,
        "timestamp": datetime.now(timezone.utc).isoformat()
    }


@app.post("/runs", response_model=MetricReport)
def create_run(config: ExperimentConfig):
    """Run one experiment synchronously and return its report."""
    try:
        report, _ = run_experiment(config)
    except SimulatorError as e:
        raise to_http_error(e)
    return report


@app.post("/sweeps")
def create_sweep(request: SweepRequest) -> List[Dict[str, Any]]:
    """
    Run every point of a parameter grid, one after the other.

    Failed points come back as rows with an ``error`` field.
    """
    try:
        rows = sweep(request.config, request.grid, workers=1, normalize=request.normalize)
    except SimulatorError as e:
        raise to_http_error(e)
    return analytics.round_floats(rows)


@app.get("/architectures/compare")
def compare_architectures() -> Dict[str, Dict[str, float]]:
    return analytics.compare_architectures()


@app.get("/reliability", response_model=ReliabilityReport)
def get_reliability(
    alpha: float = Query(0.8, ge=0.0, le=1.0),
    mission_hours: Optional[float] = Query(None, gt=0),
):
    from .devices import DEFAULT_CATALOG

    return analytics.reliability(DEFAULT_CATALOG, alpha, mission_hours)
