"""
micmco - HTTP API
Checkpoint evaluation, Pareto frontiers and the property audit over FastAPI
"""

import logging
from typing import List, Optional

import pandas as pd
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .engine.stochastics import RngStream, StreamPurpose
from .errors import MicmcoError
from .modeling.checkpoint import read_checkpoint
from .objectives.evaluation import DEFAULT_EVAL_K, evaluate_model
from .oracle.audit import CHECK_REGISTRY, run_audit
from .cli.pareto import pareto_frontier
from .training.dataset import Dataset

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="micmco",
    description="Mutual-information augmented Monte-Carlo objectives",
    version=__version__,
)


# ============== Pydantic Models ==============

class EvalRequest(BaseModel):
    """Request model for checkpoint evaluation"""
    checkpoint: str
    eval_k: int = Field(default=DEFAULT_EVAL_K, ge=1)
    seed: int = Field(default=0, ge=0)
    examples: int = Field(default=512, ge=1)
    data_file: str = ""


class PointIn(BaseModel):
    avg_kl: float
    nll: float
    run_id: Optional[str] = None


class ParetoRequest(BaseModel):
    """Request model for frontier extraction"""
    points: List[PointIn]
    with_rate: bool = False


class AuditRequest(BaseModel):
    """Request model for the property audit"""
    seed: int = Field(default=0, ge=0)
    checks: Optional[List[str]] = None


def _failure(e: MicmcoError) -> JSONResponse:
    return JSONResponse({"success": False, "error": str(e), "type": type(e).__name__}, status_code=400)


# ============== API Endpoints ==============

@app.get("/")
def root():
    """Root endpoint"""
    return {
        "name": "micmco",
        "version": __version__,
        "status": "running",
        "endpoints": {
            "eval": "/eval",
            "pareto": "/pareto",
            "audit": "/audit",
        },
        "checks": sorted(CHECK_REGISTRY),
    }


@app.post("/eval")
def evaluate(request: EvalRequest):
    """NLL, average true-KL estimate and representational KL of a checkpoint file"""
    try:
        params = read_checkpoint(request.checkpoint)
        dataset = Dataset.for_path(request.data_file, params.vocab_size)
        xs = dataset.sample(request.examples, RngStream.for_purpose(request.seed, StreamPurpose.EVAL, 0))
        result = evaluate_model(params, xs, request.eval_k, RngStream.for_purpose(request.seed, StreamPurpose.EVAL, 1))
    except FileNotFoundError as e:
        raise HTTPException(status_code=404, detail=str(e))
    except MicmcoError as e:
        return _failure(e)
    return JSONResponse({
        "success": True,
        "model": params.to_dict(),
        "result": result.to_dict(),
        "seed": request.seed,
    })


@app.post("/pareto")
def pareto(request: ParetoRequest):
    """Non-dominated points under (maximize avg_kl, minimize nll)"""
    frame = pd.DataFrame([
        {"avg_kl": p.avg_kl, "nll": p.nll, "run_id": p.run_id if p.run_id is not None else str(i)}
        for i, p in enumerate(request.points)
    ], columns=["avg_kl", "nll", "run_id"])
    try:
        frontier = pareto_frontier(frame, request.with_rate)
    except MicmcoError as e:
        return _failure(e)
    return JSONResponse({
        "success": True,
        "frontier": frontier.to_dict(orient="records"),
        "count": len(frontier),
    })


@app.post("/audit")
def audit(request: AuditRequest):
    """Run the property checks; success is false when any check fails"""
    unknown = [name for name in request.checks or [] if name not in CHECK_REGISTRY]
    if unknown:
        raise HTTPException(status_code=422, detail=f"unknown check(s): {', '.join(unknown)}")
    results = run_audit(request.seed, request.checks)
    return JSONResponse({
        "success": all(r.passed for r in results),
        "seed": request.seed,
        "results": [r.to_dict() for r in results],
    })
