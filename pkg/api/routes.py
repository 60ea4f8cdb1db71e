"""API routes for the planner service.

This module defines endpoints that generate a world, run one planner on
its first query and return the run record or its SVG rendering.
"""

import logging

from fastapi import APIRouter, HTTPException
from fastapi.responses import Response

from config.experiment import GENERATOR_DOMAINS
from functions.bench_functions import (
    PreparedQuery,
    RunTask,
    build_schedule,
    generate_world,
    run_task,
)
from functions.render_functions import RenderService
from functions.rule_functions import KNOWN_RULES, is_known
from models.schemas import PlanRequest, RunRecord
from utils.exceptions import PlannerError

logger = logging.getLogger(__name__)

router = APIRouter()

render_service = RenderService()


def _plan(request: PlanRequest, record_snapshot: bool) -> tuple[PreparedQuery, RunRecord]:
    if not is_known(request.rule):
        raise HTTPException(status_code=400, detail=f"Unknown rule {request.rule!r}")
    if GENERATOR_DOMAINS[request.generator] != request.domain:
        raise HTTPException(
            status_code=400,
            detail=f"Generator {request.generator} builds worlds for domain {GENERATOR_DOMAINS[request.generator]}",
        )
    schedule = build_schedule(request.domain, request.levels)
    generated = generate_world(
        request.generator, request.seed, request.world_params, request.domain_params, request.levels, schedule
    )
    prepared = PreparedQuery(
        query=generated.queries.queries[0], world=generated.world, digest=generated.world.digest()
    )
    task = RunTask(
        prepared=prepared,
        rule=request.rule,
        domain_id=request.domain,
        domain_params=request.domain_params,
        schedule=schedule,
        budget=request.budget,
        record_snapshot=record_snapshot,
    )
    return prepared, run_task(task)


@router.post("/plan", response_model=RunRecord)
async def plan(request: PlanRequest):
    """Generate a world and run one planner on its first query.

    Args:
        request: Domain, generator, seed, rule, budget and parameter overrides.

    Returns:
        The run record, including the best path.
    """
    try:
        _, record = _plan(request, record_snapshot=True)
        return record.model_copy(update={"snapshot": None})
    except HTTPException:
        raise
    except PlannerError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("Error in plan endpoint")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/render")
async def render(request: PlanRequest):
    """Generate a world, run one planner and render the search as SVG.

    Args:
        request: Same body as ``/plan``.

    Returns:
        The SVG document.
    """
    try:
        prepared, record = _plan(request, record_snapshot=True)
        svg = render_service.render(prepared.world, record)
        return Response(content=svg, media_type="image/svg+xml")
    except HTTPException:
        raise
    except PlannerError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("Error in render endpoint")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/rules")
async def list_rules():
    """List the rule and planner identifiers accepted by ``/plan``.

    Returns:
        The identifiers.
    """
    return {"rules": KNOWN_RULES}
