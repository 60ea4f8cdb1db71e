import json
import re

import numpy as np
import pytest

from functions.render_functions import RenderService
from functions.resolution_functions import ResolutionSchedule
from functions.search_functions import hybrid_astar
from functions.world_functions import ElevationMap, OccupancyGrid
from models.schemas import EmittedPath, GoalSet, PlanPath, RunRecord, SearchSnapshot
from utils.exceptions import RenderError


@pytest.fixture
def service():
    return RenderService(scale=10.0)


@pytest.fixture
def small_grid():
    occupancy = np.zeros((2, 4), dtype=bool)
    occupancy[0, 2] = True
    return OccupancyGrid(occupancy, 1.0)


def counts_of(svg: str) -> dict:
    match = re.search(r'<metadata id="counts">(.*?)</metadata>', svg)
    assert match is not None
    return json.loads(match.group(1))


def test_record_without_snapshot(service, small_grid):
    record = RunRecord(
        qid="q0", rule="H0", status="failure", goal=GoalSet(center=(3.5, 1.5), radius=0.4), start=(0.5, 0.5)
    )
    svg = service.render(small_grid, record)
    assert 'id="goal"' in svg and 'id="start"' in svg
    assert 'id="path"' not in svg
    # the occupied cell is row 0 (bottom), column 2
    assert '<rect x="20.000" y="10.000" width="10.000" height="10.000"/>' in svg
    assert counts_of(svg) == {
        "active": 0, "expanded": 0, "inactive": 0, "invalid": 0, "path_states": 0, "pruned": 0, "removed": 0,
    }


def test_path_is_drawn_with_y_pointing_up(service, small_grid):
    record = RunRecord(
        qid="q0",
        rule="H0",
        status="optimal-terminated",
        path=PlanPath(states=[(0.5, 0.5), (1.5, 1.5)], primitives=[1], cost=2**0.5),
    )
    svg = service.render(small_grid, record)
    assert 'points="5.000,15.000 15.000,5.000"' in svg


def test_metadata_counts_match_the_snapshot(service, grid, point_domain):
    goal = GoalSet(center=(4.25, 0.25), radius=0.1)
    result = hybrid_astar(
        (0.25, 0.25), goal, 0, ResolutionSchedule(levels=[(0.5, 0.5)]), point_domain, 500, record_snapshot=True
    )
    record = RunRecord(
        qid="q0",
        rule="ha",
        status=result.stats.status.value,
        total_expansions=result.stats.expansions,
        emitted=result.stats.emitted,
        world_digest=grid.digest(),
        start=(0.25, 0.25),
        goal=goal,
        path=result.path,
        snapshot=result.snapshot,
    )
    svg = service.render(grid, record)
    expected = result.snapshot.counts()
    expected["path_states"] = len(result.path.states)
    assert counts_of(svg) == expected
    assert svg.count("<circle cx=") == sum(result.snapshot.counts().values())


def test_identical_inputs_give_identical_bytes(service, small_grid):
    record = RunRecord(
        qid="q1",
        rule="Hinf",
        status="budget",
        total_expansions=40,
        emitted=[EmittedPath(cost=5.0, expansions=10, iteration=0), EmittedPath(cost=4.0, expansions=30, iteration=2)],
        snapshot=SearchSnapshot(expanded=[(0.5, 0.5)], active=[(1.5, 0.5)], removed=[(3.5, 1.5)]),
    )
    assert service.render(small_grid, record) == RenderService(scale=10.0).render(small_grid, record)
    svg = service.render(small_grid, record)
    assert svg.count('width="2" height="24.000" fill="#000000"') == 2


def test_record_from_another_world_is_refused(service, small_grid):
    record = RunRecord(qid="q0", rule="H0", status="failure", world_digest="0" * 64)
    with pytest.raises(RenderError):
        service.render(small_grid, record)


def test_elevation_map_has_terrain_and_masked_obstacles(service):
    heights = np.zeros((4, 4))
    heights[:, 3] = 5.0
    world = ElevationMap(heights, 1.0)
    svg = service.render(world, RunRecord(qid="q0", rule="H0", status="failure", world_digest=world.digest()))
    assert '<g id="terrain">' in svg
    assert '<g id="obstacles" fill="#7b3294">' in svg
    obstacles = svg.split('<g id="obstacles"')[1].split("</g>")[0]
    assert obstacles.count("<rect") > 0


def test_elevation_obstacles_follow_the_recorded_limits(service):
    heights = np.zeros((4, 4))
    heights[:, 3] = 5.0
    world = ElevationMap(heights, 1.0)
    record = RunRecord(
        qid="q0", rule="H0", status="failure", world_digest=world.digest(),
        domain_params={"max_slope": 100.0, "max_step": 10.0},
    )
    obstacles = service.render(world, record).split('<g id="obstacles"')[1].split("</g>")[0]
    assert obstacles.count("<rect") == 0


def test_invalid_recorded_limits_are_refused(service):
    world = ElevationMap(np.zeros((2, 2)), 1.0)
    record = RunRecord(qid="q0", rule="H0", status="failure", domain_params={"max_slope": -1.0})
    with pytest.raises(RenderError):
        service.render(world, record)
