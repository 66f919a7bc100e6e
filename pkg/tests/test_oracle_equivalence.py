"""Exhaustive cross-check of the engine against the naive line-by-line
interpreter: every 3-round edge schedule on 3 nodes (8 edge subsets per
round, 512 schedules), compared configuration for configuration.
"""

import itertools

from dynaforest import engine, topology

from naive_oracle import NaiveSimulation, engine_snapshot

VERTICES = (1, 2, 3)
ALL_EDGES = ((1, 2), (1, 3), (2, 3))
EDGE_SUBSETS = [
    frozenset(combo)
    for size in range(len(ALL_EDGES) + 1)
    for combo in itertools.combinations(ALL_EDGES, size)
]


def run_schedule_both_ways(schedule, seed, lazy):
    graph = topology.scripted(VERTICES, [sorted(es) for es in schedule])
    naive = NaiveSimulation(VERTICES, seed=seed, lazy=lazy)
    mismatches = []
    for i, edges, config in engine.iter_run(graph, rounds=len(schedule), seed=seed, lazy=lazy):
        naive.round(edges)
        if engine_snapshot(config) != naive.snapshot():
            mismatches.append((i, engine_snapshot(config), naive.snapshot()))
    return mismatches


def sweep(seed, lazy):
    failures = []
    for schedule in itertools.product(EDGE_SUBSETS, repeat=3):
        mismatches = run_schedule_both_ways(schedule, seed, lazy)
        if mismatches:
            failures.append((schedule, mismatches))
    return failures


def test_all_512_schedules_match_naive_interpreter():
    failures = sweep(seed=0, lazy=False)
    assert failures == [], f"{len(failures)} schedules diverged, first: {failures[0]}"


def test_all_512_schedules_match_with_lazy_walk():
    failures = sweep(seed=3, lazy=True)
    assert failures == [], f"{len(failures)} schedules diverged, first: {failures[0]}"


def test_second_seed_sweep_matches():
    failures = sweep(seed=1, lazy=False)
    assert failures == []
