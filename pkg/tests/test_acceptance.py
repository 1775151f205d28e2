"""End-to-end acceptance checks, one test per criterion.

Expected values come from independent oracles computed inside each
test: closed-form enumeration for the two-route micro instance,
exhaustive realization enumeration for the value-change estimator, and
paired-seed batch experiments for the planner ordering claims.
"""
import itertools
import math

import numpy as np
import pytest

from scoutplan import (BLOCKED, TRAVERSABLE, BeliefState, GraphView,
                       OracleConfig, PlannerConfig, Pose, ValueChangeQuery,
                       plan_step, run_episode, shortest_path)
from scoutplan.harness import ExperimentSpec, run_experiment
from scoutplan.pruning import value_change_mc_stderr

from plan_helpers import micro_graph, micro_team, random_small_graph

ORDERING_SEED = 20260823


# --- independent oracles -------------------------------------------------

def micro_expected_costs(p: float) -> tuple[float, float]:
    """Closed-form expected cost of each first decision on the
    10 m-direct / 30 m-detour instance: probe the uncertain midpoint
    (5 m out, then 5 m on or 5 m back + 30 m around) versus commit to
    the detour immediately."""
    probe = 5.0 + (1.0 - p) * 5.0 + p * (5.0 + 30.0)
    detour = 30.0
    return probe, detour


def micro_indifference_point() -> float:
    # probe(p*) = detour: 10 + 30 p* = 30.
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        probe, detour = micro_expected_costs(mid)
        lo, hi = (mid, hi) if probe < detour else (lo, mid)
    return 0.5 * (lo + hi)


def enum_value_change(graph, belief, start, goal, edge, penalty):
    """Exhaustive expectation over every realization of the other
    unknown edges, conditioning the queried edge both ways."""
    others = [int(e) for e in belief.unknown_edges() if e != edge]

    def expected(forced_status):
        total = 0.0
        for combo in itertools.product((TRAVERSABLE, BLOCKED),
                                       repeat=len(others)):
            prob = 1.0
            passable = np.ones(graph.num_edges, dtype=np.uint8)
            for e in range(graph.num_edges):
                if belief.edge_status[e] == BLOCKED:
                    passable[e] = 0
            for e, s in zip(others, combo):
                pe = graph.blocking_probs[e]
                prob *= pe if s == BLOCKED else 1.0 - pe
                passable[e] = 0 if s == BLOCKED else 1
            passable[edge] = 0 if forced_status == BLOCKED else 1
            res = shortest_path(graph, GraphView(graph, passable, "enum"),
                                start, goal)
            cost = min(res[0], penalty) if res else penalty
            total += prob * cost
        return total

    return max(0.0, expected(BLOCKED) - expected(TRAVERSABLE))


# --- criterion 1: analytic convergence on the micro instance -------------

def test_micro_ctp_analytic_convergence():
    team = micro_team(0)
    probe, detour = micro_expected_costs(0.5)
    optimum = min(probe, detour)  # 25.0
    belief = BeliefState.initial(micro_graph(0.5), [0], [])
    action, info = plan_step(belief, team,
                             PlannerConfig(rollouts=16000, seed=1))
    assert action.targets == (3,)  # probe the uncertain midpoint first
    assert info["root_value"] == pytest.approx(optimum, abs=1.0)

    p_star = micro_indifference_point()
    assert p_star == pytest.approx(2.0 / 3.0, abs=1e-9)
    for p, expect_target in ((p_star - 0.08, 3), (p_star + 0.08, 2)):
        belief = BeliefState.initial(micro_graph(p), [0], [])
        action, _ = plan_step(belief, team,
                              PlannerConfig(rollouts=16000, seed=1))
        assert action.targets == (expect_target,), \
            f"wrong first action at p={p:.3f}"


# --- criterion 2: Monte Carlo oracle vs exhaustive enumeration -----------

def test_value_change_oracle_matches_enumeration():
    # Frozen seed: a 2-sigma-per-edge bound over ~100 independent edge
    # checks leaves a few percent chance of one benign exceedance under
    # any correct estimator, so the comparison is pinned to one stream.
    rng = np.random.default_rng(0)
    checked = 0
    for trial in range(50):
        graph = random_small_graph(rng, num_uncertain=int(rng.integers(1, 4)))
        belief = BeliefState.initial(graph, [0], [])
        goal = graph.num_vertices - 1
        oracle = OracleConfig(samples=1000, seed=int(rng.integers(2**32)))
        penalty = oracle.penalty_for(graph)
        for edge in sorted(belief.unknown_edges()):
            q = ValueChangeQuery(graph, belief, Pose.at_node(0), goal, edge)
            est, se = value_change_mc_stderr(q, oracle)
            exact = enum_value_change(graph, belief, Pose.at_node(0), goal,
                                      edge, penalty)
            assert est == pytest.approx(exact, abs=2.0 * se + 1e-9), \
                f"trial {trial} edge {edge}: {est} vs {exact} (se {se})"
            checked += 1
    assert checked >= 50


# --- criteria 3 and 4: planner ordering at desk scale ---------------------

@pytest.fixture(scope="module")
def ordering_rows():
    spec = ExperimentSpec(
        kinds=("bridges", "islands", "dense"),
        teams=((1, 1),),
        planners=("ctp", "sap", "sap-dap", "sap-iap"),
        instances=30,
        rollouts=(1000,),
        top_k=(1,),
        oracle_samples=1000,
        seed=ORDERING_SEED,
    )
    rows, _ = run_experiment(spec)
    return {(r.env, r.planner): r for r in rows}


def test_ordering_reproduction(ordering_rows):
    for env in ("bridges", "islands", "dense"):
        ctp = ordering_rows[(env, "ctp")]
        dap = ordering_rows[(env, "sap-dap")]
        iap = ordering_rows[(env, "sap-iap")]
        assert ctp.failures == dap.failures == iap.failures == 0
        if env == "dense":
            # The pruning-strategy gap is allowed to close here; IAP
            # only has to be no worse than DAP within one standard error.
            assert iap.mean_distance <= dap.mean_distance + dap.se_distance
            continue
        assert ctp.mean_distance > dap.mean_distance > iap.mean_distance
        assert 25.0 <= iap.pct_reduction <= 45.0, \
            f"{env}: IAP reduction {iap.pct_reduction:.1f}%"
        assert iap.pct_reduction >= dap.pct_reduction + 4.0, \
            f"{env}: IAP {iap.pct_reduction:.1f}% vs DAP {dap.pct_reduction:.1f}%"


def test_unpruned_sap_weakness(ordering_rows):
    for env in ("bridges", "islands", "dense"):
        sap = ordering_rows[(env, "sap")]
        assert sap.pct_reduction < 10.0, \
            f"{env}: unpruned improvement {sap.pct_reduction:.1f}%"


# --- criterion 5: candidate-count study ------------------------------------

def test_topk_gap_closes_with_budget():
    spec = ExperimentSpec(
        kinds=("dense",),
        teams=((1, 1),),
        planners=("sap-dap",),
        instances=8,
        rollouts=(1000, 16000),
        top_k=(1, 2),
        oracle_samples=100,
        seed=ORDERING_SEED + 1,
    )
    rows, _ = run_experiment(spec)
    cell = {(r.top_k, r.rollouts): r for r in rows}
    low_1, low_2 = cell[(1, 1000)], cell[(2, 1000)]
    high_1, high_2 = cell[(1, 16000)], cell[(2, 16000)]
    assert low_1.mean_distance <= low_2.mean_distance
    pooled_se = math.hypot(high_1.se_distance, high_2.se_distance)
    assert abs(high_1.mean_distance - high_2.mean_distance) < pooled_se


# --- criterion 6: determinism ---------------------------------------------

def test_paired_reruns_are_bit_identical():
    spec = ExperimentSpec(kinds=("islands",), teams=((1, 1),),
                          planners=("ctp", "sap-dap"), instances=3,
                          rollouts=(200,), oracle_samples=100, seed=17)
    _, eps_a = run_experiment(spec)
    _, eps_b = run_experiment(spec)
    key = ("env", "planner", "instance", "world_seed", "distance", "steps")
    assert [[r[k] for k in key] for r in eps_a] == \
           [[r[k] for k in key] for r in eps_b]

    g = micro_graph(0.5)
    a = run_episode(g, micro_team(1), PlannerConfig(rollouts=400, seed=3),
                    world_seed=5)
    b = run_episode(g, micro_team(1), PlannerConfig(rollouts=400, seed=3),
                    world_seed=5)
    assert a.total_ugv_distance == b.total_ugv_distance
    assert a.trace == b.trace
