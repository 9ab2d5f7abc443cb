import json

import numpy as np
import pytest

from fishcoh.errors import InvalidPoint
from fishcoh.fisher import classical_fi, qubit_coherence_analytic
from fishcoh.iochannel import postselect_distribution, validate_io
from fishcoh.optimize import (
    OptimizerBudget,
    StructuredFamilyPoint,
    batch_fi,
    family_to_io,
    fi_objective,
    maximize_coherence,
    qfi_of_best,
    restart_rng,
)
from fishcoh.qcore import random_incoherent_state, random_mixed_state, random_unitary
from fishcoh.repro import build_counterexample_io, counterexample_point, uniform_superposition


def _dephasing_point(d, rate=None):
    r = np.zeros((1, d)) if rate is None else np.array([rate], dtype=float)
    return StructuredFamilyPoint(np.ones((1, d)), np.eye(d)[None], r)


def test_dephasing_point_has_zero_fi(plus, phi3):
    assert fi_objective(_dephasing_point(2, [1, 0]), plus) == 0.0
    assert fi_objective(_dephasing_point(3, [0.3, 1, 0]), phi3) == 0.0


def test_point_validation():
    with pytest.raises(InvalidPoint):
        StructuredFamilyPoint(np.array([[0.5, 1.0]]), np.eye(2)[None], np.zeros((1, 2)))
    with pytest.raises(InvalidPoint):
        StructuredFamilyPoint(np.ones((1, 2)), 2 * np.eye(2)[None], np.zeros((1, 2)))
    with pytest.raises(InvalidPoint):
        StructuredFamilyPoint(np.ones((1, 2)), np.eye(2)[None], np.array([[0.0, 1.5]]))


def test_counterexample_point_reproduces_rows():
    io = family_to_io(counterexample_point())
    ref = build_counterexample_io()
    got = np.array([k.c for k in io.kraus])
    want = np.array([k.c for k in ref.kraus])
    assert np.abs(got - want).max() <= 1e-12
    assert [tuple(k.r) for k in io.kraus] == [tuple(k.r) for k in ref.kraus]
    assert validate_io(io).certificate == "group-diagonal"


def test_counterexample_point_objective():
    val = fi_objective(counterexample_point(), uniform_superposition())
    assert val == pytest.approx(0.9410, abs=5e-4)


def test_batch_fi_matches_exact():
    rng = np.random.default_rng(1)
    rho = random_mixed_state(3, 4)
    for _ in range(20):
        g = 2
        u = np.stack([random_unitary(3, rng, rows=4) for _ in range(g)])
        delta = rng.dirichlet(np.ones(g), size=3).T
        rate = rng.uniform(size=(g, 3))
        pt = StructuredFamilyPoint(delta, u, rate)
        fast = batch_fi(pt.rows()[None], pt.rate[None], rho.mat)[0]
        assert fast == pytest.approx(fi_objective(pt, rho), abs=1e-12)


def test_incoherent_state_bound_is_zero():
    for s in range(3):
        rho = random_incoherent_state(3, s)
        rep = maximize_coherence(rho, budget=OptimizerBudget(restarts=3, max_iter=50))
        assert rep.lower_bound <= 1e-9


def test_qubit_bound_never_exceeds_closed_form():
    for s in range(5):
        rho = random_mixed_state(2, s)
        rep = maximize_coherence(rho, budget=OptimizerBudget(restarts=6, seed=s))
        exact = qubit_coherence_analytic(rho)
        assert rep.lower_bound <= exact + 1e-9
        assert rep.lower_bound >= exact * (1 - 1e-2)
        assert rep.analytic_value == exact


def test_theta0_invariance():
    rho = random_mixed_state(2, 9)
    b = OptimizerBudget(restarts=4, seed=3)
    vals = [maximize_coherence(rho, t, b).lower_bound for t in (0.0, 0.7, 2.1)]
    assert max(vals) - min(vals) <= 1e-9


def test_restart_rng_depends_only_on_seed_and_index():
    a = restart_rng(5, 3).standard_normal(4)
    b = restart_rng(5, 3).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, restart_rng(5, 4).standard_normal(4))


def test_more_restarts_never_hurt():
    rho = random_mixed_state(3, 2)
    short = maximize_coherence(rho, budget=OptimizerBudget(restarts=3, seed=1, max_iter=80))
    long = maximize_coherence(rho, budget=OptimizerBudget(restarts=6, seed=1, max_iter=80))
    assert long.values[:3] == short.values
    assert long.lower_bound >= short.lower_bound - 1e-12


def test_deterministic():
    rho = random_mixed_state(3, 5)
    b = OptimizerBudget(restarts=3, seed=2, max_iter=60)
    assert maximize_coherence(rho, budget=b).to_json() == maximize_coherence(rho, budget=b).to_json()


def test_seeded_search_reaches_counterexample():
    rho = uniform_superposition()
    b = OptimizerBudget(restarts=40, seed_points=(counterexample_point(),))
    rep = maximize_coherence(rho, budget=b)
    assert rep.lower_bound >= 0.9410 - 1e-3
    assert rep.certificate == "group-diagonal"
    assert rep.label == "certified lower bound"
    # reported bound is the exact FI of the rebuilt operation
    io = family_to_io(rep.best_point)
    assert classical_fi(postselect_distribution(io, rho)) == rep.lower_bound


def test_qfi_of_best_dominates_bound():
    for dim in (2, 3):
        rho = random_mixed_state(dim, 11)
        rep = maximize_coherence(rho, budget=OptimizerBudget(restarts=4, max_iter=100))
        assert qfi_of_best(rep, rho) >= rep.lower_bound - 1e-9


def test_budget_json_roundtrip():
    b = OptimizerBudget(restarts=7, group_counts=(1, 3), seed=4)
    doc = json.loads(json.dumps(b.to_json()))
    doc.pop("seed_points")
    assert OptimizerBudget.from_json(doc) == b
    with pytest.raises(ValueError):
        OptimizerBudget.from_json({"restarts": 2, "bogus": 1})


def test_budget_rejects_zero_restarts(plus):
    with pytest.raises(ValueError):
        maximize_coherence(plus, budget=OptimizerBudget(restarts=0))


def test_report_json_is_serializable(plus):
    rep = maximize_coherence(plus, budget=OptimizerBudget(restarts=2))
    doc = json.loads(json.dumps(rep.to_json()))
    assert doc["lower_bound"] == pytest.approx(1.0, abs=1e-6)
    assert doc["analytic"] == pytest.approx(1.0, abs=1e-12)
