"""Golden cases: the qutrit separation example and the qubit consistency sweep."""

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fisher import classical_fi, max_unitary_qfi_pure, qubit_coherence_analytic
from .iochannel import IncoherentKraus, ParametrizedIO, postselect_distribution, validate_io
from .optimize import OptimizerBudget, StructuredFamilyPoint, maximize_coherence
from .qcore import DensityMatrix, random_mixed_state

F1_PUBLISHED = 0.9410
F2_PUBLISHED = 0.8889


def uniform_superposition(dim=3):
    return DensityMatrix.from_ket(np.ones(dim))


def _omega(k):
    return np.exp(2j * np.pi * k / 3)


# Rows A^x of the nine operators, before the common 1/sqrt(3).
def _counterexample_rows():
    s4, s6 = np.sqrt(0.4), np.sqrt(0.6)
    rows = []
    for x in range(3):
        rows.append([0.0, s4 * _omega(-x), s6 * _omega(x)])
    for x in range(3):
        rows.append([s4, s6 * _omega(x), 0.0])
    for x in range(3):
        rows.append([s6, 0.0, s4 * _omega(x)])
    return np.array(rows, dtype=complex) / np.sqrt(3)


COUNTEREXAMPLE_RATES = [(0.0, 1.0, 0.0)] * 3 + [(1.0, 0.0, 0.0)] * 6


def build_counterexample_io():
    """Nine rank-1 operators |x><A^x| D_x(theta) on a qutrit, theta0 = 0.

    Each operator sends every input to the single output label x.
    """
    ops = [
        IncoherentKraus([x] * 3, row, rate)
        for x, (row, rate) in enumerate(zip(_counterexample_rows(), COUNTEREXAMPLE_RATES))
    ]
    return ParametrizedIO(3, tuple(ops), 0.0)


def counterexample_point():
    """The same operation as a three-group structured point.

    Each group's frame is the 3 x 3 Fourier matrix with its columns
    arranged so that the weighted rows match A^x.
    """
    f = np.array([[_omega(j * k) for k in range(3)] for j in range(3)]) / np.sqrt(3)
    ones, fwd, bwd = f[:, 0], f[:, 1], f[:, 2]
    u = np.stack([
        np.column_stack([ones, bwd, fwd]),
        np.column_stack([ones, fwd, bwd]),
        np.column_stack([ones, bwd, fwd]),
    ])
    delta = np.array([[0.0, 0.4, 0.6], [0.4, 0.6, 0.0], [0.6, 0.0, 0.4]])
    rate = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    return StructuredFamilyPoint(delta, u, rate)


@dataclass
class GoldenCase:
    name: str
    compute: Callable[[], float]
    expected: float
    tolerance: float
    provenance: str


@dataclass
class CaseResult:
    name: str
    value: float
    expected: float | None
    tolerance: float | None
    passed: bool
    provenance: str
    seconds: float
    detail: dict | None = None

    def to_json(self):
        return {
            "name": self.name,
            "value": self.value,
            "expected": self.expected,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "provenance": self.provenance,
            "seconds": round(self.seconds, 4),
            "detail": self.detail,
        }


def counterexample_fi():
    io = build_counterexample_io()
    validate_io(io)
    return classical_fi(postselect_distribution(io, uniform_superposition()))


def unitary_bound():
    return max_unitary_qfi_pure(uniform_superposition())[0]


GOLDEN_CASES = (
    GoldenCase("counterexample_fi", counterexample_fi, F1_PUBLISHED, 5e-4,
               "[PUBLISHED] qutrit example, post-selection FI of the nine-operator IO"),
    GoldenCase("unitary_bound", unitary_bound, F2_PUBLISHED, 1e-4,
               "[PUBLISHED] qutrit example, best diagonal-generator unitary QFI"),
)


def _timed(fn):
    t = time.perf_counter()
    v = fn()
    return v, time.perf_counter() - t


def qubit_sweep(n_states=50, restarts=20, seed=2024):
    """Optimizer bound vs closed form on seeded random qubit states."""
    worst_rel, worst_excess = 0.0, -np.inf
    for i in range(n_states):
        rho = random_mixed_state(2, np.random.SeedSequence([seed, i]))
        rep = maximize_coherence(rho, 0.0, OptimizerBudget(restarts=restarts, seed=seed + i))
        exact = qubit_coherence_analytic(rho)
        worst_rel = max(worst_rel, abs(rep.lower_bound - exact) / exact)
        worst_excess = max(worst_excess, rep.lower_bound - exact)
    return worst_rel, worst_excess


def run_golden_suite(qubit_states=50):
    """Evaluate every golden case; returns a JSON-ready report with an ``ok`` flag."""
    results = []
    values = {}
    for case in GOLDEN_CASES:
        v, dt = _timed(case.compute)
        values[case.name] = v
        results.append(CaseResult(case.name, v, case.expected, case.tolerance,
                                  abs(v - case.expected) <= case.tolerance, case.provenance, dt))

    gap = values["counterexample_fi"] - values["unitary_bound"]
    results.append(CaseResult("separation", gap, None, None, gap >= 0.05,
                              "[DERIVED] F1 - F2 must be >= 0.05", 0.0))

    (rel, excess), dt = _timed(lambda: qubit_sweep(qubit_states))
    results.append(CaseResult(
        "qubit_consistency", rel, 0.0, 1e-2, rel <= 1e-2 and excess <= 1e-9,
        "[DERIVED] optimizer vs 4|rho_12|^2 on random qubits", dt,
        {"states": qubit_states, "worst_relative_gap": rel, "worst_excess": excess},
    ))
    return {
        "ok": all(r.passed for r in results),
        "cases": [r.to_json() for r in results],
        "recomputed": {k: repr(v) for k, v in values.items()},
    }
