"""Certified lower bounds on the coherence measure by multi-restart ascent.

The search runs over a structured slice of the rank-1 operations: ``G``
groups, each with a diagonal weight vector ``delta_g`` (summing to the
all-ones vector over groups), an ``m x d`` frame ``U_g`` with orthonormal
columns and one rate vector ``rate_g``. Group ``g`` contributes the rank-1
operators |label><w| D_g(theta), one per row w of ``U_g diag(sqrt(delta_g))``.
Each group sum is diag(delta_g), so every point is a valid operation at every
theta and every value found is the exact Fisher information of a validated IO.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FishcohError, InvalidPoint, SingularOutcome
from .fisher import classical_fi, fi_terms, qfi_sld, qubit_coherence_analytic, state_derivative
from .iochannel import IncoherentKraus, ParametrizedIO, postselect_distribution, validate_io
from .qcore import random_unitary

POINT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StructuredFamilyPoint:
    """Arrays ``delta`` (G, d), ``u`` (G, m, d) and ``rate`` (G, d)."""

    delta: np.ndarray
    u: np.ndarray
    rate: np.ndarray

    def __post_init__(self):
        delta = np.array(self.delta, dtype=float)
        u = np.array(self.u, dtype=complex)
        rate = np.array(self.rate, dtype=float)
        if delta.ndim != 2 or u.ndim != 3 or rate.shape != delta.shape:
            raise InvalidPoint("expected delta (G, d), u (G, m, d), rate (G, d)")
        if u.shape[0] != delta.shape[0] or u.shape[2] != delta.shape[1]:
            raise InvalidPoint(f"inconsistent shapes {delta.shape}, {u.shape}")
        if delta.min() < -POINT_TOL:
            raise InvalidPoint("negative group weight")
        if np.abs(delta.sum(axis=0) - 1).max() > POINT_TOL:
            raise InvalidPoint("group weights do not sum to one in every slot")
        eye = np.eye(delta.shape[1])
        gram = np.einsum("gmi,gmj->gij", u.conj(), u)
        if np.abs(gram - eye).max() > POINT_TOL:
            raise InvalidPoint("frame columns are not orthonormal")
        if rate.min() < 0 or rate.max() > 1:
            raise InvalidPoint("rates outside [0, 1]")
        delta = np.clip(delta, 0.0, None)
        for a in (delta, u, rate):
            a.flags.writeable = False
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "rate", rate)

    @property
    def dim(self):
        return self.delta.shape[1]

    @property
    def n_groups(self):
        return self.delta.shape[0]

    def rows(self):
        """Kraus rows, shape (G, m, d)."""
        return self.u * np.sqrt(self.delta)[:, None, :]

    def to_json(self):
        return {
            "delta": self.delta.tolist(),
            "u": [[[[float(z.real), float(z.imag)] for z in row] for row in grp] for grp in self.u],
            "rate": self.rate.tolist(),
        }


def family_to_io(pt, theta0=0.0):
    """One rank-1 operator per frame row, each with its own output label."""
    ops = []
    label = 0
    d = pt.dim
    for grp_rows, rate in zip(pt.rows(), pt.rate):
        for w in grp_rows:
            ops.append(IncoherentKraus([label] * d, w, rate))
            label += 1
    io = ParametrizedIO(d, tuple(ops), theta0)
    try:
        rep = validate_io(io)
    except FishcohError as err:
        raise InvalidPoint(f"point does not induce a valid IO: {err}") from None
    if rep.certificate != "group-diagonal":
        raise InvalidPoint("point lacks the group-diagonal certificate")
    return io


def fi_objective(pt, rho, theta0=0.0):
    """Post-selection FI of the point's IO on ``rho``.

    A point with a singular outcome is flagged by returning ``math.inf``;
    callers must reject it rather than score it.
    """
    try:
        return classical_fi(postselect_distribution(family_to_io(pt, theta0), rho))
    except SingularOutcome:
        return math.inf


def batch_fi(rows, rate, rho):
    """Vectorized post-selection FI for a batch of structured points.

    ``rows`` has shape (B, G, m, d), ``rate`` (B, G, d). Returns FI values
    (B,), with ``-inf`` where an outcome is singular.
    """
    rc = rows.conj() @ rho.T  # (rho a^dag) laid out along rows
    p = np.sum(rows * rc, axis=-1).real
    q = np.sum(rows * rate[:, :, None, :] * rc, axis=-1)
    # d/dtheta tr(E rho E^dag) = 2 Re(i (a*r) rho a^dag)
    d = -2.0 * q.imag
    terms, bad = fi_terms(p, d)
    val = terms.sum(axis=(1, 2))
    return np.where(bad.any(axis=(1, 2)), -np.inf, val)


@dataclass
class OptimizerBudget:
    restarts: int = 20
    group_counts: tuple | None = None
    outcomes: int | None = None
    max_iter: int = 300
    grad_step: float = 1e-6
    seed: int = 0
    ftol: float = 1e-12
    seed_points: tuple = ()

    def resolved_groups(self, dim):
        if self.group_counts is None:
            return tuple(sorted({1, 2, dim}))
        return tuple(int(g) for g in self.group_counts)

    def to_json(self):
        return {
            "restarts": self.restarts,
            "group_counts": None if self.group_counts is None else list(self.group_counts),
            "outcomes": self.outcomes,
            "max_iter": self.max_iter,
            "grad_step": self.grad_step,
            "seed": self.seed,
            "ftol": self.ftol,
            "seed_points": len(self.seed_points),
        }

    @classmethod
    def from_json(cls, obj):
        keys = {"restarts", "group_counts", "outcomes", "max_iter", "grad_step", "seed", "ftol"}
        unknown = set(obj) - keys
        if unknown:
            raise ValueError(f"unknown budget keys: {sorted(unknown)}")
        kw = dict(obj)
        if kw.get("group_counts") is not None:
            kw["group_counts"] = tuple(kw["group_counts"])
        return cls(**kw)


@dataclass
class RestartRecord:
    index: int
    groups: int
    value: float
    iterations: int
    status: str = "ok"


@dataclass
class CoherenceReport:
    lower_bound: float
    best_point: StructuredFamilyPoint | None
    restarts: int
    values: list
    theta0: float
    records: list = field(default_factory=list)
    analytic_value: float | None = None
    analytic_provenance: str | None = None
    label: str = "certified lower bound"
    certificate: str | None = None

    def to_json(self):
        return {
            "lower_bound": self.lower_bound,
            "analytic": self.analytic_value,
            "analytic_provenance": self.analytic_provenance,
            "label": self.label,
            "theta0": self.theta0,
            "restarts": self.restarts,
            "values": self.values,
            "failed_restarts": [
                {"index": r.index, "status": r.status} for r in self.records if r.status != "ok"
            ],
            "certificate": self.certificate,
            "best_point": None if self.best_point is None else self.best_point.to_json(),
        }


class _Layout:
    """Flat real parameter vector <-> (u, s, rate) with s = sqrt(delta)."""

    def __init__(self, n_groups, m, d):
        self.shape_u = (n_groups, m, d)
        self.shape_s = (n_groups, d)
        nu = n_groups * m * d
        ns = n_groups * d
        self.cuts = np.cumsum([nu, nu, ns, ns])
        self.size = int(self.cuts[-1])

    def unpack(self, x):
        b = x.shape[0]
        c1, c2, c3, c4 = self.cuts
        u = (x[:, :c1] + 1j * x[:, c1:c2]).reshape((b,) + self.shape_u)
        s = x[:, c2:c3].reshape((b,) + self.shape_s)
        return u, s, x[:, c3:c4].reshape((b,) + self.shape_s)

    def pack(self, u, s, r):
        b = u.shape[0]
        return np.concatenate(
            [u.real.reshape(b, -1), u.imag.reshape(b, -1), s.reshape(b, -1), r.reshape(b, -1)],
            axis=1,
        )


def _project(layout, x):
    """Feasibility: polar factor of each frame, unit columns of s, rates clamped to [0, 1]."""
    u, s, r = layout.unpack(x)
    w, _, vh = np.linalg.svd(u, full_matrices=False)
    u = w @ vh
    norm = np.linalg.norm(s, axis=1, keepdims=True)
    s = np.where(norm > 0, s / np.where(norm > 0, norm, 1.0), 1.0 / np.sqrt(s.shape[1]))
    r = np.clip(r, 0.0, 1.0)
    return layout.pack(u, s, r)


def _evaluate(layout, x, rho):
    u, s, r = layout.unpack(x)
    return batch_fi(u * s[:, :, None, :], r, rho)


def _ascend(layout, x0, rho, budget):
    """Projected gradient ascent with central-difference gradients.

    Each iteration evaluates all 2P perturbations in one batch, then a batch
    of step lengths along the normalized gradient, keeping the best feasible
    improvement.
    """
    h = budget.grad_step
    x = _project(layout, x0[None])[0]
    f = _evaluate(layout, x[None], rho)[0]
    if not np.isfinite(f):
        return x, f, 0
    eye = np.eye(layout.size)
    perturb = np.concatenate([x + h * eye, x - h * eye])
    step = 0.1
    ladder = 2.0 ** np.arange(1, -9, -1)
    stall = 0
    it = 0
    for it in range(1, budget.max_iter + 1):
        perturb[: layout.size] = x + h * eye
        perturb[layout.size:] = x - h * eye
        vals = _evaluate(layout, perturb, rho)
        fp, fm = vals[: layout.size], vals[layout.size:]
        grad = np.where(np.isfinite(fp) & np.isfinite(fm), (fp - fm) / (2 * h), 0.0)
        gn = np.linalg.norm(grad)
        if gn < 1e-14:
            break
        steps = step * ladder
        cand = _project(layout, x[None] + steps[:, None] * (grad / gn)[None])
        fc = _evaluate(layout, cand, rho)
        k = int(np.argmax(fc))
        if not fc[k] > f:
            break
        gain = fc[k] - f
        x, f = cand[k], fc[k]
        step = min(1.0, steps[k] * 2.0)
        stall = stall + 1 if gain < budget.ftol * (1.0 + abs(f)) else 0
        if stall >= 5:
            break
    return x, f, it


def _random_start(layout, n_groups, m, d, rng):
    u = np.stack([random_unitary(d, rng, rows=m) for _ in range(n_groups)])
    delta = rng.dirichlet(np.ones(n_groups), size=d).T
    r = rng.uniform(0.0, 1.0, (n_groups, d))
    return layout.pack(u[None], np.sqrt(delta)[None], r[None])[0]


def _to_point(layout, x):
    u, s, r = layout.unpack(x[None])
    u, s, r = u[0], s[0], r[0]
    sign = np.where(s < 0, -1.0, 1.0)
    return StructuredFamilyPoint(s * s / (s * s).sum(axis=0), u * sign[:, None, :], r)


def restart_rng(seed, index):
    """Generator for restart ``index``; depends only on (seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def maximize_coherence(rho, theta0=0.0, budget=None):
    """Multi-restart local ascent of the post-selection FI over the structured family.

    Restart ``k`` uses ``budget.seed_points[k]`` as its start when present,
    otherwise a random start drawn from ``restart_rng(seed, k)`` with
    ``group_counts[k % len(group_counts)]`` groups: Haar frames, flat
    Dirichlet group weights per slot, uniform rates. The best restart (lowest
    index on ties) is rebuilt as an explicit IO, validated, and its exact FI
    becomes the reported bound. Qubit reports also carry the closed-form value.
    """
    budget = OptimizerBudget() if budget is None else budget
    if budget.restarts < 1:
        raise ValueError("restarts must be >= 1")
    d = rho.dim
    m = d if budget.outcomes is None else int(budget.outcomes)
    group_counts = budget.resolved_groups(d)
    rho_m = np.asarray(rho.mat)

    records, best = [], None
    n_total = max(budget.restarts, len(budget.seed_points))
    for k in range(n_total):
        if k < len(budget.seed_points):
            pt = budget.seed_points[k]
            layout = _Layout(pt.n_groups, pt.u.shape[1], d)
            x0 = layout.pack(pt.u[None], np.sqrt(pt.delta)[None], pt.rate[None])[0]
            n_groups = pt.n_groups
        else:
            n_groups = group_counts[k % len(group_counts)]
            layout = _Layout(n_groups, m, d)
            x0 = _random_start(layout, n_groups, m, d, restart_rng(budget.seed, k))
        x, f, iters = _ascend(layout, x0, rho_m, budget)
        rec = RestartRecord(k, n_groups, float(f) if np.isfinite(f) else float("nan"), iters)
        if not np.isfinite(f):
            rec.status = "singular start"
        records.append(rec)
        if np.isfinite(f) and (best is None or f > best[0]):
            best = (f, layout, x)

    report = CoherenceReport(
        lower_bound=0.0,
        best_point=None,
        restarts=n_total,
        values=[r.value for r in records],
        theta0=float(theta0),
        records=records,
    )
    if best is not None:
        pt = _to_point(best[1], best[2])
        io = family_to_io(pt, theta0)
        report.certificate = validate_io(io).certificate
        report.lower_bound = classical_fi(postselect_distribution(io, rho))
        report.best_point = pt
    if d == 2:
        report.analytic_value = qubit_coherence_analytic(rho, theta0)
        report.analytic_provenance = "qubit closed form 4|rho_12|^2 (unitary-family QFI)"
        report.label = "qubit (closed form available)"
    return report


def qfi_of_best(report, rho):
    """SLD-QFI of the output family of the report's best IO; never below the FI bound."""
    if report.best_point is None:
        return 0.0
    return qfi_sld(state_derivative(family_to_io(report.best_point, report.theta0), rho))


def env_threads():
    """Parallelism cap from FISHCOH_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("FISHCOH_THREADS", "1")))
    except ValueError:
        return 1
