"""Parametrized incoherent operations.

A Kraus operator has the form

    E(theta) = sum_n c_n exp(i r_n (theta - theta0)) |g(n)><n|

so each input basis vector lands on a single output basis vector. Phases are
linear in theta: the Fisher information at theta0 depends only on the phase
value there (absorbed into ``c``) and its slope ``r``, so nothing is lost for
the coherence measure, and completeness at every theta becomes checkable.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    Incomplete,
    IncompleteAtTheta,
    IncompleteAtTheta0,
    InvalidIO,
    InvalidKraus,
    StateIncoherent,
)
from .qcore import CLASSIFY_TOL, DensityMatrix, _rng, eig_hermitian, random_unitary

COMPLETE_TOL = 1e-10
GRID_TOL = 1e-8
GRID_POINTS = 11
WEIGHT_CUTOFF = 1e-12
RANK_TOL = 1e-10
ENSEMBLE_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class IncoherentKraus:
    """One Kraus operator: output map ``g``, coefficients ``c``, phase rates ``r``."""

    g: tuple
    c: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        g = tuple(int(v) for v in self.g)
        c = np.array(self.c, dtype=complex).ravel()
        r = np.array(self.r, dtype=float).ravel()
        if not (len(g) == c.size == r.size) or not g:
            raise InvalidKraus(f"g, c, r lengths differ: {len(g)}, {c.size}, {r.size}")
        if min(g) < 0:
            raise InvalidKraus("output labels must be non-negative")
        if np.any(r < 0) or np.any(r > 1) or not np.all(np.isfinite(r)):
            raise InvalidKraus(f"phase rates must lie in [0, 1], got {r.tolist()}")
        c.flags.writeable = False
        r.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_matrix(cls, mat, r=None):
        """Read an incoherent matrix (one nonzero per column at most)."""
        mat = np.asarray(mat, dtype=complex)
        d = mat.shape[1]
        g, c = [], []
        for n in range(d):
            nz = np.flatnonzero(np.abs(mat[:, n]) > 0)
            if nz.size > 1:
                raise InvalidKraus(f"column {n} has {nz.size} nonzero entries")
            row = int(nz[0]) if nz.size else 0
            g.append(row)
            c.append(mat[row, n])
        return cls(g, c, np.zeros(d) if r is None else r)

    @property
    def dim(self):
        return self.c.size

    @property
    def weight(self):
        return float(np.sum(np.abs(self.c) ** 2))

    def coefficients(self, theta=0.0, theta0=0.0):
        return self.c * np.exp(1j * self.r * (theta - theta0))

    def matrix(self, theta=0.0, theta0=0.0, out_dim=None):
        out_dim = max(self.g) + 1 if out_dim is None else out_dim
        m = np.zeros((out_dim, self.dim), dtype=complex)
        m[list(self.g), np.arange(self.dim)] = self.coefficients(theta, theta0)
        return m

    def derivative_matrix(self, out_dim=None):
        """d/dtheta of ``matrix`` at theta0."""
        out_dim = max(self.g) + 1 if out_dim is None else out_dim
        m = np.zeros((out_dim, self.dim), dtype=complex)
        m[list(self.g), np.arange(self.dim)] = 1j * self.r * self.c
        return m

    def gram(self, theta=0.0, theta0=0.0):
        """E^dag E; entries couple only inputs sharing an output label."""
        b = self.coefficients(theta, theta0)
        g = np.array(self.g)
        return np.outer(b.conj(), b) * (g[:, None] == g[None, :])

    def group_key(self):
        """Rates on the support of ``c``; off-support rates never matter."""
        return tuple(float(v) if abs(z) > 0 else None for z, v in zip(self.c, self.r))

    def __repr__(self):
        return f"IncoherentKraus(g={self.g}, c={np.round(self.c, 6).tolist()}, r={self.r.tolist()})"


@dataclass(frozen=True, eq=False)
class ParametrizedIO:
    """Complete set of ``IncoherentKraus`` operators around ``theta0``.

    Operators with total weight below 1e-12 are dropped on construction.
    """

    dim: int
    kraus: tuple
    theta0: float = 0.0

    def __post_init__(self):
        kraus = tuple(k for k in self.kraus if k.weight >= WEIGHT_CUTOFF)
        for k in kraus:
            if k.dim != self.dim:
                raise DimensionMismatch(f"Kraus operator of dim {k.dim} in a dim-{self.dim} IO")
        if not kraus:
            raise InvalidIO("IO has no Kraus operator with nonzero weight")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "kraus", kraus)
        object.__setattr__(self, "theta0", float(self.theta0))

    @property
    def out_dim(self):
        return max(self.dim, max(max(k.g) for k in self.kraus) + 1)

    def __len__(self):
        return len(self.kraus)

    def _arrays(self):
        c = np.array([k.c for k in self.kraus])
        r = np.array([k.r for k in self.kraus])
        g = np.array([k.g for k in self.kraus])
        return c, r, g

    def matrices(self, theta=None):
        theta = self.theta0 if theta is None else theta
        return [k.matrix(theta, self.theta0, self.out_dim) for k in self.kraus]

    def completeness_sum(self, theta=None):
        theta = self.theta0 if theta is None else theta
        c, r, g = self._arrays()
        b = c * np.exp(1j * r * (theta - self.theta0))
        mask = g[:, :, None] == g[:, None, :]
        return np.sum(b.conj()[:, :, None] * b[:, None, :] * mask, axis=0)

    def completeness_residual(self, theta=None):
        s = self.completeness_sum(theta)
        return float(np.abs(s - np.eye(self.dim)).max())

    def __repr__(self):
        return f"ParametrizedIO(dim={self.dim}, n_kraus={len(self.kraus)}, theta0={self.theta0})"


@dataclass
class ValidityReport:
    valid: bool
    residual_theta0: float
    certificate: str | None = None
    groups: list = field(default_factory=list)
    grid: list = field(default_factory=list)
    failure: str | None = None

    def to_json(self):
        return {
            "valid": self.valid,
            "residual_theta0": self.residual_theta0,
            "certificate": self.certificate,
            "groups": [
                {
                    "rate": [None if v is None else float(v) for v in grp["rate"]],
                    "members": grp["members"],
                    "sum_diagonal": [float(v) for v in np.real(np.diag(grp["sum"]))],
                    "off_diagonal": grp["off_diagonal"],
                    "diagonal": grp["diagonal"],
                }
                for grp in self.groups
            ],
            "grid": [{"theta": t, "residual": res} for t, res in self.grid],
            "failure": self.failure,
        }


def rate_groups(io, masked=True):
    """Partition Kraus indices by rate vector, in first-seen order.

    With ``masked`` the key ignores rates where c_n = 0, which never affect
    the operator.
    """
    groups = {}
    for i, k in enumerate(io.kraus):
        key = k.group_key() if masked else tuple(float(v) for v in k.r)
        groups.setdefault(key, []).append(i)
    out = []
    for key, members in groups.items():
        s = sum(io.kraus[i].gram() for i in members)
        off = float(np.abs(s - np.diag(np.diag(s))).max())
        out.append({"rate": key, "members": members, "sum": s, "off_diagonal": off,
                    "diagonal": off <= COMPLETE_TOL})
    return out


def validate_io(io):
    """Check completeness at theta0 and certify it for every theta.

    Within a rate group every operator is A_x D(theta) with one shared
    diagonal phase matrix D, so a diagonal group sum makes the total
    sum_x E_x^dag E_x independent of theta. Two partitions are tried: by
    rates on each operator's support, then by the full rate vector. If
    neither gives diagonal group sums, completeness is checked numerically on
    11 points spanning [theta0 - pi, theta0 + pi].
    """
    res0 = io.completeness_residual()
    report = ValidityReport(valid=False, residual_theta0=res0, groups=rate_groups(io))
    if res0 > COMPLETE_TOL:
        report.failure = "IncompleteAtTheta0"
        raise IncompleteAtTheta0(res0, report)
    for masked in (True, False):
        groups = report.groups if masked else rate_groups(io, masked=False)
        if all(grp["diagonal"] for grp in groups):
            report.groups = groups
            report.valid = True
            report.certificate = "group-diagonal"
            return report
    for t in np.linspace(io.theta0 - np.pi, io.theta0 + np.pi, GRID_POINTS):
        res = io.completeness_residual(t)
        report.grid.append((float(t), res))
        if res > GRID_TOL:
            report.failure = "IncompleteAtTheta"
            raise IncompleteAtTheta(float(t), res, report)
    report.valid = True
    report.certificate = "theta-grid"
    return report


def rank1_flags(io):
    """Per-operator flag: E^dag E has exactly one eigenvalue above 1e-10."""
    return tuple(int(np.sum(np.linalg.eigvalsh(k.gram()) > RANK_TOL)) == 1 for k in io.kraus)


def _check_dims(io, rho):
    if rho.dim != io.dim:
        raise DimensionMismatch(f"state has dim {rho.dim}, IO expects {io.dim}")


def apply_io(io, rho, theta=None):
    """sum_x E_x(theta) rho E_x(theta)^dag."""
    _check_dims(io, rho)
    out = sum(e @ rho.mat @ e.conj().T for e in io.matrices(theta))
    return DensityMatrix.from_array(out)


@dataclass(frozen=True)
class FisherDatum:
    """Outcome probabilities ``p`` at theta0 with their theta-derivatives ``d``."""

    p: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        if p.shape != d.shape:
            raise ValueError("p and d must have equal length")
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min():.3e}")
        if abs(p.sum() - 1) > 1e-10:
            raise ValueError(f"probabilities sum to {p.sum():.15g}")
        if abs(d.sum()) > 1e-10:
            raise ValueError(f"derivatives sum to {d.sum():.3e}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "d", d)


def postselect_distribution(io, rho):
    """Post-selection outcome distribution and its exact derivative at theta0.

    p_x = sum_{n,m: g(n)=g(m)} c_n rho_nm c_m^*
    d_x = sum_{n,m: g(n)=g(m)} i (r_n - r_m) c_n rho_nm c_m^*
    """
    _check_dims(io, rho)
    res0 = io.completeness_residual()
    if res0 > COMPLETE_TOL:
        raise IncompleteAtTheta0(res0)
    c, r, g = io._arrays()
    mask = g[:, :, None] == g[:, None, :]
    t = c[:, :, None] * rho.mat[None] * c.conj()[:, None, :] * mask
    p = t.sum(axis=(1, 2)).real
    d = (1j * (r[:, :, None] - r[:, None, :]) * t).sum(axis=(1, 2)).real
    return FisherDatum(p, d)


@dataclass(frozen=True)
class ClassicalEnsemble:
    members: tuple

    @property
    def weights(self):
        return np.array([t for t, _ in self.members])

    @property
    def states(self):
        return [s for _, s in self.members]

    def __len__(self):
        return len(self.members)


def kraus_completeness_residual(kraus_set, theta=0.0, theta0=0.0):
    dim = kraus_set[0].dim
    s = sum(k.gram(theta, theta0) for k in kraus_set)
    return float(np.abs(s - np.eye(dim)).max())


def postmeasurement_ensemble(kraus_set, rho, theta=0.0, theta0=0.0):
    """{t_l, K_l rho K_l^dag / t_l}, dropping members with t_l < 1e-12."""
    kraus_set = list(kraus_set)
    for k in kraus_set:
        if k.dim != rho.dim:
            raise DimensionMismatch(f"Kraus dim {k.dim} vs state dim {rho.dim}")
    res = kraus_completeness_residual(kraus_set, theta, theta0)
    if res > COMPLETE_TOL:
        raise Incomplete(f"Kraus set completeness residual {res:.3e}")
    out_dim = max(rho.dim, max(max(k.g) for k in kraus_set) + 1)
    members = []
    for k in kraus_set:
        m = k.matrix(theta, theta0, out_dim)
        s = m @ rho.mat @ m.conj().T
        t = float(np.trace(s).real)
        if t < ENSEMBLE_CUTOFF:
            continue
        members.append((t, DensityMatrix.from_array(s / t)))
    return ClassicalEnsemble(tuple(members))


def apply_kraus(kraus_set, rho, theta=0.0, theta0=0.0):
    """Non-selective action of a Kraus list on ``rho``."""
    out_dim = max(rho.dim, max(max(k.g) for k in kraus_set) + 1)
    out = sum(m @ rho.mat @ m.conj().T
              for m in (k.matrix(theta, theta0, out_dim) for k in kraus_set))
    return DensityMatrix.from_array(out)


def refine_to_rank1(io):
    """Split every operator into rank-1 pieces without losing Fisher information.

    Writing E_x(theta) = A_x U_x(theta) with U_x diagonal phases, each
    eigenpair (lam, v) of A_x^dag A_x with lam >= 1e-12 yields the operator
    |label><psi| U_x(theta), psi = sqrt(lam) v. Labels are fresh integers
    assigned in lexicographic (x, i) order.
    """
    validate_io(io)
    out = []
    label = 0
    for k in io.kraus:
        es = eig_hermitian(k.gram())
        for lam, v in zip(es.values, es.vectors.T):
            if lam < WEIGHT_CUTOFF:
                continue
            psi = np.sqrt(lam) * v
            out.append(IncoherentKraus([label] * io.dim, psi.conj(), k.r))
            label += 1
    return ParametrizedIO(io.dim, tuple(out), io.theta0)


def _largest_coherence(rho):
    m = np.abs(rho.mat).copy()
    np.fill_diagonal(m, 0.0)
    j, k = np.unravel_index(np.argmax(np.triu(m, 1)), m.shape)
    return int(j), int(k), float(m[j, k])


def witness_io(rho, theta0=0.0):
    """Three-operator IO with strictly positive Fisher information on a coherent ``rho``.

    Built on the off-diagonal pair (j, k) of largest modulus, with
    rho_jk = |rho_jk| e^{i alpha} and the phase offset gamma fixed so that
    alpha + theta0 + gamma = pi/4:

        E1 = (e^{i(theta+gamma)} |j><j| + |j><k|) / sqrt(2)
        E2 = (-e^{i(theta+gamma)} |k><j| + |k><k|) / sqrt(2)
        E3 = sum over the remaining n of |n><n|
    """
    j, k, mod = _largest_coherence(rho)
    if mod <= CLASSIFY_TOL:
        raise StateIncoherent(f"largest off-diagonal modulus {mod:.3e} <= {CLASSIFY_TOL}")
    d = rho.dim
    alpha = np.angle(rho.mat[j, k])
    phase = np.exp(1j * (np.pi / 4 - alpha))  # e^{i(theta0 + gamma)}
    rate = np.zeros(d)
    rate[j] = 1.0
    s = 1 / np.sqrt(2)
    ops = []
    for out, sign in ((j, 1.0), (k, -1.0)):
        c = np.zeros(d, dtype=complex)
        c[j] = sign * s * phase
        c[k] = s
        ops.append(IncoherentKraus([out] * d, c, rate))
    rest = [n for n in range(d) if n not in (j, k)]
    if rest:
        c = np.zeros(d, dtype=complex)
        c[rest] = 1.0
        ops.append(IncoherentKraus(list(range(d)), c, np.zeros(d)))
    return ParametrizedIO(d, tuple(ops), theta0)


def compose(io, kraus_set):
    """The family {E_x K_l}: theta-independent ``kraus_set`` first, then ``io``.

    (E_x K_l)|n> = a_n b_{f(n)} e^{i r_{f(n)} (theta - theta0)} |g(f(n))>,
    which is again of the incoherent form.
    """
    ops = []
    for e in io.kraus:
        for kk in kraus_set:
            if max(kk.g) >= io.dim:
                raise DimensionMismatch("Kraus output label outside the IO's input space")
            f = np.array(kk.g)
            ops.append(IncoherentKraus([e.g[v] for v in f], kk.c * e.c[f], e.r[f]))
    return ParametrizedIO(kraus_set[0].dim, tuple(ops), io.theta0)


# -- random instances --

def _complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _psd_to_rank1(m, labels, rates, dim):
    """Rank-1 incoherent operators |label><u| whose Gram matrices sum to ``m``."""
    es = eig_hermitian(0.5 * (m + m.conj().T))
    ops = []
    for i, (lam, v) in enumerate(zip(es.values, es.vectors.T)):
        if lam < 1e-14:
            continue
        ops.append(IncoherentKraus([labels[i % len(labels)]] * dim, np.sqrt(lam) * v.conj(), rates))
    return ops


def random_incoherent_kraus(dim, seed, n_ops=None, out_dim=None):
    """A random theta-independent incoherent Kraus set, complete by construction.

    Output maps are uniform over functions {0..d-1} -> {0..out_dim-1},
    coefficients complex Gaussian; the set is rescaled so that
    sum K^dag K <= I and the PSD remainder is added as rank-1 operators
    |l><u|, which are incoherent for any vector u.
    """
    rng = _rng(seed)
    out_dim = dim if out_dim is None else out_dim
    n_ops = int(rng.integers(1, dim + 2)) if n_ops is None else n_ops
    zeros = np.zeros(dim)
    ops = [IncoherentKraus(rng.integers(0, out_dim, dim), _complex_normal(rng, dim), zeros)
           for _ in range(n_ops)]
    s = sum(k.gram() for k in ops)
    scale = np.sqrt(np.linalg.eigvalsh(s).max() * (1.0 + rng.uniform(0.0, 1.0)))
    ops = [IncoherentKraus(k.g, k.c / scale, zeros) for k in ops]
    rem = np.eye(dim) - s / scale**2
    ops += _psd_to_rank1(rem, list(rng.integers(0, out_dim, dim)), zeros, dim)
    return ops


def random_io(dim, seed, n_groups=None, ops_per_group=None, out_dim=None):
    """A random member of G, typically not rank-1.

    Each group shares one rate vector. Its operators are random incoherent
    matrices topped up with rank-1 operators so that the group sum is
    diagonal; a final diagonal rescaling of the inputs makes the grand total
    the identity. Valid at every theta through the group-diagonal certificate.
    """
    rng = _rng(seed)
    out_dim = dim if out_dim is None else out_dim
    n_groups = int(rng.integers(1, 4)) if n_groups is None else n_groups
    groups = []
    for _ in range(n_groups):
        rate = rng.uniform(0.0, 1.0, dim)
        k = int(rng.integers(1, dim + 1)) if ops_per_group is None else ops_per_group
        ops = [IncoherentKraus(rng.integers(0, out_dim, dim), _complex_normal(rng, dim), rate)
               for _ in range(k)]
        s = sum(op.gram() for op in ops)
        off = s - np.diag(np.diag(s))
        mu = max(0.0, -np.linalg.eigvalsh(-off).min()) + rng.uniform(0.0, 1.0)
        # mu I - off >= 0, so diag(s) + mu I dominates s
        ops += _psd_to_rank1(mu * np.eye(dim) - off, list(rng.integers(0, out_dim, dim)), rate, dim)
        groups.append(ops)
    total = sum(op.gram() for ops in groups for op in ops)
    norm = 1 / np.sqrt(np.real(np.diag(total)))
    kraus = [IncoherentKraus(op.g, op.c * norm, op.r) for ops in groups for op in ops]
    return ParametrizedIO(dim, tuple(kraus), float(rng.uniform(-np.pi, np.pi)))


def random_rank1_io(dim, seed, n_groups=2):
    """Random member of G1: per group, rows of U diag(sqrt(delta)) with fresh labels."""
    rng = _rng(seed)
    delta = rng.dirichlet(np.ones(n_groups), size=dim).T
    ops = []
    label = 0
    for gi in range(n_groups):
        u = random_unitary(dim, rng)
        rate = rng.uniform(0.0, 1.0, dim)
        for row in u * np.sqrt(delta[gi]):
            ops.append(IncoherentKraus([label] * dim, row, rate))
            label += 1
    return ParametrizedIO(dim, tuple(ops), 0.0)


# -- JSON IO files --

def io_to_json(io):
    return {
        "dim": io.dim,
        "theta0": io.theta0,
        "kraus": [
            {
                "g": list(k.g),
                "c": [[float(z.real), float(z.imag)] for z in k.c],
                "r": [float(v) for v in k.r],
            }
            for k in io.kraus
        ],
    }


def io_from_json(obj):
    try:
        dim = int(obj["dim"])
        theta0 = float(obj.get("theta0", 0.0))
        kraus = [
            IncoherentKraus(k["g"], [complex(re, im) for re, im in k["c"]], k["r"])
            for k in obj["kraus"]
        ]
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, InvalidKraus):
            raise
        raise InvalidIO(f"malformed IO document: {err}") from None
    return ParametrizedIO(dim, tuple(kraus), theta0)


def load_io(path):
    with open(path) as fh:
        return io_from_json(json.load(fh))


def save_io(io, path):
    with open(path, "w") as fh:
        json.dump(io_to_json(io), fh)
