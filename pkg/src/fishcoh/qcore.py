"""Dense complex linear algebra and the density-matrix data model.

Matrices are plain complex ``numpy`` arrays. ``DensityMatrix`` wraps one with
its invariants checked at construction and the buffer frozen afterwards.

Basis vectors are 0-based in code and in every file format; documentation
writes them as |1>, |2>, ... when quoting physics.

Randomness comes from ``numpy.random.default_rng`` (PCG64 bit generator with
SeedSequence seeding), which produces identical streams on every platform for
a given integer seed.
"""

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidState, NonSquare, NotHermitian

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
EIG_TOL = 1e-10
CLASSIFY_TOL = 1e-9


def _as_square(a):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {a.shape}")
    return a


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite d x d matrix."""

    mat: np.ndarray

    def __post_init__(self):
        try:
            m = _as_square(self.mat)
        except NonSquare as err:
            raise InvalidState("shape", str(err)) from None
        herm = np.abs(m - m.conj().T).max()
        if herm > HERMITIAN_TOL:
            raise InvalidState("hermitian", f"max |rho - rho^dag| = {herm:.3e}")
        tr = np.trace(m)
        if abs(tr - 1) > TRACE_TOL:
            raise InvalidState("unit_trace", f"trace = {tr:.15g}")
        lo = np.linalg.eigvalsh(m).min()
        if lo < PSD_TOL:
            raise InvalidState("positive_semidefinite", f"min eigenvalue = {lo:.3e}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mat", m)

    @property
    def dim(self):
        return self.mat.shape[0]

    @classmethod
    def from_ket(cls, psi):
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls.from_array(np.outer(psi, psi.conj()))

    @classmethod
    def from_array(cls, a, trace_tol=1e-9):
        """Build from a numerically noisy matrix.

        Symmetrizes and rescales the trace when it is already within
        ``trace_tol`` of one; anything further off is rejected.
        """
        a = _as_square(a)
        a = 0.5 * (a + a.conj().T)
        tr = np.trace(a).real
        if abs(tr - 1) > trace_tol:
            raise InvalidState("unit_trace", f"trace = {tr:.15g}")
        return cls(a / tr)

    def purity(self):
        return float(np.real(np.trace(self.mat @ self.mat)))

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.mat.shape == other.mat.shape and bool(np.array_equal(self.mat, other.mat))

    __hash__ = None

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


class EigenSystem(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def eig_hermitian(a):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Each eigenvector's phase is fixed so that its largest-modulus entry is
    real and positive, which makes degenerate cases like the identity return
    the standard basis.
    """
    a = _as_square(a)
    herm = np.abs(a - a.conj().T).max() if a.size else 0.0
    if herm > HERMITIAN_TOL * max(1.0, np.abs(a).max()):
        raise NotHermitian(f"max |A - A^dag| = {herm:.3e}")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    lead = np.argmax(np.abs(vecs) > np.abs(vecs).max(axis=0) - 1e-12, axis=0)
    ph = vecs[lead, np.arange(vecs.shape[1])]
    vecs = vecs * (np.abs(ph) / ph)
    return EigenSystem(vals, vecs)


def is_incoherent(rho, tol=CLASSIFY_TOL):
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
    off = m - np.diag(np.diag(m))
    return bool(np.abs(off).max(initial=0.0) <= tol)


def dephase(rho):
    """Zero the off-diagonal entries."""
    return DensityMatrix(np.diag(np.diag(rho.mat)))


def l1_coherence(rho):
    m = rho.mat
    return float(np.abs(m).sum() - np.abs(np.diag(m)).sum())


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_ket(dim, seed):
    rng = _rng(seed)
    psi = _complex_normal(rng, dim)
    return psi / np.linalg.norm(psi)


def random_pure_state(dim, seed):
    """Haar-random pure state |psi><psi| (normalized complex Gaussian vector)."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    return DensityMatrix.from_ket(random_ket(dim, seed))


def random_mixed_state(dim, seed):
    """rho = G G^dag / tr(G G^dag), G with i.i.d. complex Gaussian entries."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    rng = _rng(seed)
    g = _complex_normal(rng, (dim, dim))
    m = g @ g.conj().T
    return DensityMatrix.from_array(m / np.trace(m).real)


def random_incoherent_state(dim, seed):
    rng = _rng(seed)
    return DensityMatrix(np.diag(rng.dirichlet(np.ones(dim))).astype(complex))


def random_unitary(dim, seed, rows=None):
    """Haar-random d x d unitary, or a rows x d matrix with orthonormal columns."""
    rng = _rng(seed)
    rows = dim if rows is None else rows
    z = _complex_normal(rng, (rows, dim)) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim, seed):
    rng = _rng(seed)
    g = _complex_normal(rng, (dim, dim))
    return 0.5 * (g + g.conj().T)


def bloch_vector(rho):
    if rho.dim != 2:
        raise ValueError("Bloch vector is defined for qubits only")
    m = rho.mat
    return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])


# -- JSON state files: {"dim": d, "matrix": [[[re, im], ...], ...]} --

def state_to_json(rho):
    return {
        "dim": rho.dim,
        "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in rho.mat],
    }


def state_from_json(obj):
    try:
        dim = int(obj["dim"])
        rows = obj["matrix"]
        m = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)
    except (KeyError, TypeError, ValueError) as err:
        raise InvalidState("format", f"malformed state document: {err}") from None
    if m.shape != (dim, dim):
        raise InvalidState("shape", f"declared dim {dim} but matrix has shape {m.shape}")
    return DensityMatrix(m)


def load_state(path):
    with open(path) as fh:
        return state_from_json(json.load(fh))


def save_state(rho, path):
    with open(path, "w") as fh:
        json.dump(state_to_json(rho), fh)
