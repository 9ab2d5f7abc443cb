"""Classical and quantum Fisher information.

``classical_fi`` scores an outcome distribution, ``qfi_sld`` scores a state
family through its symmetric logarithmic derivative, and the unitary helpers
cover phase families generated by diagonal Hamiltonians.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    NotPure,
    SingularFamily,
    SingularOutcome,
    WrongDimension,
)
from .iochannel import FisherDatum, _check_dims, apply_io, validate_io
from .qcore import DensityMatrix, eig_hermitian

ZERO_PROB = 1e-14
ZERO_DERIV = 1e-10
SLD_CUTOFF = 1e-12
KERNEL_LEAK_TOL = 1e-9

__all__ = [
    "FisherDatum",
    "StateDerivativePair",
    "DiagonalGenerator",
    "classical_fi",
    "state_derivative",
    "qfi_sld",
    "unitary_family",
    "qubit_coherence_analytic",
    "max_unitary_qfi_pure",
    "measurement_datum",
]


def fi_terms(p, d):
    """Per-outcome contributions d^2/p with the zero-probability convention.

    Works on arrays of any shape along the last axis. Returns ``(terms, bad)``
    where ``bad`` flags outcomes with p <= 1e-14 but |d| > 1e-10.
    """
    small = p <= ZERO_PROB
    bad = small & (np.abs(d) > ZERO_DERIV)
    safe = np.where(small, 1.0, p)
    return np.where(small, 0.0, d * d / safe), bad


def classical_fi(fd):
    """sum_x d_x^2 / p_x.

    Raises ``SingularOutcome`` for an outcome with p_x <= 1e-14 whose
    derivative exceeds 1e-10: the information diverges there and is not
    clipped.
    """
    terms, bad = fi_terms(fd.p, fd.d)
    if bad.any():
        x = int(np.flatnonzero(bad)[0])
        raise SingularOutcome(f"outcome {x}: p = {fd.p[x]:.3e}, dp = {fd.d[x]:.3e}")
    return float(max(terms.sum(), 0.0))


@dataclass(frozen=True, eq=False)
class StateDerivativePair:
    rho: DensityMatrix
    drho: np.ndarray

    def __post_init__(self):
        dr = np.asarray(self.drho, dtype=complex)
        if dr.shape != self.rho.mat.shape:
            raise DimensionMismatch(f"drho shape {dr.shape} vs rho {self.rho.mat.shape}")
        if np.abs(dr - dr.conj().T).max() > 1e-12:
            raise ValueError("drho is not Hermitian")
        if abs(np.trace(dr)) > 1e-12:
            raise ValueError(f"drho has trace {np.trace(dr):.3e}")
        dr = dr.copy()
        dr.flags.writeable = False
        object.__setattr__(self, "drho", dr)


@dataclass(frozen=True)
class DiagonalGenerator:
    """Eigenvalues of a Hamiltonian diagonal in the preferred basis, each in [0, 1]."""

    h: tuple

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if any(v < 0 or v > 1 for v in h):
            raise ValueError(f"generator eigenvalues must lie in [0, 1]: {h}")
        object.__setattr__(self, "h", h)

    def matrix(self):
        return np.diag(np.array(self.h, dtype=complex))


def state_derivative(io, rho):
    """The output state at theta0 and its exact theta-derivative."""
    _check_dims(io, rho)
    validate_io(io)
    out = io.out_dim
    drho = np.zeros((out, out), dtype=complex)
    for k in io.kraus:
        e = k.matrix(io.theta0, io.theta0, out)
        de = k.derivative_matrix(out)
        t = de @ rho.mat @ e.conj().T
        drho += t + t.conj().T
    return StateDerivativePair(apply_io(io, rho), drho)


def qfi_sld(sd):
    r"""Quantum Fisher information via the SLD closed form.

    .. math:: F_Q = 2 \sum_{\lambda_i + \lambda_j > 10^{-12}}
              |\langle i|\partial\rho|j\rangle|^2 / (\lambda_i + \lambda_j)

    Pairs of kernel eigenvectors are skipped; if the derivative has weight
    there beyond 1e-9 the family is ``SingularFamily``.
    """
    lam, vec = eig_hermitian(sd.rho.mat)
    lam = np.clip(lam, 0.0, None)
    dr = vec.conj().T @ sd.drho @ vec
    denom = lam[:, None] + lam[None, :]
    support = denom > SLD_CUTOFF
    leak = np.abs(dr[~support]).max(initial=0.0)
    if leak > KERNEL_LEAK_TOL:
        raise SingularFamily(float(leak))
    val = 2 * np.sum(np.abs(dr[support]) ** 2 / denom[support])
    return float(val)


def unitary_family(rho, gen, theta0=0.0):
    """rho_theta = e^{i theta H} rho e^{-i theta H} at theta0, with derivative i[H, rho_theta0]."""
    h = np.array(gen.h)
    if h.size != rho.dim:
        raise DimensionMismatch(f"generator has {h.size} entries for a dim-{rho.dim} state")
    ph = np.exp(1j * theta0 * h)
    r0 = ph[:, None] * rho.mat * ph.conj()[None, :]
    r0 = DensityMatrix.from_array(r0)
    # i[H, rho] for diagonal H: i (h_n - h_m) rho_nm
    dr = 1j * (h[:, None] - h[None, :]) * r0.mat
    return StateDerivativePair(r0, dr)


def qubit_coherence_analytic(rho, theta0=0.0):
    """QFI of a qubit under U_theta = e^{i theta}|1><1| + |2><2|.

    This equals 4 |rho_12|^2 for every qubit state, pure or mixed, and does
    not depend on theta0.
    """
    if rho.dim != 2:
        raise WrongDimension(f"qubit formula needs dim 2, got {rho.dim}")
    return qfi_sld(unitary_family(rho, DiagonalGenerator((1.0, 0.0)), theta0))


def max_unitary_qfi_pure(phi):
    """Largest 4 Var(H) over diagonal H with eigenvalues in [0, 1], for a pure state.

    The variance is convex in the eigenvalue vector, so the box maximum sits
    on a vertex; all 2^d binary vectors are enumerated and the first maximizer
    in lexicographic order is returned.
    """
    if abs(phi.purity() - 1) > 1e-10:
        raise NotPure(f"purity {phi.purity():.12f}")
    d = phi.dim
    if d > 20:
        raise DimensionTooLarge(f"vertex enumeration over 2^{d} points")
    q = np.real(np.diag(phi.mat))
    best, arg = -1.0, None
    for h in itertools.product((0.0, 1.0), repeat=d):
        s = float(np.dot(q, h))
        val = 4 * (s - s * s)
        if val > best + 1e-15:
            best, arg = val, h
    return max(best, 0.0), DiagonalGenerator(arg)


def measurement_datum(sd, povm):
    """Outcome distribution of a theta-independent POVM on the family ``sd``."""
    p = np.array([np.trace(m @ sd.rho.mat).real for m in povm])
    d = np.array([np.trace(m @ sd.drho).real for m in povm])
    return FisherDatum(p, d)


def projective_datum(sd, basis):
    """``measurement_datum`` for the projectors onto the columns of ``basis``."""
    basis = np.asarray(basis)
    p = np.einsum("nk,nm,mk->k", basis.conj(), sd.rho.mat, basis).real
    d = np.einsum("nk,nm,mk->k", basis.conj(), sd.drho, basis).real
    return FisherDatum(p, d)


def qfi_general(io, rho):
    """Convenience: SLD-QFI of the output family of ``io`` on ``rho``."""
    return qfi_sld(state_derivative(io, rho))
