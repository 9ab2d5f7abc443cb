import numpy as np
import pytest

from fishcoh.qcore import DensityMatrix


@pytest.fixture
def plus():
    return DensityMatrix.from_ket([1, 1])


@pytest.fixture
def minus():
    return DensityMatrix.from_ket([1, -1])


@pytest.fixture
def phi3():
    return DensityMatrix.from_ket(np.ones(3))


def dephasing_kraus(dim):
    from fishcoh.iochannel import IncoherentKraus

    ops = []
    for n in range(dim):
        c = np.zeros(dim, dtype=complex)
        c[n] = 1.0
        ops.append(IncoherentKraus(list(range(dim)), c, np.zeros(dim)))
    return ops


def identity_kraus(dim, rate=None):
    from fishcoh.iochannel import IncoherentKraus

    return IncoherentKraus(list(range(dim)), np.ones(dim), np.zeros(dim) if rate is None else rate)
