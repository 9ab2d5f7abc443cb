"""Coherence quantified by the Fisher information of incoherent phase-encoding operations."""

__version__ = "0.1.0"

from .errors import FishcohError
from .fisher import (
    DiagonalGenerator,
    FisherDatum,
    StateDerivativePair,
    classical_fi,
    max_unitary_qfi_pure,
    qfi_sld,
    qubit_coherence_analytic,
    state_derivative,
    unitary_family,
)
from .iochannel import (
    IncoherentKraus,
    ParametrizedIO,
    apply_io,
    postmeasurement_ensemble,
    postselect_distribution,
    refine_to_rank1,
    validate_io,
    witness_io,
)
from .optimize import (
    CoherenceReport,
    OptimizerBudget,
    StructuredFamilyPoint,
    family_to_io,
    fi_objective,
    maximize_coherence,
    qfi_of_best,
)
from .qcore import DensityMatrix, eig_hermitian, is_incoherent, random_mixed_state, random_pure_state
