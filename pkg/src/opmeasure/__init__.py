"""Finite-dimensional measurement theory: instruments, indirect models and disturbance."""
from .classify import (
    ClassificationReport,
    disturbed_set,
    is_minimum_disturbing,
    satisfies_projection_postulate,
    satisfies_repeatability,
)
from .errors import (
    DimensionError,
    HermiticityError,
    InstrumentError,
    MixedProbeError,
    ModelError,
    NotCompatibleError,
    NotLocalError,
    ObservableError,
    OpMeasureError,
    OutcomeError,
    RefinementError,
    StateError,
)
from .instruments import (
    Instrument,
    Superoperator,
    apply,
    audit_davies_lewis,
    check_factoring,
    identity_instrument,
    luders_instrument,
    measures,
    nonselective_operation,
    von_neumann_instrument,
)
from .linalg import CLUSTER_TOL, TOL, hermitian_eigensystem, partial_trace, tensor_product
from .models import (
    IndirectModel,
    instrument_from_model,
    local_extension,
    measuring_model,
    model_dual,
    number_observable,
    photon_counter_model,
    repeatable_model,
)
from .observables import (
    DensityOperator,
    DiscreteObservable,
    StateVector,
    born_probability,
    commutes,
    lift,
    observable_from_basis,
    observable_from_hermitian,
)
from .successive import (
    JointDistribution,
    commutator_criterion,
    disturbs,
    epr_joint,
    epr_reduction,
    is_local,
    is_simultaneous,
    successive_joint,
)

__version__ = "0.1.0"
