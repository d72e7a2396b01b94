"""Exception hierarchy shared by every module of the package."""


class OpMeasureError(Exception):
    """Base class for all errors raised by :mod:`opmeasure`."""


class DimensionError(OpMeasureError, ValueError):
    """Operand shapes or subsystem splits are inconsistent."""


class HermiticityError(OpMeasureError, ValueError):
    """A matrix required to be Hermitian is not."""


class StateError(OpMeasureError, ValueError):
    """A matrix or vector is not a valid quantum state."""


class ObservableError(OpMeasureError, ValueError):
    """Spectral data do not form a projection-valued resolution of identity."""


class OutcomeError(OpMeasureError, IndexError):
    """An outcome index is out of range."""


class ModelError(OpMeasureError, ValueError):
    """An indirect measurement model violates its invariants."""


class InstrumentError(OpMeasureError, ValueError):
    """A branch family is not a valid instrument."""


class RefinementError(OpMeasureError, ValueError):
    """A refinement basis is incompatible with the observable it refines."""


class NotCompatibleError(OpMeasureError, ValueError):
    """The instrument does not measure the stated observable."""


class MixedProbeError(OpMeasureError, ValueError):
    """The probe state is required to be pure but is mixed."""


class NotLocalError(OpMeasureError, ValueError):
    """The measuring interaction acts on the subsystem it must leave alone."""
