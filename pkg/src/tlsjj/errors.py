"""Exception hierarchy shared by all modules."""


class TlsjjError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(TlsjjError, ValueError):
    """Operator or state dimensions do not fit together."""


class StateError(TlsjjError, ValueError):
    """A density matrix or pure state violates its structural invariants."""


class NumericalError(TlsjjError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class IntegratorError(NumericalError):
    """Time propagation failed (trace drift, step-size underflow)."""


class SteadyStateError(NumericalError):
    """The Liouvillian kernel is empty or not one-dimensional."""


class DegenerateCircuitError(TlsjjError, ValueError):
    """No stable flux minimum exists for the circuit parameters."""


class ResonantInputError(TlsjjError, ValueError):
    """A detuning that appears in a denominator is zero."""


class InvalidRegimeError(TlsjjError, ValueError):
    """The parameters lie outside the domain of a derived model."""


class ModelError(TlsjjError, ValueError):
    """A system model is malformed or exceeds the Hilbert-space budget."""


class GateError(TlsjjError, ValueError):
    """A gate cannot be synthesized from the given parameters."""


class ConfigError(TlsjjError, ValueError):
    """A run configuration is malformed."""
