"""Two-level systems coupled to a driven, damped Josephson junction resonator.

Full Lindblad dynamics of the resonator plus TLS's, the effective TLS-only
models of the dispersive and bad-cavity regimes, gate synthesis on those
models and resonator-based readout.  Frequencies are angular, in rad/us,
and times are in us.
"""

__version__ = "0.1.0"
