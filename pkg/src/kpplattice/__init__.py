"""KPP-type lattice equations in random time-dependent media.

Modules: ``media`` (coefficient paths), ``dispersion`` (speed calculus),
``envelopes`` (sub/super-solutions), ``lattice`` (truncated integration),
``fronts`` (observables), and the harness in ``config``, ``validation``,
``experiments`` and ``cli``.
"""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, HorizonError, InfeasibleError,  # noqa: F401
                     IntegrationError, KPPError, NumericalError, PropertyFailure)
