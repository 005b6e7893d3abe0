"""ellis: computational topological dynamics.

Envelopes of cascades and semicascades, their idempotent/ideal algebra,
induced hyperspace systems, a symbolic-dynamics engine, and horizon-bounded
dynamical property checkers, with a config-driven CLI.
"""

__version__ = "0.1.0"

from . import algebra, envelope, hyperspace, properties, spaces, symbolic  # noqa: F401
