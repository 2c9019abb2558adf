"""Desk-scale laboratory for one-loop Yang-Mills renormalization.

Lattice backgrounds, heat-kernel traces of the fluctuation operators,
small proper-time fits, one-loop RG flow and vacuum-graph enumeration.
"""

from ymlab.errors import (
    ConvergenceError,
    DegenerateAlgebraError,
    DiscretizationError,
    FitDegeneracyError,
    IntegrationError,
    InvalidGaugeError,
    InvalidGraphError,
    LandauPoleError,
    MismatchError,
    ShapeError,
    SizeError,
    UnsupportedAlgebraError,
    YMLabError,
)

__version__ = "0.1.0"
