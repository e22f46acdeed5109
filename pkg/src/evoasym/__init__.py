"""Evolution systems on R^d: almost-orbits, asymptotic almost-equivalence and mean convergence."""
from . import asymptotics, core, means, operators, systems
from .asymptotics import *  # noqa: F401,F403
from .core import *  # noqa: F401,F403
from .errors import (
    DimensionMismatchError,
    EvoAsymError,
    InsufficientDataError,
    InvalidInputError,
    MultivaluedError,
    NoConvergenceError,
    ScenarioError,
)
from .means import *  # noqa: F401,F403
from .operators import *  # noqa: F401,F403
from .systems import *  # noqa: F401,F403

__version__ = "0.1.0"

__all__ = (
    core.__all__ + operators.__all__ + systems.__all__ + asymptotics.__all__ + means.__all__
    + [
        "DimensionMismatchError", "EvoAsymError", "InsufficientDataError", "InvalidInputError",
        "MultivaluedError", "NoConvergenceError", "ScenarioError", "__version__",
    ]
)
