"""Conjugate points on Lorentzian tori with a Killing field.

The metric is 2 dx dy + f(x) dy^2 on the torus, with f periodic.  The
package finds the band structure of f, integrates geodesics tangent to the
Killing field and certifies (or refutes) the absence of conjugate points.
"""

__version__ = "0.1.0"

from .errors import LortorusError  # noqa: E402
from .profile import FProfile, build_profile  # noqa: E402

__all__ = ["FProfile", "LortorusError", "__version__", "build_profile"]
