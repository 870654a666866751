"""Heat kernels, Poisson kernels and fractional Laplacians on real hyperbolic space."""

__version__ = "0.1.0"

from .geometry import HyperbolicSpace, PolarPoint  # noqa: E402
from .heat import heat_kernel, log_heat_kernel  # noqa: E402
from .kernels import KernelSpec  # noqa: E402
from .reports import EstimateReport, InequalityReport  # noqa: E402
from .transform import RadialGridFunction, SpectralGridFunction, spherical_transform  # noqa: E402

__all__ = [
    "__version__",
    "HyperbolicSpace",
    "PolarPoint",
    "heat_kernel",
    "log_heat_kernel",
    "KernelSpec",
    "EstimateReport",
    "InequalityReport",
    "RadialGridFunction",
    "SpectralGridFunction",
    "spherical_transform",
]
