__version__ = "0.1.0"

from urncut.core.kernel import BandedKernel, ChainParams, KernelBuildError, StateDistribution, build_kernel, stationary
from urncut.core.mixing import NonConvergenceError, mixing_time

__all__ = [
    "__version__",
    "BandedKernel",
    "ChainParams",
    "KernelBuildError",
    "NonConvergenceError",
    "StateDistribution",
    "build_kernel",
    "mixing_time",
    "stationary",
]
