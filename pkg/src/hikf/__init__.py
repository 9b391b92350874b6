"""Linear-scaling Kalman filtering with hierarchical-matrix covariance products.

The package provides three assimilation engines sharing one predict/update
interface (a dense Kalman filter, a cross-covariance filter whose kernel
products run through a Chebyshev-interpolation fast multipole method, and a
perturbed-observation ensemble Kalman filter), together with a synthetic
crosswell traveltime benchmark and an experiment driver.
"""

from hikf.kernels import KernelSpec, dense_gram
from hikf.grids import Grid2D, PointSet
from hikf.fmm import FmmConfig, FmmTree, build_tree
from hikf.linalg import DecompositionError, spd_solve, sym_eig

__all__ = [
    "KernelSpec",
    "dense_gram",
    "Grid2D",
    "PointSet",
    "FmmConfig",
    "FmmTree",
    "build_tree",
    "DecompositionError",
    "spd_solve",
    "sym_eig",
]

__version__ = "0.1.0"
