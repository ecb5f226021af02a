"""Exact-simulation toolkit for constrained quantum optimization.

Parameterized quantum evolutions are confined to a feasible subspace by
repeated non-selective projective measurements: the package provides the
dense simulation primitives, the measurement-count scheduling rules with
their closed-form guarantees, constrained and penalty-baseline circuit
assemblies for discrete portfolio optimization, a classical optimization
outer loop, and gate-level Fourier-arithmetic constraint oracles that are
cross-validated against the matrix-level measurements they implement.
"""

__version__ = "0.1.0"

from . import ansatz, experiments, operators, optimize, oraclesim, problems, qcore, zeno

__all__ = [
    "__version__",
    "ansatz",
    "experiments",
    "operators",
    "optimize",
    "oraclesim",
    "problems",
    "qcore",
    "zeno",
]
