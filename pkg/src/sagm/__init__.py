"""Numerics lab for symmetrized operator-mean inequalities: with/without
replacement means, partition-indexed norm bounds, a free-probability
counterexample surrogate, and the incremental gradient method bound."""

__version__ = "0.1.0"

from . import freeprobe, igm, linalg, partitions, symsum

__all__ = ["freeprobe", "igm", "linalg", "partitions", "symsum", "__version__"]
