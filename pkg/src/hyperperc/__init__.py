"""Hyperlattice percolation models with non-crossing partition states.

Subpackages:

* `ncpart`   — non-crossing partition algebra and probability vectors
* `harris`   — poset product measures and correlation-inequality checks
* `hypermap` — periodic 3-coloured cubic maps, duality, self-duality search
* `percsim`  — finite-window Monte Carlo (crossings, clusters, scans)
* `szgen`    — generators, exact connection polynomials, critical points
* `cli`      — the `hyperperc` command-line tool
"""

from . import _kernels, harris, hypermap, ncpart, percsim, szgen  # noqa: F401
from .errors import (CapacityError, EmbeddingError, InvalidInputError,  # noqa: F401
                     UnsupportedModeError)

__version__ = "0.1.0"
