"""Gender homophily permutation tests for co-authorship corpora.

Genders are passed as the single letters F, M and U. JSON-shaped results
come back as plain dicts.
"""

from ._core import *  # noqa: F401,F403
from ._core import HomophilyError, __doc__  # noqa: F401

__version__ = "0.1.0"


def run_test(corpus, chains=3, iterations=45000, burn_in=20000, seed=1, threshold=0.05, **options):
    """Swap matrix, `chains` seeded chains and FDR-adjusted test in one call."""
    from . import _core

    matrix = _core.build_swap_matrix(corpus, threshold)
    base = _core.ChainPlan(iterations=iterations, burn_in=burn_in, seed=seed)
    return _core.run_full_test(corpus, matrix, _core.chain_plans(base, chains), **options)
