"""Shared fixtures: small latent spaces and the point-identified instance."""

import numpy as np
import pytest

from latent_bounds import (
    AlternativeSet,
    EmpiricalDistribution,
    LatentIndex,
    OutcomeGrid,
    RestrictionSet,
    hsis_access,
    prune,
)


@pytest.fixture(scope="session")
def two_alt():
    """D = {n, h}, binary outcomes, treatment guarantees h access."""
    alts = AlternativeSet(("n", "h"))
    grid = OutcomeGrid((0.0, 1.0))
    idx = LatentIndex(alts, grid)
    restrictions = RestrictionSet((hsis_access(alts, "h"),))
    return idx, restrictions, prune(restrictions, idx)


@pytest.fixture(scope="session")
def three_alt():
    """D = {n, a, h} with a 2-point outcome grid; access restriction only."""
    alts = AlternativeSet(("n", "a", "h"))
    grid = OutcomeGrid((0.0, 1.0))
    idx = LatentIndex(alts, grid)
    restrictions = RestrictionSet((hsis_access(alts, "h"),))
    return idx, restrictions, prune(restrictions, idx)


def point_id_cells(alts, grid):
    """Cells that pin the induced-participation share to exactly 0.6.

    Treated arm: choice h with outcome split 0.4 / 0.2, choice n with
    0.3 / 0.1.  Control arm: everyone chooses n, outcomes split 0.55 / 0.45.
    """
    cells = np.zeros((2, 2, 2))
    cells[1, alts.index("h"), 1] = 0.4
    cells[1, alts.index("h"), 0] = 0.2
    cells[1, alts.index("n"), 1] = 0.3
    cells[1, alts.index("n"), 0] = 0.1
    cells[0, alts.index("n"), 1] = 0.55
    cells[0, alts.index("n"), 0] = 0.45
    return EmpiricalDistribution(alts=alts, grid=grid, cells=cells)


@pytest.fixture(scope="session")
def point_id(two_alt):
    idx, restrictions, support = two_alt
    return idx, support, point_id_cells(idx.alts, idx.grid)
