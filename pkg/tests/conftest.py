"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from privhvac.occupancy import FhmmModel, TransitionMatrix, ZoneSet


def two_state_chain(stay_out: float = 0.9, stay_in: float = 0.8) -> TransitionMatrix:
    return TransitionMatrix(np.array([[stay_out, 1.0 - stay_out],
                                      [1.0 - stay_in, stay_in]]))


def small_model(n_occupants: int = 2, n_interior: int = 1) -> FhmmModel:
    """Fixed tiny world: every occupant shares the same two-state chain."""
    zone_set = ZoneSet.with_interior(n_interior)
    rng = np.random.default_rng(42)
    chains = []
    for _ in range(n_occupants):
        probs = rng.dirichlet(np.ones(zone_set.n_states) * 2.0,
                              size=zone_set.n_states)
        chains.append(TransitionMatrix(probs))
    return FhmmModel.from_chains(zone_set, chains)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
