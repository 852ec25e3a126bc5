"""Occupant mobility model.

Each occupant moves on the zone index space {0..N} (index 0 is outside the
building) as an independent first-order Markov chain; the building only sees
per-zone head counts.  This module learns the chains from location traces,
derives stationary laws and per-zone count distributions, samples synthetic
traces, and provides the exact enumeration check relating joint location
leakage to the per-zone count decomposition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12
DEFAULT_SMOOTHING = 0.1
DEFAULT_ENUM_CAP = 4096


class StationaryDistributionError(RuntimeError):
    """The chain has no unique stationary law reachable by power iteration."""


class StateSpaceCapError(RuntimeError):
    """Exact enumeration requested beyond the configured state-space cap."""


class TraceError(ValueError):
    """A location trace violates the zone index space or length contract."""


@dataclass(frozen=True)
class ZoneSet:
    """Named zones; index 0 is always the outside zone."""

    zones: tuple[str, ...]

    def __post_init__(self):
        if len(self.zones) < 2:
            raise ValueError("need the outside zone plus at least one interior zone")
        if len(set(self.zones)) != len(self.zones):
            raise ValueError("zone names must be unique")

    @classmethod
    def with_interior(cls, n_interior: int) -> "ZoneSet":
        if n_interior < 1:
            raise ValueError("need at least one interior zone")
        return cls(("outside",) + tuple(f"z{i}" for i in range(1, n_interior + 1)))

    @property
    def n_states(self) -> int:
        return len(self.zones)

    @property
    def n_interior(self) -> int:
        return len(self.zones) - 1


@dataclass(frozen=True)
class LocationTrace:
    """One occupant's zone index per step."""

    occupant: str
    steps: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64)
        object.__setattr__(self, "steps", steps)
        if steps.ndim != 1:
            raise TraceError("trace must be one-dimensional")
        if steps.size and steps.min() < 0:
            raise TraceError(f"trace {self.occupant!r} has a negative zone index")

    def __len__(self) -> int:
        return int(self.steps.size)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix over the zone index space."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(probs < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if np.any(np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError("transition matrix rows must sum to 1")

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class FhmmModel:
    """Independent per-occupant chains over a shared zone set."""

    zone_set: ZoneSet
    chains: tuple[TransitionMatrix, ...]
    initial: np.ndarray  # (M, n_states), one start law per occupant
    occupants: tuple[str, ...]

    def __post_init__(self):
        initial = np.asarray(self.initial, dtype=float)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "chains", tuple(self.chains))
        object.__setattr__(self, "occupants", tuple(self.occupants))
        S = self.zone_set.n_states
        if len(self.occupants) != len(self.chains):
            raise ValueError("one chain per occupant required")
        for ch in self.chains:
            if ch.n_states != S:
                raise ValueError("chain size does not match the zone set")
        if initial.shape != (len(self.chains), S):
            raise ValueError("initial laws must be (occupants, states)")
        if np.any(initial < 0) or np.any(np.abs(initial.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("initial laws must be distributions")

    @property
    def n_occupants(self) -> int:
        return len(self.chains)

    @classmethod
    def from_chains(cls, zone_set: ZoneSet, chains, occupants=None) -> "FhmmModel":
        """Model with each occupant started from their stationary law."""
        chains = tuple(chains)
        if occupants is None:
            occupants = tuple(f"occ{i + 1}" for i in range(len(chains)))
        initial = np.stack([stationary_distribution(ch) for ch in chains])
        return cls(zone_set, chains, initial, tuple(occupants))

    def at_cadence(self, every: int) -> "FhmmModel":
        """The same process observed every `every` steps (transition matrices
        raised to that power; start laws unchanged)."""
        if every < 1:
            raise ValueError("cadence must be a positive step count")
        chains = tuple(TransitionMatrix(np.linalg.matrix_power(ch.probs, every))
                       for ch in self.chains)
        return FhmmModel(self.zone_set, chains, self.initial.copy(), self.occupants)


@dataclass(frozen=True)
class OccupancySeries:
    """Per-step interior-zone head counts, shape (steps, interior zones)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if counts.ndim != 2:
            raise ValueError("counts must be (steps, zones)")
        if counts.size and counts.min() < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def n_steps(self) -> int:
        return self.counts.shape[0]

    @property
    def n_zones(self) -> int:
        return self.counts.shape[1]


@dataclass(frozen=True)
class OccupancyMarginal:
    """Stationary per-zone count distributions, shape (zones, M + 1)."""

    pmfs: np.ndarray

    def __post_init__(self):
        pmfs = np.asarray(self.pmfs, dtype=float)
        object.__setattr__(self, "pmfs", pmfs)
        if pmfs.ndim != 2:
            raise ValueError("pmfs must be (zones, M + 1)")
        if np.any(pmfs < 0) or np.any(np.abs(pmfs.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("each zone row must be a distribution")


def learn_transitions(traces, zone_set: ZoneSet,
                      smoothing: float = DEFAULT_SMOOTHING) -> list[TransitionMatrix]:
    """Additively smoothed maximum-likelihood transition estimates, one matrix
    per trace.  Rows never visited (and smoothing 0) become uniform."""
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    S = zone_set.n_states
    out = []
    for trace in traces:
        steps = trace.steps
        if steps.size and steps.max() >= S:
            raise TraceError(
                f"trace {trace.occupant!r} references zone index {int(steps.max())} "
                f"outside the {S}-state zone set")
        counts = np.zeros((S, S))
        if steps.size >= 2:
            np.add.at(counts, (steps[:-1], steps[1:]), 1.0)
        counts += smoothing
        totals = counts.sum(axis=1)
        probs = np.empty_like(counts)
        for i in range(S):
            if totals[i] > 0:
                probs[i] = counts[i] / totals[i]
            else:
                probs[i] = 1.0 / S
        out.append(TransitionMatrix(probs))
    return out


def stationary_distribution(chain, tol: float = 1e-12,
                            max_iter: int = 200_000) -> np.ndarray:
    """Stationary law by power iteration from the uniform vector.

    Chains without a unique power-iteration limit (reducible or periodic:
    more than one eigenvalue on the unit circle) are reported, not guessed.
    """
    A = chain.probs if isinstance(chain, TransitionMatrix) else np.asarray(chain, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("transition matrix must be square")
    eigs = np.linalg.eigvals(A.T)
    if np.count_nonzero(np.abs(eigs) > 1.0 - 1e-9) > 1:
        raise StationaryDistributionError(
            "multiple unit-circle eigenvalues: stationary law is not unique "
            "or the chain is periodic")
    S = A.shape[0]
    pi = np.full(S, 1.0 / S)
    for _ in range(max_iter):
        nxt = pi @ A
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() <= tol:
            pi = nxt
            if np.abs(pi @ A - pi).sum() <= max(tol, 1e-12):
                return pi
        pi = nxt
    raise StationaryDistributionError(
        f"power iteration did not settle within {max_iter} iterations")


def occupancy_from_traces(traces, zone_set: ZoneSet) -> OccupancySeries:
    """Interior-zone head counts from simultaneous traces."""
    traces = list(traces)
    if not traces:
        raise TraceError("need at least one trace")
    K = len(traces[0])
    S = zone_set.n_states
    counts = np.zeros((K, S), dtype=np.int64)
    for trace in traces:
        if len(trace) != K:
            raise TraceError(
                f"trace {trace.occupant!r} has {len(trace)} steps, expected {K}")
        if trace.steps.size and trace.steps.max() >= S:
            raise TraceError(
                f"trace {trace.occupant!r} references a zone outside the zone set")
        counts[np.arange(K), trace.steps] += 1
    return OccupancySeries(counts[:, 1:])


def sample_traces(model: FhmmModel, n_steps: int, rng) -> list[LocationTrace]:
    """Sample one trace per occupant; bit-reproducible for a given generator."""
    rng = _as_rng(rng)
    if n_steps < 1:
        raise ValueError("need at least one step")
    S = model.zone_set.n_states
    out = []
    for m, chain in enumerate(model.chains):
        cum_init = np.cumsum(model.initial[m])
        cum_rows = np.cumsum(chain.probs, axis=1)
        draws = rng.random(n_steps)
        steps = np.empty(n_steps, dtype=np.int64)
        state = int(np.searchsorted(cum_init, draws[0], side="right"))
        state = min(state, S - 1)
        steps[0] = state
        for k in range(1, n_steps):
            state = int(np.searchsorted(cum_rows[state], draws[k], side="right"))
            state = min(state, S - 1)
            steps[k] = state
        out.append(LocationTrace(model.occupants[m], steps))
    return out


def occupancy_marginal(model: FhmmModel) -> OccupancyMarginal:
    """Stationary count distribution per interior zone.

    Presence of each occupant in a zone is an independent Bernoulli at
    stationarity, so the count follows a Poisson-binomial law, built by
    direct convolution.
    """
    N = model.zone_set.n_interior
    M = model.n_occupants
    pis = [stationary_distribution(ch) for ch in model.chains]
    pmfs = np.zeros((N, M + 1))
    for n in range(1, N + 1):
        pmfs[n - 1] = poisson_binomial_pmf([pi[n] for pi in pis])
    return OccupancyMarginal(pmfs)


def poisson_binomial_pmf(probs) -> np.ndarray:
    """Distribution of a sum of independent Bernoulli variables."""
    pmf = np.array([1.0])
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError("Bernoulli probabilities must lie in [0, 1]")
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def exact_joint_mi_check(model: FhmmModel, distortions,
                         cap: int = DEFAULT_ENUM_CAP) -> tuple[float, float]:
    """Exact one-step leakage pair: (joint, per-zone sum), both in bits.

    The first value is I(locations; reports) by full enumeration of the joint
    location state at stationarity; the second is the per-zone decomposition
    sum_n I(count_n; report_n).  The joint value never exceeds the sum; they
    agree when zone counts are independent across zones.
    """
    M = model.n_occupants
    S = model.zone_set.n_states
    N = model.zone_set.n_interior
    n_joint = S ** M
    if n_joint > cap:
        raise StateSpaceCapError(
            f"joint state space {n_joint} exceeds the enumeration cap {cap}")
    mats = _distortion_rows(distortions, N, M)

    pis = [stationary_distribution(ch) for ch in model.chains]
    states = list(itertools.product(range(S), repeat=M))
    p_x = np.array([math.prod(pi[s] for pi, s in zip(pis, st)) for st in states])
    counts = np.zeros((n_joint, N), dtype=np.int64)
    for idx, st in enumerate(states):
        for s in st:
            if s >= 1:
                counts[idx, s - 1] += 1

    # joint leakage over the full report tuple
    reports = list(itertools.product(range(M + 1), repeat=N))
    p_xv = np.zeros((n_joint, len(reports)))
    for vi, v in enumerate(reports):
        lik = np.ones(n_joint)
        for n in range(N):
            lik *= mats[n][counts[:, n], v[n]]
        p_xv[:, vi] = p_x * lik
    p_v = p_xv.sum(axis=0)
    joint = 0.0
    for xi in range(n_joint):
        for vi in range(len(reports)):
            p = p_xv[xi, vi]
            if p > 0.0:
                joint += p * math.log2(p / (p_x[xi] * p_v[vi]))

    # per-zone decomposition from the same enumeration
    total = 0.0
    for n in range(N):
        p_y = np.zeros(M + 1)
        np.add.at(p_y, counts[:, n], p_x)
        total += _mi_bits(p_y, mats[n])
    return max(joint, 0.0), max(total, 0.0)


def random_office_model(n_occupants: int, n_interior: int, rng,
                        occupants=None) -> FhmmModel:
    """Synthetic office-style world: each occupant favours staying put, a home
    zone, and the outside, with positive mass everywhere (fast mixing)."""
    rng = _as_rng(rng)
    S = n_interior + 1
    zone_set = ZoneSet.with_interior(n_interior)
    chains = []
    for m in range(n_occupants):
        home = 1 + (m % n_interior)
        weights = np.full((S, S), 0.25)
        weights[:, 0] = 1.0
        weights[:, home] = 1.5
        weights[np.arange(S), np.arange(S)] += 3.0
        weights *= rng.uniform(0.7, 1.3, size=(S, S))
        chains.append(TransitionMatrix(weights / weights.sum(axis=1, keepdims=True)))
    return FhmmModel.from_chains(zone_set, chains, occupants)


def _mi_bits(p_y: np.ndarray, rows: np.ndarray) -> float:
    p_v = p_y @ rows
    total = 0.0
    for y in range(p_y.size):
        if p_y[y] <= 0.0:
            continue
        for v in range(p_v.size):
            p = rows[y, v]
            if p > 0.0:
                total += p_y[y] * p * math.log2(p / p_v[v])
    return total


def _distortion_rows(distortions, n_zones: int, n_occupants: int) -> list[np.ndarray]:
    """Normalise per-zone channel input: a single matrix applies to every
    zone; a sequence gives one matrix per zone."""
    from .distortion import DistortionMatrix  # local import avoids a cycle

    if isinstance(distortions, DistortionMatrix):
        mats = [distortions.rows] * n_zones
    elif isinstance(distortions, np.ndarray):
        mats = [np.asarray(distortions, dtype=float)] * n_zones
    else:
        items = list(distortions)
        if len(items) != n_zones:
            raise ValueError(f"need one channel per zone ({n_zones}), got {len(items)}")
        mats = [it.rows if isinstance(it, DistortionMatrix) else np.asarray(it, dtype=float)
                for it in items]
    for rows in mats:
        if rows.shape != (n_occupants + 1, n_occupants + 1):
            raise ValueError("channel must be (M + 1) x (M + 1) for M occupants")
    return mats


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
