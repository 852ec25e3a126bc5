"""Insider adversary: MAP recovery of occupant location traces.

The attacker knows each occupant's transition matrix and the published
report channel, observes the per-zone reported counts at the controller's
update cadence, and reconstructs the jointly most probable assignment of
all occupants to zones over time.

Joint states are encoded as integers in base (N+1) with occupant 0 in the
most significant digit, so integer order equals lexicographic order of the
occupant-location tuple.  Score ties are broken toward the path whose
time-reversed state sequence is lexicographically smallest; the beam search
realises this rule through first-maximum backpointers, and the brute-force
oracle applies it directly, so the two agree exactly whenever the beam is
wide enough to be exhaustive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .occupancy import FhmmModel, LocationTrace


class ImpossibleObservationError(RuntimeError):
    """No joint occupant assignment can produce a reported observation."""

    def __init__(self, step: int):
        super().__init__(f"reported occupancy impossible under the model at step {step}")
        self.step = step


class StateSpaceError(ValueError):
    """Exhaustive enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class AttackConfig:
    beam_width: int = 1000
    bruteforce_cap: int = 1_000_000
    tie_rule: str = "lexicographic"

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam width must be at least 1")
        if self.bruteforce_cap < 1:
            raise ValueError("enumeration cap must be at least 1")
        if self.tie_rule != "lexicographic":
            raise ValueError("only the lexicographic tie rule is supported")


@dataclass(frozen=True)
class InferenceResult:
    traces: tuple[LocationTrace, ...]
    log_posterior: float


def trace_log_posterior(traces, model: FhmmModel, distortion, reported) -> float:
    """Joint log probability (up to the evidence constant) of location traces
    given the reported counts: occupant priors and transitions, then one
    emission term per step and zone.  Fixed accumulation order so identical
    traces always score bit-identically."""
    reported = _as_reported(reported, model.zone_set.n_interior)
    rows = _channel_rows(distortion, reported.shape[1], model.n_occupants)
    K = reported.shape[0]
    paths = [np.asarray(t.steps if isinstance(t, LocationTrace) else t, dtype=np.int64)
             for t in traces]
    if len(paths) != model.n_occupants or any(p.shape != (K,) for p in paths):
        raise ValueError("need one length-K trace per occupant")
    total = 0.0
    with np.errstate(divide="ignore"):
        for m, path in enumerate(paths):
            total += float(np.log(model.initial[m, path[0]]))
            A = model.chains[m].probs
            for k in range(K - 1):
                total += float(np.log(A[path[k], path[k + 1]]))
        for k in range(K):
            for n in range(reported.shape[1]):
                y = int(sum(1 for p in paths if p[k] == n + 1))
                total += float(np.log(rows[n][y, reported[k, n]]))
    return total


def map_infer_beam(reported, model: FhmmModel, distortion,
                   config: AttackConfig | None = None) -> InferenceResult:
    """MAP joint trace by beam-limited Viterbi over joint occupant states.

    Exhaustive (exact Viterbi) whenever beam_width >= (N+1)^M; narrower
    beams keep the top-scoring beam_width joint states per step.
    """
    config = config or AttackConfig()
    reported = _as_reported(reported, model.zone_set.n_interior)
    K, N = reported.shape
    M = model.n_occupants
    base = N + 1
    S = base ** M
    rows = _channel_rows(distortion, N, M)
    _validate_reports(reported, rows)
    if S <= config.beam_width and S <= 4096:
        codes = _viterbi_full(reported, model, rows)
    else:
        codes = _viterbi_staged(reported, model, rows, config.beam_width)
        if config.beam_width > 1:
            # Truncated beams can evict the pure greedy chain and end up
            # below it; keeping the better of the two restores the anytime
            # guarantee that any beam scores at least the width-1 search.
            try:
                greedy = _viterbi_staged(reported, model, rows, 1)
            except ImpossibleObservationError:
                greedy = None
            if greedy is not None:
                lp_beam = trace_log_posterior(
                    _codes_to_traces(codes, model), model, rows, reported)
                lp_greedy = trace_log_posterior(
                    _codes_to_traces(greedy, model), model, rows, reported)
                if lp_greedy > lp_beam:
                    codes = greedy
    traces = _codes_to_traces(codes, model)
    return InferenceResult(traces, trace_log_posterior(traces, model, rows, reported))


def map_infer_bruteforce(reported, model: FhmmModel, distortion,
                         cap: int = 1_000_000) -> InferenceResult:
    """Exact MAP by scoring every joint trace assignment; test oracle."""
    reported = _as_reported(reported, model.zone_set.n_interior)
    K, N = reported.shape
    M = model.n_occupants
    S = (N + 1) ** M
    total = S ** K
    if total > cap:
        raise StateSpaceError(
            f"{total} joint assignments exceed the enumeration cap {cap}")
    rows = _channel_rows(distortion, N, M)
    _validate_reports(reported, rows)
    em = _emission_table(reported, model, rows)          # (K, S)
    logT = _joint_log_transitions(model)                 # (S, S)
    log_init = _joint_log_initial(model)                 # (S,)

    idx = np.arange(total)
    codes = np.empty((K, total), dtype=np.int64)
    for k in range(K):
        codes[k] = (idx // S ** (K - 1 - k)) % S
    scores = log_init[codes[0]] + em[0, codes[0]]
    for k in range(1, K):
        scores = scores + logT[codes[k - 1], codes[k]] + em[k, codes[k]]
    best = scores.max()
    if best == -np.inf:
        raise ImpossibleObservationError(_first_dead_step(em, logT, model))
    winners = np.flatnonzero(scores == best)
    key = min(tuple(codes[::-1, int(w)]) for w in winners)
    path = np.array(key[::-1], dtype=np.int64)
    traces = _codes_to_traces(path, model)
    return InferenceResult(traces, trace_log_posterior(traces, model, rows, reported))


def inference_accuracy(predicted, truth) -> float:
    """Fraction of (occupant, step) cells where the predicted zone matches."""
    pred = [np.asarray(t.steps if isinstance(t, LocationTrace) else t, dtype=np.int64)
            for t in predicted]
    true = [np.asarray(t.steps if isinstance(t, LocationTrace) else t, dtype=np.int64)
            for t in truth]
    if len(pred) != len(true) or any(p.shape != q.shape for p, q in zip(pred, true)):
        raise ValueError("predicted and true traces must have identical shape")
    hits = sum(int(np.count_nonzero(p == q)) for p, q in zip(pred, true))
    cells = sum(p.size for p in pred)
    return hits / cells


def constant_outside_attack(reported, model: FhmmModel, distortion) -> InferenceResult:
    """Baseline attacker that always guesses every occupant is outside."""
    reported = _as_reported(reported, model.zone_set.n_interior)
    K = reported.shape[0]
    traces = tuple(LocationTrace(model.occupants[m], np.zeros(K, dtype=np.int64))
                   for m in range(model.n_occupants))
    rows = _channel_rows(distortion, reported.shape[1], model.n_occupants)
    return InferenceResult(traces, trace_log_posterior(traces, model, rows, reported))


def _viterbi_full(reported, model, rows) -> np.ndarray:
    """Exact joint Viterbi with first-maximum backpointers."""
    K = reported.shape[0]
    em = _emission_table(reported, model, rows)
    logT = _joint_log_transitions(model)
    dp = _joint_log_initial(model) + em[0]
    S = dp.size
    back = np.empty((K - 1, S), dtype=np.int64)
    for k in range(1, K):
        cand = dp[:, None] + logT
        back[k - 1] = np.argmax(cand, axis=0)
        dp = cand[back[k - 1], np.arange(S)] + em[k]
    if dp.max() == -np.inf:
        raise ImpossibleObservationError(_first_dead_step(em, logT, model))
    codes = np.empty(K, dtype=np.int64)
    codes[-1] = int(np.argmax(dp))
    for k in range(K - 2, -1, -1):
        codes[k] = back[k, codes[k + 1]]
    return codes


def _viterbi_staged(reported, model, rows, beam_width: int) -> np.ndarray:
    """Beam search expanding one occupant at a time within each step.

    Candidates are merged on (predecessor's untransitioned digits, partial
    successor code), which bounds the per-stage frontier by the full joint
    state count, so the search is exhaustive whenever the beam is at least
    that wide.  Partial assignments whose zone counts can no longer reach
    any count vector the observation supports are dropped exactly — they
    could only die at the emission — which keeps narrow beams alive under
    near-deterministic channels.  Each candidate carries its full path for
    tie comparison.
    """
    K, N = reported.shape
    M = model.n_occupants
    base = N + 1
    with np.errstate(divide="ignore"):
        logA = [np.log(c.probs) for c in model.chains]
        logD = [np.log(r) for r in rows]

    # per step and zone: counts with nonzero emission probability
    y_min = np.empty((K, N), dtype=np.int64)
    y_max = np.empty((K, N), dtype=np.int64)
    for k in range(K):
        for n in range(N):
            support = np.flatnonzero(rows[n][:, reported[k, n]] > 0.0)
            if support.size == 0:
                raise ImpossibleObservationError(k)
            y_min[k, n], y_max[k, n] = support[0], support[-1]

    def viable(counts, z, remaining, k):
        """Can a partial assignment, extended by zone z, still match step k?"""
        new = list(counts)
        if z > 0:
            if new[z - 1] + 1 > y_max[k, z - 1]:
                return None
            new[z - 1] += 1
        deficit = 0
        for n in range(N):
            if new[n] < y_min[k, n]:
                deficit += y_min[k, n] - new[n]
        if deficit > remaining:
            return None
        return tuple(new)

    def emission(counts, k):
        tot = 0.0
        for n in range(N):
            tot += logD[n][counts[n], reported[k, n]]
        return tot

    # first step: expand one occupant at a time from a single empty partial,
    # pruning the frontier so large occupant counts stay bounded
    frontier = [(0.0, 0, (0,) * N)]  # (score, partial code, interior counts)
    for m in range(M):
        with np.errstate(divide="ignore"):
            li = np.log(model.initial[m])
        nxt = []
        for score, partial, counts in frontier:
            for z in range(base):
                s = score + li[z]
                if s == -np.inf:
                    continue
                new_counts = viable(counts, z, M - 1 - m, 0)
                if new_counts is not None:
                    nxt.append((s, partial * base + z, new_counts))
        nxt.sort(key=lambda c: (-c[0], c[1]))
        frontier = nxt[:beam_width] if len(nxt) > beam_width else nxt
    cands = []
    for score, code, counts in frontier:
        s = score + emission(counts, 0)
        if s > -np.inf:
            cands.append((s, (code,)))
    cands = _prune(cands, beam_width)
    if not cands:
        raise ImpossibleObservationError(0)

    for k in range(1, K):
        stage = {}
        for score, path in cands:
            key = (path[-1], 0)
            cur = stage.get(key)
            if cur is None or _better(score, path, cur[:2]):
                stage[key] = (score, path, (0,) * N)
        for m in range(M):
            shift = base ** (M - 1 - m)
            nxt = {}
            for (pred_rem, partial), (score, path, counts) in stage.items():
                pred_left = pred_rem % shift
                lA = logA[m][pred_rem // shift]
                for z in range(base):
                    s = score + lA[z]
                    if s == -np.inf:
                        continue
                    new_counts = viable(counts, z, M - 1 - m, k)
                    if new_counts is None:
                        continue
                    key = (pred_left, partial * base + z)
                    cur = nxt.get(key)
                    if cur is None or _better(s, path, cur[:2]):
                        nxt[key] = (s, path, new_counts)
            stage = nxt
            if len(stage) > beam_width:
                kept = sorted(stage.items(),
                              key=lambda it: (-it[1][0], it[0][1],
                                              it[1][1][::-1]))[:beam_width]
                stage = dict(kept)
        cands = []
        for (_, code), (score, path, counts) in stage.items():
            s = score + emission(counts, k)
            if s > -np.inf:
                cands.append((s, path + (code,)))
        cands = _prune(cands, beam_width)
        if not cands:
            raise ImpossibleObservationError(k)
    best = max(cands, key=lambda c: (c[0], tuple(-x for x in c[1][::-1])))
    return np.array(best[1], dtype=np.int64)


def _better(score, path, incumbent) -> bool:
    inc_score, inc_path = incumbent
    if score != inc_score:
        return score > inc_score
    return path[::-1] < inc_path[::-1]


def _prune(cands, beam_width):
    if len(cands) <= beam_width:
        return cands
    return sorted(cands, key=lambda c: (-c[0], c[1][::-1]))[:beam_width]


def _codes_to_traces(codes: np.ndarray, model: FhmmModel) -> tuple[LocationTrace, ...]:
    M = model.n_occupants
    base = model.zone_set.n_states
    K = codes.size
    steps = np.empty((M, K), dtype=np.int64)
    for m in range(M - 1, -1, -1):
        steps[m] = codes % base
        codes = codes // base
    return tuple(LocationTrace(model.occupants[m], steps[m]) for m in range(M))


def _emission_table(reported, model: FhmmModel, rows) -> np.ndarray:
    """log P(v_k | joint state s) for every step and joint code."""
    K, N = reported.shape
    M = model.n_occupants
    base = N + 1
    S = base ** M
    counts = np.zeros((S, N), dtype=np.int64)
    codes = np.arange(S)
    rem = codes.copy()
    for _ in range(M):
        rem, digit = np.divmod(rem, base)
        for n in range(1, base):
            counts[:, n - 1] += digit == n
    with np.errstate(divide="ignore"):
        logD = [np.log(r) for r in rows]
    em = np.zeros((K, S))
    for k in range(K):
        for n in range(N):
            em[k] += logD[n][counts[:, n], reported[k, n]]
    return em


def _joint_log_transitions(model: FhmmModel) -> np.ndarray:
    base = model.zone_set.n_states
    with np.errstate(divide="ignore"):
        logT = np.zeros((1, 1))
        for m in range(model.n_occupants):
            lA = np.log(model.chains[m].probs)
            S = logT.shape[0]
            logT = (logT[:, None, :, None] + lA[None, :, None, :]).reshape(
                S * base, S * base)
    return logT


def _joint_log_initial(model: FhmmModel) -> np.ndarray:
    with np.errstate(divide="ignore"):
        v = np.zeros(1)
        for m in range(model.n_occupants):
            li = np.log(model.initial[m])
            v = (v[:, None] + li[None, :]).ravel()
    return v


def _first_dead_step(em, logT, model) -> int:
    """Identify the first step at which every continuation dies."""
    dp = _joint_log_initial(model) + em[0]
    if dp.max() == -np.inf:
        return 0
    for k in range(1, em.shape[0]):
        dp = (dp[:, None] + logT).max(axis=0) + em[k]
        if dp.max() == -np.inf:
            return k
    return em.shape[0] - 1


def _channel_rows(distortion, n_zones: int, m_occupants: int):
    """Normalise channel input to one row matrix per zone."""
    from .distortion import DistortionMatrix
    if isinstance(distortion, DistortionMatrix):
        mats = [distortion.rows] * n_zones
    elif isinstance(distortion, np.ndarray) and distortion.ndim == 2:
        mats = [DistortionMatrix(distortion).rows] * n_zones
    else:
        items = list(distortion)
        if len(items) != n_zones:
            raise ValueError(f"need one channel per zone ({n_zones})")
        mats = [it.rows if isinstance(it, DistortionMatrix)
                else DistortionMatrix(np.asarray(it, dtype=float)).rows
                for it in items]
    for m in mats:
        if m.shape != (m_occupants + 1, m_occupants + 1):
            raise ValueError("channel size must match the occupant count")
    return mats


def _as_reported(reported, n_zones: int) -> np.ndarray:
    arr = np.asarray(reported, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != n_zones:
        raise ValueError(f"reported counts must be (steps, {n_zones})")
    if arr.shape[0] < 1:
        raise ValueError("need at least one observation")
    if np.any(arr < 0):
        raise ValueError("reported counts must be nonnegative")
    return arr


def _validate_reports(reported, rows):
    m_max = rows[0].shape[0] - 1
    for k in range(reported.shape[0]):
        for n in range(reported.shape[1]):
            if reported[k, n] > m_max:
                raise ImpossibleObservationError(k)
