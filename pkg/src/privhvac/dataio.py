"""File formats: canonical trace/occupancy CSVs, channel and constraint-table
files, closed-loop logs, model files, and experiment result tables.

All writers are byte-deterministic: fixed column order, shortest round-trip
float formatting, UTF-8, LF line endings.  Floats survive a write/read cycle
bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .config import ConfigError, DatasetManifest
from .distortion import ConstraintTables, DesignConfig, DesignResult, DistortionMatrix
from .harness import SchemeComparison, TradeoffRecord
from .occupancy import FhmmModel, LocationTrace, OccupancySeries, TransitionMatrix, ZoneSet
from .thermal import ClosedLoopLog, MpcConfig, MpcProblem


class DataError(ValueError):
    """Malformed data file; message carries file and line."""


def _fmt(x) -> str:
    return repr(float(x))


def _write_text(path, text: str):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _rows_of_csv(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return list(csv.reader(io.StringIO(text)))


def _parse(path, line_no: int, value: str, kind, what: str):
    try:
        return kind(value)
    except ValueError as exc:
        raise DataError(f"{path}:{line_no}: bad {what} {value!r}") from exc


# ---------------------------------------------------------------------------
# location traces: CSV `step,occupant,zone`, one row per (step, occupant)


def save_traces(path, traces):
    traces = list(traces)
    if not traces:
        raise DataError("need at least one trace to save")
    K = len(traces[0])
    if any(len(t) != K for t in traces):
        raise DataError("traces must cover the same steps")
    lines = ["step,occupant,zone"]
    for k in range(K):
        for t in traces:
            lines.append(f"{k},{_csv_field(t.occupant)},{int(t.steps[k])}")
    _write_text(path, "\n".join(lines) + "\n")


def load_traces(path) -> list[LocationTrace]:
    rows = _read_trace_rows(path)
    order: list[str] = []
    steps: dict[str, list[tuple[int, int]]] = {}
    for _, step, occ, zone in rows:
        if occ not in steps:
            order.append(occ)
            steps[occ] = []
        steps[occ].append((step, zone))
    traces = []
    for occ in order:
        pairs = steps[occ]
        idx = [s for s, _ in pairs]
        if idx != sorted(set(idx)):
            raise DataError(f"{path}: occupant {occ!r} has non-monotone steps")
        traces.append(LocationTrace(occ, np.array([z for _, z in pairs],
                                                  dtype=np.int64)))
    if len({len(t) for t in traces}) > 1:
        raise DataError(f"{path}: occupants cover different step counts")
    return traces


def _read_trace_rows(path) -> list[tuple[int, int, str, int]]:
    rows = _rows_of_csv(path)
    if not rows or [c.strip() for c in rows[0]] != ["step", "occupant", "zone"]:
        raise DataError(f"{path}:1: expected header step,occupant,zone")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise DataError(f"{path}:{i}: expected 3 fields, got {len(row)}")
        step = _parse(path, i, row[0], int, "step")
        zone = _parse(path, i, row[2], int, "zone")
        if step < 0 or zone < 0:
            raise DataError(f"{path}:{i}: negative step or zone")
        out.append((i, step, row[1], zone))
    if not out:
        raise DataError(f"{path}: no trace rows")
    return out


def ingest_traces(manifest: DatasetManifest, paths=None
                  ) -> tuple[list[LocationTrace], list[LocationTrace], ZoneSet]:
    """Read, subsample, and split recorded traces per the manifest.

    Rows whose step is a multiple of the sampling period are retained and
    re-indexed; every occupant must cover the same retained steps.  The split
    boundaries are in subsampled steps: train is [0, train_end), evaluation
    is [train_end, eval_end or end)."""
    paths = list(paths) if paths is not None else [Path(p) for p in manifest.traces]
    roster = list(manifest.occupants)
    per_occ: dict[str, list[tuple[int, int]]] = {}
    order: list[str] = []
    for path in paths:
        for line, step, occ, zone in _read_trace_rows(path):
            if roster and occ not in roster:
                raise DataError(f"{path}:{line}: occupant {occ!r} "
                                "is not in the roster")
            if occ not in per_occ:
                per_occ[occ] = []
                order.append(occ)
            if per_occ[occ] and step <= per_occ[occ][-1][0]:
                raise DataError(f"{path}:{line}: non-monotone step for {occ!r}")
            per_occ[occ].append((step, zone))
    names = roster if roster else order
    missing = [o for o in names if o not in per_occ]
    if missing:
        raise DataError(f"no rows for occupant {missing[0]!r}")

    kept: dict[str, list[int]] = {}
    kept_steps = None
    for occ in names:
        pairs = [(s, z) for s, z in per_occ[occ] if s % manifest.period == 0]
        this = [s for s, _ in pairs]
        if kept_steps is None:
            kept_steps = this
        elif this != kept_steps:
            raise DataError(f"occupant {occ!r} does not cover the same "
                            "retained steps as the others")
        kept[occ] = [z for _, z in pairs]
    K = len(kept_steps)
    if K == 0:
        raise DataError("subsampling retained no steps")

    max_zone = max(max(z) for z in kept.values())
    n_interior = manifest.zones if manifest.zones is not None else max(max_zone, 1)
    if max_zone > n_interior:
        raise DataError(f"zone index {max_zone} exceeds the declared "
                        f"{n_interior} interior zones")
    zone_set = ZoneSet.with_interior(n_interior)

    train_end = manifest.train_end if manifest.train_end is not None else K
    eval_end = manifest.eval_end if manifest.eval_end is not None else K
    if train_end > K or eval_end > K:
        raise DataError("split boundary beyond the data range")
    train = [LocationTrace(o, np.array(kept[o][:train_end], dtype=np.int64))
             for o in names]
    evaluation = [LocationTrace(o, np.array(kept[o][train_end:eval_end],
                                            dtype=np.int64))
                  for o in names] if eval_end > train_end else []
    return train, evaluation, zone_set


# ---------------------------------------------------------------------------
# occupancy series: CSV `step,zone_0..zone_N` (all zones; row sums = occupants)


def save_occupancy(path, series: OccupancySeries, total_occupants: int):
    counts = series.counts
    outside = total_occupants - counts.sum(axis=1)
    if np.any(outside < 0):
        raise DataError("interior counts exceed the stated occupant total")
    header = ",".join(["step"] + [f"zone_{n}" for n in range(counts.shape[1] + 1)])
    lines = [header]
    for k in range(counts.shape[0]):
        vals = [str(k), str(int(outside[k]))] + [str(int(c)) for c in counts[k]]
        lines.append(",".join(vals))
    _write_text(path, "\n".join(lines) + "\n")


def load_occupancy(path) -> tuple[OccupancySeries, int]:
    rows = _rows_of_csv(path)
    if not rows or rows[0][0].strip() != "step":
        raise DataError(f"{path}:1: expected header step,zone_0..zone_N")
    n_cols = len(rows[0]) - 1
    if n_cols < 2:
        raise DataError(f"{path}:1: need the outside zone plus interior zones")
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_cols + 1:
            raise DataError(f"{path}:{i}: expected {n_cols + 1} fields")
        vals = [_parse(path, i, c, int, "count") for c in row[1:]]
        if any(v < 0 for v in vals):
            raise DataError(f"{path}:{i}: negative count")
        data.append(vals)
    if not data:
        raise DataError(f"{path}: no occupancy rows")
    arr = np.array(data, dtype=np.int64)
    totals = set(arr.sum(axis=1).tolist())
    if len(totals) != 1:
        raise DataError(f"{path}: rows disagree on the occupant total")
    return OccupancySeries(arr[:, 1:]), int(totals.pop())


# ---------------------------------------------------------------------------
# distortion channel: CSV `y,p_0..p_M`


def save_distortion(path, channel: DistortionMatrix):
    n = channel.m_max + 1
    lines = [",".join(["y"] + [f"p_{v}" for v in range(n)])]
    for y in range(n):
        lines.append(",".join([str(y)] + [_fmt(p) for p in channel.rows[y]]))
    _write_text(path, "\n".join(lines) + "\n")


def load_distortion(path) -> DistortionMatrix:
    rows = _rows_of_csv(path)
    if not rows or rows[0][0].strip() != "y":
        raise DataError(f"{path}:1: expected header y,p_0..p_M")
    n = len(rows[0]) - 1
    mat = np.zeros((n, n))
    seen = 0
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise DataError(f"{path}:{i}: expected {n + 1} fields")
        y = _parse(path, i, row[0], int, "count")
        if not 0 <= y < n:
            raise DataError(f"{path}:{i}: count {y} out of range")
        mat[y] = [_parse(path, i, c, float, "probability") for c in row[1:]]
        seen += 1
    if seen != n:
        raise DataError(f"{path}: expected {n} channel rows, got {seen}")
    try:
        return DistortionMatrix(mat)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# constraint tables: CSV `y,v,t1,t2,cost_diff,temp_diff`, keyed by config hash


def tables_cache_key(problem: MpcProblem, mpc_config: MpcConfig,
                     design_config: DesignConfig, m_max: int) -> str:
    """Hash of every parameter the tables depend on."""
    payload = {
        "zone": [problem.zone.C, problem.zone.c_o, problem.zone.c_p,
                 None if problem.zone.R_row is None
                 else list(map(float, problem.zone.R_row))],
        "hvac": [problem.hvac.eta_h, problem.hvac.eta_c, problem.hvac.beta,
                 problem.hvac.T_a, problem.hvac.T_h_max, problem.hvac.m_min,
                 problem.hvac.m_max, problem.hvac.T_out],
        "comfort": [problem.comfort.T_low, problem.comfort.T_high],
        "tariff": [np.asarray(problem.tariff.r_e).tolist(),
                   np.asarray(problem.tariff.r_h).tolist()],
        "mpc": [mpc_config.dt, mpc_config.horizon_steps, mpc_config.update_steps,
                mpc_config.block_steps, mpc_config.comfort_penalty,
                mpc_config.convergence_tol, mpc_config.max_linearizations],
        "design": [design_config.delta_T, design_config.pair_spacing,
                   design_config.temp_grid_step],
        "m_max": m_max,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_tables(path, tables: ConstraintTables, key: str | None = None):
    lines = []
    if key is not None:
        lines.append(f"# key={key}")
    lines.append("y,v,t1,t2,cost_diff,temp_diff")
    n = tables.m_max + 1
    for y in range(n):
        for v in range(n):
            for p, (i, j) in enumerate(tables.pairs):
                lines.append(",".join([
                    str(y), str(v), _fmt(tables.grid[i]), _fmt(tables.grid[j]),
                    _fmt(tables.cost_diff[y, v, p]), _fmt(tables.temp_diff[y, v, p])]))
    _write_text(path, "\n".join(lines) + "\n")


def load_tables(path, expected_key: str | None = None) -> ConstraintTables:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    key = None
    if lines and lines[0].startswith("# key="):
        key = lines.pop(0)[len("# key="):]
    if expected_key is not None and key != expected_key:
        raise DataError(f"{path}: cached tables were built from a different "
                        "configuration")
    rows = list(csv.reader(io.StringIO("\n".join(lines))))
    if not rows or [c.strip() for c in rows[0]] != ["y", "v", "t1", "t2",
                                                    "cost_diff", "temp_diff"]:
        raise DataError(f"{path}: expected header y,v,t1,t2,cost_diff,temp_diff")
    entries = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 6:
            raise DataError(f"{path}:{i}: expected 6 fields")
        y = _parse(path, i, row[0], int, "count")
        v = _parse(path, i, row[1], int, "count")
        vals = [_parse(path, i, c, float, "value") for c in row[2:]]
        entries.append((y, v, *vals))
    if not entries:
        raise DataError(f"{path}: no table rows")
    m_max = max(e[0] for e in entries)
    temps = []
    for e in entries:
        for t in (e[2], e[3]):
            if t not in temps:
                temps.append(t)
    grid = np.array(sorted(temps))
    tix = {t: i for i, t in enumerate(grid)}
    pairs: list[tuple[int, int]] = []
    for e in entries:
        pr = (tix[e[2]], tix[e[3]])
        if pr not in pairs:
            pairs.append(pr)
    P = len(pairs)
    pix = {pr: p for p, pr in enumerate(pairs)}
    cost = np.full((m_max + 1, m_max + 1, P), np.nan)
    temp = np.full((m_max + 1, m_max + 1, P), np.nan)
    for y, v, t1, t2, c, td in entries:
        p = pix[(tix[t1], tix[t2])]
        cost[y, v, p] = c
        temp[y, v, p] = td
    if np.any(np.isnan(cost)) or np.any(np.isnan(temp)):
        raise DataError(f"{path}: incomplete table (missing (y,v,pair) cells)")
    return ConstraintTables(grid, tuple(pairs), cost, temp)


# ---------------------------------------------------------------------------
# closed-loop log: CSV `iter,step,T,y,v,m_dot,T_s,energy_cost,violation`,
# one row per (iteration, zone), zones in order within each iteration


def save_closed_loop_log(path, log: ClosedLoopLog):
    lines = ["iter,step,T,y,v,m_dot,T_s,energy_cost,violation"]
    for i in range(log.n_iterations):
        for n in range(log.n_zones):
            lines.append(",".join([
                str(int(log.iteration[i])), str(int(log.step[i])),
                _fmt(log.T_end[i, n]), str(int(log.y[i, n])),
                str(int(log.v[i, n])), _fmt(log.m_dot[i, n]),
                _fmt(log.T_s[i, n]), _fmt(log.energy[i, n]),
                _fmt(log.violation[i, n])]))
    _write_text(path, "\n".join(lines) + "\n")


def load_closed_loop_log(path) -> ClosedLoopLog:
    rows = _rows_of_csv(path)
    header = ["iter", "step", "T", "y", "v", "m_dot", "T_s", "energy_cost",
              "violation"]
    if not rows or [c.strip() for c in rows[0]] != header:
        raise DataError(f"{path}:1: expected header {','.join(header)}")
    recs = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 9:
            raise DataError(f"{path}:{i}: expected 9 fields")
        recs.append((_parse(path, i, row[0], int, "iteration"),
                     _parse(path, i, row[1], int, "step"),
                     *[_parse(path, i, c, float, "value") for c in row[2:]]))
    if not recs:
        raise DataError(f"{path}: no log rows")
    iters = sorted({r[0] for r in recs})
    if iters != list(range(len(iters))):
        raise DataError(f"{path}: iterations are not contiguous from 0")
    per_iter = len(recs) // len(iters)
    if per_iter * len(iters) != len(recs):
        raise DataError(f"{path}: iterations cover different zone counts")
    log = ClosedLoopLog.empty(len(iters), per_iter, float("nan"))
    counters = {i: 0 for i in iters}
    for it, step, T, y, v, m_dot, T_s, energy, violation in recs:
        n = counters[it]
        if n >= per_iter:
            raise DataError(f"{path}: iteration {it} has too many rows")
        counters[it] = n + 1
        log.fill(it, n, step, T, int(y), int(v), m_dot, T_s, energy, violation)
    return log


# ---------------------------------------------------------------------------
# mobility model file: JSON with zones, occupants, start laws, transitions


def save_model(path, model: FhmmModel):
    payload = {
        "zones": list(model.zone_set.zones),
        "occupants": list(model.occupants),
        "initial": [[float(p) for p in row] for row in model.initial],
        "transitions": [[[float(p) for p in row] for row in ch.probs]
                        for ch in model.chains],
    }
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_model(path) -> FhmmModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: parse error at line {exc.lineno}: "
                        f"{exc.msg}") from exc
    try:
        zone_set = ZoneSet(tuple(raw["zones"]))
        chains = tuple(TransitionMatrix(np.array(t, dtype=float))
                       for t in raw["transitions"])
        return FhmmModel(zone_set, chains, np.array(raw["initial"], dtype=float),
                         tuple(raw["occupants"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid model file: {exc}") from exc


# ---------------------------------------------------------------------------
# experiment result tables


def save_tradeoff(path, records):
    lines = ["delta,mi_bits,cost_diff_mean,cost_diff_std,acc_mean,acc_std,feasible"]
    for r in records:
        lines.append(",".join([
            _fmt(r.delta), _fmt(r.mi_bits), _fmt(r.realized_cost_diff_mean),
            _fmt(r.realized_cost_diff_std), _fmt(r.accuracy_mean),
            _fmt(r.accuracy_std), "true" if r.feasible else "false"]))
    _write_text(path, "\n".join(lines) + "\n")


def load_tradeoff(path, runs: int = 1) -> list[TradeoffRecord]:
    rows = _rows_of_csv(path)
    header = ["delta", "mi_bits", "cost_diff_mean", "cost_diff_std",
              "acc_mean", "acc_std", "feasible"]
    if not rows or [c.strip() for c in rows[0]] != header:
        raise DataError(f"{path}:1: expected header {','.join(header)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 7:
            raise DataError(f"{path}:{i}: expected 7 fields")
        vals = [_parse(path, i, c, float, "value") for c in row[:6]]
        if row[6] not in ("true", "false"):
            raise DataError(f"{path}:{i}: feasible must be true or false")
        out.append(TradeoffRecord(*vals, row[6] == "true", runs))
    return out


def save_schemes(path, comparisons):
    lines = ["scheme,mi_bits,mean_cost,cost_std,mean_accuracy,accuracy_std,"
             "runs,pareto"]
    for c in comparisons:
        lines.append(",".join([
            _csv_field(c.scheme), _fmt(c.mi_bits), _fmt(c.mean_cost),
            _fmt(c.cost_std), _fmt(c.mean_accuracy), _fmt(c.accuracy_std),
            str(c.runs), "true" if c.pareto else "false"]))
    _write_text(path, "\n".join(lines) + "\n")


def save_design_report(path, result: DesignResult, delta: float):
    payload = {
        "delta": float(delta),
        "feasible": bool(result.feasible),
        "mi_bits": float(result.mi_bits),
        "fw_gap_bits": float(result.fw_gap_bits),
        "iterations": int(result.iterations),
        "infeasible_row": result.infeasible_row,
    }
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _csv_field(s: str) -> str:
    if any(ch in s for ch in ",\"\n"):
        return '"' + s.replace('"', '""') + '"'
    return s
