"""Command-line front end.

Subcommands cover the full pipeline: learn a mobility model from traces,
design a reporting channel, simulate the closed loop, run the trace-recovery
attack, sweep the privacy-utility trade-off, compare reporting schemes, and
synthesize scaled worlds.  Results go to files under the configured output
directory; progress goes to standard error.  Reruns with the same config and
seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .adversary import AttackConfig, ImpossibleObservationError, StateSpaceError, \
    inference_accuracy, map_infer_beam
from .config import ConfigError, ExperimentConfig, config_from_dict, \
    load_config, load_manifest
from .dataio import DataError
from .distortion import InfeasibleRowError, build_constraint_tables, \
    design_distortion, identity_scheme
from .harness import DEFAULT_INTERVALS, SweepError, attack_baselines, \
    compare_schemes, default_count_law, derive_rng, run_tradeoff_sweep, \
    synthesize_scaled_world
from .occupancy import FhmmModel, StateSpaceCapError, \
    StationaryDistributionError, TraceError, ZoneSet, learn_transitions, \
    occupancy_from_traces, random_office_model
from .svgplot import plot_tradeoff
from .thermal import closed_loop_simulate

log = logging.getLogger("privhvac")

_HANDLED = (ConfigError, DataError, InfeasibleRowError, TraceError,
            SweepError, ImpossibleObservationError, StateSpaceError,
            StateSpaceCapError, StationaryDistributionError,
            ValueError, OSError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except _HANDLED as exc:
        msg = " ".join(str(exc).split()) or exc.__class__.__name__
        print(f"error: {msg}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="privhvac",
        description="Privacy-aware occupancy reporting for HVAC control.")
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--output-dir", help="override the config output directory")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("learn", help="fit per-occupant transition matrices")
    s.add_argument("--traces", help="trace CSV (defaults to the config dataset)")
    s.add_argument("--zones", type=int, help="interior zone count (else inferred)")
    s.add_argument("--smoothing", type=float, default=0.1)
    s.add_argument("--out", help="model file path (default <out>/model.json)")
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("design", help="design the reporting channel")
    s.add_argument("--delta", type=float, help="cost budget (overrides config)")
    s.set_defaults(func=cmd_design)

    s = sub.add_parser("simulate", help="run the closed control loop")
    s.add_argument("--distortion", help="channel CSV (identity if omitted)")
    s.add_argument("--steps", type=int, help="plant steps to simulate")
    s.add_argument("--t-init", type=float, help="initial zone temperature")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("attack", help="recover traces from reported counts")
    s.add_argument("--reported", required=True, help="reported occupancy CSV")
    s.add_argument("--distortion", help="channel CSV the reports went through")
    s.add_argument("--truth", help="true trace CSV for scoring accuracy")
    s.add_argument("--cadence", type=int, default=1,
                   help="plant steps per reported sample")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("tradeoff", help="sweep budgets, measure privacy/cost")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_tradeoff)

    s = sub.add_parser("compare", help="score reporting schemes head to head")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("synth", help="scale a world to more occupants")
    s.add_argument("--occupants", type=int, required=True)
    s.add_argument("--out", help="model file path (default <out>/scaled.json)")
    s.set_defaults(func=cmd_synth)
    return p


# ---------------------------------------------------------------------------


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be nonnegative")
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.output_dir is not None:
        cfg = dataclasses.replace(cfg, output_dir=args.output_dir)
    return cfg


def _out_dir(cfg: ExperimentConfig) -> Path:
    d = Path(cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


@dataclasses.dataclass(frozen=True)
class _World:
    model: FhmmModel
    traces: tuple | None  # recorded plant traces (dataset worlds only)


def _resolve_world(cfg: ExperimentConfig) -> _World:
    w = cfg.world
    if w.kind == "synthetic":
        model = random_office_model(w.occupants, w.zones,
                                    derive_rng(cfg.seed, "world"))
        return _World(model, None)
    if w.kind == "model":
        return _World(dataio.load_model(w.path), None)
    manifest = load_manifest(w.path)
    train, evaluation, zone_set = dataio.ingest_traces(manifest)
    chains = learn_transitions(train, zone_set)
    model = FhmmModel.from_chains(zone_set, chains,
                                  occupants=[t.occupant for t in train])
    held_out = evaluation if evaluation else train
    return _World(model, tuple(held_out))


def _plant(world: _World):
    if world.traces is not None:
        return occupancy_from_traces(world.traces, world.model.zone_set)
    return world.model


def _tables(cfg: ExperimentConfig, out: Path, m_max: int):
    """Build the planner response tables, or reuse a valid cached copy."""
    key = dataio.tables_cache_key(cfg.problem, cfg.mpc, cfg.design, m_max)
    cache = out / f"tables_{key[:12]}.csv"
    if cache.exists():
        try:
            tables = dataio.load_tables(cache, expected_key=key)
            log.info("reusing cached response tables at %s", cache)
            return tables
        except DataError:
            log.info("cached tables at %s are stale; rebuilding", cache)
    log.info("building planner response tables (m_max=%d)", m_max)
    tables = build_constraint_tables(cfg.problem, cfg.mpc, cfg.design, m_max)
    dataio.save_tables(cache, tables, key)
    return tables


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------


def cmd_learn(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    if args.traces:
        traces = dataio.load_traces(args.traces)
        n_interior = args.zones
        if n_interior is None:
            n_interior = max(1, max(int(t.steps.max()) for t in traces))
        zone_set = ZoneSet.with_interior(n_interior)
        model = FhmmModel.from_chains(
            zone_set, learn_transitions(traces, zone_set, args.smoothing),
            occupants=[t.occupant for t in traces])
    elif cfg.world.kind == "dataset":
        model = _resolve_world(cfg).model
    else:
        raise ConfigError("learn needs --traces or a dataset world")
    dest = Path(args.out) if args.out else out / "model.json"
    dataio.save_model(dest, model)
    log.info("fit %d occupant chains over %d zones -> %s",
             model.n_occupants, model.zone_set.n_states, dest)
    return 0


def cmd_design(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    world = _resolve_world(cfg)
    m_max = world.model.n_occupants
    delta = args.delta if args.delta is not None else cfg.design.delta
    tables = _tables(cfg, out, m_max)
    p_y = default_count_law(world.model)
    log.info("designing channel for budget delta=%g", delta)
    result = design_distortion(tables, p_y, cfg.design, delta=delta)
    dataio.save_design_report(out / "design_report.json", result, delta)
    if not result.feasible:
        print(f"error: no feasible channel at delta={delta:g} "
              f"(row {result.infeasible_row})", file=sys.stderr)
        return 1
    dataio.save_distortion(out / "distortion.csv", result.channel)
    log.info("channel leaks %.4f bits (gap %.2e) -> %s",
             result.mi_bits, result.fw_gap_bits, out / "distortion.csv")
    return 0


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    world = _resolve_world(cfg)
    distortion = (dataio.load_distortion(args.distortion)
                  if args.distortion else identity_scheme(world.model.n_occupants))
    n_steps = args.steps if args.steps is not None else cfg.sweep.n_steps
    T_init = args.t_init if args.t_init is not None else cfg.sweep.T_init
    plant = _plant(world)
    if n_steps is None and isinstance(plant, FhmmModel):
        n_steps = DEFAULT_INTERVALS * cfg.mpc.update_steps
    sim_log = closed_loop_simulate(
        plant, distortion, cfg.problem, cfg.mpc, n_steps=n_steps,
        rng=derive_rng(cfg.seed, "simulate"), T_init=T_init)
    dataio.save_closed_loop_log(out / "log.csv", sim_log)
    total = float(sim_log.realized_cost(cfg.mpc.comfort_penalty).sum())
    log.info("simulated %d intervals x %d zones, realized cost %.4f -> %s",
             sim_log.n_iterations, sim_log.n_zones, total, out / "log.csv")
    return 0


def cmd_attack(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    world = _resolve_world(cfg)
    reported, m_file = dataio.load_occupancy(args.reported)
    if m_file != world.model.n_occupants:
        raise DataError(f"reported file counts {m_file} occupants but the "
                        f"model has {world.model.n_occupants}")
    distortion = (dataio.load_distortion(args.distortion)
                  if args.distortion else identity_scheme(m_file))
    model = world.model.at_cadence(args.cadence)
    result = map_infer_beam(reported.counts, model, distortion, cfg.attack)
    dataio.save_traces(out / "predictions.csv", result.traces)
    report = {"log_posterior": result.log_posterior,
              "steps": int(reported.counts.shape[0]),
              "occupants": m_file,
              "beam_width": cfg.attack.beam_width,
              "accuracy": None}
    if args.truth:
        truth = dataio.load_traces(args.truth)
        report["accuracy"] = inference_accuracy(result.traces, truth)
        log.info("recovered traces match truth at %.4f", report["accuracy"])
    _write_json(out / "attack_report.json", report)
    log.info("MAP traces (log posterior %.4f) -> %s",
             result.log_posterior, out / "predictions.csv")
    return 0


def cmd_tradeoff(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    world = _resolve_world(cfg)
    m_max = world.model.n_occupants
    tables = _tables(cfg, out, m_max)
    p_y = default_count_law(world.model)
    sweep = cfg.sweep
    source = world.traces if world.traces is not None else world.model
    records = run_tradeoff_sweep(
        source, cfg.problem, deltas=sweep.deltas, runs=sweep.runs,
        seed=cfg.seed, model=world.model, mpc_config=cfg.mpc,
        design_config=cfg.design, tables=tables, p_y=p_y,
        n_steps=sweep.n_steps, T_init=sweep.T_init,
        attack_config=cfg.attack, n_points=sweep.points)
    dataio.save_tradeoff(out / "tradeoff.csv", records)
    base = attack_baselines(source, cfg.problem, runs=sweep.runs, seed=cfg.seed,
                            model=world.model, mpc_config=cfg.mpc,
                            n_steps=sweep.n_steps, attack_config=cfg.attack)
    _write_json(out / "baselines.json", base)
    if not args.no_plots:
        for p in plot_tradeoff(out, records):
            log.info("plot -> %s", p)
    feasible = sum(r.feasible for r in records)
    log.info("%d/%d budgets feasible -> %s", feasible, len(records),
             out / "tradeoff.csv")
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    world = _resolve_world(cfg)
    tables = _tables(cfg, out, world.model.n_occupants)
    p_y = default_count_law(world.model)
    sweep = cfg.sweep
    source = world.traces if world.traces is not None else world.model
    rows = compare_schemes(
        source, cfg.problem, sweep.schemes, runs=sweep.runs, seed=cfg.seed,
        model=world.model, mpc_config=cfg.mpc, design_config=cfg.design,
        tables=tables, p_y=p_y, n_steps=sweep.n_steps, T_init=sweep.T_init,
        attack_config=cfg.attack)
    dataio.save_schemes(out / "schemes.csv", rows)
    for row in rows:
        log.info("%-18s mi=%.4f cost=%.2f acc=%.3f%s", row.scheme, row.mi_bits,
                 row.mean_cost, row.mean_accuracy,
                 "  [pareto]" if row.pareto else "")
    return 0


def cmd_synth(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg)
    if args.occupants < 1:
        raise ConfigError("occupant count must be positive")
    base = _resolve_world(cfg).model
    scaled = synthesize_scaled_world(base, args.occupants, cfg.seed)
    dest = Path(args.out) if args.out else out / "scaled.json"
    dataio.save_model(dest, scaled)
    log.info("scaled %d-occupant base to %d occupants -> %s",
             base.n_occupants, args.occupants, dest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
