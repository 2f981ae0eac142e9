"""Command-line front end.

Subcommands: solve one instance, run the scenario grid (CSVs plus
report figures), train the neural policy, and render a solved plan to
SVG. Exit codes are a stable contract: 0 success, 1 usage/I-O/parse
trouble, 2 infeasible or failed validation. All outputs are
deterministic given flags and seeds; nothing embeds timestamps.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import datasets as ds
from .instances import (
    DemandModel,
    InstanceError,
    normalize,
    parse_cvrplib,
    regenerate_demands,
)
from .instances import NormalizedInstance
from .render import Geometry, RenderSpec, RenderError, render_svg
from .scenarios import (
    ScenarioConfig,
    ScenarioError,
    classify_time,
    comparison_csv,
    results_csv,
    run_grid,
)
from .solver import (
    SolverError,
    TimeModel,
    TooLarge,
    attach_times,
    exact_solve,
    plan_from_dict,
    plan_to_dict,
    split_parts,
    sweep_solve,
    validate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2


class ConfigError(Exception):
    """Config schema violation; message carries the offending field path."""


class UsageExit(Exception):
    pass


class ArgParser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; our contract reserves 2
    # for validation failures, so route usage trouble through exit 1.
    def error(self, message):
        raise UsageExit(message)


def _require(cfg: dict, key: str, kind, path: str, default=None, required=False):
    if key not in cfg:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = cfg[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    bad_bool = isinstance(value, bool) and kind is not bool
    if bad_bool or not isinstance(value, kind):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}"
        )
    return value


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _load_instance(path: str, seed: int | None, keep_file_demands: bool):
    text = Path(path).read_text()
    inst = parse_cvrplib(text)
    if not keep_file_demands:
        inst = regenerate_demands(inst, DemandModel(seed=seed or 0))
    return inst


def _solve_parts(norm_parts, solver: str, capacity: int, policy):
    plans = []
    for part in norm_parts:
        if solver == "sweep":
            plan = sweep_solve(part, capacity)
        elif solver == "exact":
            plan = exact_solve(part, capacity)
        else:
            from .neural import solve_greedy

            plan = solve_greedy(part, capacity, policy)
        report = validate(plan, part.base, capacity)
        if not report.ok:
            raise SolverError("plan failed validation: " + "; ".join(map(str, report.violations)))
        plans.append(plan)
    return plans


def cmd_solve(args) -> int:
    if args.solver == "neural" and not args.checkpoint:
        print("error: --checkpoint is required when --solver neural", file=sys.stderr)
        return EXIT_USAGE
    inst = _load_instance(args.instance, args.seed, args.keep_file_demands)

    policy = None
    if args.solver == "neural":
        from .neural import NeuralSolverError, load_checkpoint

        try:
            policy = load_checkpoint(Path(args.checkpoint).read_bytes())
        except NeuralSolverError as exc:
            print(f"error: {args.checkpoint}: {exc}", file=sys.stderr)
            return EXIT_USAGE

    norm = normalize(inst)
    parts = [
        NormalizedInstance(base=p, scale_km_per_unit=norm.scale_km_per_unit)
        for p in split_parts(norm.base, args.capacity)
    ]
    tm = TimeModel(transit_hours_per_route=args.transit)

    try:
        plans = _solve_parts(parts, args.solver, args.capacity, policy)
    except TooLarge:
        raise  # solver precondition, handled as a usage error
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    attached = [attach_times(plan, part, tm) for plan, part in zip(plans, parts)]
    all_routes = [r for plan in attached for r in plan.routes]
    total = math.fsum(r.length_km for r in all_routes) / tm.speed_kmh \
        + tm.transit_hours_per_route * len(all_routes)
    tclass = classify_time(total, ScenarioConfig(capacity=args.capacity, solver=args.solver))

    if args.out:
        if len(attached) == 1:
            doc = plan_to_dict(attached[0], parts[0])
        else:
            doc = {
                "parts": [plan_to_dict(p, part) for p, part in zip(attached, parts)],
                "capacity": args.capacity,
                "instance": inst.name,
            }
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    print(f"instance: {inst.name}  houses: {inst.n_houses}  people: {inst.population}")
    print(f"solver: {args.solver}  capacity: {args.capacity}  transit: {args.transit:g} h  "
          f"parts: {len(parts)}")
    print(f"total: {total:.3f} hours  routes: {len(all_routes)}  class: {tclass.label}")
    return EXIT_OK


def _grid_datasets(cfg: dict):
    if "datasets" not in cfg:
        return ds.benchmark_datasets(_require(cfg, "demand_seed", int, "$", default=0))
    entries = cfg["datasets"]
    if not isinstance(entries, list) or not entries:
        raise ConfigError("$.datasets: expected a non-empty array")
    seed = _require(cfg, "demand_seed", int, "$", default=0)
    model = DemandModel(seed=seed)
    out = []
    for i, entry in enumerate(entries):
        path = f"$.datasets[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: expected an object")
        name = _require(entry, "name", str, path, required=True)
        if "path" in entry:
            inst = parse_cvrplib(Path(_require(entry, "path", str, path)).read_text())
        elif "bundled" in entry:
            inst = ds.load_bundled(_require(entry, "bundled", str, path))
        else:
            raise ConfigError(f"{path}: needs either 'path' or 'bundled'")
        first = _require(entry, "first", int, path)
        if first is not None:
            from .instances import truncate_instance

            inst = truncate_instance(inst, first)
        out.append((name, regenerate_demands(inst, model)))
    return out


def _env_threads() -> int:
    raw = os.environ.get("EVACROUTE_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"EVACROUTE_THREADS: expected an integer, got {raw!r}")
    if value < 0:
        raise ConfigError("EVACROUTE_THREADS: must be >= 0 (0 = auto)")
    return value


def cmd_grid(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    demand_seed = _require(cfg, "demand_seed", int, "$", default=0)
    capacities = _require(cfg, "capacities", list, "$", default=[64, 32, 16, 8, 4, 2])
    transits = _require(cfg, "transit_hours", list, "$", default=[0.0, 0.5, 1.0, 2.0])
    solvers = _require(cfg, "solvers", list, "$", default=["sweep", "neural"])
    registry = _require(cfg, "registry_size", int, "$", default=4000)
    speed = _require(cfg, "speed_kmh", float, "$", default=8.0)
    for i, c in enumerate(capacities):
        if not isinstance(c, int) or c < 1:
            raise ConfigError(f"$.capacities[{i}]: expected a positive integer")
    for i, t in enumerate(transits):
        if not isinstance(t, (int, float)) or isinstance(t, bool) or t < 0:
            raise ConfigError(f"$.transit_hours[{i}]: expected a non-negative number")
    for i, s in enumerate(solvers):
        if s not in ("sweep", "neural", "exact"):
            raise ConfigError(f"$.solvers[{i}]: unknown solver {s!r}")

    policy = None
    checkpoint_hash = ""
    if "neural" in solvers:
        from .neural import PolicyParams, load_checkpoint

        from .neural import NeuralSolverError

        ckpt = cfg.get("checkpoint")
        if ckpt is not None:
            if not isinstance(ckpt, str):
                raise ConfigError("$.checkpoint: expected a file path or null")
            blob = Path(ckpt).read_bytes()
            try:
                policy = load_checkpoint(blob)
            except NeuralSolverError as exc:
                raise ConfigError(f"$.checkpoint: {ckpt}: {exc}")
            checkpoint_hash = hashlib.sha256(blob).hexdigest()[:12]
        else:
            policy_seed = _require(cfg, "policy_seed", int, "$", default=0)
            policy = PolicyParams.init_random(seed=policy_seed)
            checkpoint_hash = f"random:{policy_seed}"

    rows = run_grid(
        _grid_datasets(cfg),
        capacities=capacities,
        transits=[float(t) for t in transits],
        solvers=solvers,
        policy=policy,
        demand_seed=demand_seed,
        registry_size=registry,
        speed_kmh=speed,
        checkpoint_hash=checkpoint_hash,
        max_workers=_env_threads(),
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.csv").write_text(results_csv(rows))
    (out_dir / "comparison.csv").write_text(comparison_csv(rows))
    from .report import write_grid_figures

    figures = write_grid_figures(rows, out_dir / "figures")
    failed = sum(r.failed for r in rows)
    print(f"grid: {len(rows)} cells ({failed} failed) -> {out_dir}/results.csv, "
          f"comparison.csv, {len(figures)} figures")
    return EXIT_INVALID if failed else EXIT_OK


def cmd_train(args) -> int:
    from .neural import PolicyParams, TrainConfig, history_csv, save_checkpoint, train_reinforce

    cfg = _load_json(args.config)
    kwargs = {}
    for key, kind in (
        ("batch_size", int), ("n_epochs", int), ("instances_per_epoch", int),
        ("learning_rate", float), ("baseline_update_significance", float),
        ("instance_size_n", int), ("capacity", int), ("seed", int), ("n_heldout", int),
    ):
        value = _require(cfg, key, kind, "$")
        if value is not None:
            kwargs[key] = value
    arch = {}
    for key in ("embed_dim", "n_heads", "n_encoder_layers", "feedforward_dim"):
        value = _require(cfg, key, int, "$")
        if value is not None:
            arch[key] = value
    try:
        tc = TrainConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"$: {exc}")

    from .neural import NonFiniteLoss

    init = PolicyParams.init_random(seed=tc.seed, **arch) if arch else None
    try:
        result = train_reinforce(tc, init=init)
    except NonFiniteLoss as exc:
        print(f"error: training aborted: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    out.write_bytes(save_checkpoint(result.params))
    log_path = out.with_suffix(out.suffix + ".log.csv")
    log_path.write_text(history_csv(result.history))
    last = result.history[-1]
    print(f"trained {tc.n_epochs} epochs; final greedy cost {last.mean_greedy_cost:.4f} "
          f"-> {out} (+ {log_path.name})")
    return EXIT_OK


def cmd_render(args) -> int:
    doc = _load_json(args.plan)
    spec = RenderSpec(hide_depot_legs=not args.show_depot_legs)

    def render_one(plan_doc: dict, out_path: Path):
        if "geometry" not in plan_doc:
            raise ConfigError(
                f"{args.plan}: plan has no geometry block; re-export it with 'evacroute solve --out'"
            )
        try:
            plan = plan_from_dict(plan_doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{args.plan}: malformed plan JSON ({exc})")
        svg = render_svg(plan, Geometry.from_dict(plan_doc["geometry"]), spec)
        out_path.write_text(svg)
        return out_path

    out = Path(args.out)
    if "parts" in doc:
        written = []
        for i, part in enumerate(doc["parts"], start=1):
            path = out.with_name(f"{out.stem}_part{i}{out.suffix or '.svg'}")
            written.append(render_one(part, path))
        print("rendered " + ", ".join(str(p) for p in written))
    else:
        render_one(doc, out)
        print(f"rendered {out}")
    return EXIT_OK


def build_parser() -> ArgParser:
    parser = ArgParser(prog="evacroute", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance and write the plan JSON")
    p.add_argument("instance", help="CVRPLIB-format .vrp file")
    p.add_argument("--solver", choices=("sweep", "neural", "exact"), default="sweep")
    p.add_argument("--capacity", type=int, default=64)
    p.add_argument("--transit", type=float, default=0.0, help="hours added per route")
    p.add_argument("--seed", type=int, default=0, help="household demand seed")
    p.add_argument("--keep-file-demands", action="store_true",
                   help="keep the file's demands instead of regenerating households")
    p.add_argument("--checkpoint", help="policy checkpoint (required for --solver neural)")
    p.add_argument("--out", help="write the FleetPlan JSON here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("grid", help="run the scenario ladder and write CSVs + figures")
    p.add_argument("config", nargs="?", help="grid config JSON (defaults to the bundled four-neighborhood ladder)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("train", help="train the neural policy")
    p.add_argument("config", help="training config JSON")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render a solved plan JSON to SVG")
    p.add_argument("plan", help="plan JSON written by 'solve --out'")
    p.add_argument("--out", required=True, help="SVG output path")
    p.add_argument("--show-depot-legs", action="store_true",
                   help="draw the first/last legs instead of hiding them")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageExit as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InstanceError, ScenarioError, RenderError, TooLarge, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
