"""Command line front end.

    srswarm run --scenario ackley-speed:v=2 --out runs/v2 --snapshots 1,5,10
    srswarm sweep --scenario schaffer-severity --set s=0.1,0.5 --out runs/sev
    srswarm render runs/v2/seed_0/snapshots/state_t10.npz --out frames

Exit status is 0 on success, 1 for configuration errors and 2 for failures
while running (I/O, integration, a busy output directory).
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .bench import (
    FAMILIES,
    OVERRIDE_KEYS,
    Scenario,
    apply_overrides,
    parse_overrides,
    preset,
    run_seed,
    variants,
)
from .metrics import StepRecord
from .ode import IntegrationError

METRICS_HEADER = ("t", "population", "best", "mean_altitude", "captured", "grid_opt")
AGGREGATE_HEADER = ("scenario", "runs", "success_mean", "success_min", "success_max",
                    "extinct_runs")
SNAPSHOT_KINDS = ("agents", "pheromone")
GRAY_REFERENCE = "per-snapshot pheromone maximum"
LOCK_NAME = ".srswarm.lock"


class ConfigError(ValueError):
    pass


# -- rasters ----------------------------------------------------------------

def render_agents(occupancy) -> np.ndarray:
    """Occupied cells black (0), free cells white (255)."""
    occ = np.asarray(occupancy, dtype=bool)
    return np.where(occ, 0, 255).astype(np.uint8)


def render_pheromone(field) -> np.ndarray:
    """Linear gray map of ``[0, max]`` onto ``[255, 0]``: more pheromone is
    darker. An all-zero field is white."""
    sigma = np.asarray(field, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("pheromone must be nonnegative")
    top = float(sigma.max()) if sigma.size else 0.0
    if top <= 0.0:
        return np.full(sigma.shape, 255, dtype=np.uint8)
    return np.rint(255.0 * (1.0 - sigma / top)).astype(np.uint8)


def write_pgm(path, pixels: np.ndarray) -> None:
    """Binary (P5) PGM with maxval 255."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 array")
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5" or int(fields[3]) != 255:
        raise ValueError(f"{path}: not an 8-bit binary PGM")
    width, height = int(fields[1]), int(fields[2])
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos + 1)
    return pixels.reshape(height, width).copy()


# -- csv --------------------------------------------------------------------

def _num(x: float) -> str:
    return repr(float(x))


def write_metrics_csv(path, records: Iterable[StepRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow([r.t, r.population, _num(r.best), _num(r.mean_altitude),
                             int(r.captured), _num(r.grid_opt)])


def read_metrics_csv(path) -> list[StepRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [StepRecord(int(t), int(n), float(b), float(m), c == "1", float(o))
                for t, n, b, m, c, o in reader]


def write_aggregate_csv(path, rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for row in rows:
            writer.writerow([row["scenario"], row["runs"], _num(row["success_mean"]),
                             _num(row["success_min"]), _num(row["success_max"]),
                             row["extinct_runs"]])


def aggregate_row(name: str, summaries) -> dict:
    rates = [s.success_rate for s in summaries]
    return {
        "scenario": name,
        "runs": len(rates),
        "success_mean": float(np.mean(rates)),
        "success_min": float(np.min(rates)),
        "success_max": float(np.max(rates)),
        "extinct_runs": sum(s.terminated_early for s in summaries),
    }


# -- configuration ----------------------------------------------------------

def read_config_file(path) -> dict[str, str]:
    """Flat ``key=value`` lines; blank lines and ``#`` comments ignored."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key=value")
        out[key.strip()] = value.strip()
    return out


def _set_pairs(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r} is not key=value")
        out[key.strip()] = value.strip()
    return out


def _check_keys(keys) -> None:
    unknown = sorted(set(keys) - set(OVERRIDE_KEYS))
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(unknown)}; "
                          f"known: {', '.join(OVERRIDE_KEYS)}")


def parse_steps(text: Optional[str]) -> list[int]:
    if not text:
        return []
    try:
        steps = sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError as exc:
        raise ConfigError(f"bad snapshot list {text!r}") from exc
    if steps and steps[0] < 1:
        raise ConfigError("snapshot steps start at 1")
    return steps


def parse_kinds(text: Optional[str]) -> list[str]:
    kinds = [k.strip() for k in (text or ",".join(SNAPSHOT_KINDS)).split(",") if k.strip()]
    bad = [k for k in kinds if k not in SNAPSHOT_KINDS]
    if bad:
        raise ConfigError(f"unknown snapshot kind(s): {', '.join(bad)}")
    return kinds


def resolve_scenario(scenario_id: str, overrides: dict[str, str],
                     seed: Optional[int] = None, n_seeds: Optional[int] = None) -> Scenario:
    _check_keys(overrides)
    try:
        scenario = preset(scenario_id)
        scenario = apply_overrides(scenario, overrides)
        if seed is not None or n_seeds is not None:
            first = scenario.seeds[0] if seed is None else seed
            count = len(scenario.seeds) if n_seeds is None else n_seeds
            if count < 1:
                raise ValueError("need at least one seed")
            scenario = replace(scenario, seeds=tuple(range(first, first + count)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc).strip("'\"")) from exc
    return scenario


def scenario_from_manifest(path) -> tuple[Scenario, dict]:
    try:
        data = json.loads(Path(path).read_text())
        return Scenario.from_dict(data["scenario"]), data
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot load manifest {path}: {exc}") from exc


def build_manifest(scenario: Scenario, snapshots, kinds, metrics: bool,
                   overrides: dict[str, str]) -> dict:
    return {
        "tool": "srswarm",
        "version": __version__,
        "scenario": scenario.to_dict(),
        "overrides": overrides,
        "seeds": list(scenario.seeds),
        "rng": "numpy PCG64, SeedSequence(seed).spawn(2): swarm, environment",
        "snapshots": list(snapshots),
        "snapshot_kinds": list(kinds),
        "gray_reference": GRAY_REFERENCE,
        "metrics": metrics,
    }


# -- running ----------------------------------------------------------------

@contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RuntimeError(f"{out} is in use by another run (remove {lock} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def save_state(path, t: int, swarm, env) -> None:
    np.savez_compressed(
        path, t=t, occupancy=swarm.occupancy, pheromone=swarm.pheromone,
        rows=swarm.positions[0], cols=swarm.positions[1],
        energy=swarm.energy[: swarm.count], offset=np.asarray(env.offset, dtype=float))


def write_rasters(directory: Path, t: int, occupancy, pheromone, kinds) -> None:
    if "agents" in kinds:
        write_pgm(directory / f"agents_t{t:04d}.pgm", render_agents(occupancy))
    if "pheromone" in kinds:
        write_pgm(directory / f"pheromone_t{t:04d}.pgm", render_pheromone(pheromone))


def _snapshot_observer(directory: Path, steps, kinds):
    wanted = set(steps)

    def observe(t, swarm, grid, env):
        if t in wanted:
            directory.mkdir(parents=True, exist_ok=True)
            write_rasters(directory, t, swarm.occupancy, swarm.pheromone, kinds)
            save_state(directory / f"state_t{t:04d}.npz", t, swarm, env)

    return observe if wanted else None


def execute(scenario: Scenario, out: Path, snapshots=(), kinds=SNAPSHOT_KINDS,
            metrics: bool = True, overrides: Optional[dict] = None, log=print) -> dict:
    """Run every seed of ``scenario`` into ``out`` and return the aggregate row."""
    out.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(scenario, snapshots, kinds, metrics, overrides or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    summaries = []
    for seed in scenario.seeds:
        seed_dir = out / f"seed_{seed}"
        seed_dir.mkdir(parents=True, exist_ok=True)
        summary = run_seed(scenario, seed,
                           _snapshot_observer(seed_dir / "snapshots", snapshots, kinds))
        if metrics:
            write_metrics_csv(seed_dir / "metrics.csv", summary.records)
        summaries.append(summary)
        note = f", extinct at t={summary.extinct_at}" if summary.terminated_early else ""
        log(f"{scenario.name} seed {seed}: success {summary.success_rate:.3f}{note}")
    row = aggregate_row(scenario.name, summaries)
    write_aggregate_csv(out / "aggregate.csv", [row])
    return row


def cmd_run(args) -> int:
    if args.manifest:
        scenario, data = scenario_from_manifest(args.manifest)
        snapshots = data.get("snapshots", [])
        kinds = data.get("snapshot_kinds", list(SNAPSHOT_KINDS))
        metrics = data.get("metrics", True)
        overrides = data.get("overrides", {})
    else:
        overrides = {**(read_config_file(args.config) if args.config else {}),
                     **_set_pairs(args.set)}
        scenario = resolve_scenario(args.scenario, overrides, args.seed, args.seeds)
        snapshots = parse_steps(args.snapshots)
        kinds = parse_kinds(args.snapshot_kinds)
        metrics = not args.no_metrics
    out = Path(args.out)
    with output_lock(out):
        if args.dry_run:
            manifest = build_manifest(scenario, snapshots, kinds, metrics, overrides)
            (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
            print(f"wrote {out / 'manifest.json'}")
            return 0
        row = execute(scenario, out, snapshots, kinds, metrics, overrides)
    print(f"{row['scenario']}: mean success {row['success_mean']:.3f} over "
          f"{row['runs']} seeds ({row['extinct_runs']} extinct)")
    return 0


def sweep_grid(family: str, fixed: str, overrides: dict[str, str]
               ) -> list[tuple[str, dict[str, str]]]:
    """Scenario ids and override sets for the cartesian product of
    comma-separated ``overrides`` values on top of ``family:fixed``. With
    nothing to sweep, a family expands to its catalog variants."""
    axes = {k: [v.strip() for v in vals.split(",") if v.strip()]
            for k, vals in overrides.items()}
    if not axes:
        if not fixed and family in FAMILIES:
            return [(name, parse_overrides(name.partition(":")[2]))
                    for name in variants(family)]
        return [(f"{family}:{fixed}" if fixed else family, parse_overrides(fixed))]
    keys = list(axes)
    out = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        chosen = {**parse_overrides(fixed), **dict(zip(keys, combo))}
        out.append((family + ":" + ",".join(f"{k}={v}" for k, v in chosen.items()), chosen))
    return out


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.=" else "_" for ch in name)


def cmd_sweep(args) -> int:
    overrides = {**(read_config_file(args.config) if args.config else {}),
                 **_set_pairs(args.set)}
    _check_keys(overrides)
    family, _, fixed = args.scenario.partition(":")
    scenarios = []
    for name, chosen in sweep_grid(family, fixed, overrides):
        scenario = resolve_scenario(family, chosen, args.seed, args.seeds)
        scenarios.append(replace(scenario, name=name))
    snapshots = parse_steps(args.snapshots)
    kinds = parse_kinds(args.snapshot_kinds)
    out = Path(args.out)
    with output_lock(out):
        if args.dry_run:
            for sc in scenarios:
                sub = out / _slug(sc.name)
                sub.mkdir(parents=True, exist_ok=True)
                manifest = build_manifest(sc, snapshots, kinds, True, {})
                (sub / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
            print(f"wrote {len(scenarios)} manifests under {out}")
            return 0
        rows = [execute(sc, out / _slug(sc.name), snapshots, kinds) for sc in scenarios]
        write_aggregate_csv(out / "aggregate.csv", rows)
    for row in rows:
        print(f"{row['scenario']}: mean success {row['success_mean']:.3f}")
    return 0


def cmd_render(args) -> int:
    kinds = parse_kinds(args.snapshot_kinds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in args.states:
        try:
            with np.load(path) as state:
                t = int(state["t"])
                write_rasters(out, t, state["occupancy"], state["pheromone"], kinds)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: not a state dump ({exc})") from exc
        print(f"rendered {path} (t={t})")
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are configuration errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="srswarm", description="Ant swarm simulator on moving landscapes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required,
                       help="preset id, e.g. ackley-speed:v=2 (families: "
                            + ", ".join(FAMILIES) + ")")
        p.add_argument("--seed", type=int, help="first seed (default 0)")
        p.add_argument("--seeds", type=int, help="number of consecutive seeds (default 10)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--snapshots", help="comma-separated steps to snapshot")
        p.add_argument("--snapshot-kinds", help="agents,pheromone (default both)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="parameter override; repeatable. keys: " + ", ".join(OVERRIDE_KEYS))
        p.add_argument("--config", help="file of key=value lines, same keys as --set")
        p.add_argument("--dry-run", action="store_true", help="write the manifest only")

    run = sub.add_parser("run", help="run one scenario over its seeds")
    common(run, scenario_required=False)
    run.add_argument("--manifest", help="rerun exactly the configuration in a manifest.json")
    run.add_argument("--no-metrics", action="store_true", help="skip metrics.csv files")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="cartesian product over --set k=v1,v2,...")
    common(sweep)
    sweep.set_defaults(func=cmd_sweep)

    render = sub.add_parser("render", help="rasters from saved state dumps")
    render.add_argument("states", nargs="+", help="state_t*.npz files")
    render.add_argument("--out", required=True)
    render.add_argument("--snapshot-kinds", help="agents,pheromone (default both)")
    render.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb == "run" and not (args.scenario or args.manifest):
        parser.error("run needs --scenario or --manifest")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"srswarm: config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError, IntegrationError, FloatingPointError) as exc:
        print(f"srswarm: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
