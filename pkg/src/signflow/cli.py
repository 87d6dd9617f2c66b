"""Command-line front end: run benchmarks, verify property suites, and emit
machine-readable artifacts (report.json, control.csv, cost_history.csv,
density snapshots) for downstream plotting."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .benchmarks import (available_benchmarks, build_benchmark,
                         describe_benchmark)
from .descent import run_descent
from .exceptions import (CflViolationError, ConfigurationError,
                         DegenerateDensityError, DescentAbortedError,
                         IntegrationDivergedError)
from .meanfield import DensityMatchingCost
from .verification import SUITES, run_suite

_SOLVER_ERRORS = (DescentAbortedError, IntegrationDivergedError,
                  CflViolationError, DegenerateDensityError)

_MEANFIELD = {"kuramoto_sync", "kuramoto_matching", "attention_torus"}
_TOYS = {"drift1d", "bilinear1d", "reach2d"}
_ALL = _MEANFIELD | _TOYS


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigurationError(f"expected a boolean, got {text!r}")


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0.0 or not np.isfinite(v):
        raise ConfigurationError(f"expected a positive number, got {text!r}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ConfigurationError(f"expected an integer >= 1, got {text!r}")
    return v


def _grid_size(text: str) -> int:
    v = int(text)
    if v < 4:
        raise ConfigurationError(f"grid size must be >= 4, got {text!r}")
    return v


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise ConfigurationError(f"expected a value in (0, 1], got {text!r}")
    return v


# dotted override key -> (builder kwarg, parser, benchmarks it applies to)
_OVERRIDES = {
    "grid.G": ("G", _grid_size, _MEANFIELD),
    "problem.T": ("T", _positive_float, _ALL),
    "descent.N": ("n_windows", _positive_int, _ALL),
    "descent.epsilon": ("epsilon", _positive_float, _ALL),
    "descent.n_iterations": ("n_iterations", _positive_int, _ALL),
    "cost.weighted": ("weighted", _parse_bool, {"kuramoto_matching"}),
    "cost.normalize_target": ("normalize_target", _parse_bool,
                              {"kuramoto_matching"}),
    "field.kappa": ("kappa", _positive_float, {"attention_torus"}),
    "solver.cfl_target": ("cfl_target", _unit_interval, _MEANFIELD),
    "solver.dt_max": ("dt_max", _positive_float, _MEANFIELD),
    "solver.dt": ("dt", _positive_float, _TOYS),
}


def _parse_config_file(path: Path) -> dict:
    """Flat key=value config; '#' starts a comment; keys as in --overrides."""
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(
                f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out


def _split_extra_flags(extras: list) -> dict:
    """Turn leftover ``--a.b=c`` / ``--a.b c`` flags into a key-value dict."""
    out = {}
    i = 0
    while i < len(extras):
        arg = extras[i]
        if not arg.startswith("--"):
            raise ConfigurationError(f"unrecognized argument: {arg!r}")
        body = arg[2:]
        if "=" in body:
            key, value = body.split("=", 1)
        else:
            if i + 1 >= len(extras):
                raise ConfigurationError(f"flag {arg!r} is missing a value")
            key, value = body, extras[i + 1]
            i += 1
        out[key] = value
        i += 1
    return out


def _resolve_overrides(name: str, raw: dict) -> dict:
    """Type- and range-check raw override strings before any solve."""
    kwargs = {}
    for key, value in raw.items():
        if key not in _OVERRIDES:
            raise ConfigurationError(
                f"unknown override key {key!r}; known: "
                + ", ".join(sorted(_OVERRIDES)))
        kwarg, parser, applicable = _OVERRIDES[key]
        if name not in applicable:
            raise ConfigurationError(
                f"override {key!r} does not apply to benchmark {name!r}")
        try:
            kwargs[kwarg] = parser(str(value))
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"bad value for {key!r}: {exc}") from exc
    return kwargs


def _parse_snapshots(text: str, horizon: float) -> tuple:
    try:
        times = tuple(float(t) for t in text.split(",") if t.strip() != "")
    except ValueError as exc:
        raise ConfigurationError(f"bad snapshot list {text!r}: {exc}") from exc
    for t in times:
        if not 0.0 <= t <= horizon:
            raise ConfigurationError(
                f"snapshot time {t} outside [0, {horizon}]")
    return tuple(sorted(set(times)))


def _fmt(value: float) -> str:
    return repr(float(value))


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(
        ",".join(str(v) if isinstance(v, int) else _fmt(v) for v in row)
        for row in rows)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _write_density(path: Path, rho) -> None:
    tmp = path.with_name(path.name + ".tmp")
    rho.to_csv(tmp)
    os.replace(tmp, path)


def _write_artifacts(outdir: Path, instance, report, snapshots: tuple,
                     seedless: bool) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    control = report.final_control
    _write_csv(outdir / "cost_history.csv", "iter,cost",
               [(i, c) for i, c in enumerate(report.cost_history)])
    starts = control.window_bounds()[:-1]
    header = "t_start," + ",".join(
        f"u_{i + 1}" for i in range(control.control_dim))
    _write_csv(outdir / "control.csv", header,
               [(t, *vals) for t, vals in zip(starts, control.values)])

    extra = {}
    if instance.kind == "meanfield":
        sys_ = instance.system
        rho = instance.initial_state
        t = 0.0
        for t_snap in snapshots:
            if t_snap > t:
                rho = sys_.flow(rho, control, t, t_snap)
                t = t_snap
            _write_density(outdir / f"density_t{t_snap:g}.csv", rho)
        if t < instance.horizon:
            rho = sys_.flow(rho, control, t, instance.horizon)
        if instance.target_fn is not None:
            x = instance.initial_state.axis_centers()[0]
            _write_csv(outdir / "target.csv", "x,rho_hat",
                       zip(x, instance.target_fn(x)))
            normalize = instance.params.get("cost.normalize_target", False)
            forms = {}
            for label, density in (("t0", instance.initial_state),
                                   ("tT", rho)):
                forms[label] = {
                    "weighted": DensityMatchingCost(
                        instance.target_fn, weighted=True,
                        normalize_target=normalize).evaluate(density),
                    "unweighted": DensityMatchingCost(
                        instance.target_fn, weighted=False,
                        normalize_target=normalize).evaluate(density),
                }
            extra["matching_costs"] = forms

    payload = dict(report.to_dict())
    payload.update(extra)
    payload["config"] = dict(instance.params)
    payload["config"]["out"] = str(outdir)
    payload["config"]["snapshots"] = list(snapshots)
    payload["config"]["seedless"] = bool(seedless)
    _atomic_write_text(outdir / "report.json",
                       json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_run(args, extras) -> int:
    raw: dict = {}
    if args.config is not None:
        raw.update(_parse_config_file(Path(args.config)))
    raw.update(_split_extra_flags(extras))

    # pop config-file keys before choosing so flags override file values
    # and _resolve_overrides only ever sees dotted override keys
    name = args.benchmark or raw.pop("benchmark", None)
    raw.pop("benchmark", None)
    if name is None:
        raise ConfigurationError(
            "no benchmark selected (use --benchmark or a config file)")
    if name not in available_benchmarks():
        raise ConfigurationError(
            f"unknown benchmark: {name!r}; known: "
            + ", ".join(available_benchmarks()))

    out = args.out or raw.pop("out", None) or f"runs/{name}"
    raw.pop("out", None)
    snapshots_text = args.snapshots or raw.pop("snapshots", None)
    raw.pop("snapshots", None)
    seedless = args.seedless or _parse_bool(str(raw.pop("seedless", "false")))
    raw.pop("seedless", None)
    cost_kind = raw.pop("cost.kind", None)

    kwargs = _resolve_overrides(name, raw)
    instance = build_benchmark(name, **kwargs)
    if cost_kind is not None and cost_kind != instance.params.get("cost.kind"):
        raise ConfigurationError(
            f"cost.kind {cost_kind!r} does not match benchmark {name!r}"
            f" ({instance.params.get('cost.kind')!r})")
    if snapshots_text is not None:
        snapshots = _parse_snapshots(str(snapshots_text), instance.horizon)
    else:
        snapshots = instance.snapshot_times

    rng_state_before = np.random.get_state()[1].copy() if seedless else None
    report = run_descent(instance.system, instance.initial_state,
                         instance.horizon, instance.config)
    if seedless and not np.array_equal(rng_state_before,
                                       np.random.get_state()[1]):
        raise RuntimeError("--seedless violated: global RNG state changed")

    _write_artifacts(Path(out), instance, report, snapshots, seedless)
    history = ", ".join(f"{c:.6g}" for c in report.cost_history)
    print(f"{name}: cost {history}; primal solves {report.primal_solves()}; "
          f"switches {report.switch_count}; wrote {out}")
    return 0


def cmd_verify(args) -> int:
    checks = run_suite(args.suite)
    width = max(len(c.name) for c in checks) + 2
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        failed += 0 if c.passed else 1
        line = (f"{c.name:<{width}} measured={c.measured:<12.6g} "
                f"tol={c.tolerance:<10.4g} {status}")
        if c.detail:
            line += f"  ({c.detail})"
        print(line)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 0 if failed == 0 else 1


def cmd_list_benchmarks() -> int:
    for name in available_benchmarks():
        print(f"{name:<20} {describe_benchmark(name)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signflow",
        description="Sample-and-hold sign-descent synthesis for controlled "
                    "ODE and mean-field flows.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", help="run a benchmark descent and write artifacts")
    run_p.add_argument("config", nargs="?", default=None,
                       help="optional key=value config file")
    run_p.add_argument("--benchmark", default=None,
                       help="registered benchmark name")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--snapshots", default=None,
                       help="comma-separated density snapshot times")
    run_p.add_argument("--seedless", action="store_true",
                       help="assert that no randomness is consumed")

    verify_p = sub.add_parser("verify", help="run a property suite")
    verify_p.add_argument("suite", choices=sorted(SUITES),
                          help="property suite to run")

    sub.add_parser("list-benchmarks", help="list registered benchmarks")
    return parser


def _merge_dotted_flags(argv: list) -> list:
    """Rewrite ``--a.b v`` as ``--a.b=v`` ahead of argument parsing.

    Dotted override keys are unknown to argparse, so their detached values
    would otherwise be captured by the positional config-file slot.
    """
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "." in tok and "=" not in tok
                and i + 1 < len(argv) and not argv[i + 1].startswith("--")):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    argv = _merge_dotted_flags(sys.argv[1:] if argv is None else list(argv))
    args, extras = parser.parse_known_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args, extras)
        if extras:
            raise ConfigurationError(
                f"unrecognized arguments: {' '.join(extras)}")
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_list_benchmarks()
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
