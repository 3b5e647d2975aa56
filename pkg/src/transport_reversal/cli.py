"""Command-line driver: generate snapshots, reverse, reduce and compare.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ConstantVectorError, SnapshotMatrix, transport_columns
from .greedy import PivotStrategy, ReversalConfig, ReversalModel, greedy_reversal
from .io import FormatError, ShiftModel, read_model, read_snapshots, write_model, write_snapshots
from .pod import l2_error, reduce
from .real import forward_real, reverse_real, sharpened_reconstruct
from .solvers import (
    CFLError,
    InitialCondition,
    Problem,
    ProblemSpec,
    characteristic_snapshots,
    snapshot_at_chebyshev_times,
    solve,
)
from .varspeed import VelocityField, build_pivot_map, forward_varspeed, reverse_varspeed

log = logging.getLogger("transport_reversal")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

PRESETS: dict[str, ProblemSpec] = {
    "identity": ProblemSpec(
        Problem.ADVECTION_PERIODIC, n_cells=100, n_snapshots=100, final_time=0.99,
        courant=1.0, initial_condition=InitialCondition("delta"),
    ),
    "p1-advection-source": ProblemSpec(Problem.ADVECTION_SOURCE, final_time=1.0),
    "p2-advection-absorbing": ProblemSpec(Problem.ADVECTION_ABSORBING, final_time=1.0),
    "p3-acoustic-homogeneous": ProblemSpec(Problem.ACOUSTIC_HOMOGENEOUS, final_time=1.0),
    "p4-burgers": ProblemSpec(
        Problem.BURGERS, final_time=0.5,
        initial_condition=InitialCondition("twin_gaussians", width=0.1, amplitude=0.5, second_amplitude=1.0),
    ),
    "acoustic-heterogeneous": ProblemSpec(Problem.ACOUSTIC_HETEROGENEOUS, final_time=2.0),
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """Everything a run needs, stored as JSON.

    ``reversal`` holds ``method`` (``greedy``, ``real`` or ``varspeed``) plus
    the options of that method; ``pod`` holds either ``rank`` or ``energy``.
    """

    spec: ProblemSpec = field(default_factory=lambda: PRESETS["p3-acoustic-homogeneous"])
    reversal: dict = field(default_factory=lambda: {"method": "greedy"})
    pod: dict = field(default_factory=lambda: {"rank": 3})
    output_dir: str = "."
    seed: int = 0

    def to_dict(self) -> dict:
        spec = dataclasses.asdict(self.spec)
        spec["problem"] = self.spec.problem.value
        return {
            "spec": spec,
            "reversal": dict(self.reversal),
            "pod": dict(self.pod),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {"spec", "reversal", "pod", "output_dir", "seed"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        spec = dict(d.get("spec", {}))
        if "initial_condition" in spec:
            spec["initial_condition"] = InitialCondition(**spec["initial_condition"])
        try:
            return cls(
                spec=ProblemSpec(**spec),
                reversal=dict(d.get("reversal", {"method": "greedy"})),
                pod=dict(d.get("pod", {"rank": 3})),
                output_dir=str(d.get("output_dir", ".")),
                seed=int(d.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad config: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def with_override(self, assignment: str) -> "ExperimentConfig":
        """Apply ``dotted.key=value``; the value is parsed as JSON when possible."""
        if "=" not in assignment:
            raise UsageError(f"--set expects key=value, got {assignment!r}")
        key, raw = assignment.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        d = self.to_dict()
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                raise UsageError(f"unknown config key {key!r}")
            node = node[p]
        if node is d["spec"] and parts[-1] not in node:
            raise UsageError(f"unknown spec field {parts[-1]!r}")
        if node is d["pod"] and parts[-1] in ("rank", "energy"):
            node.pop("rank", None)
            node.pop("energy", None)
        node[parts[-1]] = value
        return self.from_dict(d)


def greedy_config(opts: dict) -> ReversalConfig:
    kw = {k: v for k, v in opts.items() if k in {f.name for f in dataclasses.fields(ReversalConfig)}}
    if "pivot_strategy" in kw:
        kw["pivot_strategy"] = PivotStrategy(kw["pivot_strategy"])
    return ReversalConfig(**kw)


def _velocity(cfg: ExperimentConfig, n: int) -> VelocityField:
    from .solvers import velocity_field

    if cfg.spec.n_cells != n:
        raise UsageError(f"config has N={cfg.spec.n_cells} but the snapshots have N={n}")
    return velocity_field(cfg.spec)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _stem(path) -> str:
    return Path(path).stem


def cmd_generate(cfg: ExperimentConfig, args) -> int:
    if args.preset is not None:
        if args.preset not in PRESETS:
            raise UsageError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
        # the preset replaces the configured problem; spec.* overrides still apply
        tmp = dataclasses.replace(cfg, spec=PRESETS[args.preset])
        for s in args.set or []:
            if s.startswith("spec."):
                tmp = tmp.with_override(s)
        spec, name = tmp.spec, args.preset
    else:
        spec, name = cfg.spec, cfg.spec.problem.value
    sol = snapshot_at_chebyshev_times(spec) if args.chebyshev else solve(spec)
    if args.characteristic:
        sol = {**sol, **characteristic_snapshots(spec, sol)}
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for var, snaps in sol.items():
        path = out / f"{name}_{var}.txt"
        write_snapshots(path, snaps)
        log.info("wrote %s (%d x %d)", path, *snaps.shape)
    return EXIT_OK


def cmd_reverse(cfg: ExperimentConfig, args) -> int:
    snaps = read_snapshots(args.snapshots)
    A = snaps.data
    opts = dict(cfg.reversal)
    method = args.method or opts.pop("method", "greedy")
    opts.pop("method", None)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(args.snapshots)
    model_path = out / f"{stem}.{method}.model"
    if method == "greedy":
        if args.iterations is not None:
            opts["max_iterations"] = args.iterations
        rc = greedy_config(opts)
        model = greedy_reversal(A, rc)
        write_model(model_path, model)
        ts = model.time_space_residuals()
        _write_csv(out / f"{stem}.residuals.csv", ["iteration", "residual_frobenius", "residual_time_space"],
                   # row k is the residual after iteration k; the initial norm is in the model
                   [(k, r, t) for k, (r, t) in enumerate(zip(model.residual_history[1:], ts[1:]), start=1)])
        _write_csv(out / f"{stem}.iterations.csv", ["iteration", "snapshot_index", "shift", "scaling", "pivot"],
                   [(k + 1, j, model.shifts[k, j], model.scalings[k, j], model.pivot_index[k])
                    for k in range(model.n_iterations) for j in range(model.n_snaps)])
        write_snapshots(out / f"{stem}.reconstruction.txt", SnapshotMatrix(model.reconstruct(), snaps.times))
        log.info("greedy: %d iterations, final time-space residual %.6e, pivot events %s",
                 model.n_iterations, ts[-1], model.pivot_events)
        if not np.all(np.isfinite(model.residual_history)):
            return EXIT_NUMERIC
    elif method == "real":
        pivot = A[:, int(opts.get("pivot", 0))]
        nus, _ = reverse_real(A, pivot, use_period=bool(opts.get("use_period", False)))
        model = ShiftModel("real", nus, np.full(nus.size, int(opts.get("pivot", 0))),
                           boundary_values=np.column_stack([A[0], A[-1]]))
        write_model(model_path, model)
    elif method == "varspeed":
        c = _velocity(cfg, A.shape[0])
        gamma = float(args.gamma if args.gamma is not None else opts.get("gamma", 0.15))
        pm = build_pivot_map(A, gamma)
        nus, _ = reverse_varspeed(A, c, pm, seeds_per_cell=int(opts.get("seeds_per_cell", 4)))
        model = ShiftModel("varspeed", nus, pm.map, speeds=c.speeds, meta={"gamma": gamma})
        write_model(model_path, model)
    else:
        raise UsageError(f"unknown reversal method {method!r}")
    if method != "greedy":
        _write_csv(out / f"{stem}.shifts.csv", ["snapshot_index", "time", "shift", "pivot"],
                   [(j, t, s, p) for j, (t, s, p) in enumerate(zip(snaps.times, model.shifts, model.pivot_map))])
    log.info("wrote %s", model_path)
    return EXIT_OK


def cmd_pod(cfg: ExperimentConfig, args) -> int:
    snaps = read_snapshots(args.snapshots)
    crit = _criterion(cfg, args)
    red = reduce(snaps.data, **crit, center=bool(cfg.pod.get("center", False)))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    energy = red.energy_fraction()
    _write_csv(out / f"{_stem(args.snapshots)}.singular_values.csv", ["mode_index", "sigma", "cumulative_energy"],
               [(i + 1, s, e) for i, (s, e) in enumerate(zip(red.singular_values, energy))])
    log.info("rank %d, truncation error %.6e", red.rank, red.tail_energy)
    if not args.quiet:
        print(red.rank)
    return EXIT_OK


def _criterion(cfg: ExperimentConfig, args) -> dict:
    if getattr(args, "rank", None) is not None:
        return {"rank": args.rank}
    if getattr(args, "energy", None) is not None:
        return {"energy": args.energy}
    if "rank" in cfg.pod:
        return {"rank": int(cfg.pod["rank"])}
    if "energy" in cfg.pod:
        return {"energy": float(cfg.pod["energy"])}
    raise UsageError("no POD criterion: give --rank or --energy")


def _reversed_and_forward(model, A: np.ndarray, cfg: ExperimentConfig):
    """Reversed matrix and the map taking a reduced reversed matrix back."""
    if isinstance(model, ReversalModel):
        if model.n_iterations == 0:
            nus = np.zeros(A.shape[1], dtype=np.int64)
        else:
            nus = model.shifts[0]
        return transport_columns(A, -nus), lambda X: transport_columns(X, nus)
    if model.kind == "real":
        nus = model.shifts
        return forward_real(A, -nus), lambda X: forward_real(X, nus)
    c = VelocityField(model.speeds) if model.speeds is not None else _velocity(cfg, A.shape[0])
    nus = model.shifts
    return forward_varspeed(A, c, -nus), lambda X: forward_varspeed(X, c, nus)


def _model_shape_check(model, A: np.ndarray):
    if isinstance(model, ReversalModel):
        shape = (model.n_cells, model.n_snaps)
    else:
        shape = (A.shape[0] if model.speeds is None else model.speeds.size, model.shifts.size)
    if shape != A.shape:
        raise UsageError(f"model shape {shape} does not match snapshots {A.shape}")


def cmd_compare(cfg: ExperimentConfig, args) -> int:
    snaps = read_snapshots(args.snapshots)
    model = read_model(args.model)
    A = snaps.data
    _model_shape_check(model, A)
    crit = _criterion(cfg, args)
    Ar, forward = _reversed_and_forward(model, A, cfg)
    red_r = reduce(Ar, **crit)
    red_p = reduce(A, rank=red_r.rank)
    rec_r = forward(red_r.reconstruct())
    rec_p = red_p.reconstruct()
    n = A.shape[0]
    err_r = np.linalg.norm(rec_r - A, axis=0) / np.sqrt(n)
    err_p = np.linalg.norm(rec_p - A, axis=0) / np.sqrt(n)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(args.snapshots)
    write_snapshots(out / f"{stem}.reversal_reconstruction.txt", SnapshotMatrix(rec_r, snaps.times))
    write_snapshots(out / f"{stem}.pod_reconstruction.txt", SnapshotMatrix(rec_p, snaps.times))
    _write_csv(out / f"{stem}.compare.csv", ["snapshot_index", "time", "err_reversal", "err_pod"],
               [(j, t, a, b) for j, (t, a, b) in enumerate(zip(snaps.times, err_r, err_p))])
    _write_csv(out / f"{stem}.singular_values.csv", ["mode_index", "sigma_reversed", "sigma_plain"],
               [(i + 1, a, b) for i, (a, b) in enumerate(zip(red_r.singular_values, red_p.singular_values))])
    log.info("rank %d: reversal error %.6e, POD error %.6e", red_r.rank,
             l2_error(rec_r, A, "time_space"), l2_error(rec_p, A, "time_space"))
    return EXIT_OK


def cmd_sharpen(cfg: ExperimentConfig, args) -> int:
    snaps = read_snapshots(args.snapshots)
    model = read_model(args.model)
    if not isinstance(model, ShiftModel) or model.kind != "real":
        raise UsageError("sharpening needs a real-shift model")
    A = snaps.data
    _model_shape_check(model, A)
    crit = _criterion(cfg, args)
    Ar = forward_real(A, -model.shifts)
    low = reduce(Ar, **crit).reconstruct()
    bv = model.boundary_values if model.boundary_values is not None else np.column_stack([A[0], A[-1]])
    sharp = sharpened_reconstruct(low, model.shifts, bv)
    plain = forward_real(low, model.shifts)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = _stem(args.snapshots)
    write_snapshots(out / f"{stem}.sharpened.txt", SnapshotMatrix(sharp, snaps.times))
    n = A.shape[0]
    _write_csv(out / f"{stem}.sharpen.csv", ["snapshot_index", "time", "err_plain", "err_sharpened"],
               [(j, t, a, b) for j, (t, a, b) in enumerate(zip(
                   snaps.times,
                   np.linalg.norm(plain - A, axis=0) / np.sqrt(n),
                   np.linalg.norm(sharp - A, axis=0) / np.sqrt(n)))])
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    def global_flags(parser, suppress):
        # subcommands accept the same flags; SUPPRESS keeps them from
        # resetting values given before the subcommand name
        kw = {"default": argparse.SUPPRESS} if suppress else {}
        parser.add_argument("--config", help="JSON experiment configuration", **kw)
        parser.add_argument("--out", help="output directory (overrides the config)", **kw)
        parser.add_argument("--quiet", action="store_true", help="only report errors", **kw)
        parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                            help="override a config value, e.g. spec.n_cells=50", **kw)
        return parser

    common = global_flags(argparse.ArgumentParser(add_help=False), suppress=True)
    p = global_flags(_Parser(prog="transport-reversal", description=__doc__.splitlines()[0]), suppress=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="solve a test problem and write snapshot files")
    g.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    g.add_argument("--characteristic", action="store_true", help="also write r1/r2 for acoustic problems")
    g.add_argument("--chebyshev", action="store_true", help="sample at Chebyshev times instead of uniform ones")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reverse", parents=[common], help="compute shift numbers and write a model file")
    r.add_argument("snapshots")
    r.add_argument("--method", choices=["greedy", "real", "varspeed"])
    r.add_argument("--iterations", type=int, help="greedy iteration count K")
    r.add_argument("--gamma", type=float, help="pivot trigger for varspeed")
    r.set_defaults(func=cmd_reverse)

    for name, func, needs_model, text in (
        ("pod", cmd_pod, False, "truncated SVD of a snapshot file"),
        ("compare", cmd_compare, True, "reversal-POD vs plain POD error per snapshot"),
        ("sharpen", cmd_sharpen, True, "sharpened reconstruction from a real-shift model"),
    ):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("snapshots")
        if needs_model:
            s.add_argument("model")
        crit = s.add_mutually_exclusive_group()
        crit.add_argument("--rank", type=int)
        crit.add_argument("--energy", type=float, help="tail energy tolerance in (0, 1)")
        s.set_defaults(func=func)
    return p


def _configure_threads() -> None:
    raw = os.environ.get("TRANSPORT_REVERSAL_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError as exc:
        raise UsageError(f"TRANSPORT_REVERSAL_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise UsageError("TRANSPORT_REVERSAL_THREADS must be non-negative")


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            cfg = ExperimentConfig.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from exc
    for s in args.set or []:
        cfg = cfg.with_override(s)
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", force=True)
    try:
        _configure_threads()
        cfg = load_config(args)
        np.random.seed(cfg.seed)
        return args.func(cfg, args)
    except UsageError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (FormatError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (ConstantVectorError, CFLError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
