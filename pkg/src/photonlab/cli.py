"""Command-line front end: compute, slice, sample and reproduce the figure data.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
4 physicality violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    MeanFieldSampler,
    conditional,
    marginal,
    p_min_rule,
    peak_point_cloud,
    sample_outcomes,
    slice_probs,
)
from .config import FIG6_Q, FIG7_Q, RunConfig, figure_presets, fraction_label, load_config, parse_detector
from .detectors import trajectory
from .engines import choose_engine, compute_joint
from .engines.distribution import grid_extent
from .errors import (
    ConfigError,
    ConvergenceError,
    ExpensiveComputation,
    PhotonlabError,
    PhysicalityError,
    UnsupportedRepresentation,
)
from .parallel import blas_limit
from .scaling import equivalence_check
from .sources import Binomial, Independent, NumberState, Poissonian, SuperPoissonian

DEGRADED_TAIL = 1e-9

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PHYSICALITY = 0, 2, 3, 4


# -- output ----------------------------------------------------------------------


def write_csv(path: Path, header, columns, int_columns):
    """Comma-separated, header row, LF endings; integers as such, floats with 17 significant digits."""
    cols = [np.asarray(c) for c in columns]
    fmt = ["%d" if i < int_columns else "%.17g" for i in range(len(cols))]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        if cols and len(cols[0]):
            np.savetxt(fh, np.column_stack(cols), fmt=fmt, delimiter=",", newline="\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else str(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def dist_meta(dist):
    m = dist.meta
    return {
        "engine": dist.engine,
        "method": m.get("method"),
        "tail_mass": m.get("tail_mass", m.get("tail_bound", 0.0)),
        "tail_bound": m.get("tail_bound", 0.0),
        "quadrature_order": m.get("quadrature_order"),
        "achieved_tolerance": m.get("achieved_tolerance"),
    }


class Run:
    """Collects outputs and sidecar facts of one command."""

    def __init__(self, command, cfg: RunConfig, out: Path):
        self.command, self.cfg, self.out = command, cfg, out
        self.start = time.perf_counter()
        self.files, self.results, self.info = [], [], {}
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, columns, int_columns):
        path = self.out / name
        write_csv(path, header, columns, int_columns)
        self.files.append(name)

    def record(self, dist, label=None):
        entry = dist_meta(dist)
        if label is not None:
            entry["label"] = label
        self.results.append(entry)

    def finish(self, stem):
        tail = max([r["tail_mass"] or 0.0 for r in self.results], default=0.0)
        degraded = tail > DEGRADED_TAIL
        side = {
            "command": self.command,
            "version": __version__,
            "outputs": self.files,
            "engine": sorted({r["engine"] for r in self.results}),
            "tolerance": self.cfg.tolerance,
            "tail_mass": tail,
            "quadrature_order": [r["quadrature_order"] for r in self.results],
            "results": self.results,
            "degraded": degraded,
            "wall_time_s": time.perf_counter() - self.start,
            "seed": self.cfg.seed,
            "labels": self.cfg.labels,
            **self.info,
            "config": self.cfg.model_dump(mode="json"),
        }
        (self.out / f"{stem}.json").write_text(json.dumps(_jsonable(side), indent=2, sort_keys=True) + "\n")
        if degraded:
            print(f"warning: tail mass {tail:.3g} exceeds {DEGRADED_TAIL:g}; run marked degraded", file=sys.stderr)


# -- computations ------------------------------------------------------------------


def _names(idx):
    return [f"n{i + 1}" for i in idx]


def _fixed(cfg: RunConfig):
    return {parse_detector(k): int(v) for k, v in cfg.fix.items()}


def _axes(cfg: RunConfig, default):
    return [parse_detector(a) for a in cfg.axes] if cfg.axes else list(default)


def _check_indices(idx, M):
    for i in idx:
        if not 0 <= i < M:
            raise ConfigError(f"detector n{i + 1} does not exist (array has {M})")


def compute(cfg: RunConfig, keep, fixed, sources=None, engine=None, grid=None):
    """Joint distribution over detectors ``keep`` with ``fixed`` counts.

    Detectors outside keep and fixed are dropped from the array, which is
    the same as summing them out.
    """
    array = cfg.array()
    sources = cfg.source_pair() if sources is None else sources
    _check_indices(list(keep) + list(fixed), len(array))
    used = sorted(set(keep) | set(fixed))
    sub = array.subset(used)
    where = {d: i for i, d in enumerate(used)}
    grid = cfg.grid if grid is None else grid
    if grid is not None and not np.isscalar(grid):
        grid = [list(grid)[d] for d in used]
    dist = compute_joint(
        sub,
        sources,
        engine=engine or cfg.engine,
        grid=grid,
        fixed={where[d]: c for d, c in fixed.items()},
        tol=cfg.tolerance,
        delta=cfg.delta,
        allow_expensive=cfg.allow_expensive,
    )
    # relabel axes with the original detector indices
    axes = tuple(used[a] for a in dist.axes)
    fx = {used[a]: c for a, c in dist.fixed.items()}
    out = type(dist)(dist.log_probs, axes, dist.engine, fx, dist.meta)
    order = [d for d in keep if d in axes]
    return marginal(out, order) if list(axes) != order else out


def _grid_columns(dist):
    mesh = np.meshgrid(*[np.arange(n) for n in dist.shape], indexing="ij")
    return [m.ravel() for m in mesh] + [dist.probs.ravel()]


def cmd_joint(cfg, run, name="joint"):
    M = len(cfg.detectors)
    dist = compute(cfg, _axes(cfg, range(M)), _fixed(cfg))
    run.record(dist)
    run.csv(f"{name}.csv", [*_names(dist.axes), "probability"], _grid_columns(dist), dist.ndim)
    return name


def cmd_marginal(cfg, run, name="marginal"):
    dist = compute(cfg, _axes(cfg, [0]), {})
    run.record(dist)
    run.csv(f"{name}.csv", [*_names(dist.axes), "probability"], _grid_columns(dist), dist.ndim)
    return name


def cmd_conditional(cfg, run, name="conditional"):
    fixed = _fixed(cfg)
    if not fixed:
        raise ConfigError("conditional needs --fix (for example --fix n1=106)")
    M = len(cfg.detectors)
    dist = conditional(compute(cfg, _axes(cfg, [m for m in range(M) if m not in fixed]), fixed))
    run.record(dist)
    run.info["normalisation"] = float(dist.total())
    run.csv(f"{name}.csv", [*_names(dist.axes), "probability"], _grid_columns(dist), dist.ndim)
    return name


def cmd_trajectory(cfg, run):
    tr = trajectory(cfg.array(), cfg.source_pair(), cfg.trajectory_points)
    run.csv(
        "trajectory.csv",
        ["delta", *_names(range(len(cfg.detectors)))],
        [tr.delta_grid, *tr.points.T],
        0,
    )
    return "trajectory"


def cmd_sample(cfg, run):
    sources = cfg.source_pair()
    engine = cfg.engine if cfg.engine != "auto" else choose_engine(sources)
    M = len(cfg.detectors)
    if engine in ("meanfield", "phase") and not cfg.fix:
        target = MeanFieldSampler(cfg.array(), sources.means(), cfg.delta if engine == "meanfield" else None)
        run.info["sampler"] = "mean-field generative"
    else:
        fixed = _fixed(cfg)
        target = compute(cfg, [m for m in range(M) if m not in fixed], fixed, engine=engine)
        if fixed:
            target = conditional(target)
        run.record(target)
        run.info["sampler"] = "sequential inverse CDF"
    draws = sample_outcomes(target, cfg.samples, cfg.seed)
    run.csv("sample.csv", _names(range(M)), list(draws.T), M)
    return "sample"


def cmd_scaling(cfg, run):
    if cfg.scaling is None:
        raise ConfigError("scaling-check needs a 'scaling': {'q': ...} entry")
    array, sources = cfg.array(), cfg.source_pair()
    fixed = _fixed(cfg)
    rep = equivalence_check(array, sources, cfg.scaling.q, cfg.engine, cfg.grid, fixed or None, cfg.tolerance)
    run.record(rep.thinned, "thinned sources, R")
    run.record(rep.rescaled, "original sources, qR")
    run.info.update({"q": fraction_label(cfg.scaling.q), "sup_norm": rep.sup_norm, "pair_engine": rep.engine})
    a, b = rep.thinned, rep.rescaled
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    pa, pb = np.zeros(shape), np.zeros(shape)
    pa[tuple(slice(0, s) for s in a.shape)] = a.probs
    pb[tuple(slice(0, s) for s in b.shape)] = b.probs
    mesh = np.meshgrid(*[np.arange(n) for n in shape], indexing="ij")
    run.csv(
        "scaling.csv",
        [*_names(a.axes), "thinned", "rescaled", "difference"],
        [m.ravel() for m in mesh] + [pa.ravel(), pb.ravel(), (pa - pb).ravel()],
        len(shape),
    )
    return "scaling"


# -- figures -------------------------------------------------------------------------


def _pad(columns):
    n = max(len(c) for c in columns)
    return [np.concatenate([c, np.zeros(n - len(c))]) for c in columns]


def figure(k, cfg, run):
    run.info["figure"] = k
    if k == 1:
        cmd_joint(cfg, run, "figure1")
    elif k == 2:
        cmd_marginal(cfg, run, "figure2")
    elif k == 3:
        cmd_conditional(cfg, run, "figure3")
    elif k == 4:
        slab = compute(cfg, [1, 2], _fixed(cfg))
        run.record(slab)
        cols = []
        values = [int(v) for v in cfg.labels.get("n2_values", "174,495").split(",")]
        for n2 in values:
            cols.append(slice_probs(conditional(slab, {1: n2})))
        run.csv(
            "figure4.csv",
            ["n3", *[f"p_given_n2_{v}" for v in values]],
            [np.arange(slab.shape[1]), *cols],
            1,
        )
    elif k == 5:
        if not cfg.allow_expensive:
            raise ExpensiveComputation("figure 5 evaluates the full three-detector grid; pass --allow-expensive")
        array, sources = cfg.array(), cfg.source_pair()
        traj = trajectory(array, sources, 512)
        pm = peak_point_cloud(array, sources, traj=traj, engine=cfg.engine, tol=cfg.tolerance, grid=cfg.grid)
        run.info.update(
            {
                "p_min": pm.p_min,
                "p_min_rule": p_min_rule.__doc__,
                "points": int(len(pm.points)),
                "coverage": pm.coverage,
                "max_distance": pm.max_distance,
                **pm.extra,
            }
        )
        run.results.append({"engine": "phase", "method": "slabs", "tail_mass": pm.extra["max_slab_tail_bound"],
                            "tail_bound": pm.extra["max_slab_tail_bound"], "quadrature_order": None})
        run.csv("figure5.csv", ["n1", "n2", "n3", "probability"], [*pm.points.T, pm.probs], 3)
    elif k == 6:
        array = cfg.array()
        fixed = _fixed(cfg)
        mean = 200
        peak = array[1].R_aa * mean + array[1].R_bb * mean + 2 * array[1].xi * math.sqrt(array[1].R_aa * array[1].R_bb) * mean
        top = grid_extent(peak)
        cols, names = [], []
        for q in FIG6_Q:
            src = NumberState(mean) if q == "1" else Binomial(q, mean)
            d = conditional(compute(cfg, [1], fixed, Independent(src, src), "fock", [top, top]))
            run.record(d, f"q={q}")
            cols.append(d.probs)
            names.append(f"q_{q.replace('/', '_')}")
        d = conditional(compute(cfg, [1], fixed, Independent(Poissonian(mean), Poissonian(mean)), "phase", [top, top]))
        run.record(d, "poissonian limit")
        cols.append(d.probs)
        names.append("poissonian")
        cols = _pad(cols)
        run.csv("figure6.csv", ["n2", *names], [np.arange(len(cols[0])), *cols], 1)
    elif k == 7:
        fixed = _fixed(cfg)
        cols, names = [], []
        for Q in FIG7_Q:
            src = SuperPoissonian(Q, 500)
            d = conditional(compute(cfg, [1], fixed, Independent(src, src), "radial"))
            run.record(d, f"Q={Q:g}")
            cols.append(d.probs)
            names.append(f"Q_{Q:g}")
        cols = _pad(cols)
        run.csv("figure7.csv", ["n2", *names], [np.arange(len(cols[0])), *cols], 1)
    else:
        raise ConfigError(f"figures are numbered 1..7, got {k}")
    return f"figure{k}"


# -- entry point ---------------------------------------------------------------------


COMMANDS = {
    "joint": cmd_joint,
    "marginal": cmd_marginal,
    "conditional": cmd_conditional,
    "trajectory": cmd_trajectory,
    "sample": cmd_sample,
    "scaling-check": cmd_scaling,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, help="seed for sampling (unsigned 64-bit)")
    common.add_argument("--engine", choices=["meanfield", "phase", "radial", "fock", "auto"])
    common.add_argument("--allow-expensive", action="store_true", help="permit full grids of large Fock or 3-D problems")
    common.add_argument("--axes", help="comma-separated detectors kept, e.g. n1,n2")
    common.add_argument("--fix", action="append", default=[], metavar="nK=COUNT", help="pin a detector count")
    common.add_argument("--count", type=int, help="number of samples")
    parser = argparse.ArgumentParser(prog="photonlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"photonlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    fig = sub.add_parser("figure", parents=[common], help="reproduce the data of a figure")
    fig.add_argument("number", type=int, choices=range(1, 8))
    return parser


def _overrides(args, cfg: RunConfig) -> RunConfig:
    upd = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        upd["seed"] = args.seed
    if args.engine:
        upd["engine"] = args.engine
    if args.allow_expensive:
        upd["allow_expensive"] = True
    if args.axes:
        upd["axes"] = [a.strip() for a in args.axes.split(",") if a.strip()]
    if args.fix:
        fix = {}
        for item in args.fix:
            name, _, value = item.partition("=")
            parse_detector(name)
            try:
                fix[name.strip()] = int(value)
            except ValueError:
                raise ConfigError(f"--fix expects nK=COUNT, got {item!r}") from None
        upd["fix"] = fix
    if args.count is not None:
        upd["samples"] = args.count
    if not upd:
        return cfg
    from .config import validate_config

    return validate_config({**cfg.model_dump(mode="json"), **upd})


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "figure":
            cfg = load_config(args.config) if args.config else figure_presets(args.number)
        else:
            if not args.config:
                raise ConfigError(f"{args.command} needs --config")
            cfg = load_config(args.config)
        cfg = _overrides(args, cfg)
        job = Run(args.command, cfg, Path(args.out))
        with blas_limit():
            if args.command == "figure":
                stem = figure(args.number, cfg, job)
            else:
                stem = COMMANDS[args.command](cfg, job)
        job.finish(stem)
    except PhysicalityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICALITY
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, ExpensiveComputation, UnsupportedRepresentation, PhotonlabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
