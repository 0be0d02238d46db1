"""Command-line front end.

Exit codes: 0 on success, 1 for computation errors (a JSON object on
stderr), 2 for usage errors. Outputs are deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import config
from .deviations import NOISE_MODES, deviation_constant, max_deviations
from .estimation import lebesgue_rotation_vector, orbit_estimates, orbit_hull_estimate, write_birkhoff_csv
from .geometry import ConvexRationalPolygon, RationalVec2
from .perturbation import destabilize, probe_stability
from .plotting import polygons_svg, traces_svg
from .torus_maps import load_map_config, map_to_config, osc, verify_lift
from .transition_graph import MODES, NoCycleError, build_graph, pseudo_rotation_set


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    map_path: str | None
    params: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    norm: str = "euclidean"
    threads: int | None = None
    output: str | None = None

    def provenance(self) -> dict:
        d = asdict(self)
        d.pop("threads")
        d.pop("output")
        return d

    def child_seed(self, index: int) -> int:
        """Independent integer seed for sub-computation ``index``."""
        ss = np.random.SeedSequence(self.seed).spawn(index + 1)[index]
        return int(ss.generate_state(1, dtype=np.uint32)[0])


def _positive(name, x):
    if not x > 0:
        raise UsageError(f"--{name} must be positive")


def _grid_step(N: int) -> float:
    if N < 1:
        raise UsageError("--grid must be a positive integer")
    return 1.0 / N


def _read_polygon(path: str) -> ConvexRationalPolygon:
    d = json.loads(Path(path).read_text())
    if "vertices" not in d:
        for key in ("outer", "polygon", "orbit_hull"):
            if key in d and isinstance(d[key], dict):
                d = d[key]
                break
    return ConvexRationalPolygon.from_json(d)


def _write(path: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _map_block(cfg: ExperimentConfig, L) -> dict:
    return {"map": map_to_config(L), "provenance": cfg.provenance()}


# ---------------------------------------------------------------------------
# commands


def cmd_pseudo_set(cfg: ExperimentConfig, a) -> dict:
    _positive("delta", a.delta)
    h = _grid_step(a.grid)
    L = load_map_config(a.map)
    G = build_graph(L, h, a.delta, a.mode)
    R = pseudo_rotation_set(G, budget=a.budget)
    out = R.to_json()
    out.update(_map_block(cfg, L))
    out["edges"] = G.n_edges
    if a.edges:
        G.export_edges(a.edges)
    return out


def cmd_orbit_hull(cfg: ExperimentConfig, a) -> dict:
    if a.samples < 1 or a.n < 1:
        raise UsageError("--samples and --n must be >= 1")
    L = load_map_config(a.map)
    H = orbit_hull_estimate(L, a.samples, a.n, seed=cfg.child_seed(0))
    out = H.to_json()
    out.update(_map_block(cfg, L))
    out["vectors"] = H.vectors.tolist()
    if a.csv:
        write_birkhoff_csv(a.csv, orbit_estimates(L, H.base_points, a.n))
    return out


def cmd_lebesgue(cfg: ExperimentConfig, a) -> dict:
    if a.resolution < 2:
        raise UsageError("--resolution must be >= 2")
    L = load_map_config(a.map)
    E = lebesgue_rotation_vector(L, a.resolution)
    out = {"vector": list(E.vector), "error_bound": E.error_bound, "resolution": E.resolution}
    out.update(_map_block(cfg, L))
    return out


def cmd_probe(cfg: ExperimentConfig, a) -> dict:
    _positive("delta", a.delta)
    h = _grid_step(a.grid)
    L = load_map_config(a.map)
    V = probe_stability(L, a.delta, h, samples=a.samples, orbit_length=a.orbit_length,
                        seed=cfg.child_seed(0))
    out = V.to_json()
    out.update(_map_block(cfg, L))
    return out


def cmd_perturb(cfg: ExperimentConfig, a) -> dict:
    L = load_map_config(a.map)
    P = _read_polygon(a.polygon)
    try:
        vtx = RationalVec2.of([s.strip() for s in a.vertex.split(",")])
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"--vertex must look like p1/q,p2/q: {exc}") from None
    D = destabilize(L, P, vtx, search_resolution=a.search_grid)
    out = D.to_json()
    out.update(_map_block(cfg, L))
    out["perturbed_map"] = D.lift.describe()
    return out


def cmd_deviations(cfg: ExperimentConfig, a) -> dict:
    if a.n_max < 1 or a.trajectories < 1:
        raise UsageError("--n-max and --trajectories must be >= 1")
    if a.delta < 0:
        raise UsageError("--delta must be non-negative")
    L = load_map_config(a.map)
    P = _read_polygon(a.polygon)
    kind = "pseudo" if a.delta > 0 else "orbit"
    bound = a.bound
    if bound is None and a.epsilon is not None:
        bound = deviation_constant(osc(L).certified_bound, a.epsilon, kind)
    rng = np.random.default_rng(cfg.child_seed(0))
    X0 = rng.random((a.trajectories, 2))
    R = max_deviations(L, P, X0, a.n_max, a.delta, cfg.child_seed(1), a.noise,
                       (a.direction[0], a.direction[1]), bound)
    worst = max(range(len(R)), key=lambda i: R[i].max_deviation)
    if a.csv:
        R[worst].write_csv(a.csv)
    out = R[worst].summary()
    out.update({"trajectories": len(R), "worst_trajectory": worst,
                "worst_start": X0[worst].tolist(),
                "violations": sum(r.violated for r in R)})
    out.update(_map_block(cfg, L))
    return out


def _load_plot_input(path: str):
    p = Path(path)
    if p.suffix.lower() == ".csv":
        with open(p, newline="") as fh:
            rows = list(csv.DictReader(fh))
        n = np.array([float(r["n"]) for r in rows])
        d = np.array([float(r["dev"]) for r in rows])
        b = rows[0].get("bound_C") if rows else None
        return "trace", (p.stem, n, d, float(b) if b else None)
    d = json.loads(p.read_text())
    layers, clouds = [], []
    if "vertices" in d:
        layers.append((p.stem, ConvexRationalPolygon.from_json(d).float_vertices()))
    for key in ("inner", "outer", "orbit_hull"):
        if isinstance(d.get(key), dict) and "float_vertices" in d[key]:
            layers.append((f"{p.stem}:{key}", np.array(d[key]["float_vertices"])))
    if "vectors" in d:
        clouds.append((f"{p.stem}:samples", np.array(d["vectors"])))
    if not layers and not clouds:
        raise UsageError(f"{path}: no polygon or trace found")
    return "polygons", (layers, clouds)


def cmd_plot(cfg: ExperimentConfig, a) -> dict:
    if not a.output or a.output == "-":
        raise UsageError("plot needs -o FILE.svg")
    kinds = [_load_plot_input(p) for p in a.inputs]
    if all(k == "trace" for k, _ in kinds):
        traces = [(name, n, d) for _, (name, n, d, _) in kinds]
        bounds = [b for _, (_, _, _, b) in kinds if b is not None]
        svg = traces_svg(traces, bounds[0] if bounds else None)
    elif all(k == "polygons" for k, _ in kinds):
        layers, clouds = [], []
        for _, (ly, cl) in kinds:
            layers += ly
            clouds += cl
        svg = polygons_svg(layers, clouds)
    else:
        raise UsageError("cannot mix polygon files and deviation traces in one plot")
    Path(a.output).write_text(svg)
    return {}


def cmd_verify_map(cfg: ExperimentConfig, a) -> dict:
    L = load_map_config(a.map)
    R = verify_lift(L, resolution=a.resolution, seed=cfg.child_seed(0))
    out = R.to_json()
    out.update(_map_block(cfg, L))
    return out


COMMANDS = {
    "pseudo-set": cmd_pseudo_set, "orbit-hull": cmd_orbit_hull, "lebesgue": cmd_lebesgue,
    "probe": cmd_probe, "perturb": cmd_perturb, "deviations": cmd_deviations,
    "plot": cmd_plot, "verify-map": cmd_verify_map,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for compiled kernels (default: $ROTASET_THREADS or all)")
    common.add_argument("--norm", choices=("euclidean", "sup"), default="euclidean")
    common.add_argument("-o", "--output", default=None, help="output file (default: stdout)")

    p = argparse.ArgumentParser(prog="rotaset", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("pseudo-set", parents=[common], help="pseudo-rotation polygon from a transition graph")
    s.add_argument("--map", required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--grid", type=int, default=128)
    s.add_argument("--mode", choices=MODES, default="outer")
    s.add_argument("--budget", type=int, default=4096)
    s.add_argument("--edges", default=None, help="also write the binary edge list here")

    s = sub.add_parser("orbit-hull", parents=[common], help="hull of Birkhoff vectors")
    s.add_argument("--map", required=True)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--n", type=int, default=100000)
    s.add_argument("--csv", default=None, help="also write the Birkhoff samples as CSV")

    s = sub.add_parser("lebesgue", parents=[common], help="mean displacement for Lebesgue measure")
    s.add_argument("--map", required=True)
    s.add_argument("--resolution", type=int, default=256)

    s = sub.add_parser("probe", parents=[common], help="stability verdict at tolerance delta")
    s.add_argument("--map", required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--grid", type=int, default=128)
    s.add_argument("--samples", type=int, default=64)
    s.add_argument("--orbit-length", type=int, default=20000)

    s = sub.add_parser("perturb", parents=[common], help="destabilize a rational vertex")
    s.add_argument("--map", required=True)
    s.add_argument("--polygon", required=True, help="polygon JSON (or a probe verdict)")
    s.add_argument("--vertex", required=True, help="p1/q,p2/q")
    s.add_argument("--search-grid", type=int, default=64)

    s = sub.add_parser("deviations", parents=[common], help="deviation traces against a polygon")
    s.add_argument("--map", required=True)
    s.add_argument("--polygon", required=True)
    s.add_argument("--n-max", type=int, default=100000)
    s.add_argument("--delta", type=float, default=0.0, help="noise bound per step (0: true orbits)")
    s.add_argument("--noise", choices=NOISE_MODES, default="uniform")
    s.add_argument("--direction", type=float, nargs=2, default=(1.0, 0.0))
    s.add_argument("--trajectories", type=int, default=16)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--bound", type=float, default=None, help="deviation constant to test against")
    g.add_argument("--epsilon", type=float, default=None, help="derive the constant from osc and epsilon")
    s.add_argument("--csv", default=None, help="trace of the worst trajectory")

    s = sub.add_parser("plot", parents=[common], help="SVG of polygons or deviation traces")
    s.add_argument("inputs", nargs="+")

    s = sub.add_parser("verify-map", parents=[common], help="numerical sanity checks of a map config")
    s.add_argument("--map", required=True)
    s.add_argument("--resolution", type=int, default=64)
    return p


def _set_threads(n: int | None) -> None:
    if n is None:
        env = os.environ.get("ROTASET_THREADS")
        if env is None:
            return
        try:
            n = int(env)
        except ValueError:
            raise UsageError("ROTASET_THREADS must be an integer") from None
    if n < 1:
        raise UsageError("--threads must be >= 1")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def run_command(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 on --help
        return int(exc.code or 0)
    params = {k: v for k, v in vars(a).items()
              if k not in ("command", "seed", "threads", "norm", "output", "map")}
    params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}
    cfg = ExperimentConfig(a.command, getattr(a, "map", None), params, a.seed, a.norm, a.threads, a.output)
    previous = config.get_norm()
    try:
        _set_threads(a.threads)
        config.set_norm(a.norm)
        out = COMMANDS[a.command](cfg, a)
        if a.command != "plot":
            _write(a.output, out)
        return 0
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"rotaset: error: {exc}\n")
        return 2
    except (ValueError, TypeError, NoCycleError, RuntimeError, KeyError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    finally:
        config.set_norm(previous)


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
