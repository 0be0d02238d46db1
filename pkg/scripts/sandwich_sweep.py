"""Inner/outer pseudo-rotation polygons for the smooth families over a
range of tolerances; writes one CSV row per (family, delta, mode)."""

import argparse
import csv
import time
from dataclasses import dataclass, field

from rotaset.geometry import convex_hull, hausdorff
from rotaset.torus_maps import coupled_shear, map_to_config, shear, translation
from rotaset.transition_graph import build_graph, outer_slack, pseudo_rotation_set


@dataclass
class SweepConfig:
    grid: int = 128
    deltas: tuple = (0.1, 0.05, 0.025)
    families: dict = field(default_factory=lambda: {
        "translation": translation(0.3, 0.1),
        "shear": shear(0.3),
        "coupled_shear": coupled_shear(0.3, 0.2),
    })


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=128)
    ap.add_argument("-o", "--output", default="sandwich.csv")
    a = ap.parse_args()
    cfg = SweepConfig(grid=a.grid)
    point = convex_hull([(0.3, 0.1)])
    with open(a.output, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["family", "delta", "mode", "edges", "vertices", "max_denominator",
                     "diameter", "hausdorff_to_translation", "slack", "seconds"])
        for name, L in cfg.families.items():
            for delta in cfg.deltas:
                for mode in ("inner", "outer"):
                    t0 = time.perf_counter()
                    try:
                        G = build_graph(L, 1 / cfg.grid, delta, mode)
                    except ValueError as exc:
                        print(name, delta, mode, "skipped:", exc)
                        continue
                    P = pseudo_rotation_set(G).polygon
                    secs = time.perf_counter() - t0
                    hd = hausdorff(P, point) if name == "translation" else ""
                    wr.writerow([name, delta, mode, G.n_edges, len(P.vertices), P.max_denominator,
                                 f"{P.diameter():.6f}", hd, f"{delta + outer_slack(L, cfg.grid):.6f}",
                                 f"{secs:.2f}"])
                    fh.flush()
                    print(name, map_to_config(L)["params"], delta, mode, len(P.vertices), f"{secs:.1f}s")


if __name__ == "__main__":
    main()
