"""Deviation traces on both sides of stability: pseudo-orbits of a stable
pinned map against its probed polygon, and a translation under
direction-locked noise. Writes CSV traces and an SVG of both."""

import argparse
import math
from pathlib import Path

import numpy as np

from rotaset.deviations import deviation_constant, max_deviation, max_deviations
from rotaset.geometry import convex_hull
from rotaset.perturbation import probe_stability
from rotaset.plotting import traces_svg
from rotaset.torus_maps import osc, pinned, translation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--trajectories", type=int, default=200)
    ap.add_argument("--n-max", type=int, default=100_000)
    ap.add_argument("--outdir", default="deviation_out")
    a = ap.parse_args()
    out = Path(a.outdir)
    out.mkdir(exist_ok=True)

    L = pinned(0, 1, 2)
    V = probe_stability(L, a.delta, 1 / 128, seed=1)
    C = deviation_constant(osc(L).certified_bound, a.delta, "pseudo")
    X0 = np.random.default_rng(0).random((a.trajectories, 2))
    R = max_deviations(L, V.outer, X0, a.n_max, delta=a.delta / 2, noise_seed=1, bound=C)
    worst = max(R, key=lambda r: r.max_deviation)
    worst.write_csv(out / "pinned.csv")
    print(f"pinned: verdict {V.verdict}, worst deviation {worst.max_deviation:.4f} vs C = {C:.1f}")

    Ct = deviation_constant(0.0, a.delta, "pseudo")
    n = math.ceil(2 * Ct / a.delta)
    T = max_deviation(translation(0.3, 0.1), convex_hull([(0.3, 0.1)]), (0, 0), n, delta=a.delta,
                      noise="direction", bound=Ct)
    T.write_csv(out / "translation.csv")
    print(f"translation: deviation {T.deviation[-1]:.1f} at n = {n} vs C = {Ct:.1f}")

    (out / "traces.svg").write_text(traces_svg([("pinned (worst)", worst.n, worst.deviation),
                                                ("translation", T.n, T.deviation)], Ct))


if __name__ == "__main__":
    main()
