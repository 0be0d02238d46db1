"""Break the stability of a pinned map at a rational vertex and report the
perturbation size, the new rotation vector and its certified orbit."""

import argparse
import json
from fractions import Fraction

from rotaset.geometry import convex_hull
from rotaset.perturbation import destabilize
from rotaset.torus_maps import pinned


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p1", type=int, default=1)
    ap.add_argument("--q", type=int, default=2)
    ap.add_argument("-o", "--output", default=None)
    a = ap.parse_args()
    vertex = (Fraction(a.p1, a.q), 0)
    L = pinned(0, a.p1, a.q)
    D = destabilize(L, convex_hull([(0, 0), vertex]), vertex)
    out = D.to_json()
    print(f"vertex {a.p1}/{a.q}: moved by {D.perturbation_size:.4f} (budget {D.budget:.4f}), "
          f"new vector {D.new_vector}, period {len(D.certified_orbit)}, residual {D.residual:.1e}")
    if a.output:
        with open(a.output, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
