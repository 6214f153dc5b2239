"""Graph size and build time across cutoff and neighbor-cap settings.

Sweeps the radius-graph knobs on random periodic slabs, with and without
tag-0 rewiring, and prints mean edge counts, mean in-degree and build time.

    python scripts/cutoff_sweep.py --atoms 60 --systems 5
"""

import argparse
import itertools
import time

import numpy as np

from geocano.graph import build_radius_graph, rewire_remove_tag0
from geocano.system import random_system


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--atoms", type=int, default=60)
    p.add_argument("--systems", type=int, default=5)
    p.add_argument("--box", type=float, default=12.0)
    p.add_argument("--cutoffs", type=float, nargs="+", default=[3.0, 6.0, 10.0, 20.0])
    p.add_argument("--caps", nargs="+", default=["10", "20", "40", "none"])
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    slabs = [random_system(rng, args.atoms, box=args.box, periodic=True, tags=True) for _ in range(args.systems)]
    rewired = [rewire_remove_tag0(s)[0] for s in slabs]
    caps = [None if c == "none" else int(c) for c in args.caps]

    print(f"{'atoms':<9} {'cutoff':>7} {'cap':>6} {'edges':>10} {'in-degree':>10} {'ms/graph':>9}")
    for label, systems in (("all", slabs), ("no tag-0", rewired)):
        for cutoff, cap in itertools.product(args.cutoffs, caps):
            edges, degree, elapsed = [], [], 0.0
            for s in systems:
                t0 = time.perf_counter()
                g = build_radius_graph(s, cutoff, cap)
                elapsed += time.perf_counter() - t0
                edges.append(g.edge_count)
                degree.append(g.in_degree().mean())
            print(f"{label:<9} {cutoff:7.1f} {str(cap):>6} {np.mean(edges):10.1f} {np.mean(degree):10.2f} "
                  f"{1000 * elapsed / len(systems):9.2f}")


if __name__ == "__main__":
    main()
