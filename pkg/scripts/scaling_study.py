"""Wall-clock scaling of the selection scan and the coefficient fit.

Times the inactive-set correlation scan while the dictionary cardinality
grows with the stochastic dimension, and the coefficient evaluation for
a fixed selected set while the dimension doubles. Both loops warm up
first and report medians over repeated runs.
"""

import argparse
import time

import numpy as np

from hdmrfit.basis import BasisConfig
from hdmrfit.data import SampleSet, rng_stream
from hdmrfit.fitting import FitConfig, fit_hdmr
from hdmrfit.model import dictionary_cardinality
from hdmrfit.selection import SelectionConfig, glars_select


def synthetic(nd: int, nq: int, namespace: int) -> SampleSet:
    g = rng_stream(0, namespace, nd)
    xi = g.uniform(-1.0, 1.0, size=(nq, nd))
    u = np.sin(xi[:, 0]) + xi[:, 1] * xi[:, 2] + 0.1 * xi[:, 3]
    return SampleSet(np.empty((nq, 0)), xi, u)


def scan_seconds(nd, nq, sel, basis, repeats) -> float:
    ds = synthetic(nd, nq, 9)
    glars_select(ds, sel, basis)  # warm-up
    times = [glars_select(ds, sel, basis).scan_seconds
             for _ in range(repeats)]
    return float(np.median(times))


def coeff_seconds(nd, nq, basis, repeats) -> float:
    ds = synthetic(nd, nq, 10)
    groups = [(1,), (2,), (3,), (1, 2), (2, 3)]
    fitc = FitConfig(no=6, npc=2, ninter=2, seed=0)
    fit_hdmr(ds, None, groups, fitc, basis, retain="all")  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fit_hdmr(ds, None, groups, fitc, basis, retain="all")
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nq", type=int, default=1000)
    ap.add_argument("--nolars", type=int, default=4)
    ap.add_argument("--scan-dims", default="16,24,30,38",
                    help="dimensions for the scan timing")
    ap.add_argument("--coeff-dims", default="12,24,48",
                    help="dimensions for the coefficient timing")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args(argv)

    sel = SelectionConfig(nolars=args.nolars, ninter=3, max_groups=8)
    basis = BasisConfig(lo=-1.0, hi=1.0, max_order=args.nolars + 1)

    rows = []
    for nd in (int(s) for s in args.scan_dims.split(",")):
        card = dictionary_cardinality(nd, args.nolars, 3, 3, 1)
        sec = scan_seconds(nd, args.nq, sel, basis, args.repeats)
        rows.append(("scan", nd, card, sec))
        print(f"scan  nd {nd:3d}  dictionary {card:6d}  {sec:.4f}s",
              flush=True)
    for nd in (int(s) for s in args.coeff_dims.split(",")):
        sec = coeff_seconds(nd, args.nq, basis, args.repeats)
        rows.append(("coeff", nd, 5, sec))
        print(f"coeff nd {nd:3d}  groups 5          {sec:.4f}s", flush=True)

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("measure,nd,detail,seconds\n")
            for m, nd, detail, sec in rows:
                fh.write(f"{m},{nd},{detail},{float(sec)!r}\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
