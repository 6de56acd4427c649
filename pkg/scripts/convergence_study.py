"""Test error of the full selection + fit pipeline vs training-set size.

Runs the stochastic diffusion test bed over several seeds for each sample
budget, reports per-seed and median relative test errors, and optionally
writes a CSV. The defaults reproduce the random-variable benchmark used
in the acceptance suite (Nd = 10, No = 8, third-order interactions).
"""

import argparse
import time
import warnings

import numpy as np

from hdmrfit.basis import BasisConfig
from hdmrfit.data import split
from hdmrfit.fitting import FitConfig, fit_hdmr, relative_error
from hdmrfit.selection import SelectionConfig, glars_select
from hdmrfit.testbed import DiffusionConfig, generate_dataset


def run(args) -> list[tuple[int, int, float]]:
    cfg = DiffusionConfig(nd_nu=args.nd_nu, nd_f=args.nd_f,
                          m_x=args.mx, m_k=args.mk)
    test = generate_dataset(cfg, args.ntest, args.test_seed)
    basis = BasisConfig(lo=0.0, hi=1.0, max_order=args.no + 1)
    sel = SelectionConfig(nolars=args.nolars, ninter=args.ninter,
                          max_groups=args.max_groups)
    rows = []
    for nq in args.sizes:
        errs = []
        for seed in range(args.seeds):
            t0 = time.perf_counter()
            data = generate_dataset(cfg, nq, seed)
            ntr = nq * 4 // 5
            train, val, _ = split(data, ntr, nq - ntr, 0, seed)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                path = glars_select(train, sel, basis)
                model, diag = fit_hdmr(
                    train, val, path,
                    FitConfig(no=args.no, npc=args.npc, ninter=args.ninter,
                              seed=seed), basis)
            eps = relative_error(model, test)
            errs.append(eps)
            rows.append((nq, seed, eps))
            print(f"nq {nq:5d} seed {seed}: eps {eps:.4e}  "
                  f"kept {diag.retained:3d}  {time.perf_counter() - t0:5.1f}s",
                  flush=True)
        print(f"nq {nq:5d} median eps {np.median(errs):.4e}")
    return rows


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="500,1000,3000",
                    help="comma-separated training budgets")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--nd-nu", type=int, default=5)
    ap.add_argument("--nd-f", type=int, default=5)
    ap.add_argument("--no", type=int, default=8)
    ap.add_argument("--nolars", type=int, default=4)
    ap.add_argument("--ninter", type=int, default=3)
    ap.add_argument("--npc", type=int, default=3)
    ap.add_argument("--max-groups", type=int, default=64)
    ap.add_argument("--mx", type=int, default=64)
    ap.add_argument("--mk", type=int, default=400)
    ap.add_argument("--ntest", type=int, default=10000)
    ap.add_argument("--test-seed", type=int, default=301)
    ap.add_argument("--out", default=None, help="optional CSV path")
    args = ap.parse_args(argv)
    args.sizes = [int(s) for s in args.sizes.split(",")]

    rows = run(args)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("nq,seed,eps\n")
            for nq, seed, eps in rows:
                fh.write(f"{nq},{seed},{float(eps)!r}\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
