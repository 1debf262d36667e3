"""W1 between the scale mixture sqrt(N/lambda)*Z (N Poisson) and N(0, 1), with the
coupling bound sqrt(2/pi)*sqrt(Var N)/E N, and the successive ratios as lambda grows 4x.

A 1/sqrt(lambda) law would give ratios near 0.5; the measured ratios sit near 0.25
because E[N/lambda] = 1 cancels the first-order term, leaving order 1/lambda.

    python3 scripts/mixture_rate.py
"""

import argparse

from randsum.bounds import mixture_vs_normal_w1_bound
from randsum.distances import numeric_w1_between_cdfs
from randsum.experiments import fit_loglog_slope
from randsum.index_models import IndexModel
from randsum.limits import LimitLaw


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lams", type=float, nargs="+", default=[4, 16, 64, 256, 1024])
    args = ap.parse_args()
    normal = LimitLaw.normal(1.0)
    prev = None
    pts = []
    for lam in args.lams:
        index = IndexModel.poisson(lam)
        w1 = numeric_w1_between_cdfs(LimitLaw.scale_mixture(1.0, index), normal, 1e-10).value
        bound = mixture_vs_normal_w1_bound(1.0, index).value
        ratio = "" if prev is None else f"  ratio {w1 / prev:.4f}"
        print(f"lambda={lam:<6g} W1={w1:.3e}  bound={bound:.3e}  lambda*W1={lam * w1:.4f}{ratio}")
        prev = w1
        pts.append((lam, w1))
    print(f"log-log slope: {fit_loglog_slope(pts)[0]:.4f}")


if __name__ == "__main__":
    main()
