"""Continue the lambda = 1.5 mountain-pass point over a load window and fit V(lambda)."""
import argparse
import json
from pathlib import Path

from cylbuckle import continuation as co, flows, io as vio, mountain_pass as mp
from cylbuckle.grid import DomainSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam-from", type=float, default=1.0)
    ap.add_argument("--lam-to", type=float, default=1.8)
    ap.add_argument("--fold-floor", type=float, default=0.3,
                    help="lower load limit of the extra downward trace that looks for the fold")
    ap.add_argument("--half", type=float, default=50.0)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--out", type=Path, default=Path("runs/continuation"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    spec = DomainSpec(args.half, args.half, args.n, args.n)
    res = mp.run_mountain_pass(1.5, flows.find_w2(1.5, spec=spec))
    br = co.continue_branch((1.5, res.w_mp), (args.lam_from, args.lam_to))
    low = br.records[0]
    below = co.continue_branch((low.lam, low.w), (args.fold_floor, low.lam), directions=(-1,))
    rows = [(r.lam, r.level, r.x_norm_sq, int(r.is_fold_passed), "") for r in below.records[:-1] + br.records]
    vio.write_csv(args.out / "branch.csv", vio.BRANCH_COLUMNS, rows)
    fit = co.fit_v_curve(br.lambdas, br.levels)
    summary = {"near_two_exponent": co.near_two_exponent(br.lambdas, br.levels), "fit": fit.as_dict(),
               "fold_lambdas": [below.records[i].lam for i in below.folds]}
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    for lam, v, xn, fold, _ in rows:
        print(f"{lam:8.4f}  V={v:10.5g}  |w|_X^2={xn:10.5g}{'  (past fold)' if fold else ''}")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
