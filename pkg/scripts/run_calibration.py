"""Constant-alpha and constant-beta curves from a branch CSV written by run_continuation.py.

For overlaying experimental data use ``cylbuckle calibrate --experiments``.
"""
import argparse
from pathlib import Path

import numpy as np

from cylbuckle import calibrate as cal, io as vio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--branch", type=Path, default=Path("runs/continuation/branch.csv"))
    ap.add_argument("--nu", type=float, default=0.3)
    ap.add_argument("--alphas", default="0.1,1,10")
    ap.add_argument("--betas", default="1e-3,1e-2")
    ap.add_argument("--out", type=Path, default=Path("runs/calibration"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [r for r in vio.read_branch_csv(args.branch) if not r["fold_flag"]]
    lams = np.array([r["lambda"] for r in rows])
    vals = np.array([r["level"] for r in rows])
    vc = cal.VCurve.with_fit(lams, vals)
    grid = np.linspace(max(0.2, lams.min()), 1.98, 60)
    out_rows = []
    for target, plane, values in (("alpha", "Lt", args.alphas), ("beta", "Rt", args.betas)):
        for value in vio.parse_float_list(values):
            for p in cal.iso_curve(vc, args.nu, target, value, plane, grid):
                out_rows.append((p.lam, p.load_ratio, p.geom_ratio, p.target, p.value))
    vio.write_csv(args.out / "curves.csv", vio.CURVE_COLUMNS, out_rows)
    print(f"{len(out_rows)} curve points; fit {vc.fit.as_dict()}")


if __name__ == "__main__":
    main()
