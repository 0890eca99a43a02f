"""V(1.5) on 50x50, 100x100, 100x200 and 200x100 half-width domains at a fixed grid spacing."""
import argparse
from pathlib import Path

from cylbuckle import continuation as co, flows, io as vio, mountain_pass as mp
from cylbuckle.grid import DomainSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.5)
    ap.add_argument("--h", type=float, default=100 / 128, help="grid spacing")
    ap.add_argument("--out", type=Path, default=Path("runs/domains"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    specs = [DomainSpec(a, b, 2 * round(a / args.h), 2 * round(b / args.h))
             for a, b in ((50, 50), (100, 100), (100, 200), (200, 100))]

    def solve(lam, spec):
        return mp.run_mountain_pass(lam, flows.find_w2(lam, spec=spec)).w_mp

    rows = co.domain_study([args.lam], specs, solve)
    vio.write_csv(args.out / "domains.csv", ("lambda", "a", "b", "nx", "ny", "level", "x_norm_sq", "d2_discrepancy"),
                  [(r.lam, r.a, r.b, r.nx, r.ny, r.level, r.x_norm_sq, r.d2_discrepancy) for r in rows])
    for r in rows:
        print(f"{r.a:g}x{r.b:g} ({r.nx}x{r.ny}): V = {r.level:.6g}, D2 discrepancy {r.d2_discrepancy:.3g}")


if __name__ == "__main__":
    main()
