"""Mountain-pass point at lambda = 1.5 on (-50,50)^2 with n = 128, plus the two-sided escape test."""
import argparse
import time
from pathlib import Path

from cylbuckle import energy as en, flows, io as vio, mountain_pass as mp
from cylbuckle.grid import DomainSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.5)
    ap.add_argument("--half", type=float, default=50.0)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--out", type=Path, default=Path("runs/anchor"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    spec = DomainSpec(args.half, args.half, args.n, args.n)
    t0 = time.perf_counter()
    w2 = flows.find_w2(args.lam, spec=spec)
    res = mp.run_mountain_pass(args.lam, w2)
    t_mp = time.perf_counter() - t0
    rep = mp.verify_mountain_pass(res, args.lam)
    b = en.breakdown(res.w_mp, args.lam)
    snap = args.out / "w_mp.fld"
    vio.write_snapshot(snap, res.w_mp, args.lam)
    vio.write_metadata(snap, "run_mp_anchor", vars(args), level=res.level_c, grad_norm=res.grad_norm,
                       breakdown=b.as_dict(), verify=rep, localization=mp.localization_ratio(res.w_mp),
                       timings={"mp_s": t_mp, "total_s": time.perf_counter() - t0})
    print(f"V({args.lam}) = {res.level_c:.8g}  |g|_X = {res.grad_norm:.2e}  iterations = {res.iterations}")
    print(f"escape: minus side {rep.minus_outcome}, plus side {rep.plus_outcome}; eigenvalue {rep.eigenvalue:.4g}")


if __name__ == "__main__":
    main()
