"""Yoshimura cell scalings over delta and the quotient Q_eps with delta = eps^(2/3)."""
import argparse
from pathlib import Path

from cylbuckle import io as vio, yoshimura as yo


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--deltas", default="0.125,0.0625,0.03125")
    ap.add_argument("--eps", default="1e-2,1e-3,3e-4")
    ap.add_argument("--n-max", type=int, default=4096, help="node cap per cell; 4096 needs about 1.4 GB")
    ap.add_argument("--out", type=Path, default=Path("runs/yoshimura"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = yo.scaling_report(vio.parse_float_list(args.deltas))
    vio.write_csv(args.out / "scaling.csv", ("delta", "int_wx2", "int_dw2", "int_dphi2", "slope_dw2", "slope_dphi2"),
                  [(r.delta, r.int_wx2, r.int_dw2, r.int_dphi2, r.slope_dw2, r.slope_dphi2) for r in rows])
    q = yo.q_epsilon(vio.parse_float_list(args.eps), n_max=args.n_max)
    vio.write_csv(args.out / "q_eps.csv", ("eps", "delta", "q", "q_quadratic"),
                  [(r.eps, r.delta, r.q, r.q_quadratic) for r in q])
    for r in rows:
        print(f"delta={r.delta:<8g} wx2={r.int_wx2:.5g} dw2={r.int_dw2:.5g} dphi2={r.int_dphi2:.4g} "
              f"slopes {r.slope_dw2:.3f} {r.slope_dphi2:.3f}")
    for r in q:
        print(f"eps={r.eps:<8g} delta={r.delta:.4g} Q={r.q:.4f} Q_quadratic={r.q_quadratic:.4f}")


if __name__ == "__main__":
    main()
