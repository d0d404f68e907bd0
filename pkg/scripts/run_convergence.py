"""Refinement studies for both manufactured cases and all three modes.

Usage: python scripts/run_convergence.py [nu alpha]
"""

import sys

from gradetwo.manufactured import convergence_study, manufactured_case


def show(res):
    print(f"\n== case {res.case}, mode {res.mode}, variant {res.variant} ==")
    print(f"{'n':>5} {'h':>9} {'u_L2':>11} {'u_H1':>11} "
          f"{'p_L2':>11} {'z_L2':>11} {'its':>4}")
    for r in res.rows:
        if r.failed:
            print(f"{r.n:>5} {r.h:>9.4f}  FAILED: {r.message}")
            continue
        print(f"{r.n:>5} {r.h:>9.4f} {r.err_u_l2:>11.3e} {r.err_u_h1:>11.3e} "
              f"{r.err_p_l2:>11.3e} {r.err_z_l2:>11.3e} {r.iterations:>4}")
    for (a, b), o in zip(zip(res.rows, res.rows[1:]), res.orders):
        print(f"{a.n:>3}->{b.n:<3} order   {o['err_u_l2']:>11.2f} "
              f"{o['err_u_h1']:>11.2f} {o['err_p_l2']:>11.2f} "
              f"{o['err_z_l2']:>11.2f}")


def main():
    nu = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
    alpha = float(sys.argv[2]) if len(sys.argv) > 2 else 0.1
    levels = [8, 16, 32]
    for name in ("trig", "poly"):
        case = manufactured_case(name, nu, alpha)
        for mode in ("stokes", "transport", "coupled"):
            show(convergence_study(case, levels, mode=mode))
        if name == "trig":
            show(convergence_study(case, levels, mode="coupled",
                                   variant="P_I"))


if __name__ == "__main__":
    main()
