"""Distance of the grade-two solution to its alpha=0 limit for shrinking
alpha, on smooth tangential-regime data.

Usage: python scripts/run_ns_limit.py [n]
"""

import math
import sys

from gradetwo.driver import ProblemSpec, navier_stokes_limit_study
from gradetwo.meshes import unit_square_mesh


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 16
    f = lambda x, y: (0.5 * math.sin(math.pi * y),
                      0.5 * math.cos(math.pi * x))
    curl_f = lambda x, y: -0.5 * math.pi * (math.sin(math.pi * x)
                                            + math.cos(math.pi * y))
    spec = ProblemSpec(mesh=unit_square_mesh(n), nu=1.0, alpha=0.2,
                       f=f, curl_f=curl_f, fp_tol=1e-10)
    rows = navier_stokes_limit_study(
        spec, [0.2, 0.1, 0.05, 0.025, 0.0125, 0.0])
    print(f"{'alpha':>8} {'|u_a-u_0|_H1':>14} {'|z_a-z_0|_L2':>14} {'its':>4}")
    for r in rows:
        if r.failed:
            print(f"{r.alpha:>8} FAILED: {r.message}")
        else:
            print(f"{r.alpha:>8} {r.err_u_h1:>14.4e} {r.err_z_l2:>14.4e} "
                  f"{r.iterations:>4}")


if __name__ == "__main__":
    main()
