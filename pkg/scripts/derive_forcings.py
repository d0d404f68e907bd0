"""Offline symbolic derivation of the manufactured-solution forcings.

Run this to regenerate the closed forms hard-coded in
``gradetwo/manufactured.py``.  For each case the velocity comes from a
stream function (so it is divergence free by construction), the auxiliary
field is z = curl(u - alpha*lap u), and the body force is

    f = -nu*lap(u) + z x u + grad(p),   z x u = (-z*u2, z*u1).

The printed expressions use the symbols x, y, nu, alpha and are valid
Python over math functions.
"""

import sympy as sy

x, y, nu, alpha = sy.symbols("x y nu alpha", real=True)
pi = sy.pi


def derive(name, psi, p):
    u1 = sy.diff(psi, y)
    u2 = -sy.diff(psi, x)
    assert sy.simplify(sy.diff(u1, x) + sy.diff(u2, y)) == 0
    lap_u1 = sy.diff(u1, x, 2) + sy.diff(u1, y, 2)
    lap_u2 = sy.diff(u2, x, 2) + sy.diff(u2, y, 2)
    w1 = u1 - alpha * lap_u1
    w2 = u2 - alpha * lap_u2
    z = sy.diff(w2, x) - sy.diff(w1, y)
    f1 = -nu * lap_u1 - z * u2 + sy.diff(p, x)
    f2 = -nu * lap_u2 + z * u1 + sy.diff(p, y)
    curl_f = sy.diff(f2, x) - sy.diff(f1, y)
    fields = {
        "u1": u1, "u2": u2,
        "du1dx": sy.diff(u1, x), "du1dy": sy.diff(u1, y),
        "du2dx": sy.diff(u2, x), "du2dy": sy.diff(u2, y),
        "lap_u1": lap_u1, "lap_u2": lap_u2,
        "p": p, "dpdx": sy.diff(p, x), "dpdy": sy.diff(p, y),
        "z": z, "f1": f1, "f2": f2, "curl_f": curl_f,
    }
    print(f"# ---- case {name} ----")
    for key, expr in fields.items():
        code = sy.pycode(sy.simplify(sy.expand(expr)))
        print(f"{name}_{key} = lambda x, y, nu, alpha: {code}")
    print()


derive("trig",
       psi=sy.sin(pi * x) * sy.sin(pi * y) / pi
       - sy.cos(pi * x) * sy.cos(pi * y) / pi**2 + y,
       p=sy.sin(pi * x) * sy.cos(pi * y))

derive("poly",
       psi=x**2 * (1 - x)**2 * y**2 * (1 - y)**2,
       p=x**3 + y**3 - sy.Rational(1, 2))
