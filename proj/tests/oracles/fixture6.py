"""Exact rational evaluation of the 6-unit fixture used by the estimator tests.

Nuisance values are literal tables; nothing here shares code with the C++ library.
Run: python3 tests/oracles/fixture6.py [--json]
"""
from fractions import Fraction as F

# (group, delta_y, mu0, pi_a); treated rows carry a dose index into the cross tables
units = [
    (0, F(3, 2), F(1), F(3, 10)),
    (0, F(-1, 2), F(1, 5), F(3, 5)),
    (0, F(2), F(5, 2), F(9, 20)),
    (1, F(-3), F(4, 5), F(7, 10)),
    (1, F(-11, 2), F(11, 10), F(11, 20)),
    (1, F(-1), F(2, 5), F(4, 5)),
]
# mu1[i][j] = mu1(X_j, D_i) for treated i, j (0-based within treated)
mu1 = [
    [F(-2), F(-5, 2), F(-3, 2)],
    [F(-4), F(-9, 2), F(-7, 2)],
    [F(-1), F(-3, 2), F(-1, 2)],
]
# pid[i][j] = pi_D(X_j, D_i)
pid = [
    [F(2, 5), F(1, 4), F(1, 2)],
    [F(1, 5), F(3, 10), F(1, 10)],
    [F(3, 10), F(1, 5), F(2, 5)],
]

n = len(units)
treated = [k for k, u in enumerate(units) if u[0] == 1]
n1 = len(treated)
p = F(n1, n)

tau = []
for a, dy, mu0, pa in units:
    t = (1 - a) * pa * (dy - mu0) / (p * (1 - pa)) + a * mu0 / p
    tau.append(t)

xi = []
m_at = []
p_at = []
for i, k in enumerate(treated):
    m = sum(mu1[i]) / n1
    pd = sum(pid[i]) / n1
    dy = units[k][1]
    x = (dy - mu1[i][i]) * pd / pid[i][i] + m
    xi.append(x)
    m_at.append(m)
    p_at.append(pd)

att = sum((units[k][0] / p) * units[k][1] - tau[k] for k in range(n)) / n
adutt = (sum(xi) / p - sum(tau)) / n  # sum_i [A_i/P xi_i - tau_i] / n

def show(name, vals):
    print(name, ", ".join(f"{float(v):.17g}" for v in vals))


if __name__ == "__main__":
    import json, sys
    if "--json" in sys.argv:
        fl = lambda vs: [float(v) for v in vs]
        json.dump({
            "units": [{"group": a, "dy": float(dy), "mu0": float(m0), "pi_a": float(pa)} for a, dy, m0, pa in units],
            "mu1": [fl(r) for r in mu1],
            "pid": [fl(r) for r in pid],
            "expected": {"tau": fl(tau), "xi": fl(xi), "m": fl(m_at), "pd": fl(p_at),
                         "att": float(att), "adutt": float(adutt), "reda": float((att - adutt) / att)},
        }, sys.stdout, indent=1)
        print()
    else:
        show("tau", tau)
        show("xi", xi)
        show("m", m_at)
        show("pd", p_at)
        show("att", [att])
        show("adutt", [adutt])
        show("reda", [(att - adutt) / att])
