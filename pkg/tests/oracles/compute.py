"""Independent reference values, frozen into ``frozen.json``.

Nothing here imports the package.  Face masses come from mpmath quadrature
(or closed forms), chain laws from birth-death products or dense
eigenvectors, form values from mpmath on explicit formulas.

Run ``python3 tests/oracles/compute.py`` to regenerate.
"""
import json
from pathlib import Path

import mpmath as mp
import numpy as np

mp.mp.dps = 20


def V(r, a=1.0, c=0.0):
    return a * r * r / 2 + c * r ** 4 / 4


def masses_n1(s, a=1.0, c=0.0):
    # H(phi) = 2 V(phi) for a single site between two zero walls
    wet = mp.quad(lambda x: mp.e ** (-2 * V(x, a, c)), [0, mp.inf])
    un = [s * mp.e ** (-2 * V(0, a, c)), wet]
    tot = sum(un)
    return [float(u) for u in un], [float(u / tot) for u in un]


def masses_n2(s, a=1.0, c=0.0):
    # H = V(x) + V(x - y) + V(y) on a two-site chain
    H = lambda x, y: V(x, a, c) + V(x - y, a, c) + V(y, a, c)
    z0 = s * s * mp.e ** (-H(0, 0))
    z1 = s * mp.quad(lambda x: mp.e ** (-H(x, 0)), [0, mp.inf])
    z12 = mp.quad(lambda x, y: mp.e ** (-H(x, y)), [0, mp.inf], [0, mp.inf])
    un = [z0, z1, z1, z12]
    tot = sum(un)
    return [float(u) for u in un], [float(u / tot) for u in un]


def masses_n3_gaussian(s):
    # H = (x^2 + (x-y)^2 + (y-z)^2 + z^2)/2; faces with scipy's nquad
    from scipy.integrate import nquad
    H = lambda x, y, z: (x * x + (x - y) ** 2 + (y - z) ** 2 + z * z) / 2
    vals = {}
    for mask in range(8):
        wet = [(mask >> j) & 1 for j in range(3)]
        k = sum(wet)

        def f(*u, wet=wet):
            it = iter(u)
            x = [next(it) if w else 0.0 for w in wet]
            return np.exp(-H(*x))
        if k == 0:
            integral = f()
        else:
            integral = nquad(f, [[0, np.inf]] * k, opts={"epsabs": 1e-13, "epsrel": 1e-11})[0]
        vals[mask] = s ** (3 - k) * integral
    tot = sum(vals.values())
    return [float(vals[m] / tot) for m in range(8)]


def chain_n1(h, s, L, a=1.0, zero_drift=False):
    """Birth-death product formula for the single-site chain."""
    K = int(round(L / h))
    b = lambda k: 0.0 if zero_drift else -2 * a * k * h
    up = lambda k: h / (2 * s) if k == 0 else (0.0 if k == K else 0.5 * (1 + h * b(k) / 2))
    down = lambda k: 0.0 if k == 0 else (1.0 if k == K else 1 - up(k))
    w = [mp.mpf(1)]
    for k in range(K):
        w.append(w[-1] * up(k) / down(k + 1))
    tot = sum(w)
    return [float(x / tot) for x in w]


def chain_n2_dense(h, s, L, a=1.0):
    """Dense eigenvector of the synchronous two-site chain."""
    K = int(round(L / h))
    S = (K + 1) ** 2
    P = np.zeros((S, S))
    for i in range(K + 1):
        for j in range(K + 1):
            x, y = i * h, j * h
            bx = -a * (x + (x - y))
            by = -a * (y + (y - x))
            moves = []
            for k, bk in ((i, bx), (j, by)):
                if k == 0:
                    moves.append([(1, h / (2 * s)), (0, 1 - h / (2 * s))])
                elif k == K:
                    moves.append([(K - 1, 1.0)])
                else:
                    p = 0.5 * (1 + h * bk / 2)
                    moves.append([(k + 1, p), (k - 1, 1 - p)])
            for ni, pi in moves[0]:
                for nj, pj in moves[1]:
                    P[i * (K + 1) + j, ni * (K + 1) + nj] += pi * pj
    w, v = np.linalg.eig(P.T)
    pi = np.real(v[:, np.argmin(np.abs(w - 1))])
    pi /= pi.sum()
    grid = pi.reshape(K + 1, K + 1)
    faces = [grid[0, 0], grid[1:, 0].sum(), grid[0, 1:].sum(), grid[1:, 1:].sum()]
    return [float(f) for f in faces]


def bump(u, c, R):
    v = (u - c) / R
    return (1 - v * v) ** 3 if abs(v) < 1 else mp.mpf(0)


def form_n1(s, fpar, gpar):
    """E(f, g) and <nu_f, g> for bumps on one site, gaussian a=1 (H = phi^2)."""
    f = lambda u: bump(u, *fpar)
    g = lambda u: bump(u, *gpar)
    df = lambda u: mp.diff(f, u)
    dg = lambda u: mp.diff(g, u)
    d2f = lambda u: mp.diff(f, u, 2)
    Z = s + mp.sqrt(mp.pi) / 2
    top = min(fpar[0] + fpar[1], gpar[0] + gpar[1])
    pts = sorted({0, top, *[t for t in (fpar[0], gpar[0], fpar[0] - fpar[1], gpar[0] - gpar[1])
                            if 0 < t < top]})
    E = mp.quad(lambda u: df(u) * dg(u) * mp.e ** (-u * u), pts) / Z
    nu = mp.quad(lambda u: (-d2f(u) + 2 * u * df(u)) * g(u) * mp.e ** (-u * u), pts) / Z
    nu += -(1 / mp.mpf(s)) * df(0) * g(0) * s / Z
    return float(E), float(nu)


def main():
    out = {}
    out["masses_n1_s1"] = masses_n1(1.0)
    out["masses_n1_s0.3_quartic"] = masses_n1(0.3, 0.5, 1.0)
    out["masses_n2_s0.5"] = masses_n2(0.5)
    out["masses_n2_s0.7_quartic"] = masses_n2(0.7, 1.0, 0.5)
    out["masses_n3_s0.8"] = masses_n3_gaussian(0.8)
    out["chain_n1_corner"] = {str(h): chain_n1(h, 1.0, 4.0)[0] for h in (0.2, 0.1, 0.05, 0.025)}
    out["chain_n1_zero_drift_h0.2_L1"] = chain_n1(0.2, 1.0, 1.0, zero_drift=True)
    out["chain_n2_h0.25_L2_s0.5"] = chain_n2_dense(0.25, 0.5, 2.0)
    out["form_n1_s1"] = {
        "bump(0.3,1.2)|bump(0.8,1.0)": form_n1(1.0, (0.3, 1.2), (0.8, 1.0)),
        "bump(0.0,1.5)|bump(0.3,1.2)": form_n1(1.0, (0.0, 1.5), (0.3, 1.2)),
    }
    path = Path(__file__).with_name("frozen.json")
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
