"""Brute-force reference for the discrete collision operators.

Plain Python loops over ordered index tuples: no symmetry folding, no
caching, kernels rebuilt from the raw parameters (Gamma from |k|^2 / w'(|k|)).
Cell rates come from evaluating the weak form against the piecewise-linear
"hat" basis on the node list [0, reps..., omega_max], which is what a
first-moment-preserving two-node split amounts to.
"""

import numpy as np


class RawKernels:
    def __init__(self, theta, c_omega, varpi1, varpi2, varpi3, gamma,
                 cP=1.0, cR=1.0, cQ=1.0, c12=1.0, c22=1.0, c31=1.0, include_ro=True):
        self.theta, self.c_omega = theta, c_omega
        self.varpi1, self.varpi2, self.varpi3 = varpi1, varpi2, varpi3
        self.gamma = gamma
        self.cP, self.cR, self.cQ = cP, cR, cQ
        self.c12, self.c22, self.c31 = c12, c22, c31
        self.include_ro = include_ro

    @classmethod
    def from_model(cls, model, include_ro=True):
        d, e, c = model.dispersion, model.exponents, model.couplings
        return cls(d.theta, d.c_omega, e.varpi1, e.varpi2, e.varpi3, e.gamma,
                   e.cP, e.cR, e.cQ, c.c12, c.c22, c.c31, include_ro)

    def k(self, w):
        return (w / self.c_omega) ** self.theta

    def Gamma(self, w):
        k = self.k(w)
        dwdk = self.c_omega / self.theta * k ** (1.0 / self.theta - 1.0)
        return k * k / dwdk

    def barP(self, w):
        return self.cP * w ** (1.0 + self.varpi1)

    def barQ(self, w):
        return self.cQ * w ** (1.0 + self.varpi3)

    def barR(self, w):
        return self.cR * w ** (1.0 + self.varpi2)

    def P(self, w):
        return 0.0 if w <= 0 else self.Gamma(w) * self.barP(w)

    def Q(self, w):
        return 0.0 if w <= 0 else self.Gamma(w) * self.barQ(w)

    def R(self, w):
        return 0.0 if w <= 0 else self.Gamma(w) * self.barR(w) / self.k(w)

    def Ro(self, *ws):
        return max(ws) ** self.gamma if self.include_ro else 1.0


def weak_form(reps, masses, kern, Xi, ops=("c12", "c22", "c31")):
    """d/dt <F, Xi> for the discrete measure sum_i masses[i] delta(reps[i])."""
    r = [float(x) for x in reps]
    F = [float(x) for x in masses]
    n = len(r)
    total = {op: 0.0 for op in ops}
    if "c12" in ops:
        s = 0.0
        for a in range(n):
            for b in range(n):
                w1, w2 = r[a], r[b]
                V = kern.barP(w1) * kern.barP(w2) * kern.P(w1 + w2)
                s += kern.c12 * F[a] * F[b] * V * (Xi(w1 + w2) - Xi(w1) - Xi(w2))
                if w1 >= w2:
                    V = kern.barP(w1) * kern.barP(w2) * kern.P(w1 - w2)
                    s -= 2 * kern.c12 * F[a] * F[b] * V * (Xi(w1) - Xi(w1 - w2) - Xi(w2))
        total["c12"] = s
    if "c22" in ops:
        s = 0.0
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    w, w1, w2 = r[a], r[b], r[c]
                    w3 = (w + w1) - w2
                    if w3 < 0:
                        continue
                    kmin = min(kern.k(w), kern.k(w1), kern.k(w2), kern.k(w3))
                    V = (kern.R(w3) * kern.barR(w) * kern.barR(w1) * kern.barR(w2)
                         * kmin / (kern.k(w) * kern.k(w1) * kern.k(w2))
                         * kern.Ro(w, w1, w2, w3))
                    s += kern.c22 * V * F[a] * F[b] * F[c] * (
                        -Xi(w) - Xi(w1) + Xi(w2) + Xi(w3))
        total["c22"] = s
    if "c31" in ops:
        s = 0.0
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    w1, w2, w3 = r[a], r[b], r[c]
                    FFF = F[a] * F[b] * F[c]
                    Bq = kern.barQ(w1) * kern.barQ(w2) * kern.barQ(w3)
                    tot = (w1 + w2) + w3
                    s += kern.c31 * Bq * kern.Q(tot) * FFF * (
                        Xi(tot) - Xi(w1) - Xi(w2) - Xi(w3))
                    d = (w1 - w2) - w3
                    if d >= 0:
                        s -= 3 * kern.c31 * Bq * kern.Q(d) * FFF * (
                            Xi(w1) - Xi(d) - Xi(w2) - Xi(w3))
        total["c31"] = s
    return total


def nodal_rates(reps, masses, omega_max, kern, ops=("c12", "c22", "c31")):
    """Rates on nodes [condensate, cells..., overflow] plus overflow energy rate."""
    nodes = [0.0] + [float(x) for x in reps] + [float(omega_max)]
    n_nodes = len(nodes)

    last = n_nodes - 1

    def hat(k):
        def f(w):
            if w > omega_max:
                return 1.0 if k == last else 0.0
            if w == nodes[k]:
                return 1.0
            if k > 0 and nodes[k - 1] < w < nodes[k]:
                return (w - nodes[k - 1]) / (nodes[k] - nodes[k - 1])
            if k < last and nodes[k] < w < nodes[k + 1]:
                return (nodes[k + 1] - w) / (nodes[k + 1] - nodes[k])
            return 0.0
        return f

    def ovf_energy(w):
        if w > omega_max:
            return w
        return omega_max * hat(n_nodes - 1)(w)

    rates = {op: np.zeros(n_nodes) for op in ops}
    for k in range(n_nodes):
        res = weak_form(reps, masses, kern, hat(k), ops)
        for op in ops:
            rates[op][k] = res[op]
    energy = weak_form(reps, masses, kern, ovf_energy, ops)
    return rates, energy
