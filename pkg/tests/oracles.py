"""Slow, independent reference implementations used to cross-check the package.

None of these import the code under test beyond plain data containers.
"""

import itertools
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog


def hand_pnl(positions, prices, c=Fraction(0)):
    """Closed-sum form: Σ w_t ΔP_t − c Σ |w_t − w_{t−1}| P_t − c |w_{T−1}| P_T."""
    gain = sum((w * (prices[t + 1] - prices[t]) for t, w in enumerate(positions)), Fraction(0))
    prev = [Fraction(0)] + list(positions[:-1])
    fees = sum((abs(w - p) * prices[t] for t, (w, p) in enumerate(zip(positions, prev))),
               Fraction(0))
    fees += abs(positions[-1]) * prices[-1] if positions else 0
    return gain - c * fees


def _tree_paths(records):
    """Root-to-leaf node-id lists from raw ``{id, parent, price}`` records."""
    kids = {}
    root = None
    for r in records:
        if r["parent"] is None:
            root = r["id"]
        else:
            kids.setdefault(r["parent"], []).append(r["id"])
    out = []

    def walk(nid, acc):
        acc = acc + [nid]
        if nid not in kids:
            out.append(acc)
        for c in kids.get(nid, []):
            walk(c, acc)

    walk(root, [])
    return out, kids


def lp_emm_exists(records):
    """Global LP over leaf probabilities: maximize s with π_leaf ≥ s, Σπ = 1 and
    zero conditional drift at every internal node. An EMM exists iff s* > 0."""
    price = {r["id"]: float(r["price"]) for r in records}
    paths, kids = _tree_paths(records)
    n = len(paths)
    a_eq, b_eq = [], []
    for nid in kids:
        row = np.zeros(n + 1)
        for j, p in enumerate(paths):
            if nid in p[:-1]:
                nxt = p[p.index(nid) + 1]
                row[j] = price[nxt] - price[nid]
        a_eq.append(row)
        b_eq.append(0.0)
    a_eq.append(np.r_[np.ones(n), 0.0])
    b_eq.append(1.0)
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = linprog(np.r_[np.zeros(n), -1.0], A_ub=a_ub, b_ub=np.zeros(n), A_eq=np.array(a_eq),
                  b_eq=np.array(b_eq), bounds=[(0, 1)] * (n + 1), method="highs")
    if res.status == 2:  # not even a degenerate (non-negative) martingale measure
        return False
    assert res.status == 0, res.message
    return -res.fun > 1e-9


def brute_force_tables(records, grid, c=Fraction(0), bound=Fraction(10**6)):
    """Every node -> position table in lexicographic order over preorder nodes.

    Yields ``(table, leaf_pnls, admissible)``.
    """
    price = {r["id"]: Fraction(r["price"]) for r in records}
    paths, kids = _tree_paths(records)
    order = []
    for p in paths:
        for nid in p[:-1]:
            if nid not in order:
                order.append(nid)
    grid = sorted(set(Fraction(g) for g in grid))
    for combo in itertools.product(grid, repeat=len(order)):
        table = dict(zip(order, combo))
        pnls, ok = [], True
        for p in paths:
            w = [table[i] for i in p[:-1]]
            prices = [price[i] for i in p]
            wealth = Fraction(0)
            prev = Fraction(0)
            for t, wt in enumerate(w):
                wealth += wt * (prices[t + 1] - prices[t]) - c * abs(wt - prev) * prices[t]
                prev = wt
                ok = ok and wealth >= -bound
            pnls.append(hand_pnl(w, prices, c))
        yield table, pnls, ok


def brute_universal(records, grid, c=Fraction(0), bound=Fraction(10**6)):
    for table, pnls, ok in brute_force_tables(records, grid, c, bound):
        if ok and all(p > 0 for p in pnls):
            return table
    return None


def brute_arbitrage_exists(records):
    for _, pnls, _ in brute_force_tables(records, (-1, 0, 1)):
        if all(p >= 0 for p in pnls) and any(p > 0 for p in pnls):
            return True
    return False


def enumerated_option_value(kind, spot, strike, up, down, steps):
    """Risk-neutral expectation by summing over all 2^n paths (no backward induction)."""
    q = (1 - down) / (up - down)
    total = Fraction(0)
    for moves in itertools.product((True, False), repeat=steps):
        s, prob = Fraction(spot), Fraction(1)
        for m in moves:
            s *= up if m else down
            prob *= q if m else 1 - q
        payoff = max(s - strike, 0) if kind == "call" else max(strike - s, 0)
        total += prob * payoff
    return total
