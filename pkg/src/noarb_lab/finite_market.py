"""Finite event-tree markets: EMM solver, arbitrage detector, universal-strategy search.

A tree EMM factorizes over nodes, so every question here is answered node by
node with exact rational arithmetic. The martingale condition is at zero rate:
``sum_i q_i * P_child_i == P_node``.
"""

from __future__ import annotations

import itertools
import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Optional, Sequence

from .errors import InternalConsistencyError, InvalidInput
from .market import DEFAULT_BOUND, ZERO_COST, CostModel, PricePath, ledger, to_exact

logger = logging.getLogger(__name__)

SEARCH_LIMIT = 10**8


@dataclass(frozen=True)
class TreeNode:
    id: str
    price: Fraction
    parent: Optional[str]
    children: tuple = ()
    weight: Optional[Fraction] = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


class MarketTree:
    """Finite event tree with one exact price per node.

    ``weight`` on a node is the physical branch weight of the edge from its
    parent; it only has to be positive (all positive measures on a finite tree
    are equivalent, so it never enters the EMM question).
    """

    def __init__(self, nodes: Mapping[str, TreeNode], root: str):
        self.nodes = dict(nodes)
        self.root = root
        self._validate()

    @classmethod
    def from_records(cls, records: Iterable[Mapping]) -> "MarketTree":
        raw = []
        for rec in records:
            try:
                nid = str(rec["id"])
                price = to_exact(rec["price"])
            except KeyError as exc:
                raise InvalidInput(f"tree record missing field {exc}", "tree") from None
            parent = rec.get("parent")
            weight = rec.get("weight")
            raw.append((nid, price, None if parent is None else str(parent),
                        None if weight is None else to_exact(weight)))
        ids = [r[0] for r in raw]
        if len(set(ids)) != len(ids):
            raise InvalidInput("duplicate node ids in tree", "tree")
        roots = [r[0] for r in raw if r[2] is None]
        if len(roots) != 1:
            raise InvalidInput(f"tree needs exactly one root, found {len(roots)}", "tree")
        children: Dict[str, list] = {nid: [] for nid in ids}
        for nid, _, parent, _ in raw:
            if parent is not None:
                if parent not in children:
                    raise InvalidInput(f"node {nid} has unknown parent {parent}", "tree")
                children[parent].append(nid)
        nodes = {nid: TreeNode(nid, price, parent, tuple(children[nid]), weight)
                 for nid, price, parent, weight in raw}
        return cls(nodes, roots[0])

    def to_records(self) -> list:
        return [{"id": n.id, "parent": n.parent, "price": n.price, "weight": n.weight}
                for n in (self.nodes[i] for i in self.preorder())]

    def _validate(self):
        seen = set()
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                raise InvalidInput(f"tree has a cycle through {nid}", "tree")
            seen.add(nid)
            node = self.nodes[nid]
            if node.price <= 0:
                raise InvalidInput(f"node {nid} has non-positive price {node.price}", "tree")
            if node.weight is not None and node.weight <= 0:
                raise InvalidInput(f"node {nid} has non-positive branch weight", "tree")
            if len(node.children) == 1:
                raise InvalidInput(f"node {nid} has a single child; non-leaf nodes need >= 2",
                                   "tree")
            stack.extend(node.children)
        if seen != set(self.nodes):
            raise InvalidInput("tree has nodes unreachable from the root", "tree")

    def preorder(self) -> list:
        out, stack = [], [self.root]
        while stack:
            nid = stack.pop()
            out.append(nid)
            stack.extend(reversed(self.nodes[nid].children))
        return out

    def internal_nodes(self) -> list:
        return [nid for nid in self.preorder() if not self.nodes[nid].is_leaf]

    def leaf_paths(self) -> list:
        """Root-to-leaf node-id sequences, in preorder of their leaves."""
        out = []

        def walk(nid, acc):
            acc = acc + (nid,)
            node = self.nodes[nid]
            if node.is_leaf:
                out.append(acc)
            for c in node.children:
                walk(c, acc)

        walk(self.root, ())
        return out

    @property
    def depth(self) -> int:
        return max(len(p) for p in self.leaf_paths()) - 1

    def price_path(self, ids: Sequence[str]) -> PricePath:
        return PricePath([self.nodes[i].price for i in ids], tick_size=None)

    def child_prices(self, nid: str) -> tuple:
        return tuple(self.nodes[c].price for c in self.nodes[nid].children)

    def __len__(self):
        return len(self.nodes)


def binomial_tree(p0, up, down, depth: int) -> MarketTree:
    """Non-recombining binomial tree with multiplicative factors; node ids are 'r', 'rU', 'rUD', ..."""
    p0, up, down = to_exact(p0), to_exact(up), to_exact(down)
    if depth < 1:
        raise InvalidInput("depth must be >= 1", "depth")
    records = [{"id": "r", "parent": None, "price": p0}]
    frontier = [("r", p0)]
    for _ in range(depth):
        nxt = []
        for nid, price in frontier:
            for tag, f in (("U", up), ("D", down)):
                cid = nid + tag
                records.append({"id": cid, "parent": nid, "price": price * f})
                nxt.append((cid, price * f))
        frontier = nxt
    return MarketTree.from_records(records)


def random_tree(rng: random.Random, depth: int, *, arity=(2, 3), arbitrage_rate=0.0,
                p0: int = 10000, max_move: int = 2000) -> MarketTree:
    """Random full tree of the given depth with integer-tick prices.

    Each internal node is, with probability ``arbitrage_rate``, one-sided (all
    children on one side of the parent, allowing ties); otherwise its children
    straddle the parent strictly. Prices are integers; read them as ticks.
    """
    records = [{"id": "0", "parent": None, "price": p0}]
    frontier = [("0", p0)]
    counter = itertools.count(1)
    for _ in range(depth):
        nxt = []
        for nid, price in frontier:
            k = rng.choice(arity)
            move = max(2, min(max_move, price // 4))
            if rng.random() < arbitrage_rate:
                side = rng.choice((1, -1))
                lo, hi = (0, move) if side > 0 else (max(1 - price, -move), 0)
                deltas = [rng.randint(lo, hi) for _ in range(k)]
                if all(d == 0 for d in deltas):
                    deltas[0] = side
            else:
                down = rng.randint(max(1 - price, -move), -1)
                up = rng.randint(1, move)
                deltas = [up, down] + [rng.randint(max(1 - price, -move), move)
                                       for _ in range(k - 2)]
                rng.shuffle(deltas)
            for d in deltas:
                cid = str(next(counter))
                records.append({"id": cid, "parent": nid, "price": price + d,
                                "weight": Fraction(rng.randint(1, 9), 10)})
                nxt.append((cid, price + d))
        frontier = nxt
    return MarketTree.from_records(records)


def random_binomial_tree(rng: random.Random, depth: int, p0: int = 10000,
                         max_move: int = 2000) -> MarketTree:
    """Random binomial tree whose every node straddles its parent (always admits an EMM)."""
    return random_tree(rng, depth, arity=(2,), arbitrage_rate=0.0, p0=p0, max_move=max_move)


# --- EMM -------------------------------------------------------------------


@dataclass(frozen=True)
class ArbitrageCertificate:
    positions: Dict[str, Fraction]
    terminal_pnl: Dict[str, Fraction]
    node: Optional[str] = None

    def verify(self, tree: MarketTree) -> bool:
        """Re-run every root-to-leaf path through the market ledger."""
        pnls = []
        for ids in tree.leaf_paths():
            w = [self.positions.get(i, Fraction(0)) for i in ids[:-1]]
            pnl = ledger(w, tree.price_path(ids)).pnl
            if pnl != self.terminal_pnl.get(ids[-1]):
                return False
            pnls.append(pnl)
        return all(p >= 0 for p in pnls) and any(p > 0 for p in pnls)


@dataclass(frozen=True)
class EmmResult:
    q: Optional[Dict[str, tuple]] = None
    certificate: Optional[ArbitrageCertificate] = None
    non_unique: frozenset = field(default_factory=frozenset)

    @property
    def exists(self) -> bool:
        return self.q is not None


def node_measure(parent: Fraction, children: Sequence[Fraction]):
    """Strictly positive q with ``sum q = 1`` and ``sum q*c = parent``; None if impossible.

    Returns ``(q, unique)``. Binomial nodes use the closed form. With more
    children the minimum branch probability is maximized, then the leftover
    mass goes on the extreme children.
    """
    m = len(children)
    lo, hi = min(children), max(children)
    if lo == hi == parent:
        return tuple(Fraction(1, m) for _ in children), False
    if not lo < parent < hi:
        return None
    if m == 2:
        a, b = children
        qa = (parent - b) / (a - b)
        return (qa, 1 - qa), True
    mean = sum(children) / m
    s = min(Fraction(1, m), (parent - lo) / (m * (mean - lo)), (hi - parent) / (m * (hi - mean)))
    q = [s] * m
    rest = 1 - m * s
    if rest:
        target = (parent - s * sum(children)) / rest
        lam = (target - lo) / (hi - lo)
        q[children.index(hi)] += rest * lam
        q[children.index(lo)] += rest * (1 - lam)
    return tuple(q), False


def solve_emm(tree: MarketTree) -> EmmResult:
    q, non_unique = {}, set()
    for nid in tree.internal_nodes():
        sol = node_measure(tree.nodes[nid].price, tree.child_prices(nid))
        if sol is None:
            cert = detect_arbitrage(tree)
            if cert is None:
                raise InternalConsistencyError(
                    f"node {nid} admits no martingale measure but no arbitrage was found")
            return EmmResult(certificate=cert)
        q[nid], unique = sol
        if not unique:
            non_unique.add(nid)
    return EmmResult(q=q, non_unique=frozenset(non_unique))


def _one_sided(parent, children) -> int:
    """Position in {+1, -1} that never loses and sometimes wins at this node, else 0."""
    moves = [c - parent for c in children]
    if all(m >= 0 for m in moves) and any(m > 0 for m in moves):
        return 1
    if all(m <= 0 for m in moves) and any(m < 0 for m in moves):
        return -1
    return 0


def detect_arbitrage(tree: MarketTree) -> Optional[ArbitrageCertificate]:
    """Localized certificate at the first one-sided node in preorder, else None."""
    for nid in tree.internal_nodes():
        w = _one_sided(tree.nodes[nid].price, tree.child_prices(nid))
        if w:
            positions = {i: Fraction(0) for i in tree.internal_nodes()}
            positions[nid] = Fraction(w)
            pnl = {}
            for ids in tree.leaf_paths():
                path_w = [positions[i] for i in ids[:-1]]
                pnl[ids[-1]] = ledger(path_w, tree.price_path(ids)).pnl
            return ArbitrageCertificate(positions, pnl, nid)
    return None


def path_probability(q: Mapping[str, tuple], tree: MarketTree, ids: Sequence[str]) -> Fraction:
    prob = Fraction(1)
    for parent, child in zip(ids, ids[1:]):
        prob *= q[parent][tree.nodes[parent].children.index(child)]
    return prob


# --- universal strategy search --------------------------------------------


def candidate_count(tree: MarketTree, grid: Sequence) -> int:
    return len(set(grid)) ** len(tree.internal_nodes())


def search_universal(tree: MarketTree, position_grid: Iterable, costs: CostModel = ZERO_COST,
                     bound=DEFAULT_BOUND) -> Optional[Dict[str, Fraction]]:
    """Look for a node -> position table with Π > 0 (and admissible) on every leaf.

    Covers all ``|grid| ** internal_nodes`` tables. Choices in sibling subtrees
    are independent once the parent's position is fixed, so the search recurses
    per subtree instead of materializing each table; trying grid values in
    ascending order along the preorder yields the lexicographically smallest
    universal table.
    """
    grid = sorted(set(to_exact(g) for g in position_grid))
    if 0 not in grid:
        raise InvalidInput("position grid must contain 0", "grid")
    bound = to_exact(bound)
    count = candidate_count(tree, grid)
    if count > SEARCH_LIMIT:
        raise InvalidInput(f"search space too large: {count:.3e} candidate tables "
                           f"(limit {SEARCH_LIMIT:.0e})", "grid")
    c = costs.rate
    nodes = tree.nodes

    def solve(nid, wealth, prev):
        node = nodes[nid]
        if node.is_leaf:
            final = wealth - c * abs(prev) * node.price
            return {} if final > 0 else None
        for w in grid:
            fee = c * abs(w - prev) * node.price
            table = {nid: w}
            for cid in node.children:
                v = wealth + w * (nodes[cid].price - node.price) - fee
                sub = solve(cid, v, w) if v >= -bound else None
                if sub is None:
                    break
                table.update(sub)
            else:
                return table
        return None

    found = solve(tree.root, Fraction(0), Fraction(0))
    if found is not None and costs.zero_cost and solve_emm(tree).exists:
        raise InternalConsistencyError(
            "universal strategy found on a tree that admits an EMM at zero cost")
    if found is not None:
        logger.info("universal table found on %d-node tree", len(tree))
    return found
