"""Independent reference implementations used by property and acceptance tests."""

from __future__ import annotations

import itertools
import random

import numpy as np

from langnav.mapping import FREE, OBSTACLE, UNKNOWN, SemanticMap


def frontier_predicate(m: SemanticMap) -> set[tuple[int, int]]:
    out = set()
    for y in range(m.height):
        for x in range(m.width):
            if m.occ[y, x] != FREE:
                continue
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nx, ny = x + dx, y + dy
                if 0 <= nx < m.width and 0 <= ny < m.height and m.occ[ny, nx] == UNKNOWN:
                    out.add((x, y))
                    break
    return out


class UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def union_find_clusters(cells, min_size: int) -> list[tuple[tuple[int, int], ...]]:
    """8-connected groups, each sorted row-major, listed by their first cell in row-major order."""
    cells = set(cells)
    uf = UnionFind(cells)
    for x, y in cells:
        for dx, dy in itertools.product((-1, 0, 1), repeat=2):
            if (x + dx, y + dy) in cells:
                uf.union((x, y), (x + dx, y + dy))
    groups: dict = {}
    for c in cells:
        groups.setdefault(uf.find(c), []).append(c)
    out = [tuple(sorted(g, key=lambda c: (c[1], c[0]))) for g in groups.values() if len(g) >= min_size]
    return sorted(out, key=lambda g: (g[0][1], g[0][0]))


def random_map(rng: random.Random, size: int = 64) -> SemanticMap:
    m = SemanticMap(size, size, 0.25)
    m.occ = np.array([[rng.choice((UNKNOWN, FREE, FREE, OBSTACLE)) for _ in range(size)] for _ in range(size)],
                     dtype=np.int8)
    return m


# -- tree search -----------------------------------------------------------

class RandomTree:
    """Deterministic scripted tree: children and values are pure functions of the path."""

    def __init__(self, seed: int, k: int, T: int):
        self.seed, self.k, self.T = seed, k, T

    def _rng(self, path) -> random.Random:
        return random.Random(f"{self.seed}|" + "|".join(path))

    def children(self, path: tuple[str, ...]) -> list[str]:
        rng = self._rng(path)
        # Labels are short so ties and lexicographic order both show up.
        return [f"{rng.choice('abc')}{i}" for i in range(self.k)]

    def value(self, path: tuple[str, ...]) -> float:
        return self._rng(path + ("value",)).choice([0.1, 0.3, 0.5, 0.5, 0.7, 0.9])

    # adapters in the generator/evaluator shapes tot_search expects
    def gen(self, model, state, k):
        if len(state.thoughts) - 1 >= self.T:
            return ["answer:" + "/".join(state.thoughts[1:])]
        return self.children(state.thoughts[1:])[:k]

    def evaluate(self, model, states):
        return [self.value(s.thoughts[1:]) for s in states]


def exhaustive_best_leaf(tree: RandomTree) -> tuple[str, ...]:
    leaves = []

    def walk(path):
        if len(path) == tree.T:
            leaves.append(path)
            return
        for c in tree.children(path):
            walk(path + (c,))

    walk(())
    return min(leaves, key=lambda p: (-tree.value(p), ("x",) + p))


def greedy_leaf(tree: RandomTree) -> tuple[str, ...]:
    path: tuple[str, ...] = ()
    for _ in range(tree.T):
        kids = [path + (c,) for c in tree.children(path)]
        path = min(kids, key=lambda p: (-tree.value(p), p))
    return path


# -- metrics -----------------------------------------------------------------

def metrics_by_hand(rows) -> tuple[float, float]:
    """``rows`` are (success, optimal, path) triples."""
    n = len(rows)
    sr = 100 * sum(1 for s, _, _ in rows if s) / n
    spl = 100 * sum((l / max(p, l) if max(p, l) > 0 else 1.0) if s else 0.0 for s, l, p in rows) / n
    return sr, spl


# (success, optimal, path) rows and the expected (SR, SPL); None means a metric error.
METRIC_CASES = [
    ([], None),
    ([(False, 2.0, 3.0)], (0.0, 0.0)),
    ([(True, 2.0, 2.0)], (100.0, 100.0)),
    ([(True, 1.0, 2.0), (False, 1.0, 1.0)], (50.0, 25.0)),
    ([(True, 2.0, 4.0)], (100.0, 50.0)),
    ([(True, 3.0, 1.0)], (100.0, 100.0)),  # shorter than optimal clamps to 1
    ([(True, 0.0, 0.0)], (100.0, 100.0)),
    ([(True, 0.0, 1.0)], (100.0, 0.0)),
    ([(True, 1.0, 1.0), (True, 1.0, 2.0), (True, 1.0, 4.0), (True, 1.0, 8.0)], (100.0, 46.875)),
    ([(False, 1.0, 0.0)] * 3 + [(True, 4.0, 5.0)], (25.0, 20.0)),
    ([(True, 1.5, 3.0), (True, 2.5, 2.5), (False, 1.0, 9.0), (False, 2.0, 2.0), (True, 3.0, 6.0)], (60.0, 40.0)),
    ([(True, 1.0, 1.0)] * 7 + [(False, 1.0, 1.0)] * 3, (70.0, 70.0)),
]


def fuzzed_rows(rng: random.Random) -> list[tuple[bool, float, float]]:
    rows = []
    for _ in range(rng.randint(1, 30)):
        l = rng.choice([0.0, rng.uniform(0.25, 10)])
        rows.append((rng.random() < 0.6, l, rng.choice([l, rng.uniform(0, 20)])))
    return rows
