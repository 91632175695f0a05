"""Permutation groups on labelled finite sets.

A deterministic Schreier-Sims with explicit transversals provides exact
orders and membership; block systems use union-find pair refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Sequence

from .obstruction import FinMap, aut_order, pushout


class DomainMismatch(ValueError):
    pass


class NotTransitive(ValueError):
    pass


def _compose(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    # a after b
    return tuple([a[i] for i in b])


def _inverse(a: tuple[int, ...]) -> tuple[int, ...]:
    out = [0] * len(a)
    for i, x in enumerate(a):
        out[x] = i
    return tuple(out)


@dataclass(frozen=True)
class Permutation:
    """A bijection of ``domain`` stored as an index image array.

    ``domain`` is a sorted tuple of labels; ``images[i]`` is the index of the
    image of ``domain[i]``.  Products follow function composition:
    ``(a * b)(x) = a(b(x))``.
    """

    domain: tuple
    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.domain))):
            raise ValueError("images do not define a bijection")

    @classmethod
    def identity(cls, domain: Sequence) -> "Permutation":
        dom = tuple(sorted(domain))
        return cls(dom, tuple(range(len(dom))))

    @classmethod
    def from_mapping(cls, domain: Sequence, mapping: dict) -> "Permutation":
        dom = tuple(sorted(domain))
        idx = {x: i for i, x in enumerate(dom)}
        return cls(dom, tuple(idx[mapping.get(x, x)] for x in dom))

    @classmethod
    def transposition(cls, domain: Sequence, a: Hashable, b: Hashable) -> "Permutation":
        return cls.from_mapping(domain, {a: b, b: a})

    @classmethod
    def from_cycles(cls, domain: Sequence, cycles: Iterable[Sequence]) -> "Permutation":
        mapping = {}
        for cyc in cycles:
            for x, y in zip(cyc, list(cyc[1:]) + [cyc[0]]):
                mapping[x] = y
        return cls.from_mapping(domain, mapping)

    def __call__(self, x: Hashable) -> Hashable:
        return self.domain[self.images[self._index[x]]]

    @cached_property
    def _index(self) -> dict:
        return {x: i for i, x in enumerate(self.domain)}

    def _check(self, other: "Permutation") -> None:
        if other.domain != self.domain:
            raise DomainMismatch("permutations act on different domains")

    def __mul__(self, other: "Permutation") -> "Permutation":
        self._check(other)
        return Permutation(self.domain, _compose(self.images, other.images))

    def inverse(self) -> "Permutation":
        return Permutation(self.domain, _inverse(self.images))

    def is_identity(self) -> bool:
        return all(i == x for i, x in enumerate(self.images))

    @property
    def support(self) -> list:
        return [self.domain[i] for i, x in enumerate(self.images) if i != x]

    def cycles(self) -> list[tuple]:
        seen, out = set(), []
        for i in range(len(self.images)):
            if i in seen or self.images[i] == i:
                continue
            cyc, j = [], i
            while j not in seen:
                seen.add(j)
                cyc.append(self.domain[j])
                j = self.images[j]
            out.append(tuple(cyc))
        return out

    def is_transposition(self) -> bool:
        cyc = self.cycles()
        return len(cyc) == 1 and len(cyc[0]) == 2

    def to_list(self) -> list:
        """One-line image array over the sorted domain labels."""
        return [self.domain[i] for i in self.images]


class _Level:
    __slots__ = ("base", "gens", "trans", "inv", "checked")

    def __init__(self, base: int):
        self.base = base
        self.gens: list[tuple[int, ...]] = []
        self.trans: dict[int, tuple[int, ...]] = {}
        self.inv: dict[int, tuple[int, ...]] = {}
        self.checked: set[tuple[int, int]] = set()


class PermGroup:
    """Permutation group with a base and strong generating set.

    The base is chosen greedily in sorted label order: each new level uses
    the smallest point moved by the residue that created it.
    """

    def __init__(self, domain: Sequence, generators: Iterable[Permutation] = ()):
        self.domain = tuple(sorted(domain))
        self.n = len(self.domain)
        self.generators: list[Permutation] = []
        self._levels: list[_Level] = []
        self._id = tuple(range(self.n))
        for g in generators:
            if g.domain != self.domain:
                raise DomainMismatch("generator domain differs from group domain")
            self.generators.append(g)
        for g in self.generators:
            self._insert(g.images)

    @classmethod
    def from_generators(cls, gens: Sequence[Permutation], domain: Sequence | None = None) -> "PermGroup":
        if domain is None:
            if not gens:
                domain = ()
            else:
                domain = gens[0].domain
        return cls(domain, gens)

    # Schreier-Sims

    def _sift(self, g: tuple[int, ...], start: int = 0) -> tuple[tuple[int, ...], int]:
        for i in range(start, len(self._levels)):
            lev = self._levels[i]
            x = g[lev.base]
            if x not in lev.inv:
                return g, i
            g = _compose(lev.inv[x], g)
        return g, len(self._levels)

    def _orbit(self, lev: _Level) -> None:
        if not lev.trans:
            lev.trans[lev.base] = self._id
            lev.inv[lev.base] = self._id
        frontier = list(lev.trans)
        while frontier:
            nxt = []
            for x in frontier:
                u = lev.trans[x]
                for s in lev.gens:
                    y = s[x]
                    if y not in lev.trans:
                        w = _compose(s, u)
                        lev.trans[y] = w
                        lev.inv[y] = _inverse(w)
                        nxt.append(y)
            frontier = nxt

    def _add_strong(self, h: tuple[int, ...], upto: int) -> None:
        # h fixes the base points of levels < upto; register it on levels 0..upto
        if upto == len(self._levels):
            moved = next(i for i, x in enumerate(h) if i != x)
            self._levels.append(_Level(moved))
        for lev in self._levels[: upto + 1]:
            lev.gens.append(h)
            self._orbit(lev)

    def _insert(self, g: tuple[int, ...]) -> None:
        h, j = self._sift(g)
        if h == self._id:
            return
        self._add_strong(h, j)
        i = len(self._levels) - 1
        while i >= 0:
            lev = self._levels[i]
            restart = False
            for x in list(lev.trans):
                for si, s in enumerate(lev.gens):
                    if (x, si) in lev.checked:
                        continue
                    lev.checked.add((x, si))
                    sg = _compose(lev.inv[s[x]], _compose(s, lev.trans[x]))
                    if sg == self._id:
                        continue
                    y, j = self._sift(sg, i + 1)
                    if y != self._id:
                        self._add_strong(y, j)
                        i = j
                        restart = True
                        break
                if restart:
                    break
            if not restart:
                i -= 1

    # queries

    @property
    def base(self) -> list:
        return [self.domain[lev.base] for lev in self._levels]

    @property
    def strong_generators(self) -> list[Permutation]:
        seen, out = set(), []
        for lev in self._levels:
            for s in lev.gens:
                if s not in seen:
                    seen.add(s)
                    out.append(Permutation(self.domain, s))
        return out

    @property
    def orbit_lengths(self) -> list[int]:
        return [len(lev.trans) for lev in self._levels]

    def order(self) -> int:
        return math.prod(self.orbit_lengths)

    def __contains__(self, g: Permutation) -> bool:
        if g.domain != self.domain:
            raise DomainMismatch("permutation acts on a different domain")
        h, _ = self._sift(g.images)
        return h == self._id

    def contains(self, g: Permutation) -> bool:
        return g in self

    def orbits(self) -> list[list]:
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in self.generators:
            for i, x in enumerate(g.images):
                a, b = find(i), find(x)
                if a != b:
                    parent[max(a, b)] = min(a, b)
        groups: dict[int, list] = {}
        for i in range(self.n):
            groups.setdefault(find(i), []).append(self.domain[i])
        return list(groups.values())

    def is_transitive(self) -> bool:
        return self.n <= 1 or len(self.orbits()) == 1


def from_generators(gens: Sequence[Permutation], domain: Sequence | None = None) -> PermGroup:
    return PermGroup.from_generators(gens, domain)


def fiber_transpositions(domain: Sequence, fibers: Iterable[Sequence]) -> list[Permutation]:
    """Transpositions (x0 x1), (x1 x2), ... inside each fiber."""
    out = []
    for fib in fibers:
        fib = sorted(fib)
        for a, b in zip(fib, fib[1:]):
            out.append(Permutation.transposition(domain, a, b))
    return out


def deck_group(f: FinMap) -> PermGroup:
    """All domain permutations preserving every fiber of ``f``."""
    dom = f.domain
    return PermGroup(dom, fiber_transpositions(dom, f.fibers().values()))


def verify_deckpushout(f: FinMap, g: FinMap) -> bool:
    """<Aut(f), Aut(g)> has the order of Aut(f ⋆ g)."""
    if not (f.is_surjective() and g.is_surjective()):
        raise ValueError("deck pushout lemma needs surjective maps")
    if set(f.mapping) != set(g.mapping):
        raise ValueError("mismatched domains")
    dom = f.domain
    gens = fiber_transpositions(dom, f.fibers().values()) + fiber_transpositions(dom, g.fibers().values())
    return PermGroup(dom, gens).order() == aut_order(pushout(f, g))


def block_system(G: PermGroup, seed_pair: tuple[Hashable, Hashable]) -> list[list]:
    """Finest block system of a transitive group in which ``seed_pair`` share a block."""
    if not G.is_transitive():
        raise NotTransitive("block systems need a transitive group")
    idx = {x: i for i, x in enumerate(G.domain)}
    parent = list(range(G.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    a, b = idx[seed_pair[0]], idx[seed_pair[1]]
    queue = []
    if find(a) != find(b):
        parent[find(b)] = find(a)
        queue.append((a, b))
    gens = [g.images for g in G.generators]
    while queue:
        x, y = queue.pop()
        for g in gens:
            u, v = find(g[x]), find(g[y])
            if u != v:
                parent[v] = u
                queue.append((u, v))
    blocks: dict[int, list] = {}
    for i in range(G.n):
        blocks.setdefault(find(i), []).append(G.domain[i])
    return sorted(blocks.values())


def minimal_blocks(G: PermGroup) -> list[list[list]]:
    """Block systems generated by pairs containing the first domain point."""
    if G.n < 2:
        return []
    first = G.domain[0]
    systems = []
    for other in G.domain[1:]:
        bs = block_system(G, (first, other))
        if bs not in systems:
            systems.append(bs)
    return systems


def is_primitive(G: PermGroup) -> bool:
    return all(len(bs) == 1 for bs in minimal_blocks(G))


def set_partitions(items: Sequence) -> Iterable[list[list]]:
    """All set partitions of ``items`` (restricted growth strings)."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return

    def rec(i: int, labels: list[int], m: int):
        if i == n:
            blocks: list[list] = [[] for _ in range(m)]
            for x, lab in zip(items, labels):
                blocks[lab].append(x)
            yield blocks
            return
        for lab in range(m + 1):
            labels.append(lab)
            yield from rec(i + 1, labels, max(m, lab + 1))
            labels.pop()

    yield from rec(0, [], 0)


def partition_map(blocks: Sequence[Sequence]) -> FinMap:
    """The surjection sending each element to the index of its block."""
    return FinMap({x: i for i, b in enumerate(blocks) for x in b}, frozenset(range(len(blocks))))


__all__ = [
    "Permutation", "PermGroup", "from_generators", "deck_group", "verify_deckpushout",
    "block_system", "minimal_blocks", "is_primitive", "set_partitions", "partition_map",
    "fiber_transpositions", "DomainMismatch", "NotTransitive",
]
