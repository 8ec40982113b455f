"""Leveled trees and forests.

A forest of dimension n is a family of finite node sets, one per level
0..n, together with a parent map sending each node at level i < n to a
node at level i+1.  A tree is a forest whose top level is a singleton.
These are the search substrate for everything else in the package:
sub-structure extraction, homomorphism checking, isomorphism
enumeration and canonical codes all live here.

Node ids are opaque integers, unique within one structure.  Structures
are value objects: they are never mutated after construction, and all
operations are pure.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping

NodeId = int


class StructureError(ValueError):
    """Malformed leveled-structure data (overlapping levels, bad parents, ...)."""


class UnknownNodeError(KeyError):
    """A node id that does not belong to the structure."""


class Forest:
    """A leveled node set with a parent map one level up.

    ``levels[i]`` is the set of i-nodes; ``parent`` is total on levels
    0..dim-1 and maps level i into level i+1.  Empty forests (all levels
    empty) are legal at every dimension.
    """

    __slots__ = ("dim", "levels", "parent", "_level_of", "_children")

    def __init__(self, dim: int, levels: Iterable[Iterable[NodeId]],
                 parent: Mapping[NodeId, NodeId]):
        if dim < 0:
            raise StructureError(f"dimension must be >= 0, got {dim}")
        lv = tuple(frozenset(l) for l in levels)
        if len(lv) != dim + 1:
            raise StructureError(f"expected {dim + 1} levels, got {len(lv)}")
        level_of: dict[NodeId, int] = {}
        for i, nodes in enumerate(lv):
            for s in nodes:
                if s in level_of:
                    raise StructureError(
                        f"node {s} appears at levels {level_of[s]} and {i}")
                level_of[s] = i
        par = dict(parent)
        for s, p in par.items():
            if s not in level_of:
                raise StructureError(f"parent map mentions unknown node {s}")
            i = level_of[s]
            if i == dim:
                raise StructureError(f"top-level node {s} must not have a parent")
            if p not in lv[i + 1]:
                raise StructureError(
                    f"parent of {s} (level {i}) must be at level {i + 1}, got {p}")
        for i in range(dim):
            for s in lv[i]:
                if s not in par:
                    raise StructureError(f"node {s} at level {i} has no parent")
        children: dict[NodeId, tuple[NodeId, ...]] = {s: () for s in level_of}
        buckets: dict[NodeId, list[NodeId]] = {}
        for s, p in par.items():
            buckets.setdefault(p, []).append(s)
        for p, cs in buckets.items():
            children[p] = tuple(sorted(cs))
        self.dim = dim
        self.levels = lv
        self.parent = par
        self._level_of = level_of
        self._children = children

    # -- basic queries -------------------------------------------------

    def nodes(self) -> Iterator[NodeId]:
        """All nodes, by increasing level then id (deterministic)."""
        for nodes in self.levels:
            yield from sorted(nodes)

    def __contains__(self, s: NodeId) -> bool:
        return s in self._level_of

    def __len__(self) -> int:
        return len(self._level_of)

    def level_of(self, s: NodeId) -> int:
        try:
            return self._level_of[s]
        except KeyError:
            raise UnknownNodeError(s) from None

    def children(self, s: NodeId) -> tuple[NodeId, ...]:
        if s not in self._level_of:
            raise UnknownNodeError(s)
        return self._children[s]

    def ancestor(self, s: NodeId, steps: int) -> NodeId:
        """Apply the parent map `steps` times."""
        for _ in range(steps):
            s = self.parent[s]
        return s

    def top(self) -> tuple[NodeId, ...]:
        return tuple(sorted(self.levels[self.dim]))

    def is_empty(self) -> bool:
        return not any(self.levels)

    def descendants(self, s: NodeId) -> list[NodeId]:
        """All nodes of the subtree at s (including s), level-descending order."""
        out = [s]
        frontier = [s]
        while frontier:
            nxt: list[NodeId] = []
            for u in frontier:
                nxt.extend(self._children[u])
            nxt.sort()
            out.extend(nxt)
            frontier = nxt
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Forest):
            return NotImplemented
        return (self.dim == other.dim and self.levels == other.levels
                and self.parent == other.parent)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        sizes = "/".join(str(len(l)) for l in self.levels)
        return f"<{type(self).__name__} dim={self.dim} sizes={sizes}>"


class Tree(Forest):
    """A forest whose top level is a single root node."""

    def __init__(self, dim: int, levels: Iterable[Iterable[NodeId]],
                 parent: Mapping[NodeId, NodeId]):
        super().__init__(dim, levels, parent)
        if len(self.levels[dim]) != 1:
            raise StructureError(
                f"a {dim}-tree needs exactly one top node, got {len(self.levels[dim])}")

    @property
    def root(self) -> NodeId:
        return next(iter(self.levels[self.dim]))


def subtree(forest: Forest, s: NodeId) -> Tree:
    """The tree on all nodes reaching s along the parent map, rooted at s.

    Node ids are preserved; the root is s itself.
    """
    k = forest.level_of(s)
    nodes = forest.descendants(s)
    levels: list[set[NodeId]] = [set() for _ in range(k + 1)]
    for u in nodes:
        levels[forest.level_of(u)].add(u)
    parent = {u: forest.parent[u] for u in nodes if u != s}
    return Tree(k, levels, parent)


def subforest(forest: Forest, s: NodeId) -> Forest:
    """The subtree at s with s removed; the former children become the top level."""
    k = forest.level_of(s)
    if k == 0:
        raise StructureError(f"no subforest under level-0 node {s}")
    t = subtree(forest, s)
    levels = t.levels[:k]
    parent = {u: p for u, p in t.parent.items() if t.level_of(u) < k - 1}
    return Forest(k - 1, levels, parent)


# -- homomorphisms ----------------------------------------------------

@dataclass(frozen=True)
class HomViolation:
    kind: str  # "domain" | "level" | "parent-square" | "not-injective" | "not-surjective"
    detail: str
    subject: tuple[NodeId, ...]


@dataclass
class HomReport:
    violations: list[HomViolation] = field(default_factory=list)
    bijective: bool = False

    @property
    def is_homomorphism(self) -> bool:
        return not self.violations

    @property
    def is_isomorphism(self) -> bool:
        return self.is_homomorphism and self.bijective


def check_homomorphism(mapping: Mapping[NodeId, NodeId], source: Forest,
                       target: Forest) -> HomReport:
    """Report every defect of `mapping` as a leveled homomorphism source -> target.

    An empty report means the map preserves levels and commutes with the
    parent maps; `bijective` additionally flags isomorphisms.
    """
    report = HomReport()
    for s in source.nodes():
        if s not in mapping:
            report.violations.append(
                HomViolation("domain", f"node {s} has no image", (s,)))
    for s, t in sorted(mapping.items()):
        if s not in source:
            report.violations.append(
                HomViolation("domain", f"map defined on foreign node {s}", (s,)))
            continue
        if t not in target:
            report.violations.append(
                HomViolation("domain", f"image {t} of {s} is not a node", (s, t)))
            continue
        if source.level_of(s) != target.level_of(t):
            report.violations.append(HomViolation(
                "level",
                f"{s} at level {source.level_of(s)} maps to {t} at level "
                f"{target.level_of(t)}", (s, t)))
            continue
        if source.level_of(s) < source.dim:
            want = mapping.get(source.parent[s])
            got = target.parent.get(t)
            if want is not None and want != got:
                report.violations.append(HomViolation(
                    "parent-square",
                    f"parent of {s} maps to {want} but parent of image {t} is {got}",
                    (s, source.parent[s])))
    if report.is_homomorphism:
        images = list(mapping.values())
        injective = len(set(images)) == len(images)
        surjective = set(images) == set(target.nodes())
        report.bijective = injective and surjective and len(mapping) == len(source)
    return report


# -- isomorphism search ------------------------------------------------

def _structural_codes(forest: Forest,
                      decoration: Callable[[NodeId], object] | None) -> dict[NodeId, tuple]:
    """Bottom-up canonical code per node: (decoration, sorted child codes)."""
    codes: dict[NodeId, tuple] = {}
    for level in range(forest.dim + 1):
        for s in sorted(forest.levels[level]):
            dec = repr(decoration(s)) if decoration is not None else ""
            codes[s] = (dec, tuple(sorted(codes[c] for c in forest.children(s))))
    return codes


def canonical_code(tree: Tree, decoration: Callable[[NodeId], object] | None = None) -> bytes:
    """Isomorphism-invariant code of a decorated tree.

    Two decorated trees get equal codes iff there is a
    decoration-preserving isomorphism between them (the multiset of
    child codes forgets sibling order).  Decoration values must have a
    stable ``repr``.
    """
    codes = _structural_codes(tree, decoration)
    return repr(codes[tree.root]).encode()


def forest_code(forest: Forest, decoration: Callable[[NodeId], object] | None = None) -> bytes:
    """Canonical code of a forest: the sorted multiset of its tree codes, plus dim."""
    codes = _structural_codes(forest, decoration)
    tops = tuple(sorted(codes[r] for r in forest.top()))
    return repr((forest.dim, tops)).encode()


def _match_sets(source: Forest, target: Forest,
                pairs: list[tuple[NodeId, NodeId]],
                codes_s: dict[NodeId, tuple], codes_t: dict[NodeId, tuple],
                constraint: Callable[[NodeId, NodeId], bool] | None,
                acc: dict[NodeId, NodeId]) -> Iterator[dict[NodeId, NodeId]]:
    """Extend acc by matching, for each queued (a, b), children(a) onto children(b)."""
    if not pairs:
        yield dict(acc)
        return
    a, b = pairs[0]
    rest = pairs[1:]
    kids_a = source.children(a)
    kids_b = target.children(b)
    if len(kids_a) != len(kids_b):
        return
    groups_a: dict[tuple, list[NodeId]] = {}
    for c in kids_a:
        groups_a.setdefault(codes_s[c], []).append(c)
    groups_b: dict[tuple, list[NodeId]] = {}
    for c in kids_b:
        groups_b.setdefault(codes_t[c], []).append(c)
    if set(groups_a) != set(groups_b):
        return
    if any(len(groups_a[k]) != len(groups_b[k]) for k in groups_a):
        return
    keys = sorted(groups_a)
    perm_sets = [
        [list(zip(groups_a[k], perm))
         for perm in itertools.permutations(groups_b[k])]
        for k in keys
    ]

    def assign(idx: int) -> Iterator[dict[NodeId, NodeId]]:
        if idx == len(keys):
            new_pairs = [(c, acc[c]) for k in keys for c in groups_a[k]]
            yield from _match_sets(source, target, rest + new_pairs,
                                   codes_s, codes_t, constraint, acc)
            return
        for matching in perm_sets[idx]:
            if constraint is not None and not all(constraint(x, y) for x, y in matching):
                continue
            for x, y in matching:
                acc[x] = y
            yield from assign(idx + 1)
            for x, _ in matching:
                del acc[x]

    yield from assign(0)


def enumerate_isomorphisms(
        source: Tree, target: Tree,
        constraint: Callable[[NodeId, NodeId], bool] | None = None,
        decoration: Callable[[NodeId], object] | None = None,
) -> Iterator[dict[NodeId, NodeId]]:
    """Yield every level-preserving parent-commuting bijection source -> target.

    `constraint` is a per-node predicate (kept, not just pruned: the
    yielded maps satisfy it pairwise); `decoration` additionally prunes
    by requiring matched nodes to have isomorphic decorated subtrees.
    Deterministic order given sorted child ids.
    """
    if source.dim != target.dim:
        return
    codes_s = _structural_codes(source, decoration)
    codes_t = _structural_codes(target, decoration)
    if codes_s[source.root] != codes_t[target.root]:
        return
    if constraint is not None and not constraint(source.root, target.root):
        return
    acc = {source.root: target.root}
    yield from _match_sets(source, target, [(source.root, target.root)],
                           codes_s, codes_t, constraint, acc)


def enumerate_forest_isomorphisms(
        source: Forest, target: Forest,
        constraint: Callable[[NodeId, NodeId], bool] | None = None,
        decoration: Callable[[NodeId], object] | None = None,
) -> Iterator[dict[NodeId, NodeId]]:
    """Forest version: roots are matched in all code-compatible ways."""
    if source.dim != target.dim:
        return
    if source.is_empty() and target.is_empty():
        yield {}
        return
    codes_s = _structural_codes(source, decoration)
    codes_t = _structural_codes(target, decoration)
    roots_s = source.top()
    roots_t = target.top()
    if len(roots_s) != len(roots_t):
        return
    groups_s: dict[tuple, list[NodeId]] = {}
    for r in roots_s:
        groups_s.setdefault(codes_s[r], []).append(r)
    groups_t: dict[tuple, list[NodeId]] = {}
    for r in roots_t:
        groups_t.setdefault(codes_t[r], []).append(r)
    if set(groups_s) != set(groups_t):
        return
    if any(len(groups_s[k]) != len(groups_t[k]) for k in groups_s):
        return
    keys = sorted(groups_s)

    def assign(idx: int, acc: dict[NodeId, NodeId],
               queue: list[tuple[NodeId, NodeId]]) -> Iterator[dict[NodeId, NodeId]]:
        if idx == len(keys):
            yield from _match_sets(source, target, queue,
                                   codes_s, codes_t, constraint, acc)
            return
        k = keys[idx]
        for perm in itertools.permutations(groups_t[k]):
            matching = list(zip(groups_s[k], perm))
            if constraint is not None and not all(constraint(x, y) for x, y in matching):
                continue
            for x, y in matching:
                acc[x] = y
            yield from assign(idx + 1, acc, queue + matching)
            for x, _ in matching:
                del acc[x]

    yield from assign(0, {}, [])


def brute_force_isomorphisms(
        source: Forest, target: Forest,
        constraint: Callable[[NodeId, NodeId], bool] | None = None,
) -> Iterator[dict[NodeId, NodeId]]:
    """Oracle: filter all level-preserving bijections for parent commutation.

    Exponential; only for cross-checking the search on small structures.
    """
    if source.dim != target.dim:
        return
    per_level: list[list[dict[NodeId, NodeId]]] = []
    for i in range(source.dim + 1):
        a = sorted(source.levels[i])
        b = sorted(target.levels[i])
        if len(a) != len(b):
            return
        per_level.append([dict(zip(a, perm)) for perm in itertools.permutations(b)])
    for combo in itertools.product(*per_level):
        mapping: dict[NodeId, NodeId] = {}
        for part in combo:
            mapping.update(part)
        if constraint is not None and not all(constraint(s, t) for s, t in mapping.items()):
            continue
        if check_homomorphism(mapping, source, target).is_isomorphism:
            yield mapping


class IdAllocator:
    """Counter handing out fresh node ids for one structure under construction."""

    def __init__(self, start: int = 0):
        self._next = start

    def fresh(self) -> NodeId:
        out = self._next
        self._next += 1
        return out

    @classmethod
    def above(cls, *forests: Forest) -> "IdAllocator":
        top = -1
        for f in forests:
            for s in f.nodes():
                top = max(top, s)
        return cls(top + 1)
