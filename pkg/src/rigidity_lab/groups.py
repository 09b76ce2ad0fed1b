"""Finite groups as multiplication tables, and probability densities on them.

Elements are dense indices ``0..order-1``.  Every group is built by closing a
set of generators under right multiplication; the concrete elements are kept
as integer vectors (permutations, matrices mod p, ...) so that products can be
computed in batches and looked up by an integer code.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GroupError, IncompatibleDensities

ORDER_CAP = 20000
EXHAUSTIVE_ASSOC_ORDER = 256

ProductFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    name: str
    mul: np.ndarray  # (order, order) int32, mul[a, b] = a*b
    inv: np.ndarray
    identity: int
    generators: tuple[int, ...]  # symmetric set K, contains identity
    word_length: np.ndarray
    elements: np.ndarray = field(repr=False)  # (order, width) concrete vectors
    kind: str = "generic"
    params: tuple = ()

    @property
    def order(self) -> int:
        return int(self.mul.shape[0])

    def product(self, a: int, b: int) -> int:
        return int(self.mul[a, b])

    def ball(self, s: int) -> np.ndarray:
        """Indices of K^s, the elements of word length at most s."""
        return np.flatnonzero(self.word_length <= s)

    @property
    def diameter(self) -> int:
        return int(self.word_length.max())

    def non_identity_generators(self) -> tuple[int, ...]:
        return tuple(k for k in self.generators if k != self.identity)

    def label(self, a: int) -> str:
        return f"{self.name}[{a}]:" + ",".join(str(int(v)) for v in self.elements[a])

    def check_invariants(self) -> None:
        n = self.order
        e = self.identity
        if not (np.all(self.mul[e] == np.arange(n)) and np.all(self.mul[:, e] == np.arange(n))):
            raise GroupError("identity row/column is not the identity map")
        if np.any(self.mul[np.arange(n), self.inv] != e):
            raise GroupError("inverse table inconsistent")
        ks = set(self.generators)
        if e not in ks:
            raise GroupError("generating set must contain the identity")
        if any(int(self.inv[k]) not in ks for k in ks):
            raise GroupError("generating set is not symmetric")
        if np.any(self.word_length < 0):
            raise GroupError("generators do not generate the group")
        _check_associativity(self.mul)


def _check_associativity(mul: np.ndarray, samples: int = 200000, seed: int = 0) -> None:
    n = mul.shape[0]
    if n <= EXHAUSTIVE_ASSOC_ORDER:
        for a in range(n):
            left = mul[mul[a]]  # (a*b)*c indexed [b, c]
            right = mul[a][mul]  # a*(b*c)
            if not np.array_equal(left, right):
                raise GroupError("inconsistent spec: multiplication is not associative")
        return
    rng = np.random.default_rng(seed)
    a, b, c = rng.integers(0, n, size=(3, samples))
    if not np.array_equal(mul[mul[a, b], c], mul[a, mul[b, c]]):
        raise GroupError("inconsistent spec: multiplication is not associative")


def _codes(vecs: np.ndarray, base: int) -> np.ndarray:
    weights = base ** np.arange(vecs.shape[1] - 1, -1, -1, dtype=np.int64)
    return vecs.astype(np.int64) @ weights


def close_generators(
    gens: Sequence[np.ndarray],
    identity: np.ndarray,
    product: ProductFn,
    base: int,
    *,
    name: str,
    kind: str = "generic",
    params: tuple = (),
    symmetric_generators: Sequence[np.ndarray] | None = None,
    cap: int = ORDER_CAP,
) -> FiniteGroup:
    """Enumerate the group generated by ``gens`` and build its tables.

    ``product`` multiplies two batches of element vectors row by row.  The
    generating set K is ``{e} ∪ gens ∪ gens^{-1}`` unless
    ``symmetric_generators`` is given explicitly.
    """
    identity = np.asarray(identity, dtype=np.int64)
    gens = [np.asarray(g, dtype=np.int64).reshape(identity.shape) for g in gens]
    if not gens:
        gens = [identity]
    width = identity.size
    elements = [identity]
    index = {int(_codes(identity[None], base)[0]): 0}
    queue = deque([identity])
    gen_batch = np.stack(gens)
    while queue:
        x = queue.popleft()
        prods = product(np.repeat(x[None], len(gens), axis=0), gen_batch)
        for p, code in zip(prods, _codes(prods, base)):
            code = int(code)
            if code not in index:
                if len(elements) >= cap:
                    raise GroupError("group too large")
                index[code] = len(elements)
                elements.append(p)
                queue.append(p)
    elems = np.stack(elements)
    order = len(elems)
    codes = _codes(elems, base)
    sorter = np.argsort(codes)
    sorted_codes = codes[sorter]

    def lookup(vecs: np.ndarray) -> np.ndarray:
        c = _codes(vecs, base)
        pos = np.searchsorted(sorted_codes, c)
        pos = np.clip(pos, 0, order - 1)
        if np.any(sorted_codes[pos] != c):
            raise GroupError("inconsistent spec: generators do not close under products")
        return sorter[pos]

    mul = np.empty((order, order), dtype=np.int32)
    rows = max(1, 2**18 // order)
    for a0 in range(0, order, rows):
        block = elems[a0:a0 + rows]
        left = np.repeat(block, order, axis=0)
        right = np.tile(elems, (len(block), 1))
        mul[a0:a0 + len(block)] = lookup(product(left, right)).reshape(len(block), order)
    e = 0
    inv_hits = mul == e
    if np.any(inv_hits.sum(axis=1) != 1):
        raise GroupError("inconsistent spec: some element has no inverse")
    inv = np.argmax(inv_hits, axis=1).astype(np.int32)

    if symmetric_generators is None:
        gidx = {int(i) for i in lookup(gen_batch)}
    else:
        gidx = {int(i) for i in lookup(np.stack([np.asarray(g).reshape(identity.shape) for g in symmetric_generators]))}
    gidx |= {int(inv[g]) for g in gidx}
    gidx.add(e)
    K = tuple(sorted(gidx))
    wl = _word_lengths(mul, K, e)
    group = FiniteGroup(
        name=name,
        mul=mul,
        inv=inv,
        identity=e,
        generators=K,
        word_length=wl,
        elements=elems.reshape(order, width),
        kind=kind,
        params=params,
    )
    group.check_invariants()
    return group


def _word_lengths(mul: np.ndarray, K: Sequence[int], e: int) -> np.ndarray:
    wl = np.full(mul.shape[0], -1, dtype=np.int32)
    wl[e] = 0
    frontier = [e]
    while frontier:
        nxt = []
        for x in frontier:
            for k in K:
                y = int(mul[x, k])
                if wl[y] < 0:
                    wl[y] = wl[x] + 1
                    nxt.append(y)
        frontier = nxt
    return wl


# -- product rules for the concrete element encodings ------------------------

def _perm_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (a*b)(i) = a(b(i)): apply b first
    return np.take_along_axis(a, b, axis=1)


def _matrix_product(p: int, d: int) -> ProductFn:
    def prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        A = a.reshape(-1, d, d)
        B = b.reshape(-1, d, d)
        return (np.matmul(A, B) % p).reshape(-1, d * d)

    return prod


def _cyclic_product(n: int) -> ProductFn:
    return lambda a, b: (a + b) % n


def _dihedral_product(n: int) -> ProductFn:
    # element (j, s) is x -> (-1)^s x + j on Z/n
    def prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        j = (a[:, 0] + np.where(a[:, 1] == 1, -b[:, 0], b[:, 0])) % n
        s = a[:, 1] ^ b[:, 1]
        return np.stack([j, s], axis=1)

    return prod


def cyclic(n: int) -> FiniteGroup:
    if n < 1:
        raise GroupError("cyclic order must be positive")
    return close_generators([np.array([1 % n])], np.array([0]), _cyclic_product(n), max(n, 2),
                            name=f"cyclic:{n}", kind="cyclic", params=(n,))


def dihedral(n: int) -> FiniteGroup:
    """Symmetries of the regular n-gon (order 2n), K = {e, r, r^-1, s}."""
    if n < 2:
        raise GroupError("dihedral needs n >= 2")
    return close_generators([np.array([1 % n, 0]), np.array([0, 1])], np.array([0, 0]),
                            _dihedral_product(n), max(n, 2), name=f"dihedral:{n}",
                            kind="dihedral", params=(n,))


def symmetric(n: int) -> FiniteGroup:
    if not 1 <= n <= 6:
        raise GroupError("symmetric groups are supported for n <= 6")
    gens = []
    for i in range(n - 1):
        p = np.arange(n)
        p[[i, i + 1]] = p[[i + 1, i]]
        gens.append(p)
    return close_generators(gens, np.arange(n), _perm_product, max(n, 2),
                            name=f"symmetric:{n}", kind="permutation", params=(n,))


def alternating(n: int) -> FiniteGroup:
    if not 3 <= n <= 6:
        raise GroupError("alternating groups are supported for 3 <= n <= 6")
    gens = []
    for i in range(n - 2):
        p = np.arange(n)
        p[[i, i + 1, i + 2]] = [i + 1, i + 2, i]
        gens.append(p)
    return close_generators(gens, np.arange(n), _perm_product, max(n, 2),
                            name=f"alternating:{n}", kind="permutation", params=(n,))


def quaternion() -> FiniteGroup:
    # Q_8 realised inside SL(2, F_3): i -> [[0,-1],[1,0]], j -> [[1,1],[1,-1]]
    i = np.array([0, 2, 1, 0])
    j = np.array([1, 1, 1, 2])
    return close_generators([i, j], np.array([1, 0, 0, 1]), _matrix_product(3, 2), 3,
                            name="quaternion", kind="matrix", params=(3,))


def sl2(p: int) -> FiniteGroup:
    if p not in (2, 3, 5, 7, 11, 13):
        raise GroupError("sl2 is supported for primes p <= 13")
    upper = np.array([1, 1, 0, 1])
    lower = np.array([1, 0, 1, 1])
    return close_generators([upper, lower], np.array([1, 0, 0, 1]), _matrix_product(p, 2), p,
                            name=f"sl2:{p}", kind="matrix", params=(p,))


def from_permutations(perms: Sequence[Sequence[int]], name: str = "perm") -> FiniteGroup:
    arrs = [np.asarray(q, dtype=np.int64) for q in perms]
    if not arrs:
        raise GroupError("inconsistent spec: no generators given")
    n = arrs[0].size
    for q in arrs:
        if q.size != n or sorted(q.tolist()) != list(range(n)):
            raise GroupError("inconsistent spec: generator is not a permutation of 0..n-1")
    return close_generators(arrs, np.arange(n), _perm_product, max(n, 2), name=name,
                            kind="permutation", params=(n,))


def from_matrices(mats: Sequence[np.ndarray], p: int, name: str = "matrix") -> FiniteGroup:
    arrs = [np.asarray(m, dtype=np.int64) % p for m in mats]
    if not arrs:
        raise GroupError("inconsistent spec: no generators given")
    d = arrs[0].shape[0]
    for m in arrs:
        if m.shape != (d, d) or round(np.linalg.det(m)) % p == 0:
            raise GroupError("inconsistent spec: generator is not invertible mod p")
    return close_generators([m.ravel() for m in arrs], np.eye(d, dtype=np.int64).ravel(),
                            _matrix_product(p, d), p, name=name, kind="matrix", params=(p,))


def direct_product(g1: FiniteGroup, g2: FiniteGroup) -> FiniteGroup:
    """G1 x G2 with K = (K1 x {e}) ∪ ({e} x K2)."""
    n1, n2 = g1.order, g2.order

    def prod(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.stack([g1.mul[a[:, 0], b[:, 0]], g2.mul[a[:, 1], b[:, 1]]], axis=1)

    gens = [np.array([k, g2.identity]) for k in g1.generators if k != g1.identity]
    gens += [np.array([g1.identity, k]) for k in g2.generators if k != g2.identity]
    return close_generators(gens, np.array([g1.identity, g2.identity]), prod, max(n1, n2, 2),
                            name=f"{g1.name}x{g2.name}", kind="product", params=(g1, g2))


_FAMILIES = {
    "cyclic": lambda a: cyclic(int(a)),
    "dihedral": lambda a: dihedral(int(a)),
    "symmetric": lambda a: symmetric(int(a)),
    "alternating": lambda a: alternating(int(a)),
    "sl2": lambda a: sl2(int(a)),
    "quaternion": lambda a: quaternion(),
}

FAMILY_HELP = {
    "cyclic:n": "Z/n, K = {e, g, g^-1}",
    "dihedral:n": "D_n of order 2n, K = {e, r, r^-1, s}",
    "symmetric:n": "S_n (n <= 6), adjacent transpositions",
    "alternating:n": "A_n (3 <= n <= 6), consecutive 3-cycles",
    "quaternion": "Q_8, K = {e, i, -i, j, -j}",
    "sl2:p": "SL(2, F_p), p <= 13 prime, elementary matrices",
    "A x B": "direct product of two specs joined by 'x', e.g. cyclic:2xcyclic:3",
}


def build_group(spec: str) -> FiniteGroup:
    """Build a named family, e.g. ``"cyclic:4"`` or ``"cyclic:2xcyclic:3"``."""
    spec = spec.strip()
    if "x" in spec:
        parts = [s for s in spec.split("x") if s]
        if len(parts) > 1:
            g = build_group(parts[0])
            for part in parts[1:]:
                g = direct_product(g, build_group(part))
            return g
    fam, _, arg = spec.partition(":")
    if fam not in _FAMILIES:
        raise GroupError(f"unknown group family {fam!r}")
    if fam != "quaternion" and not arg:
        raise GroupError(f"group family {fam!r} needs a parameter, e.g. {fam}:4")
    try:
        return _FAMILIES[fam](arg)
    except ValueError as exc:
        raise GroupError(f"bad parameter in group spec {spec!r}") from exc


# -- densities ---------------------------------------------------------------

class GroupDensity:
    """A probability weight function on the elements of a finite group."""

    def __init__(self, group: FiniteGroup, weights):
        w = np.asarray(weights, dtype=float)
        if w.shape != (group.order,):
            raise IncompatibleDensities("weights must have one entry per group element")
        if np.any(w < 0):
            raise ValueError("density weights must be nonnegative")
        total = w.sum()
        if abs(total - 1.0) > 1e-12:
            if total <= 0:
                raise ValueError("density has zero mass")
            w = w / total
        self.group = group
        self.weights = w
        self.weights.setflags(write=False)

    @classmethod
    def delta(cls, group: FiniteGroup, a: int | None = None) -> "GroupDensity":
        w = np.zeros(group.order)
        w[group.identity if a is None else a] = 1.0
        return cls(group, w)

    @classmethod
    def uniform_on(cls, group: FiniteGroup, elems) -> "GroupDensity":
        w = np.zeros(group.order)
        w[list(elems)] = 1.0
        return cls(group, w / w.sum())

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    @property
    def radius(self) -> int:
        """Least M with support ⊆ K^M."""
        return int(self.group.word_length[self.support].max())

    @property
    def in_U2(self) -> bool:
        return bool(np.all(self.weights[self.group.ball(2)] > 0))

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.weights, self.weights[self.group.inv], atol=1e-15))

    def __call__(self, a: int) -> float:
        return float(self.weights[a])

    def __repr__(self) -> str:
        return f"GroupDensity({self.group.name}, support={self.support.size})"


def convolve(f: GroupDensity, g: GroupDensity) -> GroupDensity:
    """(f*g)(γ) = Σ_η f(η) g(η⁻¹γ)."""
    if f.group is not g.group:
        raise IncompatibleDensities()
    out = np.zeros(f.group.order)
    for eta in f.support:
        # γ = η ζ  ⇒  contributes f(η) g(ζ)
        np.add.at(out, f.group.mul[eta], f.weights[eta] * g.weights)
    return GroupDensity(f.group, out)


def convolve_power(f: GroupDensity, m: int) -> tuple[GroupDensity, int]:
    """Return f^{*m} and the least M with supp(f^{*m}) ⊆ K^M."""
    if m < 1:
        raise ValueError("convolution power needs m >= 1")
    # square-and-multiply keeps the number of convolutions logarithmic
    result = None
    base, e = f, m
    while e:
        if e & 1:
            result = base if result is None else convolve(result, base)
        e >>= 1
        if e:
            base = convolve(base, base)
    return result, result.radius


def total_variation(f: GroupDensity, g: GroupDensity) -> float:
    if f.group is not g.group:
        raise IncompatibleDensities()
    return 0.5 * float(np.abs(f.weights - g.weights).sum())


def named_density(group: FiniteGroup, spec: str) -> GroupDensity:
    """Parse a density name.

    ``uniform-k``   uniform on K without the identity
    ``lazy-k``      uniform on K (identity included)
    ``uniform-k2``  uniform on K^2 (a member of U2)
    ``lazy-k2:w``   weight w on the identity, the rest spread uniformly on K^2
    ``uniform``     uniform on the whole group
    """
    name, _, arg = spec.partition(":")
    if name == "uniform-k":
        return GroupDensity.uniform_on(group, group.non_identity_generators() or (group.identity,))
    if name == "lazy-k":
        return GroupDensity.uniform_on(group, group.generators)
    if name == "uniform-k2":
        return GroupDensity.uniform_on(group, group.ball(2))
    if name == "lazy-k2":
        w0 = float(arg) if arg else 0.5
        if not 0 < w0 < 1:
            raise ValueError("lazy-k2 weight must lie in (0, 1)")
        ball = group.ball(2)
        w = np.zeros(group.order)
        rest = [b for b in ball if b != group.identity]
        w[group.identity] = w0
        if rest:
            w[rest] = (1 - w0) / len(rest)
        else:
            w[group.identity] = 1.0
        return GroupDensity(group, w)
    if name == "uniform":
        return GroupDensity(group, np.full(group.order, 1.0 / group.order))
    raise ValueError(f"unknown density {spec!r}")
