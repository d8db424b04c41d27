"""Seeded instance generators.

Nambu inputs are manufactured as pushforwards of normal forms by random
coordinate changes, which keeps the Nambu property by construction.
"""

from __future__ import annotations

import random
from itertools import combinations
from typing import Sequence

from . import exact
from .nambu_core import type1_normal_form, type2_normal_form
from .polyring import PolyMap, TruncPoly, monomials
from .tensorcalc import Multivector, pushforward


def rng_of(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def sign_patterns(q: int) -> list[tuple]:
    """Nondegenerate weight patterns up to reordering and overall sign: pos >= neg."""
    k = q + 1
    return [(1,) * pos + (-1,) * (k - pos) for pos in range(k, (k - 1) // 2, -1)]


def random_poly(n: int, cap: int, degrees: Sequence[int], rng, density: float = 0.3, coeff: int = 2) -> TruncPoly:
    terms = {}
    for d in degrees:
        for e in monomials(n, d):
            if rng.random() < density:
                c = rng.randint(-coeff, coeff)
                if c:
                    terms[e] = c
    return TruncPoly.from_terms(n, cap, terms)


def random_invertible_matrix(n: int, seed=None, entries: int = 2) -> list[list[int]]:
    """Integer matrix with nonzero determinant (rejection sampling)."""
    rng = rng_of(seed)
    while True:
        M = [[rng.randint(-entries, entries) for _ in range(n)] for _ in range(n)]
        if exact.matrix(M).det() != 0:
            return M


def random_unimodular_matrix(n: int, seed=None, steps: int = 6) -> list[list[int]]:
    """Product of elementary integer shears; determinant 1."""
    rng = rng_of(seed)
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(steps):
        i, j = rng.sample(range(n), 2)
        c = rng.choice((-1, 1))
        for col in range(n):
            M[i][col] += c * M[j][col]
    return M


def random_near_identity(n: int, cap: int, seed=None, degree: int = 3, density: float = 0.3, coeff: int = 2) -> PolyMap:
    rng = rng_of(seed)
    comps = []
    for j in range(n):
        f = TruncPoly.var(n, cap, j) + random_poly(n, cap, range(2, min(degree, cap) + 1), rng, density, coeff)
        comps.append(f)
    return PolyMap(comps)


def random_type2_b(q: int, n: int, seed=None, entries: int = 3) -> list[list[int]]:
    rng = rng_of(seed)
    m = n - q + 1
    return [[rng.randint(-entries, entries) for _ in range(m)] for _ in range(m)]


def random_multivector(n: int, cap: int, degree: int, seed=None, coeff_degree: int = 3, density: float = 0.2) -> Multivector:
    rng = rng_of(seed)
    comps = {}
    for idx in combinations(range(n), degree):
        if rng.random() < 0.6:
            f = random_poly(n, cap, range(0, min(coeff_degree, cap) + 1), rng, density)
            if f:
                comps[idx] = f
    return Multivector(n, cap, degree, comps)


def perturbed_type1(q: int, n: int, weights: Sequence, cap: int, seed=None, degree: int = 3, density: float = 0.3):
    """(Pi, phi) with Pi = phi_* of the Type 1 normal form and phi near-identity."""
    phi = random_near_identity(n, cap, seed, degree, density)
    P = pushforward(phi, type1_normal_form(q, n, weights, (), cap))
    return P, phi


def conjugated_type1(q: int, n: int, weights: Sequence, cross_weights: Sequence = (), cap: int = 1, seed=None):
    """Linear normal form pushed by a random invertible integer matrix."""
    A = random_invertible_matrix(n, seed)
    return pushforward(PolyMap.linear(A, cap), type1_normal_form(q, n, weights, cross_weights, cap)), A


def conjugated_type2(q: int, n: int, b, cap: int = 1, seed=None):
    A = random_invertible_matrix(n, seed)
    return pushforward(PolyMap.linear(A, cap), type2_normal_form(q, n, b, cap)), A
