"""Systems of congruences ``scale*x^2 + offset = 0 (mod modulus)``.

Each equation is split over the prime powers of its modulus, solved there,
and the per-prime-power root sets are glued back together with the CRT.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .arith import (
    FactorBudget,
    Factorization,
    PartialResult,
    crt_combine,
    factorize,
    hensel_lift_sqrt,
    sqrt_mod_prime,
    valuation,
)

__all__ = [
    "QuadraticEquation",
    "QuadraticCongruenceSystem",
    "UnknownModulusFactorization",
    "solve_quadratic_system",
    "sqrt_mod_prime_power",
    "shifted_square_system",
]


class UnknownModulusFactorization(ValueError):
    pass


@dataclass(frozen=True)
class QuadraticEquation:
    scale: int
    offset: int
    modulus: int
    factors: Factorization | None = None

    def holds(self, x: int) -> bool:
        return (self.scale * x * x + self.offset) % self.modulus == 0


@dataclass(frozen=True)
class QuadraticCongruenceSystem:
    equations: tuple[QuadraticEquation, ...]

    def __post_init__(self):
        eqs = tuple(e if isinstance(e, QuadraticEquation) else QuadraticEquation(*e) for e in self.equations)
        object.__setattr__(self, "equations", eqs)
        for e in eqs:
            if e.modulus < 1:
                raise ValueError("moduli must be positive")
            if e.factors is not None and e.factors.value != e.modulus:
                raise ValueError(f"factorization {e.factors} does not match modulus {e.modulus}")
        # raises NonCoprimeModuli for the first clashing pair
        crt_combine([(0, e.modulus) for e in eqs])

    @property
    def modulus(self) -> int:
        out = 1
        for e in self.equations:
            out *= e.modulus
        return out

    def holds(self, x: int) -> bool:
        return all(e.holds(x) for e in self.equations)


def _sqrt_unit_2(u: int, g: int) -> list[int]:
    """Roots of y^2 = u (mod 2^g), u odd."""
    if g == 1:
        return [1]
    if g == 2:
        return [1, 3] if u % 4 == 1 else []
    if u % 8 != 1:
        return []
    r = 1
    for i in range(3, g):
        if (r * r - u) % (1 << (i + 1)):
            r += 1 << (i - 1)
    mod = 1 << g
    half = 1 << (g - 1)
    return sorted({r % mod, -r % mod, (r + half) % mod, (-r + half) % mod})


def _sqrt_unit(u: int, p: int, g: int) -> list[int]:
    if p == 2:
        return _sqrt_unit_2(u, g)
    roots = sqrt_mod_prime(u % p, p)
    return sorted(hensel_lift_sqrt(u, p, g, r) for r in roots)


def sqrt_mod_prime_power(a: int, p: int, e: int) -> list[int]:
    """All x in [0, p^e) with x^2 = a (mod p^e), including non-unit a."""
    mod = p**e
    a %= mod
    if a == 0:
        step = p ** ((e + 1) // 2)
        return list(range(0, mod, step))
    v = valuation(a, p)
    if v % 2:
        return []
    h = v // 2
    g = e - v
    # x = p^h y with y a unit; y is only pinned down mod p^g but x mod p^e
    # needs y mod p^(e-h)
    ys = _sqrt_unit(a // p**v, p, g)
    spread = p ** (e - h - g)
    return sorted({(p**h * (y + t * p**g)) % mod for y in ys for t in range(spread)})


def _solve_prime_power(scale: int, offset: int, p: int, e: int) -> list[int]:
    """Roots of scale*x^2 + offset = 0 modulo p^e."""
    mod = p**e
    c, d = scale % mod, -offset % mod
    if c == 0:
        return list(range(mod)) if d == 0 else []
    vc = valuation(c, p)
    if d % p**vc:
        return []
    f = e - vc
    # reduced equation c' x^2 = d' (mod p^f) with c' a unit
    a = (d // p**vc) * pow(c // p**vc, -1, p**f) % p**f
    roots = sqrt_mod_prime_power(a, p, f) if f else [0]
    width = p**f
    return sorted({r + t * width for r in roots for t in range(p**vc)})


def solve_quadratic_system(
    system: QuadraticCongruenceSystem, budget: FactorBudget | None = None
) -> list[int]:
    """Every x modulo the combined modulus that satisfies all equations, sorted."""
    pieces: list[tuple[list[int], int]] = []
    for eq in system.equations:
        fac = eq.factors
        if fac is None:
            fac = factorize(eq.modulus, budget)
            if isinstance(fac, PartialResult):
                raise UnknownModulusFactorization(f"could not factor modulus {eq.modulus}")
        for p, e in fac:
            roots = _solve_prime_power(eq.scale, eq.offset, p, e)
            if not roots:
                return []
            pieces.append((roots, p**e))
    if not pieces:
        return [0]
    out = []
    mods = [m for _, m in pieces]
    for combo in itertools.product(*(roots for roots, _ in pieces)):
        out.append(crt_combine(list(zip(combo, mods)))[0])
    return sorted(out)


def shifted_square_system(
    p: int,
    q1: int,
    q0: int = 7,
    q2: int = 3,
    q3: int = 5,
    q4: int = 11,
    r0: int = 17,
    r2: int = 19,
    r4: int = 29,
) -> QuadraticCongruenceSystem:
    """Congruences that make n = 2*q1^(p-1)*x^2 - 1 start five integers with 6p divisors:

    n     divisible by q0^(p-1) r0^2
    n + 1 = 2 q1^(p-1) x^2
    n + 2 divisible by q2^(p-1) r2^2
    n + 3 divisible by 4 q3^(p-1)
    n + 4 divisible by q4^(p-1) r4^2

    Defaults are the one fully worked instance.
    """
    scale = 2 * q1 ** (p - 1)

    def eq(offset, *pe):
        f = Factorization.from_dict(dict(pe))
        return QuadraticEquation(scale, offset, f.value, f)

    return QuadraticCongruenceSystem(
        (
            eq(-1, (q0, p - 1), (r0, 2)),
            eq(1, (q2, p - 1), (r2, 2)),
            eq(2, (2, 2), (q3, p - 1)),
            eq(3, (q4, p - 1), (r4, 2)),
        )
    )
