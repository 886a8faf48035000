"""Proven upper bounds on M(k), the longest run of consecutive integers
that all have exactly k divisors.

Each rule checks its own hypothesis on k and, when it holds, contributes a
bound; :func:`rule_bound` takes the minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .arith import factorize, is_prime, small_primes

__all__ = [
    "RuleId",
    "BoundRule",
    "BoundResult",
    "RULES",
    "applicable_rules",
    "rule_bound",
    "smallest_prime_not_dividing",
    "two_adic_valuation",
    "two_prime_splits",
]


class RuleId(str, Enum):
    ODD_K = "ODD_K"
    LEMMA1 = "LEMMA1"
    LEMMA2 = "LEMMA2"
    LEMMA3 = "LEMMA3"
    THEOREM1 = "THEOREM1"
    LEMMA4 = "LEMMA4"
    THEOREM2 = "THEOREM2"
    DE_2P = "DE_2P"
    LEMMA6_K12 = "LEMMA6_K12"
    LEMMA7_K36 = "LEMMA7_K36"
    LEMMA8_K48 = "LEMMA8_K48"
    LEMMA9_K24 = "LEMMA9_K24"
    BASE_M2 = "BASE_M2"
    BASE_M4 = "BASE_M4"


def smallest_prime_not_dividing(k: int) -> int:
    for p in small_primes(1000):
        if k % p:
            return p
    # k would need to exceed the primorial of 997
    raise ValueError("k too large")


def two_adic_valuation(k: int) -> int:
    return (k & -k).bit_length() - 1


def two_prime_splits(k: int) -> list[tuple[int, int]]:
    """All (p, q), p <= q primes, with k == 2*p*q."""
    if k % 2 or k < 8:
        return []
    f = factorize(k // 2)
    primes = [p for p, e in f for _ in range(e)]
    if len(primes) != 2:
        return []
    return [(primes[0], primes[1])]


def _odd(k):
    return 1 if k % 2 else None


def _missing_prime(k):
    # Among 2^p consecutive integers one is 2^(p-1) mod 2^p, so p | tau of it.
    # odd k is settled by ODD_K; the rule is only reported for even k
    if k % 2:
        return None
    return 2 ** smallest_prime_not_dividing(k) - 1


def _two_adic(k):
    s = two_adic_valuation(k)
    if s == 0:
        return None
    # For s > 5 the exponent 2^s + 1 is astronomically large; it only matters
    # when every prime below it divides k, otherwise LEMMA1 is already smaller.
    if s > 5 and 2**s + 1 >= smallest_prime_not_dividing(k):
        return None
    return 2 ** (2**s + 1) - 1


def _mod12(k):
    return 5 if k % 12 in (2, 10) else None


def _six_p(k):
    if k % 6:
        return None
    p = k // 6
    if p == 9 or (p % 2 == 1 and p > 2 and is_prime(p)):
        return 5
    return None


def _two_pq(k):
    return 4 if any(p > 3 and q > 3 for p, q in two_prime_splits(k)) else None


def _two_pq_gcd(k):
    # p == q is admitted (then gcd(p-1, q-1) = p-1).
    return 3 if any(math.gcd(p - 1, q - 1) > 4 for p, q in two_prime_splits(k)) else None


def _de_2p(k):
    if k % 2:
        return None
    p = k // 2
    return 3 if p > 3 and is_prime(p) else None


def _fixed(value: int, bound: int) -> Callable[[int], int | None]:
    return lambda k: bound if k == value else None


@dataclass(frozen=True)
class BoundRule:
    id: RuleId
    citation: str
    bound_fn: Callable[[int], int | None]

    def __call__(self, k: int) -> int | None:
        return self.bound_fn(k)


RULES: tuple[BoundRule, ...] = (
    BoundRule(RuleId.ODD_K, "odd k: only squares have an odd divisor count, so runs have length 1", _odd),
    BoundRule(RuleId.LEMMA1, "p smallest prime not dividing even k: M(k) <= 2^p - 1", _missing_prime),
    BoundRule(RuleId.LEMMA2, "2^s exactly divides k, s >= 1: M(k) <= 2^(2^s + 1) - 1", _two_adic),
    BoundRule(RuleId.LEMMA3, "k = 2 or 10 (mod 12): M(k) <= 5", _mod12),
    BoundRule(RuleId.THEOREM1, "k = 6p, p an odd prime or p = 9: M(k) <= 5", _six_p),
    BoundRule(RuleId.LEMMA4, "k = 2pq, p, q primes > 3 (possibly equal): M(k) <= 4", _two_pq),
    BoundRule(RuleId.THEOREM2, "k = 2pq, p, q primes with gcd(p-1, q-1) > 4: M(k) <= 3", _two_pq_gcd),
    BoundRule(RuleId.DE_2P, "k = 2p, p prime > 3: M(k) <= 3 (Duentsch-Eggleton)", _de_2p),
    BoundRule(RuleId.LEMMA6_K12, "M(12) <= 15", _fixed(12, 15)),
    BoundRule(RuleId.LEMMA7_K36, "M(36) <= 15", _fixed(36, 15)),
    BoundRule(RuleId.LEMMA8_K48, "M(48) <= 31", _fixed(48, 31)),
    BoundRule(RuleId.LEMMA9_K24, "M(24) <= 31", _fixed(24, 31)),
    BoundRule(RuleId.BASE_M2, "M(2) = 2", _fixed(2, 2)),
    BoundRule(RuleId.BASE_M4, "M(4) = 3", _fixed(4, 3)),
)


@dataclass(frozen=True)
class BoundResult:
    k: int
    upper: int
    fired: tuple[tuple[str, int], ...]

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "upper": self.upper,
            "rules": [{"id": rid, "bound": b} for rid, b in self.fired],
        }


def applicable_rules(k: int) -> list[tuple[str, int]]:
    """Every rule whose hypothesis holds for k, in rule order, with its bound."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = []
    for rule in RULES:
        b = rule(k)
        if b is not None:
            out.append((rule.id.value, b))
    return out


def rule_bound(k: int) -> BoundResult:
    fired = applicable_rules(k)
    return BoundResult(k, min(b for _, b in fired), tuple(fired))
