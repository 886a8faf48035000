"""Arbitrary-precision number theory primitives.

Everything here works on plain Python ints. Randomised pieces (Pollard rho
restarts, Miller-Rabin bases above 2**64) draw from a ``random.Random``
seeded per call, so results are reproducible.
"""

from __future__ import annotations

import bisect
import functools
import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

__all__ = [
    "Factorization",
    "PrimalityVerdict",
    "FactorBudget",
    "PartialResult",
    "BudgetExhausted",
    "NonCoprimeModuli",
    "ModulusNotPrime",
    "SingularLift",
    "PRIME_DETERMINISTIC",
    "PRIME_PROBABILISTIC",
    "COMPOSITE",
    "small_primes",
    "is_prime",
    "is_probable_prime",
    "factorize",
    "trial_factor",
    "tau",
    "tau_of",
    "is_perfect_square",
    "iroot",
    "valuation",
    "crt_combine",
    "sqrt_mod_prime",
    "hensel_lift_sqrt",
    "repunit_gcds",
    "jacobi",
]

PRIME_DETERMINISTIC = "prime-deterministic"
PRIME_PROBABILISTIC = "prime-probabilistic"
COMPOSITE = "composite"

_U64 = 1 << 64
# Strong pseudoprime bases that are exact for every n < 3.3e24.
_DET_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_MR_ROUNDS = 40


class BudgetExhausted(RuntimeError):
    """Factoring stopped before completion; ``partial`` holds what was found."""

    def __init__(self, partial: "PartialResult"):
        super().__init__(
            f"factoring budget exhausted; unfactored cofactor has "
            f"{len(str(partial.cofactor))} digits"
        )
        self.partial = partial


class NonCoprimeModuli(ValueError):
    def __init__(self, m1: int, m2: int, g: int):
        super().__init__(f"moduli {m1} and {m2} share the factor {g}")
        self.pair = (m1, m2)
        self.gcd = g


class ModulusNotPrime(ValueError):
    pass


class SingularLift(ValueError):
    pass


# ---------------------------------------------------------------------------
# small primes


def _sieve(limit: int) -> list[int]:
    if limit < 2:
        return []
    flags = bytearray([1]) * (limit + 1)
    flags[0] = flags[1] = 0
    for p in range(2, math.isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = bytearray(len(range(p * p, limit + 1, p)))
    return [i for i, f in enumerate(flags) if f]


_SMALL_LIMIT = 1 << 16
_SMALL_PRIMES = _sieve(_SMALL_LIMIT)
_SMALL_SET = frozenset(_SMALL_PRIMES)


@functools.lru_cache(maxsize=32)
def _primes_upto(limit: int) -> tuple[int, ...]:
    if limit <= _SMALL_LIMIT:
        return tuple(_SMALL_PRIMES[: bisect.bisect_right(_SMALL_PRIMES, limit)])
    return tuple(_sieve(limit))


def small_primes(limit: int) -> tuple[int, ...]:
    """All primes <= limit."""
    return _primes_upto(int(limit))


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class Factorization:
    """Prime factorization as ``((p1, e1), (p2, e2), ...)`` with p1 < p2 < ...

    Primality of the listed primes is not re-checked here; use
    :meth:`validate` when the factors come from an untrusted source.
    """

    factors: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        facs = tuple((int(p), int(e)) for p, e in self.factors)
        object.__setattr__(self, "factors", facs)
        prev = 1
        for p, e in facs:
            if p <= prev:
                raise ValueError(f"primes must be strictly increasing and > 1, got {p} after {prev}")
            if e < 1:
                raise ValueError(f"exponent of {p} must be >= 1, got {e}")
            prev = p

    @classmethod
    def from_dict(cls, d: dict[int, int]) -> "Factorization":
        return cls(tuple(sorted((p, e) for p, e in d.items() if e)))

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "Factorization":
        return cls(tuple((int(it["p"]), int(it["e"])) for it in items))

    def to_json(self) -> list[dict]:
        return [{"p": str(p), "e": e} for p, e in self.factors]

    def as_dict(self) -> dict[int, int]:
        return dict(self.factors)

    @property
    def value(self) -> int:
        out = 1
        for p, e in self.factors:
            out *= p**e
        return out

    @property
    def tau(self) -> int:
        return math.prod(e + 1 for _, e in self.factors)

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.factors)

    def exponent(self, p: int) -> int:
        for q, e in self.factors:
            if q == p:
                return e
        return 0

    def __mul__(self, other: "Factorization") -> "Factorization":
        d = self.as_dict()
        for p, e in other.factors:
            d[p] = d.get(p, 0) + e
        return Factorization.from_dict(d)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def __str__(self) -> str:
        if not self.factors:
            return "1"
        return " * ".join(f"{p}^{e}" if e > 1 else str(p) for p, e in self.factors)

    def validate(self, deterministic: bool = False) -> bool:
        return all(is_prime(p, deterministic=deterministic) for p in self.primes)


@dataclass(frozen=True)
class PrimalityVerdict:
    """Outcome of :func:`is_prime`.

    ``witness`` is only ever a proper divisor of n. ``method`` names the test
    that settled the question; ``miller-grh`` means every base up to
    2*ln(n)**2 was tried, which is a proof only under the generalised
    Riemann hypothesis.
    """

    status: str
    witness: int | None = None
    method: str = ""

    def __bool__(self) -> bool:
        return self.status != COMPOSITE

    @property
    def is_deterministic(self) -> bool:
        return self.status != PRIME_PROBABILISTIC


@dataclass(frozen=True)
class FactorBudget:
    trial_division_limit: int = 1000
    rho_iteration_limit: int = 10**7
    wall_clock_ms: int = 60_000
    seed: int = 0

    def __post_init__(self):
        if self.trial_division_limit <= 0 or self.rho_iteration_limit <= 0 or self.wall_clock_ms <= 0:
            raise ValueError("all budget limits must be positive")


@dataclass(frozen=True)
class PartialResult:
    """Prime factors found so far plus the product of everything unresolved.

    Exponents in ``found`` are exact and ``cofactor`` (> 1) is coprime to
    them, so tau(n) == found.tau * tau(cofactor).
    """

    found: Factorization
    cofactor: int
    cofactor_verdict: PrimalityVerdict = field(default_factory=lambda: PrimalityVerdict(COMPOSITE))

    @property
    def value(self) -> int:
        return self.found.value * self.cofactor


# ---------------------------------------------------------------------------
# primality


def _strong_probable_prime(n: int, a: int, d: int, s: int) -> tuple[bool, int | None]:
    """One Miller-Rabin round. Returns (passes, factor found on the way)."""
    x = pow(a, d, n)
    if x == 1 or x == n - 1:
        return True, None
    for _ in range(s - 1):
        y = x * x % n
        if y == n - 1:
            return True, None
        if y == 1:
            # x is a nontrivial square root of 1
            return False, math.gcd(x - 1, n)
        x = y
    if x * x % n == 1:
        return False, math.gcd(x - 1, n)
    return False, None


def jacobi(a: int, n: int) -> int:
    if n <= 0 or n % 2 == 0:
        raise ValueError("jacobi symbol needs an odd positive modulus")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def _strong_lucas(n: int) -> bool:
    """Strong Lucas probable-prime test with Selfridge's parameter choice."""
    if is_perfect_square(n)[0]:
        return False
    D = 5
    while True:
        j = jacobi(D, n)
        if j == -1:
            break
        if j == 0 and abs(D) != n:
            return False
        D = -D - 2 if D > 0 else -D + 2
    P, Q = 1, (1 - D) // 4
    d, s = n + 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1

    inv2 = (n + 1) // 2
    U, V, Qk = 1, P, Q % n
    for bit in bin(d)[3:]:
        U, V = U * V % n, (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if bit == "1":
            U, V = (P * U + V) * inv2 % n, (D * U + P * V) * inv2 % n
            Qk = Qk * Q % n
    if U == 0 or V == 0:
        return True
    for _ in range(s - 1):
        V = (V * V - 2 * Qk) % n
        Qk = Qk * Qk % n
        if V == 0:
            return True
    return False


def _trial_verdict(n: int) -> PrimalityVerdict | None:
    if n < 2:
        return PrimalityVerdict(COMPOSITE, None, "below-2")
    if n in _SMALL_SET:
        return PrimalityVerdict(PRIME_DETERMINISTIC, None, "table")
    for p in _SMALL_PRIMES[:60]:
        if n % p == 0:
            return PrimalityVerdict(COMPOSITE, p, "trial")
    if n < _SMALL_LIMIT:
        return PrimalityVerdict(PRIME_DETERMINISTIC, None, "table")
    return None


def _miller_rabin(n: int, bases: Iterable[int]) -> PrimalityVerdict | None:
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in bases:
        a %= n
        if a < 2:
            continue
        ok, g = _strong_probable_prime(n, a, d, s)
        if not ok:
            w = g if g is not None and 1 < g < n else None
            return PrimalityVerdict(COMPOSITE, w, "miller-rabin")
    return None


def is_probable_prime(n: int) -> bool:
    """Cheap BPSW-style check (base-2 strong test + strong Lucas)."""
    v = _trial_verdict(n)
    if v is not None:
        return bool(v)
    if _miller_rabin(n, (2,)) is not None:
        return False
    if n < _U64:
        return _miller_rabin(n, _DET_BASES) is None
    return _strong_lucas(n)


def is_prime(n: int, deterministic: bool = False, seed: int | None = None) -> PrimalityVerdict:
    """Primality verdict for n >= 0.

    Below 2**64 the answer is always exact. Above, the default is 40
    random-base Miller-Rabin rounds plus a strong Lucas test; pass
    ``deterministic=True`` to ask for a proof (slow for large n).
    """
    v = _trial_verdict(n)
    if v is not None:
        return v
    if n < _U64:
        bad = _miller_rabin(n, _DET_BASES)
        return PrimalityVerdict(PRIME_DETERMINISTIC, None, "miller-rabin-64") if bad is None else bad

    rng = random.Random(n if seed is None else seed)
    bases = [2] + [rng.randrange(3, n - 1) for _ in range(_MR_ROUNDS - 1)]
    bad = _miller_rabin(n, bases)
    if bad is not None:
        return bad
    if not _strong_lucas(n):
        return PrimalityVerdict(COMPOSITE, None, "lucas")
    if not deterministic:
        return PrimalityVerdict(PRIME_PROBABILISTIC, None, "miller-rabin-40+lucas")
    return _prove_prime(n)


def _prove_prime(n: int) -> PrimalityVerdict:
    if _pocklington(n):
        return PrimalityVerdict(PRIME_DETERMINISTIC, None, "pocklington")
    limit = min(n - 2, int(2 * math.log(n) ** 2))
    bad = _miller_rabin(n, range(2, limit + 1))
    return PrimalityVerdict(PRIME_DETERMINISTIC, None, "miller-grh") if bad is None else bad


def _pocklington(n: int, budget_ms: int = 5_000) -> bool:
    """Pocklington's n-1 test; True only when a complete proof was found."""
    res = factorize(n - 1, FactorBudget(trial_division_limit=10_000, wall_clock_ms=budget_ms))
    if isinstance(res, PartialResult):
        F, R = res.found, res.cofactor
        if res.cofactor_verdict:
            # a probable-prime cofactor can itself be proven recursively
            F = F * Factorization(((R, 1),)) if R > 1 else F
            R = 1
    else:
        F, R = res, 1
    if F.value ** 2 <= n:
        return False
    for q, _ in F:
        if q >= _U64 and is_prime(q, deterministic=True).status != PRIME_DETERMINISTIC:
            return False
        for a in range(2, 200):
            if pow(a, n - 1, n) != 1:
                return False
            g = math.gcd(pow(a, (n - 1) // q, n) - 1, n)
            if g == 1:
                break
            if g != n:
                return False
        else:
            return False
    return True


# ---------------------------------------------------------------------------
# factoring


def iroot(n: int, k: int) -> tuple[int, bool]:
    """Integer k-th root: (floor(n**(1/k)), exact?)."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n < 2:
        return n, True
    if k == 1:
        return n, True
    if k == 2:
        r = math.isqrt(n)
        return r, r * r == n
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    return x, x**k == n


def _perfect_power(n: int) -> tuple[int, int] | None:
    for k in small_primes(n.bit_length()):
        r, exact = iroot(n, k)
        if exact:
            return r, k
    return None


class _Deadline:
    def __init__(self, ms: int):
        self.end = time.monotonic() + ms / 1000.0

    def expired(self) -> bool:
        return time.monotonic() > self.end


def _brent(n: int, rng: random.Random, max_iter: int, deadline: _Deadline) -> tuple[int | None, int]:
    """Pollard rho with Brent's cycle detection. Returns (factor or None, iterations used)."""
    if n % 2 == 0:
        return 2, 0
    used = 0
    while used < max_iter:
        y, c, m = rng.randrange(1, n), rng.randrange(1, n), 128
        g = r = q = 1
        x = ys = y
        while g == 1:
            x = y
            for _ in range(r):
                y = (y * y + c) % n
            k = 0
            while k < r and g == 1:
                ys = y
                for _ in range(min(m, r - k)):
                    y = (y * y + c) % n
                    q = q * abs(x - y) % n
                g = math.gcd(q, n)
                k += m
            used += r
            r *= 2
            if used >= max_iter or deadline.expired():
                return None, used
        if g == n:
            g = 1
            while g == 1:
                ys = (ys * ys + c) % n
                g = math.gcd(abs(x - ys), n)
        if g != n:
            return g, used
        if deadline.expired():
            break
    return None, used


def _trial_divide(n: int, limit: int, found: dict[int, int]) -> int:
    for p in small_primes(limit):
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            found[p] = found.get(p, 0) + e
    else:
        if n > limit * limit:
            return n
    # no prime <= sqrt(n) is left, so n is 1 or prime
    if n > 1:
        found[n] = found.get(n, 0) + 1
    return 1


def trial_factor(n: int, limit: int) -> tuple[Factorization, int]:
    """Strip prime factors <= limit. Returns (found part, rest); every prime
    factor of rest exceeds limit, and rest is 1 or prime when rest <= limit**2."""
    found: dict[int, int] = {}
    rest = _trial_divide(n, limit, found)
    return Factorization.from_dict(found), rest


def factorize(n: int, budget: FactorBudget | None = None) -> Factorization | PartialResult:
    """Factor n >= 1.

    Trial division up to ``budget.trial_division_limit``, then Pollard-Brent
    rho with random restarts on each composite piece. On budget exhaustion
    returns a :class:`PartialResult` instead of raising.
    """
    if n < 1:
        raise ValueError("factorize needs n >= 1")
    budget = budget or FactorBudget()
    deadline = _Deadline(budget.wall_clock_ms)
    rng = random.Random(budget.seed)
    found: dict[int, int] = {}
    rest = _trial_divide(n, budget.trial_division_limit, found)

    stack = [(rest, 1)] if rest > 1 else []
    stuck: list[tuple[int, int]] = []
    iters_left = budget.rho_iteration_limit
    while stack:
        m, mult = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            found[m] = found.get(m, 0) + mult
            continue
        pp = _perfect_power(m)
        if pp is not None:
            stack.append((pp[0], mult * pp[1]))
            continue
        if iters_left <= 0 or deadline.expired():
            stuck.append((m, mult))
            continue
        d, used = _brent(m, rng, iters_left, deadline)
        iters_left -= used
        if d is None:
            stuck.append((m, mult))
            continue
        # split off every power of d at once
        e = 0
        while m % d == 0:
            m //= d
            e += 1
        stack.append((d, mult * e))
        stack.append((m, mult))

    if not stuck:
        return Factorization.from_dict(found)
    cof = math.prod(m**mult for m, mult in stuck)
    # a prime found on one branch may still hide in an unresolved piece
    for p in list(found):
        while cof % p == 0:
            cof //= p
            found[p] += 1
    if cof == 1:
        return Factorization.from_dict(found)
    return PartialResult(Factorization.from_dict(found), cof, is_prime(cof))


def tau_of(f: Factorization) -> int:
    return f.tau


def tau(n: int, budget: FactorBudget | None = None) -> int:
    """Number of divisors of n >= 1; raises :class:`BudgetExhausted`."""
    res = factorize(n, budget)
    if isinstance(res, PartialResult):
        raise BudgetExhausted(res)
    return res.tau


def is_perfect_square(n: int) -> tuple[bool, int | None]:
    if n < 0:
        return False, None
    r = math.isqrt(n)
    return (True, r) if r * r == n else (False, None)


def valuation(n: int, p: int) -> int:
    """Exponent of p in n (n != 0)."""
    if n == 0:
        raise ValueError("valuation of 0 is infinite")
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


# ---------------------------------------------------------------------------
# modular arithmetic


def crt_combine(residues: Sequence[tuple[int, int]]) -> tuple[int, int]:
    """Solve x = r_i (mod m_i) for pairwise coprime m_i; returns (x, prod m_i)."""
    ms = [m for _, m in residues]
    for i in range(len(ms)):
        if ms[i] < 1:
            raise ValueError("moduli must be positive")
        for j in range(i + 1, len(ms)):
            g = math.gcd(ms[i], ms[j])
            if g != 1:
                raise NonCoprimeModuli(ms[i], ms[j], g)
    x, M = 0, 1
    for r, m in residues:
        # x + M*t = r (mod m)
        t = (r - x) * pow(M, -1, m) % m if m > 1 else 0
        x += M * t
        M *= m
    return x % M, M


def sqrt_mod_prime(a: int, p: int) -> list[int]:
    """All square roots of a modulo the prime p, ascending (Tonelli-Shanks)."""
    if not is_prime(p):
        raise ModulusNotPrime(f"{p} is not prime")
    a %= p
    if p == 2 or a == 0:
        return [a]
    if pow(a, (p - 1) // 2, p) != 1:
        return []
    if p % 4 == 3:
        x = pow(a, (p + 1) // 4, p)
    else:
        q, s = p - 1, 0
        while q % 2 == 0:
            q //= 2
            s += 1
        z = 2
        while pow(z, (p - 1) // 2, p) != p - 1:
            z += 1
        m, c, t, x = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
        while t != 1:
            i, t2 = 0, t
            while t2 != 1:
                t2 = t2 * t2 % p
                i += 1
            b = pow(c, 1 << (m - i - 1), p)
            m, c = i, b * b % p
            t, x = t * c % p, x * b % p
    return sorted({x, p - x})


def hensel_lift_sqrt(a: int, p: int, e: int, root_mod_p: int) -> int:
    """Lift a square root of a mod p to mod p**e (Newton iteration)."""
    r = root_mod_p % p
    if (r * r - a) % p:
        raise ValueError(f"{root_mod_p} is not a square root of {a} mod {p}")
    if (2 * r) % p == 0:
        raise SingularLift(f"p={p} divides 2*root; the lift is not unique")
    pk, target = p, p**e
    # each Newton step doubles the number of correct p-adic digits
    while pk < target:
        pk = min(pk * pk, target)
        r = (r - (r * r - a) * pow(2 * r, -1, pk)) % pk
    return r % target


def repunit_gcds(n: int, s: int) -> tuple[int, int]:
    """gcd(n-1, sum n^i) and gcd(n+1, alternating sum), i < s; both divide odd s."""
    if s % 2 == 0 or s < 1:
        raise ValueError("s must be odd and positive")
    if n <= 1:
        raise ValueError("n must exceed 1")
    # reduce the sums modulo n-1 and n+1 instead of building them
    m1, m2 = n - 1, n + 1
    plus = minus = 0
    for i in range(s):
        minus = (minus * n + 1) % m1 if m1 > 1 else 0
        plus = (plus * n + (1 if i % 2 == 0 else -1)) % m2
    return math.gcd(m1, minus), math.gcd(m2, plus)
