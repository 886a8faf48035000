import math
import random

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from equidiv.arith import (
    COMPOSITE,
    PRIME_DETERMINISTIC,
    PRIME_PROBABILISTIC,
    BudgetExhausted,
    FactorBudget,
    Factorization,
    ModulusNotPrime,
    NonCoprimeModuli,
    PartialResult,
    SingularLift,
    crt_combine,
    factorize,
    hensel_lift_sqrt,
    iroot,
    is_perfect_square,
    is_prime,
    repunit_gcds,
    sqrt_mod_prime,
    tau,
    tau_of,
    trial_factor,
    valuation,
)


def divisor_count(n):
    """Oracle: count divisors by pairing d with n // d."""
    c = 0
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            c += 1 if d * d == n else 2
    return c


def tau_table(limit):
    """Oracle: tau(1..limit) by adding 1 at every multiple of every d."""
    t = np.zeros(limit + 1, dtype=np.int32)
    for d in range(1, limit + 1):
        t[d::d] += 1
    return t


# --- primality ---------------------------------------------------------------


def test_is_prime_known_values():
    assert is_prime(41047).status == PRIME_DETERMINISTIC
    v = is_prime(1)
    assert v.status == COMPOSITE and v.witness is None
    assert not is_prime(0)
    assert is_prime(2) and is_prime(3)
    assert not is_prime(561)  # Carmichael


def test_is_prime_matches_sympy_below_10_5():
    for n in range(10**5):
        assert bool(is_prime(n)) == sympy.isprime(n), n


def test_strong_pseudoprimes_to_small_bases_are_composite():
    # strong pseudoprimes to bases 2..37 jointly are beyond 3e24; these fool fewer bases
    for n in (2047, 1373653, 25326001, 3215031751, 2152302898747, 3474749660383, 341550071728321, 3825123056546413051):
        assert not is_prime(n), n


def test_composite_witness_divides():
    rng = random.Random(3)
    for _ in range(500):
        n = rng.randrange(4, 10**12)
        v = is_prime(n)
        if v.status == COMPOSITE and v.witness is not None:
            assert 1 < v.witness < n and n % v.witness == 0


def test_above_64_bits_probabilistic_and_deterministic():
    p = 2**89 - 1
    assert is_prime(p).status == PRIME_PROBABILISTIC
    assert is_prime(p, deterministic=True).is_deterministic
    assert not is_prime((2**61 - 1) * (2**67 - 1))
    assert not is_prime((2**61 - 1) ** 2)


def test_deterministic_and_default_paths_agree_below_10_7():
    rng = random.Random(7)
    sample = [rng.randrange(10**7) for _ in range(20000)] + list(range(10**7 - 2000, 10**7))
    for n in sample:
        assert bool(is_prime(n)) == bool(is_prime(n, deterministic=True))


def _smallest_factor_2_64_plus_13():
    """Oracle: trial division of 2^64+13 by every d <= 2^32+1 coprime to 30.

    Uses n mod d = ((2^32 mod d)^2 + 13) mod d, which fits in uint64."""
    n = 2**64 + 13
    for d in (2, 3, 5):
        if n % d == 0:
            return d
    wheel = np.array([1, 7, 11, 13, 17, 19, 23, 29], dtype=np.uint64)
    two32 = np.uint64(1 << 32)
    limit = (1 << 32) + 1
    step = 1 << 21
    for q0 in range(0, limit // 30 + 1, step):
        q = np.arange(q0, min(q0 + step, limit // 30 + 1), dtype=np.uint64)
        d = (q[:, None] * np.uint64(30) + wheel[None, :]).ravel()
        d = d[(d > 1) & (d <= limit)]
        if d.size and d[-1] == limit:
            if n % limit == 0:
                return limit
            d = d[:-1]
        r = two32 % d
        hit = (r * r + np.uint64(13)) % d == 0
        if hit.any():
            return int(d[np.argmax(hit)])
    return None


def test_2_64_plus_13_against_trial_division():
    n = 2**64 + 13
    oracle_prime = _smallest_factor_2_64_plus_13() is None
    assert bool(is_prime(n)) == oracle_prime
    assert bool(is_prime(n, deterministic=True)) == oracle_prime


# --- factorization ------------------------------------------------------------


def test_factorize_examples():
    assert factorize(72).factors == ((2, 3), (3, 2))
    assert factorize(1).factors == ()
    assert factorize(10403).factors == ((101, 1), (103, 1))


def test_factorize_semiprime_beyond_trial_division():
    p, q = 1000000007, 998244353
    assert factorize(p * q).factors == ((q, 1), (p, 1))
    assert factorize(p**3 * q).factors == ((q, 1), (p, 3))


def test_factorize_perfect_power_of_large_prime():
    p = 2**61 - 1
    assert factorize(p**4).factors == ((p, 4),)


def test_factorize_reconstructs_and_tau_matches_enumeration_to_10_6():
    table = tau_table(10**6)
    for n in range(1, 10**6 + 1):
        f = factorize(n)
        assert f.value == n
        assert f.tau == table[n]


def test_tau_examples():
    assert tau(242) == 6
    assert tau(1) == 1
    assert tau(96) == divisor_count(96) == 12


def test_tau_of_examples():
    assert tau_of(Factorization(((2, 2), (3, 1)))) == 6
    assert tau_of(Factorization(((2, 1), (17, 18)))) == 38
    f = Factorization(((2, 2), (41047, 1), (44449284079, 1), (105284315902411137115055983, 1)))
    assert tau_of(f) == 24


def test_budget_exhaustion_returns_partial():
    # two 40-bit primes; rho cannot finish in 50 iterations
    p, q = 1099511627791, 1099511628401
    res = factorize(12 * p * q, FactorBudget(rho_iteration_limit=50, wall_clock_ms=1000))
    assert isinstance(res, PartialResult)
    assert res.found.factors == ((2, 2), (3, 1))
    assert res.cofactor == p * q
    assert res.value == 12 * p * q
    with pytest.raises(BudgetExhausted):
        tau(12 * p * q, FactorBudget(rho_iteration_limit=50, wall_clock_ms=1000))


def test_budget_rejects_non_positive_limits():
    with pytest.raises(ValueError):
        FactorBudget(trial_division_limit=0)
    with pytest.raises(ValueError):
        FactorBudget(wall_clock_ms=-1)


def test_trial_factor_splits_small_part():
    found, rest = trial_factor(2**5 * 3 * 1009 * 1013, 1000)
    assert found.factors == ((2, 5), (3, 1))
    assert rest == 1009 * 1013


def test_factorization_json_round_trip_and_validation():
    f = Factorization(((2, 2), (3, 1), (44449284079, 1)))
    assert Factorization.from_json(f.to_json()) == f
    assert f.to_json()[2] == {"p": "44449284079", "e": 1}
    assert str(f) == "2^2 * 3 * 44449284079"
    with pytest.raises(ValueError):
        Factorization(((3, 1), (2, 1)))
    with pytest.raises(ValueError):
        Factorization(((2, 0),))
    assert not Factorization(((2, 1), (9, 1))).validate()


@settings(max_examples=300, deadline=None)
@given(st.integers(min_value=1, max_value=10**18))
def test_factorize_property(n):
    f = factorize(n)
    assert f.value == n
    assert all(sympy.isprime(p) for p in f.primes)
    assert f.as_dict() == sympy.factorint(n)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10**6), st.integers(1, 10**6))
def test_tau_multiplicative(a, b):
    if math.gcd(a, b) == 1:
        assert tau(a * b) == tau(a) * tau(b)


def test_tau_multiplicative_random_pairs():
    rng = random.Random(11)
    done = 0
    while done < 2000:
        a, b = rng.randint(1, 10**6), rng.randint(1, 10**6)
        if math.gcd(a, b) == 1:
            assert tau(a * b) == tau(a) * tau(b)
            done += 1


# --- squares and roots ------------------------------------------------------------


def test_is_perfect_square_examples():
    assert is_perfect_square(0) == (True, 0)
    assert is_perfect_square(243) == (False, None)
    assert is_perfect_square(10**40) == (True, 10**20)


def test_twice_odd_square_is_never_square():
    for x in range(1, 10**4 + 1, 2):
        assert not is_perfect_square(2 * x * x)[0]


def test_parity_law_to_10_6():
    table = tau_table(10**6)
    squares = np.zeros(10**6 + 1, dtype=bool)
    squares[np.arange(1, 1001) ** 2] = True
    assert np.array_equal((table[1:] % 2 == 1), squares[1:])
    for n in range(1, 10**6 + 1, 997):
        assert (tau(n) % 2 == 1) == is_perfect_square(n)[0]


@given(st.integers(0, 10**60), st.integers(1, 12))
def test_iroot(n, k):
    r, exact = iroot(n, k)
    assert r**k <= n < (r + 1) ** k
    assert exact == (r**k == n)


def test_valuation():
    assert valuation(2**18 * 3, 2) == 18
    assert valuation(-81, 3) == 4
    with pytest.raises(ValueError):
        valuation(0, 2)


# --- CRT ------------------------------------------------------------------------


def test_crt_examples():
    assert crt_combine([(2, 3), (3, 5)]) == (8, 15)
    assert crt_combine([(0, 7)]) == (0, 7)
    with pytest.raises(NonCoprimeModuli) as exc:
        crt_combine([(1, 4), (3, 4)])
    assert exc.value.gcd == 4


def test_crt_exhaustive_small():
    rng = random.Random(5)
    for _ in range(300):
        ms = []
        while len(ms) < rng.randint(1, 4):
            m = rng.randint(1, 40)
            if all(math.gcd(m, x) == 1 for x in ms):
                ms.append(m)
        M = math.prod(ms)
        if M > 10**5:
            continue
        rs = [rng.randrange(m) for m in ms]
        x, mod = crt_combine(list(zip(rs, ms)))
        want = [y for y in range(M) if all(y % m == r for r, m in zip(rs, ms))]
        assert mod == M and [x] == want


@given(st.lists(st.tuples(st.integers(0, 10**6), st.integers(1, 10**4)), min_size=1, max_size=5))
def test_crt_property(pairs):
    ms = [m for _, m in pairs]
    if any(math.gcd(a, b) != 1 for i, a in enumerate(ms) for b in ms[i + 1 :]):
        with pytest.raises(NonCoprimeModuli):
            crt_combine(pairs)
        return
    x, M = crt_combine(pairs)
    assert 0 <= x < M == math.prod(ms)
    assert all(x % m == r % m for r, m in pairs)


# --- modular square roots ---------------------------------------------------------


def test_sqrt_mod_prime_examples():
    assert sqrt_mod_prime(2, 7) == [3, 4]
    assert sqrt_mod_prime(0, 5) == [0]
    assert sqrt_mod_prime(3, 5) == []
    with pytest.raises(ModulusNotPrime):
        sqrt_mod_prime(1, 9)


def test_hensel_examples():
    assert hensel_lift_sqrt(2, 7, 2, 3) == 10
    assert hensel_lift_sqrt(4, 5, 3, 2) == 2
    assert hensel_lift_sqrt(2, 7, 3, 3) == 108
    with pytest.raises(SingularLift):
        hensel_lift_sqrt(0, 5, 2, 0)


def test_roots_match_brute_force_for_odd_prime_powers_to_10_4():
    for p in sympy.primerange(3, 10**4):
        e = 1
        while p**e <= 10**4:
            q = p**e
            squares = {}
            for x in range(q):
                squares.setdefault(x * x % q, []).append(x)
            for a in range(q):
                if a % p == 0:
                    continue  # lifting needs a unit root
                want = squares.get(a, [])
                got = sorted(hensel_lift_sqrt(a, p, e, r) for r in sqrt_mod_prime(a % p, p))
                assert got == want, (a, q)
            e += 1


def test_sqrt_mod_large_prime():
    p = 2**127 - 1
    for a in (2, 3, 10**30 + 7):
        roots = sqrt_mod_prime(a, p)
        assert all(r * r % p == a % p for r in roots)
        assert len(roots) in (0, 2)


# --- repunit gcds -----------------------------------------------------------------


def test_repunit_gcd_examples():
    assert repunit_gcds(4, 3)[0] == 3
    assert repunit_gcds(2, 5)[0] == 1
    assert repunit_gcds(2, 3)[1] == 3
    with pytest.raises(ValueError):
        repunit_gcds(5, 4)


def test_repunit_gcds_against_direct_sums():
    rng = random.Random(9)
    for _ in range(300):
        n, s = rng.randint(2, 300), rng.randrange(1, 40, 2)
        plain = sum(n**i for i in range(s))
        alt = sum((-1) ** i * n ** (s - 1 - i) for i in range(s))
        assert repunit_gcds(n, s) == (math.gcd(n - 1, plain), math.gcd(n + 1, alt))


def test_repunit_gcds_divide_s():
    rng = random.Random(13)
    for _ in range(10**4):
        n, s = rng.randint(2, 10**6), rng.randrange(1, 100, 2)
        gm, gp = repunit_gcds(n, s)
        assert s % gm == 0 and s % gp == 0
