"""Staged search for long runs along a CRT-built arithmetic progression.

A :class:`ProgressionTemplate` fixes ``n_j = a*(s0 + j*m)`` so that for every
j and every offset i in the run, ``n_j + i`` is divisible by a chosen prime
power part ``fixed_i``. The member then has k divisors exactly when the
cofactor ``(n_j + i) / fixed_i`` is coprime to ``fixed_i`` and has
``k / tau(fixed_i)`` divisors.

Candidates j pass four filters, cheapest first:

1. pre-sieve on residues of j (a cofactor picking up another copy of a
   prime from its fixed part, unless the larger exponent still fits k; such
   irregular candidates skip straight to stage 4),
2. probable-prime test of every cofactor that has to be prime,
3. trial division of the remaining cofactors, rejecting those whose small
   factors already make the divisor count impossible,
4. full factorization of every member.

No stage rejects a j whose run really has k divisors throughout; stages
2-3 only remove candidates that are proven bad.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .arith import (
    FactorBudget,
    Factorization,
    PartialResult,
    crt_combine,
    factorize,
    iroot,
    is_prime,
    trial_factor,
    valuation,
)
from .records import RunCertificate, RunRecord, SchemaViolation

__all__ = [
    "SHAPES",
    "TermConstraint",
    "ProgressionTemplate",
    "PipelineStats",
    "SieveConstraint",
    "ExcessClass",
    "Undecided",
    "InconsistentCongruences",
    "TauMismatch",
    "build_template",
    "presieve_constraints",
    "analytic_rejection",
    "presieve",
    "primality_stage",
    "partial_factor_stage",
    "full_verify_stage",
    "run_pipeline",
    "structural_check",
    "load_template",
]

SHAPES = ("prime", "semiprime-distinct", "prime-power", "any-with-tau")
_CHUNK = 1 << 20


class InconsistentCongruences(ValueError):
    pass


class TauMismatch(ValueError):
    pass


def _default_shape(cofactor_tau: int, strict: bool) -> str:
    if cofactor_tau == 2:
        return "prime"
    if cofactor_tau > 2 and is_prime(cofactor_tau):
        return "prime-power"
    if cofactor_tau == 4 and strict:
        return "semiprime-distinct"
    return "any-with-tau"


@dataclass(frozen=True)
class TermConstraint:
    offset: int
    fixed: Factorization
    cofactor_tau: int
    shape: str = "any-with-tau"

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown cofactor shape {self.shape!r}")

    def to_json(self) -> dict:
        return {
            "offset": self.offset,
            "fixed": self.fixed.to_json(),
            "cofactor_tau": self.cofactor_tau,
            "shape": self.shape,
        }


TEMPLATE_SCHEMA = {
    "type": "object",
    "properties": {
        "k": {"type": "integer", "minimum": 1},
        "run_length": {"type": "integer", "minimum": 1},
        "a": {"type": "string", "pattern": "^[0-9]+$"},
        "s0": {"type": "string", "pattern": "^[0-9]+$"},
        "m": {"type": "string", "pattern": "^[0-9]+$"},
        "terms": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "offset": {"type": "integer", "minimum": 0},
                    "fixed": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "p": {"type": "string", "pattern": "^[0-9]+$"},
                                "e": {"type": "integer", "minimum": 1},
                            },
                            "required": ["p", "e"],
                        },
                    },
                    "cofactor_tau": {"type": "integer", "minimum": 1},
                    "shape": {"enum": list(SHAPES)},
                },
                "required": ["offset", "fixed", "cofactor_tau", "shape"],
            },
        },
    },
    "required": ["k", "run_length", "a", "s0", "m", "terms"],
}


@dataclass(frozen=True)
class ProgressionTemplate:
    k: int
    run_length: int
    a: int
    s0: int
    m: int
    terms: tuple[TermConstraint, ...]

    def base(self, j: int) -> int:
        return self.a * (self.s0 + j * self.m)

    def cofactor(self, j: int, offset: int) -> int:
        term = self.terms[offset]
        q, r = divmod(self.base(j) + offset, term.fixed.value)
        if r:
            raise ArithmeticError(f"fixed part does not divide member {offset} at j={j}")
        return q

    @property
    def primes(self) -> list[int]:
        return sorted({p for t in self.terms for p in t.fixed.primes})

    def validate(self, samples: int = 3) -> None:
        """Re-check the invariants a template must satisfy."""
        if [t.offset for t in self.terms] != list(range(self.run_length)):
            raise InconsistentCongruences("terms must cover offsets 0..run_length-1 in order")
        for t in self.terms:
            if t.fixed.tau * t.cofactor_tau != self.k:
                raise TauMismatch(f"offset {t.offset}: tau(fixed) * cofactor_tau != k")
        if self.a < 1 or self.m < 1:
            raise InconsistentCongruences("a and m must be positive")
        for j in range(samples):
            n = self.base(j)
            for t in self.terms:
                if (n + t.offset) % t.fixed.value:
                    raise InconsistentCongruences(f"fixed part at offset {t.offset} fails to divide at j={j}")
        # raises when some offset can never have the exact prime power
        presieve_constraints(self)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "run_length": self.run_length,
            "a": str(self.a),
            "s0": str(self.s0),
            "m": str(self.m),
            "terms": [t.to_json() for t in self.terms],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ProgressionTemplate":
        try:
            jsonschema.validate(doc, TEMPLATE_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(exc.message) from exc
        terms = tuple(
            TermConstraint(t["offset"], Factorization.from_json(t["fixed"]), t["cofactor_tau"], t["shape"])
            for t in sorted(doc["terms"], key=lambda t: t["offset"])
        )
        tpl = cls(doc["k"], doc["run_length"], int(doc["a"]), int(doc["s0"]), int(doc["m"]), terms)
        tpl.validate()
        return tpl

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


def load_template(path) -> ProgressionTemplate:
    return ProgressionTemplate.from_json(json.loads(Path(path).read_text()))


def build_template(
    k: int,
    run_length: int,
    assignments: Iterable[tuple[int, Factorization | int]],
    pin: Sequence[int] = (2,),
    strict: bool = False,
) -> ProgressionTemplate:
    """Solve for (a, s0, m) so that ``fixed_i | a*(s0 + j*m) + i`` for all j.

    ``a`` is the fixed part at offset 0. For each prime p the congruence is
    imposed at the offset carrying the highest power of p; every other
    offset's power of p is then forced by the offset difference and must
    match what was asked for. Primes in ``pin`` get one more power in m so
    that their exponents are exact for every j (no pre-sieve needed); the
    rest are left to the pre-sieve.
    """
    fixed = {i: Factorization() for i in range(run_length)}
    for off, f in assignments:
        if not 0 <= off < run_length:
            raise ValueError(f"offset {off} outside the run")
        if isinstance(f, int):
            f = factorize(f)
            if isinstance(f, PartialResult):
                raise ValueError("could not factor a fixed part")
        fixed[off] = fixed[off] * f
    for off, f in fixed.items():
        if k % f.tau:
            raise TauMismatch(f"tau({f.value}) = {f.tau} does not divide k={k} at offset {off}")

    a = fixed[0].value
    congruences = []
    for p in sorted({p for f in fixed.values() for p in f.primes}):
        exps = [fixed[i].exponent(p) for i in range(run_length)]
        top = max(exps)
        i0 = exps.index(top)
        for i, e in enumerate(exps):
            if i == i0:
                continue
            d = valuation(i - i0, p)
            if (e < top and d != e) or (e == top and d < top):
                raise InconsistentCongruences(
                    f"p={p}: offset {i} asks for p^{e} but offset {i0} forces p^{min(d, top)}"
                )
        v = exps[0]
        c = top - v
        if c:
            # (a / p^v) t = -i0 / p^v  (mod p^c)
            t0 = (-(i0 // p**v)) * pow(a // p**v, -1, p**c) % p**c
        else:
            t0 = 0
        if p in pin:
            mod = p ** (c + 1)
            for t in range(t0, mod, p**c):
                if all(valuation(a * (t + mod) + i, p) == e for i, e in enumerate(exps)):
                    t0, c = t, c + 1
                    break
            else:
                raise InconsistentCongruences(f"cannot pin the exponents of {p}")
        if c:
            congruences.append((t0, p**c))
    s0, m = crt_combine(congruences)

    terms = tuple(
        TermConstraint(i, fixed[i], k // fixed[i].tau, _default_shape(k // fixed[i].tau, strict))
        for i in range(run_length)
    )
    tpl = ProgressionTemplate(k, run_length, a, s0, m, terms)
    tpl.validate()
    return tpl


# ---------------------------------------------------------------------------
# stage 1: pre-sieve


@dataclass(frozen=True)
class ExcessClass:
    """j in ``residue`` mod ``modulus`` puts one more power of the prime into
    the member at ``offset``. Such j are only rejected outside ``allowed``:
    pairs of classes (at least p^e', at least p^(e'+1)) marking an exact
    exponent e' that still leaves a divisor count compatible with k."""

    offset: int
    residue: int
    modulus: int
    allowed: tuple[tuple[int, int, int, int], ...] = ()

    @property
    def allowed_density(self) -> float:
        return sum(1 / lo_mod - 1 / hi_mod for _, lo_mod, _, hi_mod in self.allowed)


@dataclass(frozen=True)
class SieveConstraint:
    prime: int
    classes: tuple[ExcessClass, ...]

    @property
    def period(self) -> int:
        return max(c.modulus for c in self.classes)

    @property
    def rejected(self) -> tuple[int, ...]:
        """Residues mod ``period`` where some member exceeds its power of the prime."""
        out = set()
        for c in self.classes:
            out.update(range(c.residue, self.period, c.modulus))
        return tuple(sorted(out))

    @property
    def fraction(self) -> float:
        return len(self.rejected) / self.period - sum(c.allowed_density for c in self.classes)


def _class_of(start: int, am: int, p: int, w: int, t: int) -> tuple[int, int]:
    """(r, p^(t-w)) with p^t | start + j*am exactly when j = r mod p^(t-w)."""
    mod = p ** (t - w)
    r = -(start // p**w) * pow(am // p**w, -1, mod) % mod if mod > 1 else 0
    return r, mod


def presieve_constraints(tpl: ProgressionTemplate) -> list[SieveConstraint]:
    """One constraint per template prime whose exponent is not pinned for all j."""
    am = tpl.a * tpl.m
    base = tpl.a * tpl.s0
    out = []
    for p in tpl.primes:
        w = valuation(am, p)
        classes = []
        for t in tpl.terms:
            e = t.fixed.exponent(p)
            # when w > e the exponent is e for every j
            if not e or w > e:
                continue
            start = base + t.offset
            r, mod = _class_of(start, am, p, w, e + 1)
            if mod == 1:
                raise InconsistentCongruences(f"prime {p} exceeds its fixed power for every j")
            rest_tau = t.fixed.tau // (e + 1)
            allowed = []
            for e2 in range(e + 1, tpl.k):
                if tpl.k % ((e2 + 1) * rest_tau) == 0:
                    allowed.append(_class_of(start, am, p, w, e2) + _class_of(start, am, p, w, e2 + 1))
            classes.append(ExcessClass(t.offset, r, mod, tuple(allowed)))
        if classes:
            out.append(SieveConstraint(p, tuple(classes)))
    return out


def analytic_rejection(tpl: ProgressionTemplate) -> float:
    """Expected pre-sieve rejection fraction; residues for distinct primes are independent."""
    keep = 1.0
    for c in presieve_constraints(tpl):
        keep *= 1.0 - c.fraction
    return 1.0 - keep


def _class_mask(n: int, lo: int, r: int, mod: int) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    first = (r - lo) % mod
    if first < n:
        if mod < n:
            mask[first::mod] = True
        else:
            mask[first] = True
    return mask


@dataclass
class PipelineStats:
    examined: int = 0
    rejected_presieve: int = 0
    rejected_primality: int = 0
    rejected_partial_factor: int = 0
    rejected_full_factor: int = 0
    hits: int = 0
    undecided: int = 0
    seed: int = 0

    def __add__(self, other: "PipelineStats") -> "PipelineStats":
        vals = {f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self) if f.name != "seed"}
        return PipelineStats(**vals, seed=self.seed)

    @property
    def conserved(self) -> bool:
        return self.examined == (
            self.rejected_presieve
            + self.rejected_primality
            + self.rejected_partial_factor
            + self.rejected_full_factor
            + self.hits
            + self.undecided
        )

    def to_json(self) -> dict:
        return asdict(self)


def _presieve(tpl: ProgressionTemplate, j_from: int, j_to: int) -> tuple[np.ndarray, np.ndarray, PipelineStats]:
    """Split surviving j into regular ones (every fixed part exact) and
    irregular ones (some prime power exceeded in a way k still allows)."""
    n = max(0, j_to - j_from)
    keep = np.ones(n, dtype=bool)
    excess = np.zeros(n, dtype=bool)
    for c in presieve_constraints(tpl):
        for cls in c.classes:
            over = _class_mask(n, j_from, cls.residue, cls.modulus)
            ok = ~over
            for r_lo, m_lo, r_hi, m_hi in cls.allowed:
                ok |= _class_mask(n, j_from, r_lo, m_lo) & ~_class_mask(n, j_from, r_hi, m_hi)
            keep &= ok
            excess |= over
    regular = np.flatnonzero(keep & ~excess).astype(np.int64) + j_from
    irregular = np.flatnonzero(keep & excess).astype(np.int64) + j_from
    stats = PipelineStats(examined=n, rejected_presieve=n - len(regular) - len(irregular))
    return regular, irregular, stats


def presieve(tpl: ProgressionTemplate, j_from: int, j_to: int) -> tuple[np.ndarray, PipelineStats]:
    """Surviving j in [j_from, j_to), computed on residues of j only.

    A j is dropped when a member picks up an extra power of one of its fixed
    primes and the resulting exponent cannot fit into k divisors.
    """
    regular, irregular, stats = _presieve(tpl, j_from, j_to)
    return np.union1d(regular, irregular), stats


# ---------------------------------------------------------------------------
# stage 2: probable primes


def primality_stage(tpl: ProgressionTemplate, js: Iterable[int], seed: int = 0) -> tuple[list[int], PipelineStats]:
    """Keep j when every cofactor that must be prime is a probable prime."""
    prime_terms = [t.offset for t in tpl.terms if t.shape == "prime"]
    kept, stats = [], PipelineStats(seed=seed)
    for j in js:
        j = int(j)
        if all(is_prime(tpl.cofactor(j, i), seed=seed) for i in prime_terms):
            kept.append(j)
        else:
            stats.rejected_primality += 1
    return kept, stats


# ---------------------------------------------------------------------------
# stage 3: partial factorization


def _min_big_factors(t: int) -> int:
    """Fewest prime factors (with multiplicity) of a number with t divisors."""
    f = factorize(t)
    return sum((p - 1) * e for p, e in f)


def cofactor_possible(c: int, tau_needed: int, shape: str, limit: int) -> bool:
    """False only when trial division up to ``limit`` proves c cannot have
    ``tau_needed`` divisors (in the required shape)."""
    if c == 1:
        return tau_needed == 1
    if shape == "prime":
        return tau_needed == 2 and bool(is_prime(c))
    if shape == "prime-power":
        r, exact = iroot(c, tau_needed - 1)
        return exact and bool(is_prime(r))
    strict = shape == "semiprime-distinct"
    found, rest = trial_factor(c, limit)
    tf = found.tau
    if strict and any(e > 1 for _, e in found):
        return False
    if rest == 1:
        return tf == tau_needed and (not strict or len(found) == 2)
    if tau_needed % tf:
        return False
    need = tau_needed // tf
    if is_prime(rest):
        return need == 2 and (not strict or len(found) == 1)
    # rest is composite with every prime factor > limit
    if need < 3:
        return False
    if rest < (limit + 1) ** _min_big_factors(need):
        return False
    if strict and (found or iroot(rest, 2)[1]):
        return False
    return True


def partial_factor_stage(
    tpl: ProgressionTemplate, js: Iterable[int], budget: FactorBudget | None = None
) -> tuple[list[int], PipelineStats]:
    budget = budget or FactorBudget()
    terms = [t for t in tpl.terms if t.shape != "prime"]
    kept, stats = [], PipelineStats(seed=budget.seed)
    for j in js:
        j = int(j)
        if all(
            cofactor_possible(tpl.cofactor(j, t.offset), t.cofactor_tau, t.shape, budget.trial_division_limit)
            for t in terms
        ):
            kept.append(j)
        else:
            stats.rejected_partial_factor += 1
    return kept, stats


# ---------------------------------------------------------------------------
# stage 4: full factorization


@dataclass(frozen=True)
class Undecided:
    j: int
    start: int
    offset: int
    partial: PartialResult

    def to_json(self) -> dict:
        return {
            "j": self.j,
            "start": str(self.start),
            "offset": self.offset,
            "found": self.partial.found.to_json(),
            "cofactor": str(self.partial.cofactor),
        }


def full_verify_stage(
    tpl: ProgressionTemplate, js: Iterable[int], budget: FactorBudget | None = None
) -> tuple[list[RunRecord], list[Undecided], PipelineStats]:
    """Factor every member; emit a certified record when all have k divisors."""
    budget = budget or FactorBudget()
    # composite-shaped cofactors are the likeliest to fail, so they go first
    order = sorted(tpl.terms, key=lambda t: t.shape == "prime")
    records, parked, stats = [], [], PipelineStats(seed=budget.seed)
    for j in js:
        j = int(j)
        start = tpl.base(j)
        members: dict[int, Factorization] = {}
        outcome = "hit"
        for t in order:
            res = factorize(tpl.cofactor(j, t.offset), budget)
            if isinstance(res, PartialResult):
                parked.append(Undecided(j, start, t.offset, res))
                outcome = "undecided"
                break
            f = t.fixed * res
            if f.tau != tpl.k:
                outcome = "reject"
                break
            members[t.offset] = f
        if outcome == "hit":
            cert = RunCertificate.from_factorizations(
                tpl.k, start, [members[i] for i in range(tpl.run_length)], f"structured search, j={j}"
            )
            records.append(RunRecord(tpl.k, start, tpl.run_length, "structured-search", False, cert))
            stats.hits += 1
        elif outcome == "undecided":
            stats.undecided += 1
        else:
            stats.rejected_full_factor += 1
    return records, parked, stats


# ---------------------------------------------------------------------------
# driver


def _pipeline_chunk(tpl, j_from, j_to, budget):
    records, parked = [], []
    stats = PipelineStats(seed=budget.seed)
    for lo in range(j_from, j_to, _CHUNK):
        hi = min(j_to, lo + _CHUNK)
        js, odd, st = _presieve(tpl, lo, hi)
        stats += st
        js, st = primality_stage(tpl, js, budget.seed)
        stats += st
        js, st = partial_factor_stage(tpl, js, budget)
        stats += st
        # irregular j break the cofactor shapes stages 2-3 rely on; factor them directly
        js = sorted(js + odd.tolist())
        recs, und, st = full_verify_stage(tpl, js, budget)
        stats += st
        records += recs
        parked += und
    return records, parked, stats


def run_pipeline(
    tpl: ProgressionTemplate,
    j_from: int,
    j_to: int,
    budget: FactorBudget | None = None,
    seed: int = 0,
    park: str | Path | None = None,
    workers: int = 1,
) -> tuple[list[RunRecord], PipelineStats]:
    """Run all four stages over j in [j_from, j_to).

    Results are in j order and identical for a given seed whatever the
    worker count. Undecided candidates are appended to ``park`` as JSON
    lines when a path is given.
    """
    budget = replace(budget or FactorBudget(), seed=seed)
    if j_to <= j_from:
        return [], PipelineStats(seed=seed)
    if workers > 1 and j_to - j_from >= 2 * workers:
        step = -(-(j_to - j_from) // workers)
        bounds = [(lo, min(j_to, lo + step)) for lo in range(j_from, j_to, step)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(
                pool.map(
                    _pipeline_chunk,
                    [tpl] * len(bounds),
                    [b[0] for b in bounds],
                    [b[1] for b in bounds],
                    [budget] * len(bounds),
                )
            )
    else:
        parts = [_pipeline_chunk(tpl, j_from, j_to, budget)]
    records, parked, stats = [], [], PipelineStats(seed=seed)
    for recs, und, st in parts:
        records += recs
        parked += und
        stats += st
    if park is not None and parked:
        with open(park, "a") as fh:
            for u in parked:
                fh.write(json.dumps(u.to_json()) + "\n")
    return records, stats


def structural_check(tpl: ProgressionTemplate, j: int) -> dict:
    """Cheap evidence for a claimed hit too large to factor: divisibility by
    every fixed part, exact prime powers, and primality of prime-shaped
    cofactors (composite-shaped ones are only checked for small factors)."""
    start = tpl.base(j)
    out = {"j": j, "start": start, "divisible": True, "exact_powers": True, "prime_cofactors": True}
    for t in tpl.terms:
        n = start + t.offset
        if n % t.fixed.value:
            out["divisible"] = False
            continue
        q = n // t.fixed.value
        if any(q % p == 0 for p in t.fixed.primes):
            out["exact_powers"] = False
        if t.shape == "prime" and not is_prime(q):
            out["prime_cofactors"] = False
    out["ok"] = out["divisible"] and out["exact_powers"] and out["prime_cofactors"]
    return out
