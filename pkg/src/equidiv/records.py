"""Run records, run certificates and the catalog of known M(k) values."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema

from .arith import (
    PRIME_DETERMINISTIC,
    FactorBudget,
    Factorization,
    PartialResult,
    factorize,
    is_prime,
)
from .bounds import rule_bound

__all__ = [
    "RunRecord",
    "RunCertificate",
    "MemberCheck",
    "CertificateReport",
    "RunReport",
    "CatalogEntry",
    "Catalog",
    "MalformedCertificate",
    "SchemaViolation",
    "BoundConflict",
    "verify_certificate",
    "verify_run",
    "load_certificate",
    "bundled_certificate",
    "default_catalog",
    "exact_values_table",
    "VALID",
    "INVALID",
    "UNDECIDED",
]

VALID, INVALID, UNDECIDED = "valid", "invalid", "undecided"
SOURCES = ("scan", "structured-search", "imported")


class MalformedCertificate(ValueError):
    pass


class SchemaViolation(ValueError):
    pass


class BoundConflict(ValueError):
    pass


_FACTOR_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {"p": {"type": "string", "pattern": "^[0-9]+$"}, "e": {"type": "integer"}},
        "required": ["p", "e"],
        "additionalProperties": False,
    },
}

CERTIFICATE_SCHEMA = {
    "type": "object",
    "properties": {
        "k": {"type": "integer", "minimum": 1},
        "start": {"type": "string", "pattern": "^[0-9]+$"},
        "length": {"type": "integer", "minimum": 1},
        "members": {"type": ["array", "null"], "items": _FACTOR_SCHEMA},
        "provenance": {"type": "string"},
    },
    "required": ["k", "start", "length"],
    "additionalProperties": False,
}

CATALOG_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "k": {"type": "integer", "minimum": 1},
            "exact": {"type": ["integer", "null"]},
            "lower": {"type": "integer", "minimum": 1},
            "upper": {"type": "integer", "minimum": 1},
            "witness_start": {"type": ["string", "null"], "pattern": "^[0-9]+$"},
            "extra_witnesses": {"type": "array", "items": {"type": "string", "pattern": "^[0-9]+$"}},
            "source": {"type": "string"},
            "adhoc": {"type": "boolean"},
            "note": {"type": "string"},
        },
        "required": ["k", "lower", "upper", "source"],
        "additionalProperties": False,
    },
}


# ---------------------------------------------------------------------------
# runs and certificates


@dataclass(frozen=True)
class RunCertificate:
    """A claimed run plus, optionally, the factorization of every member.

    ``members`` keeps the raw (prime, exponent) pairs exactly as supplied so
    that a badly ordered or otherwise broken certificate can still be loaded
    and reported on.
    """

    k: int
    start: int
    length: int
    members: tuple[tuple[tuple[int, int], ...], ...] | None = None
    provenance: str = ""

    @classmethod
    def from_json(cls, doc: dict) -> "RunCertificate":
        try:
            jsonschema.validate(doc, CERTIFICATE_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(exc.message) from exc
        members = doc.get("members")
        if members is not None:
            members = tuple(tuple((int(f["p"]), int(f["e"])) for f in m) for m in members)
        return cls(doc["k"], int(doc["start"]), doc["length"], members, doc.get("provenance", ""))

    @classmethod
    def from_factorizations(cls, k: int, start: int, members: Sequence[Factorization], provenance: str = ""):
        return cls(k, start, len(members), tuple(m.factors for m in members), provenance)

    def to_json(self) -> dict:
        doc = {"k": self.k, "start": str(self.start), "length": self.length}
        if self.members is not None:
            doc["members"] = [[{"p": str(p), "e": e} for p, e in m] for m in self.members]
        doc["provenance"] = self.provenance
        return doc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


def load_certificate(path) -> RunCertificate:
    return RunCertificate.from_json(json.loads(Path(path).read_text()))


def bundled_certificate(name: str) -> RunCertificate:
    """Load one of the shipped certificates: ``"run24"`` or ``"run48"``."""
    text = resources.files("equidiv").joinpath("data").joinpath(f"{name}.json").read_text()
    return RunCertificate.from_json(json.loads(text))


@dataclass(frozen=True)
class RunRecord:
    k: int
    start: int
    length: int
    source: str = "scan"
    truncated: bool = False
    certificate: RunCertificate | None = None

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("run length must be >= 1")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def stop(self) -> int:
        """One past the last member."""
        return self.start + self.length

    def to_json(self) -> dict:
        doc = {
            "k": self.k,
            "start": str(self.start),
            "length": self.length,
            "source": self.source,
            "truncated": self.truncated,
        }
        if self.certificate is not None:
            doc["certificate"] = self.certificate.to_json()
        return doc


@dataclass
class MemberCheck:
    index: int
    value: int
    verdict: str
    tau: int | None = None
    reasons: list[str] = field(default_factory=list)
    factorization: Factorization | None = None
    partial: PartialResult | None = None


@dataclass
class CertificateReport:
    certificate: RunCertificate
    members: list[MemberCheck]

    @property
    def valid(self) -> bool:
        return all(m.verdict == VALID for m in self.members)

    @property
    def failures(self) -> list[MemberCheck]:
        return [m for m in self.members if m.verdict != VALID]

    def to_json(self) -> dict:
        return {
            "k": self.certificate.k,
            "start": str(self.certificate.start),
            "length": self.certificate.length,
            "verdict": VALID if self.valid else INVALID,
            "failures": [{"index": m.index, "reasons": m.reasons} for m in self.failures],
        }


def verify_certificate(cert: RunCertificate, deterministic: bool = False) -> CertificateReport:
    """Check reconstruction, prime ordering, primality and tau for every member.

    Primes below 2**64 are always checked exactly; larger ones get 40
    Miller-Rabin rounds plus a Lucas test unless ``deterministic`` is set.
    """
    if cert.members is None:
        raise MalformedCertificate("certificate carries no member factorizations")
    if len(cert.members) != cert.length:
        raise MalformedCertificate(f"length {cert.length} but {len(cert.members)} members")

    checks = []
    for i, pairs in enumerate(cert.members):
        n = cert.start + i
        reasons = []
        primes = [p for p, _ in pairs]
        if any(b <= a for a, b in zip(primes, primes[1:])):
            reasons.append("primes not strictly increasing")
        if any(e < 1 for _, e in pairs):
            reasons.append("exponent below 1")
        prod = math.prod(p**e for p, e in pairs if e >= 0)
        if prod != n:
            reasons.append("product does not reconstruct start+index")
        for p in primes:
            v = is_prime(p, deterministic=deterministic)
            if not v:
                reasons.append(f"{p} is not prime")
            elif deterministic and v.status != PRIME_DETERMINISTIC:
                reasons.append(f"{p} not proven prime")
        t = math.prod(e + 1 for _, e in pairs)
        if t != cert.k:
            reasons.append(f"tau = {t} != {cert.k}")
        checks.append(MemberCheck(i, n, INVALID if reasons else VALID, t, reasons))
    return CertificateReport(cert, checks)


@dataclass
class RunReport:
    k: int
    start: int
    length: int
    members: list[MemberCheck]

    @property
    def verdict(self) -> str:
        verdicts = {m.verdict for m in self.members}
        if INVALID in verdicts:
            return INVALID
        if UNDECIDED in verdicts:
            return UNDECIDED
        return VALID

    def certificate(self, provenance: str = "") -> RunCertificate | None:
        if self.verdict != VALID:
            return None
        return RunCertificate.from_factorizations(
            self.k, self.start, [m.factorization for m in self.members], provenance
        )

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "start": str(self.start),
            "length": self.length,
            "verdict": self.verdict,
            "members": [
                {
                    "index": m.index,
                    "verdict": m.verdict,
                    "tau": m.tau,
                    "factorization": m.factorization.to_json() if m.factorization else None,
                    "partial": (
                        {"found": m.partial.found.to_json(), "cofactor": str(m.partial.cofactor)}
                        if m.partial
                        else None
                    ),
                }
                for m in self.members
            ],
        }


def verify_run(k: int, start: int, length: int, budget: FactorBudget | None = None) -> RunReport:
    """Factor start, ..., start+length-1 and check each has k divisors.

    ``budget.wall_clock_ms`` covers the whole run. A member whose cofactor
    resists factoring is ``undecided`` unless what was found already rules
    it out.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    budget = budget or FactorBudget()
    end = time.monotonic() + budget.wall_clock_ms / 1000.0
    checks = []
    for i in range(length):
        n = start + i
        left = max(1, int((end - time.monotonic()) * 1000))
        res = factorize(n, replace(budget, wall_clock_ms=left))
        if isinstance(res, PartialResult):
            t_found = res.found.tau
            # tau(cofactor) >= 2, and >= 3 once the cofactor is known composite
            least = 2 if res.cofactor_verdict else 3
            if k % t_found or k // t_found < least:
                checks.append(MemberCheck(i, n, INVALID, None, [f"found part alone forces tau not {k}"], None, res))
            else:
                checks.append(MemberCheck(i, n, UNDECIDED, None, ["budget exhausted"], None, res))
            continue
        t = res.tau
        verdict = VALID if t == k else INVALID
        reasons = [] if verdict == VALID else [f"tau = {t} != {k}"]
        checks.append(MemberCheck(i, n, verdict, t, reasons, res))
    return RunReport(k, start, length, checks)


# ---------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class CatalogEntry:
    k: int
    lower: int
    upper: int
    exact: int | None = None
    witness_start: int | None = None
    source: str = ""
    adhoc: bool = False
    extra_witnesses: tuple[int, ...] = ()
    note: str = ""

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"k={self.k}: lower {self.lower} exceeds upper {self.upper}")
        if self.exact is not None and not (self.lower == self.upper == self.exact):
            raise ValueError(f"k={self.k}: exact value must equal both bounds")

    def to_json(self) -> dict:
        doc = {
            "k": self.k,
            "exact": self.exact,
            "lower": self.lower,
            "upper": self.upper,
            "witness_start": None if self.witness_start is None else str(self.witness_start),
            "extra_witnesses": [str(w) for w in self.extra_witnesses],
            "source": self.source,
            "adhoc": self.adhoc,
        }
        if self.note:
            doc["note"] = self.note
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "CatalogEntry":
        w = doc.get("witness_start")
        return cls(
            k=doc["k"],
            lower=doc["lower"],
            upper=doc["upper"],
            exact=doc.get("exact"),
            witness_start=None if w is None else int(w),
            source=doc["source"],
            adhoc=doc.get("adhoc", False),
            extra_witnesses=tuple(int(x) for x in doc.get("extra_witnesses", ())),
            note=doc.get("note", ""),
        )


class Catalog:
    """Known bounds on M(k), keyed by k. Callers serialize concurrent upserts."""

    def __init__(self, entries: Iterable[CatalogEntry] = ()):
        self._entries: dict[int, CatalogEntry] = {}
        for e in entries:
            self._check(e)
            self._entries[e.k] = e

    def __len__(self):
        return len(self._entries)

    def __contains__(self, k):
        return k in self._entries

    def __iter__(self):
        return iter(self.entries())

    def entries(self) -> list[CatalogEntry]:
        return [self._entries[k] for k in sorted(self._entries)]

    @staticmethod
    def _check(entry: CatalogEntry) -> None:
        proven = rule_bound(entry.k).upper
        if entry.upper > proven:
            raise BoundConflict(f"k={entry.k}: catalog upper {entry.upper} exceeds proven bound {proven}")
        if entry.upper < proven and not entry.adhoc:
            raise BoundConflict(
                f"k={entry.k}: upper {entry.upper} is tighter than the rules ({proven}) but not flagged adhoc"
            )

    def query(self, k: int) -> CatalogEntry:
        """Stored entry for k, or one derived from the bound rules alone."""
        if k in self._entries:
            return self._entries[k]
        b = rule_bound(k).upper
        return CatalogEntry(k, 1, b, exact=1 if b == 1 else None, source="bound rules")

    def upsert(self, item: "CatalogEntry | RunRecord") -> CatalogEntry:
        if isinstance(item, RunRecord):
            cur = self.query(item.k)
            if item.length > cur.upper:
                raise BoundConflict(
                    f"run of length {item.length} for k={item.k} exceeds the upper bound {cur.upper}"
                )
            if item.length <= cur.lower:
                return cur
            exact = item.length if item.length == cur.upper else None
            entry = replace(
                cur,
                lower=item.length,
                exact=exact,
                witness_start=item.start,
                source=f"{cur.source}; run from {item.source}",
            )
        else:
            entry = item
        self._check(entry)
        self._entries[entry.k] = entry
        return entry

    def sweep(self) -> list[str]:
        """Consistency problems across all entries (empty when clean)."""
        problems = []
        for e in self.entries():
            proven = rule_bound(e.k).upper
            if e.lower > e.upper:
                problems.append(f"k={e.k}: lower > upper")
            if e.upper > proven:
                problems.append(f"k={e.k}: upper {e.upper} > proven {proven}")
            if e.upper < proven and not (e.adhoc and e.source):
                problems.append(f"k={e.k}: unflagged tightening")
        return problems

    def to_json(self) -> list[dict]:
        return [e.to_json() for e in self.entries()]

    @classmethod
    def from_json(cls, doc) -> "Catalog":
        try:
            jsonschema.validate(doc, CATALOG_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(exc.message) from exc
        return cls(CatalogEntry.from_json(d) for d in doc)

    @classmethod
    def load(cls, path) -> "Catalog":
        return cls.from_json(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")


TABLE_SOURCE = "published table of exact values"
# Record runs: k -> (lower, start values)
RECORD_RUNS = {
    12: (13, (99949636937406199604777509122843,)),
    36: (11, (12821655678011960184516598560606241547734025340946441558430971,)),
    24: (17, (768369049267672356024049141254832375543516,)),
    48: (17, (6611413170876398465463663454441440157066140, 19702712619881487242100642851944119672614940)),
}
K76_WITNESS = int(
    "2775270598603581528049602020344980538485734694771608751022026551506129981"
    "330662646538924360751256259918212890621"
)


def exact_values_table() -> dict:
    return json.loads(resources.files("equidiv").joinpath("data").joinpath("exact_values.json").read_text())


def default_catalog() -> Catalog:
    """Catalog built from the bundled table of exact values plus record runs."""
    entries = []
    for row in exact_values_table()["rows"]:
        M = row["M"]
        ks = row["k"]
        for idx, k in enumerate(ks):
            proven = rule_bound(k).upper
            note = ""
            if idx and k < ks[idx - 1]:
                note = "out of sorted order in the published row; kept verbatim"
            entries.append(
                CatalogEntry(
                    k,
                    M,
                    M,
                    exact=M,
                    witness_start=K76_WITNESS if k == 76 else None,
                    source=TABLE_SOURCE,
                    adhoc=M < proven,
                    note=note,
                )
            )
    for k, (lower, starts) in RECORD_RUNS.items():
        entries.append(
            CatalogEntry(
                k,
                lower,
                rule_bound(k).upper,
                witness_start=starts[0],
                extra_witnesses=starts[1:],
                source="record run",
            )
        )
    return Catalog(entries)
