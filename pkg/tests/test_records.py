import json
from dataclasses import replace
from pathlib import Path

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from equidiv.arith import FactorBudget, factorize
from equidiv.bounds import rule_bound
from equidiv.records import (
    INVALID,
    UNDECIDED,
    VALID,
    BoundConflict,
    Catalog,
    CatalogEntry,
    MalformedCertificate,
    RunCertificate,
    RunRecord,
    SchemaViolation,
    bundled_certificate,
    default_catalog,
    load_certificate,
    exact_values_table,
    verify_certificate,
    verify_run,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
START24 = 768369049267672356024049141254832375543516
START48 = 6611413170876398465463663454441440157066140


@pytest.fixture(scope="module")
def cert24():
    return load_certificate(FIXTURES / "run24.json")


@pytest.fixture(scope="module")
def cert48():
    return load_certificate(FIXTURES / "run48.json")


# --- certificates ---------------------------------------------------------------------


def test_fixture_certificates_hold_the_published_starts(cert24, cert48):
    assert (cert24.k, cert24.start, cert24.length) == (24, START24, 17)
    assert (cert48.k, cert48.start, cert48.length) == (48, START48, 17)
    assert bundled_certificate("run24") == cert24
    assert bundled_certificate("run48") == cert48


def test_fixture_certificates_verify(cert24, cert48):
    for cert in (cert24, cert48):
        report = verify_certificate(cert)
        assert report.valid and report.failures == []
        assert report.to_json()["verdict"] == VALID


def test_certificate_members_checked_with_sympy(cert24, cert48):
    # independent check of the transcription
    for cert in (cert24, cert48):
        for i, pairs in enumerate(cert.members):
            n, t = 1, 1
            for p, e in pairs:
                assert sympy.isprime(p)
                n *= p**e
                t *= e + 1
            assert n == cert.start + i and t == cert.k


def test_certificate_json_round_trip_is_bit_exact(cert24):
    text = (FIXTURES / "run24.json").read_text()
    doc = json.loads(text)
    assert RunCertificate.from_json(doc).to_json() == doc


def mutations(cert):
    """Every single-field perturbation: each prime, each exponent, each start digit."""
    members = [list(m) for m in cert.members]
    for i, m in enumerate(members):
        for j, (p, e) in enumerate(m):
            for new in ((p + 2, e), (p, e + 1)):
                changed = [list(x) for x in members]
                changed[i][j] = new
                yield replace(cert, members=tuple(tuple(x) for x in changed))
    digits = str(cert.start)
    for pos in range(len(digits)):
        d = (int(digits[pos]) + 1) % 10
        if pos == 0 and d == 0:
            d = 1 if digits[0] != "1" else 2
        yield replace(cert, start=int(digits[:pos] + str(d) + digits[pos + 1 :]))


def test_every_single_mutation_is_caught(cert24):
    count = 0
    for bad in mutations(cert24):
        assert not verify_certificate(bad).valid
        count += 1
    assert count > 100


def test_exponent_bump_names_member_and_tau(cert48):
    members = [list(m) for m in cert48.members]
    p, e = members[5][0]
    members[5][0] = (p, e + 1)
    report = verify_certificate(replace(cert48, members=tuple(tuple(m) for m in members)))
    (bad,) = report.failures
    assert bad.index == 5
    assert any("tau" in r for r in bad.reasons)


def test_certificate_ordering_and_composite_primes_reported():
    cert = RunCertificate(4, 6, 1, (((3, 1), (2, 1)),))
    reasons = verify_certificate(cert).members[0].reasons
    assert "primes not strictly increasing" in reasons
    cert = RunCertificate(2, 9, 1, (((9, 1),),))
    assert any("not prime" in r for r in verify_certificate(cert).members[0].reasons)


def test_malformed_certificates():
    with pytest.raises(MalformedCertificate):
        verify_certificate(RunCertificate(6, 242, 4))
    with pytest.raises(MalformedCertificate):
        verify_certificate(RunCertificate(6, 242, 4, (((2, 1), (11, 2)),)))
    with pytest.raises(SchemaViolation):
        RunCertificate.from_json({"k": 6, "start": 242, "length": 4})
    with pytest.raises(SchemaViolation):
        RunCertificate.from_json({"k": 6, "start": "242", "length": 4, "extra": 1})


def test_deterministic_verification_of_small_certificate():
    cert = RunCertificate.from_factorizations(6, 242, [factorize(n) for n in range(242, 246)], "desk")
    report = verify_certificate(cert, deterministic=True)
    assert report.valid


# --- verify_run ---------------------------------------------------------------------------


def test_verify_run_examples():
    assert verify_run(6, 242, 4).verdict == VALID
    report = verify_run(2, 2, 3)
    assert report.verdict == INVALID
    assert [m.verdict for m in report.members] == [VALID, VALID, INVALID]
    assert report.members[2].reasons == ["tau = 3 != 2"]


def test_verify_run_k12_run_of_13_never_invalid():
    report = verify_run(12, 99949636937406199604777509122843, 13, FactorBudget(wall_clock_ms=120000))
    assert report.verdict in (VALID, UNDECIDED)
    if report.verdict == VALID:
        assert verify_certificate(report.certificate("verify_run")).valid


def test_verify_run_undecided_with_tiny_budget():
    p, q = 1099511627791, 1099511628401
    report = verify_run(4, p * q, 1, FactorBudget(rho_iteration_limit=20, wall_clock_ms=100))
    assert report.verdict == UNDECIDED
    assert report.members[0].partial.cofactor == p * q
    assert report.certificate() is None


def test_verify_run_partial_result_can_still_refute():
    # 2^5 * big semiprime: found part already has 6 divisors, k = 4 impossible
    p, q = 1099511627791, 1099511628401
    report = verify_run(4, 32 * p * q, 1, FactorBudget(rho_iteration_limit=20, wall_clock_ms=100))
    assert report.verdict == INVALID


def test_verify_run_rejects_zero_length():
    with pytest.raises(ValueError):
        verify_run(6, 242, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**12), st.integers(1, 6), st.sampled_from([2, 4, 6, 8, 12]))
def test_verify_run_agrees_with_sympy(start, length, k):
    want = all(sympy.divisor_count(start + i) == k for i in range(length))
    assert (verify_run(k, start, length).verdict == VALID) == want


# --- catalog ----------------------------------------------------------------------------


def test_catalog_queries():
    cat = default_catalog()
    e12 = cat.query(12)
    assert (e12.lower, e12.upper) == (13, 15)
    assert cat.query(2).exact == 2
    assert cat.query(36).lower == 11 and cat.query(36).upper == 15
    assert cat.query(24).lower == 17 and cat.query(48).lower == 17
    assert len(cat.query(48).extra_witnesses) == 1
    assert cat.query(76).exact == 7 and cat.query(76).witness_start is not None


def test_catalog_falls_back_to_rules():
    e = default_catalog().query(10**6 + 1)
    assert e.exact == 1
    e = default_catalog().query(2 * 10**6)
    assert e.lower == 1 and e.upper == rule_bound(2 * 10**6).upper


def test_catalog_upsert_bound_conflict():
    cat = default_catalog()
    with pytest.raises(BoundConflict):
        cat.upsert(RunRecord(4, 33, 4))


def test_catalog_upsert_raises_lower_only_when_longer():
    cat = Catalog()
    e = cat.upsert(RunRecord(8, 230, 3))
    assert e.lower == 3 and e.witness_start == 230
    assert cat.upsert(RunRecord(8, 1, 2)) == e
    cat2 = default_catalog()
    before = cat2.query(12)
    assert cat2.upsert(RunRecord(12, 5, 4, "structured-search")) == before


def test_catalog_upsert_tighter_upper_needs_adhoc():
    cat = Catalog()
    with pytest.raises(BoundConflict):
        cat.upsert(CatalogEntry(10, 1, 2, source="x"))
    cat.upsert(CatalogEntry(10, 1, 2, source="x", adhoc=True))
    with pytest.raises(BoundConflict):
        cat.upsert(CatalogEntry(10, 1, 9, source="x"))


def test_catalog_entry_invariants():
    with pytest.raises(ValueError):
        CatalogEntry(6, 5, 4)
    with pytest.raises(ValueError):
        CatalogEntry(6, 4, 5, exact=5)


def test_catalog_round_trip(tmp_path):
    cat = default_catalog()
    path = tmp_path / "cat.json"
    cat.save(path)
    again = Catalog.load(path)
    assert again.to_json() == cat.to_json()
    again.save(tmp_path / "b.json")
    assert (tmp_path / "b.json").read_text() == path.read_text()


def test_catalog_schema_violation(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([{"k": 2, "lower": 2}]))
    with pytest.raises(SchemaViolation):
        Catalog.load(path)


def test_catalog_sweep_is_clean_and_k6_is_flagged():
    cat = default_catalog()
    assert cat.sweep() == []
    e6 = cat.query(6)
    assert e6.exact == 5 and e6.adhoc and rule_bound(6).upper == 7


def test_table_spot_entries():
    cat = default_catalog()
    for k in (6, 18, 30, 42, 54, 66, 78, 102, 114, 138, 174, 186, 222, 246, 258, 282):
        assert cat.query(k).exact == 5
    for k in (8, 16, 20, 76, 2560, 4096):
        assert cat.query(k).exact == 7


def test_table_out_of_order_entry_kept_verbatim():
    row3 = next(r["k"] for r in exact_values_table()["rows"] if r["M"] == 3)
    i = row3.index(8806)
    assert row3[i + 1] < 8806
    assert "out of sorted order" in default_catalog().query(row3[i + 1]).note
