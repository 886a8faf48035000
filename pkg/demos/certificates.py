"""Check the bundled 17-member runs, then break one exponent."""

from dataclasses import replace

from equidiv.records import bundled_certificate, verify_certificate

for name in ("run24", "run48"):
    cert = bundled_certificate(name)
    report = verify_certificate(cert)
    print(f"{name}: k={cert.k}, {cert.length} members from {cert.start}: {'valid' if report.valid else 'invalid'}")

cert = bundled_certificate("run24")
members = [list(m) for m in cert.members]
p, e = members[7][0]
members[7][0] = (p, e + 1)
bad = replace(cert, members=tuple(tuple(m) for m in members))
for m in verify_certificate(bad).failures:
    print(f"tampered member {m.index}: {'; '.join(m.reasons)}")
