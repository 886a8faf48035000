"""Staged search along a small k=12 template, checked against brute force."""

import time

from equidiv import tau, verify_certificate
from equidiv.presets import desk_k12
from equidiv.search import analytic_rejection, run_pipeline

tpl = desk_k12()
print(f"n_j = {tpl.a} * ({tpl.s0} + j * {tpl.m}), run of {tpl.run_length}, k = {tpl.k}")
for t in tpl.terms:
    print(f"  offset {t.offset}: fixed {t.fixed}, cofactor needs tau {t.cofactor_tau} ({t.shape})")
print(f"presieve should reject {analytic_rejection(tpl):.3f} of j")

t0 = time.perf_counter()
records, stats = run_pipeline(tpl, 0, 10**4)
print(f"pipeline over j < 10^4 in {time.perf_counter() - t0:.2f}s: {stats.to_json()}")

for rec in records[:5]:
    assert verify_certificate(rec.certificate).valid
    print(f"  {rec.start}: tau = {[tau(rec.start + i) for i in range(rec.length)]}")
