"""Which rules bound M(k) for small even k."""

from equidiv import default_catalog, rule_bound

cat = default_catalog()
for k in range(2, 61, 2):
    res = rule_bound(k)
    e = cat.query(k)
    known = str(e.exact) if e.exact else f"{e.lower}..{e.upper}"
    rules = ", ".join(f"{rid}={b}" for rid, b in res.fired)
    print(f"k={k:>3}  M(k) <= {res.upper:<3} known {known:<7} {rules}")
