"""Solve a four-congruence quadratic system and check the divisibilities it forces."""

from equidiv.quadratic import solve_quadratic_system, shifted_square_system

p, q1 = 5, 13
system = shifted_square_system(p, q1)
roots = solve_quadratic_system(system)
print(f"p={p}, q1={q1}: {len(roots)} roots modulo {system.modulus}")

x = roots[0]
n = 2 * q1 ** (p - 1) * x * x - 1
for i, e in zip((0, 2, 3, 4), system.equations):
    print(f"  n+{i} divisible by {e.modulus}: {(n + i) % e.modulus == 0}")
print(f"  n+1 = 2*{q1}^{p - 1}*x^2")
