"""
Underspend grows like the square root of the horizon
====================================================

With step size 1/sqrt(T), the total amount by which channels miss their
floors should grow no faster than sqrt(T). A log-log fit over a few horizons
estimates the exponent. The full check (10 seeds up to T=100000) lives in
the acceptance tests; this is a quick version.
"""

from mirec.harness import setting, sweep

result = sweep(setting(1, headroom=0.05), horizons=[500, 2000, 8000], seeds=range(3))
for T, row in result.table.items():
    print(f"T={T:5d}  eta={row['eta']:.4f}  mean underspend {row['underspend']:.2f}")
print(f"fitted exponent {result.underspend_slope:.3f}")
