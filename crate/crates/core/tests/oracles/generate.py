"""Frozen reference values for tests/oracles.rs, computed in extended precision.

Run with `python3 generate.py`; the printed constants are pasted into the
Rust test. Only mpmath is required.
"""
import mpmath as mp

mp.mp.dps = 40


def sine_product_sum(p, q, x):
    # direct summation over k = 1..q, dropping the smallest term
    logs = [mp.log(abs(mp.sin(2 * mp.pi * (x + mp.mpf(k * p) / (2 * q))))) for k in range(1, q + 1)]
    k0 = min(range(q), key=lambda k: logs[k])
    return (q - 1) * mp.log(2) + sum(l for k, l in enumerate(logs) if k != k0)


def nodes(n, theta):
    return [mp.cos(2 * mp.pi * (i + theta) / n) for i in range(1, n + 1)]


def lebesgue_function(xs, x):
    total = mp.mpf(0)
    for i, xi in enumerate(xs):
        term = mp.mpf(1)
        for j, xj in enumerate(xs):
            if i != j:
                term *= (x - xj) / (xi - xj)
        total += abs(term)
    return total


def lebesgue_constant(n, theta, grid=4000, refine=8):
    xs = nodes(n, theta)
    angles = [mp.pi * k / (grid - 1) for k in range(grid)]
    vals = [(lebesgue_function(xs, mp.cos(a)), a) for a in angles]
    vals.sort(reverse=True)
    best = vals[0][0]
    h = mp.pi / (grid - 1)
    for _, a in vals[:refine]:
        # golden-section search on the bracketing cell
        lo, hi = max(a - h, mp.mpf(0)), min(a + h, mp.pi)
        f = lambda t: -lebesgue_function(xs, mp.cos(t))
        g = (mp.sqrt(5) - 1) / 2
        c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        for _ in range(80):
            if f(c) < f(d):
                hi = d
            else:
                lo = c
            c, d = hi - g * (hi - lo), lo + g * (hi - lo)
        best = max(best, -f((lo + hi) / 2))
    return best


if __name__ == "__main__":
    print("SINE_1_2_0P1 =", mp.nstr(sine_product_sum(1, 2, mp.mpf(0.1)), 20))
    print("SINE_3_7_0P3 =", mp.nstr(sine_product_sum(3, 7, mp.mpf(0.3)), 20))
    for n in (8, 16, 32):
        print(f"LEBESGUE_{n} =", mp.nstr(lebesgue_constant(n, mp.mpf(1) / 8), 15))
