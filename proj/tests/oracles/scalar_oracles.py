"""Independent reference values frozen into the C++ tests.

Run with `python3 tests/oracles/scalar_oracles.py`; prints values with 17
significant digits.
"""
from fractions import Fraction


def kalman(zs, q, r, p0, a=1.0, h=1.0):
    # First output is the first measurement; later outputs follow the
    # textbook scalar predict/update pair.
    x, p = zs[0], p0
    out = [x]
    for z in zs[1:]:
        xp = a * x
        pp = a * a * p + q
        k = pp * h / (h * h * pp + r)
        x = xp + k * (z - h * xp)
        p = (1 - k * h) * pp
        out.append(x)
    return out


def kalman_exact(zs, q, r, p0):
    q, r, p0 = Fraction(q), Fraction(r), Fraction(p0)
    x, p = Fraction(zs[0]), p0
    out = [x]
    for z in zs[1:]:
        pp = p + q
        k = pp / (pp + r)
        x = x + k * (Fraction(z) - x)
        p = (1 - k) * pp
        out.append(x)
    return out


def adam_quadratic(w0=1.0, lr=0.1, steps=200, b1=0.9, b2=0.999, eps=1e-8):
    w, m, v = w0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = 2.0 * w
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** t)
        vh = v / (1 - b2 ** t)
        w = w - lr * mh / (vh ** 0.5 + eps)
    return w


if __name__ == "__main__":
    zs = [0, 1, 1, 1, 1]
    print("kalman float:", ", ".join(f"{v:.17g}" for v in kalman(zs, 1e-3, 1e-1, 1.0)))
    print("kalman exact:", ", ".join(f"{float(v):.17g}" for v in kalman_exact(zs, 1e-3, 1e-1, 1.0)))
    print("adam w200:", f"{adam_quadratic():.17g}")
