"""One-step reference values for crates/core/tests/solver_reference.rs.

Each step is written out directly with mpmath, independent of the Rust
implementation. Run: python3 tools/reference_steps.py
"""
from mpmath import mp, mpf, exp, sqrt

mp.dps = 70


def f_exp2(x):
    return (x - 1) ** 2 * exp(x)


def d_exp2(x):
    return (x - 1) * (x + 1) * exp(x)


def f_exp3(x):
    return (x - 1) ** 3 * exp(x)


def d_exp3(x):
    return (x - 1) ** 2 * (x + 2) * exp(x)


def f_sq(x):
    return x * x - 4


def d_sq(x):
    return 2 * x


def poly(c, s):
    return sum(ck * s ** k for k, ck in enumerate(c))


def trunc_p(beta):
    return [1, 2, beta, 4 - 2 * beta]


def trunc_q(beta, u, v):
    return 1 + 2 * u + v + 4 * u * v + (beta + 1) * u * u


REAL = True


def root(a, b, m):
    r = a / b
    if REAL and r < 0 and m % 2 == 1:
        return -((-r) ** (mpf(1) / m))
    return r ** (mpf(1) / m)


def schroder(f, d, m, x):
    return x - m * f(x) / d(x)


def fam18(f, d, m, x, p):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    return y - m * u * poly(p, u) * n


def fam1(f, d, m, x, g):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    return y - m * g(u) * n


def fam2(f, d, m, x, lam, c, r):
    y = x - m * f(x) / (d(x) + lam * f(x))
    u = root(f(y), f(x), m)
    w = u * (1 + (c + 2) * u + r * u * u) / (1 + c * u)
    return y - m * w * f(x) / (d(x) + 2 * lam * f(x))


def fam3(f, d, m, x, g):
    n = f(x) / d(x)
    y = x - m * n
    t = root(d(y), d(x), m - 1)
    return y - m * g(t) * n


def fam4(f, d, m, x, a1, a2, s, r):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    h = u / (a1 + a2 * u)
    z = y - u * s(h) * n
    v = root(f(z), f(y), m)
    return z - u * v * r(h, v) * n


def fam12(f, d, m, x, p, q):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    z = y - m * u * p(u) * n
    v = root(f(z), f(y), m)
    return z - m * u * v * q(u, v) * n


def fam15b(f, d, m, x, h, p, g, l):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    z = y - m * u * h(u) * n
    v = root(f(z), f(y), m)
    return z - m * u * p(u) * g(v) * l(u * v) * n


def fam7b(f, d, m, x, h, p, g):
    n = f(x) / d(x)
    y = x - m * n
    u = root(f(y), f(x), m)
    z = y - m * u * h(u) * n
    v = root(f(z), f(y), m)
    return z - m * u * v * (1 + 2 * u * v) * p(u) * g(v) * n


def fam22(f, d, m, x, r_m):
    n = f(x) / d(x)
    y = x - mpf(2 * m) / (m + 2) * n
    t = d(y) / d(x)
    a = (mpf(m + 2) / m) ** m
    return x - (mpf(m * (m - 2)) / 2 * a * t - mpf(m * m) / 2) / (1 - r_m * t) * n


def fam23(f, d, m, x, phi):
    n = f(x) / d(x)
    y = x - mpf(2 * m) / (m + 2) * n
    t = d(y) / d(x)
    return x - phi(t) * n


def main():
    q = mpf
    m3 = 3
    ts2 = q(2) / 4  # (m/(m+2))^(m-1) at m = 2
    phi_c = [q(2), -q(2 * 2 * 4) / (4 * ts2), q(2 * 2 * 4 * 4) / (4 * ts2 * ts2) / 2]
    h7 = [1, 2, q(m3 + 9) / 2]
    p7 = [1, 2, q(m3 + 11) / 2, q(m3 + 5)]
    cases = [
        ("schroder_exp2", schroder(f_exp2, d_exp2, 2, q("1.5"))),
        ("fam18_exp2", fam18(f_exp2, d_exp2, 2, q("1.2"), trunc_p(0))),
        ("fam18_simple", fam18(f_sq, d_sq, 1, q(3), trunc_p(0))),
        ("fam1_exp2", fam1(f_exp2, d_exp2, 2, q("1.2"), lambda u: u * poly(trunc_p(0), u))),
        ("fam2_exp2", fam2(f_exp2, d_exp2, 2, q("1.2"), q(1) / 2, q(1), q(2))),
        ("fam3_exp3", fam3(f_exp3, d_exp3, 3, q("1.3"), lambda t: t + 3 * t * t)),
        (
            "fam4_exp2",
            fam4(
                f_exp2, d_exp2, 2, q("1.2"), q(2), q(1),
                lambda h: 2 + 3 * h - h * h,
                lambda h, v: 2 + h + 3 * v + h * v,
            ),
        ),
        (
            "fam12_exp2",
            fam12(f_exp2, d_exp2, 2, q("1.2"), lambda u: poly(trunc_p(1), u), lambda u, v: trunc_q(1, u, v)),
        ),
        (
            "fam15b_exp2",
            fam15b(
                f_exp2, d_exp2, 2, q("1.2"),
                lambda u: 1 + 2 * u,
                lambda u: poly([1, 2, 1, -4], u),
                lambda v: v + v * v,
                lambda w: 1 + 2 * w,
            ),
        ),
        ("fam7b_exp3", fam7b(f_exp3, d_exp3, 3, q("1.3"), lambda u: poly(h7, u), lambda u: poly(p7, u), lambda v: 1 + v)),
        ("fam22_exp3", fam22(f_exp3, d_exp3, 3, q("1.3"), q(125) / 27)),
        ("fam23_exp2", fam23(f_exp2, d_exp2, 2, q("1.2"), lambda t: poly(phi_c, t - ts2))),
    ]
    global REAL
    REAL = False
    cases.append(
        ("fam7b_exp3_complex", fam7b(f_exp3, d_exp3, 3, q("1.3"), lambda u: poly(h7, u), lambda u: poly(p7, u), lambda v: 1 + v))
    )
    for name, value in cases:
        if isinstance(value, mp.mpc):
            print(f'("{name}", "{mp.nstr(value.real, 50, strip_zeros=False)}", "{mp.nstr(value.imag, 50, strip_zeros=False)}"),')
            continue
        print(f'("{name}", "{mp.nstr(value, 50, strip_zeros=False)}", "0"),')


if __name__ == "__main__":
    main()
