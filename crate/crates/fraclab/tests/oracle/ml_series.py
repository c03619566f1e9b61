"""Reference values of E_{a,b}(z) by brute-force power series in
extended precision (mpmath). Prints a Rust table for tests/mlf.rs."""
import mpmath as mp


def ml(a, b, z):
    a, b = mp.mpf(a), mp.mpf(b)
    x = abs(z) ** (1 / a)
    mp.mp.dps = int(30 + x / 2.3)
    z = mp.mpc(z)
    s, k = mp.mpc(0), 0
    while True:
        t = z**k / mp.gamma(a * k + b)
        s += t
        if k > 10 and abs(t) < mp.mpf(10) ** (-mp.mp.dps + 5) * max(abs(s), 1e-300):
            break
        k += 1
    return s


rows = []
for a in (0.3, 0.5, 0.6, 0.7):
    for b in (1.0, a, 1.0 + a, 2.0, 2.0 + a):
        for argf in (0.0, 0.25, 0.5, 0.75, None):
            arg = mp.pi if argf is None else argf * mp.pi * a
            for r in (0.5, 2.0, 5.0, 7.0, 12.0, 30.0):
                if r ** (1 / a) > 2500:
                    continue
                z = mp.mpf(r) * mp.expj(arg)
                mp.mp.dps = 40
                v = ml(a, b, z)
                zr, zi = float(mp.re(z)), float(mp.im(z))
                vr, vi = float(mp.re(v)), float(mp.im(v))
                if abs(vr) < 1e300 and abs(vi) < 1e300:
                    rows.append((a, b, zr, zi, vr, vi))
mp.mp.dps = 40
v = ml(0.6, 1.0, -3)
print("// E_{0.6,1}(-3) =", mp.nstr(v, 25))
for r in rows:
    print("    (%r, %r, %r, %r, %r, %r)," % r)
