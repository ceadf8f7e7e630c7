"""
Parsing, differentiating, and evaluating coefficient expressions
================================================================

"""

import numpy as np

from ndde import NonDifferentiableError, differentiate, parse_expression, signed_power

# Parse a coefficient from text.  The grammar covers + - * / ^ with
# right-associative powers, the functions sin/cos/exp/ln/abs, and numeric
# literals in integer, decimal, and exponent form.
c = parse_expression("0.01*(0.8*t + 0.2)^(1/3) / ((t + 0.1) * (t + 0.2))")
print("c(t)    =", c)
print("c(1.0)  =", c(1.0))
print("c(10.0) =", c(10.0))

# Differentiation is symbolic: the derivative is another expression that can
# be printed, evaluated, and differentiated again.
cp = differentiate(c)
print("c'(t)   =", cp)

# Check the symbolic derivative against a central difference.
h = 1e-6
for t in (0.5, 2.0, 25.0):
    fd = (c(t + h) - c(t - h)) / (2 * h)
    print(f"t = {t:4.1f}: symbolic c' = {cp(t): .10e}  central diff = {fd: .10e}")

# Fractional powers of negative arguments use the sign-preserving power
# sgnpow(x, p) = sign(x) * |x|^p, the odd extension of x^p to the real line.
u = parse_expression("sgnpow(t, 1/3)")
print("u(t)    =", u)
print("u(-8.0) =", u(-8.0), " (cube root of -8)")

# sgnpow has a cusp at 0, so symbolic differentiation refuses it; histories
# built from it must carry an explicit derivative.
try:
    differentiate(u)
except NonDifferentiableError as exc:
    print("differentiate(u) raised:", exc)

# signed_power is the same operation on plain floats.
print("signed_power(-8.0, 1/3) =", signed_power(-8.0, 1.0 / 3.0))

# Expressions round-trip through str(): re-parsing the printed form gives
# the same values everywhere.
c2 = parse_expression(str(c))
ts = np.linspace(0.0, 50.0, 501)
gap = max(abs(c(float(t)) - c2(float(t))) for t in ts)
print("round-trip sup difference on [0, 50]:", gap)
