"""Matrix exponential by scaling and squaring with a fixed [6/6] Padé
approximant.

The argument is scaled by ``2**-s`` until its ∞-norm is at most 1/2, the
Padé approximant is evaluated and the result squared ``s`` times. With
``q = 6`` and ``||A/2^s|| <= 1/2`` the backward error of the approximant is
below 1e-16 relative (Moler & Van Loan, "Nineteen dubious ways", 2003).
The order never varies, so the result is a deterministic function of the
input bits.
"""

import math

import numpy as np

PADE_ORDER = 6
SCALE_TARGET = 0.5


def _pade_coefficients(q: int) -> list:
    c = [1.0]
    for k in range(1, q + 1):
        c.append(c[-1] * (q - k + 1) / (k * (2 * q - k + 1)))
    return c


_COEF = _pade_coefficients(PADE_ORDER)


def expm(a: np.ndarray):
    """``exp(a)`` and the number of squarings used."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    norm = float(np.abs(a).sum(axis=1).max()) if n else 0.0
    s = 0
    if norm > SCALE_TARGET:
        s = max(0, int(math.ceil(math.log2(norm / SCALE_TARGET))))
    x = a / (2.0 ** s)
    eye = np.eye(n)
    num = _COEF[0] * eye
    den = _COEF[0] * eye
    power = eye
    for k in range(1, PADE_ORDER + 1):
        power = power @ x
        term = _COEF[k] * power
        num = num + term
        den = den + term if k % 2 == 0 else den - term
    e = np.linalg.solve(den, num)
    for _ in range(s):
        e = e @ e
    return e, s
