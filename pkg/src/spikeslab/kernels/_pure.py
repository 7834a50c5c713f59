"""Pure-Python reference kernels.

These are the fallback for the compiled extension and its ground truth: the
Cython twin in ``_speedups.pyx`` mirrors every arithmetic expression and
every RNG call in the same order, so for a given ``numpy.random.Generator``
state both backends produce bit-identical output.  To that end the kernels
draw nothing but raw uniforms from the generator; exponentials come from the
inverse CDF and normals from Box-Muller, written identically on both sides.
"""

import math

import numpy as np

_PI = math.pi
_TRUNC = 0.64  # series/proposal switch point of the PG(1,c) sampler


def _rexp(rng):
    return -math.log1p(-rng.random())


def _rnorm(rng):
    u1 = rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * _PI * u2)


def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _log_norm_cdf(x):
    # log Phi(x); erfc keeps the left tail accurate far below 0
    if x < -37.0:
        # Mills-ratio asymptote, where erfc underflows
        return -0.5 * x * x - 0.5 * math.log(2.0 * _PI) - math.log(-x)
    return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))


def _pg_a_coef(n, x):
    # n-th alternating-series coefficient of the Jacobi-type density
    k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    return math.exp(
        -1.5 * (math.log(0.5 * _PI) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) * (n + 0.5) / x
    )


def _pg_mass_texpon(z):
    # probability that the proposal draws from the x > TRUNC exponential piece
    t = _TRUNC
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _log_norm_cdf(b)
    xa = x0 + z + _log_norm_cdf(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


def _pg_trunc_inv_gauss(z, rng):
    # inverse-Gaussian IG(1/z, 1) conditioned on (0, TRUNC]
    t = _TRUNC
    x = t
    if z < 1.0 / t:
        alpha = 0.0
        while rng.random() > alpha:
            while True:
                e1 = _rexp(rng)
                e2 = _rexp(rng)
                if e1 * e1 <= 2.0 * e2 / t:
                    break
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = math.exp(-0.5 * z * z * x)
    else:
        mu = 1.0 / z
        x = t + 1.0
        while x > t:
            y = _rnorm(rng)
            y = y * y
            mu_y = mu * y
            x = mu + 0.5 * mu * mu_y - 0.5 * mu * math.sqrt(4.0 * mu_y + mu_y * mu_y)
            if rng.random() > mu / (mu + x):
                x = mu * mu / x
    return x


def pg_draw(c, rng):
    """One exact draw from PG(1, c) (alternating-series rejection sampler)."""
    z = 0.5 * abs(c)
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    ratio = _pg_mass_texpon(z)
    while True:
        if rng.random() < ratio:
            x = _TRUNC + _rexp(rng) / fz
        else:
            x = _pg_trunc_inv_gauss(z, rng)
        s = _pg_a_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _pg_a_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _pg_a_coef(n, x)
                if y > s:
                    break


def pg_draws(c, rng):
    """Vector of PG(1, c_i) draws, one per entry of c, in index order."""
    c = np.asarray(c, dtype=np.float64)
    out = np.empty(c.shape[0])
    for i in range(c.shape[0]):
        out[i] = pg_draw(c[i], rng)
    return out


def z_scan(gram, b, beta, z, s, c0, a_quad, inv_sig2, order, rng):
    """One sequential scan of z_j | beta, z_{-j} over the given site order.

    gram is X^T X (linear case) or X^T D(omega) X (logistic case, with
    inv_sig2 = 1); b is X^T y resp. X^T (y - 1/2).  s must equal
    gram @ (beta * z) on entry and is updated in place together with z.
    Returns the number of flipped sites.
    """
    flips = 0
    for idx in range(order.shape[0]):
        j = order[idx]
        bj = beta[j]
        gjj = gram[j, j]
        cross = s[j]
        if z[j] == 1:
            cross -= gjj * bj
        logit = c0 + a_quad * bj * bj + inv_sig2 * (bj * b[j] - bj * cross - 0.5 * bj * bj * gjj)
        new = 1 if rng.random() < _sigmoid(logit) else 0
        if new != z[j]:
            flips += 1
            if new == 1:
                s += gram[j] * bj
            else:
                s -= gram[j] * bj
            z[j] = new
    return flips
