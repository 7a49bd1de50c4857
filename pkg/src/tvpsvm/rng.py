"""Seeded random streams and the distribution samplers used by the Gibbs sampler.

Every sampler takes a :class:`numpy.random.Generator`; streams are built with
:func:`make_rng` so that a ``(seed, stream_id)`` pair always reproduces the
same sequence.

Polya-gamma draws use Devroye-type exact rejection for each unit of the
integer part of the shape parameter.  A fractional remainder ``f`` (only
needed when the shape is not an integer) is drawn from the infinite
sum-of-gammas representation truncated at ``PG_TRUNCATION`` terms, with the
mean of the discarded tail added back.  The residual error is then a
zero-mean variable whose variance is bounded by
``f / (12 * pi**4 * PG_TRUNCATION**3)`` (about 7e-10 for the default).
"""
from __future__ import annotations

import hashlib
import math

import numba as nb
import numpy as np

from .errors import DomainError

PG_TRUNCATION = 200

_PI = math.pi
_TRUNC = 0.64  # switch point between the two Devroye envelope pieces


def make_rng(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return an independent generator for the substream ``stream_id`` of ``seed``."""
    if seed < 0 or stream_id < 0:
        raise DomainError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


def stream_id_for(*key) -> int:
    """Stable 63-bit stream id derived from an arbitrary tuple of labels.

    Python's ``hash`` is salted per process, so a digest is used instead;
    this keeps job streams identical across worker processes.
    """
    text = "\x1f".join(str(k) for k in key).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little") >> 1


def _check_positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return arr


def _scalarize(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


def sample_gaussian(mean, variance, rng: np.random.Generator, size=None):
    """Draw from N(mean, variance); returns ``mean`` exactly when variance is 0."""
    var = np.asarray(variance, dtype=float)
    if np.any(var < 0) or not np.all(np.isfinite(var)):
        raise DomainError(f"variance must be non-negative, got {variance!r}")
    mean = np.asarray(mean, dtype=float)
    shape = np.broadcast_shapes(mean.shape, var.shape) if size is None else size
    z = rng.standard_normal(shape)
    return _scalarize(mean + np.sqrt(var) * z)


def sample_inverse_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Draw from the inverse gamma with density proportional to x^(-shape-1) exp(-scale/x)."""
    a = _check_positive("shape", shape)
    b = _check_positive("scale", scale)
    return _scalarize(b / rng.standard_gamma(a, size=size))


def sample_beta(alpha, beta, rng: np.random.Generator, size=None):
    a = _check_positive("alpha", alpha)
    b = _check_positive("beta", beta)
    return _scalarize(rng.beta(a, b, size=size))


# ---------------------------------------------------------------------------
# Polya-gamma


@nb.njit(cache=True)
def _norm_logcdf(x):
    if x < -5.0:
        # erfc keeps precision in the far left tail
        return math.log(0.5 * math.erfc(-x / math.sqrt(2.0)))
    return math.log(0.5 * (1.0 + math.erf(x / math.sqrt(2.0))))


@nb.njit(cache=True)
def _series_coef(n, x):
    k = (n + 0.5) * _PI
    if x > _TRUNC:
        return k * math.exp(-0.5 * k * k * x)
    if x > 0.0:
        expnt = -1.5 * (math.log(0.5 * _PI) + math.log(x)) + math.log(k) - 2.0 * (n + 0.5) ** 2 / x
        return math.exp(expnt)
    return 0.0


@nb.njit(cache=True)
def _mass_texpon(z):
    t = _TRUNC
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    b = math.sqrt(1.0 / t) * (t * z - 1.0)
    a = -math.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = math.log(fz) + fz * t
    xb = x0 - z + _norm_logcdf(b)
    xa = x0 + z + _norm_logcdf(a)
    qdivp = 4.0 / _PI * (math.exp(xb) + math.exp(xa))
    return 1.0 / (1.0 + qdivp)


@nb.njit(cache=True)
def _rtigauss(rng, z):
    # inverse Gaussian(mean 1/z, shape 1) truncated to (0, _TRUNC)
    t = _TRUNC
    if z * t < 1.0:
        alpha = 0.0
        x = t
        while rng.random() > alpha:
            e1 = rng.standard_exponential()
            e2 = rng.standard_exponential()
            while e1 * e1 > 2.0 * e2 / t:
                e1 = rng.standard_exponential()
                e2 = rng.standard_exponential()
            x = t / ((1.0 + t * e1) * (1.0 + t * e1))
            alpha = math.exp(-0.5 * z * z * x)
        return x
    mu = 1.0 / z
    x = t + 1.0
    while x > t:
        y = rng.standard_normal()
        y = y * y
        x = mu + 0.5 * mu * mu * y - 0.5 * mu * math.sqrt(4.0 * mu * y + (mu * y) ** 2)
        if rng.random() > mu / (mu + x):
            x = mu * mu / x
    return x


@nb.njit(cache=True)
def _pg1_devroye(rng, c):
    z = 0.5 * abs(c)
    fz = 0.125 * _PI * _PI + 0.5 * z * z
    p_exp = _mass_texpon(z)
    while True:
        if rng.random() < p_exp:
            x = _TRUNC + rng.standard_exponential() / fz
        else:
            x = _rtigauss(rng, z)
        s = _series_coef(0, x)
        y = rng.random() * s
        n = 0
        while True:
            n += 1
            if n % 2 == 1:
                s -= _series_coef(n, x)
                if y <= s:
                    return 0.25 * x
            else:
                s += _series_coef(n, x)
                if y > s:
                    break


@nb.njit(cache=True)
def _pg_series(rng, b, c, ntrunc):
    # truncated sum-of-gammas plus the exact mean of the discarded tail
    c2 = c * c / (4.0 * _PI * _PI)
    total = 0.0
    kept_mean = 0.0
    for k in range(1, ntrunc + 1):
        d = (k - 0.5) ** 2 + c2
        total += rng.standard_gamma(b) / d
        kept_mean += 1.0 / d
    half = 0.5 * abs(c)
    if half < 1e-8:
        full_mean = 0.25
    else:
        full_mean = math.tanh(half) / (4.0 * half)
    tail_mean = b * (full_mean - kept_mean / (2.0 * _PI * _PI))
    return total / (2.0 * _PI * _PI) + max(tail_mean, 0.0)


@nb.njit(cache=True)
def _pg_draws(rng, b, c, ntrunc):
    out = np.empty(c.size)
    for i in range(c.size):
        whole = int(math.floor(b[i]))
        frac = b[i] - whole
        x = 0.0
        for _ in range(whole):
            x += _pg1_devroye(rng, c[i])
        if frac > 1e-12:
            x += _pg_series(rng, frac, c[i], ntrunc)
        out[i] = x
    return out


def sample_polya_gamma(b, c, rng: np.random.Generator, size=None):
    """Draw from the Polya-gamma distribution PG(b, c).

    ``b`` and ``c`` broadcast against each other (and against ``size`` when
    given).  Integer parts of ``b`` are exact; see the module docstring for
    the fractional part.
    """
    b_arr = _check_positive("b", b)
    c_arr = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c_arr)):
        raise DomainError("tilt c must be finite")
    shape = np.broadcast_shapes(b_arr.shape, c_arr.shape) if size is None else size
    bb = np.ascontiguousarray(np.broadcast_to(b_arr, shape), dtype=float).ravel()
    cc = np.ascontiguousarray(np.broadcast_to(c_arr, shape), dtype=float).ravel()
    out = _pg_draws(rng, bb, cc, PG_TRUNCATION).reshape(shape)
    return _scalarize(out)


def sample_z_innovation(a, b, rng: np.random.Generator, size=None):
    """Draw ``(value, aux)`` with value ~ Z(a, b, 0, 1) and aux ~ PG(a + b, value).

    value is the log-odds of a Beta(a, b) variable, written as a log ratio of
    gamma draws for accuracy in the tails.  aux is the Polya-gamma variable
    of the mixture representation, drawn from its conditional given value,
    so that value | aux ~ N((a - b) / (2 aux), 1 / aux) holds for the pair.
    """
    a_arr = _check_positive("a", a)
    b_arr = _check_positive("b", b)
    shape = np.broadcast_shapes(a_arr.shape, b_arr.shape) if size is None else size
    ga = rng.standard_gamma(np.broadcast_to(a_arr, shape))
    gb = rng.standard_gamma(np.broadcast_to(b_arr, shape))
    # gamma draws with small shape can underflow to zero; redraw those entries
    while np.any(ga == 0) or np.any(gb == 0):
        bad = (ga == 0) | (gb == 0)
        ga = np.where(bad, rng.standard_gamma(np.broadcast_to(a_arr, shape)), ga)
        gb = np.where(bad, rng.standard_gamma(np.broadcast_to(b_arr, shape)), gb)
    value = np.log(ga) - np.log(gb)
    aux = np.asarray(sample_polya_gamma(a_arr + b_arr, value, rng, size=shape))
    return _scalarize(np.asarray(value)), _scalarize(aux)


def pg_mean(b, c):
    """Analytic mean of PG(b, c): b/(2c) tanh(c/2), b/4 at c = 0."""
    c = np.abs(np.asarray(c, dtype=float))
    half = np.maximum(0.5 * c, 1e-8)
    return np.where(0.5 * c < 1e-8, 0.25 * np.asarray(b), np.asarray(b) * np.tanh(half) / (4.0 * half))
