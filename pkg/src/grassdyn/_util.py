"""Small shared helpers: RNG normalization, scalar codecs, big-exponent math."""

from __future__ import annotations

from fractions import Fraction

import mpmath
import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Return a numpy Generator from a seed, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def scalar_to_json(x):
    """Encode a coordinate scalar as a [re, im] pair.

    Floats and complex numbers map to float pairs; Fractions map to
    "num/den" strings so exact values survive the round trip.
    """
    if isinstance(x, Fraction):
        return [f"{x.numerator}/{x.denominator}", "0/1"]
    z = complex(x)
    return [z.real, z.imag]


def scalar_from_json(re, im):
    if isinstance(re, str):
        frac = Fraction(re)
        if isinstance(im, str) and Fraction(im) != 0:
            raise ValueError("exact coordinates must be real")
        return frac
    if im:
        return complex(re, im)
    return float(re)


def exp_neg(x: mpmath.mpf) -> mpmath.mpf:
    """exp(-x) for x >= 0 of any magnitude.

    mpmath handles huge arguments, but going through an explicit
    base-2 split keeps the cost flat when x has a very large exponent:
    exp(-x) = 2^(-x/ln 2) = ldexp(2^(-r), -e) with e integer.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    y = x / mpmath.ln(2)
    e = int(mpmath.floor(y))
    r = y - e
    return mpmath.ldexp(mpmath.power(2, -r), -e)


def pow2_neg(b: int) -> mpmath.mpf:
    """Exact 2^-b for a (possibly huge) nonnegative integer b."""
    return mpmath.ldexp(mpmath.mpf(1), -b)
