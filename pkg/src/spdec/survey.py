"""Three-state survey algebra.

A survey is a triple ``(t, i, f)`` giving the weight of a warning being
true, indifferent or false. Unnormalized triples appear as intermediate
products; :func:`normalize` brings them back to unit norm.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence


class ContradictionError(ArithmeticError):
    """A product of messages lost all of its mass (zero norm)."""


class Survey(NamedTuple):
    t: float
    i: float
    f: float


# Unnormalized triples share the representation.
UnnormalizedVec = Survey

IDENTITY = Survey(0.0, 1.0, 0.0)
TRUE = Survey(1.0, 0.0, 0.0)
FALSE = Survey(0.0, 0.0, 1.0)


def norm(v: Sequence[float]) -> float:
    return v[0] + v[1] + v[2]


def product(v: Sequence[float], w: Sequence[float]) -> Survey:
    """Combine two triples; mass on contradictory pairs (T with F) is dropped.

    >>> product((0, 1, 0), (0.2, 0.3, 0.5))
    Survey(t=0.2, i=0.3, f=0.5)
    """
    vt, vi, vf = v
    wt, wi, wf = w
    return Survey(vt * wt + vi * wt + vt * wi, vi * wi, vf * wf + vi * wf + vf * wi)


def normalize(v: Sequence[float]) -> Survey:
    z = v[0] + v[1] + v[2]
    if not z > 0.0:
        raise ContradictionError(f"cannot normalize zero-norm vector {tuple(v)!r}")
    return Survey(v[0] / z, v[1] / z, v[2] / z)


def literal_flip(s: Sequence[float], negated: bool) -> Survey:
    """Swap the T and F components when the literal is negated."""
    if negated:
        return Survey(s[2], s[1], s[0])
    return Survey(s[0], s[1], s[2])


def certitude(s: Sequence[float]) -> float:
    return 1.0 - min(s[0], s[2])


def polarization(s: Sequence[float]) -> float:
    return abs(s[0] - s[2])


def product_all(vectors, renorm_every: int = 16) -> tuple[Survey, float]:
    """Running product of many triples.

    Returns the product rescaled to unit norm (or the zero vector) together
    with the natural log of its true norm. The partial product is rescaled
    every ``renorm_every`` factors so long products do not underflow.
    """
    acc = IDENTITY
    log_scale = 0.0
    for n, v in enumerate(vectors, start=1):
        acc = product(acc, v)
        if n % renorm_every == 0:
            z = norm(acc)
            if z == 0.0:
                return Survey(0.0, 0.0, 0.0), -math.inf
            acc = Survey(acc[0] / z, acc[1] / z, acc[2] / z)
            log_scale += math.log(z)
    z = norm(acc)
    if z == 0.0:
        return Survey(0.0, 0.0, 0.0), -math.inf
    return Survey(acc[0] / z, acc[1] / z, acc[2] / z), log_scale + math.log(z)
