"""Pairing, tuple coding, columns and fresh numbers.

Tuples are right-nested Cantor pairs::

    <a, b>        = pair(a, b)
    <a, b, c, d>  = pair(a, pair(b, pair(c, d)))

Trap columns are ``{<0, m, k, n>}`` and the neutral column is ``{<1, n>}``.
Every natural number carries exactly one :func:`classify` tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isqrt
from typing import NamedTuple, Optional, Union


class Trap(NamedTuple):
    m: int
    k: int


class Neutral(NamedTuple):
    pass


NEUTRAL = Neutral()

ColumnTag = Optional[Union[Trap, Neutral]]


def pair(x: int, y: int) -> int:
    if x < 0 or y < 0:
        raise ValueError(f"pair expects naturals, got ({x}, {y})")
    t = x + y
    return t * (t + 1) // 2 + y


def unpair(z: int) -> tuple[int, int]:
    if z < 0:
        raise ValueError(f"unpair expects a natural, got {z}")
    w = (isqrt(8 * z + 1) - 1) // 2
    y = z - w * (w + 1) // 2
    return w - y, y


def encode_trap(m: int, k: int, n: int) -> int:
    return pair(0, pair(m, pair(k, n)))


def encode_neutral(n: int) -> int:
    return pair(1, n)


def decode_trap(z: int) -> Optional[tuple[int, int, int]]:
    """Return ``(m, k, n)`` when ``z`` lies in a trap column."""
    tag, rest = unpair(z)
    if tag != 0:
        return None
    m, rest = unpair(rest)
    k, n = unpair(rest)
    return m, k, n


def classify(z: int) -> ColumnTag:
    tag, rest = unpair(z)
    if tag == 1:
        return NEUTRAL
    if tag != 0:
        return None
    m, rest = unpair(rest)
    k, _ = unpair(rest)
    return Trap(m, k)


def column_element(tag: Union[Trap, Neutral], n: int) -> int:
    if isinstance(tag, Trap):
        return encode_trap(tag.m, tag.k, n)
    return encode_neutral(n)


def least_above(tag: Union[Trap, Neutral], bound: int) -> int:
    """Least element of the column strictly greater than ``bound``."""
    if tag is None:
        raise ValueError("the None tag is not a column")
    # column_element is strictly increasing in n
    hi = 1
    while column_element(tag, hi) <= bound:
        hi *= 2
    lo = 0
    while lo < hi:
        mid = (lo + hi) // 2
        if column_element(tag, mid) > bound:
            hi = mid
        else:
            lo = mid + 1
    return column_element(tag, lo)


@dataclass
class FreshAllocator:
    """Global high-water mark over every number the construction has touched."""

    high_water: int = 0

    def observe(self, *numbers: int) -> None:
        hw = self.high_water
        for n in numbers:
            if n > hw:
                hw = n
        self.high_water = hw

    def fresh(self, stage: int) -> int:
        value = max(self.high_water, stage) + 1
        self.high_water = value
        return value

    def fresh_in_column(self, stage: int, tag: Union[Trap, Neutral]) -> int:
        value = least_above(tag, max(self.high_water, stage))
        self.high_water = value
        return value
