"""Jump operators: phase-tunable two-site channels and local dephasing.

All channels are rank one, ``O = |a><r|``.  For the two-site channel on sites
``j`` and ``j + l`` (labels are 1-based, ``j`` odd)

    |a> = |j> + e^{i alpha} |j+l>,     <r| = <j| - e^{i alpha} <j+l|,

and for dephasing on site ``j`` both factors are ``|j>``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_SITE = "two_site"
DEPHASING = "dephasing"


@dataclass(frozen=True, eq=False)
class JumpChannel:
    """One rank-one jump operator with its rate.

    ``column`` and ``row`` hold (indices, coefficients) of the two factors;
    indices are zero based.  ``site`` is the 1-based label of the first site.
    """

    n: int
    rate: float
    kind: str
    site: int
    column: tuple
    row: tuple
    range: int = 0
    alpha: float = 0.0

    @property
    def matrix(self):
        a = np.zeros(self.n, dtype=complex)
        r = np.zeros(self.n, dtype=complex)
        np.add.at(a, self.column[0], self.column[1])
        np.add.at(r, self.row[0], self.row[1])
        return np.outer(a, r)

    @property
    def pair(self):
        """1-based site labels ``(j, j + l)`` coupled by a two-site channel."""
        if self.kind != TWO_SITE:
            return None
        return (self.site, self.site + self.range)


def _check_rate(rate):
    rate = float(rate)
    if not rate > 0 or not np.isfinite(rate):
        raise ValueError(f"rate must be positive and finite, got {rate!r}")
    return rate


def build_jump(j, l, alpha, n, rate=1.0):
    """Two-site channel on sites ``j`` and ``j + l`` (1-based, ``j`` odd)."""
    j, l, n = int(j), int(l), int(n)
    if j < 1 or j % 2 == 0:
        raise ValueError(f"first site label must be odd and >= 1, got {j}")
    if l < 1:
        raise ValueError(f"range must be >= 1, got {l}")
    if j + l > n:
        raise ValueError(f"site {j}+{l} lies outside a chain of {n} sites")
    phase = np.exp(1j * alpha)
    idx = np.array([j - 1, j + l - 1])
    return JumpChannel(
        n=n,
        rate=_check_rate(rate),
        kind=TWO_SITE,
        site=j,
        column=(idx, np.array([1.0, phase])),
        row=(idx.copy(), np.array([1.0, -phase])),
        range=l,
        alpha=float(alpha),
    )


def build_dephasing(j, n, rate=1.0):
    """Projector onto site ``j`` (1-based)."""
    j, n = int(j), int(n)
    if not 1 <= j <= n:
        raise ValueError(f"site {j} outside a chain of {n} sites")
    idx = np.array([j - 1, j - 1])
    coef = np.array([1.0, 0.0], dtype=complex)
    return JumpChannel(
        n=n,
        rate=_check_rate(rate),
        kind=DEPHASING,
        site=j,
        column=(idx, coef),
        row=(idx.copy(), coef.copy()),
    )


class JumpSet:
    """Ordered, immutable collection of jump channels on an ``n``-site chain."""

    def __init__(self, channels, n):
        self.channels = tuple(channels)
        self.n = int(n)
        for ch in self.channels:
            if ch.n != self.n:
                raise ValueError(f"channel dimension {ch.n} does not match {self.n}")

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    def __add__(self, other):
        if other.n != self.n:
            raise ValueError("cannot combine jump sets of different dimension")
        return JumpSet(self.channels + other.channels, self.n)

    def __repr__(self):
        return f"JumpSet(n={self.n}, channels={len(self)}, pair_count={self.pair_count})"

    @property
    def pair_count(self):
        return sum(ch.kind == TWO_SITE for ch in self.channels)

    @property
    def pairs(self):
        """1-based ``(j, j + l)`` labels of every two-site channel, in order."""
        return [ch.pair for ch in self.channels if ch.kind == TWO_SITE]

    @cached_property
    def packed(self):
        """Flat arrays consumed by :mod:`flatdiss.kernels`."""
        k = len(self.channels)
        cidx = np.zeros((k, 2), dtype=np.int64)
        ridx = np.zeros((k, 2), dtype=np.int64)
        cval = np.zeros((k, 2), dtype=np.complex128)
        rval = np.zeros((k, 2), dtype=np.complex128)
        rates = np.zeros(k)
        anorm2 = np.zeros(k)
        for q, ch in enumerate(self.channels):
            cidx[q], cval[q] = ch.column
            ridx[q], rval[q] = ch.row
            rates[q] = ch.rate
            a = np.zeros(self.n, dtype=complex)
            np.add.at(a, ch.column[0], ch.column[1])
            anorm2[q] = np.vdot(a, a).real
        for arr in (cidx, ridx, cval, rval, rates, anorm2):
            arr.setflags(write=False)
        return cidx, cval, ridx, rval, rates, anorm2


def build_jump_set(n, l, alpha, rate=1.0):
    """Two-site channels at every odd ``j`` with ``j + l <= n``."""
    n, l = int(n), int(l)
    if l < 1:
        raise ValueError(f"range must be >= 1, got {l}")
    sites = range(1, n - l + 1, 2)
    if len(sites) == 0:
        raise ValueError(f"no admissible pairs for range {l} on {n} sites")
    return JumpSet([build_jump(j, l, alpha, n, rate) for j in sites], n)


def build_dephasing_set(n, rate):
    n = int(n)
    if n < 1:
        raise ValueError(f"need at least one site, got {n}")
    return JumpSet([build_dephasing(j, n, rate) for j in range(1, n + 1)], n)
