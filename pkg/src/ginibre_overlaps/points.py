"""Eigenvalue coordinates with an explicit conjugate slot."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import InvalidOrderError


@dataclass(frozen=True)
class SpectralPoint:
    """A point ``(lam, lam_bar)``.

    For a physical point ``lam_bar`` is the complex conjugate of ``lam``.  With
    ``decoupled=True`` the two slots are independent complex numbers, which is
    how the overlap functions are continued to entire functions of 2k variables.
    """

    lam: complex
    lam_bar: complex
    decoupled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "lam_bar", complex(self.lam_bar))
        if not self.decoupled and self.lam_bar != self.lam.conjugate():
            raise ValueError("physical point needs lam_bar == conj(lam); pass decoupled=True")

    @classmethod
    def physical(cls, z: complex) -> "SpectralPoint":
        z = complex(z)
        return cls(z, z.conjugate(), False)

    @classmethod
    def pair(cls, lam: complex, lam_bar: complex) -> "SpectralPoint":
        """Decoupled point unless the slots happen to be conjugate."""
        lam, lam_bar = complex(lam), complex(lam_bar)
        return cls(lam, lam_bar, lam_bar != lam.conjugate())

    def shifted(self, mu: complex, mu_bar: complex) -> "SpectralPoint":
        return SpectralPoint.pair(self.lam + mu, self.lam_bar + mu_bar)


class SpectralTuple(tuple):
    """Ordered k-tuple of :class:`SpectralPoint`, k >= 1."""

    def __new__(cls, points: Iterable):
        pts = tuple(p if isinstance(p, SpectralPoint) else SpectralPoint.physical(p) for p in points)
        if len(pts) < 1:
            raise InvalidOrderError("need at least one point")
        return super().__new__(cls, pts)

    @classmethod
    def physical(cls, zs: Sequence[complex]) -> "SpectralTuple":
        return cls(SpectralPoint.physical(z) for z in zs)

    @classmethod
    def from_pairs(cls, lams: Sequence[complex], lam_bars: Sequence[complex]) -> "SpectralTuple":
        if len(lams) != len(lam_bars):
            raise ValueError("lams and lam_bars differ in length")
        return cls(SpectralPoint.pair(a, b) for a, b in zip(lams, lam_bars))

    @property
    def k(self) -> int:
        return len(self)

    @property
    def lams(self) -> list[complex]:
        return [p.lam for p in self]

    @property
    def lam_bars(self) -> list[complex]:
        return [p.lam_bar for p in self]

    @property
    def is_physical(self) -> bool:
        return not any(p.decoupled for p in self)

    def shifted(self, mu: complex, mu_bar: complex) -> "SpectralTuple":
        return SpectralTuple(p.shifted(mu, mu_bar) for p in self)


@dataclass(frozen=True)
class KernelArgs:
    """Arguments ``(x, x_bar, y, y_bar)`` plus one or two conditioning points."""

    x: complex
    x_bar: complex
    y: complex
    y_bar: complex
    conditioning: tuple

    @classmethod
    def physical(cls, x: complex, y: complex, *conditioning: complex) -> "KernelArgs":
        x, y = complex(x), complex(y)
        return cls(
            x, x.conjugate(), y, y.conjugate(), tuple(SpectralPoint.physical(c) for c in conditioning)
        )
