"""Composite model roster: which shape slots are free, pinned, or tied.

Shape parameters live on the log scale as a 6-vector
``alpha = log(p1, p2, tau1, tau2, nu1, nu2)``.  A family maps its free
coordinates to the full vector through an affine map
``alpha = A @ alpha_free + b``; pinned slots contribute to ``b`` and tied
slots (e.g. tau1 = p1) repeat a free coordinate in ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["ALPHA_NAMES", "Family", "ROSTER", "get_family"]

ALPHA_NAMES = ("p1", "p2", "tau1", "tau2", "nu1", "nu2")
_INDEX = {name: i for i, name in enumerate(ALPHA_NAMES)}


@dataclass(frozen=True)
class Family:
    """A composite family.

    Attributes:
        name: Roster label such as ``"BG"``.
        head: GBII subfamily tag of the head component.
        tail: GBII subfamily tag of the tail component.
        fixed: Slot name to pinned value (natural scale).
        tied: Slot name to the slot it copies.
    """

    name: str
    head: str
    tail: str
    fixed: dict = field(default_factory=dict)
    tied: dict = field(default_factory=dict)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(n for n in ALPHA_NAMES if n not in self.fixed and n not in self.tied)

    @property
    def n_free_shapes(self) -> int:
        return len(self.free_names)

    @property
    def affine(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (A, b) with alpha_full = A @ alpha_free + b."""
        free = self.free_names
        A = np.zeros((6, len(free)))
        b = np.zeros(6)
        for j, name in enumerate(free):
            A[_INDEX[name], j] = 1.0
        for name, value in self.fixed.items():
            b[_INDEX[name]] = math.log(value)
        for name, source in self.tied.items():
            A[_INDEX[name], free.index(source)] = 1.0
        return A, b

    def expand(self, alpha_free) -> np.ndarray:
        A, b = self.affine
        return A @ np.asarray(alpha_free, dtype=float) + b

    def restrict(self, alpha_full) -> np.ndarray:
        """Pick the free coordinates out of a full alpha vector."""
        alpha_full = np.asarray(alpha_full, dtype=float)
        return np.array([alpha_full[_INDEX[n]] for n in self.free_names])

    def is_fixed(self, name: str) -> bool:
        return name in self.fixed or name in self.tied


# The "G" tail pins nu2 = 1/2; the head tags follow the nested GBII subfamilies.
ROSTER = {
    fam.name: fam
    for fam in (
        Family("ComGBII", "GBII", "GBII"),
        Family("GBIIG", "GBII", "InverseGLMGA", fixed={"nu2": 0.5}),
        Family("BIIG", "BII", "InverseGLMGA", fixed={"p1": 1.0, "nu2": 0.5}),
        Family("BG", "Burr", "InverseGLMGA", fixed={"nu1": 1.0, "nu2": 0.5}),
        Family("IBG", "InverseBurr", "InverseGLMGA", fixed={"tau1": 1.0, "nu2": 0.5}),
        Family("PG", "Paralogistic", "InverseGLMGA", fixed={"nu1": 1.0, "nu2": 0.5}, tied={"tau1": "p1"}),
        Family("IPG", "InverseParalogistic", "InverseGLMGA", fixed={"tau1": 1.0, "nu2": 0.5}, tied={"nu1": "p1"}),
    )
}


def get_family(name: str) -> Family:
    try:
        return ROSTER[name]
    except KeyError:
        raise DomainError(f"unknown family {name!r}; choose from {', '.join(ROSTER)}") from None
