"""Truncated Fock-space operators, in the lab frame or displaced about a center.

In a displaced frame with center ``beta`` the basis states are the number
states of the fluctuation mode ``a = b - beta``; the physical annihilation
operator is then represented as ``beta * I + a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm


@dataclass(frozen=True)
class FockSpace:
    """Fock space truncated to the states ``|0>, ..., |n_max>``.

    ``center=None`` selects the lab frame; any finite complex ``center``
    selects the displaced frame about that amplitude.
    """

    n_max: int
    center: complex | None = None

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.center is not None:
            c = complex(self.center)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError("displaced-frame center must be finite")
            object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def displaced(self) -> bool:
        return self.center is not None

    @property
    def shift(self) -> complex:
        """Frame center, ``0`` in the lab frame."""
        return 0j if self.center is None else self.center

    @classmethod
    def lab(cls, n_max: int) -> "FockSpace":
        return cls(n_max)

    @classmethod
    def displaced_about(cls, n_max: int, center: complex) -> "FockSpace":
        return cls(n_max, complex(center))


def ladder(dim: int) -> np.ndarray:
    """Lab-frame annihilation matrix with ``(n-1, n) = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def identity(space: FockSpace) -> np.ndarray:
    return np.eye(space.dim, dtype=complex)


def annihilation(space: FockSpace) -> np.ndarray:
    """Physical annihilation operator ``b`` represented in ``space``."""
    a = ladder(space.dim)
    if space.displaced:
        a = a + space.center * np.eye(space.dim)
    return a


def fluctuation(space: FockSpace) -> np.ndarray:
    """Ladder operator of the basis itself (``b - center``)."""
    return ladder(space.dim)


def creation(space: FockSpace) -> np.ndarray:
    return adjoint(annihilation(space))


def number_operator(space: FockSpace) -> np.ndarray:
    """``a^dagger a`` of the basis mode: diagonal ``0..n_max``."""
    return np.diag(np.arange(space.dim, dtype=float)).astype(complex)


def adjoint(op: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(op)).T


def matmul(op1: np.ndarray, op2: np.ndarray) -> np.ndarray:
    op1 = np.asarray(op1)
    op2 = np.asarray(op2)
    if op1.ndim != 2 or op2.ndim != 2 or op1.shape[1] != op2.shape[0]:
        raise ValueError(f"dimension mismatch: {op1.shape} @ {op2.shape}")
    return op1 @ op2


def quadratures(space: FockSpace) -> tuple[np.ndarray, np.ndarray]:
    """Physical quadratures ``x = (b + b^+)/sqrt2``, ``p = -i(b - b^+)/sqrt2``."""
    b = annihilation(space)
    bd = adjoint(b)
    return (b + bd) / math.sqrt(2), -1j * (b - bd) / math.sqrt(2)


def displacement(dim: int, alpha: complex, pad: int = 0) -> np.ndarray:
    """Displacement operator ``exp(alpha a^+ - alpha^* a)`` on ``dim`` levels.

    The exponential is taken in a space enlarged by ``pad`` levels and then
    projected, which removes most of the truncation error near the top edge.
    """
    big = dim + pad
    a = ladder(big)
    d = expm(alpha * a.conj().T - np.conj(alpha) * a)
    return d[:dim, :dim]


def coherent_ket(dim: int, alpha: complex) -> np.ndarray:
    """Fock amplitudes ``e^{-|alpha|^2/2} alpha^n / sqrt(n!)`` (not renormalized)."""
    n = np.arange(dim)
    if alpha == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    # log-space keeps large amplitudes finite
    logmag = n * math.log(abs(alpha)) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    logmag -= 0.5 * abs(alpha) ** 2
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
