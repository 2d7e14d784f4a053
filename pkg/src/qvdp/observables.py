"""Phase-space and phase observables of density matrices.

Quadratures are ``x = (b + b^+)/sqrt2`` and ``p = -i(b - b^+)/sqrt2`` so the
vacuum has variance 1/2 and Wigner density ``exp(-x^2 - p^2)/pi``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from qvdp import hilbert
from qvdp.lindblad import DensityMatrix

logger = logging.getLogger(__name__)


@dataclass
class WignerGrid:
    """``values[i, j]`` is ``W(x_grid[i], p_grid[j])``."""

    x_grid: np.ndarray
    p_grid: np.ndarray
    values: np.ndarray

    @property
    def cell(self) -> float:
        return float((self.x_grid[1] - self.x_grid[0]) * (self.p_grid[1] - self.p_grid[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell)

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * float(self.p_grid[1] - self.p_grid[0])

    def cut_at_x(self, x0: float = 0.0) -> np.ndarray:
        """``W(x0, p)`` on the nearest grid column."""
        return self.values[int(np.argmin(np.abs(self.x_grid - x0)))]


@dataclass
class PhaseDistribution:
    phi_grid: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        return float(self.values.sum() * (2 * math.pi / self.phi_grid.size))

    def peak(self) -> tuple[float, float]:
        """``(position, height)`` of the global maximum."""
        k = int(np.argmax(self.values))
        return float(self.phi_grid[k]), float(self.values[k])

    def width(self) -> float:
        """Circular standard deviation ``sqrt(-2 ln |<e^{i phi}>|)``."""
        m = abs(np.sum(self.values * np.exp(1j * self.phi_grid)) * 2 * math.pi / self.phi_grid.size)
        return math.sqrt(-2 * math.log(m)) if m > 0 else float("inf")


def _check_grid(grid, name):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or not np.all(np.isfinite(grid)):
        raise ValueError(f"{name} must be a finite 1-D grid")
    steps = np.diff(grid)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0) or steps[0] <= 0:
        raise ValueError(f"{name} must be uniform and increasing")
    return grid


def wigner_fock(rho: np.ndarray, x_grid, p_grid) -> np.ndarray:
    """Wigner density of a Fock-basis matrix by Laguerre-kernel recurrences.

    Each ``|m><n|`` contributes ``(-1)^m sqrt(m!/n!) (2 alpha)^(n-m)
    L_m^(n-m)(4|alpha|^2) e^{-2|alpha|^2} / pi`` (times 2 for the Hermitian
    pair), with ``alpha = (x + ip)/sqrt2``; the Laguerre factors are built by
    upward recurrence in ``m`` and ``n``.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    x, p = np.meshgrid(x_grid, p_grid, indexing="ij")
    a = (x + 1j * p) / math.sqrt(2)
    w_cur = np.empty((dim,) + a.shape, dtype=complex)
    w_cur[0] = np.exp(-2.0 * np.abs(a) ** 2) / math.pi
    total = np.real(rho[0, 0]) * np.real(w_cur[0])
    for n in range(1, dim):
        w_cur[n] = 2.0 * a * w_cur[n - 1] / math.sqrt(n)
        total += 2 * np.real(rho[0, n] * w_cur[n])
    for m in range(1, dim):
        prev = w_cur[m].copy()
        w_cur[m] = (2 * np.conj(a) * prev - math.sqrt(m) * w_cur[m - 1]) / math.sqrt(m)
        total += np.real(rho[m, m] * w_cur[m])
        for n in range(m + 1, dim):
            nxt = (2 * a * w_cur[n - 1] - math.sqrt(m) * prev) / math.sqrt(n)
            prev = w_cur[n].copy()
            w_cur[n] = nxt
            total += 2 * np.real(rho[m, n] * w_cur[n])
    return total


def wigner(dm: DensityMatrix, x_grid, p_grid, coverage_tol: float = 1e-3) -> WignerGrid:
    """Wigner density of the physical state on a lab-frame grid.

    Displaced-frame states are evaluated on the grid shifted by the frame
    center.  A warning is logged when the grid misses more than
    ``coverage_tol`` of the probability.
    """
    x_grid = _check_grid(x_grid, "x_grid")
    p_grid = _check_grid(p_grid, "p_grid")
    c = dm.space.shift
    xs = x_grid - math.sqrt(2) * c.real
    ps = p_grid - math.sqrt(2) * c.imag
    grid = WignerGrid(x_grid, p_grid, wigner_fock(dm.rho, xs, ps))
    mass = grid.integral()
    if abs(mass - 1) > coverage_tol:
        logger.warning("Wigner grid captures %.6f of the state (tolerance %.1e)", mass, coverage_tol)
    return grid


def default_wigner_grid(center: complex = 0j, n: int = 201, margin: float = 5.0):
    """Square grid spanning ``+-(|center| + margin)`` in quadrature units."""
    half = math.sqrt(2) * abs(center) + margin
    g = np.linspace(-half, half, n)
    return g, g.copy()


def phase_distribution(dm: DensityMatrix, n_phi: int = 256) -> PhaseDistribution:
    """``P(phi) = sum_{n,m} e^{i(m-n)phi} rho_nm / 2pi`` over the truncated basis.

    Displaced-frame states are first transformed to the lab basis.  The
    Riemann-sum normalization is exact when ``n_phi > n_max``.
    """
    if n_phi < 8:
        raise ValueError("n_phi must be >= 8")
    if dm.space.displaced:
        from qvdp.lindblad import to_lab

        dm = to_lab(dm)
    phi = 2 * math.pi * np.arange(n_phi) / n_phi
    v = np.exp(1j * np.outer(np.arange(dm.space.dim), phi))
    vals = np.real(np.einsum("ik,ij,jk->k", v.conj(), dm.rho, v)) / (2 * math.pi)
    return PhaseDistribution(phi, vals)


def negativity_volume(w: WignerGrid) -> float:
    """``sum |W| dx dp - 1``, clipped at zero."""
    return max(0.0, float(np.abs(w.values).sum() * w.cell) - 1.0)


def expectation(dm: DensityMatrix, op: np.ndarray) -> complex:
    op = np.asarray(op)
    if op.shape != dm.rho.shape:
        raise ValueError(f"operator shape {op.shape} does not match state {dm.rho.shape}")
    return complex(np.trace(dm.rho @ op))


def covariance_from_state(dm: DensityMatrix) -> np.ndarray:
    """Symmetrized covariance of ``X1 = (db + db^+)/sqrt2``, ``X2 = -i(db - db^+)/sqrt2``.

    ``db = b - <b>``, so the matrix is built from central moments.
    """
    b = hilbert.annihilation(dm.space)
    mean = expectation(dm, b)
    db = b - mean * np.eye(dm.space.dim)
    dbd = db.conj().T
    x1 = (db + dbd) / math.sqrt(2)
    x2 = -1j * (db - dbd) / math.sqrt(2)
    ops = (x1, x2)
    sigma = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            sym = 0.5 * (ops[i] @ ops[j] + ops[j] @ ops[i])
            sigma[i, j] = expectation(dm, sym).real
    return sigma


@dataclass
class QuadratureFrame:
    """Radial and tangential quadratures about the steady-state phase.

    ``r = (b e^{-i phi} + b^+ e^{i phi})/2`` and
    ``r_perp = i(b e^{-i phi} - b^+ e^{i phi})/2``, normalized so a coherent
    state ``R e^{i(phi + d)}`` has ``<r_perp> = -R sin d``.
    """

    phi_ss: float
    r_op: np.ndarray
    r_perp_op: np.ndarray

    @classmethod
    def build(cls, space: hilbert.FockSpace, phi_ss: float) -> "QuadratureFrame":
        x, p = hilbert.quadratures(space)
        c, s = math.cos(phi_ss), math.sin(phi_ss)
        r = (c * x + s * p) / math.sqrt(2)
        r_perp = (s * x - c * p) / math.sqrt(2)
        return cls(phi_ss, r, r_perp)


@dataclass
class PhaseDeviation:
    delta_phi: np.ndarray
    var_r_perp: np.ndarray


def phase_deviation_series(snapshots, frame: QuadratureFrame, R_ss: float) -> PhaseDeviation:
    """``delta_phi ~ -<r_perp>/R_ss`` and ``Var(r_perp)`` for each snapshot."""
    rp = frame.r_perp_op
    rp2 = rp @ rp
    mean = np.array([expectation(dm, rp).real for dm in snapshots])
    second = np.array([expectation(dm, rp2).real for dm in snapshots])
    return PhaseDeviation(-mean / R_ss, second - mean**2)


def rotate(dm: DensityMatrix, theta: float) -> DensityMatrix:
    """Apply ``e^{-i theta n} rho e^{i theta n}`` in the lab frame."""
    if dm.space.displaced:
        raise ValueError("rotation is defined for lab-frame states")
    u = np.exp(-1j * theta * np.arange(dm.space.dim))
    return DensityMatrix(dm.space, u[:, None] * dm.rho * u.conj()[None, :])
