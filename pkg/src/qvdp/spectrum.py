"""Emission spectrum of the full model from the quantum regression theorem.

With ``S(w) = int dt e^{iwt} <b^+(t) b(0)>`` and stationarity
(``C(-t) = C(t)^*``) the incoherent part is

    S(w) = 2 Re Tr[ db^+ (-iw - L)^{-1} (db rho_ss) ],   db = b - <b>_ss,

and ``|<b>_ss|^2`` is reported separately as the coherent weight.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.signal import find_peaks

from qvdp import hilbert
from qvdp.errors import SolverError
from qvdp.lindblad import DensityMatrix, Liouvillian, vec

logger = logging.getLogger(__name__)


@dataclass
class SpectrumTrace:
    omega_grid: np.ndarray
    values: np.ndarray
    coherent_weight: float = 0.0
    failed: list = field(default_factory=list)

    def incoherent_weight(self) -> float:
        """``int S dw / 2pi`` by the trapezoid rule."""
        return float(np.trapezoid(self.values, self.omega_grid) / (2 * np.pi))

    def total_weight(self) -> float:
        return self.incoherent_weight() + self.coherent_weight

    def peaks(self, rel_prominence: float = 0.01) -> np.ndarray:
        """Frequencies of local maxima with prominence above ``rel_prominence * max``."""
        vals = np.nan_to_num(self.values)
        idx, _ = find_peaks(vals, prominence=rel_prominence * vals.max())
        return self.omega_grid[idx]


def default_omega_grid(params, n: int = 2048) -> np.ndarray:
    """``n`` points spanning ``+-4 max(|Delta|, Omega_eff, Gamma_deph)``."""
    from qvdp.effective import classify_regime

    _, summary = classify_regime(params)
    scales = [abs(params.Delta), params.gamma1]
    for value in (summary.Omega_eff, summary.Gamma_deph, summary.Gamma):
        if value is not None:
            scales.append(value)
    half = 4 * max(scales)
    return np.linspace(-half, half, n)


def _fluctuation_ops(L: Liouvillian, rho_ss: DensityMatrix, subtract_mean: bool = True):
    b = hilbert.annihilation(L.space)
    mean = np.trace(b @ rho_ss.rho) if subtract_mean else 0.0
    db = b - mean * np.eye(L.space.dim)
    return db, complex(mean)


def spectrum_full(
    L: Liouvillian,
    rho_ss: DensityMatrix,
    omega_grid,
    workers: int = 1,
) -> SpectrumTrace:
    """Incoherent emission spectrum by one shifted linear solve per frequency."""
    omega = np.asarray(omega_grid, dtype=float)
    db, mean = _fluctuation_ops(L, rho_ss)
    source = vec(db @ rho_ss.rho)
    # Tr[db^+ X] = sum_kl conj(db)_kl X_kl
    probe = vec(db.conj())
    mat = L.matrix.tocsc()
    ident = sp.identity(L.size, dtype=complex, format="csc")

    def one(w):
        try:
            x = spla.splu((-1j * w) * ident - mat).solve(source)
        except RuntimeError as exc:
            return w, float("nan"), str(exc)
        if not np.all(np.isfinite(x)):
            return w, float("nan"), "non-finite resolvent"
        return w, 2.0 * float(np.real(probe @ x)), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, omega))
    else:
        results = [one(w) for w in omega]
    values = np.array([r[1] for r in results])
    failed = [(r[0], r[2]) for r in results if r[2] is not None]
    for w, why in failed:
        logger.warning("resolvent solve failed at omega=%g: %s", w, why)
    return SpectrumTrace(omega, values, abs(mean) ** 2, failed)


def correlation_function(
    L: Liouvillian,
    rho_ss: DensityMatrix,
    t_grid,
    subtract_mean: bool = False,
    rtol: float = 1e-10,
    atol: float = 1e-13,
) -> np.ndarray:
    """``<b^+(t) b(0)> = Tr[b^+ e^{Lt} (b rho_ss)]`` on ``t_grid`` (starting at 0).

    With ``subtract_mean`` the fluctuation operator ``db`` replaces ``b``.
    """
    t = np.asarray(t_grid, dtype=float)
    if t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must start at 0 and increase")
    op, _ = _fluctuation_ops(L, rho_ss, subtract_mean)
    x0 = vec(op @ rho_ss.rho).astype(complex)
    probe = vec(op.conj())
    mat = L.matrix
    sol = solve_ivp(lambda _, y: mat @ y, (t[0], t[-1]), x0, method="DOP853",
                    t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise SolverError(f"correlation integration failed: {sol.message}")
    return probe @ sol.y


def spectrum_from_correlation(t_grid, corr, omega_grid) -> np.ndarray:
    """``2 Re int_0^T e^{iwt} C(t) dt`` by the trapezoid rule."""
    t = np.asarray(t_grid, dtype=float)
    w = np.asarray(omega_grid, dtype=float)
    phase = np.exp(1j * np.outer(w, t))
    return 2.0 * np.real(np.trapezoid(phase * np.asarray(corr)[None, :], t, axis=1))
