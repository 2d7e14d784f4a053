"""Classical amplitude dynamics, bifurcation boundaries and the phase diagram."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from qvdp.effective import (
    amplitude_cubic,
    classical_fixed_points,
    jacobian,
    limit_cycle_radius,
    stable_fixed_point,
)
from qvdp.errors import DomainError, SolverError
from qvdp.lindblad import SystemParams

LABELS = (
    "sync-overdamped",
    "sync-underdamped",
    "limit-cycle",
    "phase-self-oscillation",
    "unresolved",
)


@dataclass
class ClassicalTrajectory:
    times: np.ndarray
    beta: np.ndarray

    @property
    def R(self) -> np.ndarray:
        return np.abs(self.beta)

    @property
    def phi(self) -> np.ndarray:
        """Unwrapped phase."""
        return np.unwrap(np.angle(self.beta))


def _rhs(params: SystemParams):
    d, half_g1, g2, f = params.Delta, 0.5 * params.gamma1, params.gamma2, params.F

    def rhs(t, y):
        x, p = y
        r2 = x * x + p * p
        k = half_g1 - g2 * r2
        return [k * x - d * p - f, d * x + k * p]

    return rhs


def blowup_bound(params: SystemParams, beta0: complex) -> float:
    scale = 2 * limit_cycle_radius(params) + (params.F / params.gamma2) ** (1 / 3)
    return 10 * max(abs(beta0), scale)


def integrate(
    params: SystemParams,
    beta0: complex,
    t_span: tuple[float, float],
    t_eval=None,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> ClassicalTrajectory:
    """Integrate the amplitude equation with an adaptive 8th-order scheme."""
    beta0 = complex(beta0)
    if not all(math.isfinite(v) for v in (beta0.real, beta0.imag, *t_span)):
        raise ValueError("initial amplitude and time span must be finite")
    bound = blowup_bound(params, beta0)

    def escape(t, y):
        return bound - math.hypot(y[0], y[1])

    escape.terminal = True
    sol = solve_ivp(_rhs(params), t_span, [beta0.real, beta0.imag], method="DOP853",
                    t_eval=t_eval, rtol=rtol, atol=atol, events=escape)
    if sol.status == 1:
        raise SolverError(f"trajectory left |beta| < {bound:.3g} at t={sol.t_events[0][0]:.6g}")
    if not sol.success:
        raise SolverError(f"classical integration failed: {sol.message}")
    return ClassicalTrajectory(sol.t, sol.y[0] + 1j * sol.y[1])


# --------------------------------------------------------------------------
# bifurcation boundaries (closed forms)


def boundary_saddle_node(params: SystemParams, Delta: float, branch: int = 1) -> float:
    """Squared drive at the saddle-node bifurcation; ``branch=+1`` or ``-1``.

    ``branch`` selects the upper or lower sign pair of
    ``F^2 = (+-2 g1 + s)(-g1 s +- (12 Delta^2 + g1^2)) / (108 g2)`` with
    ``s = sqrt(g1^2 - 12 Delta^2)``.  The two branches bound the wedge of
    detuning and drive in which three fixed points coexist.
    """
    g1, g2 = params.gamma1, params.gamma2
    disc = g1 * g1 - 12 * Delta * Delta
    if disc < 0:
        raise DomainError(f"saddle-node boundary needs gamma1^2 >= 12 Delta^2 (Delta={Delta})")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    s = math.sqrt(disc)
    return (branch * 2 * g1 + s) * (-g1 * s + branch * (12 * Delta * Delta + g1 * g1)) / (108 * g2)


def boundary_belyakov_devaney(params: SystemParams, Delta: float) -> float:
    """Squared drive at the node-to-focus transition, for ``|Delta| > gamma1/4``.

    The closed form is stated for positive detuning; negative detuning uses
    the mirror symmetry ``Delta -> -Delta``.
    """
    g1, g2 = params.gamma1, params.gamma2
    if abs(Delta) <= g1 / 4:
        raise DomainError(f"node-to-focus boundary needs |Delta| > gamma1/4 (Delta={Delta})")
    d = abs(Delta)
    return (-g1 / 2 + d) ** 2 * d / g2 + d**3 / g2


def boundary_hopf(params: SystemParams, Delta: float) -> float:
    """Squared drive at the Hopf bifurcation, for ``|Delta| > gamma1/4``."""
    g1, g2 = params.gamma1, params.gamma2
    if abs(Delta) <= g1 / 4:
        raise DomainError(f"Hopf boundary needs |Delta| > gamma1/4 (Delta={Delta})")
    return 0.25 * g1 / g2 * Delta * Delta + g1**3 / (64 * g2)


# --------------------------------------------------------------------------
# numerical transition finders (independent of the closed forms)


def _leading_stable(params: SystemParams):
    """Most stable fixed point and its Jacobian eigenvalues (numerical)."""
    best = None
    for fp in classical_fixed_points(params):
        ev = np.linalg.eigvals(jacobian(params, fp.beta))
        lead = ev.real.max()
        if best is None or lead < best[1]:
            best = (fp, lead, ev)
    return best


def hopf_indicator(params: SystemParams) -> float:
    """Leading real part of the most stable fixed point."""
    return float(_leading_stable(params)[1])


def focus_indicator(params: SystemParams) -> float:
    """``tr^2 - 4 det`` of the Jacobian at the most stable fixed point.

    Negative when the eigenvalues form a complex pair.
    """
    fp = _leading_stable(params)[0]
    j = jacobian(params, fp.beta)
    return float(np.trace(j) ** 2 - 4 * np.linalg.det(j))


def fixed_point_count_indicator(params: SystemParams) -> float:
    """Discriminant of the amplitude cubic: positive with three fixed points."""
    a, b, c, d = amplitude_cubic(params)
    return 18 * a * b * c * d - 4 * b**3 * d + b * b * c * c - 4 * a * c**3 - 27 * a * a * d * d


_INDICATORS = {
    "hopf": hopf_indicator,
    "focus": focus_indicator,
    "saddle-node": fixed_point_count_indicator,
}


def locate_transition(params: SystemParams, kind: str, lo: float, hi: float,
                      along: str = "Delta", xtol: float = 1e-13) -> float:
    """Root of a transition indicator between ``lo`` and ``hi``.

    ``along`` names the swept parameter (``"Delta"`` or ``"F"``); the others
    are taken from ``params``.
    """
    indicator = _INDICATORS[kind]

    def f(x):
        return indicator(params.replace(**{along: x}))

    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise SolverError(f"{kind} indicator has no sign change on [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)


# --------------------------------------------------------------------------
# phase diagram


@dataclass(frozen=True)
class DiagramCell:
    F: float
    Delta: float
    label: str
    winding: int | None
    period: float | None = None


@dataclass(frozen=True)
class AttractorInfo:
    periodic: bool
    period: float | None
    winding: int | None
    recurrence: float
    center: complex
    trajectory: ClassicalTrajectory


def find_attractor(
    params: SystemParams,
    beta0: complex | None = None,
    transient: float = 50.0,
    window: float = 50.0,
    tol: float = 1e-6,
) -> AttractorInfo:
    """Integrate past a transient and test the orbit for periodicity.

    Times are in units of ``1/gamma1``.  Periodicity uses a Poincare section
    through the orbit's mean along ``Im beta`` (upward crossings); the
    winding number counts revolutions about the origin per period.
    """
    g1 = params.gamma1
    if beta0 is None:
        fps = classical_fixed_points(params)
        beta0 = fps[-1].beta + 0.05 * limit_cycle_radius(params)
    t0, t1, t2 = 0.0, transient / g1, (transient + window) / g1
    pre = integrate(params, beta0, (t0, t1), t_eval=[t1])
    t_eval = np.linspace(t1, t2, 20001)
    traj = integrate(params, pre.beta[-1], (t1, t2), t_eval=t_eval)

    center = complex(np.mean(traj.beta))
    y = traj.beta.imag - center.imag
    up = np.nonzero((y[:-1] < 0) & (y[1:] >= 0))[0]
    scale = max(1.0, float(np.max(np.abs(traj.beta))))
    if len(up) < 3:
        spread = float(np.ptp(traj.beta.real) + np.ptp(traj.beta.imag))
        return AttractorInfo(False, None, None, spread / scale, center, traj)

    # refine each crossing with a short, accurate integration
    rhs = _rhs(params)

    def section(t, s):
        return s[1] - center.imag

    section.direction = 1
    crossings = []
    for k in up[-3:]:
        ta, tb = traj.times[k], traj.times[k + 1]
        sol = solve_ivp(rhs, (ta, tb + 1e-12), [traj.beta[k].real, traj.beta[k].imag],
                        method="DOP853", rtol=1e-12, atol=1e-14, events=section)
        if len(sol.t_events[0]) == 0:
            continue
        crossings.append((sol.t_events[0][0], complex(*sol.y_events[0][0])))
    if len(crossings) < 2:
        return AttractorInfo(False, None, None, float("inf"), center, traj)
    (ta, ba), (tb, bb) = crossings[-2], crossings[-1]
    recurrence = abs(bb - ba) / scale
    period = float(tb - ta)
    mask = (traj.times >= ta) & (traj.times <= tb)
    seg = np.concatenate([[ba], traj.beta[mask], [bb]])
    turns = (np.unwrap(np.angle(seg))[-1] - np.unwrap(np.angle(seg))[0]) / (2 * math.pi)
    winding = int(round(turns))
    return AttractorInfo(recurrence <= tol, period, winding, recurrence, center, traj)


def classify_cell(params: SystemParams, retry_factor: float = 4.0, **attractor_kwargs) -> DiagramCell:
    """Label one diagram cell.

    Cells whose orbit has not settled (slow convergence next to a
    bifurcation) are integrated once more with transient and window scaled
    by ``retry_factor`` before being reported as unresolved.
    """
    fp = stable_fixed_point(params)
    if fp is not None:
        label = "sync-underdamped" if fp.underdamped else "sync-overdamped"
        return DiagramCell(params.F, params.Delta, label, None)
    transient = attractor_kwargs.pop("transient", 50.0)
    window = attractor_kwargs.pop("window", 50.0)
    info = None
    for scale in (1.0, retry_factor):
        try:
            info = find_attractor(params, transient=scale * transient, window=scale * window,
                                  **attractor_kwargs)
        except SolverError:
            return DiagramCell(params.F, params.Delta, "unresolved", None)
        if info.periodic:
            break
    if not info.periodic:
        return DiagramCell(params.F, params.Delta, "unresolved", info.winding, info.period)
    label = "phase-self-oscillation" if info.winding == 0 else "limit-cycle"
    return DiagramCell(params.F, params.Delta, label, info.winding, info.period)


def _cell_job(args):
    params, kwargs = args
    return classify_cell(params, **kwargs)


def scan_phase_diagram(
    params: SystemParams,
    F_grid,
    Delta_grid,
    workers: int = 1,
    **attractor_kwargs,
) -> list[list[DiagramCell]]:
    """Classify every ``(F, Delta)`` cell; rows follow ``F_grid``."""
    F_grid = [float(f) for f in F_grid]
    Delta_grid = [float(d) for d in Delta_grid]
    if any(f < 0 or not math.isfinite(f) for f in F_grid):
        raise ValueError("F_grid must be finite and nonnegative")
    if any(not math.isfinite(d) for d in Delta_grid):
        raise ValueError("Delta_grid must be finite")
    jobs = [(params.replace(F=f, Delta=d), attractor_kwargs) for f in F_grid for d in Delta_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_cell_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        cells = [_cell_job(j) for j in jobs]
    n = len(Delta_grid)
    return [cells[i * n:(i + 1) * n] for i in range(len(F_grid))]
