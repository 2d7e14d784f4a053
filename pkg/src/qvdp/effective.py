"""Closed-form analytics of the linearized (effective) quantum model.

Everything here follows from the classical amplitude equation

    d beta/dt = i Delta beta + gamma1/2 beta - gamma2 |beta|^2 beta - F

and its linearization about the stable fixed point ``beta_ss``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from qvdp import hilbert, lindblad
from qvdp.errors import InstabilityError
from qvdp.hilbert import FockSpace
from qvdp.lindblad import SystemParams
from qvdp.spectrum import SpectrumTrace

logger = logging.getLogger(__name__)

SHOT_NOISE = 0.5

REGIMES = ("no-stable-fixed-point", "overdamped", "underdamped", "quantum-coherent")


# --------------------------------------------------------------------------
# classical fixed points


@dataclass(frozen=True)
class FixedPoint:
    beta: complex
    eigenvalues: tuple[complex, complex]
    stable: bool
    residual: float

    @property
    def R(self) -> float:
        return abs(self.beta)

    @property
    def phi(self) -> float:
        return math.atan2(self.beta.imag, self.beta.real)

    @property
    def u(self) -> float:
        """Squared amplitude ``|beta|^2``."""
        return abs(self.beta) ** 2

    @property
    def underdamped(self) -> bool:
        return abs(self.eigenvalues[0].imag) > 0


def amplitude_rhs(params: SystemParams, beta: complex) -> complex:
    """Right-hand side of the classical amplitude equation."""
    g1, g2 = params.gamma1, params.gamma2
    return (1j * params.Delta + 0.5 * g1 - g2 * abs(beta) ** 2) * beta - params.F


def jacobian(params: SystemParams, beta: complex) -> np.ndarray:
    """Real 2x2 Jacobian of the amplitude equation in (Re beta, Im beta)."""
    kappa = 0.5 * params.gamma1 - 2 * params.gamma2 * abs(beta) ** 2
    g = params.gamma2 * beta * beta
    d = params.Delta
    return np.array(
        [[kappa - g.real, -d - g.imag], [d - g.imag, kappa + g.real]], dtype=float
    )


def eigenvalues(params: SystemParams, u: float) -> tuple[complex, complex]:
    """``-2 u gamma2 + gamma1/2 +- sqrt(u^2 gamma2^2 - Delta^2)``."""
    kappa = 0.5 * params.gamma1 - 2 * params.gamma2 * u
    root = complex(np.sqrt(complex((params.gamma2 * u) ** 2 - params.Delta**2)))
    return (kappa + root, kappa - root)


def amplitude_cubic(params: SystemParams) -> tuple[float, float, float, float]:
    """Coefficients of ``g2^2 u^3 - g1 g2 u^2 + (g1^2/4 + Delta^2) u - F^2``."""
    g1, g2 = params.gamma1, params.gamma2
    return (g2 * g2, -g1 * g2, 0.25 * g1 * g1 + params.Delta**2, -params.F**2)


def _cubic_real_roots(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of ``a x^3 + b x^2 + c x + d`` in closed form."""
    b, c, d = b / a, c / a, d / a
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    scale = max(abs(p) ** 1.5, abs(q), 1e-300)
    if disc > 1e-14 * scale * scale:
        s = math.sqrt(disc)
        roots = [math.copysign(abs(-q / 2 + s) ** (1 / 3), -q / 2 + s)
                 + math.copysign(abs(-q / 2 - s) ** (1 / 3), -q / 2 - s)]
    elif p < 0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = max(-1.0, min(1.0, 3.0 * q / (p * m)))
        theta = math.acos(arg) / 3.0
        roots = [m * math.cos(theta - 2 * math.pi * k / 3) for k in range(3)]
    else:
        roots = [-math.copysign(abs(q) ** (1 / 3), q)] if q else [0.0]
    return sorted(r - shift for r in roots)


def _polish(coeffs, x: float, steps: int = 8) -> float:
    a, b, c, d = coeffs
    for _ in range(steps):
        f = ((a * x + b) * x + c) * x + d
        df = (3 * a * x + 2 * b) * x + c
        if df == 0:
            break
        step = f / df
        x_new = x - step
        if not math.isfinite(x_new):
            break
        if abs(((a * x_new + b) * x_new + c) * x_new + d) > abs(f):
            break
        x = x_new
    return x


def _dedupe(values: list[float], rel: float = 1e-9) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > rel * max(1.0, abs(v)):
            out.append(v)
    return out


def limit_cycle_radius(params: SystemParams) -> float:
    """Radius ``sqrt(gamma1 / 2 gamma2)`` of the undriven limit cycle."""
    return math.sqrt(params.gamma1 / (2 * params.gamma2))


def _make_fixed_point(params: SystemParams, u: float) -> FixedPoint:
    denom = 1j * params.Delta + 0.5 * params.gamma1 - params.gamma2 * u
    beta = complex(params.F / denom) if params.F else 0j
    lam = eigenvalues(params, abs(beta) ** 2)
    stable = lam[0].real < 0 and lam[1].real < 0
    return FixedPoint(beta, lam, stable, abs(amplitude_rhs(params, beta)))


def classical_fixed_points(params: SystemParams) -> list[FixedPoint]:
    """All fixed points of the amplitude equation, ordered by amplitude.

    For ``F = 0`` only the (unstable) origin is returned; the limit-cycle
    radius is available from :func:`limit_cycle_radius`.
    """
    if params.F == 0:
        return [_make_fixed_point(params, 0.0)]
    coeffs = amplitude_cubic(params)
    roots = [_polish(coeffs, r) for r in _cubic_real_roots(*coeffs)]
    roots = _dedupe([r for r in roots if r > 0])
    return [_make_fixed_point(params, u) for u in roots]


def stable_fixed_point(params: SystemParams) -> FixedPoint | None:
    """The stable fixed point, or ``None`` if there is none."""
    stable = [fp for fp in classical_fixed_points(params) if fp.stable]
    if not stable:
        return None
    if len(stable) > 1:
        logger.warning(
            "%d stable fixed point candidates at %s; keeping the smallest residual: %s",
            len(stable), params, [fp.beta for fp in stable],
        )
        stable.sort(key=lambda fp: fp.residual)
    return stable[0]


def default_center(params: SystemParams) -> complex:
    """Displaced-frame center: stable fixed point, else the largest fixed point."""
    fp = stable_fixed_point(params)
    if fp is None:
        fp = classical_fixed_points(params)[-1]
    return fp.beta


# --------------------------------------------------------------------------
# Bogoliubov diagonalization and rates


@dataclass(frozen=True)
class BogoliubovData:
    A: float
    theta: float
    chi: float
    Omega_eff: float
    Omega_eff_sq: float
    Gamma_up: float
    Gamma_down: float
    Gamma: float
    Gamma_deph: float
    n_eff: float
    n_bar: float
    underdamped: bool
    at_boundary: bool


def bogoliubov(params: SystemParams, fp: FixedPoint) -> BogoliubovData:
    """Squeezing parameters and rates of the diagonalized effective model.

    In the overdamped regime (``Delta^2 <= 4 A^2``) the rotating-wave rates
    are undefined and reported as NaN; ``Omega_eff`` then holds the
    magnitude of the imaginary frequency.
    """
    g1, g2 = params.gamma1, params.gamma2
    u = fp.u
    loss = 4 * g2 * u
    gamma = loss - g1
    if gamma <= 0:
        raise InstabilityError(
            f"damping rate 4 gamma2 |beta|^2 - gamma1 = {gamma:.6g} <= 0: "
            "the classical fixed point has lost its stability"
        )
    ae = -1j * g2 * fp.beta**2 / 2
    a_mag = abs(ae)
    theta = math.atan2(ae.imag, ae.real)
    delta = params.Delta
    omega_sq = delta * delta - 4 * a_mag * a_mag
    n_bar = g1 / gamma
    nan = float("nan")
    if omega_sq <= 0:
        boundary = omega_sq == 0
        return BogoliubovData(a_mag, theta, nan, math.sqrt(-omega_sq), omega_sq,
                              nan, nan, gamma, nan, nan, n_bar, False, boundary)
    omega = math.sqrt(omega_sq)
    # tanh(2 chi) = 2A / Delta
    chi = 0.5 * math.atanh(2 * a_mag / delta)
    # sinh^2 chi = (cosh 2chi - 1)/2 written without cancellation
    sinh2 = 4 * a_mag * a_mag / (2 * omega * (abs(delta) + omega))
    cosh2 = 1.0 + sinh2
    up = loss * sinh2 + g1 * cosh2
    down = loss * cosh2 + g1 * sinh2
    diff = down - up
    return BogoliubovData(
        A=a_mag, theta=theta, chi=chi, Omega_eff=omega, Omega_eff_sq=omega_sq,
        Gamma_up=up, Gamma_down=down, Gamma=diff, Gamma_deph=up + down,
        n_eff=up / diff, n_bar=n_bar, underdamped=True, at_boundary=False,
    )


def second_order_phase_params(params: SystemParams, fp: FixedPoint) -> tuple[float, float]:
    """Damping and bare frequency of the second-order phase equation.

    Returns ``(Gamma, Omega)`` with ``Gamma = 4 gamma2 R^2 - gamma1`` and
    ``Omega^2 = Delta^2 + (gamma2 R^2 - gamma1/2)(3 gamma2 R^2 - gamma1/2)``;
    ``Omega`` is NaN where ``Omega^2 < 0`` (saddles).
    """
    g1, g2 = params.gamma1, params.gamma2
    r2 = fp.u
    gamma = 4 * g2 * r2 - g1
    omega_sq = params.Delta**2 + (g2 * r2 - g1 / 2) * (3 * g2 * r2 - g1 / 2)
    omega = math.sqrt(omega_sq) if omega_sq >= 0 else float("nan")
    return gamma, omega


def phase_identity_defect(params: SystemParams, fp: FixedPoint) -> float:
    """Relative defect of ``Omega^2 - Gamma^2/4 = Delta^2 - gamma2^2 R^4``.

    Measured against the magnitude of the terms combined on each side.
    """
    g1, g2 = params.gamma1, params.gamma2
    r2 = fp.u
    gamma = 4 * g2 * r2 - g1
    omega_sq = params.Delta**2 + (g2 * r2 - g1 / 2) * (3 * g2 * r2 - g1 / 2)
    lhs = omega_sq - gamma * gamma / 4
    rhs = params.Delta**2 - (g2 * r2) ** 2
    scale = max(abs(omega_sq), gamma * gamma / 4, params.Delta**2, (g2 * r2) ** 2)
    return abs(lhs - rhs) / scale


# --------------------------------------------------------------------------
# covariance


@dataclass(frozen=True)
class CovarianceResult:
    sigma: np.ndarray
    eigenvalues: np.ndarray
    asymmetry: float
    below_shot_noise: bool
    principal_angle: float
    residual: float


def drift_diffusion(params: SystemParams, fp: FixedPoint) -> tuple[np.ndarray, np.ndarray]:
    """Matrices ``M`` and ``D`` of ``d sigma/dt = M sigma + sigma M^T + D``."""
    g1, g2 = params.gamma1, params.gamma2
    u = fp.u
    r = 1j * g2 * fp.beta**2 / 2
    base = g1 / 2 - 2 * g2 * u
    m = np.array(
        [
            [(1j * (r - r.conjugate())).real + base, (r + r.conjugate()).real - params.Delta],
            [(r + r.conjugate()).real + params.Delta, (-1j * (r - r.conjugate())).real + base],
        ]
    )
    d = (g1 / 2 + 2 * g2 * u) * np.eye(2)
    return m, d


def covariance_result(sigma: np.ndarray, residual: float = 0.0) -> CovarianceResult:
    sigma = 0.5 * (sigma + sigma.T)
    ev, vecs = np.linalg.eigh(sigma)
    major = vecs[:, 1]
    angle = math.atan2(major[1], major[0])
    if angle >= math.pi / 2:
        angle -= math.pi
    elif angle < -math.pi / 2:
        angle += math.pi
    return CovarianceResult(sigma, ev, float(ev[1] / ev[0]), bool(ev[0] < SHOT_NOISE),
                            angle, residual)


def lyapunov_covariance(params: SystemParams, fp: FixedPoint) -> CovarianceResult:
    """Steady covariance of the effective model from ``M s + s M^T + D = 0``."""
    gamma = 4 * params.gamma2 * fp.u - params.gamma1
    if gamma <= 0:
        raise InstabilityError(f"damping rate {gamma:.6g} <= 0: no steady covariance")
    m, d = drift_diffusion(params, fp)
    # unknowns (s11, s12, s22)
    a = np.array(
        [
            [2 * m[0, 0], 2 * m[0, 1], 0.0],
            [m[1, 0], m[0, 0] + m[1, 1], m[0, 1]],
            [0.0, 2 * m[1, 0], 2 * m[1, 1]],
        ]
    )
    rhs = -np.array([d[0, 0], d[0, 1], d[1, 1]])
    try:
        s11, s12, s22 = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise InstabilityError(f"singular covariance system: {exc}") from exc
    sigma = np.array([[s11, s12], [s12, s22]])
    resid = np.abs(m @ sigma + sigma @ m.T + d).max() / np.abs(d).max()
    return covariance_result(sigma, float(resid))


def integrate_covariance(params: SystemParams, fp: FixedPoint, t_max: float,
                         sigma0: np.ndarray | None = None) -> np.ndarray:
    """Integrate the covariance equation of motion from ``sigma0`` to ``t_max``."""
    from scipy.integrate import solve_ivp

    m, d = drift_diffusion(params, fp)
    s0 = np.diag([SHOT_NOISE, SHOT_NOISE]) if sigma0 is None else np.asarray(sigma0, float)

    def rhs(t, y):
        s = y.reshape(2, 2)
        return (m @ s + s @ m.T + d).ravel()

    sol = solve_ivp(rhs, (0.0, t_max), s0.ravel(), method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:, -1].reshape(2, 2)


# --------------------------------------------------------------------------
# spectrum


def effective_spectrum(params: SystemParams, fp: FixedPoint, omega_grid) -> SpectrumTrace:
    """Closed-form fluctuation spectrum ``S_eff(omega)`` of the effective model."""
    g1, g2 = params.gamma1, params.gamma2
    u = fp.u
    gamma = 4 * g2 * u - g1
    if gamma <= 0:
        raise InstabilityError(
            f"4 gamma2 |beta|^2 = {4 * g2 * u:.6g} <= gamma1: occupation n_bar undefined"
        )
    n_bar = g1 / gamma
    w = np.asarray(omega_grid, dtype=float)
    c2 = (g2 * u) ** 2
    om = np.sqrt(complex(params.Delta**2 - c2))
    num = gamma * c2 + n_bar * gamma * ((gamma / 2) ** 2 + c2 + (w + params.Delta) ** 2)
    den = ((w - om) ** 2 + (gamma / 2) ** 2) * ((w + om) ** 2 + (gamma / 2) ** 2)
    return SpectrumTrace(w, np.real(num / den), abs(fp.beta) ** 2)


def effective_liouvillian(params: SystemParams, fp: FixedPoint, n_max: int,
                          max_unknowns: int = lindblad.MAX_UNKNOWNS) -> lindblad.Liouvillian:
    """Linearized master equation in the fluctuation space about ``fp.beta``."""
    space = FockSpace(n_max, fp.beta)
    a = hilbert.fluctuation(space)
    ad = a.conj().T
    b2 = fp.beta**2
    h = -params.Delta * (ad @ a) - 0.5j * params.gamma2 * (b2 * (ad @ ad) - np.conj(b2) * (a @ a))
    jumps = [(params.gamma1, ad), (4 * params.gamma2 * fp.u, a)]
    return lindblad.liouvillian_from(space, h, jumps, params, max_unknowns)


# --------------------------------------------------------------------------
# regime classification


@dataclass(frozen=True)
class EffectiveSummary:
    regime: str
    beta_ss: complex | None
    R_ss: float | None
    phi_ss: float | None
    eigenvalues: tuple[complex, complex] | None
    A: float | None = None
    theta: float | None = None
    chi: float | None = None
    Omega_eff: float | None = None
    Gamma: float | None = None
    Gamma_up: float | None = None
    Gamma_down: float | None = None
    Gamma_deph: float | None = None
    n_eff: float | None = None
    n_bar: float | None = None
    quality: float | None = None
    sigma: np.ndarray | None = None
    cov_eigenvalues: np.ndarray | None = None
    asymmetry: float | None = None
    below_shot_noise: bool | None = None

    def to_dict(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, complex):
                out[key] = {"re": value.real, "im": value.imag}
            elif isinstance(value, np.ndarray):
                out[key] = value.tolist()
            elif isinstance(value, tuple):
                out[key] = [{"re": complex(v).real, "im": complex(v).imag} for v in value]
            elif isinstance(value, float) and not math.isfinite(value):
                out[key] = None
            else:
                out[key] = value
        return out


def classify_regime(params: SystemParams) -> tuple[str, EffectiveSummary]:
    """Label the synchronization regime and bundle all effective-model rates."""
    fp = stable_fixed_point(params)
    if fp is None:
        label = "no-stable-fixed-point"
        return label, EffectiveSummary(label, None, None, None, None)
    bog = bogoliubov(params, fp)
    cov = lyapunov_covariance(params, fp)
    if not bog.underdamped:
        label = "overdamped"
        quality = None
    else:
        quality = bog.Omega_eff / bog.Gamma_deph
        label = "quantum-coherent" if quality > 1 else "underdamped"

    def _num(x):
        return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

    return label, EffectiveSummary(
        regime=label, beta_ss=fp.beta, R_ss=fp.R, phi_ss=fp.phi, eigenvalues=fp.eigenvalues,
        A=bog.A, theta=bog.theta, chi=_num(bog.chi),
        Omega_eff=bog.Omega_eff if bog.underdamped else None,
        Gamma=bog.Gamma, Gamma_up=_num(bog.Gamma_up), Gamma_down=_num(bog.Gamma_down),
        Gamma_deph=_num(bog.Gamma_deph), n_eff=_num(bog.n_eff), n_bar=bog.n_bar,
        quality=quality, sigma=cov.sigma, cov_eigenvalues=cov.eigenvalues,
        asymmetry=cov.asymmetry, below_shot_noise=cov.below_shot_noise,
    )
