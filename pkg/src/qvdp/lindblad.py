"""Liouvillian of the driven quantum Van der Pol oscillator and its dynamics.

The master equation is

    drho/dt = -i[-Delta b^+ b + iF(b - b^+), rho]
              + gamma1 D[b^+] rho + gamma2 D[b^2] rho,

with ``D[O] rho = O rho O^+ - {O^+ O, rho}/2``.  Density matrices are
vectorized by column stacking, so ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from qvdp import hilbert
from qvdp.errors import DomainError, ResourceError, SolverError
from qvdp.hilbert import FockSpace

logger = logging.getLogger(__name__)

#: largest number of Liouville-space unknowns (N^2) accepted by default
MAX_UNKNOWNS = 90_000
#: up to this many unknowns the steady state uses a dense LU
DENSE_LIMIT = 1600

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8


@dataclass(frozen=True)
class SystemParams:
    """Rates of the master equation: gain, two-quantum loss, drive, detuning."""

    gamma1: float
    gamma2: float
    F: float
    Delta: float

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "F", "Delta"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.gamma1 <= 0:
            raise ValueError(f"gamma1 must be > 0, got {self.gamma1}")
        if self.gamma2 <= 0:
            raise ValueError(f"gamma2 must be > 0, got {self.gamma2}")
        if self.F < 0:
            raise ValueError(f"F must be >= 0, got {self.F}")

    def replace(self, **changes) -> "SystemParams":
        values = dict(gamma1=self.gamma1, gamma2=self.gamma2, F=self.F, Delta=self.Delta)
        values.update(changes)
        return SystemParams(**values)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = math.isqrt(v.size)
    return v.reshape((dim, dim), order="F")


@dataclass
class DensityMatrix:
    """Density matrix in a (possibly displaced) truncated Fock space."""

    space: FockSpace
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        if self.rho.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"rho has shape {self.rho.shape}, space needs {(self.space.dim,) * 2}"
            )

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.rho + self.rho.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def violations(
        self,
        hermitian_tol: float = HERMITIAN_TOL,
        trace_tol: float = TRACE_TOL,
        positivity_tol: float = POSITIVITY_TOL,
    ) -> list[str]:
        problems = []
        herm = self.hermiticity_defect()
        if herm > hermitian_tol:
            problems.append(f"hermiticity defect {herm:.3e} > {hermitian_tol:.1e}")
        tr = self.trace
        if abs(tr - 1) > trace_tol:
            problems.append(f"trace {tr:.12g} deviates from 1 by more than {trace_tol:.1e}")
        lam = self.min_eigenvalue()
        if lam < -positivity_tol:
            problems.append(f"minimum eigenvalue {lam:.3e} < -{positivity_tol:.1e}")
        return problems

    def is_valid(self, **tols) -> bool:
        return not self.violations(**tols)

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.rho @ op))

    def mean_amplitude(self) -> complex:
        """``<b>`` of the physical mode (frame center included)."""
        return self.expect(hilbert.annihilation(self.space))

    def occupation(self) -> float:
        """``<b^+ b>`` of the physical mode."""
        b = hilbert.annihilation(self.space)
        return float(np.real(self.expect(b.conj().T @ b)))


@dataclass
class Liouvillian:
    """Sparse superoperator acting on column-stacked density matrices."""

    space: FockSpace
    params: SystemParams | None
    matrix: sp.csr_matrix
    _norm1: float | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        """Induced 1-norm (maximum absolute column sum)."""
        if self._norm1 is None:
            self._norm1 = float(abs(self.matrix).sum(axis=0).max())
        return self._norm1

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Return ``L rho`` as a matrix."""
        return unvec(self.matrix @ vec(rho), self.space.dim)

    def trace_row(self) -> np.ndarray:
        return vec(np.eye(self.space.dim, dtype=complex))

    def trace_defect(self) -> float:
        """Relative size of ``vec(I)^T L``; zero for a trace-preserving map."""
        row = self.matrix.T @ self.trace_row()
        return float(np.max(np.abs(row)) / self.norm())


def _spre(op: np.ndarray) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(sp.identity(n, format="csr"), sp.csr_matrix(op), format="csr")


def _spost(op: np.ndarray) -> sp.csr_matrix:
    n = op.shape[0]
    return sp.kron(sp.csr_matrix(op.T), sp.identity(n, format="csr"), format="csr")


def dissipator(op: np.ndarray) -> sp.csr_matrix:
    """Superoperator of ``D[op]`` built from Kronecker identities."""
    op = np.asarray(op, dtype=complex)
    opd = op.conj().T
    ada = opd @ op
    jump = sp.kron(sp.csr_matrix(op.conj()), sp.csr_matrix(op), format="csr")
    return jump - 0.5 * _spre(ada) - 0.5 * _spost(ada)


def commutator_super(h: np.ndarray) -> sp.csr_matrix:
    """Superoperator of ``-i[h, .]``."""
    h = np.asarray(h, dtype=complex)
    return -1j * (_spre(h) - _spost(h))


def check_budget(space: FockSpace, max_unknowns: int = MAX_UNKNOWNS) -> None:
    unknowns = space.dim**2
    if unknowns > max_unknowns:
        raise ResourceError(
            f"Liouville space of {unknowns} unknowns (n_max={space.n_max}) exceeds "
            f"the budget of {max_unknowns}"
        )


def liouvillian_from(
    space: FockSpace,
    hamiltonian: np.ndarray,
    jumps: list[tuple[float, np.ndarray]],
    params: SystemParams | None = None,
    max_unknowns: int = MAX_UNKNOWNS,
) -> Liouvillian:
    """Generic Lindblad superoperator ``-i[H, .] + sum_k rate_k D[O_k]``."""
    check_budget(space, max_unknowns)
    mat = commutator_super(hamiltonian)
    for rate, op in jumps:
        if rate != 0:
            mat = mat + rate * dissipator(op)
    mat = sp.csr_matrix(mat)
    mat.eliminate_zeros()
    return Liouvillian(space=space, params=params, matrix=mat)


def vdp_hamiltonian(params: SystemParams, space: FockSpace) -> np.ndarray:
    b = hilbert.annihilation(space)
    bd = b.conj().T
    return -params.Delta * (bd @ b) + 1j * params.F * (b - bd)


def build_liouvillian(
    params: SystemParams, space: FockSpace, max_unknowns: int = MAX_UNKNOWNS
) -> Liouvillian:
    """Liouvillian of the driven Van der Pol master equation in ``space``.

    In a displaced frame all operators are built verbatim from the shifted
    matrix ``b = center * I + a``.
    """
    check_budget(space, max_unknowns)
    b = hilbert.annihilation(space)
    bd = b.conj().T
    h = vdp_hamiltonian(params, space)
    return liouvillian_from(
        space, h, [(params.gamma1, bd), (params.gamma2, b @ b)], params, max_unknowns
    )


def _reduced_system(L: Liouvillian):
    """Replace the first row of L by the trace constraint."""
    n = L.size
    keep = np.ones(n)
    keep[0] = 0.0
    a = sp.diags(keep) @ L.matrix
    trace_row = sp.csr_matrix(
        (np.ones(L.space.dim), (np.zeros(L.space.dim, dtype=int), np.arange(L.space.dim) * (L.space.dim + 1))),
        shape=(n, n),
    )
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0
    return sp.csr_matrix(a + trace_row), rhs


def _finalize(L: Liouvillian, v: np.ndarray) -> DensityMatrix:
    rho = unvec(v, L.space.dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return DensityMatrix(L.space, rho)


def steady_state_residual(L: Liouvillian, dm: DensityMatrix) -> float:
    """``||L vec(rho)||_2 / ||L||_1``."""
    return float(np.linalg.norm(L.matrix @ vec(dm.rho)) / L.norm())


def null_space_dimension(L: Liouvillian, tol: float = 1e-9, k: int = 4) -> tuple[int, np.ndarray]:
    """Count eigenvalues with ``|lambda| <= tol * ||L||``; also return the smallest few."""
    if L.size <= DENSE_LIMIT:
        ev = sla.eigvals(L.dense())
    else:
        ev = spla.eigs(L.matrix.tocsc(), k=min(k, L.size - 2), sigma=0, which="LM",
                       return_eigenvectors=False)
    ev = ev[np.argsort(np.abs(ev))]
    return int(np.sum(np.abs(ev) <= tol * L.norm())), ev[:k]


def steady_state(
    L: Liouvillian, method: str = "lu", tol: float = 1e-10, refine: int = 3
) -> DensityMatrix:
    """Unique steady state of ``L``.

    ``method="lu"`` solves the system with one row replaced by the trace
    constraint (dense LU for small spaces, sparse LU above); ``"eig"`` takes
    the eigenvector of the eigenvalue closest to zero and is kept as a
    cross-check.
    """
    if method == "eig":
        return _steady_state_eig(L, tol)
    if method != "lu":
        raise ValueError(f"unknown steady-state method {method!r}")

    a, rhs = _reduced_system(L)
    try:
        if L.size <= DENSE_LIMIT:
            ad = a.toarray()
            lu = sla.lu_factor(ad, check_finite=True)
            if np.min(np.abs(np.diag(lu[0]))) == 0:
                raise np.linalg.LinAlgError("exactly singular")
            solve = lambda r: sla.lu_solve(lu, r)  # noqa: E731
        else:
            factor = spla.splu(a.tocsc())
            solve = factor.solve
        v = solve(rhs)
        for _ in range(refine):
            res = rhs - a @ v
            if np.linalg.norm(res) <= 1e-3 * tol:
                break
            v = v + solve(res)
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        dim, ev = null_space_dimension(L)
        raise SolverError(
            f"steady-state solve failed ({exc}); null-space dimension {dim}, "
            f"smallest eigenvalues {ev}"
        ) from exc
    if not np.all(np.isfinite(v)):
        dim, ev = null_space_dimension(L)
        raise SolverError(f"steady-state solve produced non-finite values; null-space dimension {dim}")

    dm = _finalize(L, v)
    resid = steady_state_residual(L, dm)
    if resid > tol:
        dim, ev = null_space_dimension(L)
        if dim != 1:
            raise SolverError(f"degenerate steady state: null-space dimension {dim}")
        raise SolverError(f"steady-state residual {resid:.3e} exceeds {tol:.1e}")
    return dm


def _steady_state_eig(L: Liouvillian, tol: float) -> DensityMatrix:
    if L.size <= DENSE_LIMIT:
        ev, vecs = sla.eig(L.dense())
        order = np.argsort(np.abs(ev))
    else:
        ev, vecs = spla.eigs(L.matrix.tocsc(), k=3, sigma=0, which="LM")
        order = np.argsort(np.abs(ev))
    ev = ev[order]
    vecs = vecs[:, order]
    null_dim = int(np.sum(np.abs(ev) <= 1e-9 * L.norm()))
    if null_dim > 1:
        raise SolverError(f"degenerate steady state: null-space dimension {null_dim}")
    # an ill-conditioned gap leaves more eigenvector noise; ask for more accuracy
    if len(ev) > 1 and abs(ev[1]) < 1e-3 * (L.params.gamma1 if L.params else 1.0):
        tol = tol / 10
    v = vecs[:, 0]
    v = v / (L.trace_row() @ v)
    return _finalize(L, v)


class IntegrationError(SolverError):
    """Time integration failed or broke a density-matrix invariant."""


def evolve(
    L: Liouvillian,
    rho0: DensityMatrix,
    times,
    method: str = "DOP853",
    rtol: float = 1e-10,
    atol: float = 1e-12,
    check: bool = True,
) -> list[DensityMatrix]:
    """Density matrices at each of ``times`` starting from ``rho0`` at ``times[0]``.

    ``method`` is a :func:`scipy.integrate.solve_ivp` explicit scheme, or
    ``"expm"`` for Krylov exponentiation on a uniform grid.  The trace is
    never renormalized; its drift is checked instead.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and increasing")
    if rho0.space != L.space:
        raise ValueError("initial state lives in a different space than the Liouvillian")

    y0 = vec(rho0.rho).astype(complex)
    if times.size == 1 or times[-1] == times[0]:
        ys = np.tile(y0[:, None], (1, times.size))
    elif method == "expm":
        ys = _evolve_expm(L, y0, times)
    else:
        mat = L.matrix
        sol = solve_ivp(
            lambda t, y: mat @ y,
            (times[0], times[-1]),
            y0,
            method=method,
            t_eval=times,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise IntegrationError(f"integration failed: {sol.message}")
        ys = sol.y

    g1 = L.params.gamma1 if L.params else 1.0
    out = []
    for k, t in enumerate(times):
        dm = DensityMatrix(L.space, unvec(ys[:, k], L.space.dim).copy())
        if check:
            allowed = TRACE_TOL * max(1.0, g1 * (t - times[0]))
            problems = dm.violations(trace_tol=allowed)
            if problems:
                raise IntegrationError(f"at t={t:.6g}: " + "; ".join(problems))
        out.append(dm)
    return out


def _evolve_expm(L: Liouvillian, y0: np.ndarray, times: np.ndarray) -> np.ndarray:
    steps = np.diff(times)
    mat = L.matrix.tocsc()
    if np.allclose(steps, steps[0], rtol=1e-12, atol=0):
        ys = spla.expm_multiply(mat, y0, start=times[0], stop=times[-1],
                                num=times.size, endpoint=True)
        return np.asarray(ys).T
    cols = [y0]
    y = y0
    for dt in steps:
        y = spla.expm_multiply(mat * dt, y) if dt > 0 else y
        cols.append(y)
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class TruncationReport:
    top_population: float
    threshold: float
    flagged: bool


def truncation_check(L: Liouvillian | FockSpace, rho: DensityMatrix, threshold: float = 1e-6) -> TruncationReport:
    """Population of the two highest Fock levels of ``rho``."""
    diag = np.real(np.diag(rho.rho))
    top = float(max(0.0, diag[-1]) + max(0.0, diag[-2]))
    return TruncationReport(top, threshold, top > threshold)


def fock_state(space: FockSpace, n: int) -> DensityMatrix:
    rho = np.zeros((space.dim, space.dim), dtype=complex)
    rho[n, n] = 1.0
    return DensityMatrix(space, rho)


def vacuum(space: FockSpace) -> DensityMatrix:
    return fock_state(space, 0)


def _coherent_in(space: FockSpace, alpha: complex, tol: float) -> np.ndarray:
    ket = hilbert.coherent_ket(space.dim, complex(alpha) - space.shift)
    captured = float(np.vdot(ket, ket).real)
    if 1.0 - captured > tol:
        raise DomainError(
            f"coherent amplitude {alpha} not representable with n_max={space.n_max} "
            f"(captured norm {captured:.6f})"
        )
    return ket


def coherent_state(space: FockSpace, alpha: complex, tol: float = 1e-6) -> DensityMatrix:
    """Pure coherent state with physical amplitude ``alpha``."""
    ket = _coherent_in(space, alpha, tol)
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(space, np.outer(ket, ket.conj()))


def cat_state(space: FockSpace, center: complex, offset: complex, tol: float = 1e-6) -> DensityMatrix:
    """Even superposition of coherent states at ``center +- offset``."""
    plus = _coherent_in(space, center + offset, tol)
    minus = _coherent_in(space, center - offset, tol)
    ket = plus + minus
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(space, np.outer(ket, ket.conj()))


def to_lab(dm: DensityMatrix, n_max: int | None = None, pad: int = 40) -> DensityMatrix:
    """Re-express a displaced-frame state in the lab-frame Fock basis.

    ``n_max`` sets the lab truncation; by default it is chosen to hold the
    displaced state with a generous margin.
    """
    space = dm.space
    if n_max is None:
        occ = dm.occupation()
        n_max = int(math.ceil(occ + 8 * math.sqrt(occ + 1) + space.n_max + 10))
    lab = FockSpace(n_max)
    if not space.displaced:
        rho = np.zeros((lab.dim, lab.dim), dtype=complex)
        m = min(lab.dim, space.dim)
        rho[:m, :m] = dm.rho[:m, :m]
        return DensityMatrix(lab, rho)
    big = max(lab.dim, space.dim)
    embedded = np.zeros((big, big), dtype=complex)
    embedded[: space.dim, : space.dim] = dm.rho
    d = hilbert.displacement(big, space.center, pad=pad)
    rho = d @ embedded @ d.conj().T
    return DensityMatrix(lab, rho[: lab.dim, : lab.dim])
