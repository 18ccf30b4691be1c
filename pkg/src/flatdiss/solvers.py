"""Steady states, spectral gap and time evolution of a Liouvillian."""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .errors import (
    DegenerateSteadyState,
    IntegrationError,
    InvariantViolation,
    NoZeroEigenvalue,
    SingularSystem,
    SolverError,
    SpectralGapError,
)
from .superop import Superoperator, assemble_liouvillian, unvec, vec

DENSE_CAP = 40
INVARIANT_ABORT = 1e-6


@dataclass(frozen=True, eq=False)
class SteadyStateReport:
    state: np.ndarray
    residual: float
    zero_multiplicity: int
    gap: float | None = None
    method: str = ""


@dataclass(eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray | None
    observables: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# density-matrix helpers


def hermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def normalize_state(rho):
    """Hermitize and rescale to unit trace."""
    rho = np.asarray(rho, dtype=complex)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise SolverError("state has zero trace")
    rho = hermitize(rho / tr)
    return rho / np.trace(rho).real


def check_density_matrix(rho, herm_tol=1e-10, trace_tol=1e-10, eig_tol=1e-8):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.abs(rho - rho.conj().T).max()
    if herm > herm_tol:
        raise ValueError(f"density matrix not Hermitian (error {herm:.3g})")
    tr = abs(np.trace(rho) - 1.0)
    if tr > trace_tol:
        raise ValueError(f"density matrix trace differs from 1 by {tr:.3g}")
    lo = np.linalg.eigvalsh(hermitize(rho)).min()
    if lo < -eig_tol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
    return rho


def matrix_sqrt_psd(rho, neg_tol=1e-6):
    """Square root of a Hermitian positive-semidefinite matrix.

    Negative eigenvalues down to ``-neg_tol`` are clipped to zero, as are
    positive ones below roundoff (``n * eps * lambda_max``), which would
    otherwise contribute ``sqrt(eps)``-sized noise.
    """
    rho = np.asarray(rho)
    w, v = np.linalg.eigh(hermitize(rho))
    if w.size and w.min() < -neg_tol:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    floor = w.size * np.finfo(float).eps * max(w.max(initial=0.0), 0.0)
    w = np.where(w > floor, w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _as_superop(superop):
    if not isinstance(superop, Superoperator):
        raise TypeError("expected a Superoperator")
    return superop


def residual(superop, rho):
    return float(np.linalg.norm(superop.sparse @ vec(rho)))


# --------------------------------------------------------------------------
# real representation on Hermitian matrices


def hermitian_basis(n):
    """Sparse unitary ``U`` with ``vec(rho) = U @ x`` for real coordinates ``x``.

    Columns: ``E_ii``, then ``(E_ij + E_ji)/sqrt 2`` and ``i (E_ij - E_ji)/sqrt 2``
    for ``i < j``.  A Liouvillian preserves Hermiticity, so ``U^dag L U`` is real.
    """
    iu, ju = np.triu_indices(n, 1)
    m = iu.size
    s = 1.0 / math.sqrt(2.0)
    diag = np.arange(n)
    rows = np.concatenate([diag * n + diag, ju * n + iu, iu * n + ju, ju * n + iu, iu * n + ju])
    cols = np.concatenate([diag, n + np.arange(m), n + np.arange(m), n + m + np.arange(m), n + m + np.arange(m)])
    vals = np.concatenate([np.ones(n), np.full(m, s), np.full(m, s), np.full(m, 1j * s), np.full(m, -1j * s)])
    return sp.csr_matrix((vals.astype(complex), (rows, cols)), shape=(n * n, n * n))


class HermitianCoordinates:
    """Real coordinates of Hermitian matrices in the ``hermitian_basis`` frame.

    Propagating these coordinates keeps states exactly Hermitian, so explicit
    integrators cannot amplify anti-Hermitian roundoff.
    """

    def __init__(self, n):
        self.n = n
        self.iu, self.ju = np.triu_indices(n, 1)
        self._scale = math.sqrt(2.0)

    def from_matrix(self, rho):
        n, m = self.n, self.iu.size
        x = np.empty(n * n)
        upper = rho[self.iu, self.ju]
        x[:n] = np.real(np.diagonal(rho))
        x[n : n + m] = self._scale * upper.real
        x[n + m :] = self._scale * upper.imag
        return x

    def to_matrix(self, x):
        n, m = self.n, self.iu.size
        rho = np.zeros((n, n), dtype=complex)
        upper = (x[n : n + m] + 1j * x[n + m :]) / self._scale
        rho[self.iu, self.ju] = upper
        rho[self.ju, self.iu] = upper.conj()
        rho[np.arange(n), np.arange(n)] = x[:n]
        return rho

    def real_operator(self, superop):
        """Sparse real matrix of the Liouvillian in these coordinates."""
        u = hermitian_basis(self.n)
        r = (u.conj().T @ superop.sparse @ u).tocsr()
        out = sp.csr_matrix((r.data.real, r.indices, r.indptr), shape=r.shape)
        out.eliminate_zeros()
        return out


def real_liouvillian(superop):
    """Dense real matrix unitarily similar to the Liouvillian."""
    u = hermitian_basis(superop.n)
    r = (u.conj().T @ superop.sparse @ u).toarray()
    imag = np.abs(r.imag).max(initial=0.0)
    if imag > 1e-10 * max(1.0, superop.max_abs):
        raise ValueError(f"Liouvillian does not preserve Hermiticity (imaginary part {imag:.3g})")
    return np.ascontiguousarray(r.real), u


def _dense_guard(superop, dense_cap):
    if superop.n > dense_cap:
        raise ValueError(f"dense solver limited to n <= {dense_cap}, got n = {superop.n}")


def _null_tol(superop, null_tol):
    if null_tol is not None:
        return null_tol
    return 1e-10 * max(1.0, superop.max_abs)


def _liouvillian_eigvals(superop):
    r, u = real_liouvillian(superop)
    return sla.eigvals(r, check_finite=False), r, u


def _gap_from_eigvals(w, tol):
    rest = w[np.abs(w) >= tol]
    zero = int(np.sum(np.abs(w) < tol))
    if zero > 1 or rest.size == 0:
        return 0.0, zero
    return float(-rest.real.max()), zero


def steady_state_dense(superop, dense_cap=DENSE_CAP, null_tol=None):
    """Steady state from the full spectrum of the Liouvillian.

    The spectrum is computed from the real representation on Hermitian
    matrices.  The zero mode is then extracted by inverse iteration on the
    same dense matrix.

    Raises:
        DegenerateSteadyState: more than one eigenvalue within ``null_tol`` of 0.
        NoZeroEigenvalue: no eigenvalue within ``null_tol`` of 0.
    """
    superop = _as_superop(superop)
    _dense_guard(superop, dense_cap)
    tol = _null_tol(superop, null_tol)
    w, r, u = _liouvillian_eigvals(superop)
    zero = int(np.sum(np.abs(w) < tol))
    if zero == 0:
        raise NoZeroEigenvalue(f"smallest |eigenvalue| is {np.abs(w).min():.3g} > {tol:.3g}")
    if zero > 1:
        raise DegenerateSteadyState(zero)
    gap, _ = _gap_from_eigvals(w, tol)

    lam = w[np.argmin(np.abs(w))].real
    shift = lam - 1e-3 * min(1.0, gap) if gap > 0 else lam - 1e-8
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(r - shift * np.eye(r.shape[0]), check_finite=False)
    x = np.zeros(r.shape[0])
    x[: superop.n] = 1.0  # identity direction; has overlap with every state of unit trace
    for _ in range(6):
        x = sla.lu_solve(lu, x, check_finite=False)
        x /= np.linalg.norm(x)
    rho = normalize_state(unvec(u @ x))
    return SteadyStateReport(
        state=rho,
        residual=residual(superop, rho),
        zero_multiplicity=zero,
        gap=gap,
        method="dense",
    )


def _constraint_row(mat, n):
    """Diagonal-population row with the largest diagonal-dominance deficit.

    Only rows ``c * n + c`` carry weight in the left null vector ``vec(I)``, so
    replacing any other row would leave the system singular.
    """
    diag_rows = np.arange(n) * (n + 1)
    absm = abs(mat[diag_rows, :])
    offsum = np.asarray(absm.sum(axis=1)).ravel()
    d = np.abs(mat.diagonal()[diag_rows])
    deficit = offsum - 2 * d
    return int(diag_rows[np.argmax(deficit)])


def steady_state_linear(superop):
    """Steady state from ``L x = 0`` with one row replaced by ``tr rho = 1``.

    Raises:
        SingularSystem: the constrained system is rank deficient, which
            happens exactly when the steady state is not unique.
    """
    superop = _as_superop(superop)
    n = superop.n
    mat = superop.sparse.tocsr(copy=True)
    row = _constraint_row(mat, n)
    trace_row = sp.csr_matrix((np.ones(n, dtype=complex), (np.zeros(n, dtype=int), np.arange(n) * (n + 1))), shape=(1, n * n))
    mat = sp.vstack([mat[:row], trace_row, mat[row + 1 :]], format="csc")
    b = np.zeros(n * n, dtype=complex)
    b[row] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            lu = spla.splu(mat)
            x = lu.solve(b)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        raise SingularSystem(f"trace-constrained system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("trace-constrained solve produced non-finite entries")
    u_diag = lu.U.diagonal()
    if np.abs(u_diag).min() < 1e-13 * np.abs(u_diag).max():
        raise SingularSystem(f"trace-constrained system is numerically singular (pivot ratio {np.abs(u_diag).min() / np.abs(u_diag).max():.3g})")
    rho = normalize_state(unvec(x))
    return SteadyStateReport(
        state=rho,
        residual=residual(superop, rho),
        zero_multiplicity=1,
        gap=None,
        method="linear",
    )


def steady_state(superop, method="linear", **kwargs):
    if method == "linear":
        return steady_state_linear(superop)
    if method == "dense":
        return steady_state_dense(superop, **kwargs)
    raise ValueError(f"unknown steady-state method {method!r}")


def spectral_gap(superop, method="auto", dense_cap=DENSE_CAP, null_tol=None, k=8, sigma=0.01):
    """``-max Re(lambda)`` over the non-zero Liouvillian eigenvalues.

    Returns 0 when the zero eigenvalue is degenerate.  The iterative branch
    uses shift-invert Arnoldi around a small positive ``sigma``, so it sees the
    eigenvalues closest to the origin.
    """
    superop = _as_superop(superop)
    tol = _null_tol(superop, null_tol)
    if method == "auto":
        method = "dense" if superop.n <= dense_cap else "iterative"
    if method == "dense":
        _dense_guard(superop, dense_cap)
        w, _, _ = _liouvillian_eigvals(superop)
        return _gap_from_eigvals(w, tol)[0]
    if method != "iterative":
        raise ValueError(f"unknown gap method {method!r}")
    k = min(k, superop.dim - 2)
    try:
        w = spla.eigs(superop.sparse.tocsc(), k=k, sigma=sigma, return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:
        raise SpectralGapError(f"ARPACK did not converge: {len(exc.eigenvalues)} of {k} eigenvalues found") from exc
    return _gap_from_eigvals(w, tol)[0]


# --------------------------------------------------------------------------
# time evolution


def krylov_expmv(matvec, v, t, anorm, m=30, tol=1e-12, max_reject=10):
    """``exp(t A) v`` by restarted Arnoldi with local error control.

    Step-size selection and the a posteriori error estimate follow the
    classic expv scheme (augmented Hessenberg matrix, two-term estimate).
    ``tol`` bounds the local error per unit time relative to ``|w|``.
    """
    v = np.asarray(v, dtype=complex)
    beta = np.linalg.norm(v)
    if beta == 0.0 or t == 0.0:
        return v.copy()
    n = v.shape[0]
    m = min(m, n)
    btol = 64.0 * np.finfo(float).eps * max(anorm, 1e-300)
    gamma, delta = 0.9, 1.2
    anorm = max(anorm, 1e-300)
    fact = ((m + 1) / math.e) ** (m + 1) * math.sqrt(2 * math.pi * (m + 1))
    t_new = (1.0 / anorm) * ((fact * tol) / (4.0 * anorm)) ** (1.0 / m)

    def _round(x):
        s = 10.0 ** (math.floor(math.log10(x)) - 1)
        return math.ceil(x / s) * s

    t_new = _round(t_new)
    t_now = 0.0
    w = v.copy()
    while t - t_now > 1e-15 * t:
        t_step = min(t - t_now, t_new)
        basis = np.zeros((m + 1, n), dtype=complex)
        hess = np.zeros((m + 2, m + 2), dtype=complex)
        basis[0] = w / beta
        k1, mb = 2, m
        for j in range(m):
            p = matvec(basis[j])
            for i in range(j + 1):
                hess[i, j] = np.vdot(basis[i], p)
                p = p - hess[i, j] * basis[i]
            s = np.linalg.norm(p)
            if s < btol:
                k1, mb = 0, j + 1
                t_step = t - t_now
                break
            hess[j + 1, j] = s
            basis[j + 1] = p / s
        if k1:
            hess[m + 1, m] = 1.0
            avnorm = np.linalg.norm(matvec(basis[m]))
        xm = 1.0 / m
        for reject in range(max_reject + 1):
            mx = mb + k1
            f = sla.expm(t_step * hess[:mx, :mx])
            if k1 == 0:
                err_loc = btol * beta
                break
            phi1 = abs(beta * f[m, 0])
            phi2 = abs(beta * f[m + 1, 0] * avnorm)
            if phi1 > 10 * phi2:
                err_loc, xm = phi2, 1.0 / m
            elif phi1 > phi2:
                err_loc, xm = phi1 * phi2 / (phi1 - phi2), 1.0 / m
            else:
                err_loc, xm = phi1, 1.0 / (m - 1)
            if err_loc <= delta * t_step * tol * beta:
                break
            if reject == max_reject:
                raise IntegrationError("Krylov step rejected too often; tolerance unreachable", last_time=t_now)
            t_step = _round(gamma * t_step * (t_step * tol * beta / err_loc) ** xm)
        mx = mb + max(0, k1 - 1)
        w = (beta * f[:mx, 0]) @ basis[:mx]
        rel_err = max(err_loc / beta, 1e-300)
        beta = np.linalg.norm(w)
        t_now += t_step
        if beta == 0.0:
            break
        t_new = _round(min(5.0 * t_step, gamma * t_step * (t_step * tol / rel_err) ** xm))
        if t_new < 1e-14 * t and t - t_now > 1e-15 * t:
            raise IntegrationError("Krylov step size underflow", last_time=t_now)
    return w


def _invariants(rho):
    herm = float(np.abs(rho - rho.conj().T).max())
    rho_h = hermitize(rho)
    return (
        float(abs(np.trace(rho) - 1.0)),
        float(np.linalg.eigvalsh(rho_h).min()),
        herm,
    )


def evolve(
    h,
    jumps,
    rho0,
    times,
    method="adaptive_rk",
    rtol=1e-9,
    atol=1e-12,
    krylov_tol=1e-12,
    krylov_dim=30,
    dense_cap=DENSE_CAP,
    retain_states=True,
    observables=None,
    superop=None,
):
    """Propagate ``rho0`` (given at t = 0) and sample it on ``times``.

    ``observables`` maps names to ``f(rho) -> float``; ``trace_err``,
    ``min_eig`` and ``herm_err`` are always recorded.  States are never
    renormalized; a drift beyond 1e-6 raises ``InvariantViolation``.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-d grid")
    if times[0] < 0:
        raise ValueError("times must be >= 0")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    rho0 = check_density_matrix(np.asarray(rho0, dtype=complex), herm_tol=1e-10, trace_tol=1e-10, eig_tol=1e-8)
    if superop is None:
        superop = assemble_liouvillian(h, jumps)
    n = superop.n
    if rho0.shape != (n, n):
        raise ValueError(f"rho0 shape {rho0.shape} does not match dimension {n}")
    observables = dict(observables or {})
    record = {name: np.empty(times.size) for name in ("trace_err", "min_eig", "herm_err")}
    for name in observables:
        record[name] = np.empty(times.size)
    states = np.empty((times.size, n, n), dtype=complex) if retain_states else None

    def _store(i, rho):
        tr, lo, herm = _invariants(rho)
        if tr > INVARIANT_ABORT or herm > INVARIANT_ABORT or lo < -INVARIANT_ABORT:
            raise InvariantViolation(
                f"invariant violated at t={times[i]:.6g}: trace_err={tr:.3g} min_eig={lo:.3g} herm_err={herm:.3g}",
                last_time=float(times[i - 1]) if i else None,
            )
        record["trace_err"][i] = tr
        record["min_eig"][i] = lo
        record["herm_err"][i] = herm
        for name, fn in observables.items():
            record[name][i] = fn(rho)
        if states is not None:
            states[i] = rho

    if superop.sparse.nnz == 0:
        for i in range(times.size):
            _store(i, rho0.copy())
        return TrajectoryRecord(times=times.copy(), states=states, observables=record)

    coords = HermitianCoordinates(n)
    x0 = coords.from_matrix(rho0)
    if method == "adaptive_rk":
        def rhs(_t, y):
            return coords.from_matrix(superop.apply(coords.to_matrix(y)))

        if times[-1] == 0.0:
            ys = np.tile(x0[:, None], (1, times.size))
        else:
            sol = solve_ivp(rhs, (0.0, float(times[-1])), x0, method="DOP853", t_eval=times, rtol=rtol, atol=atol)
            if sol.status != 0:
                last = float(sol.t[-1]) if sol.t.size else None
                raise IntegrationError(f"integrator failed: {sol.message}", last_time=last)
            ys = sol.y
            if times[0] == 0.0:
                ys[:, 0] = x0
        for i in range(times.size):
            _store(i, coords.to_matrix(ys[:, i]))
    elif method == "krylov_expm":
        mat = coords.real_operator(superop)
        anorm = float(abs(mat).sum(axis=1).max()) if mat.nnz else 0.0
        x, t_prev = x0, 0.0
        for i, t in enumerate(times):
            if anorm > 0.0 and t > t_prev:
                x = krylov_expmv(mat.dot, x, t - t_prev, anorm, m=krylov_dim, tol=krylov_tol).real
            t_prev = t
            _store(i, coords.to_matrix(x))
    elif method == "dense_expm":
        if n > dense_cap:
            raise ValueError(f"dense_expm limited to n <= {dense_cap}, got n = {n}")
        dense = coords.real_operator(superop).toarray()
        cache = {}
        x, t_prev = x0, 0.0
        for i, t in enumerate(times):
            dt = float(t - t_prev)
            if dt > 0:
                key = round(dt, 12)
                if key not in cache:
                    cache[key] = sla.expm(dt * dense)
                x = cache[key] @ x
            t_prev = t
            _store(i, coords.to_matrix(x))
    else:
        raise ValueError(f"unknown evolution method {method!r}")
    return TrajectoryRecord(times=times.copy(), states=states, observables=record)


def trace_distance(a, b):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(hermitize(a - b))).sum())
