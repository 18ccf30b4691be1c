"""Localization diagnostics of steady states and trajectories."""

import numpy as np

from .solvers import hermitize, matrix_sqrt_psd

PURE_TOL = 1e-8


def eigenbasis_matrix(rho, spectrum):
    """``rho_mn = <psi_m| rho |psi_n>`` in the spectrum's eigenvector order."""
    rho = np.asarray(rho)
    s = spectrum.states
    if rho.shape != (s.shape[0], s.shape[0]):
        raise ValueError(f"density matrix shape {rho.shape} does not match spectrum dimension {s.shape[0]}")
    return s.T @ rho @ s


def spatial_diagonal(rho):
    return np.real(np.diagonal(np.asarray(rho))).copy()


def in_phase_ratio(state, l, jumps, amp_tol=1e-10):
    """Fraction of the jump set's site pairs on which ``state`` has equal signs.

    Pairs where either amplitude is below ``amp_tol`` count as not in phase;
    the denominator is always ``jumps.pair_count``.
    """
    state = np.asarray(state)
    if np.iscomplexobj(state):
        if np.abs(state.imag).max(initial=0.0) > amp_tol:
            raise ValueError("in_phase_ratio needs a real-gauged eigenvector")
        state = state.real
    pairs = jumps.pairs
    if not pairs:
        raise ValueError("jump set has no two-site channels")
    if any(b - a != l for a, b in pairs):
        raise ValueError(f"jump set pairs are not all of range {l}")
    first = state[[a - 1 for a, _ in pairs]]
    second = state[[b - 1 for _, b in pairs]]
    ok = (np.abs(first) > amp_tol) & (np.abs(second) > amp_tol) & (np.sign(first) == np.sign(second))
    return int(ok.sum()) / jumps.pair_count


def phase_profile(spectrum, l, jumps, amp_tol=1e-10):
    """``P_in`` for every eigenstate, in spectrum order."""
    return np.array([in_phase_ratio(c, l, jumps, amp_tol) for c in spectrum.states.T])


def localized_fraction(rho_eig, localized_count):
    rho_eig = np.asarray(rho_eig)
    if localized_count > rho_eig.shape[0]:
        raise ValueError("localized_count exceeds the dimension")
    return float(np.real(np.trace(rho_eig[:localized_count, :localized_count])))


def _pure_vector(rho):
    w, v = np.linalg.eigh(hermitize(rho))
    if w[-1] > 1.0 - PURE_TOL:
        return v[:, -1]
    return None


def fidelity(rho_t, rho0):
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho_t) rho0 sqrt(rho_t))``, clipped to [0, 1].

    A pure ``rho0`` uses ``sqrt(<psi|rho_t|psi>)``.  Otherwise the inner
    product is diagonalized with the same clipping as ``matrix_sqrt_psd``.
    """
    rho_t = np.asarray(rho_t, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho_t.shape != rho0.shape:
        raise ValueError("states must have the same shape")
    psi = _pure_vector(rho0)
    if psi is not None:
        overlap = np.real(np.vdot(psi, rho_t @ psi))
        return float(np.clip(np.sqrt(max(overlap, 0.0)), 0.0, 1.0))
    return fidelity_general(rho_t, rho0)


def fidelity_general(rho_t, rho0):
    root = matrix_sqrt_psd(rho_t)
    value = np.trace(matrix_sqrt_psd(root @ rho0 @ root)).real
    return float(np.clip(value, 0.0, 1.0))
