"""Single-particle Tasaki chain: Hamiltonian, dispersion and eigenstates.

Sites are labelled ``1 .. 2L+1`` in the physics sense; odd labels are B sites
and even labels are A sites.  Array indices are zero based, so site label
``j`` lives at index ``j - 1``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EigensolverError


@dataclass(frozen=True)
class LatticeSpec:
    """Parameters of an open Tasaki chain with ``L`` unit cells.

    Attributes:
        L: number of unit cells; the chain has ``2L + 1`` sites.
        u: A-B hopping amplitude.
        v: B-B hopping amplitude.
    """

    L: int
    u: float = math.sqrt(2.0)
    v: float = 1.0

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L:
            raise ValueError(f"L must be an integer, got {self.L!r}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValueError("hopping amplitudes must be finite")
        object.__setattr__(self, "L", int(self.L))

    @property
    def n_sites(self):
        return 2 * self.L + 1

    @property
    def is_flat(self):
        """True when ``|u|/|v| = sqrt(2)``, i.e. the lower band is dispersionless."""
        if self.v == 0:
            return False
        return math.isclose(abs(self.u) / abs(self.v), math.sqrt(2.0), rel_tol=1e-12)


def dispersion(k, u, v):
    """Bulk bands ``(E_minus, E_plus)`` at momentum ``k``; broadcasts over arrays."""
    k = np.asarray(k, dtype=float)
    c = np.cos(k)
    av = abs(v)
    root = np.sqrt(av**2 * c**2 + 2.0 * abs(u) ** 2 * (1.0 + c))
    e_minus = av * c - root
    e_plus = av * c + root
    if e_minus.ndim == 0:
        return float(e_minus), float(e_plus)
    return e_minus, e_plus


def build_tasaki(spec):
    """Dense real symmetric Hamiltonian of the open chain.

    Every adjacent pair carries ``u``; pairs ``(j, j+2)`` with odd site label
    ``j`` (B-B bonds) carry ``v``.
    """
    if not isinstance(spec, LatticeSpec):
        spec = LatticeSpec(*spec)
    n = spec.n_sites
    h = np.zeros((n, n))
    idx = np.arange(n - 1)
    h[idx, idx + 1] = spec.u
    bb = np.arange(0, n - 2, 2)
    h[bb, bb + 2] = spec.v
    return h + h.T


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigenpairs with a reproducible gauge.

    ``states[:, n]`` is the eigenvector for ``energies[n]``.  Degenerate
    subspaces are rotated into a canonical basis (see ``eigendecompose``), so
    every number derived from a single eigenvector is reproducible.
    """

    energies: np.ndarray
    states: np.ndarray
    localized_count: int
    degenerate_blocks: tuple = field(default=())

    @property
    def n_states(self):
        return self.energies.shape[0]

    @property
    def localized_indices(self):
        """Zero-based indices of the localized prefix."""
        return np.arange(self.localized_count)


def _peak_site(col, tol=1e-12):
    mag = np.abs(col)
    return int(np.flatnonzero(mag >= mag.max() - tol)[0])


def _canonical_block(vectors, tol=1e-6):
    """Basis of span(vectors) that depends only on the subspace.

    Sequential Gram-Schmidt over the projected site vectors ``P e_1, P e_2, ...``.
    """
    n, m = vectors.shape
    proj = vectors @ vectors.T
    basis = []
    for j in range(n):
        w = proj[:, j].copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        nrm = np.linalg.norm(w)
        if nrm > tol:
            basis.append(w / nrm)
            if len(basis) == m:
                break
    if len(basis) < m:
        # numerically thin subspace; complete with the solver's own vectors
        for col in vectors.T:
            w = col.copy()
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            nrm = np.linalg.norm(w)
            if nrm > 1e-8:
                basis.append(w / nrm)
            if len(basis) == m:
                break
    return np.column_stack(basis)


def eigendecompose(h, degeneracy_tol=1e-10):
    """Diagonalize a real symmetric Hamiltonian with a deterministic gauge.

    Energies are ascending.  Inside each degenerate cluster (spread below
    ``degeneracy_tol * max(1, |E|_max)``) the eigenvectors are replaced by a
    canonical basis and ordered by the index of their largest-amplitude site.
    Each column is signed so that its largest-magnitude entry is positive;
    magnitudes within 1e-12 of the maximum count as ties, won by the lowest site.

    Raises:
        ValueError: if ``h`` is not square and symmetric.
        EigensolverError: if LAPACK fails to converge.
    """
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {h.shape}")
    if np.iscomplexobj(h):
        if np.abs(h.imag).max(initial=0.0) > 1e-14:
            raise ValueError("Hamiltonian must be real")
        h = h.real
    h = np.asarray(h, dtype=float)
    if np.abs(h - h.T).max(initial=0.0) > 1e-14:
        raise ValueError("Hamiltonian must be symmetric")
    try:
        energies, states = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh (LAPACK syevd) failed to converge for n={h.shape[0]}: {exc}") from exc

    n = energies.shape[0]
    scale = max(1.0, float(np.abs(energies).max(initial=0.0)))
    tol = degeneracy_tol * scale
    energies = energies.copy()
    states = states.copy()
    blocks = []
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            block = _canonical_block(states[:, start:stop])
            peaks = [_peak_site(c) for c in block.T]
            order = sorted(range(stop - start), key=lambda q: (peaks[q], q))
            states[:, start:stop] = block[:, order]
            energies[start:stop] = energies[start:stop].mean()
            blocks.append((start, stop))
        start = stop

    for q in range(n):
        col = states[:, q]
        if col[_peak_site(col)] < 0:
            states[:, q] = -col
    energies.setflags(write=False)
    states.setflags(write=False)
    return Spectrum(
        energies=energies,
        states=states,
        localized_count=(n + 1) // 2,
        degenerate_blocks=tuple(blocks),
    )


def ipr(state):
    """Inverse participation ratio ``sum |psi_j|^4`` of a normalized vector."""
    state = np.asarray(state)
    nrm = np.linalg.norm(state)
    if abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"state must be normalized, got norm {nrm!r}")
    return float(np.sum(np.abs(state) ** 4))


@dataclass(frozen=True, eq=False)
class StateClassification:
    localized_count: int
    localized_indices: np.ndarray
    flat_band_indices: np.ndarray
    ipr: np.ndarray
    flat_band_is_prefix: bool
    rules_agree: bool


def classify_states(spectrum, v, energy_tol=1e-8):
    """Split the spectrum into the localized prefix and the extended rest.

    The localized set is the first ``L + 1`` states.  As a diagnostic, states
    with ``|E + 2|v|| < energy_tol`` are flagged as flat-band states and the IPR
    of every state is reported; disagreement between the two rules is reported
    but never changes ``localized_count``.
    """
    energies = spectrum.energies
    if np.any(np.diff(energies) < 0):
        raise ValueError("spectrum must be sorted ascending")
    count = spectrum.localized_count
    flat = np.flatnonzero(np.abs(energies + 2.0 * abs(v)) < energy_tol)
    is_prefix = bool(np.array_equal(flat, np.arange(flat.size)))
    if flat.size and not is_prefix:
        warnings.warn("flat-band states do not form a prefix of the energy ordering", stacklevel=2)
    iprs = np.array([ipr(c) for c in spectrum.states.T])
    return StateClassification(
        localized_count=count,
        localized_indices=np.arange(count),
        flat_band_indices=flat,
        ipr=iprs,
        flat_band_is_prefix=is_prefix,
        rules_agree=bool(flat.size == count and is_prefix),
    )
