"""Eigensolves, explicit spectral sets and spectrum endpoints."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigvals_banded
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .disorder import DistributionSpec, constant_potential, is_admissible
from .errors import (AdmissibilityError, DegeneracyError, InvalidModeError, InvalidTrimError,
                     NotSeparableError, SizeCapError, UnsupportedClosedFormError)
from .geometry import LatticeBox, TrimMask, build_trim_mask
from .hamiltonian import PotentialField, SymOperator, assemble_h, factor_boxes, restrict_simple
from .sets import SpectrumSet

DEFAULT_DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    values: np.ndarray
    vectors: np.ndarray | None = None
    residual: float | None = None

    @property
    def n(self) -> int:
        return len(self.values)


def eigen_sym(h: SymOperator, want_vectors: bool = False,
              dense_cap: int = DEFAULT_DENSE_CAP) -> EigenDecomposition:
    """Full spectrum of ``h`` by a dense symmetric eigensolve.

    With vectors, ``residual`` is ``max_n ||H psi_n - E_n psi_n||_2``,
    which is checked against ``1e-10 * ||H||``.
    """
    if h.n > dense_cap:
        raise SizeCapError(f"dimension {h.n} exceeds the dense cap {dense_cap}")
    a = h.dense()
    if not want_vectors:
        return EigenDecomposition(np.linalg.eigvalsh(a))
    w, v = np.linalg.eigh(a)
    res = float(np.max(np.linalg.norm(a @ v - v * w, axis=0))) if h.n else 0.0
    bound = 1e-10 * max(h.norm_bound(), 1.0)
    if res > bound:
        raise ArithmeticError(f"eigen residual {res:.3e} exceeds {bound:.3e}")
    return EigenDecomposition(w, v, res)


def _count_tol(values: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(values)))) if len(values) else 1.0
    return 64 * np.finfo(float).eps * scale


def count_below(decomp: EigenDecomposition, e: float, tol: float | None = None) -> int:
    """``#{n : E_n <= e}``.

    Eigenvalues within ``tol`` above ``e`` (default a few ulps of the
    spectral scale) count as equal, so a computed ``1e-16`` for an exact
    zero still counts at ``e = 0``.
    """
    tol = _count_tol(decomp.values) if tol is None else tol
    return int(np.searchsorted(decomp.values, e + tol, side="right"))


def _banded_lower(h: SymOperator) -> np.ndarray:
    perm = reverse_cuthill_mckee(h.matrix.tocsr(), symmetric_mode=True)
    coo = h.matrix.tocsr()[perm][:, perm].tocoo()
    lower = coo.row >= coo.col
    offs = coo.row[lower] - coo.col[lower]
    bw = int(offs.max()) if len(offs) else 0
    ab = np.zeros((bw + 1, h.n))
    ab[offs, coo.col[lower]] = coo.data[lower]
    return ab


def window_eigenvalues(h: SymOperator, lo: float, hi: float) -> np.ndarray:
    """Eigenvalues in the half-open window ``(lo, hi]``.

    The operator is reordered by reverse Cuthill-McKee and handed to the
    LAPACK banded solver, which only resolves eigenvalues inside the window.
    """
    if h.n == 0:
        return np.zeros(0)
    ab = _banded_lower(h)
    return np.sort(eigvals_banded(ab, lower=True, select="v", select_range=(lo, hi)))


def _two_cos(l, p):
    # written as a sine so that 2l = p gives an exact zero and l, p - l give exact negatives
    return 2.0 * np.sin(np.pi * (p - 2 * l) / (2 * p))


def compute_eL(p: Sequence[int] | int, d1: int, L: Sequence[int] | int) -> float:
    p = (p,) * d1 if np.isscalar(p) else tuple(p)
    L = (L,) if np.isscalar(L) else tuple(L)
    if len(L) != d1 or len(p) < d1:
        raise InvalidModeError(f"mode needs {d1} components and periods at least {d1}")
    for l, pv in zip(L, p):
        if not 1 <= l <= pv - 1:
            raise InvalidModeError(f"mode component {l} outside 1..{pv - 1}")
    return float(sum(_two_cos(l, pv) for l, pv in zip(L, p)))


def mode_set(p: Sequence[int] | int, d1: int) -> list[tuple[int, ...]]:
    p = (p,) * d1 if np.isscalar(p) else tuple(p)
    return [tuple(L) for L in itertools.product(*(range(1, pv) for pv in p[:d1]))]


def energy_region(p: Sequence[int] | int, d1: int, d2: int) -> SpectrumSet:
    """Union over modes ``L`` of ``[e_L - 2 d2, e_L + 2 d2]``."""
    c = 2.0 * d2
    return SpectrumSet(tuple((e - c, e + c) for e in (compute_eL(p, d1, L) for L in mode_set(p, d1))))


def sigma0_single_layer(p: int, d2: int, d1: int = 1) -> SpectrumSet:
    """Closed form of the Gamma-complement spectrum for ``Gamma = pZ x Z^d2``.

    The complement is a stack of free segments of ``p - 1`` sites, whose
    eigenvalues are ``2 cos(k pi / p)``, times the free directions.
    """
    if d1 != 1:
        raise UnsupportedClosedFormError("closed form only for d1 = 1; use sigma0_numeric")
    if p < 2:
        raise InvalidModeError(f"period must be >= 2, got {p}")
    segment = SpectrumSet.from_points(_two_cos(k, p) for k in range(1, p))
    return segment.minkowski_sum(2.0 * d2)


def sigma0_numeric(mask: TrimMask) -> SpectrumSet:
    """Eigenvalues of the free Laplacian on the inactive sites of a periodic box.

    An inner approximation of the infinite-volume set.
    """
    if mask.active.all():
        raise InvalidTrimError("the trim complement is empty")
    h = restrict_simple(mask.box, mask.inactive)
    return SpectrumSet.from_points(eigen_sym(h).values)


def sigma0_strip(mask: TrimMask, d1: int | None = None) -> SpectrumSet:
    """Exact complement spectrum for a product trim ``G x Z^d2``.

    The confined factor is the finite cross section with the box's bc,
    restricted to the complement of ``G``; the free directions contribute
    ``[-2 d2, 2 d2]``.
    """
    box = mask.box
    d1 = box.spec.d1 if d1 is None else d1
    grid = mask.active.reshape((int(np.prod(box.shape[:d1])), -1), order="F")
    if not np.all(grid == grid[:, :1]):
        raise NotSeparableError("trim mask is not of product form")
    section = grid[:, 0]
    if section.all():
        raise InvalidTrimError("the trim complement is empty")
    first, _ = factor_boxes(box, d1)
    pts = eigen_sym(restrict_simple(first, ~section)).values
    return SpectrumSet.from_points(pts).minkowski_sum(2.0 * (box.d - d1))


def sigma0_reference(mask: TrimMask, d1: int | None = None) -> SpectrumSet:
    """Exact strip set for product trims, numeric inner approximation otherwise."""
    try:
        return sigma0_strip(mask, d1)
    except NotSeparableError:
        return sigma0_numeric(mask)


def minkowski_sum(s: SpectrumSet, c: float) -> SpectrumSet:
    return s.minkowski_sum(c)


def distance_to(s: SpectrumSet, e: float) -> float:
    return s.distance_to(e)


def spectrum_endpoints(mask: TrimMask, a: float) -> tuple[float, float]:
    """``(min, max)`` eigenvalue of ``H_0 + a chi_Gamma`` on the mask's box."""
    h = assemble_h(mask.box, constant_potential(mask, a))
    w = eigen_sym(h).values
    return float(w[0]), float(w[-1])


def cell_operator(periods: Sequence[int], gamma0, a: float) -> SymOperator:
    """``h_a`` on the unit cell with periodic bc (weight-2 links when a period is 2)."""
    cell = LatticeBox.from_shape(periods, "periodic")
    mask = build_trim_mask(cell, gamma0, periods)
    return assemble_h(cell, constant_potential(mask, a))


def cell_ground_state(periods: Sequence[int], gamma0, a: float,
                      min_gap: float = 1e-8) -> tuple[float, np.ndarray, float]:
    """Ground energy, ground state and spectral gap of ``h_a``."""
    dec = eigen_sym(cell_operator(periods, gamma0, a), want_vectors=True)
    gap = float(dec.values[1] - dec.values[0]) if dec.n > 1 else np.inf
    if gap < min_gap:
        raise DegeneracyError(f"ground state is degenerate (gap {gap:.3e})", gap=gap)
    return float(dec.values[0]), dec.vectors[:, 0], gap


def hellmann_feynman(periods: Sequence[int], gamma0, a: float, min_gap: float = 1e-8) -> float:
    """``dE_a/da`` as the ground-state weight on the active cell sites."""
    cell = LatticeBox.from_shape(periods, "periodic")
    mask = build_trim_mask(cell, gamma0, periods)
    _, psi, _ = cell_ground_state(periods, gamma0, a, min_gap)
    return float(np.sum(np.abs(psi[mask.active]) ** 2))


@dataclass(frozen=True)
class ContainmentReport:
    e_min_a: float
    e_max_b: float
    w_min: float
    w_max: float
    lower_margin: float
    upper_margin: float
    tol: float

    @property
    def contained(self) -> bool:
        return self.lower_margin >= -self.tol and self.upper_margin >= -self.tol


def admissible_containment(mask: TrimMask, dist: DistributionSpec, w: PotentialField,
                           tol: float = 1e-8, endpoints: tuple[float, float] | None = None
                           ) -> ContainmentReport:
    """Check ``sigma(H_0 + W)`` against ``[E_min(a), E_max(b)]``.

    ``endpoints`` may be passed to reuse ``(E_min(a), E_max(b))`` across
    many potentials.
    """
    if not is_admissible(w, dist, mask):
        raise AdmissibilityError("potential is not admissible for this distribution and trim")
    if endpoints is None:
        e_min = spectrum_endpoints(mask, dist.a)[0]
        e_max = spectrum_endpoints(mask, dist.b)[1]
    else:
        e_min, e_max = endpoints
    vals = eigen_sym(assemble_h(mask.box, w)).values
    return ContainmentReport(e_min, e_max, float(vals[0]), float(vals[-1]),
                             float(vals[0] - e_min), float(e_max - vals[-1]), tol)
