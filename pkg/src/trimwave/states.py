"""Explicit extended states that vanish on single-layer trim sets.

A state is a product of sines in the confined directions and torus plane
waves in the free directions,

    Psi(x, y) = prod_nu sin(pi l_nu x_nu / p_nu) * prod_nu exp(2 pi i m_nu y_nu / N_nu),

with ``N_nu = k_nu p_nu``.  It solves ``H_0 Psi = (e_L + eta) Psi`` on the
box and vanishes wherever a confined coordinate is a multiple of its
period, so any potential living there leaves it untouched.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidModeError, ParityError, SupportViolationError
from .geometry import PERIODIC, LatticeBox, TrimMask, is_single_layer
from .hamiltonian import SymOperator
from .spectral import compute_eL


def _sin_pi_ratio(num: np.ndarray, den: int) -> np.ndarray:
    """``sin(pi * num / den)`` for integer ``num``, exact zero at multiples of ``den``."""
    r = np.mod(num, 2 * den)
    out = np.sin(np.pi * r / den)
    return np.where(r % den == 0, 0.0, out)


def phi_L(x: Sequence[int] | np.ndarray, p: Sequence[int], L: Sequence[int]) -> np.ndarray | float:
    """``prod_nu sin(pi l_nu x_nu / p_nu)`` over the confined coordinates.

    ``x`` may be a single coordinate vector or an ``(n, d1)`` array.
    """
    x = np.asarray(x, dtype=np.int64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    out = np.ones(x.shape[0])
    for nu, (l, pv) in enumerate(zip(L, p)):
        out = out * _sin_pi_ratio(l * x[:, nu], pv)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class ModeIndex:
    L: tuple[int, ...]
    m: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class ExtendedState:
    box: LatticeBox
    values: np.ndarray
    mode: ModeIndex
    energy: float
    verified: bool = True

    def csv(self) -> str:
        lines = ["site_index,re,im"]
        lines += [f"{i},{float(v.real)!r},{float(v.imag)!r}" for i, v in enumerate(self.values)]
        return "\n".join(lines) + "\n"


def _check_mode(box: LatticeBox, mode: ModeIndex):
    spec = box.spec
    if len(mode.L) != spec.d1 or len(mode.m) != spec.d2:
        raise InvalidModeError(f"mode needs {spec.d1} + {spec.d2} components")
    for l, p in zip(mode.L, spec.periods[: spec.d1]):
        if not 1 <= l <= p - 1:
            raise InvalidModeError(f"mode component {l} outside 1..{p - 1}")
    for m, n in zip(mode.m, box.shape[spec.d1:]):
        if not 0 <= m < n:
            raise InvalidModeError(f"momentum index {m} outside 0..{n - 1}")


def mode_energy(box: LatticeBox, mode: ModeIndex) -> float:
    spec = box.spec
    eta = sum(2.0 * np.cos(2.0 * np.pi * m / n) for m, n in zip(mode.m, box.shape[spec.d1:]))
    return compute_eL(spec.periods, spec.d1, mode.L) + float(eta)


def check_extended_preconditions(box: LatticeBox, mask: TrimMask | None = None,
                                 allow_odd: bool = False) -> bool:
    """Raise unless exact extended states exist on ``box``.

    Returns ``False`` when ``allow_odd`` waived the parity condition (the
    results are then unverified), ``True`` otherwise.
    """
    spec = box.spec
    if spec is None:
        raise ConfigurationError("extended states need a box built from a geometry spec")
    if any(tag != PERIODIC for tag in box.bc[spec.d1:]):
        raise ConfigurationError("free directions must be periodic")
    if mask is not None and not is_single_layer(mask, spec.d1, spec.periods):
        raise SupportViolationError("trim set is not a single-layer set")
    confined_periodic = any(tag == PERIODIC for tag in box.bc[: spec.d1])
    if confined_periodic and (spec.m2 - spec.m1) % 2:
        if not allow_odd:
            raise ParityError(f"m2 - m1 = {spec.m2 - spec.m1} is odd with periodic confined bc")
        return False
    return True


def build_extended_state(box: LatticeBox, mode: ModeIndex, mask: TrimMask | None = None,
                         allow_odd: bool = False) -> ExtendedState:
    verified = check_extended_preconditions(box, mask, allow_odd)
    _check_mode(box, mode)
    spec = box.spec
    coords = box.coords
    values = phi_L(coords[:, : spec.d1], spec.periods, mode.L).astype(complex)
    for nu, (m, n) in enumerate(zip(mode.m, box.shape[spec.d1:])):
        y = coords[:, spec.d1 + nu]
        # exact integer reduction of the phase
        values = values * np.exp(2j * np.pi * np.mod(m * y, n) / n)
    return ExtendedState(box, values, mode, mode_energy(box, mode), verified)


def all_modes(box: LatticeBox) -> list[ModeIndex]:
    spec = box.spec
    Ls = itertools.product(*(range(1, p) for p in spec.periods[: spec.d1]))
    ms = list(itertools.product(*(range(n) for n in box.shape[spec.d1:])))
    return [ModeIndex(tuple(L), tuple(m)) for L in Ls for m in ms]


def residual(h: SymOperator, state: ExtendedState, e: float | None = None) -> float:
    """``||H Psi - E Psi||_inf`` with ``E`` defaulting to the state's energy."""
    if h.n != len(state.values):
        raise ConfigurationError("operator and state dimensions differ")
    e = state.energy if e is None else e
    return float(np.max(np.abs(h.matrix @ state.values - e * state.values)))


@dataclass(frozen=True)
class InvarianceReport:
    L: tuple[int, ...]
    states: int
    max_off_residual: float
    tol: float

    @property
    def invariant(self) -> bool:
        return self.max_off_residual <= self.tol


def invariant_subspace_check(h: SymOperator, box: LatticeBox, L: Sequence[int],
                             mask: TrimMask | None = None, tol: float = 1e-10,
                             allow_odd: bool = False) -> InvarianceReport:
    """Check that ``H`` maps ``span{Psi_{L,m}}`` (all momenta ``m``) into itself."""
    spec = box.spec
    L = tuple(L)
    ms = itertools.product(*(range(n) for n in box.shape[spec.d1:]))
    basis = np.stack([build_extended_state(box, ModeIndex(L, tuple(m)), mask, allow_odd).values
                      for m in ms], axis=1)
    image = h.matrix @ basis
    # the basis is orthogonal with equal norms
    norms = np.sum(np.abs(basis) ** 2, axis=0)
    coeffs = (basis.conj().T @ image) / norms[:, None]
    off = image - basis @ coeffs
    return InvarianceReport(L, basis.shape[1], float(np.max(np.abs(off))), tol)
