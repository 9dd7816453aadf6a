"""Green's function columns, decay fits and zeta sweeps.

All solves factor ``H - z`` once per spectral parameter with a sparse
complex LU and reuse it for every source site.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import FitRangeError, ParameterError, SingularityError
from .geometry import LatticeBox, torus_distances
from .hamiltonian import SymOperator


class ZetaFloorWarning(UserWarning):
    """The zeta grid goes below the finite-volume resolution."""


@dataclass(frozen=True, eq=False)
class GreenColumn:
    source: int
    z: complex
    values: np.ndarray
    residual: float

    @property
    def energy(self) -> float:
        return self.z.real

    @property
    def zeta(self) -> float:
        return self.z.imag


@dataclass(frozen=True)
class DecayFit:
    mass: float
    log_c: float
    r2: float
    r_min: int
    r_max: int
    points: int


@dataclass(frozen=True, eq=False)
class ZetaSweep:
    energy: float
    source: int
    zetas: np.ndarray
    l1: np.ndarray
    alpha: float
    alpha_running: np.ndarray = field(repr=False)

    @property
    def zeta_l1(self) -> np.ndarray:
        return self.zetas * self.l1

    @property
    def min_zeta_l1(self) -> float:
        return float(np.min(self.zeta_l1))

    @property
    def l1_ratio(self) -> float:
        return float(np.max(self.l1) / np.min(self.l1))

    def csv_rows(self) -> list[tuple]:
        return [(self.energy, float(z), float(s), float(z * s), float(a))
                for z, s, a in zip(self.zetas, self.l1, self.alpha_running)]


class Resolvent:
    """Factorization of ``H - z`` for repeated column solves."""

    def __init__(self, h: SymOperator, z: complex):
        if not z.imag > 0:
            raise ParameterError(f"imaginary part must be > 0, got {z.imag}")
        self.h = h
        self.z = complex(z)
        self._a = (h.matrix.astype(complex) - self.z * sp.identity(h.n, format="csr")).tocsc()
        self._lu = splu(self._a)
        self._scale = max(h.norm_bound(), 1.0) + abs(self.z)

    def solve(self, rhs: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, float]:
        rhs = np.asarray(rhs, dtype=complex)
        u = self._lu.solve(rhs)
        r = rhs - self._a @ u
        res = float(np.linalg.norm(r))
        if res > tol * self._scale * max(np.linalg.norm(rhs), 1.0):
            # one step of iterative refinement
            u = u + self._lu.solve(r)
            res = float(np.linalg.norm(rhs - self._a @ u))
            if res > tol * self._scale * max(np.linalg.norm(rhs), 1.0):
                raise SingularityError(f"resolvent solve residual {res:.3e} too large", residual=res)
        return u, res

    def column(self, x: int) -> GreenColumn:
        if not 0 <= x < self.h.n:
            raise IndexError(f"source {x} outside 0..{self.h.n - 1}")
        delta = np.zeros(self.h.n, dtype=complex)
        delta[x] = 1.0
        u, res = self.solve(delta)
        return GreenColumn(x, self.z, u, res)


def green_column(h: SymOperator, e: float, zeta: float, x: int) -> GreenColumn:
    """Solve ``(H - (E + i zeta)) u = delta_x``."""
    if not zeta > 0:
        raise ParameterError(f"zeta must be > 0, got {zeta}")
    return Resolvent(h, complex(e, zeta)).column(x)


def row_l1(col: GreenColumn) -> float:
    return float(np.sum(np.abs(col.values)))


def decay_fit(col: GreenColumn, box: LatticeBox, min_dist: int = 2, boundary_margin: int = 2,
              rel_floor: float = 1e-12, min_points: int = 5) -> DecayFit:
    """Fit ``log max_{|y - x| = r} |G(x, y)|`` linearly in ``r``.

    Distances are torus minimum-image distances.  Spheres within
    ``boundary_margin`` of the largest distance are dropped, and so are
    spheres whose maximum is below ``rel_floor * max|G|``, where the solve
    carries no information.
    """
    dist = torus_distances(box, col.source)
    mag = np.abs(col.values)
    r_top = int(dist.max())
    radii = np.arange(min_dist, r_top - boundary_margin + 1)
    if len(radii) == 0:
        raise FitRangeError("box too small for the requested distance range")
    sphere_max = np.array([mag[dist == r].max() for r in radii])
    keep = sphere_max > rel_floor * mag.max()
    radii, sphere_max = radii[keep], sphere_max[keep]
    if len(radii) < min_points:
        raise FitRangeError(f"only {len(radii)} usable distances, need {min_points}")
    y = np.log(sphere_max)
    slope, intercept = np.polyfit(radii, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * radii + intercept)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(float(-slope), float(intercept), float(min(max(r2, 0.0), 1.0)),
                    int(radii[0]), int(radii[-1]), len(radii))


def zeta_grid(zeta_max: float = 1e-1, zeta_min: float = 1e-4, points: int = 9) -> np.ndarray:
    if not zeta_max > zeta_min > 0:
        raise ParameterError("need zeta_max > zeta_min > 0")
    if points < 2:
        raise ParameterError("need at least two grid points")
    return np.geomspace(zeta_max, zeta_min, points)


def zeta_sweep(h: SymOperator, e: float, x: int, zeta_max: float = 1e-1, zeta_min: float = 1e-4,
               points: int = 9, spectrum: np.ndarray | None = None,
               keep_columns: bool = False):
    """``S(zeta) = sum_y |G_{E + i zeta}(x, y)|`` on a decreasing geometric grid.

    ``alpha`` is minus the log-log slope of ``S`` against ``zeta``.  If the
    spectrum is given and ``zeta_min`` is below one percent of the mean level
    spacing a :class:`ZetaFloorWarning` is emitted.  With ``keep_columns``
    the Green columns are returned alongside the sweep.
    """
    zetas = zeta_grid(zeta_max, zeta_min, points)
    if spectrum is not None and len(spectrum) > 1:
        spacing = (np.max(spectrum) - np.min(spectrum)) / (len(spectrum) - 1)
        if zeta_min < 1e-2 * spacing:
            warnings.warn(f"zeta_min={zeta_min:g} is below 1e-2 x mean level spacing "
                          f"({spacing:.3g})", ZetaFloorWarning, stacklevel=2)
    cols = [green_column(h, e, z, x) for z in zetas]
    l1 = np.array([row_l1(c) for c in cols])
    logz, logs = np.log(zetas), np.log(l1)
    alpha = float(-np.polyfit(logz, logs, 1)[0])
    running = np.full(len(zetas), np.nan)
    running[1:] = -np.diff(logs) / np.diff(logz)
    sweep = ZetaSweep(float(e), int(x), zetas, l1, alpha, running)
    return (sweep, cols) if keep_columns else sweep


def sweep_csv(sweeps) -> str:
    lines = ["E,zeta,S,zeta_S,alpha_running"]
    for sw in sweeps:
        for row in sw.csv_rows():
            lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"
