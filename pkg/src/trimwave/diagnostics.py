"""Statistical checks of the localization inequalities and the mobility-edge scan."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .disorder import DistributionSpec, EnsembleSpec, sample_potential
from .errors import EmptySetError, FitRangeError, PreconditionError
from .geometry import GeometrySpec, TrimMask, build_box, build_trim_mask
from .green import decay_fit, zeta_sweep
from .hamiltonian import SymOperator, assemble_h0, block_split
from .sets import SpectrumSet
from .states import phi_L
from .spectral import eigen_sym, energy_region, sigma0_reference, spectrum_endpoints, window_eigenvalues

# classifier calibration constants
LOCALIZED_MASS = 0.1
LOCALIZED_R2 = 0.9
EXTENDED_ALPHA = 0.8

LOCALIZED = "localized-like"
EXTENDED = "extended-like"
NEAR_EDGE = "near-edge"


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> list:
    """Ordered map; results never depend on ``threads``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _with_potential(h0: SymOperator, values: np.ndarray) -> SymOperator:
    return SymOperator((h0.matrix + sp.diags(values)).tocsr(), None, h0.box)


# --------------------------------------------------------------------------- Wegner


@dataclass(frozen=True)
class WegnerRow:
    box: str
    volume: int
    eps: float
    mean_count: float
    per_cell: float
    c_hat: float


@dataclass(frozen=True)
class WegnerReport:
    energy: float
    gamma: float
    rho_max: float
    realizations: int
    eps: tuple[float, ...]
    rows: tuple[WegnerRow, ...]
    c_fit: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    pooled_slope: float = float("nan")

    def c_spread(self, boxes: Sequence[str] | None = None) -> float:
        """Relative difference ``|C1 - C2| / min(C1, C2)`` of the two largest boxes."""
        boxes = list(self.c_fit) if boxes is None else list(boxes)
        vols = {row.box: row.volume for row in self.rows}
        top = sorted(boxes, key=lambda b: vols[b])[-2:]
        c = [self.c_fit[b] for b in top]
        return abs(c[0] - c[1]) / min(c)

    def csv(self) -> str:
        lines = ["E,eps,box,mean_count,C_hat"]
        for row in self.rows:
            lines.append(f"{self.energy!r},{row.eps!r},{row.box},{row.mean_count!r},{row.c_hat!r}")
        return "\n".join(lines) + "\n"


def _loglog_slope(eps, means) -> float:
    means = np.asarray(means, dtype=float)
    if len(means) < 2 or np.any(means <= 0):
        return float("nan")
    return float(np.polyfit(np.log(eps), np.log(means), 1)[0])


def wegner_experiment(specs: Sequence[GeometrySpec], gamma0, dist: DistributionSpec, energy: float,
                      eps: Sequence[float], realizations: int, seed: int,
                      gamma_floor: float = 0.5, sigma0: SpectrumSet | None = None,
                      threads: int = 1) -> WegnerReport:
    """Monte Carlo means of eigenvalue counts in ``(E - eps, E + eps]``.

    Counts come from the banded window eigensolver, so only eigenvalues
    near ``E`` are resolved.  ``C_hat`` is defined through
    ``mean = C_hat * rho_max * eps * |box| / gamma``.
    """
    eps = tuple(sorted(float(e) for e in eps))
    boxes = [build_box(s) for s in specs]
    masks = [build_trim_mask(b, gamma0) for b in boxes]
    if sigma0 is None:
        sigma0 = sigma0_reference(masks[0])
    gamma = sigma0.distance_to(energy)
    if gamma < gamma_floor:
        raise PreconditionError(f"dist(E, Sigma0) = {gamma:.4g} is below the floor {gamma_floor}")
    if eps[-1] > gamma / 2:
        raise PreconditionError(f"eps = {eps[-1]} exceeds gamma / 2 = {gamma / 2:.4g}")
    rows, c_fit, slopes = [], {}, {}
    totals = np.zeros(len(eps))
    total_volume = 0
    cell = int(np.prod(specs[0].periods))
    for spec, box, mask in zip(specs, boxes, masks):
        h0 = assemble_h0(box)
        ens = EnsembleSpec(seed, realizations, dist, mask)
        label = "x".join(str(n) for n in box.shape)

        def counts(r, h0=h0, ens=ens):
            h = _with_potential(h0, sample_potential(ens, r).values)
            w = window_eigenvalues(h, energy - eps[-1], energy + eps[-1])
            return [int(np.sum((w > energy - e) & (w <= energy + e))) for e in eps]

        table = np.array(parallel_map(counts, range(realizations), threads), dtype=float)
        means = table.mean(axis=0)
        x = np.array([dist.rho_max * e * box.site_count / gamma for e in eps])
        for e, m, xv in zip(eps, means, x):
            rows.append(WegnerRow(label, box.site_count, e, float(m),
                                  float(m) * cell / box.site_count, float(m / xv)))
        c_fit[label] = float(np.dot(means, x) / np.dot(x, x))
        slopes[label] = _loglog_slope(eps, means)
        totals += table.sum(axis=0)
        total_volume += box.site_count
    pooled = _loglog_slope(eps, totals / total_volume)
    return WegnerReport(float(energy), float(gamma), dist.rho_max, realizations, eps,
                        tuple(rows), c_fit, slopes, pooled)


def window_count(h: SymOperator, energy: float, eps: float) -> int:
    return int(len(window_eigenvalues(h, energy - eps, energy + eps)))


# --------------------------------------------------------------------------- unique continuation


def ucp_constant(d: int, gamma: np.ndarray | float):
    """``sqrt(1 + (2d / gamma)^2)``, from ``||psi_1|| <= (2d / gamma) ||psi_2||``."""
    return np.sqrt(1.0 + (2.0 * d / np.asarray(gamma)) ** 2)


@dataclass(frozen=True)
class UcpRow:
    n: int
    energy: float
    gamma: float
    lhs: float
    rhs: float
    passed: bool


@dataclass(frozen=True)
class UcpReport:
    rows: tuple[UcpRow, ...]
    gamma_floor: float
    d: int
    notice: str = ""

    @property
    def qualifying(self) -> int:
        return len(self.rows)

    @property
    def pass_rate(self) -> float:
        return 1.0 if not self.rows else sum(r.passed for r in self.rows) / len(self.rows)

    def csv(self) -> str:
        lines = ["n,E,gamma,lhs,rhs,pass"]
        for r in self.rows:
            lines.append(f"{r.n},{r.energy!r},{r.gamma!r},{r.lhs!r},{r.rhs!r},{int(r.passed)}")
        return "\n".join(lines) + "\n"


def ucp_check(h: SymOperator, mask: TrimMask, sigma0: SpectrumSet, gamma_floor: float = 0.5,
              slack: float = 1e-12) -> UcpReport:
    """Check ``||psi_n|| <= sqrt(1 + (2d/gamma_n)^2) ||psi_n||_Gamma`` eigenpair by eigenpair.

    Only eigenpairs with ``gamma_n = dist(E_n, Sigma0) >= gamma_floor`` take
    part; ``slack`` absorbs floating-point rounding.
    """
    if any(tag != "periodic" for tag in mask.box.bc):
        raise PreconditionError("the unique-continuation bound needs periodic bc")
    d = mask.box.d
    dec = eigen_sym(h, want_vectors=True)
    gam = sigma0.distances(dec.values)
    rows = []
    for n in np.flatnonzero(gam >= gamma_floor):
        psi = dec.vectors[:, n]
        lhs = float(np.linalg.norm(psi))
        on_gamma = float(np.linalg.norm(psi[mask.active]))
        rhs = float(ucp_constant(d, gam[n]) * on_gamma)
        rows.append(UcpRow(int(n), float(dec.values[n]), float(gam[n]), lhs, rhs,
                           lhs <= rhs * (1 + slack) + slack))
    notice = "" if rows else f"no eigenpair with gamma >= {gamma_floor}"
    return UcpReport(tuple(rows), gamma_floor, d, notice)


def link_norm(h: SymOperator, mask: TrimMask) -> float:
    return block_split(h, mask).t_norm()


# --------------------------------------------------------------------------- spectral edges


@dataclass(frozen=True)
class GapReport:
    e_min: float
    e_max: float
    sigma0_inf: float
    sigma0_sup: float
    eta_low: float
    eta_high: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.eta_low > self.threshold and self.eta_high > self.threshold


def _edge_gap(sigma0: SpectrumSet, start: float, direction: int) -> float:
    """Largest ``eta`` with ``[start, start + eta]`` (or its mirror) disjoint from ``sigma0``."""
    comps = sigma0.components()
    if direction > 0:
        ahead = [lo for lo, hi in comps if hi >= start]
        if any(lo <= start <= hi for lo, hi in comps):
            return 0.0
        return min(ahead) - start if ahead else np.inf
    behind = [hi for lo, hi in comps if lo <= start]
    if any(lo <= start <= hi for lo, hi in comps):
        return 0.0
    return start - max(behind) if behind else np.inf


def nonempty_gap_check(mask: TrimMask, dist: DistributionSpec, sigma0: SpectrumSet | None = None,
                       threshold: float = 0.0) -> GapReport:
    """Distance from the ends of ``[E_min(a), E_max(b)]`` into ``Sigma0``."""
    if sigma0 is None:
        sigma0 = sigma0_reference(mask)
    if sigma0.is_empty:
        raise EmptySetError("Sigma0 is empty")
    e_min = spectrum_endpoints(mask, dist.a)[0]
    e_max = spectrum_endpoints(mask, dist.b)[1]
    return GapReport(e_min, e_max, sigma0.inf, sigma0.sup,
                     float(_edge_gap(sigma0, e_min, +1)), float(_edge_gap(sigma0, e_max, -1)),
                     threshold)


# --------------------------------------------------------------------------- mobility scan


def classify(mass: float, r2: float, alpha: float) -> str:
    if mass > LOCALIZED_MASS and r2 >= LOCALIZED_R2:
        return LOCALIZED
    if alpha >= EXTENDED_ALPHA:
        return EXTENDED
    return NEAR_EDGE


@dataclass(frozen=True)
class MobilityScanRow:
    energy: float
    gamma: float
    in_region: bool
    mass: float
    r2: float
    alpha: float
    tag: str
    thresholds: tuple[float, float, float] = (LOCALIZED_MASS, LOCALIZED_R2, EXTENDED_ALPHA)


def mobility_csv(rows: Sequence[MobilityScanRow]) -> str:
    lines = ["E,gamma,in_E,m,R2,alpha,class"]
    for r in rows:
        lines.append(f"{r.energy!r},{r.gamma!r},{int(r.in_region)},{r.mass!r},{r.r2!r},"
                     f"{r.alpha!r},{r.tag}")
    return "\n".join(lines) + "\n"


def default_source(mask: TrimMask) -> int:
    """Inactive site maximizing ``|Phi_L|`` for ``L = (1, ..., 1)`` in the first cell."""
    box = mask.box
    spec = box.spec
    coords = box.coords
    cell = np.all((coords >= np.asarray(spec.origin)) &
                  (coords < np.asarray(spec.origin) + np.asarray(spec.periods)), axis=1)
    cand = np.flatnonzero(cell & mask.inactive)
    weights = np.abs(phi_L(coords[cand, : spec.d1], spec.periods, (1,) * spec.d1))
    return int(cand[np.argmax(weights)])


def mobility_scan(mask: TrimMask, dist: DistributionSpec, energies: Sequence[float], realizations: int,
                  seed: int, source: int | None = None, zeta_max: float = 1e-1,
                  zeta_min: float = 1e-4, points: int = 9, sigma0: SpectrumSet | None = None,
                  threads: int = 1) -> list[MobilityScanRow]:
    """Per energy: median decay mass, R^2 and zeta exponent over realizations.

    The decay fit uses the column at the smallest ``zeta``.
    """
    box = mask.box
    spec = box.spec
    if sigma0 is None:
        sigma0 = sigma0_reference(mask)
    region = energy_region(spec.periods, spec.d1, spec.d2)
    x = default_source(mask) if source is None else source
    h0 = assemble_h0(box)
    ens = EnsembleSpec(seed, realizations, dist, mask)
    potentials = [sample_potential(ens, r).values for r in range(realizations)]
    tasks = [(i, r) for i in range(len(energies)) for r in range(realizations)]

    def run(task):
        i, r = task
        h = _with_potential(h0, potentials[r])
        sweep, cols = zeta_sweep(h, energies[i], x, zeta_max, zeta_min, points, keep_columns=True)
        try:
            fit = decay_fit(cols[-1], box)
            return fit.mass, fit.r2, sweep.alpha
        except FitRangeError:
            return 0.0, 0.0, sweep.alpha

    results = parallel_map(run, tasks, threads)
    rows = []
    for i, e in enumerate(energies):
        chunk = np.array(results[i * realizations:(i + 1) * realizations])
        m, r2, alpha = (float(v) for v in np.median(chunk, axis=0))
        rows.append(MobilityScanRow(float(e), float(sigma0.distance_to(e)),
                                    region.contains(e), m, r2, alpha, classify(m, r2, alpha)))
    return rows


def scan_energies(mask: TrimMask, dist: DistributionSpec, count: int = 41,
                  margin: float = 1.0) -> np.ndarray:
    """Grid over ``[E_min(a) - margin, E_max(b) + margin]`` plus the centre of the energy region."""
    spec = mask.box.spec
    lo = spectrum_endpoints(mask, dist.a)[0] - margin
    hi = spectrum_endpoints(mask, dist.b)[1] + margin
    region = energy_region(spec.periods, spec.d1, spec.d2)
    centre = 0.5 * (region.inf + region.sup)
    return np.unique(np.append(np.linspace(lo, hi, count), centre))
