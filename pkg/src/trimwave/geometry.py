"""Lattice boxes, trim sets and boundary-condition neighbour maps.

Sites of a box are indexed lexicographically with direction 1 varying
fastest, i.e. ``index = i_1 + n_1 * (i_2 + n_2 * (i_3 + ...))`` where
``i_nu = x_nu - origin_nu``.  This is numpy's Fortran order and is fixed so
that every dump is reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidGeometryError, InvalidTrimError, SizeCapError

SIMPLE = "simple"
PERIODIC = "periodic"
BOUNDARY_CONDITIONS = (SIMPLE, PERIODIC)

DEFAULT_SITE_CAP = 200_000


@dataclass(frozen=True)
class GeometrySpec:
    """Waveguide geometry: ``d1`` confined and ``d2`` free directions.

    ``periods`` has one entry per direction, ``m1 < m2`` give the strip
    extent in period units for the confined directions and ``k`` the torus
    length in period units for each free direction.
    """

    d1: int
    d2: int
    periods: tuple[int, ...]
    m1: int = 0
    m2: int = 2
    k: tuple[int, ...] = (4,)

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(int(p) for p in self.periods))
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        if self.d1 < 1 or self.d2 < 1:
            raise InvalidGeometryError(f"need d1 >= 1 and d2 >= 1, got d1={self.d1}, d2={self.d2}")
        if len(self.periods) != self.d:
            raise InvalidGeometryError(
                f"periods must have d = d1 + d2 = {self.d} entries, got {len(self.periods)}")
        if any(p < 2 for p in self.periods):
            raise InvalidGeometryError(f"every period must be >= 2, got {self.periods}")
        if self.m2 - self.m1 < 1:
            raise InvalidGeometryError(f"need m1 < m2, got m1={self.m1}, m2={self.m2}")
        if len(self.k) != self.d2:
            raise InvalidGeometryError(f"k must have d2 = {self.d2} entries, got {len(self.k)}")
        if any(v < 1 for v in self.k):
            raise InvalidGeometryError(f"every torus length k must be >= 1, got {self.k}")

    @property
    def d(self) -> int:
        return self.d1 + self.d2

    @property
    def shape(self) -> tuple[int, ...]:
        width = self.m2 - self.m1
        confined = tuple(width * p for p in self.periods[: self.d1])
        free = tuple(kv * p for kv, p in zip(self.k, self.periods[self.d1:]))
        return confined + free

    @property
    def origin(self) -> tuple[int, ...]:
        return tuple(self.m1 * p for p in self.periods[: self.d1]) + (0,) * self.d2

    def replace(self, **changes) -> "GeometrySpec":
        fields_ = dict(d1=self.d1, d2=self.d2, periods=self.periods, m1=self.m1, m2=self.m2, k=self.k)
        fields_.update(changes)
        return GeometrySpec(**fields_)


@dataclass(frozen=True)
class LatticeBox:
    """A finite rectangular box of lattice sites with per-direction bc.

    Boxes built from a :class:`GeometrySpec` carry it in ``spec``; plain
    paths, rings and factor boxes are built with :meth:`from_shape`.
    """

    shape: tuple[int, ...]
    bc: tuple[str, ...]
    origin: tuple[int, ...]
    spec: GeometrySpec | None = field(default=None, compare=True)

    def __post_init__(self):
        if not (len(self.shape) == len(self.bc) == len(self.origin)):
            raise InvalidGeometryError("shape, bc and origin must have equal length")
        for n, tag in zip(self.shape, self.bc):
            if tag not in BOUNDARY_CONDITIONS:
                raise InvalidGeometryError(f"unknown boundary condition {tag!r}")
            if n < 1:
                raise InvalidGeometryError(f"side lengths must be >= 1, got {self.shape}")
            if tag == PERIODIC and n < 2:
                raise InvalidGeometryError("a periodic direction needs at least 2 sites")

    @classmethod
    def from_shape(cls, shape: Sequence[int], bc: str | Sequence[str] = PERIODIC,
                   origin: Sequence[int] | None = None) -> "LatticeBox":
        shape = tuple(int(n) for n in shape)
        if isinstance(bc, str):
            bc = (bc,) * len(shape)
        origin = (0,) * len(shape) if origin is None else tuple(int(o) for o in origin)
        return cls(shape, tuple(bc), origin)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def site_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def periods(self) -> tuple[int, ...] | None:
        return None if self.spec is None else self.spec.periods

    @cached_property
    def coords(self) -> np.ndarray:
        """``(site_count, d)`` integer array of site coordinates."""
        idx = np.unravel_index(np.arange(self.site_count), self.shape, order="F")
        return np.stack(idx, axis=1) + np.asarray(self.origin, dtype=np.int64)

    def coord(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.site_count:
            raise IndexError(f"site index {i} outside 0..{self.site_count - 1}")
        return tuple(int(c) for c in self.coords[i])

    def index(self, x: Sequence[int]) -> int:
        rel = [int(c) - o for c, o in zip(x, self.origin)]
        if len(rel) != self.d or any(not 0 <= r < n for r, n in zip(rel, self.shape)):
            raise IndexError(f"site {tuple(x)} is outside the box")
        return int(np.ravel_multi_index(rel, self.shape, order="F"))

    def wrap(self, x: Sequence[int]) -> tuple[int, ...]:
        """Reduce coordinates into the box along periodic directions."""
        out = []
        for c, o, n, tag in zip(x, self.origin, self.shape, self.bc):
            out.append(o + (int(c) - o) % n if tag == PERIODIC else int(c))
        return tuple(out)

    def neighbor_table(self, nu: int) -> tuple[np.ndarray, np.ndarray]:
        """Index arrays of the N+ and N- maps in direction ``nu``.

        Entries are -1 where simple boundary conditions cut the link.
        """
        n = self.shape[nu]
        rel = self.coords[:, nu] - self.origin[nu]
        stride = int(np.prod(self.shape[:nu]))
        sites = np.arange(self.site_count)
        plus = sites + stride
        minus = sites - stride
        if self.bc[nu] == PERIODIC:
            plus = np.where(rel == n - 1, sites - (n - 1) * stride, plus)
            minus = np.where(rel == 0, sites + (n - 1) * stride, minus)
        else:
            plus = np.where(rel == n - 1, -1, plus)
            minus = np.where(rel == 0, -1, minus)
        return plus, minus


def build_unit_cell(periods: Sequence[int]) -> list[tuple[int, ...]]:
    """All sites of the unit cell, lexicographic with direction 1 fastest."""
    periods = tuple(int(p) for p in periods)
    if not periods or any(p < 2 for p in periods):
        raise InvalidGeometryError(f"every period must be >= 2, got {periods}")
    # itertools.product varies its last argument fastest
    return [tuple(reversed(c)) for c in itertools.product(*(range(p) for p in reversed(periods)))]


def build_box(spec: GeometrySpec, bc: str | Sequence[str] | None = None,
              site_cap: int = DEFAULT_SITE_CAP) -> LatticeBox:
    """Periodized box for ``spec``; all directions periodic unless ``bc`` says otherwise."""
    if bc is None:
        bc = (PERIODIC,) * spec.d
    elif isinstance(bc, str):
        bc = (bc,) * spec.d
    bc = tuple(bc)
    if len(bc) != spec.d:
        raise InvalidGeometryError(f"bc needs {spec.d} entries, got {len(bc)}")
    count = int(np.prod(spec.shape))
    if count > site_cap:
        raise SizeCapError(f"box {spec.shape} has {count} sites, cap is {site_cap}")
    return LatticeBox(spec.shape, bc, spec.origin, spec)


def neighbors(box: LatticeBox, site: int, nu: int) -> list[int]:
    """Neighbour multiset of ``site`` in direction ``nu``.

    Periodic directions of side 2 return the same site twice.
    """
    if not 0 <= site < box.site_count:
        raise IndexError(f"site index {site} outside 0..{box.site_count - 1}")
    plus, minus = box.neighbor_table(nu)
    return sorted(int(s) for s in (plus[site], minus[site]) if s >= 0)


def torus_distances(box: LatticeBox, x: int) -> np.ndarray:
    """l1 distance from site ``x`` to every site, minimum image in periodic directions."""
    if not 0 <= x < box.site_count:
        raise IndexError(f"site index {x} outside 0..{box.site_count - 1}")
    diff = np.abs(box.coords - box.coords[x])
    for nu, (n, tag) in enumerate(zip(box.shape, box.bc)):
        if tag == PERIODIC:
            diff[:, nu] = np.minimum(diff[:, nu], n - diff[:, nu])
    return diff.sum(axis=1)


def torus_distance(box: LatticeBox, x: int, y: int) -> int:
    return int(torus_distances(box, x)[y])


@dataclass(frozen=True, eq=False)
class TrimMask:
    """Characteristic function of the set of active sites on a box."""

    box: LatticeBox
    active: np.ndarray

    def __post_init__(self):
        active = np.asarray(self.active, dtype=bool)
        if active.shape != (self.box.site_count,):
            raise InvalidTrimError(
                f"mask has shape {active.shape}, box has {self.box.site_count} sites")
        active.setflags(write=False)
        object.__setattr__(self, "active", active)

    @property
    def inactive(self) -> np.ndarray:
        return ~self.active

    @property
    def count(self) -> int:
        return int(self.active.sum())

    def __eq__(self, other):
        return (isinstance(other, TrimMask) and self.box == other.box
                and np.array_equal(self.active, other.active))

    def __hash__(self):
        return hash((self.box, self.active.tobytes()))


def _residue_codes(coords: np.ndarray, periods: Sequence[int]) -> np.ndarray:
    res = np.mod(coords, np.asarray(periods))
    return np.ravel_multi_index(tuple(res.T), tuple(periods), order="F")


def build_trim_mask(box: LatticeBox, gamma0: Iterable[Sequence[int]],
                    periods: Sequence[int] | None = None) -> TrimMask:
    """Periodize the cell subset ``gamma0`` over ``box``.

    ``periods`` defaults to the periods of the box's geometry spec.
    """
    periods = tuple(periods) if periods is not None else box.periods
    if periods is None:
        raise InvalidGeometryError("box has no geometry spec; pass periods explicitly")
    cell_size = int(np.prod(periods))
    codes = set()
    for x in gamma0:
        x = tuple(int(c) for c in x)
        if len(x) != len(periods) or any(not 0 <= c < p for c, p in zip(x, periods)):
            raise InvalidTrimError(f"{x} is not a unit-cell site for periods {periods}")
        codes.add(int(np.ravel_multi_index(x, periods, order="F")))
    if not codes:
        raise InvalidTrimError("gamma0 is empty")
    if len(codes) == cell_size:
        raise InvalidTrimError("gamma0 is the full unit cell")
    site_codes = _residue_codes(box.coords, periods)
    return TrimMask(box, np.isin(site_codes, sorted(codes)))


def single_layer_gamma0(spec: GeometrySpec, directions: Sequence[int] | None = None,
                        subset: Iterable[Sequence[int]] | None = None) -> set[tuple[int, ...]]:
    """Cell sites with ``x_nu = 0`` for some confined ``nu`` in ``directions``.

    ``directions`` are 0-based and default to all confined directions; an
    optional ``subset`` is intersected with the result.
    """
    directions = range(spec.d1) if directions is None else tuple(directions)
    for nu in directions:
        if not 0 <= nu < spec.d1:
            raise InvalidGeometryError(f"direction {nu} is not a confined direction")
    cell = build_unit_cell(spec.periods)
    out = {x for x in cell if any(x[nu] == 0 for nu in directions)}
    if subset is not None:
        out &= {tuple(int(c) for c in x) for x in subset}
    return out


def is_single_layer(mask: TrimMask, d1: int, periods: Sequence[int]) -> bool:
    """True if every active site has ``x_nu`` divisible by ``p_nu`` for some confined ``nu``."""
    coords = mask.box.coords[mask.active][:, :d1]
    on_layer = np.any(np.mod(coords, np.asarray(periods[:d1])) == 0, axis=1)
    return bool(np.all(on_layer))
