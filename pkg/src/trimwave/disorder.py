"""Trimmed i.i.d. random potentials with replayable, order-free sampling.

Generator contract (pinned, covered by golden-value tests):

* key = ``SeedSequence([seed, r]).generate_state(2, uint64)``
* stream = ``Philox(key=key)`` from counter zero; word ``i`` of
  ``random_raw`` belongs to site index ``i`` of the box
* ``u_i = (word_i >> 11) * 2**-53`` in ``[0, 1)`` and ``v_i = a + (b - a) u_i``

Philox is counter based, so the value at a site depends only on
``(seed, r, site index)`` and can be evaluated in any order, on any worker.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InvalidShiftError, RealizationRangeError
from .geometry import TrimMask
from .hamiltonian import PotentialField

_MANTISSA_SCALE = 2.0 ** -53


@dataclass(frozen=True)
class DistributionSpec:
    """Single-site distribution; only ``uniform`` on ``[a, b]`` ships."""

    a: float
    b: float
    kind: str = "uniform"

    def __post_init__(self):
        if self.kind != "uniform":
            raise ConfigurationError(f"unsupported distribution kind {self.kind!r}")
        if not self.b > self.a:
            raise ConfigurationError(f"need b > a for a uniform distribution, got [{self.a}, {self.b}]")

    @property
    def rho_max(self) -> float:
        return 1.0 / (self.b - self.a)

    def in_support(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        return (values >= self.a) & (values <= self.b)


@dataclass(frozen=True)
class EnsembleSpec:
    seed: int
    realizations: int
    distribution: DistributionSpec
    mask: TrimMask

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigurationError("seed must fit in 64 unsigned bits")
        if self.realizations < 1:
            raise ConfigurationError("need at least one realization")


def site_uniforms(seed: int, r: int, n: int) -> np.ndarray:
    """The first ``n`` uniforms of the stream for ``(seed, r)``."""
    key = np.random.SeedSequence([int(seed), int(r)]).generate_state(2, dtype=np.uint64)
    words = np.random.Philox(key=key).random_raw(n)
    return (words >> np.uint64(11)).astype(np.float64) * _MANTISSA_SCALE


def sample_potential(ensemble: EnsembleSpec, r: int) -> PotentialField:
    if not 0 <= r < ensemble.realizations:
        raise RealizationRangeError(f"realization {r} outside 0..{ensemble.realizations - 1}")
    mask = ensemble.mask
    dist = ensemble.distribution
    u = site_uniforms(ensemble.seed, r, mask.box.site_count)
    values = np.where(mask.active, dist.a + (dist.b - dist.a) * u, 0.0)
    return PotentialField(mask.box, values, mask.active)


def constant_potential(mask: TrimMask, a: float) -> PotentialField:
    return PotentialField(mask.box, np.where(mask.active, float(a), 0.0), mask.active)


def shift_potential(v: PotentialField, j: Sequence[int]) -> PotentialField:
    """``V'(x1, x2) = V(x1, x2 - j)`` with torus wrap in the free directions."""
    box = v.box
    if box.spec is None:
        raise InvalidShiftError("shift needs a box built from a geometry spec")
    spec = box.spec
    j = tuple(int(c) for c in j)
    if len(j) != spec.d2:
        raise InvalidShiftError(f"shift needs {spec.d2} components, got {len(j)}")
    free_periods = spec.periods[spec.d1:]
    if any(c % p for c, p in zip(j, free_periods)):
        raise InvalidShiftError(f"shift {j} is not in the period lattice {free_periods}")
    axes = tuple(range(spec.d1, spec.d))
    values = np.roll(v.values.reshape(box.shape, order="F"), j, axis=axes)
    support = np.roll(v.support.reshape(box.shape, order="F"), j, axis=axes)
    return PotentialField(box, values.reshape(-1, order="F"), support.reshape(-1, order="F"))


def is_admissible(v: PotentialField, dist: DistributionSpec, mask: TrimMask) -> bool:
    if v.box != mask.box:
        return False
    off = v.values[~mask.active]
    on = v.values[mask.active]
    return bool(np.all(off == 0.0) and np.all(dist.in_support(on)))


def potential_csv(v: PotentialField) -> str:
    lines = ["site_index,value"]
    lines += [f"{i},{float(x)!r}" for i, x in enumerate(v.values)]
    return "\n".join(lines) + "\n"
