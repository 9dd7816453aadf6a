"""Assembly of the lattice Laplacian, Schroedinger operators and their blocks.

The hopping carries a plus sign, so the free spectrum on ``Z^d`` is
``[-2d, 2d]``.  Periodic directions of side 2 produce hopping weight 2
because both neighbour maps land on the same site.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, InvalidRestrictionError, InvalidTrimError, NotSeparableError
from .geometry import LatticeBox, TrimMask


@dataclass(frozen=True, eq=False)
class SymOperator:
    """Real symmetric sparse operator.

    ``sites`` maps rows to site indices of the parent box when the operator
    lives on a subset of it (``None`` means all sites, in order).
    """

    matrix: sp.csr_matrix
    sites: np.ndarray | None = None
    box: LatticeBox | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def hopping(self) -> sp.csr_matrix:
        return (self.matrix - sp.diags(self.matrix.diagonal())).tocsr()

    def norm_bound(self) -> float:
        """Row-sum bound on the operator norm."""
        if self.n == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix).sum(axis=1)))

    def is_symmetric(self) -> bool:
        return (self.matrix != self.matrix.T).nnz == 0

    def to_coo_text(self) -> str:
        """``i j value`` per stored entry, sorted by ``(i, j)``."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return "".join(f"{coo.row[t]} {coo.col[t]} {float(coo.data[t])!r}\n" for t in order)


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Real potential on a box; ``support`` marks where it may be nonzero."""

    box: LatticeBox
    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        support = np.asarray(self.support, dtype=bool)
        if values.shape != (self.box.site_count,) or support.shape != values.shape:
            raise ConfigurationError("potential and support must have one entry per box site")
        if np.any(values[~support] != 0.0):
            raise ConfigurationError("potential is nonzero outside its support")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "support", support)

    @classmethod
    def zero(cls, box: LatticeBox) -> "PotentialField":
        return cls(box, np.zeros(box.site_count), np.zeros(box.site_count, dtype=bool))

    @classmethod
    def from_values(cls, box: LatticeBox, values) -> "PotentialField":
        """Potential whose support is exactly where ``values`` is nonzero."""
        values = np.asarray(values, dtype=float)
        return cls(box, values, values != 0.0)


@dataclass(frozen=True, eq=False)
class BlockSplit:
    """``H`` written as ``[[H1, T], [T^T, H2]]`` over inactive/active sites."""

    h1: SymOperator
    h2: SymOperator
    t: sp.csr_matrix
    inactive_sites: np.ndarray
    active_sites: np.ndarray

    def reassemble(self) -> sp.csr_matrix:
        """Undo the permutation and return the parent operator."""
        n = len(self.inactive_sites) + len(self.active_sites)
        block = sp.bmat([[self.h1.matrix, self.t], [self.t.T, self.h2.matrix]], format="coo")
        perm = np.concatenate([self.inactive_sites, self.active_sites])
        out = sp.coo_matrix((block.data, (perm[block.row], perm[block.col])), shape=(n, n))
        return out.tocsr()

    def t_norm(self) -> float:
        if min(self.t.shape) == 0:
            return 0.0
        return float(np.linalg.norm(self.t.toarray(), 2))


def assemble_h0(box: LatticeBox) -> SymOperator:
    n = box.site_count
    rows, cols = [], []
    sites = np.arange(n)
    for nu in range(box.d):
        for table in box.neighbor_table(nu):
            keep = table >= 0
            rows.append(sites[keep])
            cols.append(table[keep])
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    # duplicate (row, col) pairs are summed: that is the weight-2 edge
    mat = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return SymOperator(mat, None, box)


def assemble_h(box: LatticeBox, potential: PotentialField) -> SymOperator:
    if potential.box != box:
        raise ConfigurationError("potential lives on a different box")
    h0 = assemble_h0(box)
    mat = (h0.matrix + sp.diags(potential.values)).tocsr()
    mat.eliminate_zeros()
    return SymOperator(mat, None, box)


def _mask_array(box: LatticeBox, subset) -> np.ndarray:
    if isinstance(subset, TrimMask):
        if subset.box != box:
            raise ConfigurationError("mask lives on a different box")
        return subset.active
    arr = np.asarray(subset, dtype=bool)
    if arr.shape != (box.site_count,):
        raise ConfigurationError("subset mask must have one entry per box site")
    return arr


def restrict_simple(box: LatticeBox, subset) -> SymOperator:
    """Laplacian on ``subset`` keeping only links with both ends inside it.

    Links are those of the parent box, wrap-around included.
    """
    keep = _mask_array(box, subset)
    sites = np.flatnonzero(keep)
    if len(sites) == 0:
        raise InvalidRestrictionError("cannot restrict to an empty subset")
    h0 = assemble_h0(box).matrix
    return SymOperator(h0[sites][:, sites].tocsr(), sites, box)


def block_split(h: SymOperator, mask: TrimMask) -> BlockSplit:
    active = mask.active
    if active.all() or not active.any():
        raise InvalidTrimError("block split needs a mask that is neither empty nor full")
    if h.n != len(active):
        raise ConfigurationError("operator and mask sizes differ")
    inactive_sites = np.flatnonzero(~active)
    active_sites = np.flatnonzero(active)
    m = h.matrix.tocsr()
    h1 = SymOperator(m[inactive_sites][:, inactive_sites].tocsr(), inactive_sites, h.box)
    h2 = SymOperator(m[active_sites][:, active_sites].tocsr(), active_sites, h.box)
    t = m[inactive_sites][:, active_sites].tocsr()
    return BlockSplit(h1, h2, t, inactive_sites, active_sites)


def factor_boxes(box: LatticeBox, d1: int) -> tuple[LatticeBox, LatticeBox]:
    """The confined-direction and free-direction factor boxes of ``box``."""
    first = LatticeBox(box.shape[:d1], box.bc[:d1], box.origin[:d1])
    second = LatticeBox(box.shape[d1:], box.bc[d1:], box.origin[d1:])
    return first, second


def tensor_factors(mask: TrimMask, a: float, d1: int | None = None) -> tuple[SymOperator, SymOperator]:
    """Factors ``(H1_a, H2_0)`` of ``H_0 + a chi_Gamma`` for a product trim.

    ``H1_a`` is the confined-direction Laplacian plus ``a`` on the cross
    section ``G``; ``H2_0`` is the free-direction Laplacian.
    """
    box = mask.box
    if d1 is None:
        if box.spec is None:
            raise ConfigurationError("box has no geometry spec; pass d1")
        d1 = box.spec.d1
    grid = mask.active.reshape(box.shape, order="F")
    n1 = int(np.prod(box.shape[:d1]))
    flat = grid.reshape((n1, -1), order="F")
    if not np.all(flat == flat[:, :1]):
        raise NotSeparableError("trim mask is not of the form G x (full free directions)")
    first, second = factor_boxes(box, d1)
    g = flat[:, 0].astype(float)
    h1 = assemble_h0(first)
    h1 = SymOperator((h1.matrix + a * sp.diags(g)).tocsr(), None, first)
    return h1, assemble_h0(second)


def kron_sum(h1: SymOperator, h2: SymOperator) -> sp.csr_matrix:
    """``1 x H1 + H2 x 1`` in the direction-1-fastest site order."""
    i1 = sp.identity(h1.n, format="csr")
    i2 = sp.identity(h2.n, format="csr")
    return (sp.kron(i2, h1.matrix) + sp.kron(h2.matrix, i1)).tocsr()
