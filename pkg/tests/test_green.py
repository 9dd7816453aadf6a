import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trimwave.disorder import DistributionSpec, EnsembleSpec, sample_potential
from trimwave.errors import FitRangeError, ParameterError, SingularityError
from trimwave.hamiltonian import PotentialField, assemble_h, assemble_h0
from trimwave.spectral import eigen_sym, sigma0_reference
from trimwave.green import (Resolvent, ZetaFloorWarning, decay_fit, green_column, row_l1, sweep_csv,
                            zeta_grid, zeta_sweep)

from conftest import path, strip


def _small_random(seed=0, b=10.0):
    box, mask = strip(p=2, m2=2, k=4)
    h = assemble_h(box, sample_potential(EnsembleSpec(seed, 1, DistributionSpec(0.0, b), mask), 0))
    return box, mask, h


def test_scalar_resolvents():
    box = path(1)
    col = green_column(assemble_h0(box), 0.0, 1.0, 0)
    assert col.values[0] == pytest.approx(1j)
    assert row_l1(col) == pytest.approx(1.0)
    h = assemble_h(box, PotentialField.from_values(box, [5.0]))
    col = green_column(h, 5.0, 0.1, 0)
    assert col.values[0] == pytest.approx(10j)
    assert (col.energy, col.zeta) == (5.0, 0.1)


@pytest.mark.parametrize("zeta", [0.0, -1.0])
def test_zeta_must_be_positive(zeta):
    with pytest.raises(ParameterError):
        green_column(assemble_h0(path(3)), 0.0, zeta, 0)


def test_source_out_of_range():
    with pytest.raises(IndexError):
        green_column(assemble_h0(path(3)), 0.0, 0.1, 3)


def test_solve_failure_reported():
    box, mask, h = _small_random()
    res = Resolvent(h, complex(0.3, 0.1))
    with pytest.raises(SingularityError) as info:
        res.solve(np.arange(float(h.n)), tol=1e-300)
    assert info.value.residual > 0


@given(st.integers(0, 2 ** 32), st.floats(-6, 14), st.floats(1e-4, 1.0), st.integers(0, 31))
def test_column_residual_and_identity(seed, e, zeta, x):
    box, mask, h = _small_random(seed)
    col = green_column(h, e, zeta, x)
    z = complex(e, zeta)
    a = h.dense() - z * np.eye(h.n)
    delta = np.zeros(h.n)
    delta[x] = 1.0
    assert np.linalg.norm(a @ col.values - delta) <= 1e-10 * (h.norm_bound() + abs(z))
    # sum_y G(x, y) (H - z)(y, w) = delta(x, w)
    assert np.max(np.abs(col.values @ a - delta)) <= 1e-9
    assert row_l1(col) >= abs(col.values[x]) > 0


@given(st.integers(0, 2 ** 32), st.integers(0, 31), st.integers(0, 31))
def test_green_symmetry(seed, x, y):
    box, mask, h = _small_random(seed)
    gx = green_column(h, 1.3, 0.01, x).values
    gy = green_column(h, 1.3, 0.01, y).values
    assert abs(gx[y] - gy[x]) <= 1e-9


@given(st.integers(0, 2 ** 32), st.floats(-5, 12), st.floats(1e-3, 1.0), st.floats(-1, 1), st.floats(1e-3, 1.0))
def test_first_resolvent_identity(seed, e1, z1, de, z2):
    box, mask, h = _small_random(seed)
    w1, w2 = complex(e1, z1), complex(e1 + de, z2)
    g1 = Resolvent(h, w1).column(3).values
    r2 = Resolvent(h, w2)
    g2 = r2.column(3).values
    # G1 - G2 = (z1 - z2) G2 G1 applied to delta_3
    rhs = (w1 - w2) * r2.solve(g1)[0]
    assert np.max(np.abs(g1 - g2 - rhs)) <= 1e-8 * max(1.0, np.max(np.abs(g1)) * np.max(np.abs(g2)))


@given(st.integers(0, 2 ** 32), st.floats(-6, 14), st.floats(1e-3, 1.0))
def test_spectral_consistency(seed, e, zeta):
    box, mask, h = _small_random(seed)
    w = eigen_sym(h).values
    col = green_column(h, e, zeta, 5)
    bound = 1.0 / np.min(np.abs(w - complex(e, zeta)))
    assert np.linalg.norm(col.values) <= bound + 1e-8


def test_decay_fit_strong_disorder():
    box, mask = strip(p=2, m2=8, k=16)
    h = assemble_h(box, sample_potential(EnsembleSpec(0, 1, DistributionSpec(0.0, 100.0), mask), 0))
    e = sigma0_reference(mask).inf - 5
    fit = decay_fit(green_column(h, e, 1e-4, box.index((1, 0))), box)
    assert fit.mass > 0 and fit.r2 >= 0.9
    assert fit.r_min == 2 and 0.0 <= fit.r2 <= 1.0


def test_decay_fit_free_control():
    box, _ = strip(p=2, m2=8, k=16)
    fit = decay_fit(green_column(assemble_h0(box), 0.0, 1.0, box.index((1, 0))), box)
    assert fit.r2 < 0.9 or fit.mass <= 1.0


def test_combes_thomas_scaling():
    box, _ = strip(p=2, m2=8, k=16)
    h0 = assemble_h0(box)
    x = box.index((1, 0))
    for zeta in (0.1, 0.25, 0.5):
        m1 = decay_fit(green_column(h0, 5.0, zeta, x), box).mass
        m2 = decay_fit(green_column(h0, 5.0, 2 * zeta, x), box).mass
        assert m2 >= m1 - 0.05
        assert min(m1, m2) >= 0.5 * zeta


def test_decay_fit_range_error():
    box, _ = strip(p=2, m2=1, k=2)
    with pytest.raises(FitRangeError):
        decay_fit(green_column(assemble_h0(box), 5.0, 0.1, 0), box)


def test_decay_fit_excludes_antipode():
    box, _ = strip(p=2, m2=8, k=16)
    fit = decay_fit(green_column(assemble_h0(box), 5.0, 0.5, 0), box)
    assert fit.r_max == (8 + 16) - 2


def test_zeta_grid():
    z = zeta_grid()
    assert len(z) == 9 and z[0] == pytest.approx(0.1) and z[-1] == pytest.approx(1e-4)
    assert np.all(np.diff(z) < 0)
    assert np.allclose(z[:-1] / z[1:], 10 ** 0.375)
    with pytest.raises(ParameterError):
        zeta_grid(1e-4, 1e-1)
    with pytest.raises(ParameterError):
        zeta_grid(1e-1, 1e-2, 1)


def test_sweep_in_gap():
    box, _ = strip(p=2, m2=8, k=16)
    sweep, cols = zeta_sweep(assemble_h0(box), 5.5, box.index((1, 0)), keep_columns=True)
    assert sweep.alpha <= 0.1
    assert sweep.l1_ratio <= 1.5
    bound = [z * box.site_count * np.max(np.abs(c.values)) for z, c in zip(sweep.zetas, cols)]
    assert np.all(np.isfinite(sweep.l1)) and np.all(sweep.zeta_l1 <= np.array(bound))


def test_sweep_floor_warning():
    box, mask, h = _small_random()
    w = eigen_sym(h).values
    with pytest.warns(ZetaFloorWarning):
        zeta_sweep(h, 0.0, 1, 1e-1, 1e-6, 5, spectrum=w)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ZetaFloorWarning)
        zeta_sweep(h, 0.0, 1, 1e-1, 1e-2, 3, spectrum=w)


def test_sweep_csv():
    box, mask, h = _small_random()
    sweep, cols = zeta_sweep(h, 0.5, 1, 1e-1, 1e-3, 3, keep_columns=True)
    assert len(cols) == 3 and cols[-1].zeta == pytest.approx(1e-3)
    lines = sweep_csv([sweep]).splitlines()
    assert lines[0] == "E,zeta,S,zeta_S,alpha_running"
    assert len(lines) == 4
    assert lines[1].endswith(",nan")
    e, z, s, zs, a = map(float, lines[2].split(","))
    assert zs == pytest.approx(z * s)
