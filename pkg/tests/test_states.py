import numpy as np
import pytest
from hypothesis import given, strategies as st

from trimwave.disorder import DistributionSpec, EnsembleSpec, sample_potential
from trimwave.errors import ConfigurationError, InvalidModeError, ParityError, SupportViolationError
from trimwave.geometry import GeometrySpec, build_box, build_trim_mask, single_layer_gamma0
from trimwave.hamiltonian import PotentialField, assemble_h, assemble_h0
from trimwave.sets import SpectrumSet, hausdorff_distance
from trimwave.spectral import energy_region
from trimwave.states import (ModeIndex, all_modes, build_extended_state, invariant_subspace_check,
                             mode_energy, phi_L, residual)

from conftest import strip


def _random_h(box, mask, seed=0, b=5.0):
    return assemble_h(box, sample_potential(EnsembleSpec(seed, 1, DistributionSpec(0.0, b), mask), 0))


def test_phi_values():
    assert phi_L((0,), (2,), (1,)) == 0.0
    assert phi_L((1,), (2,), (1,)) == 1.0
    vals = phi_L(np.array([[0], [1], [2], [3]]), (3,), (1,))
    assert np.allclose(vals, [0, np.sin(np.pi / 3), np.sin(2 * np.pi / 3), 0])
    assert vals[0] == 0.0 and vals[3] == 0.0


@given(st.integers(2, 9), st.integers(-1000, 1000), st.data())
def test_phi_exact_zeros(p, t, data):
    l = data.draw(st.integers(1, p - 1))
    assert phi_L((t * p,), (p,), (l,)) == 0.0


def test_state_p2():
    box, mask = strip(p=2, m2=2, k=4)
    st_ = build_extended_state(box, ModeIndex((1,), (0,)), mask)
    assert st_.energy == 2.0
    x = box.coords[:, 0]
    assert np.allclose(st_.values, np.sin(np.pi * x / 2))


def test_energy_formula():
    box, _ = strip(p=3, m2=2, k=4)
    mode = ModeIndex((2,), (3,))
    assert mode_energy(box, mode) == pytest.approx(2 * np.cos(2 * np.pi / 3) + 2 * np.cos(2 * np.pi * 3 / 12))


@pytest.mark.parametrize("p, m2, k", [(2, 2, 4), (3, 2, 3), (4, 4, 2)])
def test_all_modes_sup_norm_and_vanishing(p, m2, k):
    box, mask = strip(p=p, m2=m2, k=k)
    for mode in all_modes(box):
        s = build_extended_state(box, mode, mask)
        assert np.max(np.abs(s.values)) <= 1.0 + 1e-15
        assert np.all(s.values[mask.active] == 0)


@pytest.mark.parametrize("p, m2, k", [(2, 2, 8), (3, 2, 4), (4, 2, 3)])
def test_free_residual(p, m2, k):
    box, mask = strip(p=p, m2=m2, k=k)
    h = assemble_h0(box)
    assert max(residual(h, build_extended_state(box, m, mask)) for m in all_modes(box)) <= 1e-12


@given(st.integers(0, 2 ** 32), st.sampled_from([(2, 2, 4), (3, 2, 2), (3, 4, 2), (5, 2, 2)]))
def test_random_single_layer_residual(seed, dims):
    p, m2, k = dims
    box, mask = strip(p=p, m2=m2, k=k)
    h = _random_h(box, mask, seed)
    assert max(residual(h, build_extended_state(box, m, mask)) for m in all_modes(box)) <= 1e-12


def test_two_confined_directions():
    spec = GeometrySpec(2, 1, (2, 3, 2), 0, 2, (3,))
    box = build_box(spec)
    mask = build_trim_mask(box, single_layer_gamma0(spec))
    h = _random_h(box, mask, 4)
    modes = all_modes(box)
    assert len(modes) == 1 * 2 * 6
    assert max(residual(h, build_extended_state(box, m, mask)) for m in modes) <= 1e-12


def test_off_gamma_potential_breaks_state():
    box, mask = strip(p=2, m2=2, k=4)
    values = np.zeros(box.site_count)
    site = box.index((1, 0))
    values[site] = 3.0
    h = assemble_h(box, PotentialField.from_values(box, values))
    s = build_extended_state(box, ModeIndex((1,), (0,)), mask)
    assert residual(h, s) >= abs(3.0 * s.values[site]) - 1e-12 > 0


def test_parity_error():
    spec = GeometrySpec(1, 1, (2, 2), 0, 3, (4,))
    box = build_box(spec)
    mask = build_trim_mask(box, single_layer_gamma0(spec))
    with pytest.raises(ParityError):
        build_extended_state(box, ModeIndex((1,), (0,)), mask)
    s = build_extended_state(box, ModeIndex((1,), (0,)), mask, allow_odd=True)
    assert not s.verified


def test_parity_not_needed_with_simple_confined_bc():
    spec = GeometrySpec(1, 1, (2, 2), 0, 3, (4,))
    box = build_box(spec, ("simple", "periodic"))
    assert build_extended_state(box, ModeIndex((1,), (0,))).verified


def test_support_violation():
    spec = GeometrySpec(1, 1, (2, 2), 0, 2, (4,))
    box = build_box(spec)
    with pytest.raises(SupportViolationError):
        build_extended_state(box, ModeIndex((1,), (0,)), build_trim_mask(box, {(1, 0)}))


@pytest.mark.parametrize("mode", [ModeIndex((0,), (0,)), ModeIndex((2,), (0,)), ModeIndex((1,), (8,)),
                                  ModeIndex((1, 1), (0,))])
def test_invalid_mode(mode):
    box, _ = strip(p=2, m2=2, k=4)
    with pytest.raises(InvalidModeError):
        build_extended_state(box, mode)


def test_residual_dimension_mismatch():
    box, _ = strip(p=2, m2=2, k=4)
    other, _ = strip(p=2, m2=2, k=2)
    with pytest.raises(ConfigurationError):
        residual(assemble_h0(other), build_extended_state(box, ModeIndex((1,), (0,))))


def test_invariant_subspace():
    box, mask = strip(p=3, m2=2, k=4)
    assert invariant_subspace_check(assemble_h0(box), box, (1,), mask).invariant
    rep = invariant_subspace_check(_random_h(box, mask, 9), box, (2,), mask)
    assert rep.invariant and rep.states == box.shape[1]


def test_invariant_subspace_negative_control():
    box, mask = strip(p=3, m2=2, k=4)
    values = np.zeros(box.site_count)
    values[box.index((1, 2))] = 2.0
    h = assemble_h(box, PotentialField.from_values(box, values))
    assert not invariant_subspace_check(h, box, (1,), mask).invariant


def test_eta_even_in_m():
    box, _ = strip(p=2, m2=2, k=4)
    n = box.shape[1]
    for m in range(1, n):
        assert mode_energy(box, ModeIndex((1,), (m,))) == pytest.approx(mode_energy(box, ModeIndex((1,), (n - m,))))


def test_mode_energies_fill_region():
    region = energy_region(3, 1, 1)
    dists = []
    for k in (4, 8, 16, 32):
        box, _ = strip(p=3, m2=2, k=k)
        pts = SpectrumSet.from_points(mode_energy(box, m) for m in all_modes(box))
        assert all(region.contains(e, 1e-12) for e in pts.points)
        dists.append(hausdorff_distance(pts, region))
    ratios = np.array(dists[1:]) / np.array(dists[:-1])
    assert np.all(np.abs(ratios - 0.5) < 0.05)


def test_state_csv():
    box, mask = strip(p=2, m2=2, k=1)
    lines = build_extended_state(box, ModeIndex((1,), (1,)), mask).csv().splitlines()
    assert box.shape == (4, 2)
    assert lines[:5] == ["site_index,re,im", "0,0.0,0.0", "1,1.0,0.0", "2,0.0,0.0", "3,-1.0,0.0"]
    # second row in y picks up the phase exp(i pi) = -1
    assert lines[6].startswith("5,-1.0,")
