import numpy as np
import pytest

from gravphase.grids import GridSpec
from gravphase.gridio import load_scalar_grid, save_scalar_grid
from gravphase.sources import (
    LocalizedSourceSpec,
    PhysicalConstants,
    QuantumSourceState,
    gaussian_density,
    grid_density,
    point_density,
    sample_on_grid,
    source_overlap,
    total_mass,
)

CONSTS = PhysicalConstants.natural()


def test_constants_kappa_consistent():
    c = PhysicalConstants.si()
    assert abs(c.kappa - 16 * np.pi * c.G / c.c**4) <= 1e-15 * c.kappa
    with pytest.raises(ValueError):
        PhysicalConstants(G=0.0, c=1.0, hbar=1.0)


def test_rescaled_constants_set_c_to_one():
    si = PhysicalConstants.si()
    scaled = si.rescaled(length_scale=1e-6, mass_scale=1e-14)
    assert scaled.c == 1.0
    assert scaled.G > 0 and scaled.hbar > 0


def test_gaussian_sampling_mass_exact():
    grid = GridSpec(32, 8.0)
    e = gaussian_density(1.3, (4.0, 4.0, 4.0), 0.5)
    g = sample_on_grid(e, grid, CONSTS)
    assert abs(total_mass(g, CONSTS) - 1.3) < 1e-9 * 1.3


def test_point_profile_dominant_cell():
    grid = GridSpec(16, 8.0)
    e = point_density(2.0, (4.0, 4.0, 4.0), sigma_reg=0.15)
    g = sample_on_grid(e, grid, CONSTS)
    assert abs(total_mass(g, CONSTS) - 2.0) < 1e-12 * 2.0
    assert g.values.max() * grid.cell_volume > 0.5 * g.values.sum() * grid.cell_volume


def test_refinement_study():
    e = gaussian_density(1.0, (4.0, 4.0, 4.0), 0.9)
    coarse = sample_on_grid(e, GridSpec(16, 8.0), CONSTS)
    fine = sample_on_grid(e, GridSpec(32, 8.0), CONSTS)
    on_coarse_nodes = fine.values[::2, ::2, ::2]
    diff = np.abs(coarse.values - on_coarse_nodes).max() / coarse.values.max()
    assert diff < 0.01


def test_profile_truncation_guard():
    with pytest.raises(ValueError, match="truncated"):
        sample_on_grid(gaussian_density(1.0, (4.0, 4.0, 4.0), 2.0), GridSpec(16, 8.0), CONSTS)


def test_total_mass_examples():
    assert total_mass(gaussian_density(2.0, (0, 0, 0), 1.0), CONSTS) == 2.0
    zeros = grid_density(np.zeros((8, 8, 8)), 4.0)
    assert total_mass(zeros, CONSTS) == 0.0


def test_total_mass_linearity():
    grid = GridSpec(16, 8.0)
    a = sample_on_grid(gaussian_density(1.0, (3.0, 4.0, 4.0), 0.6), grid, CONSTS)
    b = sample_on_grid(gaussian_density(0.5, (5.0, 4.0, 4.0), 0.8), grid, CONSTS)
    s = grid_density(2.0 * a.values + 3.0 * b.values, 8.0)
    expected = 2.0 * 1.0 + 3.0 * 0.5
    assert abs(total_mass(s, CONSTS) - expected) < 1e-12 * expected


def test_total_mass_grid_refinement_invariance():
    e = gaussian_density(1.0, (4.0, 4.0, 4.0), 0.8)
    m16 = total_mass(sample_on_grid(e, GridSpec(16, 8.0), CONSTS), CONSTS)
    m32 = total_mass(sample_on_grid(e, GridSpec(32, 8.0), CONSTS), CONSTS)
    assert abs(m16 - m32) < 1e-3  # renormalisation pins both to the same mass


def _state(amps, indices):
    amps = np.asarray(amps, dtype=complex)
    dens = [gaussian_density(1.0, (2.0 + i, 2.0, 2.0), 0.3) for i in indices]
    return QuantumSourceState(amplitudes=amps, densities=dens, indices=indices)


def test_overlap_examples():
    psi = _state([1.0], (0,))
    assert source_overlap(psi, psi) == 1.0
    phi = _state([1.0], (5,))
    assert source_overlap(psi, phi) == 0.0
    s = 1 / np.sqrt(2)
    sup = _state([s, s], (0, 1))
    e1 = _state([1.0], (0,))
    assert abs(source_overlap(sup, e1) - s) < 1e-15


def test_overlap_conjugate_symmetry_and_bound():
    rng = np.random.default_rng(9)
    for _ in range(50):
        ka = rng.integers(1, 5)
        kb = rng.integers(1, 5)
        ia = tuple(sorted(rng.choice(6, size=ka, replace=False)))
        ib = tuple(sorted(rng.choice(6, size=kb, replace=False)))
        aa = rng.normal(size=ka) + 1j * rng.normal(size=ka)
        ab = rng.normal(size=kb) + 1j * rng.normal(size=kb)
        psi = _state(aa / np.linalg.norm(aa), ia)
        phi = _state(ab / np.linalg.norm(ab), ib)
        o1 = source_overlap(psi, phi)
        o2 = source_overlap(phi, psi)
        assert abs(o1 - np.conj(o2)) < 1e-14
        assert abs(o1) <= 1.0 + 1e-12


def test_state_validation():
    with pytest.raises(ValueError, match="normalised"):
        _state([1.0, 1.0], (0, 1))
    with pytest.raises(ValueError, match="distinct"):
        _state([1 / np.sqrt(2), 1 / np.sqrt(2)], (0, 0))


def test_localized_spec_and_conversion():
    s = 1 / np.sqrt(2)
    spec = LocalizedSourceSpec(mass=1.0, amplitudes=[s, s],
                               centers=[[0, 0, 0], [1, 0, 0]], widths=[0.1, 0.1])
    state = QuantumSourceState.from_localized(spec)
    assert state.n_components == 2
    assert state.densities[0].kind == "gaussian"
    with pytest.raises(ValueError):
        LocalizedSourceSpec(mass=1.0, amplitudes=[1.0], centers=[[0, 0, 0]], widths=[0.0])


def test_gridio_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    vals = rng.random((8, 8, 8))
    path = tmp_path / "field.f64"
    save_scalar_grid(path, vals, 4.0, units="test", mass=1.5)
    back, box, header = load_scalar_grid(path)
    np.testing.assert_array_equal(back, vals)
    assert box == 4.0
    assert header["mass"] == 1.5
    assert header["order"] == "x-fastest"


def test_gridio_x_fastest_layout(tmp_path):
    vals = np.zeros((2, 2, 2))
    vals[1, 0, 0] = 7.0  # x index 1 -> second scalar in the flat payload
    path = tmp_path / "tiny.f64"
    save_scalar_grid(path, vals, 1.0)
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    assert raw[1] == 7.0 and raw[0] == 0.0
