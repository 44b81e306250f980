import numpy as np
import pytest

from rotcool.basis import (
    CM1_TO_RAD_PS,
    BasisState,
    MolecularParams,
    Surface,
    build_dipole_matrix,
    build_h0,
    dipole_element,
    enumerate_basis,
    n_ground_states,
    rotational_energy,
    thermal_populations,
)

from oracles import boltzmann_two_shell_ratio


def count_for(j_max_g, j_max_e):
    p = MolecularParams(j_max_g=j_max_g, j_max_e=j_max_e)
    return len(enumerate_basis(p))


def test_paper_scale_counts():
    p = MolecularParams(j_max_g=11, j_max_e=11)
    basis = enumerate_basis(p)
    n_g = sum(1 for s in basis if s.surface is Surface.GROUND)
    assert n_g == 144
    assert n_ground_states(p) == 144
    assert len(basis) == 430


def test_toy_count_and_ordering(toy_params):
    basis = enumerate_basis(toy_params)
    assert len(basis) == 10
    assert basis[0] == BasisState(Surface.GROUND, 0, 0, 0)
    assert basis[1:4] == [BasisState(Surface.GROUND, 1, 0, m) for m in (-1, 0, 1)]
    # excited block: J=1, Omega=-1 then +1, M ascending
    assert basis[4] == BasisState(Surface.EXCITED, 1, -1, -1)
    assert basis[7] == BasisState(Surface.EXCITED, 1, 1, -1)


@pytest.mark.parametrize("j_max", range(1, 16))
def test_count_formula(j_max):
    expected = (j_max + 1) ** 2 + 2 * ((j_max + 1) ** 2 - 1)
    assert count_for(j_max, j_max) == expected


def test_state_invariants():
    with pytest.raises(ValueError):
        BasisState(Surface.GROUND, 1, 1, 0)
    with pytest.raises(ValueError):
        BasisState(Surface.EXCITED, 1, 0, 0)
    with pytest.raises(ValueError):
        BasisState(Surface.EXCITED, 0, 1, 0)
    with pytest.raises(ValueError):
        BasisState(Surface.GROUND, 1, 0, 2)


def test_rotational_energies():
    p = MolecularParams(b_g=2.0, b_e=3.0, j_max_g=2, j_max_e=2)
    assert rotational_energy(BasisState(Surface.GROUND, 0, 0, 0), p) == 0.0
    assert rotational_energy(BasisState(Surface.GROUND, 2, 0, 1), p) == pytest.approx(12.0)
    assert rotational_energy(BasisState(Surface.EXCITED, 1, 1, 0), p) == pytest.approx(3.0)


def test_h0_diagonal(toy_params):
    h0 = build_h0(toy_params)
    h0.validate()
    diag = np.diag(h0.matrix).real
    expected = CM1_TO_RAD_PS * np.array([0, 2, 2, 2, 1, 1, 1, 1, 1, 1], dtype=float)
    np.testing.assert_allclose(diag, expected, rtol=1e-14)
    assert np.max(np.abs(h0.matrix - np.diag(diag))) == 0.0
    # ground-block trace: B_g * sum_J (2J+1) J(J+1)
    trace_g = diag[:4].sum()
    assert trace_g == pytest.approx(CM1_TO_RAD_PS * 1.0 * 3 * 2, rel=1e-14)


def test_dipole_selection_rules(toy_params):
    g00 = BasisState(Surface.GROUND, 0, 0, 0)
    e110 = BasisState(Surface.EXCITED, 1, 1, 0)
    assert dipole_element(g00, e110) != 0.0
    assert dipole_element(e110, g00) == pytest.approx(dipole_element(g00, e110))
    # Delta J = 2 forbidden
    p2 = MolecularParams(j_max_g=2, j_max_e=2)
    e2 = BasisState(Surface.EXCITED, 2, 1, 0)
    assert dipole_element(g00, e2) == 0.0
    # Delta M != 0 forbidden for the z-polarized component
    g11 = BasisState(Surface.GROUND, 1, 0, 1)
    assert dipole_element(g11, e110) == 0.0
    # but allowed for the p = +-1 spherical components used in decay
    assert dipole_element(g11, e110, polarization=-1) != 0.0
    del p2


def test_dipole_matrix_structure(j2_params):
    basis = enumerate_basis(j2_params)
    mu = build_dipole_matrix(j2_params, basis)
    mu.validate()
    m = mu.matrix
    n_g = n_ground_states(j2_params)
    assert np.max(np.abs(m[:n_g, :n_g])) == 0.0
    assert np.max(np.abs(m[n_g:, n_g:])) == 0.0
    assert np.max(np.abs(m.imag)) == 0.0
    # ground J=0 couples only to excited (J=1, Omega=+-1, M=0)
    row = m[0]
    coupled = [basis[i] for i in np.nonzero(row)[0]]
    assert coupled == [
        BasisState(Surface.EXCITED, 1, -1, 0),
        BasisState(Surface.EXCITED, 1, 1, 0),
    ]
    # scaling with mu0
    mu2 = build_dipole_matrix(
        MolecularParams(
            b_g=j2_params.b_g,
            b_e=j2_params.b_e,
            mu0=2.5,
            j_max_g=2,
            j_max_e=2,
            temperature=j2_params.temperature,
        )
    )
    np.testing.assert_allclose(mu2.matrix, 2.5 * m, rtol=0, atol=1e-15)


def test_thermal_populations(toy_params):
    p = thermal_populations(toy_params)
    assert p.shape == (4,)
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
    # all M within one J shell equal
    assert p[1] == p[2] == p[3]
    ratio = 3 * p[1] / p[0]
    assert ratio == pytest.approx(
        boltzmann_two_shell_ratio(toy_params.b_g, toy_params.temperature), rel=1e-12
    )


def test_thermal_limits():
    cold = MolecularParams(j_max_g=3, j_max_e=3, temperature=1e-6)
    p = thermal_populations(cold)
    assert p[0] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError, match="nonphysical temperature"):
        thermal_populations(
            MolecularParams(j_max_g=1, j_max_e=1, temperature=-1.0)
        )


def test_thermal_custom_truncation(j2_params):
    p = thermal_populations(j2_params, j_max=1)
    assert p.shape == (4,)
    assert p.sum() == pytest.approx(1.0, abs=1e-14)
