import numpy as np
import pytest

from rotcool.basis import BasisState, MolecularParams, Surface, build_model, enumerate_basis
from rotcool.cycle import (
    DarkStateError,
    branching_matrix,
    cycle_map,
    decay_rates,
    iterate_cycles,
    leak_fractions,
    steady_state,
    write_cycle_map_csv,
)
from rotcool.fields import ControlField

from oracles import wigner3j_oracle


def random_field(rng, n=24, dt=0.2, scale=0.4):
    return ControlField(dt, scale * (rng.normal(size=n) + 1j * rng.normal(size=n)))


def test_decay_selection_rules(j2_model):
    rates = decay_rates(j2_model.params, j2_model.basis)
    ground = j2_model.basis[: j2_model.n_ground]
    excited = j2_model.basis[j2_model.n_ground :]
    for col, e in enumerate(excited):
        for row, g in enumerate(ground):
            if rates[row, col] != 0.0:
                assert abs(e.j - g.j) <= 1
                assert abs(e.m - g.m) <= 1
    # rates do not depend on the transition frequency: b_e shift changes nothing
    shifted = MolecularParams(
        b_g=j2_model.params.b_g, b_e=5.0, j_max_g=2, j_max_e=2, temperature=2.5
    )
    np.testing.assert_array_equal(decay_rates(shifted), rates)


def test_untruncated_total_rate_is_gamma0():
    """Sum rule: with all decay channels in the basis the total rate is gamma0."""
    params = MolecularParams(j_max_g=4, j_max_e=3, temperature=5.0)
    rates = decay_rates(params)
    basis = enumerate_basis(params)
    excited = [s for s in basis if s.surface is Surface.EXCITED]
    totals = rates.sum(axis=0)
    for col, e in enumerate(excited):
        if e.j <= 3:  # J'=3 can reach ground J=4, still inside the basis
            assert totals[col] == pytest.approx(params.gamma0, rel=1e-12)


def test_branching_columns_and_scaling(toy_model):
    rates = decay_rates(toy_model.params, toy_model.basis)
    b = branching_matrix(rates)
    np.testing.assert_allclose(b.sum(axis=0), 1.0, atol=1e-12)
    assert np.all(b >= 0.0)
    b2 = branching_matrix(17.3 * rates)
    np.testing.assert_allclose(b2, b, atol=1e-15)


def test_branching_toy_oracle(toy_model):
    """Branching from |e; J=1, Omega=1, M=0> against explicit 3j sums."""
    basis = toy_model.basis
    excited = basis[toy_model.n_ground :]
    col = excited.index(BasisState(Surface.EXCITED, 1, 1, 0))
    rates = decay_rates(toy_model.params, basis)
    b = branching_matrix(rates)

    def oracle_rate(g_j, g_m):
        p = 0 - g_m
        if abs(p) > 1:
            return 0.0
        w_m = wigner3j_oracle(g_j, 1, 1, g_m, p, 0)
        w_o = wigner3j_oracle(g_j, 1, 1, 0, 1, -1)
        return (2 * g_j + 1) * 3 * w_m**2 * w_o**2

    ground = basis[: toy_model.n_ground]
    expected = np.array([oracle_rate(s.j, s.m) for s in ground])
    expected /= expected.sum()
    np.testing.assert_allclose(b[:, col], expected, atol=1e-13)


def test_dark_state_error():
    rates = np.array([[0.5, 0.0], [0.5, 0.0]])
    with pytest.raises(DarkStateError, match="e:1"):
        branching_matrix(rates, labels=["e:0", "e:1"])


def test_leak_fractions_truncated():
    """At j_max_g = j_max_e the top excited shell leaks into missing ground J+1."""
    params = MolecularParams(j_max_g=2, j_max_e=2, temperature=2.0)
    rates = decay_rates(params)
    basis = enumerate_basis(params)
    excited = [s for s in basis if s.surface is Surface.EXCITED]
    leak = leak_fractions(rates, params.gamma0)
    for col, e in enumerate(excited):
        if e.j == 2:
            assert leak[col] > 0.01
        else:
            assert leak[col] == pytest.approx(0.0, abs=1e-12)


def test_cycle_map_zero_field_is_identity(toy_model):
    cm = cycle_map(ControlField.zeros(8, 0.1), toy_model)
    np.testing.assert_allclose(cm.matrix, np.eye(4), atol=1e-15)
    assert cm.max_leak() == pytest.approx(0.0, abs=1e-20)


def test_cycle_map_stochastic_random_fields(j2_model, rng):
    for _ in range(10):
        cm = cycle_map(random_field(rng), j2_model)
        assert np.all(cm.matrix >= -1e-12)
        np.testing.assert_allclose(cm.matrix.sum(axis=0), 1.0, atol=1e-10)


def test_cycle_map_pi_pulse_concentrates_on_decay_targets(toy_model):
    """A resonant pi pulse on g(0,0) -> e(1,+-1,0) sends that column to the
    branching targets of the excited pair."""
    basis = toy_model.basis
    # g(0,0,0) couples only to e(1,-1,0) and e(1,+1,0) (the Q-branch M=0->0
    # vanishes by 3j parity), so column 0 sees an exact two-level problem
    # against the bright superposition with coupling hypot(c1, c2).
    mu_r = toy_model.mu_raise
    pair = abs(mu_r[5, 0]), abs(mu_r[8, 0])
    coupling = np.hypot(*pair)
    # make every level degenerate so the drive is exactly resonant
    h0_flat = np.zeros_like(toy_model.h0.matrix)
    duration = np.pi / 2 / coupling
    n = 400
    field = ControlField(duration / n, np.full(n, 1.0, dtype=complex))
    model = toy_model
    rates = decay_rates(model.params, basis)
    b = branching_matrix(rates)
    from rotcool.basis import RotorModel, OperatorMatrix

    flat_model = RotorModel(
        params=model.params,
        basis=basis,
        n_ground=model.n_ground,
        h0=OperatorMatrix(h0_flat, tag="hermitian"),
        mu=model.mu,
        mu_raise=mu_r,
        thermal_weights=model.thermal_weights,
    )
    cm = cycle_map(field, flat_model, branching=b, rates=rates)
    # expected: population fully excited, split across the two Omega states,
    # then decayed through the branching columns
    w = np.array([abs(mu_r[5, 0]) ** 2, abs(mu_r[8, 0]) ** 2])
    w = w / w.sum()
    expected = b[:, 1] * w[0] + b[:, 4] * w[1]
    np.testing.assert_allclose(cm.matrix[:, 0], expected, atol=1e-6)


def test_steady_state_identity_is_reducible():
    ss = steady_state(np.eye(4))
    assert ss.reducible
    assert ss.unit_eigenvectors.shape[1] == 4
    assert ss.populations is None


def test_steady_state_absorbing_point():
    m = np.array([[1.0, 0.3, 0.2], [0.0, 0.5, 0.1], [0.0, 0.2, 0.7]])
    ss = steady_state(m)
    assert not ss.reducible
    np.testing.assert_allclose(ss.populations, [1.0, 0.0, 0.0], atol=1e-12)
    assert ss.residual <= 1e-12


def test_steady_state_matches_power_iteration(rng):
    m = rng.uniform(size=(10, 10))
    m /= m.sum(axis=0)
    ss = steady_state(m)
    p = np.full(10, 0.1)
    for _ in range(10_000):
        p = m @ p
    np.testing.assert_allclose(ss.populations, p, atol=1e-10)
    assert ss.residual <= 1e-12
    assert 0.0 < ss.gap <= 1.0


def test_iterate_cycles_spectral_bound(rng):
    m = rng.uniform(size=(8, 8)) + 0.1
    m /= m.sum(axis=0)
    ss = steady_state(m)
    lam2 = 1.0 - ss.gap
    p0 = np.zeros(8)
    p0[3] = 1.0
    iterates = iterate_cycles(m, p0, 60)
    np.testing.assert_array_equal(iterates[0], p0)
    errs = np.linalg.norm(iterates - ss.populations, ord=1, axis=1)
    # ||p_n - p_ss||_1 <= C |lam2|^n with a modest constant
    for n in (20, 40, 60):
        assert errs[n] <= 20.0 * errs[0] * lam2**n + 1e-14


def test_two_initial_states_converge(j2_model, rng):
    cm = cycle_map(random_field(rng, n=40, scale=0.6), j2_model)
    ss = steady_state(cm)
    if ss.reducible:
        pytest.skip("random field produced a reducible map")
    n_g = j2_model.n_ground
    p = np.zeros(n_g)
    p[0] = 1.0
    q = np.full(n_g, 1.0 / n_g)
    for _ in range(5_000):
        p = cm.matrix @ p
        q = cm.matrix @ q
    assert np.max(np.abs(p - q)) < 1e-8


def test_cycle_map_csv(tmp_path, toy_model, rng):
    cm = cycle_map(random_field(rng, n=10), toy_model)
    path = tmp_path / "map.csv"
    write_cycle_map_csv(cm, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",") == [s.label for s in toy_model.basis[:4]]
    values = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    np.testing.assert_array_equal(values, cm.matrix)
