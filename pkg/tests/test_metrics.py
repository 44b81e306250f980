import math

import numpy as np
import pytest

from rotcool.basis import MolecularParams, thermal_populations
from rotcool.metrics import (
    CoolingReport,
    delta_s_eff,
    effective_temperature,
    fit_exponential_extrapolate,
    numerical_effort,
    purity,
    sample_std,
    vn_entropy,
)


def test_purity_cases():
    assert purity([1.0, 0.0, 0.0]) == 1.0
    assert purity(np.full(8, 1.0 / 8)) == pytest.approx(1.0 / 8, abs=1e-15)
    assert purity([0.5, 0.5, 0.0]) == pytest.approx(0.5, abs=1e-15)


def test_entropy_cases():
    assert vn_entropy([0.0, 1.0, 0.0]) == 0.0
    assert vn_entropy(np.full(5, 0.2)) == pytest.approx(math.log(5), abs=1e-14)
    assert vn_entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(ValueError):
        vn_entropy([1.1, -0.1])


def test_schur_ordering(rng):
    """A majorizing distribution has higher purity and lower entropy."""
    for _ in range(20):
        p = rng.dirichlet(np.ones(6))
        q = 0.5 * p + 0.5 * np.full(6, 1.0 / 6)  # mixed toward uniform: majorized by p
        assert purity(p) >= purity(q) - 1e-12
        assert vn_entropy(p) <= vn_entropy(q) + 1e-12


@pytest.mark.parametrize("temperature", [1.0, 5.0, 30.0, 80.0])
def test_effective_temperature_fixed_point(temperature):
    params = MolecularParams(j_max_g=4, j_max_e=4, temperature=temperature)
    t = effective_temperature(thermal_populations(params), params)
    assert t == pytest.approx(temperature, rel=1e-4)


def test_effective_temperature_limits():
    params = MolecularParams(j_max_g=2, j_max_e=2, temperature=10.0)
    point = np.zeros(9)
    point[0] = 1.0
    assert effective_temperature(point, params) == 0.0
    with pytest.raises(ValueError, match="hotter"):
        effective_temperature(np.full(9, 1.0 / 9), params)


def test_effective_temperature_bracketing():
    params = MolecularParams(j_max_g=3, j_max_e=3, temperature=10.0)
    s_lo = vn_entropy(thermal_populations(MolecularParams(j_max_g=3, j_max_e=3, temperature=4.0)))
    s_hi = vn_entropy(thermal_populations(MolecularParams(j_max_g=3, j_max_e=3, temperature=9.0)))
    target_entropy = 0.5 * (s_lo + s_hi)
    # synthesize a distribution with that entropy: mix point mass with uniform
    n = 16
    lam_lo, lam_hi = 0.0, 1.0
    for _ in range(60):
        lam = 0.5 * (lam_lo + lam_hi)
        p = lam * np.full(n, 1.0 / n)
        p[0] += 1.0 - lam
        if vn_entropy(p) < target_entropy:
            lam_lo = lam
        else:
            lam_hi = lam
    t = effective_temperature(p, params)
    assert 4.0 < t < 9.0


def test_delta_s_eff_anchors():
    params = MolecularParams(j_max_g=3, j_max_e=3, temperature=6.0)
    s_init = vn_entropy(thermal_populations(params))
    s_ref = vn_entropy(thermal_populations(params, j_max=2))
    assert delta_s_eff(s_init, params) == pytest.approx(0.0, abs=1e-12)
    assert delta_s_eff(s_ref, params) == pytest.approx(1.0, abs=1e-12)
    colder = s_ref - 0.3 * abs(s_init - s_ref)
    assert delta_s_eff(colder, params) > 1.0


def test_numerical_effort():
    assert numerical_effort(1, 1) == 0.0
    assert numerical_effort(100, 3) == pytest.approx(math.log(300), abs=1e-14)
    assert numerical_effort(7, 5) == numerical_effort(5, 7)
    with pytest.raises(ValueError):
        numerical_effort(0, 3)


def test_sample_std():
    assert sample_std([2.0, 2.0, 2.0]) == 0.0
    assert sample_std([1.0, 3.0]) == pytest.approx(0.5, abs=1e-15)
    base = sample_std([1.0, 2.0, 4.0])
    assert sample_std([3.0, 6.0, 12.0]) == pytest.approx(base, rel=1e-12)
    with pytest.raises(ValueError, match="zero mean"):
        sample_std([-1.0, 1.0])
    with pytest.raises(ValueError):
        sample_std([])


def test_exponential_fit_round_trip():
    a, b = 0.7, 0.13
    ls = np.array([4.0, 8.0, 16.0, 24.0, 40.0])
    fit = fit_exponential_extrapolate(list(zip(ls, a * np.exp(-b * ls))), threshold=1e-3)
    assert fit.a == pytest.approx(a, rel=1e-10)
    assert fit.b == pytest.approx(b, rel=1e-10)
    assert fit.crossing == pytest.approx(math.log(a / 1e-3) / b, rel=1e-10)
    assert fit.converging
    assert np.max(np.abs(fit.residuals)) < 1e-12


def test_exponential_fit_flat_flagged():
    pts = [(4.0, 0.2), (8.0, 0.2), (16.0, 0.2)]
    fit = fit_exponential_extrapolate(pts, threshold=0.01)
    assert not fit.converging
    assert math.isinf(fit.crossing)


def test_exponential_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_exponential_extrapolate([(1.0, 0.5), (2.0, -0.1), (3.0, 0.2)], 0.01)
    with pytest.raises(ValueError):
        fit_exponential_extrapolate([(1.0, 0.5), (2.0, 0.4)], 0.01)


def test_exponential_fit_noise_robust(rng):
    a, b, threshold = 0.5, 0.1, 1e-3
    ls = np.arange(5.0, 45.0, 5.0)
    true_crossing = math.log(a / threshold) / b
    for _ in range(50):
        noisy = a * np.exp(-b * ls) * (1.0 + 0.05 * rng.normal(size=ls.size))
        fit = fit_exponential_extrapolate(list(zip(ls, noisy)), threshold)
        assert abs(fit.crossing - true_crossing) <= 0.15 * true_crossing


def test_cooling_report(toy_params):
    w = thermal_populations(toy_params)
    report = CoolingReport.from_populations(w, toy_params, leaked_probability=1e-4)
    assert report.entropy == pytest.approx(vn_entropy(w), abs=1e-14)
    assert report.purity == pytest.approx(purity(w), abs=1e-14)
    assert report.t_eff == pytest.approx(toy_params.temperature, rel=1e-4)
    assert report.delta_s_eff == pytest.approx(0.0, abs=1e-10)
    assert report.leaked_probability == 1e-4


def test_cooling_report_pure_state(toy_params):
    p = np.zeros(4)
    p[0] = 1.0
    report = CoolingReport.from_populations(p, toy_params)
    assert report.entropy <= 1e-12
    assert report.purity >= 1.0 - 1e-12
