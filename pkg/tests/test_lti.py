import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blid.errors import BandwidthUndefinedError, MalformedSystemError
from blid.lti import (G1, G2, SLOW_RATIO, ContinuousSystem, bandwidth, freq_response, impulse_response,
                      modal_impulse, named_system, random_stable_system, realize, to_state_space)


def first_order(a=1.0):
    return ContinuousSystem([1.0], [1.0 / a, 1.0])


def test_g1_dc_gain():
    assert freq_response(G1(), 0.0) == pytest.approx(1.25 + 0j, abs=1e-15)


def test_g2_dc_gain_matches_extended_precision():
    import mpmath
    mpmath.mp.dps = 40
    w = mpmath.pi / mpmath.mpf("1.1")
    expected = -w / (mpmath.mpf("0.04") + w**2)
    assert float(expected) == pytest.approx(-0.34839, abs=1e-3)
    assert freq_response(G2(), 0.0).real == pytest.approx(float(expected), rel=1e-13)
    assert freq_response(G2(), 0.0).imag == 0.0


def test_freq_response_matches_polyval():
    sys = ContinuousSystem([2.0, -1.0, 3.0], [1.0, 3.0, 5.0, 2.0, 1.5])
    w = np.linspace(-10, 10, 41)
    direct = np.polyval(sys.num, 1j * w) / np.polyval(sys.den, 1j * w)
    assert np.allclose(freq_response(sys, w), direct, rtol=1e-13, atol=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 50.0))
def test_conjugate_symmetry(seed, w):
    sys = random_stable_system(4, "fast", 1.0, np.random.default_rng(seed))
    assert freq_response(sys, -w) == pytest.approx(np.conj(freq_response(sys, w)), rel=1e-12, abs=1e-14)


def test_first_order_canonical_form():
    ss = to_state_space(first_order())
    assert ss.A.tolist() == [[-1.0]]
    assert ss.B.tolist() == [[1.0]]
    assert ss.C.tolist() == [[1.0]]


def test_canonical_eigenvalues():
    assert np.allclose(np.sort_complex(np.linalg.eigvals(to_state_space(G1()).A)),
                       np.sort_complex(np.roots([0.25, 0.7, 1.0])), atol=1e-12)
    eig = np.sort_complex(np.linalg.eigvals(to_state_space(G2()).A))
    assert np.allclose(eig, [-0.2 - 1j * math.pi / 1.1, -0.2 + 1j * math.pi / 1.1], atol=1e-12)


@pytest.mark.parametrize("make", [G1, G2, first_order])
def test_realization_consistency_named(make):
    sys = make()
    w = np.random.default_rng(0).uniform(-20, 20, 100)
    for ss in (to_state_space(sys), realize(sys)):
        assert np.allclose(ss.freq_response(w), freq_response(sys, w), rtol=1e-9, atol=0)


@pytest.mark.parametrize("order", [1, 2, 3, 6, 10])
def test_realization_consistency_random(order):
    rng = np.random.default_rng(order)
    for cls in ("fast", "slow"):
        sys = random_stable_system(order, cls, 1.0, rng)
        w = rng.uniform(-20, 20, 100)
        ref = freq_response(sys, w)
        err = np.abs(realize(sys).freq_response(w) - ref)
        assert np.all(err <= 1e-9 * np.abs(ref) + 1e-12 * np.max(np.abs(ref)))


def test_realization_consistency_order30():
    # near transmission zeros |G| is tiny, so compare against the response scale
    rng = np.random.default_rng(5)
    for cls in ("fast", "slow"):
        sys = random_stable_system(30, cls, 1.0, rng)
        w = rng.uniform(-20, 20, 100)
        ref = freq_response(sys, w)
        err = np.abs(realize(sys).freq_response(w) - ref)
        assert np.max(err / np.maximum(np.abs(ref), 1e-3 * np.max(np.abs(ref)))) < 1e-6


def test_impulse_response_causal():
    assert impulse_response(G1(), -1.0) == 0.0
    assert np.all(impulse_response(G2(), np.array([-3.0, -0.5])) == 0.0)


def test_impulse_response_g2_closed_form():
    t = np.linspace(0, 30, 301)
    expected = -np.exp(-0.2 * t) * np.sin(math.pi * t / 1.1)
    assert np.allclose(impulse_response(G2(), t), expected, atol=1e-12)


def test_impulse_response_first_order():
    assert impulse_response(first_order(), 1.0) == pytest.approx(math.exp(-1.0), rel=1e-12)


def test_impulse_response_decays():
    for sys in (G1(), G2()):
        alpha = float(np.max(sys.pole_values().real))
        T = 20.0 / abs(alpha)
        assert abs(impulse_response(sys, T)) < 1e-6


def test_modal_impulse_matches_expm():
    c, lam = modal_impulse(G1())
    t = np.linspace(0, 5, 11)
    modal = np.real(np.exp(np.outer(t, lam)) @ c)
    assert np.allclose(modal, impulse_response(G1(), t), atol=1e-12)


def test_malformed_systems():
    with pytest.raises(MalformedSystemError):
        ContinuousSystem([1.0], [0.0, 1.0])
    with pytest.raises(MalformedSystemError):
        ContinuousSystem([1.0, 0.0], [1.0, 1.0])
    with pytest.raises(MalformedSystemError):
        ContinuousSystem([1.0], [1.0, -1.0])
    with pytest.raises(MalformedSystemError):
        ContinuousSystem([1.0], [1.0, 0.0, 1.0])


def test_zero_system_allowed():
    sys = ContinuousSystem([0.0], [1.0, 1.0])
    assert sys.is_zero
    assert freq_response(sys, 2.0) == 0


def test_json_round_trip():
    for sys in (G1(), random_stable_system(5, "slow", 0.5, np.random.default_rng(1))):
        back = ContinuousSystem.from_dict(sys.to_dict())
        w = np.linspace(0, 5, 7)
        assert np.array_equal(freq_response(back, w), freq_response(sys, w))


def test_named_system_lookup():
    assert named_system("g2*").dc_gain() == G2().dc_gain()
    with pytest.raises(MalformedSystemError):
        named_system("G3")


def test_bandwidth_first_order():
    assert bandwidth(first_order()) == pytest.approx(1.0, rel=1e-10)
    assert bandwidth(first_order(10.0)) == pytest.approx(10.0, rel=1e-10)


def test_bandwidth_g1_grid_oracle():
    w = np.arange(1e-4, 10.0, 1e-4)
    mag = np.abs(np.polyval([1.25], 1j * w) / np.polyval([0.25, 0.7, 1.0], 1j * w))
    grid_bw = w[np.argmax(mag <= 1.25 / math.sqrt(2))]
    assert abs(bandwidth(G1()) - grid_bw) <= 1e-4


def test_bandwidth_undefined_for_zero_dc():
    with pytest.raises(BandwidthUndefinedError):
        bandwidth(ContinuousSystem([1.0, 0.0], [1.0, 2.0, 1.0]))


def test_random_slow_first_order():
    sys = random_stable_system(1, "slow", 1.0, np.random.default_rng(3))
    pole = sys.pole_values()[0]
    assert SLOW_RATIO < pole.real < 0 and pole.imag == 0
    assert SLOW_RATIO == pytest.approx(-0.051293294, abs=1e-9)


@pytest.mark.parametrize("cls", ["fast", "slow"])
@pytest.mark.parametrize("h", [0.1, 1.0, 7.0])
def test_random_class_and_order(cls, h):
    rng = np.random.default_rng(11)
    for _ in range(5):
        sys = random_stable_system(30, cls, h, rng)
        poles = sys.pole_values()
        assert poles.size == 30 and sys.order == 30
        assert np.all(poles.real < 0)
        assert sys.dc_gain() == pytest.approx(1.0, rel=1e-9)
        if cls == "fast":
            assert np.max(poles.real) <= SLOW_RATIO / h
        else:
            assert np.any((poles.real > SLOW_RATIO / h) & (poles.real < 0))


def test_random_deterministic():
    a = random_stable_system(8, "fast", 1.0, np.random.default_rng(42))
    b = random_stable_system(8, "fast", 1.0, np.random.default_rng(42))
    assert np.array_equal(a.num, b.num) and np.array_equal(a.den, b.den)


def test_random_bad_arguments():
    with pytest.raises(ValueError):
        random_stable_system(0, "fast", 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        random_stable_system(2, "medium", 1.0, np.random.default_rng(0))
