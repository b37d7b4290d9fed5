import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pt_aubry.lattice import (
    GOLDEN,
    LatticeParams,
    OnSiteProfile,
    balance_violation,
    build_hamiltonian,
    build_profile,
    check_pt_symmetry,
    phase_offset,
)


def test_phase_offset_half_beta():
    p = LatticeParams(n_sites=2, beta=Fraction(1, 2))
    assert phase_offset(p) == pytest.approx(-3 * math.pi / 2, abs=1e-15)


def test_phase_offset_golden():
    p = LatticeParams(n_sites=49, beta=GOLDEN)
    assert phase_offset(p) == pytest.approx(-math.pi * (math.sqrt(5) - 1) * 25, rel=1e-15)


def test_phase_offset_zero_beta():
    # N=1 is not a valid lattice; beta=0 makes every term vanish regardless of N
    assert phase_offset(LatticeParams(n_sites=2, beta=0.0)) == 0.0
    with pytest.raises(ValueError):
        LatticeParams(n_sites=1, beta=0.0)


@pytest.mark.parametrize(
    "kw",
    [
        dict(n_sites=1),
        dict(hopping=0.0),
        dict(potential_amp=-1.0),
        dict(beta=1.5),
        dict(beta=Fraction(-1, 3)),
        dict(phi0=0.3),
        dict(drive_freq=-1.0),
        dict(gain_amp=float("nan")),
    ],
)
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        LatticeParams(**kw)


def test_phi0_multiples_of_pi_accepted():
    assert LatticeParams(phi0=-3 * math.pi).phi0_multiple == -3


def test_profile_dimer_half_beta():
    prof = build_profile(LatticeParams(n_sites=2, beta=Fraction(1, 2), potential_amp=1, gain_amp=1))
    np.testing.assert_allclose(prof.values, [-1j, 1j], atol=1e-15)
    assert prof.phase_offset == pytest.approx(-1.5 * math.pi)


def test_profile_float_beta_matches_hand_evaluation():
    p = LatticeParams(n_sites=7, beta=0.3, potential_amp=1.3, gain_amp=0.7)
    phi = -math.pi * 0.3 * 8
    expected = [
        1.3 * math.cos(2 * math.pi * 0.3 * n + phi) + 0.7j * math.sin(2 * math.pi * 0.3 * n + phi)
        for n in range(1, 8)
    ]
    np.testing.assert_allclose(build_profile(p).values, expected, atol=1e-13)


def test_profile_zero_amplitudes():
    prof = build_profile(LatticeParams(n_sites=9, potential_amp=0, gain_amp=0))
    assert np.all(prof.values == 0)


@pytest.mark.parametrize("beta", [Fraction(1), 1.0, Fraction(0), 0.0])
def test_integer_beta_has_no_gain(beta):
    prof = build_profile(LatticeParams(n_sites=4, beta=beta, potential_amp=0.8, gain_amp=3.0))
    np.testing.assert_allclose(prof.gain, 0.0, atol=1e-14)


def test_phi0_pi_flips_profile():
    base = LatticeParams(n_sites=11, beta=0.37, potential_amp=2, gain_amp=0.5)
    a = build_profile(base).values
    b = build_profile(base.with_(phi0=math.pi)).values
    np.testing.assert_allclose(b, -a, atol=1e-15)


def test_hamiltonian_trivial_dimer():
    h = build_hamiltonian(LatticeParams(n_sites=2, potential_amp=0, gain_amp=0, beta=0.3))
    np.testing.assert_array_equal(h.matrix, [[0, -1], [-1, 0]])
    assert h.dim == 2 and h.z_phase == 1.0


def test_hamiltonian_gain_dimer():
    p = LatticeParams(n_sites=2, potential_amp=0, gain_amp=0.5, beta=Fraction(1, 2))
    m = build_hamiltonian(p, z=0.0).matrix
    np.testing.assert_allclose(m, [[-0.5j, -1], [-1, 0.5j]], atol=1e-15)


def test_hamiltonian_drive_zero_crossing_is_hermitian():
    p = LatticeParams(n_sites=2, gain_amp=2.0, drive_freq=1.0, beta=Fraction(1, 2))
    h = build_hamiltonian(p, z=0.25)
    assert abs(h.z_phase) < 1e-15
    np.testing.assert_allclose(h.matrix, h.matrix.conj().T, atol=1e-15)


def test_hamiltonian_negative_z_rejected():
    with pytest.raises(ValueError):
        build_hamiltonian(LatticeParams(), z=-1.0)


def test_hamiltonian_is_read_only():
    h = build_hamiltonian(LatticeParams(n_sites=3))
    with pytest.raises(ValueError):
        h.matrix[0, 0] = 1.0


def test_pt_check_on_built_profile():
    ok, violation = check_pt_symmetry(build_profile(LatticeParams(n_sites=49, potential_amp=4, gain_amp=2)))
    assert ok and violation <= 1e-15


def test_pt_check_detects_perturbation():
    prof = build_profile(LatticeParams(n_sites=10, potential_amp=1, gain_amp=1, beta=0.3))
    vals = prof.values.copy()
    vals[3] += 0.1j
    ok, violation = check_pt_symmetry(OnSiteProfile(vals, prof.phase_offset, prof.amplitude_scale))
    assert not ok
    assert violation == pytest.approx(0.1, rel=1e-9)


def test_pt_check_zero_profile():
    assert check_pt_symmetry(OnSiteProfile(np.zeros(5), 0.0)) == (True, 0.0)


lattice_params = st.builds(
    LatticeParams,
    n_sites=st.integers(2, 120),
    hopping=st.floats(0.1, 5),
    potential_amp=st.floats(0, 10),
    gain_amp=st.floats(-10, 10),
    beta=st.one_of(
        st.floats(0, 1),
        st.fractions(min_value=0, max_value=1, max_denominator=60),
    ),
    phi0=st.sampled_from([0.0, math.pi, -math.pi, 2 * math.pi]),
    drive_freq=st.floats(0, 10),
)


@settings(max_examples=200, deadline=None, derandomize=True, database=None)
@given(lattice_params, st.floats(0, 100))
def test_profile_and_hamiltonian_invariants(p, z):
    prof = build_profile(p)
    n = p.n_sites
    scale = abs(p.potential_amp) + abs(p.gain_amp)

    assert prof.phase_offset == -math.pi * float(p.beta) * (n + 1) + p.phi0
    assert balance_violation(prof) <= 1e-10 * n * abs(p.gain_amp)
    ok, _ = check_pt_symmetry(prof)
    assert ok

    h = build_hamiltonian(p, z)
    m = h.matrix
    off = np.diag(m, 1)
    np.testing.assert_array_equal(off, -p.hopping)
    np.testing.assert_array_equal(np.diag(m, -1), -p.hopping)
    assert np.count_nonzero(np.triu(m, 2)) == 0 and np.count_nonzero(np.tril(m, -2)) == 0
    np.testing.assert_allclose(np.diag(m).real, prof.values.real, atol=0)
    np.testing.assert_allclose(np.diag(m).imag, h.z_phase * prof.values.imag, rtol=1e-15, atol=0)
    assert abs(np.trace(m).imag) <= 1e-10 * n * max(scale, 1.0)

    if p.drive_freq == 0:
        np.testing.assert_array_equal(m, build_hamiltonian(p, 0.0).matrix)
