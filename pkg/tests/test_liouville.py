"""Master-equation assembly, vectorization, steady states and correlators."""

import math

import numpy as np
import pytest

import emitpair as ep
from emitpair.liouville import (
    DENSE_PROPAGATION_LIMIT,
    DensityMatrix,
    Propagator,
    SensorSpec,
    build_assembly,
    build_collapse_channels,
    build_hamiltonian,
    emission_operator,
    steady_state,
    symmetric_mode_channels,
    two_time_correlator,
    vectorize,
)
from emitpair.operators import HilbertLayout, adjoint, embed, expectation, number_op, sigma_minus


def vec_f(mat):
    return np.asarray(mat).flatten(order="F")


def unvec_f(v):
    n = int(round(math.isqrt(v.size)))
    return v.reshape((n, n), order="F")


def dense_master_action(h, channels, rho):
    """Direct dense evaluation of i[rho, H] + dissipators (test oracle)."""
    out = 1j * (rho @ h - h @ rho)
    for rate, jump in channels:
        j = jump.to_dense()
        jd = j.conj().T
        out = out + rate * (j @ rho @ jd - 0.5 * (jd @ j @ rho + rho @ jd @ j))
    return out


# ---------------------------------------------------------------------------
# Hamiltonian assembly

def test_exchange_only_spectrum():
    cfg = ep.EmitterPairConfig(kr12=0.05, rabi=0.0)
    coeffs = ep.dipole_coefficients(cfg)
    h = build_hamiltonian(cfg, ())
    vals = np.sort(np.linalg.eigvalsh(h.to_dense()))
    expected = np.sort([0.0, 0.0, coeffs.delta12, -coeffs.delta12])
    np.testing.assert_allclose(vals, expected, atol=1e-12)


def test_decoupled_sensor_stays_empty():
    cfg = ep.EmitterPairConfig(atom_count=1, rabi=2.0)
    sensor = SensorSpec(omega_s=3.0, linewidth=1.0, epsilon=0.0)
    assembly = build_assembly(cfg, (sensor,))
    rho = steady_state(assembly.superoperator)
    site = assembly.layout.sensor_sites[0]
    pop = expectation(embed(number_op(), site, assembly.layout), rho.data)
    assert abs(pop) < 1e-14


def test_hamiltonian_hermitian_for_random_configs(rng):
    for _ in range(6):
        cfg = ep.EmitterPairConfig(
            kr12=float(rng.uniform(0.01, 2.0)),
            cos_theta12=float(rng.uniform(-1, 1)),
            rabi=float(rng.uniform(0, 50)),
            laser_direction=tuple(rng.normal(size=3)),
            detection_direction=tuple(rng.normal(size=3)),
        )
        sensors = tuple(
            SensorSpec(float(rng.uniform(-40, 40)), float(rng.uniform(0.1, 5)), 1e-4)
            for _ in range(int(rng.integers(0, 3)))
        )
        h = build_hamiltonian(cfg, sensors)
        assert h.hermiticity_defect() < 1e-14


def test_laser_phases_enter_drive_term():
    # laser along the interatomic axis: opposite phases on the two emitters
    cfg = ep.EmitterPairConfig(kr12=1.0, rabi=2.0, laser_direction=(1.0, 0.0, 0.0))
    h = build_hamiltonian(cfg, ()).to_dense()
    layout = HilbertLayout.for_system(2)
    lower0 = embed(sigma_minus(), 0, layout).to_dense()
    phase = 0.5  # k . r for the first emitter is -kr/2
    drive0 = 1.0 * (np.exp(1j * phase) * lower0 + np.exp(-1j * phase) * lower0.conj().T)
    # the matrix element <gg|H|eg> must carry the first emitter's phase
    assert h[0, 2] == pytest.approx(drive0[0, 2])


# ---------------------------------------------------------------------------
# Collapse channels

def test_independent_channels_at_zero_coupling():
    cfg = ep.EmitterPairConfig(kr12=0.05, rabi=1.0, force_independent=True)
    channels = build_collapse_channels(cfg, ())
    rates = sorted(rate for rate, _ in channels)
    assert rates == pytest.approx([1.0, 1.0])


def test_collective_rates_match_damping_matrix_eigenvalues(pair_config):
    coeffs = ep.dipole_coefficients(pair_config)
    channels = build_collapse_channels(pair_config, ())
    rates = sorted(rate for rate, _ in channels)
    oracle = sorted(np.linalg.eigvalsh([[1.0, coeffs.gamma12], [coeffs.gamma12, 1.0]]))
    assert rates == pytest.approx(oracle, abs=1e-14)
    # antisymmetric channel of the close pair is almost dark
    assert rates[0] == pytest.approx(1.0 - coeffs.gamma12)
    assert rates[0] == pytest.approx(4.2e-4, rel=0.02)


def test_near_dicke_limit_rates():
    cfg = ep.EmitterPairConfig(kr12=1e-3, rabi=1.0)
    rates = sorted(rate for rate, _ in build_collapse_channels(cfg, ()))
    assert rates[1] == pytest.approx(2.0, abs=1e-6)
    assert rates[0] == pytest.approx(0.0, abs=1e-6)


def test_collective_channels_equal_raw_cross_damping_dissipator(pair_config):
    # same Lindbladian as the site-basis double sum with the cross terms
    coeffs = ep.dipole_coefficients(pair_config)
    layout = HilbertLayout.for_system(2)
    s = [embed(sigma_minus(), i, layout).to_dense() for i in range(2)]
    g = [[1.0, coeffs.gamma12], [coeffs.gamma12, 1.0]]
    rng = np.random.default_rng(7)
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = rho + rho.conj().T
    raw = np.zeros_like(rho)
    for i in range(2):
        for j in range(2):
            raw += 0.5 * g[i][j] * (
                2.0 * s[j] @ rho @ s[i].conj().T
                - s[i].conj().T @ s[j] @ rho
                - rho @ s[i].conj().T @ s[j]
            )
    channels = build_collapse_channels(pair_config, ())
    collective = np.zeros_like(rho)
    for rate, jump in channels:
        j = jump.to_dense()
        collective += rate * (
            j @ rho @ j.conj().T
            - 0.5 * (j.conj().T @ j @ rho + rho @ j.conj().T @ j)
        )
    np.testing.assert_allclose(collective, raw, atol=1e-12)


def test_sensor_channels_appended(pair_config):
    sensors = (SensorSpec(1.0, 0.5, 1e-4), SensorSpec(-1.0, 2.0, 1e-4))
    channels = build_collapse_channels(pair_config, sensors)
    assert len(channels) == 4
    assert channels[2][0] == 0.5
    assert channels[3][0] == 2.0


def test_symmetric_mode_comparison_channels(pair_config):
    full = build_collapse_channels(pair_config, ())
    reduced = symmetric_mode_channels(pair_config, ())
    assert len(reduced) == 1
    assert reduced[0][0] == pytest.approx(full[0][0])


def test_unphysical_cross_damping_rejected():
    with pytest.raises(ValueError):
        ep.DipoleCoefficients(delta12=0.0, gamma12=1.5)


# ---------------------------------------------------------------------------
# Vectorization

def test_vectorized_action_matches_dense_master_equation(rng):
    cfg = ep.EmitterPairConfig(kr12=0.3, rabi=4.0)
    sensors = (SensorSpec(2.0, 1.5, 1e-3),)
    h = build_hamiltonian(cfg, sensors)
    channels = build_collapse_channels(cfg, sensors)
    gen = vectorize(h, channels)
    dim = h.rows
    rho = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    direct = dense_master_action(h.to_dense(), channels, rho)
    via_superop = unvec_f(gen.csr @ vec_f(rho))
    np.testing.assert_allclose(via_superop, direct, atol=1e-12)


def test_undriven_atom_decay_spectrum():
    cfg = ep.EmitterPairConfig(atom_count=1, rabi=0.0)
    assembly = build_assembly(cfg, ())
    vals = np.linalg.eigvals(assembly.superoperator.to_dense())
    vals = np.sort_complex(vals)
    np.testing.assert_allclose(
        sorted(vals.real), [-1.0, -0.5, -0.5, 0.0], atol=1e-12
    )
    assert max(vals.real) == pytest.approx(0.0, abs=1e-12)


def test_trace_preservation_left_null_vector(pair_config):
    assembly = build_assembly(pair_config, (SensorSpec(3.0, 1.0, 1e-4),))
    dim = assembly.layout.dimension
    trace_vec = vec_f(np.eye(dim))
    assert np.max(np.abs(trace_vec @ assembly.superoperator.csr)) < 1e-12


def test_spectral_abscissa_and_kernel_dimension(pair_config):
    assembly = build_assembly(pair_config, (SensorSpec(5.0, 1.0, 1e-4),))
    vals = np.linalg.eigvals(assembly.superoperator.to_dense())
    assert np.max(vals.real) < 1e-10
    assert np.sum(np.abs(vals) < 1e-8) == 1


def test_hermiticity_preserved_under_evolution(pair_config):
    assembly = build_assembly(pair_config, ())
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[3, 3] = 0.6
    rho0[0, 0] = 0.4
    rho0[0, 3] = rho0[3, 0] = 0.2
    states = ep.evolve(assembly.superoperator, DensityMatrix(data=rho0), np.linspace(0, 10, 11))
    for state in states:
        assert state.hermiticity_defect() < 1e-10
        assert state.trace() == pytest.approx(1.0, abs=1e-10)


# ---------------------------------------------------------------------------
# Steady state

def test_undriven_atom_relaxes_to_ground():
    cfg = ep.EmitterPairConfig(atom_count=1, rabi=0.0)
    assembly = build_assembly(cfg, ())
    rho = steady_state(assembly.superoperator)
    np.testing.assert_allclose(rho.data, np.diag([1.0, 0.0]), atol=1e-12)


def test_driven_atom_matches_bloch_formula():
    for rabi in (0.3, 3.0, 30.0):
        cfg = ep.EmitterPairConfig(atom_count=1, rabi=rabi)
        assembly = build_assembly(cfg, ())
        rho = steady_state(assembly.superoperator)
        oracle = rabi**2 / (1.0 + 2.0 * rabi**2)
        assert rho.data[1, 1].real == pytest.approx(oracle, abs=1e-12)
        assert rho.residual < 1e-12


def test_steady_state_invariants(pair_config):
    assembly = build_assembly(pair_config, (SensorSpec(10.0, 1.0, 1e-4),))
    rho = steady_state(assembly.superoperator)
    assert rho.trace() == pytest.approx(1.0, abs=1e-10)
    assert rho.hermiticity_defect() < 1e-10
    assert rho.min_eigenvalue() > -1e-8
    assert rho.residual < 1e-10


def test_sensor_population_scales_as_epsilon_squared(pair_config):
    pops = {}
    for eps in (1e-4, 5e-5):
        assembly = build_assembly(pair_config, (SensorSpec(0.0, 1.0, eps),))
        rho = steady_state(assembly.superoperator)
        site = assembly.layout.sensor_sites[0]
        pops[eps] = float(
            np.real(expectation(embed(number_op(), site, assembly.layout), rho.data))
        )
    assert pops[1e-4] > 0.0
    assert pops[1e-4] == pytest.approx(1e-8, rel=30)  # order epsilon^2
    assert pops[1e-4] / pops[5e-5] == pytest.approx(4.0, rel=1e-4)


def test_sensor_population_matches_filtered_correlation_integral(pair_config):
    # second-order/adiabatic oracle: population of a weak sensor equals the
    # field correlation filtered by its response, 2 eps^2/G Re int G1 exp((i w - G/2) tau)
    omega_s, linewidth, eps = 25.0, 1.0, 1e-4
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(pair_config, assembly.layout)
    taus = np.linspace(0.0, 80.0, 32001)
    corr = np.asarray(
        two_time_correlator(
            assembly.superoperator, [adjoint(emission)], [], emission, taus, rho_ss=rho
        )
    )
    kernel = np.exp((1j * omega_s - 0.5 * linewidth) * taus)
    integral = np.trapezoid(corr * kernel, taus)
    oracle = 2.0 * eps**2 / linewidth * integral.real

    with_sensor = build_assembly(pair_config, (SensorSpec(omega_s, linewidth, eps),))
    rho_s = steady_state(with_sensor.superoperator)
    site = with_sensor.layout.sensor_sites[0]
    pop = float(
        np.real(expectation(embed(number_op(), site, with_sensor.layout), rho_s.data))
    )
    assert pop == pytest.approx(oracle, rel=0.02)


# ---------------------------------------------------------------------------
# Propagation

def test_evolve_at_zero_returns_initial_state(pair_config):
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    out = ep.evolve(assembly.superoperator, rho, [0.0])
    np.testing.assert_allclose(out[0].data, rho.data, atol=1e-14)


def test_steady_state_is_fixed_point(pair_config):
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    out = ep.evolve(assembly.superoperator, rho, [0.0, 1.0, 5.0, 25.0])
    for state in out:
        np.testing.assert_allclose(state.data, rho.data, atol=1e-9)


def test_excited_atom_decays_exponentially():
    cfg = ep.EmitterPairConfig(atom_count=1, rabi=0.0)
    assembly = build_assembly(cfg, ())
    excited = DensityMatrix(data=np.diag([0.0, 1.0]).astype(complex))
    taus = np.linspace(0.0, 6.0, 13)
    states = ep.evolve(assembly.superoperator, excited, taus)
    pops = [s.data[1, 1].real for s in states]
    np.testing.assert_allclose(pops, np.exp(-taus), atol=1e-10)


def test_dense_and_stiff_paths_agree(pair_config):
    # 16-dimensional superoperator: both propagation routes available
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(pair_config, assembly.layout)
    seed = emission @ np.asarray(rho.data) @ adjoint(emission)
    taus = np.linspace(0.0, 10.0, 21)
    dense = Propagator(assembly.superoperator, dense_limit=DENSE_PROPAGATION_LIMIT)
    stiff = Propagator(assembly.superoperator, dense_limit=0)
    assert dense._dense and not stiff._dense
    out_dense = dense.propagate_vec(vec_f(seed), taus)
    out_stiff = stiff.propagate_vec(vec_f(seed), taus)
    assert np.max(np.abs(out_dense - out_stiff)) < 1e-8


def test_propagator_rejects_unsorted_or_negative_taus(pair_config):
    assembly = build_assembly(pair_config, ())
    prop = Propagator(assembly.superoperator)
    with pytest.raises(ValueError):
        prop.propagate_vec(np.zeros(16), [1.0, 0.5])
    with pytest.raises(ValueError):
        prop.propagate_vec(np.zeros(16), [-1.0, 0.5])


# ---------------------------------------------------------------------------
# Two-time correlators

def test_correlator_at_zero_delay_is_plain_expectation(pair_config):
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(pair_config, assembly.layout)
    raising = adjoint(emission)
    value = two_time_correlator(
        assembly.superoperator, [raising], [], emission, [0.0], rho_ss=rho
    )[0]
    direct = expectation(raising @ emission, rho.data)
    assert value == pytest.approx(direct, abs=1e-13)


def test_correlator_factorizes_at_long_delay():
    cfg = ep.EmitterPairConfig(atom_count=1, rabi=2.0)
    assembly = build_assembly(cfg, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(cfg, assembly.layout)
    raising = adjoint(emission)
    value = two_time_correlator(
        assembly.superoperator, [raising], [], emission, [50.0], rho_ss=rho
    )[0]
    factorized = expectation(raising, rho.data) * expectation(emission, rho.data)
    assert abs(value - factorized) < 1e-6


def test_correlator_supports_operator_products(pair_config):
    # seed C rho A with two-operator lists reproduces manual composition
    assembly = build_assembly(pair_config, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(pair_config, assembly.layout)
    raising = adjoint(emission)
    intensity_op = raising @ emission
    via_lists = two_time_correlator(
        assembly.superoperator,
        [raising],
        [emission],
        intensity_op,
        [0.4],
        rho_ss=rho,
    )[0]
    seed = emission @ np.asarray(rho.data) @ raising
    prop = Propagator(assembly.superoperator)
    evolved = unvec_f(prop.propagate_vec(vec_f(seed), [0.4])[0])
    manual = expectation(intensity_op, evolved)
    assert via_lists == pytest.approx(manual, abs=1e-13)


def test_sensor_spec_validation():
    with pytest.raises(ValueError):
        SensorSpec(omega_s=0.0, linewidth=0.0)
    with pytest.raises(ValueError):
        SensorSpec(omega_s=0.0, linewidth=1.0, epsilon=-1e-4)
    with pytest.warns(UserWarning, match="perturb"):
        SensorSpec(omega_s=0.0, linewidth=1.0, epsilon=0.5)
