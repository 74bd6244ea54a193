"""Physical observables: spectra, field correlations, sensor-filtered g2.

Spectra come in two independent flavours that must agree: a Fourier transform
of the first-order field correlation (elastic plateau subtracted and reported
separately) and a scan of the steady population of a single weakly coupled
sensor, which yields the same spectrum filtered by a Lorentzian of half-width
``linewidth / 2``.

Frequency-resolved photon-photon statistics attach one sensor per detected
frequency; the zero-delay correlation is a plain steady-state moment of the
two sensor populations and the delayed version follows from the quantum
regression theorem.  Negative delays use the exchange identity
``g2(w1, w2, -tau) = g2(w2, w1, tau)`` (reversed detection order).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dipole import (
    EmitterPairConfig,
    dressed_triplet,
    effective_coefficients,
)
from .liouville import (
    DensityMatrix,
    Propagator,
    SensorSpec,
    build_assembly,
    emission_operator,
    steady_state,
    two_time_correlator,
)
from .operators import (
    HilbertLayout,
    SparseComplexMatrix,
    adjoint,
    embed,
    expectation,
    number_op,
    sigma_minus,
)

__all__ = [
    "SpectrumResult",
    "CorrelationPoint",
    "UndefinedCorrelationError",
    "POPULATION_FLOOR",
    "field_operator",
    "g1",
    "spectrum_fourier",
    "spectrum_sensor_scan",
    "g2_unfiltered",
    "sensor_g2",
    "sensor_g2_tau",
    "default_spectrum_window",
    "default_omega_grid",
    "find_local_maxima",
    "classify_frequency_pair",
]

# Sensor populations below this are treated as no detected signal: the
# correlation is reported undefined rather than formed from noise.
POPULATION_FLOOR = 1e-14


class UndefinedCorrelationError(RuntimeError):
    """A sensor population vanished; the normalized correlation is undefined."""


@dataclass(frozen=True)
class SpectrumResult:
    """One-photon spectrum on a frequency grid (laser frame).

    ``elastic_weight`` is the coherent fraction of the total emission; for the
    Fourier method the delta line it represents is excluded from ``values``,
    for the sensor scan it appears filtered into a Lorentzian at zero.

    ``narrow_line``, when present, is ``(weight, center, hwhm)`` of a
    subradiant line far narrower than any usable grid spacing.  Its pointwise
    profile is included in ``values`` (same units), but quadrature over the
    grid cannot resolve it; integrals should drop the on-grid profile and add
    ``weight`` analytically.
    """

    omega_grid: np.ndarray
    values: np.ndarray
    elastic_weight: float
    method: str
    narrow_line: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega_grid", np.asarray(self.omega_grid, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class CorrelationPoint:
    """Frequency-filtered photon-photon correlation at one point."""

    omega1: float
    omega2: float
    tau: float
    g2: float
    sensor_linewidth: float


def field_operator(config: EmitterPairConfig, layout: HilbertLayout) -> SparseComplexMatrix:
    """Far-field emission operator along the detection direction.

    Built from atomic lowering operators with propagation phases; see the
    convention note in :mod:`emitpair.liouville`.
    """
    return emission_operator(config, layout)


def _atoms_only(config):
    assembly = build_assembly(config, ())
    rho = steady_state(assembly.superoperator)
    emission = emission_operator(config, assembly.layout)
    raising = adjoint(emission)
    intensity = float(np.real(expectation(raising @ emission, rho.data)))
    return assembly, rho, emission, raising, intensity


def _elastic_fraction(rho: DensityMatrix, emission, intensity):
    amp = expectation(emission, rho.data)
    return float(abs(amp) ** 2 / intensity)


def g1(config: EmitterPairConfig, tau_grid):
    """Normalized first-order field correlation on a nonnegative tau grid."""
    assembly, rho, emission, raising, intensity = _atoms_only(config)
    if intensity <= 0.0 or config.rabi == 0.0:
        raise ValueError("zero emitted intensity: g1 is undefined without drive")
    values = two_time_correlator(
        assembly.superoperator, [raising], [], emission, tau_grid, rho_ss=rho
    )
    return [v / intensity for v in values]


def default_spectrum_window(config: EmitterPairConfig) -> float:
    """Half-width of the default frequency window: outermost sideband + 10."""
    triplet = dressed_triplet(config, effective_coefficients(config))
    return triplet.d13 + 10.0


def default_omega_grid(config: EmitterPairConfig, count=401):
    half = default_spectrum_window(config)
    return np.linspace(-half, half, count)


def _fourier_transform(tau, corr, omega_grid):
    """Two-sided transform 2 Re int_0^T corr(t) exp(-i w t) dt, trapezoid rule."""
    weights = np.empty_like(tau)
    weights[0] = weights[-1] = 0.5
    weights[1:-1] = 1.0
    dt = tau[1] - tau[0]
    weighted = corr * weights * dt
    out = np.empty(omega_grid.size, dtype=float)
    chunk = 64
    for start in range(0, omega_grid.size, chunk):
        block = omega_grid[start : start + chunk, None]
        phases = np.exp(-1j * block * tau[None, :])
        out[start : start + chunk] = 2.0 * np.real(phases @ weighted)
    return out


def _peel_slow_mode(tau, gtilde, tail_tol):
    """Identify a single slow exponential mode from the window tail.

    The correlation is an exact sum of exponential modes, so a mode fitted
    where all faster ones have died holds for every tau.  Returns
    ``(amplitude, rate)`` of ``a exp(rate tau)`` or None when the tail is not
    a clean single decaying exponential.
    """
    n = tau.size
    i1, i2 = int(0.80 * (n - 1)), int(0.90 * (n - 1))
    z1, z2, z3 = gtilde[i1], gtilde[i2], gtilde[-1]
    if min(abs(z1), abs(z2), abs(z3)) < 1e-2 * tail_tol:
        return None
    rate_a = np.log(z2 / z1) / (tau[i2] - tau[i1])
    rate_b = np.log(z3 / z2) / (tau[-1] - tau[i2])
    if abs(rate_a - rate_b) > 1e-2 * abs(rate_a):
        return None
    rate = 0.5 * (rate_a + rate_b)
    if rate.real >= 0.0:
        return None
    amp = z3 * np.exp(-rate * tau[-1])
    if abs(amp) > 1e-3:
        return None  # too much weight to attribute to a residual slow line
    mid = int(0.85 * (n - 1))
    if abs(gtilde[mid] - amp * np.exp(rate * tau[mid])) > tail_tol:
        return None
    return amp, rate


def spectrum_fourier(
    config: EmitterPairConfig,
    tau_max: float = 60.0,
    n_tau: int = 24001,
    omega_grid=None,
    normalize: bool = True,
    tail_tol: float = 1e-6,
    max_extensions: int = 3,
) -> SpectrumResult:
    """Inelastic spectrum from the transform of the field correlation.

    The elastic plateau ``|<emission>|^2 / intensity`` is subtracted before
    transforming and reported as ``elastic_weight``.  The remaining
    correlation must settle within ``tail_tol`` at ``tau_max``.  A subradiant
    pair carries one slow mode that cannot settle in any practical window;
    when the tail is a clean single decaying exponential it is peeled off and
    transformed in closed form (an ultranarrow Lorentzian line), and the
    settling requirement applies to the remainder.  Otherwise the window is
    doubled up to ``max_extensions`` times before the spectrum is refused.
    Hermitian symmetry of the correlation supplies the negative-tau half of
    the transform.
    """
    assembly, rho, emission, raising, intensity = _atoms_only(config)
    if intensity <= 0.0 or config.rabi == 0.0:
        raise ValueError("zero emitted intensity: spectrum is undefined")
    elastic = _elastic_fraction(rho, emission, intensity)
    if omega_grid is None:
        omega_grid = default_omega_grid(config)
    omega_grid = np.asarray(omega_grid, dtype=float)

    span, count = float(tau_max), int(n_tau)
    slow = None
    for attempt in range(max_extensions + 1):
        tau = np.linspace(0.0, span, count)
        corr = two_time_correlator(
            assembly.superoperator, [raising], [], emission, tau, rho_ss=rho
        )
        gtilde = np.asarray(corr) / intensity - elastic
        if abs(gtilde[-1]) < tail_tol:
            break
        slow = _peel_slow_mode(tau, gtilde, tail_tol)
        if slow is not None:
            break
        if attempt == max_extensions:
            raise RuntimeError(
                f"field correlation has not settled at tau = {span}: "
                f"|g1 - plateau| = {abs(gtilde[-1]):.3e} and the tail is not "
                "a single decaying mode"
            )
        span *= 2.0
        count = 2 * count - 1

    narrow_line = None
    if slow is not None:
        amp, rate = slow
        gtilde = gtilde - amp * np.exp(rate * tau)
        narrow_line = (float(amp.real), float(-rate.imag), float(-rate.real))
    values = _fourier_transform(tau, gtilde, omega_grid)
    if slow is not None:
        # closed-form two-sided transform of the peeled mode
        values = values + 2.0 * np.real(amp / (1j * omega_grid - rate))
    if normalize:
        peak = float(np.max(values))
        if peak > 0.0:
            values = values / peak
            if narrow_line is not None:
                narrow_line = (narrow_line[0] / peak, narrow_line[1], narrow_line[2])
    return SpectrumResult(
        omega_grid=omega_grid,
        values=values,
        elastic_weight=elastic,
        method="g1-fourier",
        narrow_line=narrow_line,
    )


def spectrum_sensor_scan(
    config: EmitterPairConfig,
    omega_grid=None,
    sensor_linewidth: float = 1.0,
    epsilon: float = 1e-4,
    normalize: bool = True,
) -> SpectrumResult:
    """Spectrum from the steady population of a scanned sensor.

    One sensor is attached per grid point; its population divided by
    ``epsilon**2`` traces the emission spectrum filtered by a Lorentzian of
    half-width ``sensor_linewidth / 2`` (the elastic line shows up as such a
    Lorentzian at zero).
    """
    if omega_grid is None:
        omega_grid = default_omega_grid(config)
    omega_grid = np.asarray(omega_grid, dtype=float)
    values = np.empty(omega_grid.size, dtype=float)
    for i, omega in enumerate(omega_grid):
        spec = SensorSpec(omega_s=float(omega), linewidth=sensor_linewidth, epsilon=epsilon)
        assembly = build_assembly(config, (spec,))
        rho = steady_state(assembly.superoperator)
        site = assembly.layout.sensor_sites[0]
        pop = expectation(embed(number_op(), site, assembly.layout), rho.data)
        values[i] = float(np.real(pop)) / epsilon**2
    _, rho0, emission, _raising, intensity = _atoms_only(config)
    elastic = _elastic_fraction(rho0, emission, intensity)
    if normalize:
        peak = float(np.max(values))
        if peak > 0.0:
            values = values / peak
    return SpectrumResult(
        omega_grid=omega_grid,
        values=values,
        elastic_weight=elastic,
        method="sensor-scan",
    )


def g2_unfiltered(config: EmitterPairConfig, tau_grid):
    """Frequency-blind intensity correlation of the total field."""
    if config.rabi <= 0.0:
        raise ValueError("g2 requires a driven system")
    assembly, rho, emission, raising, intensity = _atoms_only(config)
    numerator = two_time_correlator(
        assembly.superoperator,
        [raising],
        [emission],
        raising @ emission,
        tau_grid,
        rho_ss=rho,
    )
    return [float(np.real(v)) / intensity**2 for v in numerator]


def _sensor_populations(assembly, rho):
    pops = []
    for site in assembly.layout.sensor_sites:
        pop = expectation(embed(number_op(), site, assembly.layout), rho.data)
        pops.append(float(np.real(pop)))
    return pops


def _require_populations(pops, omegas):
    for pop, omega in zip(pops, omegas):
        if pop < POPULATION_FLOOR:
            raise UndefinedCorrelationError(
                f"sensor population {pop:.3e} at omega = {omega} is below "
                f"{POPULATION_FLOOR:.0e}; correlation undefined"
            )


def sensor_g2(
    config: EmitterPairConfig,
    omega1: float,
    omega2: float,
    sensor_linewidth: float = 1.0,
    epsilon: float = 1e-4,
) -> CorrelationPoint:
    """Zero-delay frequency-resolved photon-photon correlation.

    Two sensors are attached, one per frequency (both at the common frequency
    when ``omega1 == omega2``, which is what produces the indistinguishability
    bunching of the diagonal), and a single steady state yields
    ``<n1 n2> / (<n1><n2>)``.
    """
    sensors = (
        SensorSpec(omega_s=float(omega1), linewidth=sensor_linewidth, epsilon=epsilon),
        SensorSpec(omega_s=float(omega2), linewidth=sensor_linewidth, epsilon=epsilon),
    )
    assembly = build_assembly(config, sensors)
    rho = steady_state(assembly.superoperator)
    n1, n2 = _sensor_populations(assembly, rho)
    _require_populations((n1, n2), (omega1, omega2))
    s1, s2 = assembly.layout.sensor_sites
    joint = expectation(
        embed(number_op(), s1, assembly.layout) @ embed(number_op(), s2, assembly.layout),
        rho.data,
    )
    value = float(np.real(joint)) / (n1 * n2)
    return CorrelationPoint(
        omega1=float(omega1),
        omega2=float(omega2),
        tau=0.0,
        g2=value,
        sensor_linewidth=sensor_linewidth,
    )


def sensor_g2_tau(
    config: EmitterPairConfig,
    omega1: float,
    omega2: float,
    sensor_linewidth: float,
    tau_grid,
    epsilon: float = 1e-4,
):
    """Time- and frequency-resolved correlation on a tau grid.

    Positive delays are regression-theorem correlators
    ``<xi1+(t) n2(t+tau) xi1(t)> / (<n1><n2>)``; negative delays use the
    detection-order identity ``g2(w1, w2, -tau) = g2(w2, w1, tau)`` on the
    same assembled model.
    """
    taus = np.asarray(tau_grid, dtype=float)
    sensors = (
        SensorSpec(omega_s=float(omega1), linewidth=sensor_linewidth, epsilon=epsilon),
        SensorSpec(omega_s=float(omega2), linewidth=sensor_linewidth, epsilon=epsilon),
    )
    assembly = build_assembly(config, sensors)
    rho = steady_state(assembly.superoperator)
    n1, n2 = _sensor_populations(assembly, rho)
    _require_populations((n1, n2), (omega1, omega2))
    s1, s2 = assembly.layout.sensor_sites
    lower1 = embed(sigma_minus(), s1, assembly.layout)
    lower2 = embed(sigma_minus(), s2, assembly.layout)
    num1 = embed(number_op(), s1, assembly.layout)
    num2 = embed(number_op(), s2, assembly.layout)

    prop = Propagator(assembly.superoperator)
    norm = n1 * n2
    rho_arr = np.asarray(rho.data)
    results = np.empty(taus.size, dtype=float)

    def _fill(mask, first_lower, mid_op, delays):
        if not np.any(mask):
            return
        seed = first_lower @ rho_arr @ adjoint(first_lower)
        order = np.argsort(delays[mask], kind="stable")
        sorted_delays = delays[mask][order]
        mats = prop.propagate_vec(seed.flatten(order="F"), sorted_delays)
        vals = np.array(
            [
                float(np.real(expectation(mid_op, m.reshape(seed.shape, order="F"))))
                for m in mats
            ]
        )
        unsorted = np.empty_like(vals)
        unsorted[order] = vals
        results[mask] = unsorted / norm

    _fill(taus >= 0.0, lower1, num2, taus)
    _fill(taus < 0.0, lower2, num1, -taus)

    return [
        CorrelationPoint(
            omega1=float(omega1),
            omega2=float(omega2),
            tau=float(t),
            g2=float(v),
            sensor_linewidth=sensor_linewidth,
        )
        for t, v in zip(taus, results)
    ]


def find_local_maxima(omega_grid, values, min_height_frac=1e-3):
    """Interior local maxima above a relative height floor, as (omega, value)."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    floor = min_height_frac * float(np.max(values))
    peaks = []
    for i in range(1, values.size - 1):
        if values[i] > values[i - 1] and values[i] > values[i + 1] and values[i] > floor:
            peaks.append((float(omega_grid[i]), float(values[i])))
    return peaks


def classify_frequency_pair(triplet, omega1, omega2, sensor_linewidth, tol=None):
    """Label a frequency pair by the emission processes it addresses.

    Returns one of ``carrier``, ``sideband-carrier``, ``opposite-sideband``,
    ``equal-sideband``, ``cross-sideband``, ``virtual`` or ``unresolved``.
    The sideband split into equal vs cross requires the two inner gaps to
    differ by more than the filter linewidth; otherwise the distinction is
    meaningless and ``unresolved`` is returned.
    """
    tol = sensor_linewidth if tol is None else tol
    lines = [0.0] + [s * d for d in triplet.sideband_deltas for s in (1.0, -1.0)]

    def nearest(omega):
        best = min(lines, key=lambda line: abs(omega - line))
        return best if abs(omega - best) <= tol else None

    l1, l2 = nearest(omega1), nearest(omega2)
    if l1 is None or l2 is None:
        return "virtual"
    if l1 == 0.0 and l2 == 0.0:
        return "carrier"
    if l1 == 0.0 or l2 == 0.0:
        return "sideband-carrier"
    if abs(triplet.d12 - triplet.d23) < sensor_linewidth:
        return "unresolved"
    if l1 == -l2:
        return "opposite-sideband"
    if l1 == l2:
        return "equal-sideband"
    return "cross-sideband"
