"""Master-equation assembly, steady states, propagation and two-time correlators.

The density matrix of atoms plus sensor detectors evolves under a Lindblad
generator built from three pieces: the driven-pair Hamiltonian with coherent
excitation exchange, collective decay channels obtained by diagonalising the
2x2 damping matrix (symmetric and antisymmetric modes with rates
``1 +- gamma12``), and one decay channel per sensor.

Vectorisation is column-stacking throughout: ``vec(rho)`` concatenates the
columns of ``rho`` (Fortran order), so ``vec(A rho B) = (B^T kron A) vec(rho)``
and the generator acts as ``d vec(rho)/dt = L vec(rho)``.  The coherent part
carries the sign convention ``i [rho, H]``.

A note on field-operator conventions used here: the far-field *emission*
operator collects the atomic lowering operators with propagation phases,
``emission = sum_j sigma_j^- exp(-i k n.r_j)``; its adjoint raises.  All
intensities are normally ordered, ``<adjoint(emission) . emission>``-style, and
the sensor coupling transfers excitations from atoms to sensors via
``emission . sensor_raise + h.c.``.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import ode
from scipy.linalg import lu_factor, lu_solve

from .dipole import EmitterPairConfig, effective_coefficients
from .operators import (
    HilbertLayout,
    SparseComplexMatrix,
    embed,
    expectation,
    kron,
    sigma_minus,
    sigma_plus,
    number_op,
)

__all__ = [
    "SensorSpec",
    "ModelAssembly",
    "DensityMatrix",
    "SolverError",
    "emission_operator",
    "build_hamiltonian",
    "build_collapse_channels",
    "vectorize",
    "build_assembly",
    "steady_state",
    "evolve",
    "Propagator",
    "two_time_correlator",
    "DENSE_PROPAGATION_LIMIT",
]

# Superoperator dimension up to which propagation uses a dense
# eigendecomposition; beyond it, stiff adaptive integration.
DENSE_PROPAGATION_LIMIT = 1024


class SolverError(RuntimeError):
    """Raised when a linear solve or integration cannot be trusted."""


@dataclass(frozen=True)
class SensorSpec:
    """One sensor detector: resonance (laser frame), linewidth, coupling."""

    omega_s: float
    linewidth: float = 1.0
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.linewidth <= 0.0:
            raise ValueError("sensor linewidth must be positive")
        if self.epsilon < 0.0:
            raise ValueError("sensor coupling epsilon must be nonnegative")
        if self.epsilon > 1e-2:
            warnings.warn(
                f"sensor coupling epsilon = {self.epsilon} is large enough to "
                "perturb the emitter dynamics",
                stacklevel=2,
            )


@dataclass(frozen=True)
class ModelAssembly:
    """Assembled model: layout, Hamiltonian, decay channels, superoperator.

    ``collapse_channels`` is a list of ``(rate, jump_operator)`` pairs; rates
    are plain decay rates in the standard dissipator convention
    ``rate * (J rho J^dag - {J^dag J, rho}/2)``.
    """

    layout: HilbertLayout
    hamiltonian: SparseComplexMatrix
    collapse_channels: tuple
    superoperator: SparseComplexMatrix


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian unit-trace state with the steady-solver residual attached.

    ``residual`` is ``||L vec(rho)||_2`` for states produced by
    :func:`steady_state` and ``None`` for propagated snapshots.
    """

    data: np.ndarray
    residual: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def dimension(self):
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])


def _vec(mat):
    return np.asarray(mat, dtype=np.complex128).flatten(order="F")


def _unvec(v):
    n = int(round(math.isqrt(v.size)))
    return v.reshape((n, n), order="F")


def emission_operator(config: EmitterPairConfig, layout: HilbertLayout) -> SparseComplexMatrix:
    """Far-field emission operator along the detection direction.

    Sum of atomic lowering operators weighted by ``exp(-i k n.r_j)``; photon
    absorption at the detector.  Its adjoint is the corresponding raising
    combination; the normally ordered intensity is
    ``expectation(adjoint(E_em) @ E_em, rho)``.
    """
    phases = config.detection_phases()
    out = None
    for site, phi in zip(layout.atom_sites, phases):
        term = cmath.exp(-1j * phi) * embed(sigma_minus(), site, layout)
        out = term if out is None else out + term
    return out


def build_hamiltonian(config: EmitterPairConfig, sensors) -> SparseComplexMatrix:
    """Laser-frame Hamiltonian of atoms plus sensors (decay-rate units).

    Terms: resonant drive with per-atom plane-wave phases, coherent
    excitation exchange ``gamma * delta12`` between the atoms, sensor
    detunings ``omega_s``, and the weak sensor-field couplings.
    """
    sensors = list(sensors)
    layout = HilbertLayout.for_system(config.atom_count, len(sensors))
    dim = layout.dimension
    h = SparseComplexMatrix.zeros(dim, dim)

    half_rabi = 0.5 * config.rabi
    for site, phi in zip(layout.atom_sites, config.laser_phases()):
        lower = embed(sigma_minus(), site, layout)
        h = h + half_rabi * (cmath.exp(-1j * phi) * lower) + half_rabi * (
            cmath.exp(1j * phi) * lower.adjoint()
        )

    if config.atom_count == 2:
        coeffs = effective_coefficients(config)
        if coeffs.delta12 != 0.0:
            a0, a1 = layout.atom_sites
            hop = embed(sigma_plus(), a0, layout) @ embed(sigma_minus(), a1, layout)
            h = h + (config.gamma * coeffs.delta12) * (hop + hop.adjoint())

    emission = emission_operator(config, layout)
    for idx, spec in enumerate(sensors):
        site = layout.sensor_sites[idx]
        xi_lower = embed(sigma_minus(), site, layout)
        h = h + spec.omega_s * embed(number_op(), site, layout)
        if spec.epsilon != 0.0:
            transfer = emission @ xi_lower.adjoint()  # atom decays, sensor excites
            h = h + spec.epsilon * (transfer + transfer.adjoint())
    return h


def build_collapse_channels(config: EmitterPairConfig, sensors):
    """Decay channels as ``(rate, jump_operator)`` pairs.

    The atomic damping matrix ``[[1, g12], [g12, 1]]`` (units of ``gamma``) is
    diagonalised into the symmetric/antisymmetric collective channels with
    manifestly nonnegative rates ``gamma * (1 +- g12)``; this generates the
    same dissipator as the raw cross-damping double sum.  Each sensor decays
    independently at its own linewidth.
    """
    sensors = list(sensors)
    layout = HilbertLayout.for_system(config.atom_count, len(sensors))
    channels = []
    if config.atom_count == 1:
        channels.append((config.gamma, embed(sigma_minus(), 0, layout)))
    else:
        coeffs = effective_coefficients(config)
        if abs(coeffs.gamma12) > 1.0:
            raise ValueError(
                f"cross-damping gamma12 = {coeffs.gamma12} gives a negative "
                "collective decay rate; unphysical"
            )
        a0, a1 = layout.atom_sites
        s0 = embed(sigma_minus(), a0, layout)
        s1 = embed(sigma_minus(), a1, layout)
        inv_sqrt2 = 1.0 / math.sqrt(2.0)
        sym = inv_sqrt2 * (s0 + s1)
        anti = inv_sqrt2 * (s0 - s1)
        channels.append((config.gamma * (1.0 + coeffs.gamma12), sym))
        channels.append((config.gamma * (1.0 - coeffs.gamma12), anti))
    for idx, spec in enumerate(sensors):
        site = layout.sensor_sites[idx]
        channels.append((spec.linewidth, embed(sigma_minus(), site, layout)))
    return channels


def symmetric_mode_channels(config: EmitterPairConfig, sensors):
    """Reduced comparison model: keep only the symmetric collective channel.

    Drops the subradiant antisymmetric channel while keeping the symmetric one
    at rate ``gamma * (1 + gamma12)``, in the same dissipator convention as
    :func:`build_collapse_channels`.  Intended for side-by-side comparisons
    only; the full model is the default everywhere.
    """
    full = build_collapse_channels(config, sensors)
    if config.atom_count == 1:
        return full
    return [full[0]] + full[2:]


def vectorize(hamiltonian: SparseComplexMatrix, channels) -> SparseComplexMatrix:
    """Column-stacking superoperator for ``i [rho, H]`` plus the dissipators."""
    dim = hamiltonian.rows
    ident = sp.identity(dim, dtype=np.complex128, format="csr")
    h = hamiltonian.csr
    gen = 1j * (sp.kron(h.T, ident, format="csr") - sp.kron(ident, h, format="csr"))
    for rate, jump in channels:
        if rate == 0.0:
            continue
        j = jump.csr
        jdj = (j.conjugate().transpose() @ j).tocsr()
        gen = gen + rate * (
            sp.kron(j.conjugate(), j, format="csr")
            - 0.5 * sp.kron(ident, jdj, format="csr")
            - 0.5 * sp.kron(jdj.T, ident, format="csr")
        )
    return SparseComplexMatrix(gen.tocsr())


def build_assembly(config: EmitterPairConfig, sensors=()) -> ModelAssembly:
    """Assemble layout, Hamiltonian, channels and superoperator in one call."""
    sensors = tuple(sensors)
    layout = HilbertLayout.for_system(config.atom_count, len(sensors))
    hamiltonian = build_hamiltonian(config, sensors)
    channels = tuple(build_collapse_channels(config, sensors))
    superop = vectorize(hamiltonian, channels)
    return ModelAssembly(
        layout=layout,
        hamiltonian=hamiltonian,
        collapse_channels=channels,
        superoperator=superop,
    )


def _trace_constrained_system(gen: sp.csr_matrix):
    """Replace the first row of the generator by the trace constraint."""
    n = gen.shape[0]
    dim = int(round(math.isqrt(n)))
    diag = gen.diagonal()
    weight = float(np.mean(np.abs(diag)))
    if weight == 0.0:
        weight = 1.0
    mod = gen.tolil(copy=True)
    mod[0, :] = 0.0
    for i in range(dim):
        mod[0, i * (dim + 1)] = weight
    rhs = np.zeros(n, dtype=np.complex128)
    rhs[0] = weight
    return mod.tocsc(), rhs


def _condition_estimate(gen_csc, lu):
    try:
        norm_a = spla.onenormest(gen_csc)
        inv_op = spla.LinearOperator(
            gen_csc.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="H")
        )
        norm_ainv = spla.onenormest(inv_op)
        return float(norm_a * norm_ainv)
    except Exception:  # estimation is best-effort diagnostics only
        return float("nan")


def steady_state(superoperator: SparseComplexMatrix, tol: float = 1e-8) -> DensityMatrix:
    """Unique steady state by trace-constrained sparse LU solve.

    One row of the generator is replaced by the (weighted) trace condition and
    the system is solved directly, followed by two iterative-refinement steps.
    The reported residual is ``||L vec(rho)||_2`` against the unmodified
    generator.  Raises :class:`SolverError` with a condition estimate if the
    residual cannot be pushed below ``tol``.
    """
    gen = superoperator.csr
    if gen.shape[0] != gen.shape[1]:
        raise ValueError("superoperator must be square")
    mod, rhs = _trace_constrained_system(gen)
    try:
        lu = spla.splu(mod)
    except RuntimeError as exc:
        raise SolverError(f"steady-state factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    for _ in range(2):
        defect = rhs - mod @ x
        if np.max(np.abs(defect)) == 0.0:
            break
        x = x + lu.solve(defect)
    rho = _unvec(x)
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(gen @ _vec(rho)))
    if not np.isfinite(residual) or residual > tol:
        cond = _condition_estimate(mod, lu)
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds {tol:.1e} "
            f"(condition estimate {cond:.3e})"
        )
    return DensityMatrix(data=rho, residual=residual)


class Propagator:
    """Applies ``exp(L tau)`` to vectorised operators.

    Dense eigendecomposition when the superoperator dimension is at most
    ``DENSE_PROPAGATION_LIMIT``; otherwise stiff adaptive integration (complex
    BDF) at relative tolerance 1e-10.  The eigenbasis is verified against the
    generator on a deterministic probe vector and the propagator falls back to
    integration if the decomposition is unreliable.
    """

    def __init__(self, superoperator: SparseComplexMatrix, dense_limit=DENSE_PROPAGATION_LIMIT):
        self._gen = superoperator.csr
        n = self._gen.shape[0]
        self._dense = n <= dense_limit
        if self._dense:
            dense = self._gen.toarray()
            w, v = np.linalg.eig(dense)
            lu_piv = lu_factor(v)
            probe = np.exp(1j * np.linspace(0.0, 1.0, n))
            probe /= np.linalg.norm(probe)
            recon = v @ (w * lu_solve(lu_piv, probe))
            direct = dense @ probe
            scale = max(np.max(np.abs(direct)), 1.0)
            if np.max(np.abs(recon - direct)) / scale > 1e-9:
                self._dense = False
            else:
                self._w, self._v, self._lu_piv = w, v, lu_piv

    def propagate_vec(self, vec0, taus):
        """Return ``exp(L tau) vec0`` for each tau (sorted, nonnegative)."""
        taus = np.asarray(taus, dtype=float)
        if taus.size and (np.any(taus < 0.0) or np.any(np.diff(taus) < 0.0)):
            raise ValueError("tau grid must be sorted and nonnegative")
        vec0 = np.asarray(vec0, dtype=np.complex128)
        if self._dense:
            coeff = lu_solve(self._lu_piv, vec0)
            phases = np.exp(np.outer(self._w, taus))
            out = (self._v @ (phases * coeff[:, None])).T
            out[taus == 0.0] = vec0  # exact at zero delay
            return out
        return self._propagate_stiff(vec0, taus)

    def _propagate_stiff(self, vec0, taus):
        gen = self._gen
        solver = ode(lambda _t, y: gen @ y)
        solver.set_integrator(
            "zvode", method="bdf", rtol=1e-10, atol=1e-13, nsteps=5_000_000
        )
        solver.set_initial_value(vec0.copy(), 0.0)
        out = np.empty((taus.size, vec0.size), dtype=np.complex128)
        for i, tau in enumerate(taus):
            if tau == 0.0:
                out[i] = vec0
                continue
            y = solver.integrate(tau)
            if not solver.successful():
                raise SolverError(
                    f"stiff integration failed at tau = {tau} "
                    f"(last successful t = {solver.t})"
                )
            out[i] = y
        return out


def evolve(superoperator: SparseComplexMatrix, rho0: DensityMatrix, tau_grid):
    """Propagate a state along a sorted, nonnegative tau grid."""
    prop = Propagator(superoperator)
    mats = prop.propagate_vec(_vec(rho0.data), np.asarray(tau_grid, dtype=float))
    return [DensityMatrix(data=_unvec(m), residual=None) for m in mats]


def _compose(ops, dim):
    out = None
    for op in ops:
        out = op if out is None else out @ op
    return out if out is not None else SparseComplexMatrix.identity(dim)


def two_time_correlator(
    superoperator: SparseComplexMatrix,
    left_ops,
    right_ops,
    mid_op: SparseComplexMatrix,
    tau_grid,
    rho_ss: DensityMatrix | None = None,
):
    """Steady-state correlator ``<A(t) B(t+tau) C(t)>`` for ``tau >= 0``.

    ``A`` is the ordered product of ``left_ops``, ``C`` of ``right_ops`` and
    ``B = mid_op``; the quantum regression theorem gives
    ``Tr[B exp(L tau)(C rho_ss A)]``.  The steady state is solved on demand
    when not supplied.
    """
    if rho_ss is None:
        rho_ss = steady_state(superoperator)
    dim = rho_ss.dimension
    a_op = _compose(list(left_ops), dim)
    c_op = _compose(list(right_ops), dim)
    seed = c_op @ np.asarray(rho_ss.data) @ a_op
    prop = Propagator(superoperator)
    mats = prop.propagate_vec(_vec(seed), np.asarray(tau_grid, dtype=float))
    return [expectation(mid_op, _unvec(m)) for m in mats]
