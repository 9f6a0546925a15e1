"""Master-equation propagation and two-time correlators.

The Liouvillian is assembled once as sparse superoperators,
``L(t) = L0 + f(t) L1 + conj(f(t)) L2``. While the pulse is on, states are
advanced with fixed-step RK4; once the envelope has dropped below
``model.DRIVE_CUTOFF`` the generator is time independent and each grid
interval is a single matrix-exponential step.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .model import PulseEnvelope, SystemSpec, build_dissipators, hamiltonian_parts, rabi_at
from .operators import (DensityState, HilbertLayout, build_sigma, commutator_super,
                        dagger, dissipator_super)

log = logging.getLogger(__name__)

DEFAULT_STEP = 0.002  # ps
# dense propagators up to this superoperator size, expm_multiply above it
_DENSE_LIMIT = 2500


class IntegrationError(RuntimeError):
    """Trace drift beyond tolerance during propagation."""


class RangeError(ValueError):
    """Requested times fall outside the available dynamics."""


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    dt: float
    t_start: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")

    @classmethod
    def spanning(cls, t_end: float, n_points: int, t_start: float = 0.0) -> "TimeGrid":
        if n_points < 2:
            raise ValueError("need at least two grid points")
        return cls(t_end, (t_end - t_start) / (n_points - 1), t_start)

    @property
    def n_points(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)


@dataclass(frozen=True)
class NumericsSettings:
    """Resolution knobs for one photon-statistics run."""

    fock_dim: int = 4  # 3 leaves ~2e-4 relative error in P̃₂
    step: float = DEFAULT_STEP
    n_t: int = 150
    t_window: float = 120.0  # ps after the pulse centre
    tau_limit: str = "full"  # or "window": integrate only t + τ <= T

    def horizon(self, spec: SystemSpec) -> float:
        return 2.5 * spec.tau_p + self.t_window

    def layout(self) -> HilbertLayout:
        return HilbertLayout(self.fock_dim, self.fock_dim)


class Liouvillian:
    """Time-dependent generator for vectorised (row-major) operators."""

    def __init__(self, spec: SystemSpec, layout: HilbertLayout):
        self.spec = spec
        self.layout = layout
        self.envelope = PulseEnvelope.from_spec(spec)
        h_static, drive = hamiltonian_parts(spec, layout)
        l0 = commutator_super(h_static)
        for rate, jump in build_dissipators(spec, layout):
            if rate:
                l0 = l0 + rate * dissipator_super(jump)
        self.L0 = l0.tocsr()
        self.L1 = commutator_super(drive)
        self.L2 = commutator_super(dagger(drive))
        # L0, L1, L2 on one shared sparsity pattern: a stage then costs one matvec
        union = (abs(self.L0) + abs(self.L1) + abs(self.L2)).tocsr()
        union.sort_indices()
        rows, cols = union.nonzero()
        self._indptr, self._indices = union.indptr, union.indices
        self._data = [np.asarray(m[rows, cols]).ravel() for m in (self.L0, self.L1, self.L2)]
        self.off_time = self.envelope.off_time if spec.rabi_peak else 0.0
        self._propagators: dict[float, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def _drive_data(self, t: float) -> np.ndarray:
        f = complex(rabi_at(t, self.envelope))
        d0, d1, d2 = self._data
        return d0 + f * d1 + f.conjugate() * d2

    def at(self, t: float, out: scipy.sparse.csr_matrix | None = None):
        """The generator at time ``t`` as a sparse matrix (reuses ``out``)."""
        if t >= self.off_time:
            return self.L0
        if out is None or out is self.L0:
            n = self.dim**2
            return scipy.sparse.csr_matrix(
                (self._drive_data(t), self._indices, self._indptr), shape=(n, n))
        out.data = self._drive_data(t)
        return out

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.at(t) @ x

    def static_step(self, x: np.ndarray, h: float) -> np.ndarray:
        """Exact ``exp(L0 h) x`` for the undriven generator."""
        if self.dim**2 > _DENSE_LIMIT:
            return scipy.sparse.linalg.expm_multiply(self.L0 * h, x)
        key = round(h, 12)
        prop = self._propagators.get(key)
        if prop is None:
            prop = scipy.linalg.expm(self.L0.toarray() * h)
            self._propagators[key] = prop
        return prop @ x

    def static_rows(self, row: np.ndarray, h: float, n: int) -> np.ndarray:
        """Rows ``row @ exp(L0 h j)`` for ``j = 0 .. n-1`` (Heisenberg picture)."""
        out = np.empty((n, row.size), dtype=complex)
        out[0] = row
        if self.dim**2 > _DENSE_LIMIT:
            adj = (self.L0.T * h).tocsr()
            for j in range(1, n):
                out[j] = scipy.sparse.linalg.expm_multiply(adj, out[j - 1])
            return out
        self.static_step(np.zeros((row.size, 1), dtype=complex), h)  # fill cache
        prop = self._propagators[round(h, 12)]
        for j in range(1, n):
            out[j] = out[j - 1] @ prop
        return out

    def advance(self, x: np.ndarray, t0: float, t1: float, step: float) -> np.ndarray:
        """Evolve columns of ``x`` from ``t0`` to ``t1``."""
        if t1 <= t0:
            return x
        if t0 >= self.off_time:
            return self.static_step(x, t1 - t0)
        n = max(1, math.ceil((t1 - t0) / step - 1e-9))
        dt = (t1 - t0) / n
        m_start = self.at(t0)
        m_half = m_end = None
        for i in range(n):
            t = t0 + i * dt
            m_half = self.at(t + dt / 2, m_half)
            m_end = self.at(t + dt, m_end)
            k1 = m_start @ x
            k2 = m_half @ (x + dt / 2 * k1)
            k3 = m_half @ (x + dt / 2 * k2)
            k4 = m_end @ (x + dt * k3)
            x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            m_start, m_end = m_end, m_start
        return x


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray  # (n_points, dim, dim)
    expectations: dict[str, np.ndarray]
    layout: HilbertLayout
    spec: SystemSpec = field(repr=False, default=None)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def state(self, i: int) -> DensityState:
        return DensityState(self.states[i], float(self.times[i]))

    def index_of(self, t: float) -> int:
        i = (t - self.grid.t_start) / self.grid.dt
        if abs(i - round(i)) > 1e-6 or not 0 <= round(i) < self.grid.n_points:
            raise RangeError(f"t={t} ps is not a stored grid point")
        return int(round(i))


def expectation_operators(layout: HilbertLayout) -> dict[str, np.ndarray]:
    a, b = layout.mode_h(), layout.mode_v()
    ops = {f"pop_{i}": build_sigma(i, i, layout) for i in range(1, 5)}
    ops["n_h"] = dagger(a) @ a
    ops["n_v"] = dagger(b) @ b
    ops["b"] = b
    return ops


def _trace_rows(ops: dict[str, np.ndarray]):
    # Tr(A X) = vec(A^T) . vec(X) for row-major vec
    names = list(ops)
    rows = np.stack([ops[n].T.ravel() for n in names])
    return names, rows


def initial_state(layout: HilbertLayout, level: int = 1) -> DensityState:
    """QD in ``|level>``, both cavity modes in vacuum, at t = 0."""
    return DensityState.pure(layout.basis_state(level))


def propagate(initial: DensityState, spec: SystemSpec, grid: TimeGrid,
              layout: HilbertLayout | None = None, step: float = DEFAULT_STEP,
              generator: Liouvillian | None = None) -> Trajectory:
    """Integrate the master equation, storing ρ at every grid point."""
    layout = layout or HilbertLayout()
    gen = generator or Liouvillian(spec, layout)
    d = layout.total_dim
    if initial.rho.shape != (d, d):
        raise ValueError(f"initial state has shape {initial.rho.shape}, layout needs {(d, d)}")
    initial.check()
    if abs(initial.time - grid.t_start) > 1e-12:
        raise ValueError("initial state time must match grid start")

    times = grid.times
    states = np.empty((len(times), d, d), dtype=complex)
    x = initial.rho.reshape(-1, 1).astype(complex)
    states[0] = initial.rho
    for i in range(1, len(times)):
        x = gen.advance(x, times[i - 1], times[i], step)
        rho = x.reshape(d, d)
        drift = abs(np.trace(rho) - 1.0)
        if not drift <= 1e-6:
            raise IntegrationError(f"trace drift {drift:.2e} at t={times[i]:.4f} ps")
        # RK4 keeps the trace even when unstable; an unstable step shows up as purity > 1
        purity = float(np.vdot(x, x).real)
        if not purity <= 1.0 + 1e-6:
            raise IntegrationError(f"unstable step: purity {purity:.3g} at t={times[i]:.4f} ps")
        states[i] = rho

    names, rows = _trace_rows(expectation_operators(layout))
    values = rows @ states.reshape(len(times), -1).T
    expectations = {}
    for name, series in zip(names, values):
        expectations[name] = series if name == "b" else series.real.copy()
    return Trajectory(grid, states, expectations, layout, spec)


@dataclass
class TwoTimeGrid:
    t: np.ndarray
    tau: np.ndarray
    g1: np.ndarray  # <b†(t) b(t+τ)>
    g2: np.ndarray  # <b†(t) b†(t+τ) b(t+τ) b(t)>
    g2_pop: np.ndarray  # <b†b(t)> <b†b(t+τ)>
    mean_field: np.ndarray  # <b(t+τ)> <b†(t)>

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def dtau(self) -> float:
        return float(self.tau[1] - self.tau[0])


def regression_correlators(traj: Trajectory, spec: SystemSpec, tau_grid: TimeGrid,
                           t_end: float | None = None, step: float = DEFAULT_STEP,
                           generator: Liouvillian | None = None) -> TwoTimeGrid:
    """V-mode g¹ and g² on a (t, τ) grid by the quantum regression theorem.

    Both axes share the spacing ``tau_grid.dt``, which must be a whole
    multiple of the trajectory spacing; t runs over ``[0, t_end]`` (default
    ``tau_grid.t_end``). All modified operators are propagated together as
    columns of one batch.
    """
    layout = traj.layout
    gen = generator or Liouvillian(spec, layout)
    h = tau_grid.dt
    stride = h / traj.grid.dt
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise ValueError("tau spacing must be a whole multiple of the trajectory spacing")
    stride = int(round(stride))
    t_end = tau_grid.t_end if t_end is None else t_end
    n_t = int(round(t_end / h)) + 1
    n_tau = tau_grid.n_points
    last = (n_t - 1 + n_tau - 1) * h
    if last > traj.grid.t_end + 1e-9:
        raise RangeError(f"correlators need dynamics to {last:.3f} ps, "
                         f"trajectory ends at {traj.grid.t_end:.3f} ps")

    d = layout.total_dim
    b = layout.mode_v()
    bd = dagger(b)
    row_g1 = bd.T.ravel()
    row_g2 = (bd @ b).T.ravel()
    idx = [traj.index_of(k * h) for k in range(n_t + n_tau - 1)]
    n_v = traj.expectations["n_v"][idx]
    mean_b = traj.expectations["b"][idx]

    g1 = np.zeros((n_t, n_tau), dtype=complex)
    g2 = np.zeros((n_t, n_tau))
    # columns started before the drive switches off are integrated explicitly
    # up to grid index m_off; from there on every value comes from the rows
    # row @ exp(L0 h j), so undriven evolution is never applied to a batch.
    m_off = min(max(0, math.ceil(gen.off_time / h - 1e-9)), n_t - 1 + n_tau - 1)
    n_early = min(m_off, n_t)
    xi1 = np.zeros((d * d, n_t), dtype=complex)
    xi2 = np.zeros((d * d, n_t), dtype=complex)

    def start(k):
        rho = traj.states[idx[k]]
        br = b @ rho
        xi1[:, k] = br.ravel()
        xi2[:, k] = (br @ bd).ravel()

    for m in range(m_off):
        if m < n_t:
            start(m)
        lo, hi = max(0, m - n_tau + 1), min(m, n_t - 1) + 1
        rows = np.arange(lo, hi)
        g1[rows, m - rows] = row_g1 @ xi1[:, lo:hi]
        g2[rows, m - rows] = (row_g2 @ xi2[:, lo:hi]).real
        batch = np.hstack([xi1[:, lo:hi], xi2[:, lo:hi]])
        batch = gen.advance(batch, m * h, (m + 1) * h, step)
        w = hi - lo
        xi1[:, lo:hi] = batch[:, :w]
        xi2[:, lo:hi] = batch[:, w:]

    for k in range(n_early, n_t):
        start(k)
    w1 = gen.static_rows(row_g1, h, n_tau)
    w2 = gen.static_rows(row_g2, h, n_tau)
    s1, s2 = w1 @ xi1, (w2 @ xi2).real  # (n_tau, n_t): lag counted from base time
    for k in range(n_t):
        offset = max(k, m_off) - k
        if offset < n_tau:
            g1[k, offset:] = s1[: n_tau - offset, k]
            g2[k, offset:] = s2[: n_tau - offset, k]

    k = np.arange(n_t)[:, None]
    j = np.arange(n_tau)[None, :]
    g2_pop = n_v[k] * n_v[k + j]
    mean_field = mean_b[k + j] * np.conj(mean_b[k])
    return TwoTimeGrid(k[:, 0] * h, j[0] * h, g1, g2, g2_pop, mean_field)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Dump populations and V/H-mode moments, one row per stored time."""
    e = traj.expectations
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_ps", "pop_1", "pop_2", "pop_3", "pop_4", "n_h", "n_v", "re_b", "im_b"])
        for i, t in enumerate(traj.times):
            w.writerow([repr(float(t))] + [repr(float(e[f"pop_{q}"][i])) for q in range(1, 5)]
                       + [repr(float(e["n_h"][i])), repr(float(e["n_v"][i])),
                          repr(float(e["b"][i].real)), repr(float(e["b"][i].imag))])
