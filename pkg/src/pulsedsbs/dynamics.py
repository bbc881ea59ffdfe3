"""Stochastic (z, t) coupled-mode simulator for backward Brillouin scattering.

First-principles Monte Carlo oracle for the channel theory: the three
envelopes (pump, backscattered wave, phonon) live on a characteristic-aligned
lattice (dz = c_g dt) so that optical advection is exact cell shifting, and
the in-cell interaction/dissipation is advanced by an explicit midpoint rule
sandwiched between exact exponential decay half-steps, with an exact
Ornstein-Uhlenbeck thermal kick on the phonon each step.

Fields are Wigner trajectories: c-number envelopes in photon/phonon-density
normalization whose symmetric-ordered moments reproduce the quantum ones for
the linear (undepleted) dynamics.  Every mode therefore carries a
half-quantum of vacuum noise: the thermal phonon field has per-cell variance
(n_th + 1/2)/dz, the optical inputs 1/(2 dz); the half-quantum is subtracted
again at readout (`SpectrumResult.occupancy`).

In undepleted mode the pump slot of the grid carries the effective coupling
g(z, t) in rad/s (the prescribed pump enters only through g); with
``deplete_pump`` it carries the pump amplitude in sqrt(photons/m) and the
bare coupling g0 = c_g sqrt(G Gamma hbar omega) / 2 converts between the
two.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import hbar

from .model import PumpEnvelope, WaveguideSpec
from .propagator import ANTI_STOKES, STOKES, _PROCESSES

__all__ = [
    "FieldGrid",
    "SimConfig",
    "SimResult",
    "SpectrumResult",
    "KappaResult",
    "NumericalError",
    "Simulator",
    "initialize_thermal",
    "step",
    "run",
    "spectrum",
    "channel_moments_mc",
    "ensemble_kappa",
    "pump_slice_losses",
    "bare_coupling",
    "default_time_step",
    "write_record",
    "read_record",
    "write_spectrum_csv",
]

RECORD_MAGIC = b"BPW1"
RECORD_VERSION = 1
_HEADER = struct.Struct("<4sIQddQQ")
_GUARD = 1e60  # blow-up guard on any field amplitude
OPTICAL_VACUUM_BIN = 0.25  # per-bin half-quantum of the bare co-moving optical mode
PHONON_VACUUM_BIN = 0.5


class NumericalError(RuntimeError):
    """Numerical blow-up or invariant violation during a simulation."""


def bare_coupling(spec):
    """g0 [rad/s per sqrt(photon/m)]: g = g0 |a_p| with |a_p|^2 = P/(hbar omega c_g)."""
    return 0.5 * spec.optical_group_velocity * math.sqrt(
        spec.brillouin_gain
        * spec.acoustic_dissipation
        * hbar
        * spec.optical_angular_frequency
    )


def default_time_step(spec, envelope, delta_max=None, resolution=0.05):
    """dt resolving the fastest dynamical scale, snapped so that dz divides L.

    dt <= resolution * min(1/g_max, 1/Gamma, 1/|c_g delta_max|); the lattice
    constraint dz = c_g dt then fixes N_z = L/dz to an integer.
    """
    scales = [1.0 / envelope.max_coupling if envelope.max_coupling > 0 else math.inf,
              1.0 / spec.acoustic_dissipation]
    if delta_max:
        scales.append(1.0 / abs(spec.optical_group_velocity * delta_max))
    dt_max = resolution * min(scales)
    if not math.isfinite(dt_max):
        dt_max = spec.transit_time / 64.0
    n_z = max(8, math.ceil(spec.length / (spec.optical_group_velocity * dt_max)))
    return spec.length / (n_z * spec.optical_group_velocity)


@dataclass
class FieldGrid:
    """Batched field state at one instant: arrays of shape (shots, N_z).

    Cell j sits at z_j = j dz; the co-moving label of cell j at step n is
    eta = (n - j) dt.  ``a_pump`` holds g(z) [rad/s] in undepleted mode and
    the pump amplitude [sqrt(photon/m)] when depleting.
    """

    process: str
    dz: float
    dt: float
    optical_group_velocity: float
    a_pump: np.ndarray
    a_scatter: np.ndarray
    b: np.ndarray
    deplete_pump: bool = False

    def __post_init__(self):
        if self.process not in _PROCESSES:
            raise ValueError(f"unknown process {self.process!r}")
        if abs(self.dz - self.optical_group_velocity * self.dt) > 1e-12 * self.dz:
            raise ValueError("lattice must be characteristic-aligned: dz = c_g * dt")
        for name in ("a_pump", "a_scatter", "b"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.ndim == 1:
                arr = arr[np.newaxis, :]
            setattr(self, name, arr)
        if not (self.a_pump.shape == self.a_scatter.shape == self.b.shape):
            raise ValueError("field arrays must share one (shots, N_z) shape")

    @property
    def shots(self):
        return self.b.shape[0]

    @property
    def z_samples(self):
        return self.b.shape[1]

    @property
    def length(self):
        return self.z_samples * self.dz

    @property
    def z(self):
        return np.arange(self.z_samples) * self.dz

    def photon_counts(self):
        """Per-shot (pump, backscatter, phonon) quanta currently in the domain."""
        dz = self.dz
        n_p = np.sum(np.abs(self.a_pump) ** 2, axis=1) * dz if self.deplete_pump else None
        n_s = np.sum(np.abs(self.a_scatter) ** 2, axis=1) * dz
        n_b = np.sum(np.abs(self.b) ** 2, axis=1) * dz
        return n_p, n_s, n_b


def empty_grid(process, shots, n_z, dz, dt, c_g, deplete_pump=False):
    shape = (shots, n_z)
    return FieldGrid(
        process=process,
        dz=dz,
        dt=dt,
        optical_group_velocity=c_g,
        a_pump=np.zeros(shape, complex),
        a_scatter=np.zeros(shape, complex),
        b=np.zeros(shape, complex),
        deplete_pump=deplete_pump,
    )


def _complex_normal(rng, shape, variance):
    """i.i.d. complex Gaussians with total variance <|x|^2> = variance."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def initialize_thermal(grid, n_th, seed, optical_vacuum=True, n_occupancy=None):
    """Fill the phonon field with i.i.d. thermal samples, variance (n + 1/2)/dz.

    ``n_occupancy`` overrides the initial occupancy (pre-cooled n_0 < n_th);
    optical fields get their vacuum half-quantum unless disabled.  The
    optical arrays must be empty beforehand.  Identical seeds give bitwise
    identical fields.
    """
    if np.any(grid.a_scatter) or (grid.deplete_pump and np.any(grid.a_pump)):
        raise ValueError("initialize_thermal expects empty optical fields")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n0 = n_th if n_occupancy is None else n_occupancy
    grid.b[...] = _complex_normal(rng, grid.b.shape, (n0 + 0.5) / grid.dz)
    if optical_vacuum:
        grid.a_scatter[...] = _complex_normal(rng, grid.b.shape, 0.5 / grid.dz)
    return grid


def _interaction_rates(grid, coupling_scale):
    """Per-cell complex coupling entering the local ODE."""
    if grid.deplete_pump:
        return coupling_scale * grid.a_pump
    return grid.a_pump  # already g(z, t) in rad/s


def _local_derivatives(process, deplete, g, a, b, coupling_scale):
    """Interaction part of the local ODE (decay handled separately)."""
    if process == ANTI_STOKES:
        da = -1j * g * b
        db = -1j * np.conj(g) * a
        dp = -1j * coupling_scale * a * np.conj(b) if deplete else None
    else:
        da = -1j * g * np.conj(b)
        db = -1j * g * np.conj(a)
        dp = -1j * coupling_scale * a * b if deplete else None
    return dp, da, db


def step(
    grid,
    g_at_boundary,
    noise_draw,
    *,
    acoustic_dissipation,
    optical_dissipation=0.0,
    n_th=0.0,
    coupling_scale=1.0,
    backscatter_in=None,
    outflow=None,
):
    """Advance the lattice by one dt (in place) and return the grid.

    One step is: interaction derivatives evaluated pointwise on the current
    state, exact advection by one cell (pump +z, backscatter -z, phonons
    static) carrying those start-point derivatives along their
    characteristics, a trapezoidal corrector at the common endpoint of the
    three characteristics through each cell, all sandwiched between exact
    exponential dissipation half-steps, and finally an exact
    Ornstein-Uhlenbeck thermal kick on the phonon (variance
    (n_th + 1/2)(1 - e^{-Gamma dt})/dz per cell).

    ``g_at_boundary`` is the value injected at z = 0: the effective coupling
    [rad/s] in undepleted mode, the pump amplitude when depleting.
    ``noise_draw`` is a Generator or a pre-drawn complex array of unit total
    variance and shape (shots, N_z + 1) — the last column feeds the
    backscatter vacuum inflow.  ``backscatter_in`` adds a deterministic seed
    amplitude at z = L.  ``outflow`` (dict) collects the cells leaving the
    domain this step.
    """
    dt, dz = grid.dt, grid.dz
    deplete = grid.deplete_pump
    if isinstance(noise_draw, np.random.Generator):
        noise = _complex_normal(noise_draw, (grid.shots, grid.z_samples + 1), 1.0)
    else:
        noise = np.asarray(noise_draw)

    # Strang half-step dissipation (exact exponentials)
    decay_b = math.exp(-0.25 * acoustic_dissipation * dt)
    decay_a = math.exp(-0.25 * optical_dissipation * dt)
    grid.b *= decay_b
    grid.a_scatter *= decay_a
    if deplete:
        grid.a_pump *= decay_a

    # start-point interaction derivatives on the pre-advection state
    g_cells = _interaction_rates(grid, coupling_scale)
    dp0, da0, db0 = _local_derivatives(
        grid.process, deplete, g_cells, grid.a_scatter, grid.b, coupling_scale
    )

    # advection: exact one-cell shifts; derivatives ride their characteristics
    if outflow is not None:
        outflow["backscatter"] = grid.a_scatter[:, 0].copy()
        outflow["pump"] = grid.a_pump[:, -1].copy()
    p_adv = np.empty_like(grid.a_pump)
    p_adv[:, 1:] = grid.a_pump[:, :-1]
    p_adv[:, 0] = g_at_boundary
    a_adv = np.empty_like(grid.a_scatter)
    a_adv[:, :-1] = grid.a_scatter[:, 1:]
    inflow = 0.0 if backscatter_in is None else backscatter_in
    a_adv[:, -1] = inflow + noise[:, -1] * math.sqrt(0.5 / dz)
    da_start = np.empty_like(da0)
    da_start[:, :-1] = da0[:, 1:]
    da_start[:, -1] = 0.0  # inflow cell: no interior start point
    if deplete:
        dp_start = np.empty_like(dp0)
        dp_start[:, 1:] = dp0[:, :-1]
        dp_start[:, 0] = 0.0

    # predictor (Euler along each characteristic) and trapezoidal corrector
    a_pred = a_adv + dt * da_start
    b_pred = grid.b + dt * db0
    if deplete:
        p_pred = p_adv + dt * dp_start
        g_end = coupling_scale * p_pred
    else:
        p_pred = p_adv
        g_end = p_adv
    dp1, da1, db1 = _local_derivatives(
        grid.process, deplete, g_end, a_pred, b_pred, coupling_scale
    )
    grid.a_scatter = a_adv + 0.5 * dt * (da_start + da1)
    grid.a_scatter[:, -1] += 0.5 * dt * da1[:, -1]  # boundary cell: endpoint Euler
    grid.b = grid.b + 0.5 * dt * (db0 + db1)
    if deplete:
        grid.a_pump = p_adv + 0.5 * dt * (dp_start + dp1)
        grid.a_pump[:, 0] += 0.5 * dt * dp1[:, 0]
    else:
        grid.a_pump = p_adv

    grid.b *= decay_b
    grid.a_scatter *= decay_a
    if deplete:
        grid.a_pump *= decay_a

    # exact OU thermal kick
    ou_var = (n_th + 0.5) * (1.0 - math.exp(-acoustic_dissipation * dt)) / dz
    if ou_var > 0.0:
        grid.b += noise[:, :-1] * math.sqrt(ou_var)
    return grid


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo run: platform, pump waveform, environment, and sampling.

    ``envelope`` is always the effective-coupling waveform g(eta) at z = 0;
    with ``deplete_pump`` it is converted to a pump amplitude through the
    bare coupling.  ``duration`` defaults to one optical transit L/c_g (the
    readout instant of the cooling-spectrum protocol).  ``delta_max`` is the
    largest wavevector offset the run must resolve (enters the dt rule).
    """

    spec: WaveguideSpec
    envelope: PumpEnvelope
    n_th: float
    seed: int
    shots: int = 1
    dt: float = None
    process: str = ANTI_STOKES
    deplete_pump: bool = False
    n_0: float = None
    duration: float = None
    delta_max: float = None
    optical_vacuum: bool = True
    noiseless: bool = False  # classical run: no Wigner sampling, no thermal kicks
    record: str = "final_state"  # final_state | spectra | time_series
    comoving_etas: tuple = ()

    def __post_init__(self):
        if self.process not in _PROCESSES:
            raise ValueError(f"unknown process {self.process!r}")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")
        if self.record not in ("final_state", "spectra", "time_series"):
            raise ValueError(f"unknown record mode {self.record!r}")
        if self.spec.acoustic_group_velocity != 0.0:
            raise ValueError(
                "the lattice simulator assumes u_g = 0 (phonons static on the grid)"
            )
        dt = self.dt if self.dt is not None else default_time_step(
            self.spec, self.envelope, self.delta_max
        )
        limit = self._dt_limit()
        if dt > limit * (1.0 + 1e-9):
            raise ValueError(
                f"dt = {dt:.3e} s violates the resolution rule dt <= {limit:.3e} s "
                "(0.05 * min(1/g_max, 1/Gamma, 1/|c_g delta_max|))"
            )
        n_z = round(self.spec.length / (self.spec.optical_group_velocity * dt))
        if abs(n_z * self.spec.optical_group_velocity * dt - self.spec.length) > 1e-9 * self.spec.length:
            raise ValueError("dz = c_g dt must divide the waveguide length")
        object.__setattr__(self, "dt", dt)

    def _dt_limit(self):
        scales = [1.0 / self.spec.acoustic_dissipation]
        if self.envelope.max_coupling > 0:
            scales.append(1.0 / self.envelope.max_coupling)
        if self.delta_max:
            scales.append(
                1.0 / abs(self.spec.optical_group_velocity * self.delta_max)
            )
        return 0.05 * min(scales)

    @property
    def n_z(self):
        return round(self.spec.length / (self.spec.optical_group_velocity * self.dt))

    @property
    def n_steps(self):
        duration = self.duration if self.duration is not None else self.spec.transit_time
        return round(duration / self.dt)

    @property
    def initial_occupancy(self):
        return self.n_th if self.n_0 is None else self.n_0


@dataclass
class SimResult:
    """Outcome of one Monte Carlo run."""

    config: SimConfig
    grid: FieldGrid
    initial_phonon: np.ndarray
    initial_backscatter: np.ndarray
    time: float
    outflow_backscatter: np.ndarray = None  # (steps, shots) complex
    outflow_pump: np.ndarray = None
    injected_pump: np.ndarray = None  # (steps,) boundary values
    comoving: dict = field(default_factory=dict)  # eta -> (a_diag, b_diag)


class Simulator:
    """Engine for one SimConfig; deterministic given the config seed."""

    def __init__(self, config):
        self.config = config
        spec = config.spec
        self.dt = config.dt
        self.dz = spec.optical_group_velocity * self.dt
        self.n_z = config.n_z
        self.coupling_scale = bare_coupling(spec) if config.deplete_pump else 1.0
        self.guard_interval = 64

    def boundary_value(self, n):
        """Injected pump value for step n (midpoint-of-cell sampling)."""
        g = self.config.envelope.coupling_at((n + 0.5) * self.dt)
        if self.config.deplete_pump:
            return g / self.coupling_scale
        return g

    def initial_grid(self, rng):
        grid = empty_grid(
            self.config.process,
            self.config.shots,
            self.n_z,
            self.dz,
            self.dt,
            self.config.spec.optical_group_velocity,
            self.config.deplete_pump,
        )
        if not self.config.noiseless:
            initialize_thermal(
                grid,
                self.config.n_th,
                rng,
                optical_vacuum=self.config.optical_vacuum,
                n_occupancy=self.config.initial_occupancy,
            )
        return grid

    def run(self, initial_backscatter=None, initial_phonon=None, backscatter_seed=None):
        """Execute the run; optional deterministic field hooks.

        ``initial_backscatter`` / ``initial_phonon`` map a z array to complex
        amplitudes added to the sampled initial fields; ``backscatter_seed``
        maps a boundary time [s] to the deterministic inflow at z = L.
        """
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        grid = self.initial_grid(rng)
        if initial_phonon is not None:
            grid.b += initial_phonon(grid.z)[np.newaxis, :]
        if initial_backscatter is not None:
            grid.a_scatter += initial_backscatter(grid.z)[np.newaxis, :]
        result = SimResult(
            config=cfg,
            grid=grid,
            initial_phonon=grid.b.copy(),
            initial_backscatter=grid.a_scatter.copy(),
            time=0.0,
        )
        n_steps = cfg.n_steps
        track_series = cfg.record == "time_series"
        if track_series:
            result.outflow_backscatter = np.empty((n_steps, cfg.shots), complex)
            result.outflow_pump = np.empty((n_steps, cfg.shots), complex)
            result.injected_pump = np.empty(n_steps, complex)
        diag_steps = {}
        for eta in cfg.comoving_etas:
            m = round(eta / self.dt)
            if abs(m * self.dt - eta) > 1e-9 * max(self.dt, abs(eta)):
                raise ValueError("comoving etas must be integer multiples of dt")
            if n_steps < m + self.n_z - 1:
                raise ValueError(
                    f"comoving diagonal at eta = {eta:.3e} s extends past the run "
                    f"window; needs duration >= {(m + self.n_z - 1) * self.dt:.3e} s"
                )
            diag_steps[m] = (
                np.empty((cfg.shots, self.n_z), complex),
                np.empty((cfg.shots, self.n_z), complex),
            )
            if m == 0:  # cell 0 of the eta = 0 diagonal is the initial state
                diag_steps[0][0][:, 0] = grid.a_scatter[:, 0]
                diag_steps[0][1][:, 0] = grid.b[:, 0]

        outflow = {} if track_series else None
        zero_noise = np.zeros((cfg.shots, self.n_z + 1), complex) if cfg.noiseless else None
        for n in range(n_steps):
            boundary = self.boundary_value(n)
            seed_in = None
            if backscatter_seed is not None:
                seed_in = backscatter_seed(n * self.dt)
            if cfg.noiseless:
                noise = zero_noise
            else:
                noise = _complex_normal(rng, (cfg.shots, self.n_z + 1), 1.0)
                if not cfg.optical_vacuum:
                    noise[:, -1] = 0.0
            step(
                grid,
                boundary,
                noise,
                acoustic_dissipation=cfg.spec.acoustic_dissipation,
                optical_dissipation=cfg.spec.optical_dissipation,
                n_th=cfg.n_th,
                coupling_scale=self.coupling_scale,
                backscatter_in=seed_in,
                outflow=outflow,
            )
            if track_series:
                result.outflow_backscatter[n] = outflow["backscatter"]
                result.outflow_pump[n] = outflow["pump"]
                result.injected_pump[n] = boundary
            for m, (a_diag, b_diag) in diag_steps.items():
                j = n + 1 - m
                if 0 <= j < self.n_z:
                    a_diag[:, j] = grid.a_scatter[:, j]
                    b_diag[:, j] = grid.b[:, j]
            if (n + 1) % self.guard_interval == 0 or n == n_steps - 1:
                peak = max(
                    np.max(np.abs(grid.a_scatter)),
                    np.max(np.abs(grid.b)),
                    np.max(np.abs(grid.a_pump)) if cfg.deplete_pump else 0.0,
                )
                if not math.isfinite(peak) or peak > _GUARD:
                    raise NumericalError(
                        f"field blow-up at step {n + 1}/{n_steps} (t = {(n + 1) * self.dt:.3e} s): "
                        f"peak amplitude {peak:.3e}"
                    )
        result.time = n_steps * self.dt
        result.comoving = {m * self.dt: v for m, v in diag_steps.items()}
        return result


def run(config, **hooks):
    """Run a SimConfig to completion (deterministic given the seed)."""
    return Simulator(config).run(**hooks)


# ---------------------------------------------------------------------------
# spectra and ensemble statistics
# ---------------------------------------------------------------------------


@dataclass
class SpectrumResult:
    """Windowed field spectrum on the 2 pi / window wavevector comb.

    ``occupancy`` is the per-bin quanta estimate window * <|f~|^2> - vacuum
    (vacuum = 1/2 for phonon bins, 1/4 for the bare co-moving optical bins).
    """

    delta: np.ndarray
    amplitude_mean: np.ndarray
    abs2_mean: np.ndarray
    abs2_stderr: np.ndarray
    occupancy: np.ndarray
    shots: int
    window_length: float


def _windowed_fft(fields, n_fft=None):
    """(1/N) sum_j f_j e^{-i Delta z_j} per shot, fftshifted."""
    fields = np.atleast_2d(fields)
    n = fields.shape[1] if n_fft is None else n_fft
    return np.fft.fftshift(np.fft.fft(fields, n=n, axis=1), axes=1) / n


def spectrum(fields, dz, vacuum=PHONON_VACUUM_BIN):
    """Ensemble spectrum of (shots, N) field samples over their full window.

    The transform is the length-normalized windowed Fourier integral
    (1/L) int f(z) e^{-i Delta z} dz on the delta grid 2 pi k / L; Parseval:
    sum_k |f~_k|^2 = (1/L) sum_j |f_j|^2 dz.
    """
    fields = np.atleast_2d(fields)
    shots, n = fields.shape
    window = n * dz
    ft = _windowed_fft(fields)
    delta = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(n, d=dz))
    abs2 = np.abs(ft) ** 2
    abs2_mean = abs2.mean(axis=0)
    stderr = (
        abs2.std(axis=0, ddof=1) / math.sqrt(shots) if shots > 1 else np.full(n, np.nan)
    )
    return SpectrumResult(
        delta=delta,
        amplitude_mean=ft.mean(axis=0),
        abs2_mean=abs2_mean,
        abs2_stderr=stderr,
        occupancy=window * abs2_mean - vacuum,
        shots=shots,
        window_length=window,
    )


def channel_moments_mc(a_diag, b_diag, dz, process, window=None):
    """Per-bin symmetric second moments of the channel pair from MC diagonals.

    Returns (delta, moments, stderr) where moments[k] is the 2x2 matrix
    (window-normalized) of <v v^+>_sym estimates for the channel at
    delta[k]: v = (a~, b~) for anti-Stokes and (a~, conj(b~(-delta))) for
    Stokes.  ``window`` slices the diagonal before transforming (to excise
    boundary-fed cells).
    """
    if window is not None:
        a_diag = a_diag[:, window]
        b_diag = b_diag[:, window]
    shots, n = a_diag.shape
    length = n * dz
    at = _windowed_fft(a_diag)
    bt = _windowed_fft(b_diag)
    if process == STOKES:
        # channel delta pairs a~(delta) with conj(b~(-delta))
        v2 = np.conj(np.roll(bt[:, ::-1], 1, axis=1))
    else:
        v2 = bt
    delta = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(n, d=dz))
    prods = np.empty((shots, n, 2, 2), complex)
    prods[:, :, 0, 0] = np.abs(at) ** 2
    prods[:, :, 1, 1] = np.abs(v2) ** 2
    prods[:, :, 0, 1] = at * np.conj(v2)
    prods[:, :, 1, 0] = np.conj(prods[:, :, 0, 1])
    moments = length * prods.mean(axis=0)
    stderr = (
        length * prods.std(axis=0, ddof=1) / math.sqrt(shots)
        if shots > 1
        else np.full((n, 2, 2), np.nan)
    )
    return delta, moments, stderr


@dataclass
class KappaResult:
    """Remained-phonon spectrum ratio with shot statistics."""

    delta: np.ndarray
    kappa: np.ndarray
    stderr: np.ndarray
    occupancy_pre: np.ndarray
    occupancy_post: np.ndarray
    shots: int
    readout_time: float
    warnings: tuple = ()


def ensemble_kappa(config, **hooks):
    """Remained-phonon spectrum after a cooling pulse, per wavevector bin.

    Runs the Monte Carlo, takes fixed-time phonon snapshots before the pulse
    and at the configured readout time (default: when the pump front leaves,
    t = L/c_g), and forms the vacuum-subtracted occupancy ratio per bin with
    propagated standard errors.
    """
    warnings = []
    if config.shots < 100:
        warnings.append(
            f"shots = {config.shots} < 100: standard errors are unreliable"
        )
    result = run(config, **hooks)
    dz = result.grid.dz
    n = result.grid.z_samples
    length = n * dz
    pre_ft = np.abs(_windowed_fft(result.initial_phonon)) ** 2
    post_ft = np.abs(_windowed_fft(result.grid.b)) ** 2
    delta = np.fft.fftshift(2.0 * math.pi * np.fft.fftfreq(n, d=dz))
    shots = config.shots
    occ_pre = length * pre_ft - PHONON_VACUUM_BIN
    occ_post = length * post_ft - PHONON_VACUUM_BIN
    pre_mean = occ_pre.mean(axis=0)
    post_mean = occ_post.mean(axis=0)
    kappa = post_mean / pre_mean
    if shots > 1:
        var = (
            occ_post.var(axis=0, ddof=1) / pre_mean**2
            + occ_pre.var(axis=0, ddof=1) * (post_mean / pre_mean**2) ** 2
        ) / shots
        stderr = np.sqrt(var)
    else:
        stderr = np.full(n, np.nan)
    return KappaResult(
        delta=delta,
        kappa=kappa,
        stderr=stderr,
        occupancy_pre=pre_mean,
        occupancy_post=post_mean,
        shots=shots,
        readout_time=result.time,
        warnings=tuple(warnings),
    )


def pump_slice_losses(result):
    """Per-slice pump transmission bookkeeping for a depleting time-series run.

    Pump slice n (injected during step n) exits after N_z - 1 more steps;
    returns (mean_loss_fraction, per_slice_loss) over the slices that both
    entered with non-negligible amplitude and fully crossed the domain.
    """
    if result.outflow_pump is None or not result.config.deplete_pump:
        raise ValueError("needs a depleting run with record='time_series'")
    n_z = result.grid.z_samples
    injected = result.injected_pump
    steps = len(injected)
    in_power = np.abs(injected) ** 2
    threshold = 1e-12 * in_power.max() if in_power.max() > 0 else 0.0
    out_power = np.abs(result.outflow_pump) ** 2  # (steps, shots)
    # slice s (injected during step s) leaves as the outflow of step s + N_z
    losses, weights = [], []
    for s in range(max(0, steps - n_z)):
        if in_power[s] > threshold:
            transmitted = out_power[s + n_z].mean() / in_power[s]
            losses.append(1.0 - transmitted)
            weights.append(in_power[s])
    if not losses:
        raise ValueError("no pump slice completed a transit inside the run window")
    per_slice = np.array(losses)
    weights = np.array(weights) / np.sum(weights)
    return float(np.sum(weights * per_slice)), per_slice


# ---------------------------------------------------------------------------
# artifacts: binary records and CSV spectra
# ---------------------------------------------------------------------------


def write_record(path, result):
    """Little-endian binary record of a run's final field state.

    Header: magic 'BPW1', version u32, N_z u64, dz f64, dt f64, shots u64,
    seed u64; then per shot the three complex64 arrays (pump slot,
    backscatter, phonon) interleaved in that order.
    """
    grid = result.grid
    header = _HEADER.pack(
        RECORD_MAGIC,
        RECORD_VERSION,
        grid.z_samples,
        grid.dz,
        grid.dt,
        grid.shots,
        result.config.seed,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for s in range(grid.shots):
            fh.write(np.ascontiguousarray(grid.a_pump[s], dtype=np.complex64).tobytes())
            fh.write(np.ascontiguousarray(grid.a_scatter[s], dtype=np.complex64).tobytes())
            fh.write(np.ascontiguousarray(grid.b[s], dtype=np.complex64).tobytes())


def read_record(path):
    """Read a BPW1 record; returns (header dict, a_pump, a_scatter, b)."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        magic, version, n_z, dz, dt, shots, seed = _HEADER.unpack(raw)
        if magic != RECORD_MAGIC:
            raise ValueError(f"not a BPW1 record: magic {magic!r}")
        if version != RECORD_VERSION:
            raise ValueError(f"unsupported record version {version}")
        payload = np.frombuffer(fh.read(), dtype=np.complex64)
    expected = 3 * shots * n_z
    if payload.size != expected:
        raise ValueError(f"truncated record: {payload.size} values, expected {expected}")
    fields = payload.reshape(shots, 3, n_z)
    header = {"version": version, "n_z": n_z, "dz": dz, "dt": dt, "shots": shots, "seed": seed}
    return header, fields[:, 0], fields[:, 1], fields[:, 2]


def write_spectrum_csv(path, spec_result):
    """RFC-4180 spectrum rows: delta_rad_per_m, re, im, abs2, stderr."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta_rad_per_m", "re", "im", "abs2", "stderr"])
        for k in range(len(spec_result.delta)):
            writer.writerow(
                [
                    repr(float(spec_result.delta[k])),
                    repr(float(spec_result.amplitude_mean[k].real)),
                    repr(float(spec_result.amplitude_mean[k].imag)),
                    repr(float(spec_result.abs2_mean[k])),
                    repr(float(spec_result.abs2_stderr[k])),
                ]
            )
