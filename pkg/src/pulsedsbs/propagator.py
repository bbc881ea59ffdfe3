"""Per-wavevector-channel Langevin engine.

Each Fourier channel of the backscattered interaction, labeled by its
wavevector offset ``delta`` from phase matching, evolves in the co-moving
coordinate eta under a 2x2 linear Langevin equation

    d/d eta (a, b)   = P_as (a, b)   + (0, sqrt(Gamma) xi)      anti-Stokes
    d/d eta (a, b^+) = P_s  (a, b^+) + (0, sqrt(Gamma) xi^+)    Stokes

with drift matrices

    P = [[-(gamma + 2i c_g delta)/4,  -i g/2],
         [        -/+ i g,            -(2i c_g delta + Gamma)/2]]

(upper sign anti-Stokes, lower sign Stokes).  This module builds the drift
matrices, exponentiates them (closed form, numeric, and eta-ordered segment
products), and evolves first and second field moments including the thermal
noise integral.

Basis and ordering conventions
------------------------------
The channel amplitude ``a`` used here is the bare co-moving Fourier
amplitude, whose canonical commutator is [a, a^+] = 1/2; the factor stems
from the doubled advection rate of the counter-propagating optical wave
(the rescaling A = sqrt(2) a restores a unit commutator and makes the
lossless drift matrices normal).  The second-moment matrix tracked by
:class:`ChannelMoments` is corr[i, j] = <v_i v_j^+>.  Thermal forcing is
standardized to <xi^+ xi> = n_th * delta and <xi xi^+> = (n_th + 1) * delta,
so the diffusion matrix feeding ``corr`` is diag(0, n_th) in the Stokes
basis (v_2 = b^+) and diag(0, n_th + 1) in the anti-Stokes basis (v_2 = b).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .model import PumpEnvelope, coupling_from_power

__all__ = [
    "STOKES",
    "ANTI_STOKES",
    "ChannelParams",
    "EffectiveParams",
    "Propagator2",
    "ChannelMoments",
    "ClosedFormValidityError",
    "QuadratureError",
    "drift_matrix",
    "propagator_numeric",
    "propagator_closed_form",
    "propagator_time_ordered",
    "propagator_between",
    "evolve_moments",
    "noise_moment_integral",
    "commutator_matrix",
    "adaptive_simpson",
]

STOKES = "stokes"
ANTI_STOKES = "anti_stokes"
_PROCESSES = (STOKES, ANTI_STOKES)

_IDENTITY = np.eye(2, dtype=complex)


class ClosedFormValidityError(ValueError):
    """Closed-form propagator requested outside its validity gate."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


def _check_process(process):
    if process not in _PROCESSES:
        raise ValueError(f"process must be one of {_PROCESSES}, got {process!r}")


@dataclass(frozen=True)
class ChannelParams:
    """Parameters of one wavevector channel.

    ``delta`` is the wavevector offset from phase matching [rad/m]; it enters
    the dynamics only through the detuning c_g * delta [rad/s].
    """

    process: str
    coupling: float                  # g [rad/s]
    acoustic_dissipation: float      # Gamma [rad/s]
    optical_dissipation: float = 0.0  # gamma [rad/s]
    delta: float = 0.0               # [rad/m]
    optical_group_velocity: float = 1.0  # c_g [m/s]

    def __post_init__(self):
        _check_process(self.process)
        if self.coupling < 0 or self.acoustic_dissipation < 0 or self.optical_dissipation < 0:
            raise ValueError("coupling and dissipation rates must be non-negative")
        if self.optical_group_velocity <= 0:
            raise ValueError("optical_group_velocity must be positive")

    @property
    def detuning(self):
        """c_g * delta [rad/s]."""
        return self.optical_group_velocity * self.delta

    @classmethod
    def from_spec(cls, spec, process, pump_power=None, coupling=None, delta=0.0):
        """Channel parameters for a waveguide platform at a given pump power (or explicit g)."""
        if (pump_power is None) == (coupling is None):
            raise ValueError("give exactly one of pump_power or coupling")
        if coupling is None:
            coupling = coupling_from_power(spec, pump_power)
        return cls(
            process=process,
            coupling=coupling,
            acoustic_dissipation=spec.acoustic_dissipation,
            optical_dissipation=spec.optical_dissipation,
            delta=delta,
            optical_group_velocity=spec.optical_group_velocity,
        )

    def with_delta(self, delta):
        return replace(self, delta=delta)

    def with_coupling(self, coupling):
        return replace(self, coupling=coupling)


@dataclass(frozen=True)
class EffectiveParams:
    """Resonance-modified effective coupling and dissipation of a channel.

    g_e = sqrt(g^2 - Gamma_e^2 / 8) for anti-Stokes and
    g_e = sqrt(g^2 + Gamma_e^2 / 8) for Stokes, with Gamma_e = Gamma +
    i c_g delta.  The square root is the principal branch (Re >= 0); the
    propagator entries are even under g_e -> -g_e, so the branch choice only
    fixes continuity along delta sweeps.

    ``include_optical_loss`` replaces Gamma by Gamma - gamma/2, which is the
    combination that diagonalizes the drift matrix exactly; the default is
    the gamma-free definition.
    """

    g_e: complex
    gamma_e: complex

    @classmethod
    def from_channel(cls, params, include_optical_loss=False):
        gamma_e = params.acoustic_dissipation + 1j * params.detuning
        if include_optical_loss:
            gamma_e -= 0.5 * params.optical_dissipation
        sign = -1.0 if params.process == ANTI_STOKES else 1.0
        g_e = np.sqrt(complex(params.coupling**2 + sign * gamma_e**2 / 8.0))
        if g_e.real < 0:
            g_e = -g_e
        return cls(g_e=g_e, gamma_e=gamma_e)


@dataclass(frozen=True)
class Propagator2:
    """2x2 complex channel propagator G(eta) with provenance tag."""

    entries: np.ndarray
    eta: float
    provenance: str  # closed_form | numeric_expm | time_ordered

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.shape != (2, 2):
            raise ValueError(f"propagator must be 2x2, got shape {entries.shape}")
        if not np.all(np.isfinite(entries.view(float))):
            raise ValueError("propagator entries must be finite")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, idx):
        return self.entries[idx]

    @property
    def matrix(self):
        return self.entries


def commutator_matrix(process):
    """Canonical commutator matrix C = <v v^+> - <v^+ v>^T of the channel basis.

    diag(1/2, 1) for anti-Stokes (v = (a, b)) and diag(1/2, -1) for Stokes
    (v = (a, b^+)); the 1/2 is the bare co-moving optical commutator.
    """
    _check_process(process)
    return np.diag([0.5, 1.0 if process == ANTI_STOKES else -1.0]).astype(complex)


def drift_matrix(params):
    """Drift matrix P of the channel Langevin equation."""
    g = params.coupling
    det = params.detuning
    lower = -1j * g if params.process == ANTI_STOKES else 1j * g
    return np.array(
        [
            [-(params.optical_dissipation + 2j * det) / 4.0, -0.5j * g],
            [lower, -(2j * det + params.acoustic_dissipation) / 2.0],
        ],
        dtype=complex,
    )


def propagator_numeric(P, eta):
    """Matrix exponential G(eta) = exp(P eta) via scipy's scaling-and-squaring."""
    P = np.asarray(P, dtype=complex)
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if not np.all(np.isfinite(P.view(float))):
        raise ValueError("drift matrix must be finite")
    return Propagator2(entries=expm(P * eta), eta=eta, provenance="numeric_expm")


def _sin_over_x(z):
    """sin(z)/z, stable near z = 0."""
    if abs(z) < 1e-6:
        return 1.0 - z * z / 6.0
    return cmath.sin(z) / z


def _sinh_over_x(z):
    if abs(z) < 1e-6:
        return 1.0 + z * z / 6.0
    return cmath.sinh(z) / z


def _closed_form_entries(params, eta):
    g = params.coupling
    gamma = params.optical_dissipation
    Gamma = params.acoustic_dissipation
    det = params.detuning
    # Exact diagonalization of the drift matrix: the traceless part has
    # diagonal +/- Gamma_x/4 with Gamma_x = Gamma - gamma/2 + i c_g delta.
    eff = EffectiveParams.from_channel(params, include_optical_loss=True)
    gamma_x, g_x = eff.gamma_e, eff.g_e
    prefactor = cmath.exp(-(2.0 * Gamma + gamma + 6j * det) * eta / 8.0)
    theta = g_x * eta / math.sqrt(2.0)
    if params.process == ANTI_STOKES:
        c = cmath.cos(theta)
        s_over_g = _sin_over_x(theta) * eta / math.sqrt(2.0)  # sin(theta)/g_x
        lower_sign = -1j
    else:
        c = cmath.cosh(theta)
        s_over_g = _sinh_over_x(theta) * eta / math.sqrt(2.0)
        lower_sign = 1j
    diag_shift = gamma_x / (2.0 * math.sqrt(2.0)) * s_over_g
    g11 = prefactor * (c + diag_shift)
    g12 = -1j * prefactor * g / math.sqrt(2.0) * s_over_g
    g21 = lower_sign * prefactor * math.sqrt(2.0) * g * s_over_g
    g22 = prefactor * (c - diag_shift)
    return np.array([[g11, g12], [g21, g22]], dtype=complex)


def closed_form_entries_grid(params, etas):
    """Closed-form propagator entries for an array of eta values, shape (n, 2, 2).

    Vectorized version of the constant-coupling closed form; no validity
    gate (internal building block for grid sweeps and spectra).
    """
    etas = np.asarray(etas, dtype=float)
    g = params.coupling
    gamma = params.optical_dissipation
    Gamma = params.acoustic_dissipation
    det = params.detuning
    eff = EffectiveParams.from_channel(params, include_optical_loss=True)
    gamma_x, g_x = eff.gamma_e, eff.g_e
    prefactor = np.exp(-(2.0 * Gamma + gamma + 6j * det) * etas / 8.0)
    theta = g_x * etas / math.sqrt(2.0)
    if params.process == ANTI_STOKES:
        c = np.cos(theta)
        raw = np.sin(theta)
        lower_sign = -1j
    else:
        c = np.cosh(theta)
        raw = np.sinh(theta)
        lower_sign = 1j
    small = np.abs(theta) < 1e-6
    series = 1.0 - theta * theta / 6.0 if params.process == ANTI_STOKES else 1.0 + theta * theta / 6.0
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(small, series, raw / np.where(small, 1.0, theta))
    s_over_g = sinc * etas / math.sqrt(2.0)
    diag_shift = gamma_x / (2.0 * math.sqrt(2.0)) * s_over_g
    out = np.empty(etas.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = prefactor * (c + diag_shift)
    out[..., 0, 1] = -1j * prefactor * g / math.sqrt(2.0) * s_over_g
    out[..., 1, 0] = lower_sign * prefactor * math.sqrt(2.0) * g * s_over_g
    out[..., 1, 1] = prefactor * (c - diag_shift)
    return out


def propagator_closed_form(params, eta):
    """Closed-form channel propagator for a constant coupling segment.

    The expressions are the Jordan-decomposition forms of the appendix-style
    sin/sinh propagators, kept exact in the optical dissipation (the
    traceless diagonal carries Gamma - gamma/2 rather than Gamma), so they
    agree with the numeric matrix exponential to machine precision.  The
    off-diagonal asymmetry is |G21| = 2 |G12| as dictated by the drift
    matrix.  Requested only inside the small-optical-dissipation regime
    gamma <= Gamma / 10.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if params.optical_dissipation > params.acoustic_dissipation / 10.0:
        raise ClosedFormValidityError(
            "closed form out of validity: needs optical_dissipation <= acoustic_dissipation/10 "
            f"(got gamma = {params.optical_dissipation:.3e}, Gamma = {params.acoustic_dissipation:.3e})"
        )
    return Propagator2(entries=_closed_form_entries(params, eta), eta=eta, provenance="closed_form")


def _segments_for_interval(envelope, eta1, eta2):
    """Constant-g pieces covering [eta1, eta2], padding with g = 0 outside the envelope."""
    if eta2 < eta1:
        raise ValueError("eta2 must be >= eta1")
    edges = list(envelope.boundaries())
    cuts = sorted({eta1, eta2, *(e for e in edges if eta1 < e < eta2)})
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            pieces.append((lo, hi, envelope.coupling_at(0.5 * (lo + hi))))
    return pieces


def propagator_between(envelope, params, eta1, eta2):
    """Two-time propagator G(eta2, eta1) for a piecewise-constant envelope.

    Later segments multiply from the left; exact for piecewise-constant g.
    ``params.coupling`` is ignored: the coupling comes from the envelope.
    """
    out = _IDENTITY
    for lo, hi, g in _segments_for_interval(envelope, eta1, eta2):
        seg = _closed_form_entries(params.with_coupling(g), hi - lo)
        out = seg @ out
    return out


def propagator_time_ordered(envelope, params, eta):
    """Eta-ordered propagator G(eta, 0) of Eq.-(18) type for a piecewise-constant pump.

    The ordered exponential reduces to a left-multiplied product of
    constant-g segment propagators; eta beyond the envelope support is
    covered by zero-coupling (free decay) segments.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    return Propagator2(
        entries=propagator_between(envelope, params, 0.0, eta),
        eta=eta,
        provenance="time_ordered",
    )


def adaptive_simpson(f, a, b, rtol=1e-8, breakpoints=(), max_depth=48, scale=None):
    """Adaptive composite Simpson rule for array-valued integrands.

    Subdivides at ``breakpoints`` first, then recursively until the local
    Richardson error estimate of every entry is below rtol * scale (scale
    defaults to the running magnitude of the integral).  Raises
    QuadratureError instead of silently returning a degraded result.
    """
    cuts = sorted({float(a), float(b), *(float(x) for x in breakpoints if a < x < b)})
    total = None
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        part = _simpson_segment(f, lo, hi, rtol, max_depth, scale)
        total = part if total is None else total + part
    return total


def _simpson_rule(fa, fm, fb, h):
    return (h / 6.0) * (fa + 4.0 * fm + fb)


def _simpson_segment(f, a, b, rtol, max_depth, scale):
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson_rule(fa, fm, fb, b - a)
    return _simpson_recurse(f, a, b, fa, fm, fb, whole, rtol, max_depth, scale)


def _simpson_recurse(f, a, b, fa, fm, fb, whole, rtol, depth, scale):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson_rule(fa, flm, fm, m - a)
    right = _simpson_rule(fm, frm, fb, b - m)
    refined = left + right
    err = np.max(np.abs(refined - whole))
    ref = scale if scale is not None else max(float(np.max(np.abs(refined))), 1e-300)
    if err <= 15.0 * rtol * ref:
        return refined + (refined - whole) / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"adaptive Simpson did not converge on [{a!r}, {b!r}]: "
            f"error estimate {err:.3e} vs target {rtol * ref:.3e}"
        )
    return _simpson_recurse(
        f, a, m, fa, flm, fm, left, rtol, depth - 1, scale
    ) + _simpson_recurse(f, m, b, fm, frm, fb, right, rtol, depth - 1, scale)


def noise_diffusion(process, n_th):
    """Diffusion matrix D entering corr <- G corr G^+ + Gamma * int G D G^+.

    The Langevin forcing is sqrt(Gamma) xi with <xi^+ xi> = n_th delta.
    The anti-Stokes corr tracks <b b^+>, driven by <xi xi^+> = (n_th + 1)
    delta; the Stokes corr tracks <b^+ b>, driven by <xi^+ xi> = n_th delta.
    """
    _check_process(process)
    d = n_th + 1.0 if process == ANTI_STOKES else float(n_th)
    return np.diag([0.0, d]).astype(complex)


def noise_moment_integral(params, envelope, eta, d_b=1.0, rtol=1e-8):
    """Gamma * int_0^eta G(eta, nu) diag(0, d_b) G(eta, nu)^+ d nu.

    Adaptive Simpson with subdivision at the envelope breakpoints; the
    two-time propagators are assembled from per-segment closed forms.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    D = np.diag([0.0, float(d_b)]).astype(complex)
    if eta == 0.0 or d_b == 0.0:
        return np.zeros((2, 2), dtype=complex)
    pieces = _segments_for_interval(envelope, 0.0, eta)
    # suffix[k] = G(eta, hi_k): propagator from the end of piece k to eta
    suffix = [_IDENTITY]
    for lo, hi, g in reversed(pieces[1:]):
        seg = _closed_form_entries(params.with_coupling(g), hi - lo)
        suffix.append(suffix[-1] @ seg)
    suffix.reverse()
    total = np.zeros((2, 2), dtype=complex)
    scale = None
    for (lo, hi, g), tail in zip(pieces, suffix):
        seg_params = params.with_coupling(g)

        def integrand(nu, _tail=tail, _p=seg_params, _hi=hi):
            G = _tail @ _closed_form_entries(_p, _hi - nu)
            return G @ D @ G.conj().T

        total = total + adaptive_simpson(integrand, lo, hi, rtol=rtol, scale=scale)
        magnitude = float(np.max(np.abs(total)))
        scale = magnitude if magnitude > 0.0 else None
    return params.acoustic_dissipation * total


@dataclass
class ChannelMoments:
    """First and second moments of one channel.

    ``mean`` is <v> and ``corr`` is the Hermitian matrix <v_i v_j^+>, with
    v = (a, b) for anti-Stokes and v = (a, b^+) for Stokes.
    """

    mean: np.ndarray
    corr: np.ndarray
    process: str

    def __post_init__(self):
        _check_process(self.process)
        self.mean = np.asarray(self.mean, dtype=complex).reshape(2)
        corr = np.asarray(self.corr, dtype=complex).reshape(2, 2)
        if not np.all(np.isfinite(corr.view(float))):
            raise ValueError("corr must be finite")
        if np.max(np.abs(corr - corr.conj().T)) > 1e-9 * max(1.0, np.max(np.abs(corr))):
            raise ValueError("corr must be Hermitian")
        self.corr = corr

    @classmethod
    def initial(cls, process, n_0=0.0, coherent_phonon=0.0, optical_seed=0.0):
        """Moments at eta = 0: optical vacuum (plus optional coherent seed) and
        a phonon mode of occupancy n_0 displaced by ``coherent_phonon``."""
        _check_process(process)
        beta = complex(coherent_phonon)
        alpha = complex(optical_seed)
        if process == ANTI_STOKES:
            mean = np.array([alpha, beta])
            nbb = n_0 + abs(beta) ** 2 + 1.0  # <b b^+>
        else:
            mean = np.array([alpha, beta.conjugate()])
            nbb = n_0 + abs(beta) ** 2  # <b^+ b>
        corr = np.diag([0.5 + abs(alpha) ** 2, nbb]).astype(complex)
        corr[0, 1] = mean[0] * mean[1].conjugate()
        corr[1, 0] = corr[0, 1].conjugate()
        return cls(mean=mean, corr=corr, process=process)

    def photon_occupancy(self):
        """<a^+ a> in the bare channel normalization."""
        return float(self.corr[0, 0].real - 0.5)

    def phonon_occupancy(self):
        """<b^+ b>."""
        if self.process == ANTI_STOKES:
            return float(self.corr[1, 1].real - 1.0)
        return float(self.corr[1, 1].real)

    def symmetric_corr(self):
        """Symmetrically ordered second moments, corr - C/2 (Wigner convention)."""
        return self.corr - 0.5 * commutator_matrix(self.process)


def evolve_moments(initial, params, envelope, n_th, eta, rtol=1e-8):
    """Propagate channel moments to eta under a piecewise-constant pump.

    mean <- G(eta, 0) mean;  corr <- G corr G^+ + Gamma * int_0^eta
    G(eta, nu) D G(eta, nu)^+ d nu with D = noise_diffusion(process, n_th).
    The noise integral uses adaptive Simpson at relative tolerance ``rtol``
    (QuadratureError on failure, never a silent fallback).
    """
    if initial.process != params.process:
        raise ValueError("initial moments and channel params disagree on the process")
    G = propagator_between(envelope, params, 0.0, eta)
    mean = G @ initial.mean
    corr = G @ initial.corr @ G.conj().T
    d_b = noise_diffusion(params.process, n_th)[1, 1].real
    corr = corr + noise_moment_integral(params, envelope, eta, d_b=d_b, rtol=rtol)
    return ChannelMoments(mean=mean, corr=corr, process=params.process)
