"""Physical parameters and derived scalar quantities.

Conventions used throughout the package:

- All quantities are SI: rates and angular frequencies in rad/s, lengths in m,
  velocities in m/s, powers in W, temperatures in K.
- The acoustic dissipation ``Gamma`` is the *energy* decay rate of the phonon
  envelope: the amplitude equation carries ``-Gamma/2 * b`` so that
  ``<b^dag b> ~ exp(-Gamma * t)`` when the pump is off.  Every formula in the
  package uses this one convention.
- The effective coupling ``g`` is stored as a non-negative real.  The pump
  phase is irrelevant for all moment-level quantities; phases re-enter only
  through the explicit phase factors of the channel propagators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from scipy.constants import hbar, k as k_B

__all__ = [
    "WaveguideSpec",
    "PumpEnvelope",
    "ThermalEnvironment",
    "UndepletedMargin",
    "ParameterFileError",
    "UndepletedWindowError",
    "thermal_occupation",
    "coupling_from_power",
    "coupling_ratio",
    "pulse_area",
    "undepleted_margin",
    "load_waveguide_spec",
    "reference_params_path",
    "reference_spec",
]

PARAMS_KEYS = (
    "length_m",
    "c_g_m_per_s",
    "u_g_m_per_s",
    "gamma_ac_rad_per_s",
    "gamma_opt_rad_per_s",
    "gain_per_W_m",
    "Omega_rad_per_s",
    "omega_rad_per_s",
    "temperature_K",
)


class ParameterFileError(ValueError):
    """Malformed or incomplete waveguide parameter file."""


class UndepletedWindowError(ValueError):
    """No pulse length satisfies the undepleted condition in this regime."""


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")


def _require_positive(name, value):
    _require_finite(name, value)
    if value <= 0:
        raise ValueError(f"{name} must be strictly positive, got {value!r}")


def _require_nonnegative(name, value):
    _require_finite(name, value)
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value!r}")


@dataclass(frozen=True)
class WaveguideSpec:
    """Phase-matched parameters of one backward-Brillouin waveguide platform.

    Parameters
    ----------
    length : float
        Waveguide length L [m].
    optical_group_velocity : float
        Optical group velocity c_g at the pump/backscatter wavelength [m/s].
    acoustic_dissipation : float
        Phonon energy decay rate Gamma [rad/s] (see module docstring).
    brillouin_gain : float
        Steady-state Brillouin gain G [1/(W m)].
    phonon_angular_frequency : float
        Acoustic angular frequency Omega at phase matching [rad/s].
    optical_angular_frequency : float
        Optical angular frequency omega [rad/s].
    bath_temperature : float
        Acoustic bath temperature T [K].
    optical_dissipation : float, optional
        Optical amplitude-squared decay rate gamma [rad/s], default 0.
    acoustic_group_velocity : float, optional
        Acoustic group velocity u_g [m/s], default 0.  The channel theory and
        the closed forms assume u_g = 0.
    """

    length: float
    optical_group_velocity: float
    acoustic_dissipation: float
    brillouin_gain: float
    phonon_angular_frequency: float
    optical_angular_frequency: float
    bath_temperature: float
    optical_dissipation: float = 0.0
    acoustic_group_velocity: float = 0.0

    def __post_init__(self):
        _require_positive("length", self.length)
        _require_positive("optical_group_velocity", self.optical_group_velocity)
        _require_positive("acoustic_dissipation", self.acoustic_dissipation)
        _require_positive("brillouin_gain", self.brillouin_gain)
        _require_positive("phonon_angular_frequency", self.phonon_angular_frequency)
        _require_positive("optical_angular_frequency", self.optical_angular_frequency)
        _require_positive("bath_temperature", self.bath_temperature)
        _require_nonnegative("optical_dissipation", self.optical_dissipation)
        _require_nonnegative("acoustic_group_velocity", self.acoustic_group_velocity)
        if self.acoustic_group_velocity >= self.optical_group_velocity:
            raise ValueError("acoustic_group_velocity must be below optical_group_velocity")

    @property
    def transit_time(self):
        """Optical transit time L/c_g [s]."""
        return self.length / self.optical_group_velocity

    def thermal_occupation(self):
        """Mean thermal phonon occupancy of the acoustic bath."""
        return thermal_occupation(self.phonon_angular_frequency, self.bath_temperature)

    def supports_closed_form(self):
        """True when the small-optical-dissipation closed forms are valid (gamma <= Gamma/10)."""
        return self.optical_dissipation <= self.acoustic_dissipation / 10.0


@dataclass(frozen=True)
class PumpEnvelope:
    """Pump pulse as a piecewise-constant effective coupling waveform g(eta).

    ``segments`` is an ordered tuple of ``(duration_s, coupling_rad_per_s)``
    pairs; g(eta) is zero outside [0, total_duration].
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((float(d), float(g)) for d, g in self.segments)
        if not segs:
            raise ValueError("envelope needs at least one segment")
        for d, g in segs:
            _require_positive("segment duration", d)
            _require_nonnegative("segment coupling", g)
        object.__setattr__(self, "segments", segs)

    @classmethod
    def rectangular(cls, coupling, duration):
        """Single-segment pulse g(eta) = g for 0 <= eta < T, zero elsewhere."""
        return cls(((duration, coupling),))

    @property
    def total_duration(self):
        return sum(d for d, _ in self.segments)

    @property
    def max_coupling(self):
        return max(g for _, g in self.segments)

    def coupling_at(self, eta):
        """g(eta); zero before 0 and after the last segment."""
        if eta < 0.0:
            return 0.0
        t = 0.0
        for d, g in self.segments:
            t += d
            if eta < t:
                return g
        return 0.0

    def area(self):
        """Pulse area Theta = integral of g dt [rad]."""
        return sum(d * g for d, g in self.segments)

    def concatenated(self, other):
        """Envelope formed by running this pulse and then ``other``."""
        return PumpEnvelope(self.segments + other.segments)

    def boundaries(self):
        """Cumulative segment edge times, starting at 0."""
        edges = [0.0]
        for d, _ in self.segments:
            edges.append(edges[-1] + d)
        return tuple(edges)


@dataclass(frozen=True)
class ThermalEnvironment:
    """Bath occupancy n_th and initial phonon occupancy n_0 (after pre-cooling, n_0 < n_th is possible)."""

    n_th: float
    n_0: float = None

    def __post_init__(self):
        _require_nonnegative("n_th", self.n_th)
        if self.n_0 is None:
            object.__setattr__(self, "n_0", self.n_th)
        _require_nonnegative("n_0", self.n_0)

    @classmethod
    def from_spec(cls, spec, n_0=None):
        n_th = spec.thermal_occupation()
        return cls(n_th=n_th, n_0=n_th if n_0 is None else n_0)


def thermal_occupation(phonon_angular_frequency, temperature):
    """Bose-Einstein occupancy 1/(exp(hbar*Omega/k_B/T) - 1); 0 at T = 0."""
    _require_positive("phonon_angular_frequency", phonon_angular_frequency)
    _require_nonnegative("temperature", temperature)
    if temperature == 0.0:
        return 0.0
    x = hbar * phonon_angular_frequency / (k_B * temperature)
    if x > 700.0:  # exp overflow; occupancy is zero to double precision anyway
        return 0.0
    return 1.0 / math.expm1(x)


def coupling_from_power(spec, pump_power):
    """Effective coupling |g| = sqrt(G P Gamma c_g / 4) [rad/s]."""
    _require_nonnegative("pump_power", pump_power)
    return math.sqrt(
        spec.brillouin_gain
        * pump_power
        * spec.acoustic_dissipation
        * spec.optical_group_velocity
        / 4.0
    )


def coupling_ratio(spec, pump_power):
    """Dimensionless coupling ratio g/Gamma; coherent control needs > 1."""
    return coupling_from_power(spec, pump_power) / spec.acoustic_dissipation


def is_strong_coupling(spec, pump_power):
    return coupling_ratio(spec, pump_power) > 1.0


def pulse_area(envelope):
    """Pulse area Theta = sum of duration * coupling [rad]."""
    return envelope.area()


@dataclass(frozen=True)
class UndepletedMargin:
    """Outcome of the pulsed-depletion-threshold comparison.

    ``lhs`` is the Rabi area Theta/sqrt(2) [rad]; ``rhs`` the logarithmic
    threshold; the condition is satisfied when lhs < margin_factor * rhs.
    """

    lhs: float
    rhs: float
    satisfied: bool
    margin_factor: float


def undepleted_margin(spec, pump_power, envelope, margin_factor=0.5):
    """Evaluate the undepleted-pump condition for a pulse on this platform.

    The threshold compares the Rabi area (sqrt(2)/2) g T of a rectangular
    pulse against (1/4) ln(32 pi^2 I_p Omega^2 / (G Gamma c_g k_B^2 T^2
    omega^2)).  For non-rectangular envelopes the left side generalizes to
    Theta/sqrt(2).  "Much less than" is quantified as lhs < margin_factor *
    rhs (default 0.5); the threshold itself corresponds to margin_factor = 1.

    Raises
    ------
    UndepletedWindowError
        If the right-hand side is non-positive: no pulse length is
        undepleted in this parameter regime at this power.
    """
    _require_positive("pump_power", pump_power)
    if margin_factor <= 0:
        raise ValueError("margin_factor must be positive")
    lhs = envelope.area() / math.sqrt(2.0)
    kT = k_B * spec.bath_temperature
    argument = (
        32.0
        * math.pi**2
        * pump_power
        * spec.phonon_angular_frequency**2
        / (
            spec.brillouin_gain
            * spec.acoustic_dissipation
            * spec.optical_group_velocity
            * kT**2
            * spec.optical_angular_frequency**2
        )
    )
    if argument <= 1.0:
        raise UndepletedWindowError(
            "undepleted threshold is non-positive at this power; "
            "the undepleted model is invalid for any pulse length"
        )
    rhs = 0.25 * math.log(argument)
    return UndepletedMargin(
        lhs=lhs, rhs=rhs, satisfied=lhs < margin_factor * rhs, margin_factor=margin_factor
    )


_KEY_TO_FIELD = {
    "length_m": "length",
    "c_g_m_per_s": "optical_group_velocity",
    "u_g_m_per_s": "acoustic_group_velocity",
    "gamma_ac_rad_per_s": "acoustic_dissipation",
    "gamma_opt_rad_per_s": "optical_dissipation",
    "gain_per_W_m": "brillouin_gain",
    "Omega_rad_per_s": "phonon_angular_frequency",
    "omega_rad_per_s": "optical_angular_frequency",
    "temperature_K": "bath_temperature",
}


def load_waveguide_spec(path):
    """Load a WaveguideSpec from a flat ``name = value`` parameter file.

    One key per line, SI units, ``#`` starts a comment.  The full key set in
    PARAMS_KEYS is required; unknown or repeated keys are rejected.  Errors
    carry the offending line number.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParameterFileError(f"{path}: cannot read parameter file: {exc}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterFileError(f"{path}:{lineno}: expected 'name = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _KEY_TO_FIELD:
            raise ParameterFileError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterFileError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val.strip())
        except ValueError:
            raise ParameterFileError(
                f"{path}:{lineno}: value for {key!r} is not a number: {val.strip()!r}"
            ) from None
    missing = [k for k in PARAMS_KEYS if k not in values]
    if missing:
        raise ParameterFileError(f"{path}: missing required key(s): {', '.join(missing)}")
    kwargs = {_KEY_TO_FIELD[k]: v for k, v in values.items()}
    try:
        return WaveguideSpec(**kwargs)
    except ValueError as exc:
        raise ParameterFileError(f"{path}: {exc}") from exc


def reference_params_path():
    """Path of the bundled reference chalcogenide-platform parameter file."""
    return Path(__file__).parent / "reference" / "chalcogenide.params"


def reference_spec():
    """WaveguideSpec for the bundled reference platform."""
    return load_waveguide_spec(reference_params_path())
