"""Pulsed backward stimulated Brillouin scattering toolkit.

Subpackages
-----------
model
    Waveguide parameters, pump envelopes, and derived scalars (thermal
    occupancy, effective coupling, pulse area, depletion threshold).
propagator
    Per-wavevector-channel Langevin engine: drift matrices, closed-form /
    numeric / eta-ordered propagators, moment evolution with thermal noise.
dynamics
    Stochastic (z, t) coupled-mode Monte Carlo simulator on a
    characteristic-aligned lattice, spectra, and ensemble statistics.
analysis
    Figures of merit: coherent-transfer efficiency, cooling spectra,
    photon-phonon entanglement (Duan criterion), Stokes intensity estimate.
cli
    Batch front end producing CSV/JSON/binary artifacts with manifests.
"""

__version__ = "0.1.0"

from .model import (
    ParameterFileError,
    PumpEnvelope,
    ThermalEnvironment,
    UndepletedWindowError,
    WaveguideSpec,
    coupling_from_power,
    coupling_ratio,
    load_waveguide_spec,
    pulse_area,
    reference_params_path,
    reference_spec,
    thermal_occupation,
    undepleted_margin,
)
from .propagator import (
    ANTI_STOKES,
    STOKES,
    ChannelMoments,
    ChannelParams,
    ClosedFormValidityError,
    EffectiveParams,
    Propagator2,
    drift_matrix,
    evolve_moments,
    propagator_closed_form,
    propagator_numeric,
    propagator_time_ordered,
)
