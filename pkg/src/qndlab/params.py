"""Physical parameter containers for the optomechanical model.

All quantities are stored in SI units with angular frequencies (rad/s).
Configuration layers accept Hz and convert once on load.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as c_light
from scipy.constants import hbar
from scipy.constants import k as k_boltzmann

from .errors import ConfigError, NonConvergence

TWO_PI = 2.0 * np.pi


def thermal_occupancy(omega: float, temperature: float) -> float:
    """Bose occupancy 1/(exp(hbar*omega/kT) - 1); zero at T = 0."""
    if temperature == 0.0:
        return 0.0
    x = hbar * omega / (k_boltzmann * temperature)
    return 1.0 / np.expm1(x)


@dataclass(frozen=True)
class MechanicalParams:
    """Mechanical oscillator: resonance, damping, mass, bath temperature."""

    omega_m: float
    gamma_m: float
    mass: float
    temperature: float

    def __post_init__(self):
        if self.omega_m <= 0 or self.gamma_m <= 0 or self.mass <= 0:
            raise ConfigError("omega_m, gamma_m and mass must be positive")
        if self.temperature < 0:
            raise ConfigError("temperature must be non-negative")

    @property
    def quality_q(self) -> float:
        return self.omega_m / self.gamma_m

    @property
    def n_thermal(self) -> float:
        """Thermal occupancy of the mode at its resonance frequency."""
        return thermal_occupancy(self.omega_m, self.temperature)


@dataclass(frozen=True)
class CavityParams:
    """Optical cavity: decay rates, geometry and laser frequency.

    ``detuning`` is the effective detuning (including the static
    radiation-pressure shift); ``detuning0`` the bare one.  Exactly one of
    the two is required by the steady-state solver.
    """

    kappa1: float
    kappa2: float
    length: float
    omega_laser: float
    detuning: float | None = None
    detuning0: float | None = None

    def __post_init__(self):
        if self.kappa1 <= 0 or self.kappa2 < 0:
            raise ConfigError("kappa1 must be > 0 and kappa2 >= 0")
        if self.length <= 0 or self.omega_laser <= 0:
            raise ConfigError("length and omega_laser must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa1 + self.kappa2

    def with_detuning(self, detuning: float) -> "CavityParams":
        return replace(self, detuning=detuning, detuning0=None)


@dataclass(frozen=True)
class ZetaModel:
    """Cavity phase-noise spectrum: Lorentzian peaks plus 1/omega^2 tails.

    ``peaks`` is a sequence of (center, half-width, peak amplitude) triples
    in rad/s and rad^2/s^2 * s; ``background`` is the amplitude of the
    1/omega^2 term.  All amplitudes refer to the double-sided spectral
    density in angular-frequency convention.
    """

    peaks: tuple[tuple[float, float, float], ...] = ()
    background: float = 0.0

    def __post_init__(self):
        if self.background < 0 or any(a < 0 for _, _, a in self.peaks):
            raise ConfigError("zeta model amplitudes must be non-negative")

    def psd(self, omega):
        """Evaluate S_zeta(omega); even in omega, finite at omega = 0."""
        w = np.abs(np.asarray(omega, dtype=float))
        out = np.zeros_like(w)
        for center, width, amp in self.peaks:
            out += amp * width**2 / ((w - center) ** 2 + width**2)
        if self.background:
            floor = 1.0  # rad/s; keeps the 1/omega^2 tail finite at DC
            out += self.background / np.maximum(w, floor) ** 2
        return out

    def scaled(self, factor: float) -> "ZetaModel":
        return ZetaModel(
            peaks=tuple((c, w, a * factor) for c, w, a in self.peaks),
            background=self.background * factor,
        )


@dataclass(frozen=True)
class DriveParams:
    """Input laser drive and its classical amplitude-noise model."""

    power: float
    s_epsilon: float | None = None
    excess_noise_ref_power: float = 24e-3

    def __post_init__(self):
        if self.power < 0:
            raise ConfigError("power must be non-negative")

    def e0(self, cavity: CavityParams) -> float:
        """Drive amplitude sqrt(2*kappa1*P/hbar*omega0), taken real."""
        return np.sqrt(2.0 * cavity.kappa1 * self.power / (hbar * cavity.omega_laser))

    def epsilon_psd(self) -> float:
        """Spectral density of the excess amplitude noise (SQL units)."""
        if self.s_epsilon is not None:
            return self.s_epsilon
        return 0.25 * self.power / self.excess_noise_ref_power


@dataclass(frozen=True)
class DetectionParams:
    """Detection chain: efficiencies, interferometer powers and lock phase."""

    eta_meter: float
    eta_signal: float
    eta_modematch: float
    phi0: float = 0.0
    p_cavity_arm: float = 36.5e-3
    p_reference_arm: float = 6e-6

    def __post_init__(self):
        for name in ("eta_meter", "eta_signal", "eta_modematch"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.p_cavity_arm + self.p_reference_arm <= 0:
            raise ConfigError("total interferometer power must be positive")


@dataclass(frozen=True)
class CouplingState:
    """Self-consistent steady state of the driven optomechanical cavity."""

    g0: float
    g: complex
    alpha_s: complex
    q_s: float
    p_s: float
    detuning: float

    @property
    def n_cavity(self) -> float:
        return abs(self.alpha_s) ** 2


@dataclass(frozen=True)
class ComplexSpectrum:
    """A complex quantity sampled on a strictly increasing frequency grid."""

    frequencies: np.ndarray
    values: np.ndarray
    meaning: str = ""

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        v = np.asarray(self.values)
        if f.ndim != 1 or np.any(np.diff(f) <= 0):
            raise ConfigError("frequencies must be a strictly increasing 1-d grid")
        if v.shape != f.shape or not np.all(np.isfinite(v)):
            raise ConfigError("values must be finite and match the grid")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SystemParams:
    """Full system description consumed by the spectrum and synthesis layers.

    ``thermal_force_scaling`` selects the Brownian-force spectrum: "flat"
    gives S_xi = 2*gamma_m*(n_T + 1/2); "frequency" multiplies by
    |omega|/omega_m (structural damping variant).
    """

    mech: MechanicalParams
    cavity: CavityParams
    drive: DriveParams
    det: DetectionParams
    zeta: ZetaModel = field(default_factory=ZetaModel)
    thermal_force_scaling: str = "flat"
    signal_phase: float | None = None

    def __post_init__(self):
        if self.thermal_force_scaling not in ("flat", "frequency"):
            raise ConfigError("thermal_force_scaling must be 'flat' or 'frequency'")

    def effective_drive(self) -> DriveParams:
        """Drive seen by the cavity mode: power reduced by mode matching."""
        return replace(self.drive, power=self.drive.power * self.det.eta_modematch)

    def xi_psd(self, omega):
        """Brownian force spectral density in zero-point-normalized units."""
        base = 2.0 * self.mech.gamma_m * (self.mech.n_thermal + 0.5)
        if self.thermal_force_scaling == "frequency":
            return base * np.abs(np.asarray(omega, dtype=float)) / self.mech.omega_m
        return base * np.ones_like(np.asarray(omega, dtype=float))

    def vacuum_only(self) -> "SystemParams":
        """Variant with drive, classical noises and coupling switched off."""
        return replace(
            self,
            drive=replace(self.drive, power=0.0, s_epsilon=0.0),
            zeta=ZetaModel(),
            mech=replace(self.mech, temperature=0.0),
        )

    def config_hash(self) -> str:
        text = repr(self).encode()
        return hashlib.sha256(text).hexdigest()[:12]


def reference_defaults(
    detuning_in_kappa: float = -0.016,
    signal_phase: float = -24e-3,
    power: float = 38e-3,
    temperature: float = 5.6,
    zeta: ZetaModel | None = None,
) -> SystemParams:
    """System parameters of the reference micro-mirror experiment.

    The zeta amplitudes are pipeline defaults (free parameters of the
    underlying instrument), chosen so the model curves show the reference
    sub-SQL residual and squeezing behaviour.
    """
    mech = MechanicalParams(
        omega_m=TWO_PI * 169334.0,
        gamma_m=TWO_PI * 169334.0 / 1.1e6,
        mass=2.5e-7,
        temperature=temperature,
    )
    kappa1 = TWO_PI * 2.58e6
    kappa2 = TWO_PI * 0.27e6
    cavity = CavityParams(
        kappa1=kappa1,
        kappa2=kappa2,
        length=1.455e-3,
        omega_laser=TWO_PI * c_light / 1064e-9,
        detuning=detuning_in_kappa * (kappa1 + kappa2),
    )
    drive = DriveParams(power=power)
    det = DetectionParams(eta_meter=0.03, eta_signal=0.69, eta_modematch=0.90)
    if zeta is None:
        zeta = default_zeta_model()
    return SystemParams(
        mech=mech,
        cavity=cavity,
        drive=drive,
        det=det,
        zeta=zeta,
        signal_phase=signal_phase,
    )


def default_zeta_model() -> ZetaModel:
    """Cavity phase-noise defaults: 208 kHz unbalanced mode, 22 kHz wheel
    mode remnant, 1/omega^2 tails of low-frequency modes.

    The background level is the one free knob of the noise model; the
    default keeps the two-channel residual sub-SQL over roughly 1.6 kHz
    above the optical spring peak while leaving a finite squeezing window
    at the larger-detuning working point.
    """
    return ZetaModel(
        peaks=(
            (TWO_PI * 208e3, TWO_PI * 2e3, 120.0),
            (TWO_PI * 22e3, TWO_PI * 1e3, 300.0),
        ),
        background=6.0e11,
    )
