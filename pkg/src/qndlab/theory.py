"""Analytic spectra: simplified single-mode model and full cavity model.

All spectra are symmetrized, double-sided, and normalized so that a pure
vacuum field has unit quadrature spectral density at every frequency and
phase (SQL = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDenominator
from .om_core import (
    CLASSICAL_CHANNELS,
    SOURCE_GROUPS,
    VACUUM_CHANNELS,
    mech_susceptibility,
    optical_susceptibility,
    output_port_coefficients,
    quadrature_phases,
    steady_state,
)
from .params import MechanicalParams, SystemParams

# ---------------------------------------------------------------------------
# Simplified model (single oscillator, resonant lossless cavity)
# ---------------------------------------------------------------------------

READOUT_MODES = ("sql", "quantum_limit", "fixed_imprecision")


@dataclass(frozen=True)
class SimpleModelParams:
    """Parameters of the simplified QND model.

    Rates are constants at the mechanical resonance; ``kappa=None`` takes
    the bad-cavity limit chi_opt = 1.  ``r_param`` is the readout-noise
    parameter R; in "fixed_imprecision" mode it is multiplied pointwise by
    (1/(2*Im chi))*(1/gamma_m + gamma_m*|chi|^2).
    """

    omega_m: float
    gamma_m: float
    gamma_ba: float
    gamma_th: float
    r_param: float
    readout_mode: str = "quantum_limit"
    phi: float = 0.0
    kappa: float | None = None
    gamma_th_scaling: str = "constant"  # or "frequency"

    def __post_init__(self):
        if self.readout_mode not in READOUT_MODES:
            raise ConfigError(f"readout_mode must be one of {READOUT_MODES}")
        if self.gamma_th_scaling not in ("constant", "frequency"):
            raise ConfigError("gamma_th_scaling must be 'constant' or 'frequency'")
        if self.r_param < 0:
            raise ConfigError("r_param must be non-negative")

    def _mech(self) -> MechanicalParams:
        return MechanicalParams(
            omega_m=self.omega_m, gamma_m=self.gamma_m, mass=1.0, temperature=0.0
        )

    def chi(self, omega):
        return mech_susceptibility(self._mech(), omega)

    def chi_opt(self, omega):
        if self.kappa is None:
            return np.ones_like(np.asarray(omega, dtype=float), dtype=complex)
        return optical_susceptibility(self.kappa, omega)

    def gamma_th_at(self, omega):
        if self.gamma_th_scaling == "frequency":
            return self.gamma_th * np.abs(np.asarray(omega, dtype=float)) / self.omega_m
        return self.gamma_th * np.ones_like(np.asarray(omega, dtype=float))

    def cooperativity(self, omega):
        """C(omega) = Gamma_BA * |chi_opt|^2 / Gamma_th."""
        return self.gamma_ba * np.abs(self.chi_opt(omega)) ** 2 / self.gamma_th_at(omega)

    def r_at(self, omega):
        """Readout parameter R with its mode-dependent frequency weighting."""
        r = self.r_param * np.ones_like(np.asarray(omega, dtype=float))
        if self.readout_mode == "fixed_imprecision":
            chi = self.chi(omega)
            mult = (1.0 / (2.0 * chi.imag)) * (
                1.0 / self.gamma_m + self.gamma_m * np.abs(chi) ** 2
            )
            r = r * mult
        return r


def displacement_spectrum(params: SimpleModelParams, omega):
    """S_qq = 4*Gamma_th*|chi|^2 + |4*chi*chi_opt|^2 * Gamma_BA."""
    chi = params.chi(omega)
    chi_opt = params.chi_opt(omega)
    thermal = 4.0 * params.gamma_th_at(omega) * np.abs(chi) ** 2
    backaction = np.abs(4.0 * chi * chi_opt) ** 2 * params.gamma_ba
    return thermal + backaction


def readout_noise_spectrum(params: SimpleModelParams, omega):
    """Readout-noise spectrum S_qr for the selected readout model."""
    chi = params.chi(omega)
    if params.readout_mode == "sql":
        return 2.0 * np.abs(chi)
    if params.readout_mode == "quantum_limit":
        return 2.0 * chi.imag
    return 1.0 / params.gamma_m + params.gamma_m * np.abs(chi) ** 2


def simple_residual_spectrum(params: SimpleModelParams, omega):
    """Residual uncertainty S_dX = (1 + C/(1+R))^-1 in SQL units."""
    c = params.cooperativity(omega)
    r = params.r_at(omega)
    return 1.0 / (1.0 + c / (1.0 + r))


def min_quadrature_spectrum(params: SimpleModelParams, omega):
    """Maximally squeezed output quadrature S_min = (1+sin^2(arg chi)*C)/(1+C)."""
    c = params.cooperativity(omega)
    s2 = np.sin(np.angle(params.chi(omega))) ** 2
    return (1.0 + s2 * c) / (1.0 + c)


def fixed_phase_output_spectrum(params: SimpleModelParams, phi, omega):
    """Spectrum of the output quadrature at fixed detection phase phi.

    Built from the input-output relations of the simplified model with
    vacuum inputs and thermal drive; phi = 0 returns 1 exactly.
    """
    chi = params.chi(omega)
    chi_opt = params.chi_opt(omega)
    # Coefficient of the amplitude input in the rotated quadrature; the
    # common exp(2i*phi_opt) prefactor drops from the moduli.
    amp = np.cos(phi) + 4.0 * params.gamma_ba * np.abs(chi_opt) ** 2 * chi * np.sin(phi)
    thermal = (
        params.gamma_ba
        * np.abs(chi_opt) ** 2
        * np.sin(phi) ** 2
        * 4.0
        * params.gamma_th_at(omega)
        * np.abs(chi) ** 2
    )
    # Symmetrize over +/- omega: chi(-w) = conj(chi(w)).
    amp_neg = np.cos(phi) + 4.0 * params.gamma_ba * np.abs(chi_opt) ** 2 * np.conj(
        chi
    ) * np.sin(phi)
    vac = 0.5 * (np.abs(amp) ** 2 + np.abs(amp_neg) ** 2) + np.sin(phi) ** 2
    return vac + thermal


# ---------------------------------------------------------------------------
# Full model
# ---------------------------------------------------------------------------

ALL_SOURCES = tuple(SOURCE_GROUPS)


def _active_channels(sources) -> set:
    channels = set()
    for s in sources:
        channels.update(SOURCE_GROUPS[s])
    return channels


def _classical_psd(system: SystemParams, channel: str, omega):
    if channel == "eps":
        return system.drive.epsilon_psd() * np.ones_like(omega)
    if channel == "zeta":
        return system.zeta.psd(omega)
    if channel == "xi":
        return system.xi_psd(omega)
    raise KeyError(channel)


class SpectrumModel:
    """Assembles quadrature spectra and cross-spectra of the detected ports.

    Coefficients are evaluated once per grid on +omega and -omega; spectra
    follow by summing channel contributions weighted by each channel's
    symmetrized input spectrum.
    """

    def __init__(self, system: SystemParams, omega):
        self.system = system
        self.omega = np.atleast_1d(np.asarray(omega, dtype=float))
        self.state = steady_state(
            system.mech, system.cavity, system.effective_drive()
        )
        self._pos = output_port_coefficients(system, self.omega, self.state)
        self._neg = output_port_coefficients(system, -self.omega, self.state)
        self.phi_r, self.phi_m, self.phi_s_lock = quadrature_phases(
            self.state, system.cavity, system.det
        )

    @property
    def phi_s(self) -> float:
        if self.system.signal_phase is not None:
            return self.system.signal_phase
        return self.phi_s_lock

    def _u(self, port, channel, phi):
        """Quadrature coefficient u(omega) and u(-omega) for one channel."""
        cp, cn = self._pos[port], self._neg[port]
        e_m, e_p = np.exp(-1j * phi), np.exp(1j * phi)
        if channel in VACUUM_CHANNELS:
            u_pos = cp.a[channel] * e_m + np.conj(cn.b[channel]) * e_p
            u_neg = cn.a[channel] * e_m + np.conj(cp.b[channel]) * e_p
        else:
            u_pos = cp.a[channel] * e_m + np.conj(cn.a[channel]) * e_p
            u_neg = np.conj(u_pos)
        return u_pos, u_neg

    def channel_contribution(self, port, channel, phi):
        """Contribution of one input channel to the port quadrature spectrum."""
        u_pos, u_neg = self._u(port, channel, phi)
        if channel in VACUUM_CHANNELS:
            return 0.5 * (np.abs(u_pos) ** 2 + np.abs(u_neg) ** 2)
        return np.abs(u_pos) ** 2 * _classical_psd(self.system, channel, self.omega)

    def quadrature_spectrum(self, port, phi, sources=ALL_SOURCES):
        """Port quadrature spectrum in SQL units.

        ``sources`` restricts the classical + vacuum channels counted; the
        port's own detection vacuum is part of the "detection" group.
        """
        active = _active_channels(sources)
        total = np.zeros_like(self.omega)
        for ch in VACUUM_CHANNELS + CLASSICAL_CHANNELS:
            if ch in active:
                total += self.channel_contribution(port, ch, phi)
        return total

    def cross_spectrum(self, phi_s=None, phi_m=None, sources=ALL_SOURCES):
        """Symmetrized cross-spectrum S_XsYm(omega) between the two ports."""
        phi_s = self.phi_s if phi_s is None else phi_s
        phi_m = self.phi_m if phi_m is None else phi_m
        active = _active_channels(sources)
        total = np.zeros_like(self.omega, dtype=complex)
        for ch in VACUUM_CHANNELS:
            if ch not in active:
                continue
            ux_pos, ux_neg = self._u("signal", ch, phi_s)
            uy_pos, uy_neg = self._u("meter", ch, phi_m)
            total += 0.5 * (ux_pos * np.conj(uy_pos) + np.conj(ux_neg) * uy_neg)
        for ch in CLASSICAL_CHANNELS:
            if ch not in active:
                continue
            wx, _ = self._u("signal", ch, phi_s)
            wy, _ = self._u("meter", ch, phi_m)
            total += wx * np.conj(wy) * _classical_psd(self.system, ch, self.omega)
        return total


def full_output_cross_spectra(
    system: SystemParams, omega, phi_s=None, phi_m=None, sources=ALL_SOURCES
):
    """S_XsXs, S_YmYm and S_XsYm on the grid, in SQL units.

    Returns a dict with keys "s_xs", "s_ym", "s_xy", "frequencies" plus the
    phases actually used.
    """
    model = SpectrumModel(system, omega)
    phi_s = model.phi_s if phi_s is None else phi_s
    phi_m = model.phi_m if phi_m is None else phi_m
    return {
        "frequencies": model.omega,
        "phi_s": phi_s,
        "phi_m": phi_m,
        "s_xs": model.quadrature_spectrum("signal", phi_s, sources),
        "s_ym": model.quadrature_spectrum("meter", phi_m, sources),
        "s_xy": model.cross_spectrum(phi_s, phi_m, sources),
    }


def coherence(s_xx, s_yy, s_xy):
    """Magnitude-squared coherence |S_xy|^2/(S_xx*S_yy)."""
    s_xx = np.asarray(s_xx, dtype=float)
    s_yy = np.asarray(s_yy, dtype=float)
    if np.any(s_xx <= 0) or np.any(s_yy <= 0):
        raise DegenerateDenominator("auto-spectra must be positive")
    return np.abs(np.asarray(s_xy)) ** 2 / (s_xx * s_yy)


def residual_spectrum_theory(s_xx, msc):
    """Optimal-prediction residual S_dX = S_xx * (1 - MSC)."""
    msc = np.asarray(msc, dtype=float)
    if np.any(msc < -1e-12) or np.any(msc > 1.0 + 1e-9):
        raise ConfigError("coherence must lie in [0, 1]")
    return np.asarray(s_xx, dtype=float) * np.clip(1.0 - msc, 0.0, None)


@dataclass(frozen=True)
class NoiseBudget:
    """Per-source decomposition of a spectrum.

    In the linear (port spectrum) mode, ``contributions`` sum to ``total``.
    In residual mode the entries are the cumulative-activation curves of
    the residual spectrum, ending at ``total``.
    """

    frequencies: np.ndarray
    total: np.ndarray
    contributions: dict
    residual_mode: bool = False


# Activation order for the residual-mode budget.
RESIDUAL_ORDER = ("laser", "cavity_loss", "thermal", "cavity_phase", "detection")


def noise_budget(
    system: SystemParams, port, phi, omega, residual: bool = False
) -> NoiseBudget:
    """Noise budget of a port spectrum, or of the residual spectrum.

    Linear mode returns one additive contribution per source group.
    Residual mode activates the sources cumulatively (laser, + cavity
    losses, + thermal, + cavity phase, + detection vacuum) and reports the
    residual spectrum at each stage.
    """
    model = SpectrumModel(system, omega)
    if phi is None:
        phi = model.phi_s if port == "signal" else model.phi_m
    if not residual:
        contributions = {}
        total = np.zeros_like(model.omega)
        for source, channels in SOURCE_GROUPS.items():
            part = np.zeros_like(model.omega)
            for ch in channels:
                part += model.channel_contribution(port, ch, phi)
            contributions[source] = part
            total += part
        return NoiseBudget(model.omega, total, contributions)

    contributions = {}
    active = []
    total = None
    for source in RESIDUAL_ORDER:
        active.append(source)
        s_xs = model.quadrature_spectrum("signal", model.phi_s, active)
        s_ym = model.quadrature_spectrum("meter", model.phi_m, active)
        s_xy = model.cross_spectrum(sources=active)
        with np.errstate(divide="ignore", invalid="ignore"):
            msc = np.where(
                (s_xs > 0) & (s_ym > 0),
                np.abs(s_xy) ** 2 / np.where(s_xs * s_ym > 0, s_xs * s_ym, 1.0),
                0.0,
            )
        total = s_xs * (1.0 - np.clip(msc, 0.0, 1.0))
        contributions["+".join(active)] = total
    return NoiseBudget(model.omega, total, contributions, residual_mode=True)


def default_omega_grid(system: SystemParams, n_points: int = 4096, half_span=None):
    """Angular-frequency grid centered on the mechanical resonance.

    Default half-span 2*pi*25 kHz covers the resonance region of interest.
    """
    if half_span is None:
        half_span = 2.0 * np.pi * 25e3
    center = system.mech.omega_m
    return np.linspace(center - half_span, center + half_span, n_points)
