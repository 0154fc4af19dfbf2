"""DS-CDMA uplink space-time signal generator.

Synchronous multiuser uplink observed through a uniform linear antenna
array: random binary signatures, per-user three-path channels with
integer chip delays, per-path directions of arrival and slowly fading
complex gains, a high-power sinusoidal jammer, and white complex
Gaussian noise.  One received vector per symbol stacks the chip-rate
matched-filter outputs of all antennas, M = J * (N + L_p - 1) samples.

Fading gains follow an isotropic-scattering model realized as a sum of
equal-power sinusoids with uniformly spaced Doppler arrival angles and
random phases, so the lag-m autocorrelation of each path approximates
J0(2 pi f_dT m) and the time-averaged path powers match the configured
delay profile.

All randomness flows through the generator handed to ``make_scenario``;
a fixed seed reproduces the received stream bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "SystemGeometry",
    "UserSignature",
    "MultipathChannel",
    "ScenarioState",
    "generate_signatures",
    "build_convolution_matrix",
    "channel_vector",
    "draw_multipath_channel",
    "clarke_fading_step",
    "clarke_fading_series",
    "draw_user_powers",
    "make_scenario",
    "generate_received_vector",
    "simulate_packet",
    "qpsk_modulate",
    "qpsk_decide",
    "qpsk_bits",
]


@dataclass(frozen=True)
class SystemGeometry:
    """Sizes of the uplink: K users, N chips per symbol, J antennas,
    L_p channel taps in chips."""

    users: int
    spreading_gain: int
    antennas: int
    channel_taps: int

    def __post_init__(self):
        if min(self.users, self.spreading_gain, self.antennas, self.channel_taps) < 1:
            raise ValueError("all geometry sizes must be positive")

    @property
    def chips_per_antenna(self):
        return self.spreading_gain + self.channel_taps - 1

    @property
    def samples_per_symbol(self):
        """M = J * (N + L_p - 1)."""
        return self.antennas * self.chips_per_antenna


@dataclass(frozen=True)
class UserSignature:
    chips: np.ndarray     # (N,), entries +-1/sqrt(N)
    amplitude: float = 1.0


def generate_signatures(K, N, rng):
    """K random unit-norm binary signatures, chips i.i.d. +-1/sqrt(N)."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    signs = rng.integers(0, 2, size=(K, N)) * 2 - 1
    chips = signs / np.sqrt(N)
    return [UserSignature(chips=chips[k].copy()) for k in range(K)]


def build_convolution_matrix(sig, geometry):
    """M x (J*L_p) matrix performing per-antenna convolution of the
    signature with an L_p-tap channel, block-diagonal over antennas."""
    chips = sig.chips if isinstance(sig, UserSignature) else np.asarray(sig)
    N = geometry.spreading_gain
    if chips.shape[0] != N:
        raise ValueError(f"signature length {chips.shape[0]} != spreading gain {N}")
    Lp = geometry.channel_taps
    C = geometry.chips_per_antenna
    block = np.zeros((C, Lp))
    for tau in range(Lp):
        block[tau:tau + N, tau] = chips
    F = np.zeros((geometry.samples_per_symbol, geometry.antennas * Lp))
    for j in range(geometry.antennas):
        F[j * C:(j + 1) * C, j * Lp:(j + 1) * Lp] = block
    return F


@dataclass(frozen=True)
class MultipathChannel:
    """Per-user channel: three integer-delay paths, each with a direction
    of arrival and a slowly fading complex gain.

    Path gains at symbol i are sums of ``n_oscillators`` unit phasors
    with fixed Doppler frequencies 2 pi f_dT cos(angle) and random
    phases; amplitudes carry the normalized delay-power profile.
    """

    delays: np.ndarray        # (L,), strictly increasing int chip delays
    rel_powers: np.ndarray    # (L,), linear, sums to 1
    doas: np.ndarray          # (L,), radians
    doppler: float            # normalized Doppler f_d * T
    omegas: np.ndarray        # (L, n_osc) per-symbol phase increments
    phases: np.ndarray        # (L, n_osc)

    @property
    def n_paths(self):
        return self.delays.shape[0]


def draw_multipath_channel(rng, geometry, doppler=1e-4,
                           rel_powers_db=(0.0, -3.0, -6.0), n_oscillators=32):
    """Random channel: path spacings uniform in {1, 2} chips, uniform
    directions of arrival, independent fading oscillators per path."""
    n_paths = len(rel_powers_db)
    spacings = rng.integers(1, 3, size=n_paths - 1)
    delays = np.concatenate([[0], np.cumsum(spacings)]).astype(int)
    if delays[-1] > geometry.channel_taps - 1:
        raise ValueError(
            f"delay span {delays[-1]} exceeds channel length {geometry.channel_taps - 1}"
        )
    powers = 10.0 ** (np.asarray(rel_powers_db, dtype=float) / 10.0)
    powers = powers / powers.sum()
    doas = rng.uniform(0.0, np.pi, size=n_paths)
    # equally spaced arrival angles with a random rotation per path keep
    # the oscillator frequencies distinct and the J0 autocorrelation tight
    offsets = rng.uniform(0.0, 1.0, size=(n_paths, 1))
    angles = 2.0 * np.pi * (np.arange(n_oscillators)[None, :] + offsets) / n_oscillators
    omegas = 2.0 * np.pi * doppler * np.cos(angles)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_paths, n_oscillators))
    return MultipathChannel(
        delays=delays, rel_powers=powers, doas=doas, doppler=doppler,
        omegas=omegas, phases=phases,
    )


def clarke_fading_step(channel, i):
    """Complex path gains at symbol index i; E|gain_l|^2 equals the
    relative path power."""
    n_osc = channel.omegas.shape[1]
    amps = np.sqrt(channel.rel_powers / n_osc)
    return amps * np.exp(1j * (channel.omegas * i + channel.phases)).sum(axis=1)


def clarke_fading_series(channel, indices, chunk=65536):
    """Path gains over an index range, shape (len(indices), n_paths).

    Evaluated in chunks so long ranges stay within a few MB of scratch.
    """
    indices = np.asarray(indices, dtype=float)
    n_osc = channel.omegas.shape[1]
    amps = np.sqrt(channel.rel_powers / n_osc)
    out = np.empty((indices.shape[0], channel.n_paths), dtype=np.complex128)
    for lo in range(0, indices.shape[0], chunk):
        block = indices[lo:lo + chunk]
        phase = (block[:, None, None] * channel.omegas[None, :, :]
                 + channel.phases[None, :, :])
        out[lo:lo + chunk] = np.exp(1j * phase).sum(axis=2) * amps[None, :]
    return out


def draw_user_powers(K, rng, mean_snr_db=12.0, std_db=1.5, noise_power=1.0):
    """Per-user amplitudes with log-normally distributed powers: the power
    in dB is Normal(mean_snr_db, std_db^2) relative to the noise floor."""
    if K < 1:
        raise ValueError("K must be positive")
    powers_db = mean_snr_db + std_db * rng.standard_normal(K)
    return np.sqrt(noise_power * 10.0 ** (powers_db / 10.0))


_INV_SQRT2 = 1.0 / np.sqrt(2.0)


def qpsk_modulate(bits):
    """Gray-mapped unit-energy QPSK; bit pair (0, 0) maps to (1+1j)/sqrt(2).

    ``bits`` has pairs on the last axis.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] != 2:
        raise ValueError("last axis must hold bit pairs")
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) * _INV_SQRT2


def qpsk_decide(z):
    """Nearest QPSK constellation point (boundary ties go to the positive
    half-plane)."""
    z = np.asarray(z)
    re = np.where(z.real < 0, -1.0, 1.0)
    im = np.where(z.imag < 0, -1.0, 1.0)
    return (re + 1j * im) * _INV_SQRT2


def qpsk_bits(symbols):
    """Bit pairs of QPSK symbols, inverse of ``qpsk_modulate``."""
    symbols = np.asarray(symbols)
    return np.stack([(symbols.real < 0).astype(int),
                     (symbols.imag < 0).astype(int)], axis=-1)


@dataclass
class ScenarioState:
    """Everything needed to generate the received stream of one run.

    Single-writer: the per-symbol generator advances ``symbol_index`` and
    consumes the scenario's own noise stream.  Independent runs should
    hold independent scenarios seeded from independent generators.
    """

    geometry: SystemGeometry
    users: list
    channels: list
    noise_var: float
    jammer_freq: float
    jammer_phase: float
    jammer_amp: float
    jammer_doa: float = None      # None: plain tone over the stacked vector
    isi: bool = False
    rng: np.random.Generator = None
    symbol_index: int = 0
    _placements: tuple = field(default=None, repr=False)


def make_scenario(geometry, rng, snr_db=12.0, power_std_db=1.5,
                  jammer_offset_db=20.0, jammer_doa_structured=False,
                  doppler=1e-4, isi=False, noise_var=1.0,
                  rel_powers_db=(0.0, -3.0, -6.0), n_oscillators=32):
    """Draw a full scenario.  The jammer power sits ``jammer_offset_db``
    above the mean per-user SNR relative to the noise floor."""
    sigs = generate_signatures(geometry.users, geometry.spreading_gain, rng)
    amps = draw_user_powers(geometry.users, rng, mean_snr_db=snr_db,
                            std_db=power_std_db, noise_power=noise_var)
    users = [replace(s, amplitude=float(a)) for s, a in zip(sigs, amps)]
    channels = [draw_multipath_channel(rng, geometry, doppler=doppler,
                                       rel_powers_db=rel_powers_db,
                                       n_oscillators=n_oscillators)
                for _ in range(geometry.users)]
    jammer_freq = float(rng.uniform(0.0, 1.0))
    jammer_phase = float(rng.uniform(0.0, 2.0 * np.pi))
    jammer_amp = float(np.sqrt(noise_var * 10.0 ** ((snr_db + jammer_offset_db) / 10.0)))
    jammer_doa = float(rng.uniform(0.0, np.pi)) if jammer_doa_structured else None
    return ScenarioState(
        geometry=geometry, users=users, channels=channels, noise_var=noise_var,
        jammer_freq=jammer_freq, jammer_phase=jammer_phase, jammer_amp=jammer_amp,
        jammer_doa=jammer_doa, isi=isi, rng=rng,
    )


def channel_vector(channel, geometry, i):
    """Stacked per-antenna channel taps at symbol i, shape (J * L_p,).

    Tap ``delay_l`` of antenna j carries the path gain times the array
    phase exp(1j pi j cos(doa_l)); the 1/sqrt(J) factor keeps the
    expected energy of the composite signature at one.
    """
    gains = clarke_fading_step(channel, i)
    return _channel_from_gains(channel, geometry, gains)


def _channel_from_gains(channel, geometry, gains):
    J, Lp = geometry.antennas, geometry.channel_taps
    h = np.zeros(J * Lp, dtype=np.complex128)
    steer = np.exp(1j * np.pi * np.arange(J)[:, None] * np.cos(channel.doas)[None, :])
    for j in range(J):
        for l, tau in enumerate(channel.delays):
            h[j * Lp + tau] = gains[l] * steer[j, l] / np.sqrt(J)
    return h


def _placement_tensors(scenario):
    """Per-user per-path placement vectors (cached on the scenario).

    ``main[k, l]`` is the received contribution of a unit path gain of
    user k's path l in the current window; ``tail``/``head`` the spill of
    the previous/next symbol into it (edge intersymbol interference).
    """
    if scenario._placements is not None:
        return scenario._placements
    geo = scenario.geometry
    K, N = geo.users, geo.spreading_gain
    J, Lp, C, M = geo.antennas, geo.channel_taps, geo.chips_per_antenna, geo.samples_per_symbol
    n_paths = scenario.channels[0].n_paths
    main = np.zeros((K, n_paths, M), dtype=np.complex128)
    tail = np.zeros((K, n_paths, M), dtype=np.complex128)
    head = np.zeros((K, n_paths, M), dtype=np.complex128)
    for k, (user, ch) in enumerate(zip(scenario.users, scenario.channels)):
        chips = user.chips
        steer = np.exp(1j * np.pi * np.arange(J)[:, None] * np.cos(ch.doas)[None, :]) / np.sqrt(J)
        for l, tau in enumerate(ch.delays):
            for j in range(J):
                base = j * C
                main[k, l, base + tau: base + tau + N] = chips * steer[j, l]
                if tau > 0:
                    tail[k, l, base: base + tau] = chips[N - tau:] * steer[j, l]
                width = C - (N + tau)
                if width > 0:
                    head[k, l, base + N + tau: base + C] = chips[:width] * steer[j, l]
    scenario._placements = (main, tail, head)
    return scenario._placements


def _jammer_block(scenario, start, count):
    """Jammer samples for ``count`` symbols from index ``start``."""
    geo = scenario.geometry
    M, N, C, J = (geo.samples_per_symbol, geo.spreading_gain,
                  geo.chips_per_antenna, geo.antennas)
    idx = np.arange(start, start + count)
    if scenario.jammer_doa is None:
        # phase-continuous tone over the stacked sample index
        pos = idx[:, None] * M + np.arange(M)[None, :]
        return scenario.jammer_amp * np.exp(
            1j * (2.0 * np.pi * scenario.jammer_freq * pos + scenario.jammer_phase))
    # tone in chip time with an array signature
    chip = idx[:, None] * N + np.arange(C)[None, :]
    tone = np.exp(1j * (2.0 * np.pi * scenario.jammer_freq * chip + scenario.jammer_phase))
    steer = np.exp(1j * np.pi * np.arange(J) * np.cos(scenario.jammer_doa))
    return scenario.jammer_amp * (steer[None, :, None] * tone[:, None, :]).reshape(count, M)


def simulate_packet(scenario, symbols):
    """Received vectors for a block of symbols, shape (P, M).

    ``symbols`` holds one QPSK symbol per (symbol index, user).  Noise is
    drawn from the scenario's generator; fading and jammer phases advance
    from the scenario's current symbol index.  With ``isi`` enabled the
    adjacent symbols' channel tails leak into each window.
    """
    symbols = np.asarray(symbols, dtype=np.complex128)
    if symbols.ndim != 2 or symbols.shape[1] != scenario.geometry.users:
        raise ValueError(f"symbols must be (P, {scenario.geometry.users})")
    P = symbols.shape[0]
    geo = scenario.geometry
    M = geo.samples_per_symbol
    start = scenario.symbol_index

    main, tailp, headp = _placement_tensors(scenario)
    gains = np.stack([clarke_fading_series(ch, np.arange(start, start + P))
                      for ch in scenario.channels], axis=1)      # (P, K, L)
    amps = np.array([u.amplitude for u in scenario.users])
    w = amps[None, :, None] * symbols[:, :, None] * gains        # (P, K, L)
    r = np.einsum("ikl,klm->im", w, main)
    if scenario.isi and P > 1:
        r[1:] += np.einsum("ikl,klm->im", w[:-1], tailp)
        r[:-1] += np.einsum("ikl,klm->im", w[1:], headp)
    r += _jammer_block(scenario, start, P)
    noise = scenario.rng.standard_normal((P, M)) + 1j * scenario.rng.standard_normal((P, M))
    r += np.sqrt(scenario.noise_var / 2.0) * noise
    scenario.symbol_index = start + P
    return r


def generate_received_vector(scenario, symbols):
    """One received vector and the stacked desired vector x[i].

    ``symbols`` holds the K users' QPSK symbols for this interval.  The
    one-shot model applies (no edge intersymbol interference); use
    ``simulate_packet`` for blocks with the isi flag.
    """
    x = np.asarray(symbols, dtype=np.complex128).reshape(-1)
    if x.shape[0] != scenario.geometry.users:
        raise ValueError(f"expected {scenario.geometry.users} symbols")
    i = scenario.symbol_index
    main, _, _ = _placement_tensors(scenario)
    gains = np.stack([clarke_fading_step(ch, i) for ch in scenario.channels])  # (K, L)
    amps = np.array([u.amplitude for u in scenario.users])
    w = amps[:, None] * x[:, None] * gains
    r = np.einsum("kl,klm->m", w, main)
    r += _jammer_block(scenario, i, 1)[0]
    M = scenario.geometry.samples_per_symbol
    noise = scenario.rng.standard_normal(M) + 1j * scenario.rng.standard_normal(M)
    r += np.sqrt(scenario.noise_var / 2.0) * noise
    scenario.symbol_index = i + 1
    return r, x
