"""Monte Carlo downlink engine: per-trial pipeline and multi-scheme sweeps.

One trial drops a fresh channel, lets every user quantize its effective
stream directions against its own codebook, designs the precoder and power
allocation at the base station, sets the downlink powers equal to the uplink
ones, builds MMSE data decoders from perfect effective-channel knowledge and
pushes random symbols through ``y_k = H_k^H U sqrt(P) x + n``.  Empirical
sum MSE and hard-decision bit errors are recorded.

Sweeps pair the random draws across schemes and SNR points: trial ``t``
always sees the channel, payload bits and (unit-variance) noise derived from
``(base_seed, t)``, so scheme comparisons are paired and reproducible.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import combining, precoding
from .codebook import quantize_direction, train_msip_codebook
from .errors import DimensionError, LengthError
from .system import SeededRng, draw_channel

__all__ = [
    "Scheme",
    "TrialResult",
    "SweepPoint",
    "SweepResult",
    "modulate",
    "demodulate",
    "bits_per_symbol",
    "run_downlink_trial",
    "sweep",
    "train_user_codebooks",
]


class Scheme(enum.Enum):
    """Transceiver pipelines that can be compared in one sweep."""

    PROPOSED = "proposed"
    NAIVE_SMSE = "naive_smse"
    ZF_MET = "zf_met"
    ZF_QBC = "zf_qbc"
    ZF_MESC_SINGLE = "zf_mesc_single"
    QBC_MULTI = "qbc_multi"
    EIGEN_MULTI = "eigen_multi"
    FULL_CSI = "full_csi"


_SINGLE_STREAM_ONLY = {Scheme.ZF_MET, Scheme.ZF_QBC, Scheme.ZF_MESC_SINGLE}
_ZF_SCHEMES = {Scheme.ZF_MET, Scheme.ZF_QBC, Scheme.ZF_MESC_SINGLE}
_ERROR_AWARE = {Scheme.PROPOSED, Scheme.QBC_MULTI, Scheme.EIGEN_MULTI}

_BITS_PER_SYMBOL = {"bpsk": 1, "qpsk": 2}


def bits_per_symbol(constellation):
    try:
        return _BITS_PER_SYMBOL[constellation]
    except KeyError:
        raise LengthError(f"unknown constellation {constellation!r}") from None


def modulate(bits, constellation):
    """Map hard bits to unit-average-energy symbols (Gray-coded QPSK)."""
    bits = np.asarray(bits)
    bps = bits_per_symbol(constellation)
    if bits.shape[-1] % bps:
        raise LengthError(f"bit count not divisible by {bps}")
    if constellation == "bpsk":
        return (1.0 - 2.0 * bits).astype(complex)
    re = 1.0 - 2.0 * bits[..., 0::2]
    im = 1.0 - 2.0 * bits[..., 1::2]
    return (re + 1j * im) / np.sqrt(2.0)


def demodulate(symbols, constellation):
    """Minimum-distance hard decisions, inverse of :func:`modulate`."""
    symbols = np.asarray(symbols)
    bits_per_symbol(constellation)
    if constellation == "bpsk":
        return (symbols.real < 0).astype(np.int8)
    out = np.empty(symbols.shape[:-1] + (2 * symbols.shape[-1],), dtype=np.int8)
    out[..., 0::2] = symbols.real < 0
    out[..., 1::2] = symbols.imag < 0
    return out


@dataclass(frozen=True)
class TrialResult:
    """Measurements of one trial of one scheme at one SNR point."""

    empirical_smse: float
    bit_errors: tuple  # per stream
    bits_per_stream: int
    design_smse: float = None  # closed-form value; None for ZF designs

    @property
    def ber(self):
        total = self.bits_per_stream * len(self.bit_errors)
        return sum(self.bit_errors) / total if total else 0.0


@dataclass(frozen=True)
class SweepPoint:
    scheme: str
    snr_db: float
    smse_mean: float
    smse_stderr: float
    ber_mean: float
    ber_stderr: float
    trials: int
    symbols_per_trial: int
    seed: int


@dataclass(frozen=True)
class SweepResult:
    """Aggregated sweep output plus the raw per-trial metric arrays."""

    points: tuple
    per_trial: dict  # (scheme value, snr_db) -> {"smse": array, "ber": array}


def validate_scheme(config, scheme):
    scheme = Scheme(scheme)
    if scheme in _SINGLE_STREAM_ONLY and any(l != 1 for l in config.L_per_user):
        raise DimensionError(f"{scheme.value} requires a single stream per user")
    return scheme


def train_user_codebooks(config, base_seed, training_count=None,
                         max_iterations=200, tolerance=1e-6):
    """One codebook per user, trained offline with distinct derived seeds."""
    return tuple(
        train_msip_codebook(
            config.M, config.B, training_count=training_count,
            max_iterations=max_iterations, tolerance=tolerance,
            rng=SeededRng((int(base_seed), 0xC0DEB00C, k)),
        )
        for k in range(config.K)
    )


def _schedule_values(config, snr_db, interpolation):
    """Per-stream assumed error variances at this operating point."""
    return np.array([
        precoding.sigma_e_schedule(snr_db, config.B, config.M,
                                   config.N_per_user[k], i,
                                   interpolation=interpolation)
        for k, i in zip(config.stream_user, config.stream_within_user)
    ])


def _single_direction_report(h, codebook):
    """Feedback shortcut for a single-antenna user: quantize the channel."""
    result = quantize_direction(h[:, 0], codebook)
    return combining.FeedbackReport(
        indices=(result.index,), combiners=np.ones((1, 1), dtype=complex),
        sin2_theta=(result.sin2_theta,),
    )


def _combine_all_users(config, scheme, channel, codebooks, sigma2, assumed_se):
    """Run the scheme's quantization-time combiner for every user."""
    reports = []
    for k in range(config.K):
        H = channel.user(k)
        L_k = config.L_per_user[k]
        if scheme in (Scheme.PROPOSED, Scheme.NAIVE_SMSE, Scheme.ZF_MESC_SINGLE):
            if config.N_per_user[k] == 1:
                # SINR is monotone in |h^H w| when there is no combining
                # freedom, so plain chordal quantization selects identically.
                reports.append(_single_direction_report(H, codebooks[k]))
                continue
            se = 0.0 if scheme is not Scheme.PROPOSED else assumed_se
            assumptions = combining.ReceiverAssumptions(
                P=config.P_max, L=config.L, M=config.M, sigma2=sigma2, sigma2_E=se
            )
            reports.append(
                combining.mesc_combine_user(H, codebooks[k], L_k, assumptions)
            )
        elif scheme is Scheme.ZF_MET:
            reports.append(combining.met_combine(H, codebooks[k], L_k))
        elif scheme in (Scheme.ZF_QBC, Scheme.QBC_MULTI):
            reports.append(combining.qbc_combine(H, codebooks[k], L_k))
        elif scheme is Scheme.EIGEN_MULTI:
            reports.append(combining.eigen_combine(H, codebooks[k], L_k))
        else:
            raise DimensionError(f"scheme {scheme} has no feedback stage")
    return reports


def _design(config, scheme, channel, codebooks, sigma2, snr_db, interpolation):
    """Feedback + base-station design for one (scheme, SNR, channel) triple."""
    if scheme is Scheme.FULL_CSI:
        solution, _, _ = precoding.full_csi_iterative(
            channel, config.L_per_user, config.P_max, sigma2
        )
        return solution
    se_vec = None
    assumed = 0.0
    if scheme in _ERROR_AWARE:
        se_vec = _schedule_values(config, snr_db, interpolation)
        assumed = float(np.mean(se_vec))
    reports = _combine_all_users(config, scheme, channel, codebooks, sigma2, assumed)
    eff = precoding.EffectiveChannelSet.from_reports(config, reports, codebooks)
    if scheme in _ZF_SCHEMES:
        return precoding.zf_precoder(eff.F_hat, config.P_max)
    if scheme is Scheme.NAIVE_SMSE:
        return precoding.naive_smse_design(eff.F_hat, config.P_max, sigma2)
    return precoding.smse_design(eff.F_hat, config.P_max, sigma2, se_vec)


def _transmit(config, channel, design, sigma2, symbols, noise_unit):
    """Push symbols through the downlink and MMSE-decode every stream."""
    scaled = design.U * np.sqrt(design.p)
    received = channel.H.conj().T @ (scaled @ symbols)
    received += np.sqrt(sigma2) * noise_unit
    estimates = np.empty_like(symbols)
    row = 0
    for k in range(config.K):
        n_k = config.N_per_user[k]
        streams = list(range(*config.user_stream_slice(k).indices(config.L)))
        G = combining.mmse_decoder_block(
            channel.user(k), design.U, design.p, sigma2, streams
        )
        estimates[streams, :] = G.conj().T @ received[row:row + n_k, :]
        row += n_k
    return estimates


def _evaluate(config, scheme, sigma2, snr_db, channel, bits, noise_unit,
              codebooks, constellation, interpolation):
    design = _design(config, scheme, channel, codebooks, sigma2, snr_db,
                     interpolation)
    symbols = modulate(bits, constellation)
    estimates = _transmit(config, channel, design, sigma2, symbols, noise_unit)
    errors = np.sum(demodulate(estimates, constellation) != bits, axis=1)
    smse = float(np.sum(np.mean(np.abs(estimates - symbols) ** 2, axis=1)))
    return TrialResult(
        empirical_smse=smse,
        bit_errors=tuple(int(e) for e in errors),
        bits_per_stream=bits.shape[1],
        design_smse=design.smse,
    )


def _trial_draws(config, rng, symbols_per_trial, constellation, channel=None):
    """Fixed draw order so every scheme and SNR point shares the randomness."""
    if channel is None:
        channel = draw_channel(config, rng)
    bits = rng.bits((config.L, symbols_per_trial * bits_per_symbol(constellation)))
    noise_unit = rng.complex_gaussian((config.N, symbols_per_trial))
    return channel, bits, noise_unit


def run_downlink_trial(config, scheme, snr_db, symbols_per_trial, rng,
                       codebooks=None, constellation="qpsk",
                       interpolation="db", channel=None):
    """Execute one Monte Carlo trial of one scheme at one SNR point.

    The noise variance is set from the SNR axis as
    ``sigma^2 = P_max * 10^(-snr_db/10)``.  ``codebooks`` holds one trained
    codebook per user (not needed for ``FULL_CSI``); pass ``channel`` to pin
    the realization instead of drawing it from ``rng``.
    """
    scheme = validate_scheme(config, scheme)
    sigma2 = config.P_max * 10.0 ** (-snr_db / 10.0)
    channel, bits, noise_unit = _trial_draws(config, rng, symbols_per_trial,
                                             constellation, channel)
    return _evaluate(config, scheme, sigma2, snr_db, channel, bits, noise_unit,
                     codebooks, constellation, interpolation)


def sweep(config, schemes, snr_grid_db, trials, symbols_per_trial, base_seed,
          codebooks=None, constellation="qpsk", interpolation="db",
          codebook_training_count=None, progress=None):
    """Monte Carlo sweep of several schemes over an SNR grid.

    Deterministic given ``base_seed``: per-trial randomness comes from
    ``(base_seed, trial_index)`` and codebooks (when not supplied) are
    trained from seeds derived from ``base_seed``.  Every (scheme, SNR)
    point sees the same per-trial channels, payload bits and noise, so
    comparisons between schemes are paired.
    """
    if trials < 1:
        raise DimensionError("need at least one trial")
    schemes = [validate_scheme(config, s) for s in schemes]
    if codebooks is None and any(s is not Scheme.FULL_CSI for s in schemes):
        codebooks = train_user_codebooks(config, base_seed,
                                         training_count=codebook_training_count)
    snr_grid_db = [float(s) for s in snr_grid_db]
    store = {
        (scheme.value, snr): {"smse": np.empty(trials), "ber": np.empty(trials)}
        for scheme in schemes for snr in snr_grid_db
    }

    for t in range(trials):
        rng = SeededRng.for_trial(base_seed, t)
        channel, bits, noise_unit = _trial_draws(config, rng, symbols_per_trial,
                                                 constellation)
        for snr in snr_grid_db:
            sigma2 = config.P_max * 10.0 ** (-snr / 10.0)
            for scheme in schemes:
                result = _evaluate(config, scheme, sigma2, snr, channel, bits,
                                   noise_unit, codebooks, constellation,
                                   interpolation)
                cell = store[(scheme.value, snr)]
                cell["smse"][t] = result.empirical_smse
                cell["ber"][t] = result.ber
        if progress is not None:
            progress(t + 1, trials)

    def stderr(values):
        if len(values) < 2:
            return 0.0
        return float(np.std(values, ddof=1) / np.sqrt(len(values)))

    points = []
    for scheme in schemes:
        for snr in snr_grid_db:
            cell = store[(scheme.value, snr)]
            points.append(SweepPoint(
                scheme=scheme.value, snr_db=snr,
                smse_mean=float(np.mean(cell["smse"])),
                smse_stderr=stderr(cell["smse"]),
                ber_mean=float(np.mean(cell["ber"])),
                ber_stderr=stderr(cell["ber"]),
                trials=trials, symbols_per_trial=symbols_per_trial,
                seed=int(base_seed),
            ))
    return SweepResult(points=tuple(points), per_trial=store)
