import numpy as np
import pytest

from lfmimo import (
    ChannelRealization,
    DimensionError,
    LengthError,
    ReceiverAssumptions,
    Scheme,
    SeededRng,
    build_system_config,
    demodulate,
    draw_channel,
    mesc_combine_user,
    modulate,
    quantize_direction,
    run_downlink_trial,
    sweep,
)
from lfmimo.link_sim import _design, _trial_draws, validate_scheme


class TestModulation:
    def test_bpsk_convention(self):
        assert np.array_equal(modulate([0, 1, 1, 0], "bpsk"), [1, -1, -1, 1])

    def test_qpsk_first_point_and_energy(self):
        symbols = modulate([0, 0, 0, 1, 1, 1, 1, 0], "qpsk")
        assert symbols[0] == pytest.approx((1 + 1j) / np.sqrt(2))
        assert np.allclose(np.abs(symbols), 1.0)

    def test_qpsk_gray_adjacency(self):
        # Constellation neighbours (one sign flip) differ in exactly one bit.
        bit_pairs = [(0, 0), (0, 1), (1, 1), (1, 0)]
        points = {b: complex(modulate(list(b), "qpsk")[0]) for b in bit_pairs}
        for a in bit_pairs:
            for b in bit_pairs:
                flips = sum(x != y for x, y in zip(a, b))
                dist = abs(points[a] - points[b])
                if dist == pytest.approx(np.sqrt(2), rel=1e-9):
                    assert flips == 1

    def test_round_trip(self):
        rng = SeededRng(70)
        for constellation in ("bpsk", "qpsk"):
            bits = rng.bits(240)
            assert np.array_equal(demodulate(modulate(bits, constellation), constellation), bits)

    def test_length_error(self):
        with pytest.raises(LengthError):
            modulate([0, 1, 1], "qpsk")
        with pytest.raises(LengthError):
            modulate([0, 1], "8psk")


def small_config(**kw):
    return build_system_config(3, 2, [1, 1], [1, 1], 3, **kw)


@pytest.fixture(scope="module")
def small_codebooks(codebook_factory):
    return (codebook_factory(3, 3, seed=101), codebook_factory(3, 3, seed=102))


class TestDownlinkTrial:
    def test_deterministic(self, small_codebooks):
        cfg = small_config()
        a = run_downlink_trial(cfg, "proposed", 10.0, 100, SeededRng(5), small_codebooks)
        b = run_downlink_trial(cfg, "proposed", 10.0, 100, SeededRng(5), small_codebooks)
        assert a == b

    def test_empirical_smse_double_entry(self, small_codebooks):
        # Independent accumulation: rebuild the trial from the same draws and
        # sum |xhat - x|^2 symbol by symbol in plain Python.
        from lfmimo.combining import mmse_decoder_block

        cfg = small_config()
        seed, snr, n_sym = 9, 12.0, 50
        result = run_downlink_trial(cfg, "proposed", snr, n_sym, SeededRng(seed),
                                    small_codebooks)

        rng = SeededRng(seed)
        channel, bits, noise = _trial_draws(cfg, rng, n_sym, "qpsk")
        sigma2 = cfg.P_max * 10.0 ** (-snr / 10.0)
        design = _design(cfg, Scheme.PROPOSED, channel, small_codebooks, sigma2,
                         snr, "db")
        x = modulate(bits, "qpsk")
        y = channel.H.conj().T @ (design.U * np.sqrt(design.p)) @ x
        y = y + np.sqrt(sigma2) * noise
        acc = 0.0
        for i in range(cfg.L):
            k = cfg.stream_user[i]
            rows = slice(sum(cfg.N_per_user[:k]), sum(cfg.N_per_user[: k + 1]))
            g = mmse_decoder_block(channel.user(k), design.U, design.p, sigma2, [i])[:, 0]
            err_sum = 0.0
            for s in range(n_sym):
                xhat = complex(g.conj() @ y[rows, s])
                err_sum += abs(xhat - x[i, s]) ** 2
            acc += err_sum / n_sym
        assert result.empirical_smse == pytest.approx(acc, rel=1e-12)

    def test_designs_satisfy_duality_and_budget(self, small_codebooks):
        cfg = small_config()
        channel = draw_channel(cfg, SeededRng(30))
        for scheme in ("proposed", "naive_smse", "zf_met", "full_csi"):
            design = _design(cfg, Scheme(scheme), channel, small_codebooks, 0.1,
                             10.0, "db")
            assert np.array_equal(design.p, design.q)
            assert np.sum(design.p) == pytest.approx(cfg.P_max, rel=1e-9)
            # unit precoder columns make the radiated power sum to P_max
            power = np.sum(np.linalg.norm(design.U * np.sqrt(design.p), axis=0) ** 2)
            assert power == pytest.approx(cfg.P_max, rel=1e-9)

    def test_full_csi_noise_free_orthonormal_channel(self):
        cfg = build_system_config(4, 2, [2, 2], [2, 2], 4)
        eye = np.eye(4, dtype=complex)
        channel = ChannelRealization((eye[:, :2], eye[:, 2:]))
        result = run_downlink_trial(cfg, "full_csi", 60.0, 10_000, SeededRng(1),
                                    channel=channel)
        assert sum(result.bit_errors) == 0

    def test_proposed_miso_matches_general_mesc_path(self, small_codebooks):
        # The single-antenna shortcut must select like the full machinery.
        cfg = small_config()
        channel = draw_channel(cfg, SeededRng(31))
        sigma2 = 0.25
        assumptions = ReceiverAssumptions(P=1.0, L=2, M=3, sigma2=sigma2, sigma2_E=0.1)
        for k in range(2):
            via_mesc = mesc_combine_user(channel.user(k), small_codebooks[k], 1,
                                         assumptions)
            direct = quantize_direction(channel.user(k)[:, 0], small_codebooks[k])
            assert via_mesc.indices[0] == direct.index

    def test_scheme_constraints(self, small_codebooks):
        cfg = build_system_config(4, 2, [2, 2], [2, 2], 3)
        with pytest.raises(DimensionError):
            validate_scheme(cfg, "zf_met")
        validate_scheme(cfg, "proposed")
        with pytest.raises(ValueError):
            validate_scheme(cfg, "not_a_scheme")


class TestSweep:
    def test_deterministic_and_row_count(self):
        cfg = small_config()
        kw = dict(trials=4, symbols_per_trial=40, base_seed=77,
                  codebook_training_count=800)
        a = sweep(cfg, ["proposed", "zf_met"], [0.0, 10.0], **kw)
        b = sweep(cfg, ["proposed", "zf_met"], [0.0, 10.0], **kw)
        assert a.points == b.points
        assert len(a.points) == 4

    def test_aggregates_match_per_trial_store(self):
        cfg = small_config()
        res = sweep(cfg, ["zf_met"], [5.0], trials=6, symbols_per_trial=40,
                    base_seed=3, codebook_training_count=800)
        cell = res.per_trial[("zf_met", 5.0)]
        point = res.points[0]
        assert point.smse_mean == pytest.approx(np.mean(cell["smse"]), rel=1e-12)
        assert point.ber_mean == pytest.approx(np.mean(cell["ber"]), rel=1e-12)
        expected_se = np.std(cell["smse"], ddof=1) / np.sqrt(6)
        assert point.smse_stderr == pytest.approx(expected_se, rel=1e-12)

    def test_schemes_share_paired_draws(self):
        # Adding a scheme must not disturb another scheme's per-trial values.
        cfg = small_config()
        kw = dict(trials=5, symbols_per_trial=30, base_seed=13,
                  codebook_training_count=800)
        alone = sweep(cfg, ["zf_met"], [6.0], **kw)
        paired = sweep(cfg, ["zf_met", "proposed"], [6.0], **kw)
        assert np.array_equal(alone.per_trial[("zf_met", 6.0)]["smse"],
                              paired.per_trial[("zf_met", 6.0)]["smse"])

    def test_stderr_scales_as_inverse_sqrt_trials(self):
        cfg = build_system_config(2, 2, [1, 1], [1, 1], 2)
        kw = dict(symbols_per_trial=20, base_seed=21, codebook_training_count=400)
        small = sweep(cfg, ["proposed"], [10.0], trials=1000, **kw)
        large = sweep(cfg, ["proposed"], [10.0], trials=4000, **kw)
        ratio = large.points[0].smse_stderr / small.points[0].smse_stderr
        assert 0.45 <= ratio <= 0.55
