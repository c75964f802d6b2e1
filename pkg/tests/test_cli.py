import numpy as np
import pytest

from lfmimo import UnknownPreset, read_codebook
from lfmimo.cli import load_scenario, main, preset

SCENARIO = """\
system:
  M: 3
  K: 2
  N_k: [1, 1]
  L_k: [1, 1]
  B: 3
sweep:
  snr_db: [0, 10]
  trials: 3
  symbols_per_trial: 20
  seed: 5
  constellation: qpsk
schemes: [proposed, zf_met]
codebook:
  mode: train
  training_count: 800
"""


def write_scenario(tmp_path, text=SCENARIO, name="scen.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestPresets:
    def test_fig3_parameters(self):
        scen = preset("fig3")
        cfg = scen.config
        assert (cfg.M, cfg.K, cfg.B) == (5, 5, 10)
        assert cfg.N_per_user == (1,) * 5 and cfg.L_per_user == (1,) * 5
        assert scen.constellation == "qpsk"
        assert set(scen.schemes) == {"proposed", "naive_smse"}

    def test_fig6_parameters(self):
        scen = preset("fig6")
        assert scen.config.N_per_user == (2, 2, 3)
        assert scen.config.B == 15
        assert "zf_met" in scen.schemes and "zf_qbc" in scen.schemes

    def test_fig7_parameters(self):
        scen = preset("fig7")
        cfg = scen.config
        assert (cfg.M, cfg.K, cfg.B) == (4, 2, 12)
        assert cfg.N_per_user == (3, 3) and cfg.L_per_user == (2, 2)
        assert scen.constellation == "bpsk"

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            preset("fig9")


class TestScenarioFile:
    def test_parses(self, tmp_path):
        scen = load_scenario(write_scenario(tmp_path))
        assert scen.config.M == 3 and scen.trials == 3
        assert scen.schemes == ("proposed", "zf_met")
        assert scen.interpolation == "db"

    def test_unknown_key_rejected(self, tmp_path):
        from lfmimo import FormatError

        bad = SCENARIO + "plotting: yes\n"
        with pytest.raises(FormatError):
            load_scenario(write_scenario(tmp_path, bad))
        also_bad = SCENARIO.replace("  seed: 5", "  seed: 5\n  bogus: 1")
        with pytest.raises(FormatError):
            load_scenario(write_scenario(tmp_path, also_bad))


class TestRun:
    def test_csv_rows_and_determinism(self, tmp_path):
        scen_path = write_scenario(tmp_path)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["--scenario", str(scen_path), "--out", str(out1)]) == 0
        assert main(["--scenario", str(scen_path), "--out", str(out2)]) == 0
        lines = out1.read_text().splitlines()
        assert lines[0] == ("scheme,snr_db,smse_mean,smse_stderr,ber_mean,"
                            "ber_stderr,trials,symbols_per_trial,seed")
        assert len(lines) == 1 + 2 * 2  # header + schemes x snr points
        assert out1.read_bytes() == out2.read_bytes()

    def test_dump_trials_consistent_with_stderr(self, tmp_path):
        scen_path = write_scenario(tmp_path)
        out = tmp_path / "out.csv"
        dump = tmp_path / "trials.csv"
        assert main(["--scenario", str(scen_path), "--out", str(out),
                     "--dump-trials", str(dump)]) == 0
        rows = [line.split(",") for line in dump.read_text().splitlines()[1:]]
        assert len(rows) == 2 * 2 * 3  # schemes x snr x trials
        smse = [float(r[3]) for r in rows if r[0] == "proposed" and r[1] == "0"]
        reported = [line.split(",") for line in out.read_text().splitlines()[1:]]
        row = next(r for r in reported if r[0] == "proposed" and r[1] == "0")
        assert float(row[3]) == pytest.approx(np.std(smse, ddof=1) / np.sqrt(3), rel=1e-9)

    def test_seed_and_trials_overrides(self, tmp_path):
        scen_path = write_scenario(tmp_path)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        main(["--scenario", str(scen_path), "--out", str(out1), "--trials", "2"])
        main(["--scenario", str(scen_path), "--out", str(out2), "--trials", "2",
              "--seed", "99"])
        first = out1.read_text().splitlines()[1].split(",")
        assert first[6] == "2"
        assert out1.read_bytes() != out2.read_bytes()

    def test_missing_codebook_file_names_path(self, tmp_path, capsys):
        text = SCENARIO.replace(
            "codebook:\n  mode: train\n  training_count: 800",
            "codebook: /nowhere/missing_cb.txt",
        )
        scen_path = write_scenario(tmp_path, text)
        code = main(["--scenario", str(scen_path), "--out", str(tmp_path / "x.csv")])
        assert code != 0
        assert "/nowhere/missing_cb.txt" in capsys.readouterr().err

    def test_train_codebook_command(self, tmp_path):
        out = tmp_path / "cb.txt"
        # B=2 keeps the default 1000*2^B training set small.
        assert main(["--train-codebook", "3", "2", str(out), "--seed", "11"]) == 0
        book = read_codebook(out)
        assert book.M == 3 and book.B == 2

    def test_trained_codebooks_reusable_in_scenario(self, tmp_path):
        # One file per user; a single shared file would let two users report
        # the same codeword and knock out the zero-forcing baseline.
        paths = []
        for k in (0, 1):
            cb_path = tmp_path / f"cb{k}.txt"
            main(["--train-codebook", "3", "3", str(cb_path), "--seed", str(12 + k)])
            paths.append(str(cb_path))
        text = SCENARIO.replace(
            "codebook:\n  mode: train\n  training_count: 800",
            f"codebook: [{paths[0]}, {paths[1]}]",
        )
        scen_path = write_scenario(tmp_path, text)
        out = tmp_path / "out.csv"
        assert main(["--scenario", str(scen_path), "--out", str(out)]) == 0
        assert len(out.read_text().splitlines()) == 5

    def test_codebook_dimension_mismatch_rejected(self, tmp_path, capsys):
        cb_path = tmp_path / "cb.txt"
        main(["--train-codebook", "4", "3", str(cb_path), "--seed", "12"])  # M=4, scenario wants 3
        text = SCENARIO.replace(
            "codebook:\n  mode: train\n  training_count: 800",
            f"codebook: {cb_path}",
        )
        scen_path = write_scenario(tmp_path, text)
        assert main(["--scenario", str(scen_path), "--out", str(tmp_path / "x.csv")]) != 0
        assert "M=4" in capsys.readouterr().err
