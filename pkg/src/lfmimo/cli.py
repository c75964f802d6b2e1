"""Batch front end: scenario files, figure presets and CSV emission.

A scenario is a YAML document with ``system``, ``sweep``, ``schemes``,
``codebook`` and ``schedule`` sections; unknown keys are rejected so typos
fail loudly.  Presets reproduce the simulation setups of the reference
figures.  Results go to a CSV whose rows are a pure function of the scenario
and seed.
"""

import argparse
import sys
from dataclasses import dataclass, replace

import yaml

from .codebook import read_codebook, train_msip_codebook, write_codebook
from .errors import FormatError, LfMimoError, UnknownPreset
from .link_sim import sweep
from .system import SeededRng, build_system_config

__all__ = ["Scenario", "preset", "load_scenario", "run", "main"]

CSV_HEADER = "scheme,snr_db,smse_mean,smse_stderr,ber_mean,ber_stderr,trials,symbols_per_trial,seed"

_TOP_KEYS = {"system", "sweep", "schemes", "codebook", "schedule"}
_SYSTEM_KEYS = {"M", "K", "N_k", "L_k", "B", "P_max"}
_SWEEP_KEYS = {"snr_db", "trials", "symbols_per_trial", "seed", "constellation"}
_SCHEDULE_KEYS = {"interpolation"}
_CODEBOOK_KEYS = {"mode", "training_count"}
_INTERPOLATIONS = {"db-linear": "db", "watt-linear": "watt"}


@dataclass(frozen=True)
class Scenario:
    """Everything needed to run one sweep."""

    config: object
    snr_grid_db: tuple
    trials: int
    symbols_per_trial: int
    seed: int
    constellation: str
    schemes: tuple
    codebook: object  # "train", a path, a list of per-user paths, or a mapping
    interpolation: str  # "db" or "watt"


def _reject_unknown(section, mapping, allowed):
    unknown = set(mapping) - allowed
    if unknown:
        raise FormatError(f"unknown keys in {section}: {sorted(unknown)}")


def load_scenario(path):
    """Parse and validate a scenario document."""
    with open(path, "r") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: scenario must be a mapping")
    _reject_unknown("scenario", doc, _TOP_KEYS)
    for section in ("system", "sweep", "schemes"):
        if section not in doc:
            raise FormatError(f"{path}: missing section {section!r}")

    system = doc["system"]
    _reject_unknown("system", system, _SYSTEM_KEYS)
    config = build_system_config(
        system["M"], system["K"], system["N_k"], system["L_k"], system["B"],
        P_max=system.get("P_max", 1.0),
    )

    sw = doc["sweep"]
    _reject_unknown("sweep", sw, _SWEEP_KEYS)
    constellation = sw.get("constellation", "qpsk")
    if constellation not in ("bpsk", "qpsk"):
        raise FormatError(f"unknown constellation {constellation!r}")

    schedule = doc.get("schedule", {}) or {}
    _reject_unknown("schedule", schedule, _SCHEDULE_KEYS)
    interp_name = schedule.get("interpolation", "db-linear")
    if interp_name not in _INTERPOLATIONS:
        raise FormatError(f"unknown schedule interpolation {interp_name!r}")

    codebook = doc.get("codebook", "train")
    if isinstance(codebook, dict):
        _reject_unknown("codebook", codebook, _CODEBOOK_KEYS)
        if codebook.get("mode", "train") != "train":
            raise FormatError("codebook mapping form only supports mode: train")

    return Scenario(
        config=config,
        snr_grid_db=tuple(float(s) for s in sw["snr_db"]),
        trials=int(sw.get("trials", 2000)),
        symbols_per_trial=int(sw.get("symbols_per_trial", 1000)),
        seed=int(sw.get("seed", 1)),
        constellation=constellation,
        schemes=tuple(str(s) for s in doc["schemes"]),
        codebook=codebook,
        interpolation=_INTERPOLATIONS[interp_name],
    )


def preset(name):
    """Named scenario reproducing one of the reference simulation setups."""
    grid_30 = tuple(float(s) for s in range(0, 31, 5))
    presets = {
        "fig3": dict(
            system=(5, 5, [1] * 5, [1] * 5, 10), constellation="qpsk",
            schemes=("proposed", "naive_smse"), snr=grid_30,
        ),
        "fig4": dict(
            system=(4, 4, [1] * 4, [1] * 4, 10), constellation="qpsk",
            schemes=("proposed", "naive_smse"), snr=grid_30,
        ),
        "fig6": dict(
            system=(4, 3, [2, 2, 3], [1, 1, 1], 15), constellation="qpsk",
            schemes=("proposed", "zf_mesc_single", "zf_met", "zf_qbc"),
            snr=tuple(float(s) for s in range(0, 21, 5)),
        ),
        "fig7": dict(
            system=(4, 2, [3, 3], [2, 2], 12), constellation="bpsk",
            schemes=("proposed", "eigen_multi", "qbc_multi"), snr=grid_30,
        ),
    }
    try:
        spec = presets[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}") from None
    M, K, N_k, L_k, B = spec["system"]
    return Scenario(
        config=build_system_config(M, K, N_k, L_k, B),
        snr_grid_db=spec["snr"],
        trials=2000,
        symbols_per_trial=1000,
        seed=1,
        constellation=spec["constellation"],
        schemes=spec["schemes"],
        codebook="train",
        interpolation="db",
    )


def _resolve_codebooks(scenario):
    """Load codebook files, or return (None, count) to train in the sweep."""
    cb = scenario.codebook
    K = scenario.config.K
    if cb == "train":
        return None, None
    if isinstance(cb, dict):
        count = cb.get("training_count")
        return None, int(count) if count is not None else None
    paths = list(cb) if isinstance(cb, (list, tuple)) else [cb] * K
    if len(paths) != K:
        raise FormatError(f"need 1 or {K} codebook paths, got {len(paths)}")
    books = []
    for path in paths:
        try:
            book = read_codebook(path)
        except OSError as exc:
            raise FormatError(f"cannot read codebook file {path}: {exc}") from exc
        if book.M != scenario.config.M or book.B != scenario.config.B:
            raise FormatError(
                f"codebook {path} is (M={book.M}, B={book.B}), scenario needs "
                f"(M={scenario.config.M}, B={scenario.config.B})"
            )
        books.append(book)
    return tuple(books), None


def _format_float(x):
    return f"{x:.12g}"


def _write_csv(path, scenario, result):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for point in result.points:
            fh.write(",".join([
                point.scheme,
                _format_float(point.snr_db),
                _format_float(point.smse_mean),
                _format_float(point.smse_stderr),
                _format_float(point.ber_mean),
                _format_float(point.ber_stderr),
                str(point.trials),
                str(point.symbols_per_trial),
                str(point.seed),
            ]) + "\n")


def _write_trial_dump(path, scenario, result):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("scheme,snr_db,trial,smse,ber\n")
        for scheme in scenario.schemes:
            for snr in scenario.snr_grid_db:
                cell = result.per_trial[(scheme, snr)]
                for t in range(len(cell["smse"])):
                    fh.write(",".join([
                        scheme, _format_float(snr), str(t),
                        _format_float(cell["smse"][t]),
                        _format_float(cell["ber"][t]),
                    ]) + "\n")


def run(scenario, out_path, dump_trials_path=None):
    """Execute a scenario and write the CSV; returns the sweep result."""
    codebooks, training_count = _resolve_codebooks(scenario)
    result = sweep(
        scenario.config, scenario.schemes, scenario.snr_grid_db,
        scenario.trials, scenario.symbols_per_trial, scenario.seed,
        codebooks=codebooks, constellation=scenario.constellation,
        interpolation=scenario.interpolation,
        codebook_training_count=training_count,
    )
    _write_csv(out_path, scenario, result)
    if dump_trials_path:
        _write_trial_dump(dump_trials_path, scenario, result)
    return result


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="lfmimo",
        description="Batch link-level sweeps for limited-feedback multiuser MIMO.",
    )
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", help="named scenario (fig3, fig4, fig6, fig7)")
    source.add_argument("--scenario", help="path to a YAML scenario file")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--trials", type=int, help="override the trial count")
    parser.add_argument("--dump-trials", help="also write raw per-trial metrics here")
    parser.add_argument(
        "--train-codebook", nargs=3, metavar=("M", "B", "OUT"),
        help="train one codebook offline and write it to OUT",
    )
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.train_codebook:
            M, B, out = args.train_codebook
            seed = args.seed if args.seed is not None else 1
            book = train_msip_codebook(int(M), int(B), rng=SeededRng(int(seed)))
            write_codebook(book, out)
            return 0
        if not (args.preset or args.scenario):
            parser.error("one of --preset/--scenario or --train-codebook is required")
        if not args.out:
            parser.error("--out is required when running a sweep")
        scenario = preset(args.preset) if args.preset else load_scenario(args.scenario)
        if args.seed is not None:
            scenario = replace(scenario, seed=args.seed)
        if args.trials is not None:
            scenario = replace(scenario, trials=args.trials)
        run(scenario, args.out, args.dump_trials)
        return 0
    except (LfMimoError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
