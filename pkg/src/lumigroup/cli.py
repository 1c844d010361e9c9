"""Command-line entry point: ``lumigroup <command> [<subcommand>] [options]``.

Every command writes its files under ``-o`` together with ``manifest.json``
(config echo, version, seed, timestamp). Exit codes: 0 success, 1 usage or
configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from . import cycledetect as cd
from . import groupengine as ge
from . import lightsig as ls
from . import semlog as sl
from . import simulator as sim
from . import tsfeatures as tf
from .errors import ConfigInvalid, LumigroupError
from .mlkit import Kind
from .simmetrics import DISTORTION_RATES, Equalizer, Metric, SimilarityConfig, compare, distortion_study

SEED_ENV = "LUMIGROUP_SEED"
STUDY_TECHNIQUES = (("pearson", "light_signal"),)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- helpers ------------------------------------------------------------------------------


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in str(text).replace(" ", "").split(",") if x)


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in str(text).replace(" ", "").split(",") if x)


def _day_range(text: str) -> tuple[int, ...]:
    """``a:b:step`` (inclusive end) or a comma list."""
    if ":" in str(text):
        a, b, *step = (int(x) for x in str(text).split(":"))
        return tuple(range(a, b + 1, step[0] if step else 1))
    return _int_list(text)


def _techniques(text: str) -> tuple[tuple[str, str], ...]:
    groups = {"all": sim.ALL_TECHNIQUES, "similarity": sim.SIMILARITY_TECHNIQUES, "ml": sim.ML_TECHNIQUES,
              "localization": sim.LOCALIZATION_TECHNIQUES}
    out: list = []
    for item in str(text).split(","):
        item = item.strip()
        if item in groups:
            out += [t for t in groups[item] if t not in out]
        elif "/" in item:
            out.append(tuple(item.split("/", 1)))
        elif item:
            raise ConfigInvalid(f"technique {item!r} must look like name/feature_type or be a group name")
    return tuple(out)


def read_config_file(path) -> dict:
    """Flat ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, Path):
        return str(x)
    return x


def _pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if np.isnan(v) else f"{float(v):.6f}"
    return str(v)


def write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence], fmt: str = "csv") -> Path:
    """Rows as CSV, or as a JSON list of records when ``fmt`` is json."""
    if fmt == "json":
        path = path.with_suffix(".json")
        recs = [{h: _jsonable(v) for h, v in zip(header, r)} for r in rows]
        path.write_text(json.dumps(recs, indent=2, sort_keys=False, allow_nan=True) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_study(path: Path, rows: Sequence[tuple], fmt: str = "csv") -> Path:
    return write_rows(path, ("x", "series", "value"), rows, fmt)


# -- commands -------------------------------------------------------------------------------


def cmd_pattern_gen(a, out: Path) -> list[Path]:
    rng = np.random.default_rng(a.seed)
    files = []
    for i in range(a.count):
        p = ls.generate_pattern(a.length, rng)
        path = out / (f"pattern_{i:03d}.csv" if a.count > 1 else "pattern.csv")
        ls.write_pattern_csv(p, path)
        files.append(path)
    return files


def cmd_signal_synth(a, out: Path) -> list[Path]:
    rng = np.random.default_rng(a.seed)
    p = ls.read_pattern_csv(a.pattern) if a.pattern else ls.generate_pattern(a.length, rng)
    window = a.window_ms if a.window_ms else a.window_factor * p.duration_ms
    sig = ls.synthesize_signal(p, window, a.offset_ms, noise_std=a.noise_std, rng=rng)
    ls.write_signal_csv(sig, out / "signal.csv")
    ls.write_pattern_csv(p, out / "pattern.csv")
    return [out / "signal.csv", out / "pattern.csv"]


def cmd_signal_distort(a, out: Path) -> list[Path]:
    sig = ls.distort_signal(ls.read_signal_csv(a.input), a.rate, np.random.default_rng(a.seed))
    ls.write_signal_csv(sig, out / "distorted.csv")
    return [out / "distorted.csv"]


def cmd_signal_detect(a, out: Path) -> list[Path]:
    sig = ls.read_signal_csv(a.input)
    p = cd.fold_to_pattern(cd.extract_period_list(sig), a.expected_length)
    ls.write_pattern_csv(p, out / "pattern.csv")
    return [out / "pattern.csv"]


def cmd_similarity(a, out: Path) -> list[Path]:
    x, y = ls.read_signal_csv(a.a).voltage_mv, ls.read_signal_csv(a.b).voltage_mv
    cfg = SimilarityConfig(a.metric, a.equalizer, a.threshold)
    c = compare(x, y, cfg)
    return [write_rows(out / "similarity.csv", ("metric", "equalizer", "threshold", "score", "degenerate", "same_region"),
                       [(cfg.metric.value, cfg.equalizer.value, cfg.threshold, c.score, c.degenerate, c.same_region)],
                       a.format)]


def cmd_features_extract(a, out: Path) -> list[Path]:
    signals = [ls.read_signal_csv(p).voltage_mv for p in a.input]
    labels = a.labels.split(",") if a.labels else [Path(p).stem for p in a.input]
    if len(labels) != len(signals):
        raise ConfigInvalid("need one label per input signal")
    extractor = tf.statistical_features if a.library == "statistical" else tf.ts_feature_library
    X, names, _ = tf.feature_matrix(signals, extractor)
    tf.write_feature_csv(out / "features.csv", X, labels, names)
    return [out / "features.csv"]


def cmd_features_rank(a, out: Path) -> list[Path]:
    X, y, names = tf.read_feature_csv(a.input)
    ranking = tf.rank_features(X, np.asarray(y), names)
    return [write_rows(out / "ranking.csv", ("feature", "p_value"), ranking, a.format)]


def _scenario(a, mode: sim.SimMode, **over) -> sim.ScenarioConfig:
    kw = dict(mode=mode, users=a.users, rooms=a.rooms, pattern_lengths=_int_list(a.pattern_lengths),
              grouping_period_s=a.grouping_period_s, iteration_s=a.iteration_s, rounds=a.rounds, seed=a.seed,
              latency_range_ms=_float_list(a.latency_range_ms), window_ratio=_float_list(a.window_ratio),
              compute_s=a.compute_s, techniques=_techniques(a.techniques) if a.techniques else None)
    kw.update(over)
    return sim.ScenarioConfig(**kw)


def _write_report(rep: sim.SimulationReport, out: Path, a) -> list[Path]:
    path = out / "report.csv"
    rep.write_csv(path, timing=a.timing)
    files = [path]
    if a.format == "json":
        table = rep.table()
        if not a.timing:
            for row in table:
                row["runtime_s"] = 0.0
        (out / "report.json").write_text(json.dumps(_jsonable(table), indent=2) + "\n")
        files.append(out / "report.json")
    return files


def cmd_sim(a, out: Path) -> list[Path]:
    cfg = _scenario(a, sim.SimMode(a.sub))
    return _write_report(sim.run(cfg), out, a)


def _overall_rows(cfg: sim.ScenarioConfig) -> list[tuple[str, float]]:
    rep = sim.run(cfg)
    return [(f"{k[0]}/{k[1]}", r.overall) for k, r in sorted(rep.rows.items())]


def _sweep(a, mode: sim.SimMode, field_name: str, values: Sequence, **fixed) -> list[tuple]:
    base = dict(techniques=_techniques(a.techniques) if a.techniques else STUDY_TECHNIQUES, **fixed)
    cfgs = [_scenario(a, mode, **base, **{field_name: v}) for v in values]
    results = _pmap(_overall_rows, cfgs, a.jobs)
    x_of = (lambda v: v[0]) if field_name == "pattern_lengths" else (lambda v: int(v) if float(v).is_integer() else v)
    return [(x_of(v), series, value) for v, res in zip(values, results) for series, value in res]


def cmd_study(a, out: Path) -> list[Path]:
    kind = a.sub
    if kind == "distortion":
        rates = _float_list(a.rates) if a.rates else DISTORTION_RATES
        scores = distortion_study(rates, a.seeds, a.length, seed=a.seed)
        rows = [(r, m.value, float(np.median(s[i]))) for m, s in scores.items() for i, r in enumerate(rates)]
    elif kind == "sampling-window":
        ratios = cd.sampling_window_study(_int_list(a.lengths), a.patterns, a.seed)
        rows = []
        for length, r in ratios.items():
            rows += [(length, "mean_ratio", float(np.nanmean(r))), (length, "success_4x", float(np.mean(r <= 4.0)))]
        pooled = np.concatenate(list(ratios.values()))
        rows += [("all", "mean_ratio", float(np.nanmean(pooled))), ("all", "success_4x", float(np.mean(pooled <= 4.0)))]
    elif kind == "rooms":
        rows = _sweep(a, sim.SimMode.DYNAMIC, "rooms", _int_list(a.values or "1,2,3,4,5,6,7,8,9,10"))
    elif kind == "users":
        rows = _sweep(a, sim.SimMode.STATIC, "users", _int_list(a.values or "2,3,4,5,6,7,8,9,10"), rooms=1)
    elif kind == "pattern-length":
        lengths = _int_list(a.values or ",".join(map(str, ls.ALLOWED_LENGTHS)))
        rows = _sweep(a, sim.SimMode.STATIC, "pattern_lengths", [(n,) for n in lengths], rooms=1)
    else:
        rows = _sweep(a, sim.SimMode.DYNAMIC, "grouping_period_s", _float_list(a.values or "10,20,30"))
    return [write_study(out / f"study_{kind.replace('-', '_')}.csv", rows, a.format)]


def _semlog_log(a, mixtures=None) -> sl.AssociationLog:
    if getattr(a, "log", None):
        return sl.log_from_entries(sl.read_log_csv(a.log), a.testbed)
    return sl.generate_log(a.testbed, a.days, a.seed, a.mixtures if mixtures is None else mixtures)


def _names(text, universe: Sequence[str]) -> tuple[str, ...]:
    if not text or text == "all":
        return tuple(universe)
    out = tuple(x.strip() for x in text.split(",") if x.strip())
    unknown = set(out) - set(universe)
    if unknown:
        raise ConfigInvalid(f"unknown names {sorted(unknown)}")
    return out


def _kinds(text) -> tuple[Kind, ...]:
    return tuple(Kind(k) for k in _names(text, [k.value for k in sl.CLASSIFIERS]))


def cmd_semlog(a, out: Path) -> list[Path]:
    if a.sub == "generate":
        log = _semlog_log(a)
        sl.write_log_csv(log, out / "log.csv")
        devices = write_rows(out / "devices.csv", ("device", "group"),
                             [(d, "+".join(c.name.lower() for c in log.groups[d])) for d in log.devices])
        return [out / "log.csv", devices]
    if a.sub == "cluster":
        log = _semlog_log(a)
        days = _day_range(a.eval_days) if a.eval_days else tuple(range(7, log.days + 1, 7))
        curves = sl.clustering_study(log, days, _names(a.features, sl.FEATURE_SET_NAMES), a.top, a.seed)
        rows = [(t, f, c[i]) for f, c in curves.items() for i, t in enumerate(days)]
        return [write_study(out / "clustering.csv", rows, a.format)]
    if a.sub == "classify":
        log = _semlog_log(a, mixtures=False)
        days = _day_range(a.eval_days) if a.eval_days else None
        series = sl._Series(log)
        rows = []
        for kind in _kinds(a.classifiers):
            for feat in _names(a.features, sl.FEATURE_SET_NAMES):
                res = sl.classify_and_coldstart(log, kind, feat, days=days, stride=a.stride, seed=a.seed,
                                                series=series)
                for c, cs in res.per_class.items():
                    r = cs.report
                    rows.append((c, kind.value, feat, "" if cs.cold_start is None else cs.cold_start, cs.accepted,
                                 r.auc, r.accuracy, r.precision, r.recall, r.f1))
        return [write_rows(out / "classify.csv", ("device_class", "classifier", "feature", "cold_start_day", "accepted",
                                                   "auc", "accuracy", "precision", "recall", "f1"), rows, a.format)]
    names = [x.strip() for x in a.testbeds.split(",")]
    logs = {n: sl.generate_log(n, a.days, a.seed) for n in names}
    res = sl.cross_testbed_matrix(logs, kinds=_kinds(a.classifiers), features=_names(a.features, sl.FEATURE_SET_NAMES),
                                  seed=a.seed)
    rows = [(r.train, r.test, r.kind.value, r.feature, r.score, r.report.accuracy, r.report.precision,
             r.report.recall, r.report.f1) for r in res.values()]
    return [write_rows(out / "cross.csv", ("train", "test", "classifier", "feature", "score", "accuracy", "precision",
                                            "recall", "f1"), rows, a.format)]


def protocol_check(count: int, seed: int) -> list[tuple[str, int, int]]:
    """Round-trip random frames of every type and feed malformed ones; (check, passed, total) rows."""
    rng = np.random.default_rng(seed)
    ok = 0
    types = list(ge.MsgType)
    for _ in range(count):
        m = ge.Message(types[int(rng.integers(len(types)))], rng.bytes(int(rng.integers(0, 64))))
        ok += ge.parse(ge.frame(m)) == m
    rows = [("round_trip", ok, count)]
    bad_cases = {
        "bad_type": (ge.BadType, [bytes([t]) + (0).to_bytes(4, "big") for t in (0, 5, 255)]),
        "short_input": (ge.Truncated, [b"", b"\x01", b"\x02\x00\x00\x00", b"\x01\x00\x00\x00\x05ab"]),
        "trailing_bytes": (ge.LengthMismatch, [b"\x01\x00\x00\x00\x01abc"]),
    }
    for name, (err, cases) in bad_cases.items():
        passed = 0
        for data in cases:
            try:
                ge.parse(data)
            except err:
                passed += 1
        rows.append((name, passed, len(cases)))
    return rows


def cmd_protocol(a, out: Path) -> list[Path]:
    rows = protocol_check(a.count, a.seed)
    path = write_rows(out / "protocol.csv", ("check", "passed", "total"), rows, a.format)
    if any(p != n for _, p, n in rows):
        raise RuntimeError("protocol check failed")
    return [path]


# -- parser ---------------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    p.add_argument("-o", "--out", default=".", help="output directory")
    p.add_argument("--config", default=None, help="key=value file; command-line flags take precedence")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1, help="maximum worker processes")
    return p


def _scenario_flags(p: argparse.ArgumentParser, mode: str) -> None:
    d = sim.ScenarioConfig(mode=mode, users=10 if mode == "dynamic" else 5)
    p.add_argument("--users", type=int, default=d.users)
    p.add_argument("--rooms", type=int, default=d.rooms)
    p.add_argument("--pattern-lengths", dest="pattern_lengths", default=",".join(map(str, d.pattern_lengths)))
    p.add_argument("--grouping-period", dest="grouping_period_s", type=float, default=d.grouping_period_s)
    p.add_argument("--iteration-s", dest="iteration_s", type=float, default=d.iteration_s)
    p.add_argument("--rounds", type=int, default=d.rounds)
    p.add_argument("--latency-range-ms", dest="latency_range_ms", default="50,500")
    p.add_argument("--window-ratio", dest="window_ratio", default="2.5,4.0")
    p.add_argument("--compute-s", dest="compute_s", type=float, default=d.compute_s)
    p.add_argument("--techniques", default=None, help="comma list of name/feature_type or all|similarity|ml|localization")
    p.add_argument("--timing", action="store_true", help="write measured runtimes (not reproducible)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    root = _Parser(prog="lumigroup", description="Light-pattern device grouping toolkit.")
    root.add_argument("--version", action="version", version=__version__)
    cmds = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def group(name, help_):
        g = cmds.add_parser(name, help=help_)
        return g.add_subparsers(dest="sub", required=True, parser_class=_Parser)

    pat = group("pattern", "light patterns")
    p = pat.add_parser("gen", parents=[common], help="random light patterns")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_pattern_gen)

    sig = group("signal", "raw light signals")
    p = sig.add_parser("synth", parents=[common], help="sample a looped pattern")
    p.add_argument("--pattern", default=None, help="pattern CSV (default: a random one)")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--window-ms", dest="window_ms", type=float, default=None)
    p.add_argument("--window-factor", dest="window_factor", type=float, default=4.0)
    p.add_argument("--offset-ms", dest="offset_ms", type=float, default=0.0)
    p.add_argument("--noise-std", dest="noise_std", type=float, default=ls.NOISE_STD_MV)
    p.set_defaults(func=cmd_signal_synth)
    p = sig.add_parser("distort", parents=[common], help="replace samples by noise")
    p.add_argument("--input", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_signal_distort)
    p = sig.add_parser("detect", parents=[common], help="recover the repeating pattern")
    p.add_argument("--input", required=True)
    p.add_argument("--expected-length", dest="expected_length", type=int, default=None)
    p.set_defaults(func=cmd_signal_detect)

    p = cmds.add_parser("similarity", parents=[common], help="score two signals")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--metric", choices=[m.value for m in Metric], default="pearson")
    p.add_argument("--equalizer", choices=[e.value for e in Equalizer], default="xcorr")
    p.add_argument("--threshold", type=float, default=0.7)
    p.set_defaults(func=cmd_similarity, sub=None)

    feat = group("features", "signal features")
    p = feat.add_parser("extract", parents=[common], help="feature table of signals")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--labels", default=None, help="comma list, one per input (default: file stems)")
    p.add_argument("--library", choices=("statistical", "tsfresh"), default="statistical")
    p.set_defaults(func=cmd_features_extract)
    p = feat.add_parser("rank", parents=[common], help="rank features by significance")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_features_rank)

    simg = group("sim", "grouping simulations")
    for mode in ("static", "dynamic"):
        p = simg.add_parser(mode, parents=[common], help=f"{mode} simulation")
        _scenario_flags(p, mode)
        p.set_defaults(func=cmd_sim)

    study = group("study", "parameter studies (long-format x,series,value CSV)")
    for kind in ("distortion", "sampling-window", "rooms", "users", "pattern-length", "grouping-frequency"):
        p = study.add_parser(kind, parents=[common])
        if kind == "distortion":
            p.add_argument("--seeds", type=int, default=50)
            p.add_argument("--length", type=int, default=4)
            p.add_argument("--rates", default=None)
        elif kind == "sampling-window":
            p.add_argument("--patterns", type=int, default=100)
            p.add_argument("--lengths", default=",".join(map(str, ls.ALLOWED_LENGTHS)))
        else:
            _scenario_flags(p, "dynamic" if kind in ("rooms", "grouping-frequency") else "static")
            p.add_argument("--values", default=None, help="comma list of swept values")
        p.set_defaults(func=cmd_study)

    sem = group("semlog", "device-association logs")
    for sub in ("generate", "cluster", "classify", "cross"):
        p = sem.add_parser(sub, parents=[common])
        p.add_argument("--days", type=int, default=365)
        if sub == "cross":
            p.add_argument("--testbeds", default="dense,medium,sparse")
        else:
            p.add_argument("--testbed", choices=sorted(sl.TESTBEDS), default="dense")
            p.add_argument("--log", default=None, help="read the log from CSV instead of generating it")
        if sub in ("generate", "cluster"):
            p.add_argument("--mixtures", action="store_true")
        if sub != "generate":
            p.add_argument("--features", default=None, help="comma list of feature sets (default: all)")
        if sub == "cluster":
            p.add_argument("--top", type=int, default=3)
        if sub in ("cluster", "classify"):
            p.add_argument("--eval-days", dest="eval_days", default=None, help="a:b:step or comma list")
        if sub in ("classify", "cross"):
            p.add_argument("--classifiers", default=None)
        if sub == "classify":
            p.add_argument("--stride", type=int, default=7)
        p.set_defaults(func=cmd_semlog)

    proto = group("protocol", "wire protocol")
    p = proto.add_parser("check", parents=[common], help="round-trip and malformed-input checks")
    p.add_argument("--count", type=int, default=10_000)
    p.set_defaults(func=cmd_protocol)
    return root


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config_file(args.config)
    known = vars(args)
    unknown = sorted(set(values) - set(known) - {f.name for f in fields(sim.ScenarioConfig)})
    if unknown or any(k in values for k in ("command", "sub", "func", "config")):
        raise ConfigInvalid(f"unknown config keys {unknown}")
    # re-parse with file values as defaults so explicit flags win
    sub = parser
    for key in ("command", "sub"):
        name = known.get(key)
        if name is None:
            break
        action = next(a for a in sub._actions if isinstance(a, argparse._SubParsersAction))
        sub = action.choices[name]
    defaults = {}
    for k, v in values.items():
        act = next((a for a in sub._actions if a.dest == k), None)
        if act is None:
            raise ConfigInvalid(f"config key {k!r} does not apply to this command")
        if isinstance(act, argparse._StoreTrueAction):
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        else:
            defaults[k] = act.type(v) if act.type else v
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _manifest(args: argparse.Namespace, argv: Sequence[str], files: Sequence[Path], out: Path) -> None:
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    doc = {
        "tool": "lumigroup",
        "version": __version__,
        "command": " ".join(x for x in (args.command, args.sub) if x),
        "argv": list(argv),
        "seed": args.seed,
        "config": config,
        "files": sorted(str(Path(f).relative_to(out)) for f in files),
        "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.seed is None:
            env = os.environ.get(SEED_ENV)
            try:
                args.seed = int(env) if env not in (None, "") else 0
            except ValueError:
                raise ConfigInvalid(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if args.jobs < 1:
            raise ConfigInvalid("--jobs must be at least 1")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except UsageError as e:
        print(e, file=sys.stderr)
        return 1
    except (ConfigInvalid, ValueError, OSError) as e:
        print(f"lumigroup: config error: {e}", file=sys.stderr)
        return 1
    try:
        files = args.func(args, out)
    except (ConfigInvalid, ValueError) as e:
        print(f"lumigroup: config error: {e}", file=sys.stderr)
        return 1
    except (LumigroupError, RuntimeError, OSError, KeyError) as e:
        print(f"lumigroup: error: {e}", file=sys.stderr)
        return 2
    _manifest(args, argv, files, out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
