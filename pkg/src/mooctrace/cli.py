"""Command-line pipeline: synth, ingest, featurize, train, eval, report.

Configuration comes from an optional flat key=value file plus flags (flags
win). Every command writes files atomically, exits nonzero on error, and
puts a machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from mooctrace import actgraph, features, model as svm, synth
from mooctrace.events import (
    encode_events,
    event_from_json_obj,
    event_to_json_obj,
    filter_valid_videos,
    parse_clickstream_log,
    parse_forum_log,
)
from mooctrace.features import ModelFamily
from mooctrace.footprint import (
    Setup,
    build_curr_sequences,
    build_tcurr_sequences,
    nominal_activity_type,
    sequence_to_json_obj,
)

EXIT_BAD_INPUT = 2
EXIT_EMPTY_EVENTS = 3
EXIT_SINGLE_CLASS = 4
EXIT_UNKNOWN_INSTANCE = 5


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class PipelineConfig:
    course_start: float | None = None
    min_unique_viewers: int = 10
    setup: Setup = Setup.CURR
    model_family: ModelFamily = ModelFamily.GRAPH
    rare_threshold: int = 4
    test_id_min: int = 798619
    test_id_max: int = 1882807
    seed: int = 0
    svm_c: float = 1.0
    svm_gamma: float | None = None
    svm_tolerance: float = 1e-3
    svm_max_passes: int = 10000
    cost0: float | None = None
    cost1: float | None = None

    def svm_params(self) -> svm.SvmParams:
        class_cost = None
        if self.cost0 is not None and self.cost1 is not None:
            class_cost = {0: self.cost0, 1: self.cost1}
        return svm.SvmParams(
            C=self.svm_c,
            gamma=self.svm_gamma,
            class_cost=class_cost,
            tolerance=self.svm_tolerance,
            max_passes=self.svm_max_passes,
            seed=self.seed,
        )


def load_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment."""
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CommandError(EXIT_BAD_INPUT, f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_CONFIG_CASTS = {
    "course_start": float,
    "min_unique_viewers": int,
    "setup": Setup,
    "model_family": ModelFamily,
    "rare_threshold": int,
    "test_id_min": int,
    "test_id_max": int,
    "seed": int,
    "svm_c": float,
    "svm_gamma": float,
    "svm_tolerance": float,
    "svm_max_passes": int,
    "cost0": float,
    "cost1": float,
}


def build_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig()
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    if "model" in file_values:  # config key mirrors the --model flag
        file_values.setdefault("model_family", file_values.pop("model"))
    for key, cast in _CONFIG_CASTS.items():
        if key in file_values:
            setattr(cfg, key, cast(file_values[key]))
        flag = getattr(args, key, None)
        if flag is not None:
            setattr(cfg, key, cast(flag) if not isinstance(flag, (int, float)) else flag)
    return cfg


def write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_jsonl_atomic(path: Path, objs) -> None:
    write_text_atomic(path, "".join(json.dumps(o, sort_keys=True) + "\n" for o in objs))


def _read_events(path: str):
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CommandError(EXIT_BAD_INPUT, f"cannot read events: {exc}") from exc
    return [event_from_json_obj(json.loads(line)) for line in lines if line.strip()]


# ---------------------------------------------------------------- commands


def cmd_synth(args: argparse.Namespace) -> int:
    mix = tuple(float(x) for x in args.mix.split(","))
    if len(mix) != 3:
        raise CommandError(EXIT_BAD_INPUT, "mix must have three comma-separated values")
    profile = synth.SynthProfile(
        n_students=args.students,
        weeks=args.weeks,
        archetype_mix=mix,
        dropout_signal_strength=args.signal,
    )
    clicks, forums = synth.generate_synthetic(profile, args.seed)
    out = Path(args.out_dir)
    write_jsonl_atomic(out / "clickstream.jsonl", clicks)
    write_jsonl_atomic(out / "forum.jsonl", forums)
    print(f"synth: {len(clicks)} click events, {len(forums)} forum events -> {out}")
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    try:
        with open(args.clicks, "rb") as fh:
            raw_clicks, click_diags = parse_clickstream_log(fh)
        with open(args.forum, "rb") as fh:
            raw_forums, forum_diags = parse_forum_log(fh)
    except OSError as exc:
        raise CommandError(EXIT_BAD_INPUT, f"cannot read input: {exc}") from exc

    valid_clicks = filter_valid_videos(raw_clicks, cfg.min_unique_viewers)
    events, dropped_equal_rate = encode_events(valid_clicks, raw_forums)

    out = Path(args.out_dir)
    write_jsonl_atomic(out / "events.jsonl", (event_to_json_obj(e) for e in events))
    diag_objs = [dict(d.to_json_obj(), source="clickstream") for d in click_diags]
    diag_objs += [dict(d.to_json_obj(), source="forum") for d in forum_diags]
    write_jsonl_atomic(out / "diagnostics.jsonl", diag_objs)

    print(
        f"ingest: {len(raw_clicks)} click events ({len(valid_clicks)} on valid videos), "
        f"{len(raw_forums)} forum events, {len(events)} encoded, "
        f"{len(diag_objs)} diagnostics, {dropped_equal_rate} equal-rate ratechanges dropped"
    )
    return 0


def _build_sequences(events, cfg: PipelineConfig):
    curr = build_curr_sequences(events, cfg.course_start)
    tcurr = build_tcurr_sequences(curr)
    return curr, tcurr


def cmd_featurize(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    events = _read_events(args.events)
    if not events:
        raise CommandError(EXIT_EMPTY_EVENTS, "event store is empty")

    curr, tcurr = _build_sequences(events, cfg)
    train, test = features.build_model_datasets(
        curr,
        tcurr,
        cfg.setup,
        cfg.model_family,
        (cfg.test_id_min, cfg.test_id_max),
        cfg.rare_threshold,
    )

    out = Path(args.out_dir)
    write_text_atomic(out / "train.txt", features.export_sparse(train))
    write_text_atomic(out / "test.txt", features.export_sparse(test))
    write_text_atomic(
        out / "features.json",
        json.dumps(train.feature_index, sort_keys=True, indent=0) + "\n",
    )
    for name, ds in (("train", train), ("test", test)):
        write_jsonl_atomic(
            out / f"{name}_keys.jsonl",
            (
                {"sid": fv.instance_id[0], "courseweek": fv.instance_id[1]}
                for fv in ds.instances
            ),
        )
    selected = curr if cfg.setup == Setup.CURR else tcurr
    write_jsonl_atomic(
        out / "sequences.jsonl",
        (sequence_to_json_obj(selected[k]) for k in sorted(selected)),
    )
    print(
        f"featurize: {len(train.instances)} train / {len(test.instances)} test instances, "
        f"{len(train.feature_index)} features ({cfg.setup.value}/{cfg.model_family.value})"
    )
    return 0


def _load_matrix(path: str, feature_index_path: str):
    try:
        index = json.loads(Path(feature_index_path).read_text())
        text = Path(path).read_text()
    except OSError as exc:
        raise CommandError(EXIT_BAD_INPUT, f"cannot read dataset: {exc}") from exc
    return features.read_sparse(text, len(index)), index


def cmd_train(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    (X, y), index = _load_matrix(args.train, args.features)
    if len(set(y.tolist())) < 2:
        raise CommandError(EXIT_SINGLE_CLASS, "train split contains a single class")
    trained = svm.fit_svm(X, y, cfg.svm_params())
    trained.feature_names = tuple(sorted(index, key=index.get))
    write_text_atomic(Path(args.out), svm.dump_model(trained) + "\n")
    print(
        f"train: {len(y)} instances, {len(trained.alphas)} support vectors, "
        f"converged={trained.converged} after {trained.n_iterations} steps"
    )
    return 0


def _evaluate_model(model_path: str, X: np.ndarray, y: np.ndarray):
    try:
        trained = svm.load_model(Path(model_path).read_text())
    except OSError as exc:
        raise CommandError(EXIT_BAD_INPUT, f"cannot read model: {exc}") from exc
    if X.shape[1] != trained.support_vectors.shape[1]:
        raise CommandError(
            EXIT_BAD_INPUT,
            f"feature dimension mismatch: data {X.shape[1]}, model "
            f"{trained.support_vectors.shape[1]}",
        )
    predictions = svm.predict_all(trained, X)
    return predictions, svm.evaluate(list(predictions), list(y))


def cmd_eval(args: argparse.Namespace) -> int:
    (X, y), _ = _load_matrix(args.test, args.features)
    if len(y) == 0:
        raise CommandError(EXIT_EMPTY_EVENTS, "test split is empty")
    predictions, report = _evaluate_model(args.model_file, X, y)
    write_text_atomic(
        Path(args.out), json.dumps(report.to_json_obj(), sort_keys=True) + "\n"
    )
    print(
        f"eval: accuracy={report.accuracy:.4f} kappa={report.kappa:.4f} "
        f"fnr={report.fnr:.4f}"
    )
    if args.model_file_b:
        predictions_b, report_b = _evaluate_model(args.model_file_b, X, y)
        correct_a = [int(p == t) for p, t in zip(predictions, y)]
        correct_b = [int(p == t) for p, t in zip(predictions_b, y)]
        t_stat, p_value, df = svm.paired_ttest(correct_a, correct_b)
        t_json = t_stat if np.isfinite(t_stat) else ("inf" if t_stat > 0 else "-inf")
        obj = {
            "t": t_json,
            "p": p_value,
            "df": df,
            "accuracy_a": report.accuracy,
            "accuracy_b": report_b.accuracy,
        }
        out = Path(args.ttest_out or Path(args.out).with_name("ttest.json"))
        write_text_atomic(out, json.dumps(obj, sort_keys=True) + "\n")
        print(f"eval: paired t-test t={t_stat:.4f} p={p_value:.4g} df={df}")
    return 0


def _analysis_columns(sequences):
    """Categorical columns for interaction-gain and contingency analyses.

    Numeric metrics are dichotomized over all instances here; this is a
    descriptive analysis, not a held-out experiment.
    """
    keys = sorted(sequences)
    labels = []
    last_week: dict[int, int] = {}
    for sid, week in keys:
        last_week[sid] = max(last_week.get(sid, week), week)
    columns: dict[str, list] = {}

    numeric: dict[str, list[float]] = {name: [] for name in (
        "nodes", "edges", "self_loops", "density")}
    props: dict[str, list[float]] = {name: [] for name in (
        "video_active", "video_passive", "forum_active", "forum_passive")}
    nominal, top1, transition = [], [], []

    for sid, week in keys:
        seq = sequences[(sid, week)]
        labels.append(1 if week == last_week[sid] else 0)
        metrics = actgraph.compute_metrics(actgraph.build_graph(seq))
        numeric["nodes"].append(float(metrics.num_nodes))
        numeric["edges"].append(float(metrics.num_edges))
        numeric["self_loops"].append(float(metrics.num_self_loops))
        numeric["density"].append(metrics.density)
        va, vp, fa, fp = features.active_passive_proportions(seq)
        for name, value in zip(props, (va, vp, fa, fp)):
            props[name].append(value)
        nominal.append(nominal_activity_type(seq).value)
        top1.append(metrics.top_indegree[0][0].name if metrics.top_indegree else "none")
        if metrics.central_transition is not None:
            (u, v), _ = metrics.central_transition
            transition.append(f"{u.name}>{v.name}")
        else:
            transition.append("none")

    for name, vals in numeric.items():
        bins, _ = features.dichotomize(vals, "equal_frequency")
        columns[name] = [str(b) for b in bins]
    for name, vals in props.items():
        bins, _ = features.dichotomize(vals, "equal_width")
        columns[name] = [str(b) for b in bins]
    columns["nominal"] = nominal
    columns["top_activity"] = top1
    columns["central_transition"] = transition
    return columns, labels


def cmd_report(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    events = _read_events(args.events)
    if not events:
        raise CommandError(EXIT_EMPTY_EVENTS, "event store is empty")
    curr, tcurr = _build_sequences(events, cfg)
    sequences = curr if cfg.setup == Setup.CURR else tcurr
    out = Path(args.out_dir)

    if (args.student is None) != (args.week is None):
        raise CommandError(EXIT_BAD_INPUT, "--student and --week go together")
    if args.student is not None:
        key = (args.student, args.week)
        if key not in sequences:
            raise CommandError(
                EXIT_UNKNOWN_INSTANCE,
                f"no instance for student {args.student}, week {args.week}",
            )
        selected = [key]
    else:
        selected = sorted(sequences)

    metric_rows = [actgraph.METRICS_CSV_HEADER]
    for sid, week in selected:
        seq = sequences[(sid, week)]
        graph = actgraph.build_graph(seq)
        write_text_atomic(
            out / "dot" / f"s{sid}_w{week}.dot", actgraph.export_dot(graph, seq)
        )
        metric_rows.append(
            actgraph.metrics_csv_row(
                sid, week, cfg.setup.value, actgraph.compute_metrics(graph)
            )
        )
    write_text_atomic(out / "graph_metrics.csv", "\n".join(metric_rows) + "\n")

    columns, labels = _analysis_columns(sequences)
    ranking = svm.interaction_gain_ranking(columns, labels)
    gain_lines = ["feature_a,feature_b,gain"]
    gain_lines += [f"{a},{b},{gain:.6g}" for a, b, gain in ranking]
    write_text_atomic(out / "interaction_gain.csv", "\n".join(gain_lines) + "\n")

    for name in sorted(columns):
        rows = svm.contingency_table(columns[name], labels)
        lines = ["category,non_dropout,dropout"]
        lines += [f"{cat},{n0},{n1}" for cat, n0, n1 in rows]
        write_text_atomic(out / f"contingency_{name}.csv", "\n".join(lines) + "\n")

    print(
        f"report: {len(selected)} DOT file(s), {len(ranking)} feature pairs, "
        f"{len(columns)} contingency tables -> {out}"
    )
    return 0


# ---------------------------------------------------------------- parser


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--course-start", dest="course_start", type=float)
    p.add_argument("--setup", choices=[s.value for s in Setup])
    p.add_argument("--model", dest="model_family",
                   choices=[m.value for m in ModelFamily])
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mooctrace",
        description="Activity-sequence graphs and dropout prediction for MOOC logs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic log pair")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--students", type=int, default=200)
    p.add_argument("--weeks", type=int, default=8)
    p.add_argument("--signal", type=float, default=0.8)
    p.add_argument("--mix", default="0.90,0.09,0.01")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse, filter and encode raw logs")
    p.add_argument("--clicks", required=True)
    p.add_argument("--forum", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-viewers", dest="min_unique_viewers", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="build train/test feature matrices")
    p.add_argument("--events", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--rare-threshold", dest="rare_threshold", type=int)
    p.add_argument("--test-id-min", dest="test_id_min", type=int)
    p.add_argument("--test-id-max", dest="test_id_max", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the cost-sensitive RBF SVM")
    p.add_argument("--train", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svm-c", dest="svm_c", type=float)
    p.add_argument("--svm-gamma", dest="svm_gamma", type=float)
    p.add_argument("--svm-tolerance", dest="svm_tolerance", type=float)
    p.add_argument("--svm-max-passes", dest="svm_max_passes", type=int)
    p.add_argument("--cost0", type=float)
    p.add_argument("--cost1", type=float)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model (optionally against another)")
    p.add_argument("--model-file", dest="model_file", required=True)
    p.add_argument("--model-file-b", dest="model_file_b")
    p.add_argument("--test", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ttest-out", dest="ttest_out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="DOT graphs and feature analyses")
    p.add_argument("--events", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--student", type=int)
    p.add_argument("--week", type=int)
    _add_config_flags(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CommandError as exc:
        print(json.dumps({"error": str(exc), "code": exc.code}), file=sys.stderr)
        return exc.code
    except ValueError as exc:
        # Bad values in config/flags/input files (including corrupt JSON).
        print(json.dumps({"error": str(exc), "code": EXIT_BAD_INPUT}), file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
