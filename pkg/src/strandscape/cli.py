"""Command-line surface composing the pipeline.

Subcommands mirror the pipeline stages: parse, stats, scatter, distances,
embed, eval, cluster, export. Every artifact is deterministic given its
inputs and --seed; exit codes are 0 on success, 1 on input errors, 2 on
internal errors.

Options resolve in precedence order: explicit flag, then --config file
entry, then --preset value, then the built-in default. The config file is a
flat key/value format, one ``key = value`` per line with ``#`` comments;
keys are the long flag names without dashes (e.g. ``min-samples = 4``).
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback

import numpy as np

from . import __version__, bundle, distances, embedding, metrics, scattering, trajlog
from .dp import to_graph
from .errors import StrandscapeError

PRESETS = {
    "gao-p4t4": {
        "k": 100, "min-samples": 4, "n-neighbors": 5, "decay": 40.0,
        "landmarks": 2000, "delta": 0.0004, "epsilon": 0.00004,
    },
    "hata-39": {
        "k": 100, "min-samples": 4, "n-neighbors": 5, "decay": 40.0,
        "landmarks": 2000, "delta": 0.0001, "epsilon": 0.0001,
    },
    "machinek": {
        "k": 100, "min-samples": 4, "n-neighbors": 5, "decay": 40.0,
        "landmarks": 2000, "delta": 0.0004, "epsilon": 0.00001,
    },
}


class _Parser(argparse.ArgumentParser):
    """argparse, but usage errors exit with the input-error code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise StrandscapeError(f"{path}: {exc.strerror}") from exc


def _read_json(path: str) -> dict:
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise StrandscapeError(f"{path}: not valid JSON ({exc})") from exc


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_json(path: str | None, obj):
    text = _dump_json(obj)
    if path is None:
        sys.stdout.write(text)
    else:
        _write_text(path, text)


def _parse_config(path: str) -> dict:
    """Flat `key = value` file; values coerce to int, float, bool or str."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StrandscapeError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise StrandscapeError(f"{path}:{lineno}: empty key or value")
        for cast in (int, float):
            try:
                values[key] = cast(value)
                break
            except ValueError:
                continue
        else:
            if value.lower() in ("true", "false"):
                values[key] = value.lower() == "true"
            else:
                values[key] = value
    return values


class _Options:
    """Flag > config file > preset > default resolution."""

    def __init__(self, args):
        self.args = args
        self.config = _parse_config(args.config) if getattr(args, "config", None) else {}
        preset = getattr(args, "preset", None)
        if preset is not None and preset not in PRESETS:
            raise StrandscapeError(
                f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"
            )
        self.preset = PRESETS[preset] if preset else {}

    def get(self, key: str, default):
        flag_value = getattr(self.args, key.replace("-", "_"), None)
        if flag_value is not None:
            return flag_value
        if key in self.config:
            return self.config[key]
        if key in self.preset:
            return self.preset[key]
        return default


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--preset", help="named defaults: " + ", ".join(sorted(PRESETS)))
    sub.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    sub.add_argument("--threads", type=int, default=1,
                     help="module-internal parallelism")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strandscape",
                     description="DNA reaction trajectory landscapes and kinetics")
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("parse", parents=[], help="parse a trajectory log",
                            description="Parse a first-step-mode trajectory log "
                                        "into a dataset JSON.")
    p.add_argument("log", help="trajectory log file")
    p.add_argument("-o", "--output", required=True, help="dataset JSON path")
    p.add_argument("--probability-mode", choices=["visits", "holding_time"],
                   default="visits")
    p.add_argument("--reactive-rule",
                   help="'full-duplex' or 'dp:<pattern>' marking reactive ends")
    p.add_argument("--nonreactive-rule",
                   help="'dissociated:<strand-id>' marking non-reactive ends")
    p.add_argument("--subsample", type=float,
                   help="keep one record per interval of this many seconds")
    _add_common(p)

    p = commands.add_parser("stats", help="trajectory outcome statistics")
    p.add_argument("dataset", help="dataset JSON from 'parse'")
    p.add_argument("-o", "--output", help="stats JSON path (default stdout)")
    _add_common(p)

    p = commands.add_parser("scatter", help="scattering features per state")
    p.add_argument("dataset")
    p.add_argument("-o", "--output", required=True, help="row-major float64 binary")
    p.add_argument("--layout", required=True, help="layout sidecar JSON path")
    p.add_argument("--csv", help="also write features as CSV")
    p.add_argument("--scales", type=int, default=4, help="number of dyadic scales")
    p.add_argument("--t-lowpass", type=int, help="low-pass diffusion power")
    p.add_argument("--order", type=int, choices=[1, 2], default=1)
    p.add_argument("--aggregation", choices=["nodewise", "moments"],
                   default="nodewise")
    p.add_argument("--moments", default="1,2,3,4",
                   help="comma-separated moment exponents")
    _add_common(p)

    p = commands.add_parser("distances", help="neighbor tables over states")
    p.add_argument("dataset")
    p.add_argument("--mpt-out", help="passage-time neighbor table JSON")
    p.add_argument("--weights-out", help="importance weight table JSON")
    p.add_argument("--ged-out", help="edit-distance neighbor table JSON")
    p.add_argument("--binary", action="store_true",
                   help="write .bin compact tables next to the JSON outputs")
    p.add_argument("--k", type=int, help="neighbors per state (default 100)")
    p.add_argument("--ged-mode", choices=["auto", "exact", "random-projection"],
                   default="auto", help="auto stays exact below 5000 states")
    p.add_argument("--symmetrize", action="store_true",
                   help="use min of the two passage-time directions")
    p.add_argument("--trees", type=int, default=16)
    p.add_argument("--leaf-size", type=int, default=32)
    p.add_argument("--candidates", type=int,
                   help="candidate budget for random-projection queries")
    _add_common(p)

    p = commands.add_parser("embed", help="2D coordinates per state")
    p.add_argument("-o", "--output", required=True, help="embedding CSV (id,x,y)")
    p.add_argument("--json", dest="json_out", help="embedding JSON with diagnostics")
    p.add_argument("--method", choices=["phate", "stress", "phate-stress"],
                   default="phate")
    p.add_argument("--features", help="features binary from 'scatter'")
    p.add_argument("--layout", help="layout sidecar from 'scatter'")
    p.add_argument("--mpt", help="passage-time neighbor table JSON")
    p.add_argument("--weights", help="weight table JSON")
    p.add_argument("--ged", help="edit-distance neighbor table JSON")
    p.add_argument("--out-dim", type=int, default=2)
    p.add_argument("--n-neighbors", type=int)
    p.add_argument("--decay", type=float)
    p.add_argument("--landmarks", type=int)
    p.add_argument("--t", help="diffusion time: integer or 'auto'")
    p.add_argument("--mds-max-iter", type=int, default=300)
    p.add_argument("--mds-tol", type=float, default=1e-9)
    p.add_argument("--delta", type=float, help="passage-time stress weight")
    p.add_argument("--epsilon", type=float, help="edit-distance stress weight")
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--scale-targets", action="store_true",
                   help="min-max scale stress targets to [0, 1]")
    _add_common(p)

    p = commands.add_parser("eval", help="distortion and local preservation")
    p.add_argument("dataset")
    p.add_argument("embedding", help="embedding CSV from 'embed'")
    p.add_argument("--K", default="10,50,100",
                   help="comma-separated neighborhood sizes")
    p.add_argument("-o", "--output", help="metrics JSON path (default stdout)")
    p.add_argument("--csv", help="also write metrics as CSV")
    p.add_argument("--unique-transitions", action="store_true",
                   help="count each distinct transition once in distortion")
    _add_common(p)

    p = commands.add_parser("cluster", help="density clustering and trap table")
    p.add_argument("dataset")
    p.add_argument("embedding")
    p.add_argument("-o", "--output", required=True, help="clusters JSON path")
    p.add_argument("--csv", help="also write the trap table as CSV")
    p.add_argument("--eps", type=float, help="DBSCAN radius (default: elbow)")
    p.add_argument("--min-samples", type=int)
    p.add_argument("--time-threshold", type=float, default=0.0,
                   help="drop states below this cumulative time (s)")
    p.add_argument("--elbow-k", type=int, default=4)
    _add_common(p)

    p = commands.add_parser("export", help="write the viewer bundle")
    p.add_argument("dataset")
    p.add_argument("embedding")
    p.add_argument("-o", "--output", required=True, help="bundle JSON path")
    p.add_argument("--clusters", help="clusters JSON from 'cluster'")
    p.add_argument("--reaction", default="reaction", help="display name")
    _add_common(p)

    return parser


def _load_dataset(path: str) -> trajlog.ParsedLog:
    return trajlog.dataset_from_dict(_read_json(path))


def _parse_rules(args, parsed: trajlog.ParsedLog) -> list:
    rules = []
    if args.reactive_rule:
        if args.reactive_rule == "full-duplex":
            rules.append(trajlog.FullDuplex())
        elif args.reactive_rule.startswith("dp:"):
            rules.append(trajlog.DpPattern(dp=args.reactive_rule[3:]))
        else:
            raise StrandscapeError(
                f"bad --reactive-rule {args.reactive_rule!r}; "
                "use 'full-duplex' or 'dp:<pattern>'"
            )
    if args.nonreactive_rule:
        if args.nonreactive_rule.startswith("dissociated:"):
            rules.append(trajlog.Dissociated(strand=args.nonreactive_rule[12:]))
        elif args.nonreactive_rule == "dissociated":
            rules.append(trajlog.Dissociated(strand=parsed.strands.ids[-1]))
        else:
            raise StrandscapeError(
                f"bad --nonreactive-rule {args.nonreactive_rule!r}; "
                "use 'dissociated[:<strand-id>]'"
            )
    return rules


def _cmd_parse(args, opts: _Options) -> int:
    text = _read_text(args.log)
    parsed = trajlog.parse_log(text, probability_mode=args.probability_mode)
    if args.subsample is not None:
        subsampled = tuple(
            trajlog.subsample(t, args.subsample) for t in parsed.trajectories
        )
        parsed = trajlog.rebuild(parsed, subsampled,
                                 probability_mode=args.probability_mode)
    rules = _parse_rules(args, parsed)
    if rules:
        classified = trajlog.classify_all(parsed.trajectories, parsed.space, rules)
        parsed = trajlog.ParsedLog(
            strands=parsed.strands, trajectories=classified,
            space=parsed.space, transitions=parsed.transitions,
        )
    _write_json(args.output, trajlog.dataset_to_dict(parsed))
    return 0


def _cmd_stats(args, opts: _Options) -> int:
    parsed = _load_dataset(args.dataset)
    s = trajlog.stats(parsed.trajectories)
    _write_json(args.output, {
        "counts": {
            "total": s.n_total,
            "reactive": s.n_reactive,
            "nonreactive": s.n_nonreactive,
            "truncated": s.n_truncated,
        },
        "fraction_reactive": s.fraction_reactive,
        "mean_reaction_time": None if np.isnan(s.mean_reaction_time)
        else s.mean_reaction_time,
    })
    return 0


def _cmd_scatter(args, opts: _Options) -> int:
    parsed = _load_dataset(args.dataset)
    config = scattering.ScatteringConfig(
        J=args.scales,
        t_lowpass=args.t_lowpass,
        order=args.order,
        aggregation=args.aggregation,
        q_moments=tuple(int(q) for q in args.moments.split(",")),
    )
    graphs = [to_graph(s) for s in parsed.space.states]
    features, layout = scattering.scatter_batch(graphs, config, threads=args.threads)
    with open(args.output, "wb") as fh:
        fh.write(np.ascontiguousarray(features, dtype=np.float64).tobytes())
    _write_json(args.layout, {
        "n_rows": int(features.shape[0]),
        "n_cols": int(features.shape[1]),
        "dtype": "float64",
        "layout": layout.to_dict(),
        "config": {
            "J": config.J, "t_lowpass": config.t_lowpass, "order": config.order,
            "aggregation": config.aggregation, "q_moments": list(config.q_moments),
        },
    })
    if args.csv:
        lines = [",".join(repr(float(x)) for x in row) for row in features]
        _write_text(args.csv, "\n".join(lines) + "\n")
    return 0


def _load_features(features_path: str, layout_path: str) -> np.ndarray:
    meta = _read_json(layout_path)
    with open(features_path, "rb") as fh:
        blob = fh.read()
    arr = np.frombuffer(blob, dtype=np.float64)
    expected = meta["n_rows"] * meta["n_cols"]
    if arr.size != expected:
        raise StrandscapeError(
            f"{features_path}: has {arr.size} values, layout promises {expected}"
        )
    return arr.reshape(meta["n_rows"], meta["n_cols"])


def _cmd_distances(args, opts: _Options) -> int:
    if not args.mpt_out and not args.ged_out:
        raise StrandscapeError("nothing to do: pass --mpt-out and/or --ged-out")
    parsed = _load_dataset(args.dataset)
    k = int(opts.get("k", distances.DEFAULT_K))

    def emit(path: str, table: distances.NeighborTable):
        _write_json(path, table.to_dict())
        if args.binary:
            with open(path + ".bin", "wb") as fh:
                fh.write(table.to_bytes())

    if args.mpt_out:
        graph = distances.mpt_graph(parsed.transitions, parsed.space)
        emit(args.mpt_out, distances.mpt_knn(graph, k=k, symmetrize=args.symmetrize))
        if args.weights_out:
            _write_json(args.weights_out,
                        distances.WeightTable.from_space(parsed.space).to_dict())
    if args.ged_out:
        mode = args.ged_mode.replace("-", "_")
        emit(args.ged_out, distances.ged_knn(
            list(parsed.space.states), k=k, mode=mode,
            n_trees=args.trees, leaf_size=args.leaf_size, seed=args.seed,
            n_candidates=args.candidates,
        ))
    return 0


def _write_embedding_csv(path: str, coords: np.ndarray):
    lines = ["id," + ",".join("xy"[d] if d < 2 else f"c{d}"
                              for d in range(coords.shape[1]))]
    for i, row in enumerate(coords):
        lines.append(f"{i}," + ",".join(repr(float(v)) for v in row))
    _write_text(path, "\n".join(lines) + "\n")


def _read_embedding_csv(path: str) -> np.ndarray:
    lines = [ln for ln in _read_text(path).splitlines() if ln.strip()]
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) < 2:
            raise StrandscapeError(f"{path}:{lineno}: expected id,coord... row")
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise StrandscapeError(f"{path}:{lineno}: {exc}") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise StrandscapeError(f"{path}: missing or ragged coordinate rows")
    return np.array(rows, dtype=float)


def _cmd_embed(args, opts: _Options) -> int:
    result = None
    phate_emb = None
    if args.method in ("phate", "phate-stress"):
        if not args.features or not args.layout:
            raise StrandscapeError(f"method {args.method} needs --features and --layout")
        features = _load_features(args.features, args.layout)
        raw_t = opts.get("t", "auto")
        config = embedding.PhateConfig(
            n_neighbors=int(opts.get("n-neighbors", 5)),
            decay=float(opts.get("decay", 40.0)),
            n_landmarks=int(opts.get("landmarks", 2000)),
            t="auto" if raw_t == "auto" else int(raw_t),
            out_dim=args.out_dim,
            mds_max_iter=args.mds_max_iter,
            mds_tol=args.mds_tol,
            seed=args.seed,
        )
        phate_emb = embedding.phate(features=features, config=config)
        result = phate_emb

    if args.method in ("stress", "phate-stress"):
        delta = float(opts.get("delta", 0.0004))
        epsilon = float(opts.get("epsilon", 0.00004))
        nbrs_mpt = weights = nbrs_ged = None
        n = None
        if delta > 0:
            if not args.mpt or not args.weights:
                raise StrandscapeError("delta > 0 needs --mpt and --weights tables")
            nbrs_mpt = distances.NeighborTable.from_dict(_read_json(args.mpt))
            weights = distances.WeightTable.from_dict(_read_json(args.weights))
            n = nbrs_mpt.n
        if epsilon > 0:
            if not args.ged:
                raise StrandscapeError("epsilon > 0 needs a --ged table")
            nbrs_ged = distances.NeighborTable.from_dict(_read_json(args.ged))
            n = nbrs_ged.n if n is None else n
        config = embedding.StressConfig(
            delta=delta,
            epsilon=epsilon,
            learning_rate=args.learning_rate,
            max_iter=args.max_iter,
            out_dim=args.out_dim,
            seed=args.seed,
            scale_targets=args.scale_targets,
            init_coords=None if phate_emb is None else phate_emb.coords,
        )
        result = embedding.stress_embed(n, nbrs_mpt, weights, nbrs_ged, config)

    _write_embedding_csv(args.output, result.coords)
    if args.json_out:
        _write_json(args.json_out, {
            "coords": [[float(v) for v in row] for row in result.coords],
            "provenance": result.provenance,
            "diagnostics": {
                k: v for k, v in result.diagnostics.items()
                if not isinstance(v, np.ndarray)
            },
        })
    return 0


def _cmd_eval(args, opts: _Options) -> int:
    parsed = _load_dataset(args.dataset)
    coords = _read_embedding_csv(args.embedding)
    emb = embedding.Embedding(coords=coords)
    try:
        K_list = [int(k) for k in args.K.split(",") if k.strip()]
    except ValueError as exc:
        raise StrandscapeError(f"bad --K list {args.K!r}") from exc
    distortion = metrics.avg_distortion(
        emb, parsed.trajectories, unique_transitions=args.unique_transitions
    )
    tables = metrics.local_preservation(
        emb, np.array(parsed.space.energies), list(parsed.space.states), K_list
    )
    report = metrics.MetricsReport(
        avg_distortion=distortion,
        energy_diff={k: v[0] for k, v in tables.items()},
        ged_diff={k: v[1] for k, v in tables.items()},
        config={"K": K_list, "unique_transitions": args.unique_transitions},
    )
    _write_json(args.output, report.to_dict())
    if args.csv:
        _write_text(args.csv, report.to_csv())
    return 0


def _cmd_cluster(args, opts: _Options) -> int:
    parsed = _load_dataset(args.dataset)
    coords = _read_embedding_csv(args.embedding)
    if coords.shape[0] != len(parsed.space):
        raise StrandscapeError("embedding rows do not match dataset states")
    keep = metrics.filter_by_cumulative_time(parsed.space, args.time_threshold)
    if not keep:
        raise StrandscapeError("the time threshold filtered out every state")
    points = coords[keep]
    eps = args.eps
    if eps is None:
        eps = metrics.elbow_eps(points, k=args.elbow_k)
    min_samples = int(opts.get("min-samples", 4))
    cr = metrics.dbscan(points, eps=eps, min_samples=min_samples, state_ids=keep)
    traps = metrics.kinetic_traps(cr, parsed.space) if cr.n_clusters else []
    _write_json(args.output, {
        "eps": eps,
        "min_samples": min_samples,
        "time_threshold": args.time_threshold,
        "state_ids": list(cr.state_ids),
        "labels": list(cr.labels),
        "traps": [t.to_dict() for t in traps],
    })
    if args.csv:
        lines = ["cluster,state_id,dp,energy,cumulative_time"]
        for t in traps:
            lines.append(
                f"{t.cluster},{t.state_id},{t.dp},{t.energy!r},{t.cumulative_time!r}"
            )
        _write_text(args.csv, "\n".join(lines) + "\n")
    return 0


def _cmd_export(args, opts: _Options) -> int:
    parsed = _load_dataset(args.dataset)
    coords = _read_embedding_csv(args.embedding)
    emb = embedding.Embedding(coords=coords)
    clusters = None
    traps = None
    threshold = None
    if args.clusters:
        data = _read_json(args.clusters)
        clusters = metrics.ClusterResult(
            labels=tuple(data["labels"]),
            state_ids=tuple(data["state_ids"]),
            eps=float(data["eps"]),
            min_samples=int(data["min_samples"]),
        )
        traps = [
            metrics.TrapRecord(
                cluster=t["cluster"], state_id=t["state_id"], dp=t["dp"],
                energy=t["energy"], cumulative_time=t["cumulative_time"],
            )
            for t in data["traps"]
        ]
        threshold = data.get("time_threshold")
    doc = bundle.build_bundle(
        args.reaction, parsed, emb, clusters=clusters, traps=traps,
        time_threshold=threshold,
    )
    _write_text(args.output, bundle.dumps_bundle(doc))
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "stats": _cmd_stats,
    "scatter": _cmd_scatter,
    "distances": _cmd_distances,
    "embed": _cmd_embed,
    "eval": _cmd_eval,
    "cluster": _cmd_cluster,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = _Options(args)
        return _COMMANDS[args.command](args, opts)
    except (StrandscapeError, ValueError) as exc:
        print(f"strandscape {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
