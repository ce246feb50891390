"""Command-line entry point: ``chesseval <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .arena import ExhaustionRule, MatchConfig, MatchError, Protocol, ladder, run_match
from .dataset import (
    CORPUS,
    DEFAULT_BUCKETS,
    LONG,
    PRESETS,
    SELF_PLAY,
    SHORT,
    TRAIN_LONG,
    TRAIN_SHORT,
    DatasetError,
    HarvestStats,
    LabelStats,
    apply_split,
    fixed_depth,
    harvest_positions,
    label_best_moves,
    make_split,
    parse_buckets,
    read_records,
    self_play_endgames,
    write_records,
)
from .engine import EngineConfig, EngineError, SearchLimits, default_engine_path, spawn
from .metrics import (
    EvalItem,
    MetricsError,
    Report,
    item_outcomes,
    ladder_report,
    match_report,
)
from .notation import (
    STARTING_FEN,
    NotationError,
    parse_fen,
    parse_move_text,
    parse_pgn,
    render_fen,
    render_pgn,
    render_san,
)
from .policy import PolicyError, policy_from_spec
from .rating import KSchedule, RatingDomainError, estimate_rating
from .rules import apply_move, legal_moves, perft

log = logging.getLogger("chesseval")

RUNTIME_ERRORS = (
    EngineError,
    PolicyError,
    DatasetError,
    NotationError,
    MatchError,
    MetricsError,
    RatingDomainError,
    OSError,
)


class UsageError(Exception):
    pass


def _fen_arg(text: str) -> str:
    return STARTING_FEN if text == "startpos" else text


def _engine_cfg(args, skill: Optional[int] = None) -> EngineConfig:
    return EngineConfig(executable_path=args.engine, skill_level=skill, threads=args.threads)


def _policy(args, spec: str):
    try:
        return policy_from_spec(spec, args.engine, args.threads)
    except ValueError as exc:
        raise UsageError(f"bad policy spec {spec!r}: {exc}") from None


def _common(args) -> dict:
    return {"seed": args.seed, "engine": args.engine, "threads": args.threads, "jobs": args.jobs}


def _emit(report: Report, args) -> None:
    if args.report:
        Path(args.report).write_text(report.to_json(), encoding="utf-8")
    sys.stdout.write(report.to_text())


# --- subcommands -----------------------------------------------------------------------


def cmd_perft(args) -> int:
    pos = parse_fen(_fen_arg(args.fen))
    if args.depth < 1:
        raise UsageError("depth must be >= 1")
    if args.divide:
        total = 0
        for move in legal_moves(pos):
            n = perft(apply_move(pos, move), args.depth - 1) if args.depth > 1 else 1
            print(f"{move.uci()}: {n}")
            total += n
        print(f"\n{total}")
    else:
        start = time.perf_counter()
        n = perft(pos, args.depth)
        print(n)
        log.info("perft %d in %.2fs", args.depth, time.perf_counter() - start)
    return 0


def cmd_convert(args) -> int:
    first = args.inputs[0]
    if Path(first).is_file():
        if len(args.inputs) > 1:
            raise UsageError("give a single PGN file")
        games = parse_pgn(Path(first).read_text(encoding="utf-8-sig"))
        if args.to == "fen":
            for g in games:
                for pos in g.positions():
                    print(render_fen(pos))
        else:
            sys.stdout.write("\n".join(render_pgn(g) for g in games))
        return 0
    pos = parse_fen(_fen_arg(first))
    san, uci = [], []
    for text in args.inputs[1:]:
        move = parse_move_text(text, pos)
        san.append(render_san(move, pos))
        uci.append(move.uci())
        pos = apply_move(pos, move)
    if args.to == "pgn":
        print(" ".join(san))
    elif args.to == "uci":
        print(" ".join(uci))
    else:
        print(render_fen(pos))
    return 0


def cmd_build_dataset(args) -> int:
    if args.depth is not None:
        preset = fixed_depth(args.depth)
    elif args.preset:
        preset = PRESETS[args.preset]
    else:
        preset = TRAIN_LONG if args.round_class == LONG else TRAIN_SHORT
    harvest = HarvestStats()
    labels = LabelStats()
    with spawn(_engine_cfg(args)) as engine:
        if args.pgn:
            positions = harvest_positions(args.pgn, stats=harvest)
            source = CORPUS
        else:
            positions = self_play_endgames(
                engine, args.self_play, SearchLimits(depth=args.self_play_depth), seed=args.seed
            )
            source = SELF_PLAY
        if args.limit:
            positions = (p for i, p in zip(range(args.limit), positions))
        records = label_best_moves(positions, engine, preset, args.round_class, source, args.seed, labels)
        n = write_records(records, args.out)
        build = engine.name
    report = Report(
        kind="dataset",
        config={
            **_common(args),
            "engine_build": build,
            "preset": {"name": preset.name, "depth_range": list(preset.depth_range), "movetime_ms": preset.movetime_ms},
            "round_class": args.round_class,
            "source": args.pgn or f"self-play:{args.self_play}",
            "out": args.out,
        },
        metrics={"records": n, "games": harvest.games, "skipped_games": harvest.skipped_games,
                 "duplicates": harvest.duplicates, "skipped_terminal": labels.skipped_terminal,
                 "engine_errors": labels.engine_errors},
    )
    _emit(report, args)
    return 0


def cmd_split(args) -> int:
    try:
        buckets = parse_buckets(args.buckets) if args.buckets else DEFAULT_BUCKETS
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = []
    for path in args.records:
        records.extend(read_records(path))
    manifest = make_split(records, args.eval_size, buckets, args.seed, args.engine_build)
    Path(args.manifest).write_text(manifest.to_json() + "\n", encoding="utf-8")
    train, evals = apply_split(records, manifest)
    if args.train_out:
        write_records(train, args.train_out)
    if args.eval_out:
        write_records(evals, args.eval_out)
    report = Report(
        kind="split",
        config={**_common(args), "eval_size": args.eval_size, "buckets": args.buckets or "default",
                "records": args.records, "manifest": args.manifest},
        metrics={"eval": len(manifest.eval_ids), "train": len(manifest.train_ids)},
        breakdown={"fractions": manifest.fractions(), "targets": manifest.targets},
    )
    _emit(report, args)
    return 0


def cmd_accuracy(args) -> int:
    records = read_records(args.items)
    if args.limit:
        records = records[: args.limit]
    items = [EvalItem.from_record(r) for r in records]
    policy = _policy(args, args.policy)
    try:
        outcomes = item_outcomes(policy, items, args.seed)
    finally:
        policy.close()
    legal = sum(o.legal for o in outcomes) / len(outcomes)
    best = sum(o.best for o in outcomes) / len(outcomes)
    per_bucket = {}
    for b in DEFAULT_BUCKETS:
        sub = [o for o, r in zip(outcomes, records) if b.contains(r.fullmove_number)]
        if sub:
            per_bucket[b.name] = {
                "n": len(sub),
                "legal_move_accuracy": sum(o.legal for o in sub) / len(sub),
                "best_move_accuracy": sum(o.best for o in sub) / len(sub),
            }
    report = Report(
        kind="accuracy",
        config={**_common(args), "policy": args.policy, "items": args.items, "n_items": len(items)},
        metrics={"legal_move_accuracy": legal, "best_move_accuracy": best},
        breakdown={"buckets": per_bucket},
    )
    _emit(report, args)
    return 0


def _match_cfg(args) -> MatchConfig:
    protocol = Protocol.ELO if args.protocol == "elo" else Protocol.LM_MATCH
    fallback = _engine_cfg(args) if protocol is Protocol.LM_MATCH else None
    return MatchConfig(
        protocol=protocol,
        exhaustion_rule=ExhaustionRule(args.exhaustion),
        fallback_engine=fallback,
        fallback_limits=SearchLimits(depth=args.fallback_depth),
        move_cap=args.move_cap,
        seed=args.seed,
        jobs=args.jobs,
    )


def cmd_arena(args) -> int:
    cfg = _match_cfg(args)
    white, black = _policy(args, args.white), _policy(args, args.black)
    try:
        result = run_match(white, black, args.games, cfg)
    finally:
        white.close()
        black.close()
    config = {**_common(args), "white": args.white, "black": args.black, "games": args.games, "match": cfg.echo()}
    Path(args.pgn).write_text(result.pgn(), encoding="utf-8")
    if args.telemetry:
        Path(args.telemetry).write_text(
            json.dumps({"config": config, "match": result.as_dict(timing=True)}, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    _emit(match_report(result, {**config, "pgn": args.pgn}, args.draw_weight), args)
    return 0


def cmd_ladder(args) -> int:
    try:
        skills = [int(s) for s in args.skills.split(",")]
        k_schedule = KSchedule.parse(args.k_schedule) if args.k_schedule else None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _match_cfg(args)
    policy = _policy(args, args.policy)
    try:
        rungs = ladder(
            policy,
            skills,
            args.games,
            cfg,
            engine_path=args.engine,
            engine_limits=SearchLimits(movetime_ms=args.engine_movetime),
            threads=args.threads,
            k_schedule=k_schedule,
        )
    finally:
        policy.close()
    if args.pgn_dir:
        out = Path(args.pgn_dir)
        out.mkdir(parents=True, exist_ok=True)
        for r in rungs:
            if r.result is not None:
                (out / f"skill{r.skill}.pgn").write_text(r.result.pgn(), encoding="utf-8")
    config = {
        **_common(args),
        "policy": args.policy,
        "skills": skills,
        "games_per_skill": args.games,
        "engine_movetime_ms": args.engine_movetime,
        "k_schedule": (k_schedule or KSchedule()).describe(),
        "match": cfg.echo(),
    }
    _emit(ladder_report(rungs, config), args)
    return 0 if all(r.error is None for r in rungs) else 1


def _parse_results(path: str) -> list[tuple[float, float]]:
    tokens = {"1": 1.0, "1-0": 1.0, "win": 1.0, "0": 0.0, "0-1": 0.0, "loss": 0.0,
              "0.5": 0.5, "1/2": 0.5, "1/2-1/2": 0.5, "draw": 0.5}
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].replace(",", " ").strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or parts[0].lower() not in tokens:
                raise DatasetError(f"{path}:{lineno}: expected 'RESULT OPPONENT_ELO'")
            try:
                out.append((tokens[parts[0].lower()], float(parts[1])))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: bad opponent Elo {parts[1]!r}") from None
    return out


def cmd_rate(args) -> int:
    try:
        k_schedule = KSchedule.parse(args.k_schedule) if args.k_schedule else KSchedule()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = _parse_results(args.results)
    est = estimate_rating(results, k_schedule, args.initial_elo, args.bootstrap, args.seed)
    report = Report(
        kind="rating",
        config={**_common(args), "results": args.results, "k_schedule": k_schedule.describe(),
                "initial_elo": args.initial_elo, "bootstrap": args.bootstrap},
        metrics={"elo": est.elo, "uncertainty": est.uncertainty, "games": est.games, "mean_tail": est.mean_tail},
        breakdown={"interval": list(est.interval), "trajectory": list(est.trajectory)},
    )
    _emit(report, args)
    return 0


# --- parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--engine", default=default_engine_path(), help="UCI engine executable")
    common.add_argument("--threads", type=int, default=1, help="engine threads (default 1)")
    common.add_argument("--jobs", type=int, default=1, help="worker pool size (default 1)")
    common.add_argument("--report", help="write the JSON report here")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chesseval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"chesseval {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("perft", parents=[common], help="count leaf nodes of the legal move tree")
    p.add_argument("fen", help="FEN string or 'startpos'")
    p.add_argument("depth", type=int)
    p.add_argument("--divide", action="store_true", help="per-root-move counts")
    p.set_defaults(func=cmd_perft)

    p = sub.add_parser("convert", parents=[common], help="convert between PGN, FEN, SAN and UCI")
    p.add_argument("inputs", nargs="+", help="a PGN file, or a FEN/'startpos' followed by moves")
    p.add_argument("--to", choices=("fen", "pgn", "uci"), default="fen")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("build-dataset", parents=[common], help="label positions with engine best moves")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pgn", help="PGN file or directory")
    src.add_argument("--self-play", type=int, metavar="N", help="number of self-play games")
    p.add_argument("--class", dest="round_class", choices=(SHORT, LONG), default=SHORT)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--depth", type=int, help="fixed search depth, overrides --preset")
    p.add_argument("--self-play-depth", type=int, default=6)
    p.add_argument("--limit", type=int, help="stop after this many positions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("split", parents=[common], help="sample an evaluation set by round buckets")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--eval-size", type=int, required=True)
    p.add_argument("--buckets", help="e.g. 1-10:0.1,10-20:0.3,20-40:0.5,40-:0.1")
    p.add_argument("--manifest", required=True)
    p.add_argument("--train-out")
    p.add_argument("--eval-out")
    p.add_argument("--engine-build")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("accuracy", parents=[common], help="legal-move and best-move accuracy")
    p.add_argument("--policy", required=True)
    p.add_argument("--items", required=True)
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_accuracy)

    def match_flags(p):
        p.add_argument("--protocol", choices=("elo", "lm"), default="elo")
        p.add_argument("--exhaustion", choices=[r.value for r in ExhaustionRule], default="forfeit_loss")
        p.add_argument("--fallback-depth", type=int, default=10)
        p.add_argument("--move-cap", type=int, default=512)
        p.add_argument("--games", type=int, required=True)

    p = sub.add_parser("arena", parents=[common], help="play a match between two policies")
    p.add_argument("--white", required=True)
    p.add_argument("--black", required=True)
    match_flags(p)
    p.add_argument("--pgn", default="match.pgn")
    p.add_argument("--telemetry", help="per-move telemetry with timings (JSON)")
    p.add_argument("--draw-weight", type=float, default=0.5)
    p.set_defaults(func=cmd_arena)

    p = sub.add_parser("ladder", parents=[common], help="rate a policy against engine skill levels")
    p.add_argument("--policy", required=True)
    p.add_argument("--skills", default="0,1,2")
    match_flags(p)
    p.add_argument("--engine-movetime", type=int, default=100)
    p.add_argument("--k-schedule", help="K or LOW/THRESHOLD/HIGH, e.g. 20/2000/10")
    p.add_argument("--pgn-dir")
    p.set_defaults(func=cmd_ladder)

    p = sub.add_parser("rate", parents=[common], help="Elo estimate from game results")
    p.add_argument("--results", required=True, help="lines of 'RESULT OPPONENT_ELO'")
    p.add_argument("--k-schedule")
    p.add_argument("--initial-elo", type=float, default=1500.0)
    p.add_argument("--bootstrap", type=int, default=1000)
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1 or args.jobs < 1:
        parser.print_usage(sys.stderr)
        print("chesseval: error: --threads and --jobs must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"chesseval: error: {exc}", file=sys.stderr)
        return 2
    except RUNTIME_ERRORS as exc:
        print(f"chesseval: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
