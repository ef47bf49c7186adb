"""Command-line front door.

Exit codes: 0 success, 1 domain error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Optional, Sequence

from . import netsim
from .errors import MymError
from .matchmaking import MatchParams, is_match, load_profile, relevance
from .ontology import Taxonomy, load_taxonomy, sample_taxonomy
from .socialgraph import load_log, replay


def fmt(x: float) -> str:
    """Six decimals, round-half-even on the shortest decimal form of ``x``."""
    return str(Decimal(repr(float(x))).quantize(Decimal("0.000001"), rounding=ROUND_HALF_EVEN))


def _taxonomy(path: Optional[str]) -> Taxonomy:
    if path is None:
        return sample_taxonomy()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MymError(f"cannot read taxonomy {path}: {exc.strerror}") from None
    return load_taxonomy(text)


def cmd_sim_validate(args) -> int:
    cfg = netsim.load_scenario(args.scenario, _overrides(args))
    print(f"ok: {cfg.name or Path(args.scenario).stem}: {len(cfg.nodes)} nodes, "
          f"{len(cfg.script)} actions, {len(cfg.wide_area_outages)} outages")
    return 0


def _overrides(args) -> list[str]:
    out = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        out.append(f"seed={args.seed}")
    return out


def cmd_sim_run(args) -> int:
    cfg = netsim.load_scenario(args.scenario, _overrides(args))
    out = Path(args.out or os.environ.get("MYM_OUT_DIR") or "mym-out")
    sim = netsim.Simulator(cfg)
    log, report = sim.run()
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(netsim.dump_events(log), encoding="utf-8")
    (out / "metrics.csv").write_text(netsim.metrics_csv(report), encoding="utf-8")
    if args.dump_stores:
        with open(out / "stores.jsonl", "w", encoding="utf-8") as fh:
            for node_id, eng in sim.engines.items():
                for line in eng.store.dump().splitlines():
                    entry = json.loads(line)
                    entry["node"] = node_id
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")
    frames = sum(report.frames_sent.values())
    print(f"nodes={report.nodes} frames={frames} matches={report.matches_found} "
          f"chats_delivered={report.chats_delivered}")
    return 0


def cmd_match_score(args) -> int:
    t = _taxonomy(args.taxonomy)
    a = load_profile(args.profile_a, t)
    b = load_profile(args.profile_b, t)
    params = MatchParams()
    score = relevance(a, b, args.distance, t, params)
    print(f"similarity: {fmt(score.profile_similarity)}")
    print(f"proximity_factor: {fmt(score.proximity_factor)}")
    print(f"relevance: {fmt(score.value)}")
    print(f"classification: {is_match(score, params)}")
    return 0


def cmd_ontology_query(args) -> int:
    t = _taxonomy(args.taxonomy)
    need = 1 if args.op == "depth" else 2
    if len(args.paths) != need:
        print(f"mym ontology-query: {args.op} takes {need} concept path(s)", file=sys.stderr)
        return 2
    ids = [t.resolve(p) for p in args.paths]
    if args.op == "depth":
        print(t.depth(ids[0]))
    elif args.op == "lca":
        m = t.lca(*ids)
        print(t.path(m) or t.label(m))
    elif args.op == "dist":
        print(t.concept_distance(*ids))
    else:
        print(fmt(t.concept_similarity(*ids)))
    return 0


def cmd_graph_replay(args) -> int:
    try:
        text = Path(args.log).read_text(encoding="utf-8")
    except OSError as exc:
        raise MymError(f"cannot read {args.log}: {exc.strerror}") from None
    g = replay(load_log(text))
    if args.snapshot:
        Path(args.snapshot).write_text(json.dumps(g.snapshot(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(f"ops={len(g.log)} prosumers={len(g.prosumers)} friend_edges={len(g.friend_edges())} "
          f"content={len(g.content)} groups={len(g.groups)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mym", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("sim-run", cmd_sim_run, "run a scenario and write events.jsonl and metrics.csv"),
        ("sim-validate", cmd_sim_validate, "check a scenario without running it"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("scenario")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a scenario field")
        if name == "sim-run":
            sp.add_argument("--out", help="output directory (default $MYM_OUT_DIR or ./mym-out)")
            sp.add_argument("--dump-stores", action="store_true", help="also write stores.jsonl")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("match-score", help="relevance breakdown for two profile documents")
    sp.add_argument("profile_a")
    sp.add_argument("profile_b")
    sp.add_argument("--taxonomy")
    sp.add_argument("--distance", type=float, default=0.0)
    sp.set_defaults(func=cmd_match_score)

    sp = sub.add_parser("ontology-query", help="depth, lca, dist or sim of concept paths")
    sp.add_argument("op", choices=("depth", "lca", "dist", "sim"))
    sp.add_argument("paths", nargs="+")
    sp.add_argument("--taxonomy")
    sp.set_defaults(func=cmd_ontology_query)

    sp = sub.add_parser("graph-replay", help="replay a social-graph operation log")
    sp.add_argument("log")
    sp.add_argument("--snapshot", help="write the replayed graph as JSON")
    sp.set_defaults(func=cmd_graph_replay)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MymError as exc:
        print(f"mym {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
