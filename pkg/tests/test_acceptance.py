"""Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line, and the pytest summary
repeats them under "acceptance criteria". Run them on their own with

    pytest tests/test_acceptance.py -v -s

or ``python3 tests/test_acceptance.py`` for the summary lines only.
"""

import math
import random
import sys
import time

import pytest
from hypothesis import given, settings, strategies as st

from mym import netsim
from mym.contentstore import ContentStore, StoreEntry
from mym.errors import NotFound, SelfFriendship
from mym.matchmaking import Match, Profile, is_match, load_profile, relevance
from mym.ontology import Taxonomy, sample_taxonomy
from mym.protocol import BROADCAST, Frame, FrameKind, decode_frame, encode_frame, encode_payload
from mym.socialgraph import Role, SocialGraph

import oracles

DATA = netsim.bundled_scenarios()[0].parent.parent


def scenario(name, *overrides):
    return netsim.load_scenario(DATA / "scenarios" / f"{name}.json", overrides)


def summary(name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})"


def criterion_exact_match():
    start = time.perf_counter()
    log, _ = netsim.run(scenario("friend_search"))
    elapsed = time.perf_counter() - start
    results = [e for e in log if e["kind"] == "FrameDelivered" and e["frame"] == "MATCH_RESULT"]
    found = [e for e in log if e["kind"] == "MatchFound" and e["person_id"] == "john"]
    best = found[0] if found else None
    ok = (
        bool(results) and best is not None
        and best["observer_distance"] <= 10.0
        and best["value"] >= 0.9999
        and best["classification"] == "exact_match"
        and elapsed < 1.0
    )
    return ok, f"relevance={best['value'] if best else None} in {elapsed:.3f}s"


def inbox_is_exactly_once(sim, sent_by_pair):
    for node, eng in sim.engines.items():
        per_src = {}
        for m in eng.inbox:
            per_src.setdefault(m.peer, []).append((m.n, m.text))
        for src, got in per_src.items():
            ns = [n for n, _ in got]
            if ns != list(range(1, len(ns) + 1)):
                return False
            if [t for _, t in got] != sent_by_pair.get((src, node), [])[: len(got)]:
                return False
    return True


def scripted_chats(cfg):
    out = {}
    for a in sorted(cfg.script, key=lambda a: a.at):
        if a.action == "chat":
            out.setdefault((a.node, a.args["to"]), []).append(a.args["text"])
    return out


def criterion_chat_exactly_once():
    start = time.perf_counter()
    cfg = scenario("two_peer_chat")
    sim = netsim.Simulator(cfg)
    sim.run()
    sent = scripted_chats(cfg)
    clean = inbox_is_exactly_once(sim, sent) and all(
        [m.text for m in sim.engines[dst].inbox if m.peer == src] == texts for (src, dst), texts in sent.items()
    )
    lossy_ok, delivered, total = True, 0, 0
    for seed in range(100):
        cfg = scenario("lossy_chat", "loss_prob=0.3", f"seed={seed}")
        sim = netsim.Simulator(cfg)
        sim.run()
        sent = scripted_chats(cfg)
        lossy_ok &= inbox_is_exactly_once(sim, sent)
        delivered += sum(len(e.inbox) for e in sim.engines.values())
        total += sum(len(v) for v in sent.values())
    elapsed = time.perf_counter() - start
    ok = clean and lossy_ok and elapsed < 10.0
    return ok, f"loss 0 in order={clean}; loss 0.3: {delivered}/{total} delivered, no duplicates={lossy_ok}; {elapsed:.2f}s"


def criterion_disjoint_control():
    t = sample_taxonomy()
    a = load_profile(DATA / "profiles" / "jazz_only.json", t)
    b = load_profile(DATA / "profiles" / "soccer_only.json", t)
    (x,), (y,) = a.interests, b.interests
    assert t.lca(x, y) == t.root
    score = relevance(a, b, 0.0, t)
    cls = is_match(score)
    ok = abs(score.value - 1 / 3) <= 1e-9 and cls is Match.NO_MATCH
    return ok, f"relevance={score.value!r} classification={cls}"


def criterion_monotone_in_distance():
    t = sample_taxonomy()
    rng = random.Random(2024)
    grid = [i * 0.5 for i in range(1001)] + [rng.uniform(0, 500) for _ in range(200)]
    grid.sort()
    concepts = list(range(1, len(t)))
    bad = 0
    for i in range(100):
        p = Profile(f"p{i}", "p", interests=frozenset(rng.sample(concepts, rng.randint(1, 6))))
        q = Profile(f"q{i}", "q", interests=frozenset(rng.sample(concepts, rng.randint(1, 6))))
        values = [relevance(p, q, d, t).value for d in grid]
        bad += sum(1 for u, v in zip(values, values[1:]) if v > u)
    return bad == 0, f"{bad} increases over 100 pairs x {len(grid)} distances"


_graph_ops = st.lists(
    st.tuples(st.sampled_from(["befriend", "post", "like", "group"]), st.integers(0, 3), st.integers(0, 3)),
    max_size=25,
)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1), _graph_ops)
def _no_self_or_lonely_friendship(n_people, ops):
    g = SocialGraph()
    pids = [f"p{i}" for i in range(n_people)]
    for pid in pids:
        g.incarnate(Profile(pid, pid), Role.SUPER)
    for op, i, j in ops:
        try:
            if op == "befriend":
                g.befriend(f"p{i}", f"p{j}")
            elif op == "post":
                g.post_content(f"p{i}", "post", "x")
            elif op == "like" and g.content:
                g.like(f"p{i}", sorted(g.content)[j % len(g.content)])
            elif op == "group":
                g.form_group(f"p{i}", f"g{j}")
        except (ValueError, LookupError, PermissionError):
            pass
    assert g.friend_edges() == []
    g.incarnate(Profile("x", "x"))
    g.incarnate(Profile("y", "y"))
    with pytest.raises(SelfFriendship):
        g.befriend("x", "x")
    assert all(e.src != e.dst for e in g.friend_edges())


def criterion_no_self_friendship():
    try:
        _no_self_or_lonely_friendship()
    except AssertionError as exc:
        return False, str(exc).splitlines()[0]
    return True, "200 hypothesis examples"


def criterion_hybrid_failover():
    cfg = scenario("failover")
    log, rep = netsim.run(cfg)
    (start, end), = cfg.wide_area_outages
    chats = [e for e in log if e["kind"] == "ChatDelivered"]
    checked, problems = 0, []
    for c in chats:
        t0 = c["sent_at"]
        if not start <= t0 < end:
            continue
        checked += 1
        a, b = netsim.move_node(cfg, c["src"], t0), netsim.move_node(cfg, c["node"], t0)
        in_range = math.dist(a, b) <= cfg.radio_range
        if in_range and c["transport"] != "short_range":
            problems.append(f"{c['text']!r} went {c['transport']}")
        if not in_range and c["t"] < end:
            problems.append(f"{c['text']!r} arrived during the outage")
    sent = sum(len(v) for v in scripted_chats(cfg).values())
    parked = sum(1 for c in chats if start <= c["sent_at"] < end and c["t"] >= end)
    ok = not problems and checked > 0 and parked > 0 and len(chats) == sent == rep.chats_delivered
    return ok, f"{len(chats)}/{sent} delivered, {checked} in window, {parked} store-and-forward; {problems or 'ok'}"


def criterion_oracle_equivalence():
    rng = random.Random(7)
    mismatches, pairs = 0, 0
    for _ in range(50):
        n = rng.randint(1, 20)
        parents = oracles.random_parents(rng, n)
        t = oracles.build(parents, Taxonomy)
        for a in range(n):
            bfs = oracles.undirected_bfs(parents, a)
            for b in range(n):
                pairs += 1
                if t.concept_distance(a, b) != bfs[b]:
                    mismatches += 1
                if t.concept_similarity(a, b) != oracles.brute_similarity(parents, a, b):
                    mismatches += 1
    return mismatches == 0, f"{pairs} pairs, {mismatches} mismatches"


def random_frame(rng):
    kind = rng.choice(list(FrameKind))
    dst = BROADCAST if kind in (FrameKind.BEACON, FrameKind.FRIEND_SEARCH) and rng.random() < 0.5 else rng.getrandbits(64) % BROADCAST
    body = {}
    for _ in range(rng.randint(0, 4)):
        key = "".join(rng.choice("abcdefghij_") for _ in range(rng.randint(1, 6)))
        body[key] = rng.choice([
            rng.randint(-(2 ** 40), 2 ** 40),
            rng.random(),
            "".join(chr(rng.choice([rng.randint(32, 126), rng.randint(0xA0, 0x2FFF)])) for _ in range(rng.randint(0, 20))),
            [rng.randint(0, 9) for _ in range(rng.randint(0, 3))],
            None,
            rng.random() < 0.5,
        ])
    return Frame(kind, rng.getrandbits(64), dst, rng.getrandbits(64), encode_payload(body))


def criterion_determinism():
    differing = [
        p.stem for p in netsim.bundled_scenarios()
        if netsim.dump_events(netsim.run(netsim.load_scenario(p))[0])
        != netsim.dump_events(netsim.run(netsim.load_scenario(p))[0])
    ]
    rng = random.Random(99)
    failures = 0
    for _ in range(10_000):
        f = random_frame(rng)
        data = encode_frame(f)
        if decode_frame(data) != f or encode_frame(decode_frame(data)) != data:
            failures += 1
    n = len(netsim.bundled_scenarios())
    return not differing and failures == 0, f"{n} scenarios, differing={differing}; 10000 frames, {failures} failures"


def criterion_store_bound():
    over, trace_mismatch = 0, 0
    for seed in range(50):
        rng = random.Random(seed)
        capacity = rng.randint(50, 500)
        store, ref = ContentStore(capacity), oracles.ReferenceLRU(capacity)
        next_id = 1
        for step in range(400):
            now = float(step)
            if rng.random() < 0.6 or not ref.items:
                size = rng.randint(1, capacity)
                if store.put(StoreEntry(next_id, b"\0" * size, created_at=now)) != ref.put(next_id, size):
                    trace_mismatch += 1
                next_id += 1
            else:
                key = rng.randint(max(1, next_id - 12), next_id - 1)
                hit = ref.get(key)
                try:
                    store.get(key, now)
                    trace_mismatch += not hit
                except NotFound:
                    trace_mismatch += hit
            over += store.used > capacity
    return over == 0 and trace_mismatch == 0, f"50 traces, {over} over capacity, {trace_mismatch} eviction mismatches"


CRITERIA = [
    ("identical co-located profiles are an exact match", criterion_exact_match),
    ("two-peer chat is exactly-once and in order", criterion_chat_exactly_once),
    ("disjoint interests score 1/3 and do not match", criterion_disjoint_control),
    ("relevance is non-increasing in distance", criterion_monotone_in_distance),
    ("no self-friendship, no friendship with fewer than two prosumers", criterion_no_self_friendship),
    ("hybrid failover during a wide-area outage", criterion_hybrid_failover),
    ("distance and similarity match the brute-force oracles", criterion_oracle_equivalence),
    ("deterministic event logs and codec round-trip", criterion_determinism),
    ("store stays within capacity and evicts like a reference LRU", criterion_store_bound),
]


@pytest.mark.parametrize("name, check", CRITERIA, ids=[fn.__name__.removeprefix("criterion_") for _, fn in CRITERIA])
def test_criterion(name, check, record_property):
    ok, detail = check()
    line = summary(name, ok, detail)
    record_property("acceptance", line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failed = 0
    for name, check in CRITERIA:
        ok, detail = check()
        print(summary(name, ok, detail))
        failed += not ok
    sys.exit(1 if failed else 0)
