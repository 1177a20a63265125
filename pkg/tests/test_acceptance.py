"""The ten end-to-end acceptance criteria, one test each.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""
import itertools
import math
import os
import random
import time

import pytest

from bftw import harness
from bftw.adversary import CoinBias, CountSkew
from bftw.committees import CommitteeNet, phase_a, phase_b, phase_b_trichotomy
from bftw.params import derive_params
from bftw.protocols import (AggregationSpec, CommitSchedule, RbcEquivocator, accepted_commits,
                            build_broadcast_tree, commit_envelopes, common_coin, consensus,
                            explore_c2c, explore_c2n, explore_lazy_consensus, explore_n2c,
                            make_oracle_witness_system, phase_king_exhaustive,
                            run_aggregation, run_reliable_broadcast)
from bftw.simnet import ASYNC, adversarial_policy

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def record(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _tree(ws, delta):
    return build_broadcast_tree(ws.valid_subjects(ws.honest[0]), ws.n, delta)


@pytest.fixture(scope="module")
def flood_report():
    cfg = harness.load_config(os.path.join(ROOT, "configs", "witness_flood.yaml"))
    assert cfg.params.n == 240 and cfg.params.t == 10 and len(cfg.seeds) == 50
    t0 = time.time()
    report = harness.run_experiment(cfg, workers=int(os.environ.get(harness.WORKERS_ENV, "1")))
    return cfg, report, time.time() - t0


def _check(rec, name):
    return next(c for c in rec["checks"] if c["name"] == name)


def test_criterion_1_witness_system_properties(flood_report):
    cfg, report, took = flood_report
    recs = report.seeds
    agree = sum(_check(r, "agreement")["ok"] for r in recs)
    member = sum(_check(r, "membership")["ok"] for r in recs)
    avail = [_check(r, "availability") for r in recs]
    good = sum(a["ok"] for a in avail)
    allowed = harness.allowed_failures(avail[0]["p"], len(recs))
    lowest = min(a["detail"]["available"] for a in avail)
    ok = agree == member == 50 and good >= 49 and 50 - good <= allowed and took <= 300
    record(1, ok, f"agreement {agree}/50, membership {member}/50, availability>=40 on {good}/50 "
                  f"(min {lowest}, allowed misses {allowed}), {took:.0f}s")


def test_criterion_2_invalidation_economics(flood_report):
    cfg, report, _ = flood_report
    p = cfg.params
    bound = 10 * p.b * p.n ** 2
    measured = [r["metrics"]["invalidated_pairs"] for r in report.seeds]
    p0 = derive_params(p.n, p.t, b=0.0, gamma=p.gamma, zeta=p.zeta)
    clean = []
    for seed in range(10):
        byz = random.Random(seed).sample(range(p.n), p.t)
        clean.append(phase_a(CommitteeNet(p0, byz, None, seed)).invalidated_pairs)
    ok = max(measured) <= bound and sum(measured) > 0 and set(clean) == {0}
    record(2, ok, f"max invalidated {max(measured)} <= {bound:.0f} over 50 seeds; b=0 gives {max(clean)}")


def test_criterion_3_phase_b_trichotomy():
    p = derive_params(120, 5, b=1 / 24, gamma=49, zeta=120)
    exceptions = misses = window = 0
    for seed in range(30):
        byz = sorted(random.Random(seed).sample(range(p.n), p.t))
        net = CommitteeNet(p, byz, CountSkew(byz, seed), seed)
        b = phase_b(net, phase_a(net))
        tri = phase_b_trichotomy(b, p)
        exceptions += len(tri["exceptions"])
        misses += len(tri["premise_misses"])
        window += tri["mid"]
    record(3, exceptions == 0 and window > 0,
           f"30 seeds, {exceptions} exceptions, {window} subjects in the middle band, "
           f"{misses} premise misses reported separately")


def test_criterion_4_phase_king_exhaustive():
    t0 = time.time()
    runs = branches = 0
    bad = []
    for n_loc, t_loc in ((4, 1), (7, 2)):
        for byz in itertools.combinations(range(n_loc), t_loc):
            hon = [v for v in range(n_loc) if v not in byz]
            for xs in itertools.product((0, 1), repeat=len(hon)):
                res = phase_king_exhaustive(n_loc, byz, dict(zip(hon, xs)))
                runs += 1
                branches += res["branches"]
                if not (res["agreement"] and res["validity"]):
                    bad.append((n_loc, byz, xs))
    took = time.time() - t0
    record(4, not bad and took <= 60, f"{runs} placements x inputs, {branches} branches, "
                                      f"{len(bad)} violations, {took:.1f}s")


def test_criterion_5_primitive_exhaustive():
    t0 = time.time()
    scenarios = {
        "lazy consensus unanimous": lambda: explore_lazy_consensus({0: "x", 1: "x", 2: "x"}),
        "lazy consensus split": lambda: explore_lazy_consensus({0: "x", 1: "x", 2: "y"}),
        "c2n": lambda: explore_c2n(),
        "c2n two senders": lambda: explore_c2n((0, 1)),
        "n2c honest sender": lambda: explore_n2c(True),
        "n2c byzantine sender": lambda: explore_n2c(False),
        "c2c": lambda: explore_c2c(),
    }
    states = 0
    violations = []
    for name, fn in scenarios.items():
        res = fn()
        states += res.states
        violations += [f"{name}: {v}" for v in res.violations]
    took = time.time() - t0
    record(5, not violations and took <= 120,
           f"{len(scenarios)} scenarios, {states} states, {len(violations)} violations, {took:.0f}s")


def test_criterion_6_broadcast_constants():
    K, K_rounds = 4, 6
    delta, beta = 3, 4
    rows = []
    ok = True
    for n in (27, 81, 243):
        ws = make_oracle_witness_system(n, 0, beta, alpha=0.5, seed=1)
        run = run_reliable_broadcast(ws, _tree(ws, delta), 5, "hello")
        delivered = all(d == ["hello"] for d in run.delivered(1).values()) and len(run.delivered(1)) == n
        msgs, rounds = run.honest_messages(), run.rounds
        ok &= delivered and msgs <= K * delta * beta and rounds <= K_rounds * math.log(n, 3)
        rows.append(f"n={n}: msgs/(delta*beta)={msgs / (delta * beta):.2f} "
                    f"rounds/log3(n)={rounds / math.log(n, 3):.2f}")
    record(6, ok, f"K={K} K'={K_rounds}; " + "; ".join(rows))


def test_criterion_7_async_agreement():
    worst = 0
    for seed in range(200):
        ws = make_oracle_witness_system(27, 2, 4, alpha=0.5, seed=seed, padding=1)
        tree = _tree(ws, 3)
        sender = sorted(ws.byzantine)[0]
        adv = RbcEquivocator(sorted(ws.byzantine), seed, ws=ws, tree=tree, origin=sender)
        run = run_reliable_broadcast(ws, tree, sender, None, mode=ASYNC, adversary=adv,
                                     policy=adversarial_policy(seed, ws.n), seed=seed)
        got = run.delivered(1)
        per_node = max((len(d) for d in got.values()), default=0)
        worst = max(worst, len({x for d in got.values() for x in d}), per_node)
    record(7, worst <= 1, f"200 adversarial schedules, largest honest delivered-value set {worst}")


def test_criterion_8_coin_statistics():
    t0 = time.time()
    ones = mismatches = 0
    for seed in range(1000):
        ws = make_oracle_witness_system(30, 1, 4, alpha=0.5, seed=seed, padding=1)
        tree = _tree(ws, 3)

        def factory(sess, ws=ws, tree=tree, seed=seed):
            return CoinBias(sorted(ws.byzantine), seed, k=1, target=0,
                            commit=lambda b, x, r: commit_envelopes(ws, tree, sess, b, x))
        coin = common_coin(ws, tree, 1, seed=seed, adversary_factory=factory)
        x = 0
        for v in coin.accepted.values():
            x ^= v
        mismatches += coin.value != x
        ones += coin.value
    took = time.time() - t0
    freq = ones / 1000
    record(8, 0.45 <= freq <= 0.55 and mismatches == 0 and took <= 120,
           f"P(bit=1)={freq:.3f}, {mismatches} XOR mismatches, {took:.0f}s")


def _consensus_system(seed):
    ws = make_oracle_witness_system(100, 49, 4, alpha=1 / 6, seed=seed, padding=1)
    return ws, _tree(ws, 7)


def test_criterion_9_consensus():
    valid = agree = 0
    for seed in range(40):
        ws, tree = _consensus_system(seed)
        rng = random.Random(seed)
        sched = [(0, b, rng.randint(0, 3)) for b in sorted(ws.byzantine)]
        res = consensus(ws, tree, {v: 1 for v in ws.honest}, byzantine_schedule=sched, seed=seed)
        valid += set(res.decisions.values()) == {1}
    for seed in range(40, 80):
        ws, tree = _consensus_system(seed)
        rng = random.Random(seed)
        props = {v: rng.randint(0, 1) for v in ws.honest}
        sched = [(rng.choice([0, 0, 1, 2]), b, rng.randint(0, 1)) for b in sorted(ws.byzantine)]
        res = consensus(ws, tree, props, byzantine_schedule=sched, seed=seed)
        decs = set(res.decisions.values())
        agree += len(decs) == 1 and None not in decs and len(res.decisions) == len(ws.honest)
    record(9, valid == 40 and agree == 40, f"unanimous decided honest value {valid}/40, "
                                           f"split agreed {agree}/40")


def test_criterion_10_aggregation_oracle():
    tally = {}
    for f in AggregationSpec.FUNCTIONS:
        good = 0
        for seed in range(20):
            ws = make_oracle_witness_system(30, 1, 4, alpha=0.5, seed=seed, padding=1)
            tree = _tree(ws, 3)
            spec = AggregationSpec(f, k=4)
            rng = random.Random(seed)
            inputs = {v: spec.sample_input(rng) for v in ws.honest}
            sched = [(rng.choice([0, 1, 2]), b, spec.sample_input(rng)) for b in sorted(ws.byzantine)]

            def factory(sess, ws=ws, tree=tree, sched=sched, seed=seed):
                return CommitSchedule(sorted(ws.byzantine), seed, sched,
                                      builder=lambda b, x: commit_envelopes(ws, tree, sess, b, x))
            run, sess = run_aggregation(ws, tree, spec, inputs, seed=seed, adversary_factory=factory)
            acc = accepted_commits(run, sess, tree, ws)
            expect = spec.fold(acc[v] for v in sorted(acc))
            outs = run.outputs(1)
            same = len(outs) == len(ws.honest) and all(o == [expect] for o in outs.values())
            included = all(acc.get(v) == spec.lift(inputs[v]) for v in ws.honest)
            good += same and included
        tally[f] = good
    record(10, all(g == 20 for g in tally.values()),
           ", ".join(f"{f} {g}/20" for f, g in tally.items()))
