import numpy as np
import pytest

from core.queue_tier import (
    AdmissionConfig,
    ClassificationRule,
    LbQueue,
    QueueTier,
    QueueTierError,
    RuleSet,
    admit,
    classify,
)
from core.state import REQUEST_TYPES, EnqueueResult, RequestType


def _tier(*specs):
    return QueueTier([LbQueue(qid, cap) for qid, cap in specs])


def test_single_catch_all(make_request):
    rules = RuleSet([ClassificationRule(1, "Q0")])
    for rtype in REQUEST_TYPES:
        assert classify(make_request(rtype=rtype), rules) == "Q0"


def test_rank_order_decides(make_request):
    rules = RuleSet([
        ClassificationRule(9, "Q0"),
        ClassificationRule(1, "Q2", rtypes=frozenset({RequestType.EMAIL})),
    ])
    assert classify(make_request(rtype=RequestType.EMAIL), rules) == "Q2"
    assert classify(make_request(rtype=RequestType.GET), rules) == "Q0"


def test_url_prefix_and_priority_predicates(make_request):
    rules = RuleSet([
        ClassificationRule(1, "mail", url_prefix="/mail/"),
        ClassificationRule(2, "urgent", priorities=frozenset({0})),
        ClassificationRule(3, "rest"),
    ])
    assert classify(make_request(url_path="/mail/2"), rules) == "mail"
    assert classify(make_request(priority=0, url_path="/api/1"), rules) == "urgent"
    assert classify(make_request(priority=3), rules) == "rest"


def test_rule_set_validation():
    with pytest.raises(QueueTierError, match="unique"):
        RuleSet([ClassificationRule(1, "a"), ClassificationRule(1, "b")])
    with pytest.raises(QueueTierError, match="catch-all"):
        RuleSet([ClassificationRule(1, "a", priorities=frozenset({0}))])


def test_classify_matches_brute_force_scan(make_request):
    rng = np.random.default_rng(2024)
    paths = ["/api/0", "/api/1", "/mail/0", "/files/3", "/static/2"]
    for _ in range(20):
        n_rules = int(rng.integers(1, 6))
        ranks = rng.permutation(20)[:n_rules + 1]
        rules = []
        for rank in ranks[:-1]:
            rtypes = None
            if rng.random() < 0.5:
                rtypes = frozenset(REQUEST_TYPES[i] for i in rng.choice(8, size=int(rng.integers(1, 4)), replace=False))
            priorities = frozenset({int(rng.integers(4))}) if rng.random() < 0.4 else None
            prefix = str(rng.choice(["/api/", "/mail/", "/files/"])) if rng.random() < 0.3 else None
            rules.append(ClassificationRule(int(rank), f"q{rank}", rtypes, priorities, prefix))
        rules.append(ClassificationRule(int(ranks[-1]), "catch", None, None, None))
        rule_set = RuleSet(rules)

        by_rank = sorted(rules, key=lambda r: r.order)
        for _ in range(50):
            request = make_request(
                rtype=REQUEST_TYPES[int(rng.integers(8))],
                priority=int(rng.integers(4)),
                url_path=paths[int(rng.integers(len(paths)))],
            )
            expected = None
            for rule in by_rank:
                ok = ((rule.rtypes is None or request.rtype in rule.rtypes)
                      and (rule.priorities is None or request.priority in rule.priorities)
                      and (rule.url_prefix is None or request.url_path.startswith(rule.url_prefix)))
                if ok:
                    expected = rule.queue_id
                    break
            assert classify(request, rule_set) == expected


def test_admit(make_request):
    cfg = AdmissionConfig(ssl_offload_delay=0.002)
    assert admit(make_request(secured=False), cfg, 5.0) == 5.0
    assert admit(make_request(secured=True), cfg, 5.0) == pytest.approx(5.002)
    assert admit(make_request(secured=True), AdmissionConfig(0.0), 5.0) == 5.0


def test_capacity_bound_and_dropped_ledger(make_request):
    tier = _tier(("q", 1))
    assert tier.enqueue("q", make_request(id=1), 0.0) is EnqueueResult.ACCEPTED
    assert tier.enqueue("q", make_request(id=2), 0.5) is EnqueueResult.OVERFLOWED
    assert tier.dropped == [(2, "q", 0.5)]
    assert tier.depth("q") == 1
    assert tier.conserved()


def test_unbounded_queue(make_request):
    tier = _tier(("q", None))
    for i in range(20_000):
        tier.enqueue("q", make_request(id=i), float(i))
    assert tier.depth("q") == 20_000
    with pytest.raises(QueueTierError):
        LbQueue("bad", 0)


def test_fifo_within_queue(make_request):
    tier = _tier(("q", 10))
    for i in range(5):
        tier.enqueue("q", make_request(id=i), float(i))
    pulled = [tier.pull(["q"], 1, 10.0)[0] for _ in range(5)]
    assert [p.request.id for p in pulled] == [0, 1, 2, 3, 4]
    assert [p.wait for p in pulled] == [10.0, 9.0, 8.0, 7.0, 6.0]


def test_subscription_order_then_fifo(make_request):
    tier = _tier(("Q_high", 10), ("Q_low", 10))
    tier.enqueue("Q_high", make_request(id=0), 0.0)   # a
    tier.enqueue("Q_low", make_request(id=1), 0.0)    # b
    tier.enqueue("Q_low", make_request(id=2), 0.0)    # c
    batch = tier.pull(["Q_high", "Q_low"], 2, 1.0)
    assert [p.request.id for p in batch] == [0, 1]
    assert [p.queue_id for p in batch] == ["Q_high", "Q_low"]


def test_empty_pull_and_bad_arguments(make_request):
    tier = _tier(("a", 5), ("b", 5))
    assert tier.pull(["a", "b"], 4, 0.0) == []
    with pytest.raises(QueueTierError):
        tier.pull(["a"], 0, 0.0)
    with pytest.raises(QueueTierError):
        tier.pull(["nope"], 1, 0.0)
    with pytest.raises(QueueTierError):
        tier.enqueue("nope", make_request(), 0.0)
    with pytest.raises(QueueTierError):
        tier.depth("nope")


def test_depth_arithmetic(make_request):
    tier = _tier(("q", 10))
    assert tier.depth("q") == 0
    for i in range(3):
        tier.enqueue("q", make_request(id=i), 0.0)
    tier.pull(["q"], 2, 1.0)
    assert tier.depth("q") == 1


def test_randomized_interleavings(make_request):
    rng = np.random.default_rng(7)
    queue_ids = ["q0", "q1", "q2"]
    tier = _tier(("q0", 4), ("q1", 6), ("q2", None))
    enqueued, pulled = [], []
    accepted_order = {qid: [] for qid in queue_ids}
    now = 0.0
    for step in range(3000):
        now += float(rng.exponential(0.1))
        if rng.random() < 0.55:
            qid = queue_ids[int(rng.integers(3))]
            request = make_request(id=step)
            enqueued.append(step)
            if tier.enqueue(qid, request, now) is EnqueueResult.ACCEPTED:
                accepted_order[qid].append(step)
        else:
            subscription = [str(q) for q in rng.permutation(queue_ids)]
            before = {qid: tier.depth(qid) for qid in queue_ids}
            batch = tier.pull(subscription, int(rng.integers(1, 5)), now)
            assert all(p.wait >= 0 for p in batch)
            # Never take from position j while an earlier position still had work.
            positions = [subscription.index(p.queue_id) for p in batch]
            assert positions == sorted(positions)
            for p in batch:
                earlier = subscription[:subscription.index(p.queue_id)]
                assert all(before[q] == sum(1 for x in batch if x.queue_id == q) for q in earlier)
            for p in batch:
                assert accepted_order[p.queue_id].pop(0) == p.request.id
            pulled.extend(p.request.id for p in batch)
        assert tier.conserved()
        for qid in queue_ids:
            queue = tier.queues[qid]
            assert tier.depth(qid) == queue.offered - queue.overflowed - queue.pulled

    remaining = [r.id for q in tier.queues.values() for r, _ in q.entries]
    dropped = [rid for rid, _, _ in tier.dropped]
    assert sorted(pulled + remaining + dropped) == sorted(enqueued)
