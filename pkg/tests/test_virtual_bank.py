import numpy as np
import pytest

from edgecache.cache import Cache
from edgecache.errors import ConfigError
from edgecache.policies import LfuDeltaPolicy, LruNPolicy, build_policies
from edgecache.traces import generate_zipf_irm_trace
from edgecache.virtual_bank import VirtualCacheBank


def make_bank(capacity=2, ids=("lfu-inf", "lru-1"), **kw):
    return VirtualCacheBank(build_policies(ids), capacity, **kw)


class TestProcessRequest:
    def test_item_present_everywhere_all_hit(self):
        bank = make_bank()
        bank.step(0.0, "a")
        outcomes = bank.step(1.0, "a")
        assert all(o.hit for o in outcomes)
        assert all(o.evicted is None for o in outcomes)

    def test_first_request_misses_everywhere_no_eviction(self):
        bank = make_bank()
        outcomes = bank.step(0.0, "a")
        assert all(not o.hit for o in outcomes)
        assert all(o.evicted is None for o in outcomes)
        assert all("a" in c for c in bank.caches)

    def test_policies_evict_per_their_own_rules(self):
        # preload {a, b}; under LRU-1 'a' is least recent; under LFU 'b' is
        # least frequent. Cross-check against each policy running standalone.
        ids = ("lfu-inf", "lru-1")
        bank = make_bank(2, ids)
        stream = [(0.0, "a"), (1.0, "b"), (2.0, "a"), (3.0, "c")]
        for ts, item in stream:
            outcomes = bank.step(ts, item)
        by_id = {o.policy_id: o for o in outcomes}
        assert by_id["lru-1"].evicted == "b"  # b last seen at 1.0, a at 2.0
        assert by_id["lfu-inf"].evicted == "b"  # a has 2 requests, b has 1

        for pid in ids:
            policy = build_policies([pid])[0]
            cache = Cache(2)
            for ts, item in stream:
                policy.observe(ts, item)
                _, evicted = cache.process(ts, item, policy)
            assert evicted == by_id[pid].evicted
            assert set(cache.contents) == set(bank.caches[ids.index(pid)].contents)

    def test_conservation(self):
        bank = make_bank(3)
        trace = generate_zipf_irm_trace(20, 0.8, 500, 5.0, seed=1)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        for counts in bank.totals().values():
            assert counts["hits"] + counts["misses"] == 500

    def test_capacity_never_exceeded(self):
        bank = make_bank(2)
        trace = generate_zipf_irm_trace(30, 0.6, 300, 5.0, seed=2)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
            assert all(len(c) <= 2 for c in bank.caches)

    def test_requires_two_policies(self):
        with pytest.raises(ConfigError):
            VirtualCacheBank([LfuDeltaPolicy(None)], 2)

    def test_rejects_duplicate_ids(self):
        with pytest.raises(ConfigError):
            VirtualCacheBank([LruNPolicy(1), LruNPolicy(1)], 2)


class TestSync:
    def test_contents_equal_primary_after_sync(self):
        bank = make_bank(3)
        trace = generate_zipf_irm_trace(10, 0.8, 100, 5.0, seed=3)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        bank.sync_to_primary(["x", "y", "z"])
        for cache in bank.caches:
            assert set(cache.contents) == {"x", "y", "z"}

    def test_partial_primary_leaves_no_phantoms(self):
        bank = make_bank(3)
        bank.step(0.0, "a")
        bank.sync_to_primary(["q"])
        for cache in bank.caches:
            assert set(cache.contents) == {"q"}
            assert len(cache) == 1

    def test_windows_survive_sync(self):
        bank = make_bank(2, slot_requests=10)
        trace = generate_zipf_irm_trace(5, 0.8, 30, 5.0, seed=4)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        before = bank.hit_ratio_features().copy()
        bank.sync_to_primary(["0"])
        assert np.array_equal(bank.hit_ratio_features(), before)

    def test_bookkeeping_survives_sync(self):
        bank = make_bank(2)
        for ts, item in [(0.0, "a"), (1.0, "a"), (2.0, "b")]:
            bank.step(ts, item)
        bank.sync_to_primary(["b"])
        lfu = bank.policies[bank.policy_ids.index("lfu-inf")]
        assert lfu.score("a", 3.0) == 2  # counters kept despite membership reset

    def test_replay_equivalence_between_syncs(self):
        # the key correctness property: after a sync, each virtual cache
        # behaves exactly like a standalone cache seeded with the synced state
        ids = ("lfu-100", "lru-2")
        bank = VirtualCacheBank(build_policies(ids), 4)
        trace = generate_zipf_irm_trace(15, 0.8, 400, 5.0, seed=5)
        reqs = list(trace)
        for r in reqs[:100]:
            bank.step(r.timestamp, r.item_id)
        primary_items = ["3", "7", "1"]
        bank.sync_to_primary(primary_items)

        # standalone twins: same policy state is rebuilt by replaying the
        # prefix, then seeded with the synced membership
        twins = []
        for pid in ids:
            policy = build_policies([pid])[0]
            for r in reqs[:100]:
                policy.observe(r.timestamp, r.item_id)
            cache = Cache(4)
            cache.seed_contents(primary_items)
            twins.append((policy, cache))

        for r in reqs[100:400]:
            bank.step(r.timestamp, r.item_id)
            for policy, cache in twins:
                policy.observe(r.timestamp, r.item_id)
                cache.process(r.timestamp, r.item_id, policy)
            for k, (_, cache) in enumerate(twins):
                assert set(cache.contents) == set(bank.caches[k].contents)


class TestHitRatioFeatures:
    def test_all_zero_before_any_request(self):
        bank = make_bank()
        feats = bank.hit_ratio_features()
        assert feats.shape == (10, 2)
        assert np.all(feats == 0.0)

    def test_latest_slot_ratio(self):
        bank = make_bank(capacity=1, ids=("lfu-inf", "lru-1"), slot_requests=100)
        # 37 hits in the slot: first request misses, then 37 repeats hit,
        # then 62 distinct items miss
        bank.step(0.0, "a")
        for i in range(37):
            bank.step(1.0 + i, "a")
        for i in range(62):
            bank.step(50.0 + i, f"junk{i}")
        feats = bank.hit_ratio_features()
        assert feats[-1, 0] == pytest.approx(0.37)

    def test_matrix_recomputable_from_slot_log(self):
        bank = make_bank(3, ("lfu-inf", "lru-1"), slot_requests=100)
        trace = generate_zipf_irm_trace(10, 1.0, 1000, 5.0, seed=6)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        feats = bank.hit_ratio_features()
        log = np.array(bank.slot_log)
        assert np.array_equal(feats, log[-10:])

    def test_zero_padding_before_warmup(self):
        bank = make_bank(3, slot_requests=100)
        trace = generate_zipf_irm_trace(10, 1.0, 250, 5.0, seed=7)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        feats = bank.hit_ratio_features()
        assert np.all(feats[:8] == 0.0)  # only 2 slots completed

    def test_values_within_unit_interval(self):
        bank = make_bank(2, slot_requests=10)
        trace = generate_zipf_irm_trace(5, 1.2, 200, 5.0, seed=8)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        feats = bank.hit_ratio_features()
        assert np.all((feats >= 0.0) & (feats <= 1.0))


class TestDiagnosticsDump:
    def test_csv_schema(self, tmp_path):
        bank = make_bank(2, slot_requests=10)
        trace = generate_zipf_irm_trace(5, 1.0, 35, 5.0, seed=9)
        for r in trace:
            bank.step(r.timestamp, r.item_id)
        path = tmp_path / "slots.csv"
        bank.dump_slot_log(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "slot,policy,hit_ratio"
        assert len(lines) == 1 + 3 * 2  # 3 completed slots x 2 policies
        assert lines[1].startswith("0,lfu-inf,")
