import math

import numpy as np
import pytest

from aqtile.adaptation import split_tile
from aqtile.bench import SynthSpec, gen_data
from aqtile.engine import (
    Case,
    Engine,
    EngineConfig,
    ExploratoryQuery,
    SamplingState,
    adjust_rate,
    classify,
    draw_samples,
    persist_metadata,
)
from aqtile.bootstrap import InitConfig
from aqtile.estimator import AggregateSpec
from aqtile.index import Containment, Interval, MetadataStatus
from aqtile.oracle import ExactOracle

from test_index import make_tile

DOMAIN = (0.0, 1000.0, 0.0, 1000.0)


def grid_edges(n: int) -> np.ndarray:
    """Edge coordinates of an n x n init grid over DOMAIN (top edge extended)."""
    return np.linspace(0.0, np.nextafter(1000.0, np.inf), n + 1)


@pytest.fixture(scope="module")
def synth20k(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "synth20k.csv"
    spec = SynthSpec(n_objects=20_000, n_attributes=5, seed=99)
    gen_data(spec, path)
    return spec.descriptor(path)


def query(x0, x1, y0, y1, aggs, eps=0.01, gamma=0.95):
    return ExploratoryQuery(Interval(x0, x1), Interval(y0, y1), tuple(aggs), eps, gamma)


def fresh_engine(ds, seed=0, eps_grid=20, reuse=True, exact=False, **cfg_kw):
    cfg_kw.setdefault("min_batch", 10)
    return Engine(
        ds,
        cfg=EngineConfig(rng_seed=seed, **cfg_kw),
        init_cfg=InitConfig(grid_x=eps_grid, grid_y=eps_grid, bounds=DOMAIN),
        reuse_metadata=reuse,
        force_exact=exact,
    )


class TestClassify:
    def test_full_exact_is_case1(self):
        t = make_tile(0, 10, 0, 10, ax=[1, 2], ay=[1, 2])
        t.tracked = {2}
        t.absorb_batch(np.array([0, 1]), {2: np.array([1.0, 2.0])})
        assert classify(t, Containment.FULL, 2) is Case.CASE1

    def test_partial_exact_is_case3(self):
        t = make_tile(0, 10, 0, 10, ax=[1, 2], ay=[1, 2])
        t.tracked = {2}
        t.absorb_batch(np.array([0, 1]), {2: np.array([1.0, 2.0])})
        assert classify(t, Containment.PARTIAL, 2) is Case.CASE3

    def test_full_approximate_is_case2(self):
        t = make_tile(0, 10, 0, 10, ax=[1, 2, 3], ay=[1, 2, 3])
        t.tracked = {2}
        t.absorb_batch(np.array([0]), {2: np.array([1.0])})
        assert classify(t, Containment.FULL, 2) is Case.CASE2

    def test_fresh_split_child_is_case4(self):
        t = make_tile(0, 10, 0, 10, ax=[1, 2, 6], ay=[1, 2, 6])
        t.tracked = {2}
        t.absorb_batch(np.arange(3), {2: np.ones(3)})
        children = split_tile(t)
        assert classify(children[0], Containment.FULL, 2) is Case.CASE4


class TestDrawSamples:
    def test_rate_driven_batch(self):
        rng = np.random.default_rng(0)
        t = make_tile(0, 10, 0, 10, ax=np.zeros(100), ay=np.zeros(100))
        state = SamplingState(t, np.arange(100, dtype=np.int64), min_batch=5)
        got = draw_samples(state, 0.10, rng)
        assert len(got) == 10
        assert len(set(got.tolist())) == 10
        assert np.all(np.diff(got) > 0)
        assert set(got.tolist()) <= set(range(100))
        assert state.drawn == 10

    def test_clamped_to_eligible(self):
        rng = np.random.default_rng(0)
        t = make_tile(0, 10, 0, 10, ax=np.zeros(3), ay=np.zeros(3))
        state = SamplingState(t, np.arange(3, dtype=np.int64), min_batch=50)
        got = draw_samples(state, 0.5, rng)
        assert sorted(got.tolist()) == [0, 1, 2]

    def test_empty_eligible(self):
        rng = np.random.default_rng(0)
        t = make_tile(0, 10, 0, 10)
        state = SamplingState(t, np.empty(0, np.int64), min_batch=50)
        assert len(draw_samples(state, 1.0, rng)) == 0

    def test_cumulative_target_no_redraw(self):
        rng = np.random.default_rng(1)
        t = make_tile(0, 10, 0, 10, ax=np.zeros(100), ay=np.zeros(100))
        state = SamplingState(t, np.arange(100, dtype=np.int64), min_batch=5)
        first = draw_samples(state, 0.10, rng)
        second = draw_samples(state, 0.10, rng)  # same rate: target already met
        assert len(second) == 0
        third = draw_samples(state, 0.20, rng)
        assert len(third) == 10
        assert not set(first.tolist()) & set(third.tolist())


class TestAdjustRate:
    CFG = EngineConfig()

    def test_cap_applies(self):
        assert adjust_rate(0.05, 0.01, 0.05, self.CFG) == pytest.approx(0.10)

    def test_floor_applies(self):
        assert adjust_rate(0.0102, 0.01, 0.2, self.CFG) == pytest.approx(0.22)

    def test_capped_at_one(self):
        assert adjust_rate(1.0, 0.01, 0.8, self.CFG) == 1.0

    def test_infinite_error_uses_cap(self):
        assert adjust_rate(math.inf, 0.01, 0.25, self.CFG) == pytest.approx(0.5)


class TestPersistMetadata:
    def test_full_tile_scope_updates(self):
        rng = np.random.default_rng(2)
        t = make_tile(0, 10, 0, 10, ax=rng.uniform(0, 10, 100), ay=rng.uniform(0, 10, 100))
        t.tracked = {2}
        persist_metadata(t, np.arange(10), {2: rng.uniform(0, 1, 10)}, "full_tile")
        assert t.popcount == 10
        assert t.status(2) is MetadataStatus.APPROXIMATE
        persist_metadata(t, np.arange(10, 100), {2: rng.uniform(0, 1, 90)}, "full_tile")
        assert t.status(2) is MetadataStatus.EXACT

    def test_partial_region_scope_untouched(self):
        t = make_tile(0, 10, 0, 10, ax=[1, 2, 3], ay=[1, 2, 3])
        t.tracked = {2}
        persist_metadata(t, np.array([0, 1]), {}, "partial_region")
        assert t.popcount == 0
        assert t.metadata == {}


class TestExecute:
    def test_warm_full_tiles_zero_io(self, synth20k):
        eng = fresh_engine(synth20k)
        aggs = (AggregateSpec("sum", 2), AggregateSpec("mean", 3))
        # window aligned on true tile edges: every overlapping tile with
        # objects is fully contained, so exact metadata answers everything
        e = grid_edges(20)
        q = query(e[2], e[6], e[2], e[6], aggs, eps=0.05)
        eng.execute(q)  # Q0 builds the index; init attrs = {2, 3}
        res = eng.execute(q)
        assert res.stats.io_reads == 0
        for est in res.estimates.values():
            assert est.eps_est == 0.0
            assert est.exact

    def test_exact_mode_matches_oracle(self, synth20k):
        eng = fresh_engine(synth20k, exact=True)
        oracle = ExactOracle(synth20k, [2, 3])
        aggs = (
            AggregateSpec("count"), AggregateSpec("sum", 2),
            AggregateSpec("mean", 3), AggregateSpec("min", 2), AggregateSpec("max", 3),
        )
        rng = np.random.default_rng(5)
        eng.execute(query(0, 100, 0, 100, aggs, eps=0.0))
        for _ in range(8):
            x = np.sort(rng.uniform(0, 1000, 2))
            y = np.sort(rng.uniform(0, 1000, 2))
            q = query(x[0], x[1], y[0], y[1], aggs, eps=0.0)
            res = eng.execute(q)
            want = oracle.aggregate_query(q)
            for agg in aggs:
                w = want[agg]
                if w is None:
                    assert agg in res.errors
                    continue
                est = res.estimates[agg]
                assert est.value_hat == pytest.approx(w, rel=1e-9, abs=1e-9)
                assert est.ci_lo == est.ci_hi == est.value_hat

    def test_error_bound_contract(self, synth20k):
        eng = fresh_engine(synth20k, seed=11)
        oracle = ExactOracle(synth20k, [2])
        aggs = (AggregateSpec("sum", 2),)
        eng.execute(query(450, 550, 450, 550, aggs, eps=0.05))
        rng = np.random.default_rng(6)
        x0, y0 = 450.0, 450.0
        for _ in range(15):
            x0 = min(max(x0 + rng.uniform(-30, 30), 0), 900)
            y0 = min(max(y0 + rng.uniform(-30, 30), 0), 900)
            q = query(x0, x0 + 100, y0, y0 + 100, aggs, eps=0.05)
            res = eng.execute(q)
            est = res.estimates[aggs[0]]
            assert est.eps_est <= 0.05 or est.exact
            exact = oracle.aggregate_query(q)[aggs[0]]
            region = res.estimates[AggregateSpec("count")].value_hat if AggregateSpec("count") in res.estimates else None

    def test_sampling_reads_less_than_region(self, synth20k):
        eng = fresh_engine(synth20k, seed=3)
        aggs = (AggregateSpec("count"), AggregateSpec("sum", 2))
        eng.execute(query(100, 300, 100, 300, aggs, eps=0.05))
        # shift into fresh territory: partial tiles must sample, not drain
        q = query(120, 320, 100, 300, aggs, eps=0.05)
        res = eng.execute(q)
        region = res.estimates[AggregateSpec("count")].value_hat
        est = res.estimates[AggregateSpec("sum", 2)]
        assert est.eps_est <= 0.05 or est.exact
        assert 0 < res.stats.io_reads < region

    def test_determinism_same_seed(self, synth20k):
        aggs = (AggregateSpec("sum", 2), AggregateSpec("mean", 3))
        queries = [
            query(100, 300, 100, 300, aggs, eps=0.02),
            query(150, 350, 120, 320, aggs, eps=0.02),
            query(200, 400, 140, 340, aggs, eps=0.02),
        ]
        runs = []
        for _ in range(2):
            eng = fresh_engine(synth20k, seed=42)
            trace = []
            for q in queries:
                res = eng.execute(q)
                trace.append((
                    res.stats.io_reads,
                    tuple((a.label(), e.value_hat, e.ci_lo, e.ci_hi)
                          for a, e in sorted(res.estimates.items(),
                                             key=lambda kv: kv[0].label())),
                ))
            runs.append(trace)
        assert runs[0] == runs[1]

    def test_io_accounting_matches_counter(self, synth20k):
        eng = fresh_engine(synth20k, seed=13)
        aggs = (AggregateSpec("sum", 2),)
        eng.execute(query(100, 300, 100, 300, aggs, eps=0.02))
        res = eng.execute(query(140, 340, 130, 330, aggs, eps=0.02))
        assert res.stats.io_reads == eng.io.reads

    def test_minmax_exact_fallback(self, synth20k):
        eng = fresh_engine(synth20k, seed=21)
        oracle = ExactOracle(synth20k, [2])
        aggs = (AggregateSpec("min", 2), AggregateSpec("max", 2))
        eng.execute(query(100, 300, 100, 300, aggs, eps=0.1))
        q = query(130, 330, 100, 300, aggs, eps=0.1)
        res = eng.execute(q)
        want = oracle.aggregate_query(q)
        for agg in aggs:
            est = res.estimates[agg]
            assert est.value_hat == want[agg]
            assert est.ci_lo == est.ci_hi
            assert est.exact

    def test_minmax_from_exact_tiles_zero_io(self, synth20k):
        eng = fresh_engine(synth20k, seed=22)
        aggs = (AggregateSpec("min", 2), AggregateSpec("max", 2))
        e = grid_edges(20)
        q = query(e[2], e[6], e[2], e[6], aggs, eps=0.1)
        eng.execute(q)   # init computes exact metadata incl. min/max
        res = eng.execute(q)
        assert res.stats.io_reads == 0

    def test_eps_zero_unchanged_by_splits(self, synth20k):
        # same exact answers whether or not adaptation splits along the way
        oracle = ExactOracle(synth20k, [2])
        aggs = (AggregateSpec("sum", 2), AggregateSpec("count"))
        q_list = [
            query(100, 420, 100, 420, aggs, eps=0.0),
            query(150, 470, 120, 440, aggs, eps=0.0),
        ]
        for threshold in (40, 100_000):  # heavy splitting vs none
            eng = fresh_engine(synth20k, seed=7, eps_grid=8,
                               split_threshold=threshold, exact=True)
            for q in q_list:
                res = eng.execute(q)
                want = oracle.aggregate_query(q)
                for agg in aggs:
                    assert res.estimates[agg].value_hat == pytest.approx(
                        want[agg], rel=1e-9
                    )

    def test_splits_counted_and_children_resampled(self, synth20k):
        eng = fresh_engine(synth20k, seed=8, eps_grid=4, split_threshold=200)
        aggs = (AggregateSpec("sum", 2),)
        r0 = eng.execute(query(100, 400, 100, 400, aggs, eps=0.05))
        # 4x4 grid on 20k objects -> 1250 per tile: overlapping leaves split
        r1 = eng.execute(query(130, 430, 100, 400, aggs, eps=0.05))
        assert r1.stats.tiles_split > 0
        assert eng.index.tiles_split >= r1.stats.tiles_split
        assert r1.stats.io_reads > 0  # split children lost their metadata

    def test_metadata_persists_for_full_tiles_only(self, synth20k):
        eng = fresh_engine(synth20k, seed=9)
        aggs = (AggregateSpec("sum", 3),)  # attr 3 not in init set of this query? it is: init attrs = q0 aggs
        eng.execute(query(100, 300, 100, 300, aggs, eps=0.02))
        q = query(125, 325, 100, 300, aggs, eps=0.02)
        res1 = eng.execute(q)
        assert res1.stats.io_reads > 0
        # partial tiles re-sample every time, so repeating the same window
        # still costs I/O unless it is tile-aligned; but full tiles that were
        # topped up now answer from stored metadata
        res2 = eng.execute(q)
        assert res2.stats.io_reads <= res1.stats.io_reads

    def test_sample_only_engine_never_persists(self, synth20k):
        eng = fresh_engine(synth20k, seed=10, reuse=False)
        aggs = (AggregateSpec("sum", 2),)
        q = query(100, 300, 100, 300, aggs, eps=0.05)
        eng.execute(q)
        res1 = eng.execute(q)
        popcounts = {id(t): t.popcount for t in eng.index.leaves()}
        res2 = eng.execute(q)
        assert res1.stats.io_reads > 0
        assert res2.stats.io_reads > 0  # no reuse: pays again
        assert {id(t): t.popcount for t in eng.index.leaves()} == popcounts


class TestEmptyRegion:
    def test_empty_region_semantics(self, synth20k):
        eng = fresh_engine(synth20k)
        aggs = (
            AggregateSpec("count"), AggregateSpec("sum", 2),
            AggregateSpec("mean", 2), AggregateSpec("min", 2),
        )
        eng.execute(query(0, 1000, 0, 1000, aggs, eps=0.05))
        # [1000, 1000] x [1000, 1000] holds no objects (values < 1000)
        res = eng.execute(query(1000.5, 1001, 1000.5, 1001, aggs, eps=0.05))
        assert res.estimates[AggregateSpec("count")].value_hat == 0.0
        assert res.estimates[AggregateSpec("sum", 2)].value_hat == 0.0
        assert res.estimates[AggregateSpec("sum", 2)].exact
        assert AggregateSpec("mean", 2) in res.errors
        assert AggregateSpec("min", 2) in res.errors

    def test_unknown_attribute_rejected(self, synth20k):
        eng = fresh_engine(synth20k)
        with pytest.raises(ValueError):
            eng.execute(query(0, 10, 0, 10, (AggregateSpec("sum", 99),)))
        with pytest.raises(ValueError):
            eng.execute(query(0, 10, 0, 10, (AggregateSpec("sum", 0),)))  # axis
