import math
import random

import numpy as np
import pytest

from gpmisspec import reporting
from gpmisspec.estimators import OptimizerConfig
from gpmisspec.montecarlo import (
    ESTIMATORS,
    QUANTITIES,
    ReplicationFailure,
    ReplicationRecord,
    Scenario,
    aggregate,
    replication_inputs,
    run_experiment,
    run_replication,
    simulate_dataset,
)

FAST = OptimizerConfig(grid=6, xtol=1e-3, max_evals=150)


def small(**kw):
    base = dict(n=20, n_reps=3, quad_m=100, optimizer=FAST, master_seed=7)
    base.update(kw)
    return Scenario(**base)


def record(i, ell_ml, ell_cv, d=0.1, e=0.2):
    return ReplicationRecord(i, 1.0, ell_ml, 1.0, ell_cv, 0.0, 0.0, d, 2 * d, e, e / 2, 10, 10, True, True)


def test_defaults():
    sc = Scenario()
    t = sc.truth.matern0
    assert (t.sigma2, t.ell, t.nu, t.delta) == (1.0, 3.0, 10.0, 0.0625)
    assert sc.model_nu == 10.0 and sc.n == 100
    assert sc.box.sigma2_range == (0.01, 100.0) and sc.box.ell_range == (0.2, 10.0)
    assert sc.specification == "well-specified"
    assert Scenario(model_delta=0.01).specification == "misspecified"
    with pytest.raises(ValueError):
        Scenario(model_delta=0.001)


def test_replication_is_deterministic():
    sc = small()
    a, b = run_replication(sc, 1), run_replication(sc, 1)
    a.seconds = b.seconds = 0.0
    assert a == b
    assert a.d_ml >= -1e-10 and a.e_cv >= 0
    assert sc.box.contains(a.sigma2_ml, a.ell_ml) and sc.box.contains(a.sigma2_cv, a.ell_cv)


def test_replications_differ():
    sc = small()
    np.testing.assert_raises(AssertionError, np.testing.assert_array_equal,
                             simulate_dataset(sc, 0).y, simulate_dataset(sc, 1).y)


def test_data_sharing_between_models():
    well, mis = small(), small(model_delta=0.01)
    assert not np.array_equal(simulate_dataset(well, 0).y, simulate_dataset(mis, 0).y)
    well_s, mis_s = small(shared_data=True), small(model_delta=0.01, shared_data=True)
    (d1, q1), (d2, q2) = replication_inputs(well_s, 0), replication_inputs(mis_s, 0)
    np.testing.assert_array_equal(d1.y, d2.y)
    np.testing.assert_array_equal(d1.design.points, d2.design.points)
    np.testing.assert_array_equal(q1.nodes, q2.nodes)


def test_observation_variance():
    # marginal variance of y is sigma0^2 + delta0 = 1.0625
    sc = small(n=50)
    y = np.concatenate([simulate_dataset(sc, r).y for r in range(200)])
    assert y.var() == pytest.approx(1.0625, rel=0.1)


def test_aggregate_single_record():
    aggs, hists = aggregate([record(0, 2.0, 3.0)])
    assert aggs["ml"]["mean_ell"] == 2.0 and aggs["cv"]["mean_ell"] == 3.0
    assert aggs["ml"]["sd_ell"] == 0.0 and aggs["ml"]["sd_defined"] is False
    for key in hists:
        assert hists[key][1].sum() == 1


def test_aggregate_two_records():
    aggs, _ = aggregate([record(0, 1.0, 3.0), record(1, 2.5, 3.0)])
    assert aggs["ml"]["mean_ell"] == 1.75
    assert aggs["ml"]["sd_ell"] == pytest.approx(1.5 / math.sqrt(2), rel=1e-15)
    assert aggs["ml"]["sd_defined"] is True


def test_aggregate_order_independent():
    recs = [record(i, 0.5 + 0.37 * i, 3.0 + math.sin(i), d=0.01 * i, e=0.3 + 0.01 * i) for i in range(25)]
    shuffled = recs[:]
    random.Random(3).shuffle(shuffled)
    a1, h1 = aggregate(recs, bins=7)
    a2, h2 = aggregate(shuffled, bins=7)
    assert a1 == a2
    for key in h1:
        np.testing.assert_array_equal(h1[key][0], h2[key][0])
        np.testing.assert_array_equal(h1[key][1], h2[key][1])
        assert h1[key][1].sum() == 25 and len(h1[key][1]) == 7


def test_aggregate_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_experiment_and_csv_round_trip(tmp_path):
    sc = small()
    rep = run_experiment(sc, bins=5)
    assert rep.n_success + len(rep.failures) == sc.n_reps
    assert [r.rep_index for r in rep.records] == [0, 1, 2]
    for q in QUANTITIES:
        for est in ESTIMATORS:
            assert rep.histograms[(q, est)][1].sum() == rep.n_success
    path = tmp_path / "reps.csv"
    reporting.write_replications(path, [(sc.n, sc.specification, sc.model_delta, rep.records)])
    groups = reporting.read_replications(path)
    delta, back = groups[(sc.n, sc.specification)]
    assert delta == sc.model_delta
    assert back == rep.records
    assert aggregate(back, 5)[0] == rep.aggregates


def test_experiment_parallel_matches_serial():
    sc = small(n_reps=4)
    a = run_experiment(sc, workers=1)
    b = run_experiment(sc, workers=2)
    assert a.aggregates == b.aggregates


def test_failures_are_counted(monkeypatch):
    import gpmisspec.montecarlo as mc

    real = mc.run_replication

    def flaky(scenario, rep_index):
        if rep_index == 1:
            raise ReplicationFailure(rep_index, ValueError("boom"))
        return real(scenario, rep_index)

    monkeypatch.setattr(mc, "run_replication", flaky)
    rep = run_experiment(small())
    assert rep.n_success == 2 and [f[0] for f in rep.failures] == [1]
    assert rep.aggregates["ml"]["count"] == 2


def test_all_failures_raise(monkeypatch):
    import gpmisspec.montecarlo as mc

    def broken(scenario, rep_index):
        raise ReplicationFailure(rep_index, ValueError("boom"))

    monkeypatch.setattr(mc, "run_replication", broken)
    with pytest.raises(RuntimeError):
        run_experiment(small())


def test_record_check():
    with pytest.raises(ValueError):
        record(0, 1.0, 2.0, d=-1e-6).check()
    with pytest.raises(ValueError):
        record(0, float("nan"), 2.0).check()
