import json

import numpy as np
import pytest

from l1tcl.bootstrap import (BootstrapConfig, BootstrapFailure, TrialResult, bootstrap,
                             default_jobs, quantile, summarize)
from l1tcl.data import Dataset, DomainPair
from l1tcl.synthetic import ToyConfig, generate_toy


def test_quantile_examples():
    assert quantile([1, 2, 3], 0.5) == 2.0
    assert quantile([1, 2, 3, 4], 0.5) == 2.5
    assert quantile([10, 20], 0.05) == pytest.approx(10.5, abs=1e-12)
    v = np.arange(1, 201, dtype=float)
    # position q (n-1): 0.05 * 199 = 9.95 -> 10 + 0.95; 0.95 * 199 = 189.05 -> 190 + 0.05
    assert quantile(v, 0.05) == pytest.approx(10.95, abs=1e-12)
    assert quantile(v, 0.95) == pytest.approx(190.05, abs=1e-12)
    assert quantile([7.0], 0.3) == 7.0


def test_quantile_errors():
    with pytest.raises(ValueError):
        quantile([], 0.5)
    with pytest.raises(ValueError):
        quantile([2, 1], 0.5)
    with pytest.raises(ValueError):
        quantile([1, 2], 1.5)


def test_config_validation():
    for kw in (dict(trials=1), dict(ci_level=1.0), dict(ci_level=0.0), dict(resample_size=1)):
        with pytest.raises(ValueError):
            BootstrapConfig(**kw)


def test_two_equal_trials():
    s = summarize([TrialResult(0, 3.5), TrialResult(1, 3.5)], 0.9)
    assert s.mean == s.median == s.ci_low == s.ci_high == 3.5


def test_summary_over_successes_only():
    results = [TrialResult(t, float(t)) for t in range(6)] + [TrialResult(6, None, failure="x")]
    s = summarize(results, 0.5)
    assert s.failure_count == 1 and s.estimates[6] is None
    assert s.mean == 2.5 and s.median == 2.5
    assert s.ci_low == quantile(np.arange(6.0), 0.25)
    with pytest.raises(BootstrapFailure) as info:
        summarize([TrialResult(0, 1.0), TrialResult(1, None, failure="a"),
                   TrialResult(2, None, failure="b")], 0.9)
    assert set(info.value.reasons) == {1, 2}


@pytest.fixture(scope="module")
def toy():
    return generate_toy(ToyConfig(seed=4))[0]


def test_deterministic_and_independent_of_jobs(toy):
    cfg = BootstrapConfig(trials=12, master_seed=9)
    a = bootstrap(toy, "to-cl", "ipw", bcfg=cfg, jobs=1)
    b = bootstrap(toy, "to-cl", "ipw", bcfg=cfg, jobs=1)
    c = bootstrap(toy, "to-cl", "ipw", bcfg=cfg, jobs=3)
    assert a.estimates == b.estimates == c.estimates
    assert (a.ci_low, a.median, a.ci_high) == (c.ci_low, c.median, c.ci_high)
    d = bootstrap(toy, "to-cl", "ipw", bcfg=BootstrapConfig(trials=12, master_seed=10))
    assert d.estimates != a.estimates


def test_l1_tcl_reselection_and_fixed_lambda(toy):
    s = bootstrap(toy, "l1-tcl", "dr", bcfg=BootstrapConfig(trials=6, master_seed=1), jobs=2)
    assert s.failure_count == 0
    lams = {r.lambda_ps for r in s.trials}
    assert lams <= set(np.logspace(-2.5, 0, 11)[::-2])  # reduced grid keeps the largest value
    f = bootstrap(toy, "l1-tcl", "ipw",
                  bcfg=BootstrapConfig(trials=4, reselect_lambda=False, master_seed=1))
    assert len({r.lambda_ps for r in f.trials}) == 1


def test_ordering_of_summary(toy):
    s = bootstrap(toy, "merge-cl", "or", bcfg=BootstrapConfig(trials=20, master_seed=2))
    assert s.ci_low <= s.median <= s.ci_high


def test_resample_size_and_exports(toy, tmp_path):
    s = bootstrap(toy, "to-cl", "ipw", bcfg=BootstrapConfig(trials=5, resample_size=70))
    d = s.to_dict()
    json.dumps(d)
    assert d["trials"] == 5 and d["successful"] == 5
    p = tmp_path / "t.csv"
    s.write_trials_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].startswith("trial,estimate") and len(lines) == 6


def test_failed_trials_are_counted_not_retried():
    rng = np.random.default_rng(0)
    n = 30
    z = np.zeros(n)
    z[:2] = 1.0  # most resamples lose one class entirely or keep too few
    t = Dataset(rng.normal(size=(n, 2)), z, rng.normal(size=n))
    s_ = Dataset(rng.normal(size=(200, 2)), rng.integers(0, 2, 200).astype(float),
                 rng.normal(size=200))
    try:
        out = bootstrap(DomainPair(t, s_), "to-cl", "or", bcfg=BootstrapConfig(trials=20))
    except BootstrapFailure as exc:
        assert len(exc.reasons) > 10
    else:
        assert out.failure_count > 0
        assert len(out.estimates) == 20


def test_target_too_small():
    t = Dataset(np.ones((1, 1)), [1], [0.0])
    with pytest.raises(Exception):
        bootstrap(DomainPair(t, t), "to-cl", "ipw", bcfg=BootstrapConfig(trials=2))


def test_default_jobs_env(monkeypatch):
    monkeypatch.delenv("L1TCL_JOBS", raising=False)
    assert default_jobs() == 1
    monkeypatch.setenv("L1TCL_JOBS", "3")
    assert default_jobs() == 3
    monkeypatch.setenv("L1TCL_JOBS", "zero")
    with pytest.raises(ValueError):
        default_jobs()


def test_toy_l1_tcl_ipw_median_is_negative():
    domains, _ = generate_toy(ToyConfig())
    s = bootstrap(domains, "l1-tcl", "ipw", bcfg=BootstrapConfig(trials=200), jobs=4)
    assert s.failure_count == 0
    assert s.median < 0
