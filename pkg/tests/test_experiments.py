import math

import numpy as np
import pytest

from l1tcl.data import Dataset, split_by_covariate
from l1tcl.errors import DataError
from l1tcl.experiments import (GridCellResult, PartConfig, run_grid, run_part,
                               run_toy_comparison)
from l1tcl.frameworks import run_framework
from l1tcl.synthetic import GridConfig, ToyConfig, generate_grid_instance


def test_toy_single_seed_three_finite_estimates(tmp_path):
    comp = run_toy_comparison(ToyConfig(), [3])
    assert comp.truth == pytest.approx(-2 / 30)
    for fw in ("to-cl", "merge-cl", "l1-tcl"):
        est = comp.estimates(fw)
        assert est.shape == (1,) and np.isfinite(est).all()
        assert comp.errors(fw)[0] == pytest.approx(abs(est[0] + 2 / 30))
    s = comp.summary()
    assert s["seeds"] == 1 and 0.0 <= s["l1_best_fraction"] <= 1.0
    comp.write_csv(tmp_path / "toy.csv")
    lines = (tmp_path / "toy.csv").read_text().splitlines()
    assert lines[0] == "seed,framework,estimate,truth,abs_error" and len(lines) == 4
    assert all(line.split(",")[3] == repr(-2 / 30) for line in lines[1:])


def test_toy_needs_a_seed():
    with pytest.raises(ValueError):
        run_toy_comparison(ToyConfig(), [])


def test_grid_single_cell_single_trial():
    cfg = GridConfig.reduced(d_values=(5,), s_values=(1,), n_values=(80,), ns_values=(500,),
                             trials=1)
    res = run_grid(cfg)
    (cell,) = res.cells
    assert cell.skipped is None and cell.trials_run == 1
    assert set(cell.mean_abs_err) == {"l1-tcl", "to-cl", "merge-cl"}
    for b in ("to-cl", "merge-cl"):
        assert cell.err_difference[b] == cell.mean_abs_err[b] - cell.mean_abs_err["l1-tcl"]
        assert math.isfinite(cell.err_difference[b])


def test_grid_skips_s_above_d_and_is_reproducible(tmp_path):
    cfg = GridConfig.reduced(d_values=(3,), s_values=(1, 4), n_values=(60,), ns_values=(300,),
                             trials=2, seed=9)
    a, b = run_grid(cfg), run_grid(cfg, jobs=2)
    assert [c.skipped for c in a.cells] == [None, "s=4 > d=3"]
    assert a.evaluated() == [a.cells[0]]
    paths = []
    for i, res in enumerate((a, b)):
        for name in ("results", "heatmap"):
            p = tmp_path / f"{name}{i}.csv"
            getattr(res, f"write_{name}_csv")(p)
            paths.append(p)
    assert paths[0].read_bytes() == paths[2].read_bytes()
    assert paths[1].read_bytes() == paths[3].read_bytes()
    heat = paths[1].read_text().splitlines()
    row = heat[1].split(",")
    assert float(row[6]) == max(float(row[5]), 0.0)
    assert heat[-1].endswith("s=4 > d=3")


def test_grid_cell_identity_enforced():
    mae = {"l1-tcl": 0.3, "to-cl": 0.1}
    GridCellResult(5, 1, 100, 2000, mae, {"to-cl": 0.1 - 0.3}, 10)
    with pytest.raises(ValueError):
        GridCellResult(5, 1, 100, 2000, mae, {"to-cl": 0.2}, 10)


def test_grid_rejects_l1_as_baseline():
    with pytest.raises(ValueError):
        run_grid(GridConfig.reduced(trials=1), baselines=("l1-tcl",))


def test_improvement_fraction_nan_when_nothing_evaluated():
    cfg = GridConfig.reduced(d_values=(2,), s_values=(3,), trials=1)
    assert math.isnan(run_grid(cfg).improvement_fraction("to-cl"))


def _labelled(n_target, n_source, seed=0):
    rng = np.random.default_rng(seed)
    n = n_target + n_source
    lab = np.r_[np.ones(n_target), np.zeros(n_source)][rng.permutation(n)]
    X = np.column_stack([rng.normal(size=(n, 2)), lab])
    z = (rng.random(n) < 0.5).astype(float)
    return Dataset(X, z, z + X[:, 0] + rng.normal(size=n), ("a", "b", "group"))


def test_part_201_546_split():
    data = _labelled(201, 546)
    pair = split_by_covariate(data, 2, 1.0)
    assert (pair.target.n, pair.source.n) == (201, 546)
    est = run_part(data, PartConfig("group", 1.0))
    assert math.isfinite(est.value) and est.ps_source == "transfer"


def test_part_degenerate_partition():
    data = _labelled(10, 0)
    with pytest.raises(DataError, match="degenerate partition"):
        run_part(data, PartConfig(2, 1.0))
    with pytest.raises(DataError):
        PartConfig("nope", 1.0).column_index(data)


def test_part_flipped_label_is_complement():
    data = _labelled(150, 200, seed=4)
    a = split_by_covariate(data, 2, 1.0)
    b = split_by_covariate(data, 2, 0.0)
    assert a.target.equals(b.source) and a.source.equals(b.target)
    cfg0, cfg1 = PartConfig(2, 0.0, framework="to-cl"), PartConfig(2, 1.0, framework="to-cl")
    assert run_part(data, cfg0).value == run_framework(b, "to-cl", "ipw").value
    assert run_part(data, cfg1).value == run_framework(a, "to-cl", "ipw").value


def test_part_beats_target_only_when_halves_match():
    # one generator, a random binary column as the partition: Delta = 0 across halves
    wins = 0
    for seed in range(50):
        domains, oracle = generate_grid_instance(5, 0, 600, 10, seed=seed)
        t = domains.target
        lab = (np.random.default_rng(seed + 999).random(t.n) < 0.25).astype(float)
        data = Dataset(np.column_stack([t.covariates, lab]), t.treatment, t.outcome)
        part = run_part(data, PartConfig(5, 1.0)).value
        to = run_framework(split_by_covariate(data, 5, 1.0), "to-cl", "ipw").value
        wins += abs(part - oracle.true_tau) < abs(to - oracle.true_tau)
    print(f"ParT closer than target-only in {wins}/50 seeds")
    assert wins >= 30


def test_grid_advantage_shrinks_with_more_target_data():
    cfg = GridConfig.reduced(d_values=(10,), s_values=(1,), n_values=(100, 500), trials=60)
    small, large = run_grid(cfg, jobs=4).cells
    adv = [np.mean(list(c.err_difference.values())) for c in (small, large)]
    print(f"mean advantage over baselines: n=100 {adv[0]:.4f}, n=500 {adv[1]:.4f}")
    assert adv[1] < adv[0]
