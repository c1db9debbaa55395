"""Acceptance suite: one criterion per test, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import json
import time

import numpy as np
import scipy.stats

from support import MARKET_TABLES, random_dbm, random_rbm
from ebworld import cli
from ebworld.dbm import (
    MeanFieldConfig,
    PcdConfig,
    exact_free_energy,
    exact_log_likelihood_dbm,
    finetune_pcd,
    gibbs_sample_dbm,
    mean_field_infer,
    pretrain_layerwise,
    variational_free_energy,
)
from ebworld.intervention import InterventionSpec, paired_t_test, run_experiment_grid, train_test_consistency
from ebworld.rbm import (
    CdConfig,
    energy,
    enumerate_states,
    free_energy_rbm,
    sigmoid,
)
from ebworld.schema import AttributeSchema, save_schema


def check(name, cond, detail=""):
    print(f"\n{name}: {'PASS' if cond else 'FAIL'}  {detail}")
    assert cond, f"{name}: {detail}"


def test_a1_rbm_analytic_consistency():
    start = time.time()
    rng = np.random.default_rng(1001)
    worst = 0.0
    for _ in range(50):
        J = int(rng.integers(1, 7))
        H = int(rng.integers(1, 7))
        params = random_rbm(rng, J, H, scale=1.5)
        hs = enumerate_states(H)
        for v in enumerate_states(J):
            vals = np.array([-energy(v, h, params) for h in hs])
            m = vals.max()
            exact = -(m + np.log(np.exp(vals - m).sum()))
            rel = abs(free_energy_rbm(v, params) - exact) / max(1.0, abs(exact))
            worst = max(worst, rel)
    elapsed = time.time() - start
    check("A1", worst < 1e-10 and elapsed < 10,
          f"max rel err {worst:.2e}, {elapsed:.1f}s")


def test_a2_variational_bound():
    start = time.time()
    rng = np.random.default_rng(1002)
    mf = MeanFieldConfig(max_iterations=500, tolerance=1e-12)
    worst_margin = np.inf
    for _ in range(20):
        h1 = int(rng.integers(2, 7))
        h2 = int(rng.integers(2, min(9, 12 - h1)))
        J = int(rng.integers(3, 7))
        params = random_dbm(rng, [J, h1, h2], scale=0.8)
        vs = rng.integers(0, 2, (100, J)).astype(float)
        vf = variational_free_energy(vs, params, mf)
        ef = np.array([exact_free_energy(v, params) for v in vs])
        worst_margin = min(worst_margin, float((vf - ef).min()))
    # L=1 equality
    worst_l1 = 0.0
    for _ in range(5):
        J, H = 5, 4
        rbm = random_rbm(rng, J, H, scale=0.8)
        from ebworld.dbm import DbmParams
        params = DbmParams((rbm.W,), rbm.b, (rbm.c,))
        vs = rng.integers(0, 2, (100, J)).astype(float)
        diff = np.abs(variational_free_energy(vs, params, mf)
                      - free_energy_rbm(vs, rbm)).max()
        worst_l1 = max(worst_l1, float(diff))
    elapsed = time.time() - start
    check("A2", worst_margin >= -1e-9 and worst_l1 < 1e-9 and elapsed < 60,
          f"min margin {worst_margin:.2e}, max L1 diff {worst_l1:.2e}, {elapsed:.1f}s")


def test_a3_mean_field_fixed_point(market_model):
    rng = np.random.default_rng(1003)
    mf = MeanFieldConfig(max_iterations=200, tolerance=1e-8)
    models = [random_dbm(rng, [5, 4, 3], scale=0.8) for _ in range(10)]
    models.append(market_model["params"])
    non_converged = 0
    worst_residual = 0.0
    for params in models:
        J = params.visible_dim
        vs = rng.integers(0, 2, (20, J)).astype(float)
        state = mean_field_infer(vs, params, mf)
        if not state.converged:
            non_converged += 1
            continue
        mu = state.mu
        res = 0.0
        for l in range(params.n_layers):
            below = vs if l == 0 else mu[l - 1]
            act = below @ params.weights[l] + params.hidden_biases[l]
            if l + 1 < params.n_layers:
                act = act + mu[l + 1] @ params.weights[l + 1].T
            res = max(res, float(np.abs(sigmoid(act) - mu[l]).max()))
        worst_residual = max(worst_residual, res)
    check("A3", non_converged == 0 and worst_residual < 1e-6,
          f"non-converged {non_converged}, worst residual {worst_residual:.2e}")


def test_a4_learning_improves_likelihood():
    start = time.time()
    passes = 0
    for seed in range(5):
        rng = np.random.default_rng(2000 + seed)
        protos = np.array([[1, 0, 1, 0, 1, 0, 1, 0],
                           [0, 1, 0, 1, 0, 1, 0, 1]], dtype=float)
        rows = protos[rng.integers(0, 2, 100)]
        data = np.abs(rows - (rng.random(rows.shape) < 0.05))

        init, _ = pretrain_layerwise(data, [4, 3], CdConfig(epochs=0, seed=seed))
        ll_init = exact_log_likelihood_dbm(data, init)
        pre, _ = pretrain_layerwise(
            data, [4, 3],
            CdConfig(epochs=40, learning_rate=0.1, batch_size=20, seed=seed))
        pcd = PcdConfig(chain_count=50, gibbs_steps_per_update=5,
                        learning_rate=0.05, epochs=25, batch_size=20, seed=seed)
        tuned, _ = finetune_pcd(pre, data, MeanFieldConfig(), pcd)
        ll_final = exact_log_likelihood_dbm(data, tuned)
        if ll_final > ll_init:
            passes += 1
    elapsed = time.time() - start
    check("A4", passes == 5 and elapsed < 300, f"{passes}/5 seeds, {elapsed:.1f}s")


def test_a5_sampler_correctness():
    start = time.time()
    rng = np.random.default_rng(1005)
    params = random_dbm(rng, [3, 2, 2], scale=0.7)
    samples = gibbs_sample_dbm(params, 200_000, 5_000, 1, seed=77)
    vs = enumerate_states(3)
    exact = np.exp([-exact_free_energy(v, params) for v in vs])
    exact /= exact.sum()
    codes = samples @ (2 ** np.arange(3))
    emp = np.array([(codes == int(v @ (2 ** np.arange(3)))).mean() for v in vs])
    tv = 0.5 * np.abs(emp - exact).sum()
    elapsed = time.time() - start
    check("A5", tv < 0.03 and elapsed < 120, f"TV {tv:.4f}, {elapsed:.1f}s")


GRID_SPECS = [
    InterventionSpec("tier", "Entry", "Premium", (("brand", "Lux"),)),
    InterventionSpec("tier", "Entry", "Premium", (("brand", "Generic"),)),
    InterventionSpec("tier", "Entry", "Mid", (("brand", "Generic"),)),
    InterventionSpec("tier", "Entry", "Mid", (("brand", "Lux"),)),
]


def test_a6_h3_analog_grid_ordering(market_model):
    start = time.time()
    m = market_model
    grid = run_experiment_grid(m["train"].vectors, GRID_SPECS[:3], m["schema"],
                               m["params"], m["mf"])
    lux, gen, gen_mid = [c.result for c in grid.cells]
    ordering = lux.mean_delta_pct > gen.mean_delta_pct > 0
    significant = (lux.ttest.p_two_sided < 0.01 and gen.ttest.p_two_sided < 0.01)
    mid_ok = gen_mid.mean_delta_pct <= 0
    elapsed = time.time() - start
    check("A6", ordering and significant and mid_ok and elapsed < 300,
          f"Lux {lux.mean_delta_pct:+.2f}% > Generic {gen.mean_delta_pct:+.2f}% > 0, "
          f"Mid->Entry|Generic {gen_mid.mean_delta_pct:+.2f}%, {elapsed:.1f}s")


def test_a7_h2_analog_train_test_consistency(market_model):
    m = market_model
    g_train = run_experiment_grid(m["train"].vectors, GRID_SPECS, m["schema"],
                                  m["params"], m["mf"])
    g_test = run_experiment_grid(m["test"].vectors, GRID_SPECS, m["schema"],
                                 m["params"], m["mf"])
    rep = train_test_consistency(g_train, g_test, max_abs_diff=3.0,
                                 min_rank_agreement=0.99)
    check("A7", rep.passed,
          f"max |train-test| {rep.max_abs_difference:.2f}pp, "
          f"rank agreement {rep.rank_agreement:.3f}")


def test_a8_statistics_oracle():
    rng = np.random.default_rng(12345)
    worst_t = worst_p = 0.0
    for _ in range(20):
        n = int(rng.integers(3, 40))
        d = rng.normal(rng.normal(0, 1), rng.uniform(0.5, 3), n)
        res = paired_t_test(d)
        t_ref, p_ref = scipy.stats.ttest_rel(d, np.zeros(n))
        worst_t = max(worst_t, abs(res.t - t_ref))
        worst_p = max(worst_p, abs(res.p_two_sided - p_ref))
    check("A8", worst_t < 1e-6 and worst_p < 1e-4,
          f"max |dt| {worst_t:.2e}, max |dp| {worst_p:.2e}")


def test_a9_cli_reproducibility(tmp_path):
    schema = AttributeSchema(
        (("brand", ("Lux", "Generic")),
         ("tier", ("Entry", "Mid", "Premium")),
         ("rating", ("low", "mid", "high"))))
    save_schema(schema, tmp_path / "schema.txt")
    cfg = {
        "seed": 99,
        "schema": str(tmp_path / "schema.txt"),
        "synthetic": {"n": 300, "groups": MARKET_TABLES},
        "split": {"train": 200, "test": 100},
        "layer_sizes": [5, 3],
        "cd": {"epochs": 3},
        "pcd": {"epochs": 2, "chain_count": 32, "gibbs_steps_per_update": 2},
    }
    (tmp_path / "config.json").write_text(json.dumps(cfg))
    grid = {"specs": [{"group": "tier", "target": "Entry", "source": "Premium"}]}
    (tmp_path / "grid.json").write_text(json.dumps(grid))

    def pipeline(tag):
        d = tmp_path / tag
        d.mkdir()
        c = str(tmp_path / "config.json")
        assert cli.main(["synth", "--config", c, "--out", str(d / "data.csv")]) == 0
        train = str(d / "data.csv.train.csv")
        assert cli.main(["pretrain", "--config", c, "--dataset", train,
                         "--out", str(d / "pre.ckpt")]) == 0
        assert cli.main(["finetune", "--config", c,
                         "--checkpoint", str(d / "pre.ckpt"),
                         "--dataset", train, "--out", str(d / "model.ckpt")]) == 0
        assert cli.main(["score", "--checkpoint", str(d / "model.ckpt"),
                         "--dataset", train, "--out", str(d / "scores.csv")]) == 0
        assert cli.main(["intervene", "--checkpoint", str(d / "model.ckpt"),
                         "--dataset", train, "--grid", str(tmp_path / "grid.json"),
                         "--out", str(d / "grid_out")]) == 0
        assert cli.main(["sample", "--checkpoint", str(d / "model.ckpt"),
                         "--n", "15", "--seed", "5", "--burn-in", "100",
                         "--out", str(d / "samples.csv")]) == 0
        assert cli.main(["export-beliefs", "--checkpoint", str(d / "model.ckpt"),
                         "--dataset", train, "--format", "binary",
                         "--out", str(d / "beliefs.bin")]) == 0
        return d

    d1, d2 = pipeline("run1"), pipeline("run2")
    artifacts = ["data.csv", "data.csv.train.csv", "pre.ckpt", "pre.ckpt.log",
                 "model.ckpt", "model.ckpt.log", "scores.csv", "grid_out.csv",
                 "grid_out.txt", "grid_out.details.csv", "samples.csv",
                 "beliefs.bin"]
    mismatched = [a for a in artifacts
                  if (d1 / a).read_bytes() != (d2 / a).read_bytes()]
    check("A9", not mismatched, f"byte-identical: {len(artifacts) - len(mismatched)}"
          f"/{len(artifacts)}" + (f", mismatched {mismatched}" if mismatched else ""))
