import math

import numpy as np
import pytest

import minimalist as m


def identity_data():
    return np.eye(2), np.array([1.0, 0.0])


def test_difficulty_identity_example():
    X, y = identity_data()
    rep = m.difficulty(X, y)
    assert rep["N"] == 2 and rep["r"] == 2
    assert rep["Q"] == pytest.approx(1.0, rel=1e-14)
    assert abs(rep["C_tilde"]) < 1e-14
    assert all(v == pytest.approx(0.5) for v in rep["predicted_sharpness"].values())


def test_bounds_identity_example():
    X, y = identity_data()
    (rep,) = m.bounds(X, y, depth=2, imbalance=0.0)
    assert rep["lower"] == pytest.approx(1.0) and rep["upper"] == pytest.approx(1.0)
    sources = {r["source"] for r in m.bounds(X, y, alpha=0.5, beta=0.5)}
    assert {"init_alpha_beta", "convergence_alpha_beta"} <= sources


def test_sharpness_at_balanced_minimizer():
    X, y = identity_data()
    # u = (1, 0), v = 1 interpolates; the Hessian top eigenvalue is 1 for N = 2
    assert m.sharpness(X, y, [1.0, 0.0], [1.0]) == pytest.approx(1.0, rel=1e-12)
    assert m.loss(X, y, [1.0, 0.0], [1.0]) == pytest.approx(0.0, abs=1e-15)
    assert m.layer_imbalance(X, y, [1.0, 0.0], 1.0) == pytest.approx(0.0, abs=1e-15)


def test_imbalance_terms_ordering():
    X, y = m.synth_gaussian(6, 3, seed=2)
    t = m.imbalance_terms(X, y, [0.3, -0.2, 0.5], 0.7)
    assert t["psi2"] >= t["psi1"] >= 0
    assert t["omega2"] >= t["omega1"] >= 0


def test_v1_star_sq_balanced():
    assert m.v1_star_sq(4.0, 0.0) == pytest.approx(2.0)


def test_eos_demo_run():
    res = m.run(m.eos_demo_config())
    assert res["status"] == "converged"
    traj = res["trajectory"]
    s = traj["sharpness"]
    assert np.nanmax(s) > 50.0
    assert res["loss_increases"] > 0
    assert math.isnan(traj["time"][0])
    assert len(traj["step"]) == len(traj["loss"])


def test_config_errors_surface_as_value_error():
    with pytest.raises(ValueError):
        m.run("[optimizer]\nlearning_rate = 0.1\n")


def test_verify_and_corrupted_tolerance():
    assert all(r["passed"] for r in m.verify("sgd"))
    assert not m.verify("gd", tolerance_scale=1e-40)[0]["passed"]
    assert "gf" in m.verify_suites()


def test_csv_round_trip(tmp_path):
    X, y = m.synth_minimal_data()
    path = tmp_path / "d.csv"
    with open(path, "w") as f:
        f.write(",".join([f"x{j}" for j in range(X.shape[1])] + ["y"]) + "\n")
        for row, label in zip(X, y):
            f.write(",".join(repr(float(v)) for v in list(row) + [label]) + "\n")
    X2, y2 = m.load_csv(str(path))
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)
