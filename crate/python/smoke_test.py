#!/usr/bin/env python3
"""Smoke test for the credence_py extension module.

Build and stage the module first:

    cargo build -p credence-py --release
    cp target/release/libcredence_py.so python/credence_py.so

then run `python3 python/smoke_test.py`.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import credence_py as cp


def approx(a, b, tol=1e-4):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    # model evaluation and gradients
    model = cp.Model.identity(1)
    loss = cp.Loss.squared_distance([[2.0]])
    assert model.forward([1.5]) == [1.5]
    approx(loss.loss([1.0], 0), 1.0, 1e-12)
    approx(cp.input_gradient(model, loss, [1.0], 0)[0], -2.0, 1e-12)

    # raw credences are negated losses
    c0 = cp.credence_at_origin(model, loss, [0.0])
    approx(c0[0], -4.0, 1e-12)

    # the scalar instance with a closed-form profile: x†=1, λ=1, c†=−1, r†=1
    result = cp.solve_counterfactual(model, loss, [0.0], diag=[2.0])
    assert result["status"] == "converged", result
    approx(result["x_dagger"][0], 1.0)
    approx(result["lambda"][0], 1.0)
    approx(result["c_dagger"][0], -1.0)
    approx(result["risk"], 1.0, 3e-4)
    assert result["residual_fixed_point"] <= 1e-6

    # the exhaustive grid agrees on the risk at the returned credences
    grid = cp.grid_solve_pi(model, loss, [0.0], result["c_dagger"], [(-5.0, 5.0)], 1e-3)
    assert grid is not None, "profile credences must be feasible"
    r_star, _ = grid
    approx(result["risk"], r_star, 1e-3)

    # infeasible credences are reported as such
    assert cp.grid_solve_pi(model, loss, [0.0], [0.5], [(-5.0, 5.0)], 1e-3) is None

    # the profile is a local max of the log-joint at large concentration
    lj_at = lambda x: cp.log_joint(
        model, loss, [0.0], [x], result["c_dagger"], 1e4, diag=[2.0]
    )
    center = lj_at(result["x_dagger"][0])
    assert center >= lj_at(result["x_dagger"][0] + 0.05)
    assert center >= lj_at(result["x_dagger"][0] - 0.05)

    # cross-entropy over a softmax pair and the classifiers
    ce = cp.Loss.cross_entropy(2)
    two = cp.Model.identity(2)
    c = cp.credence_at_origin(two, ce, [0.0, 0.0])
    approx(c[0], -math.log(2.0), 1e-12)
    assert cp.classify_credibility([-0.1, -0.5]) == 0
    assert cp.classify_softmax([0.3, 0.7]) == 1
    ok, cls = cp.filter_decision([0.8, 0.3], 0.5)
    assert ok and cls == 0
    ok, _ = cp.filter_decision([0.8, 0.3], 1.0)
    assert not ok

    # PGD: increasing loss in x moves by +epsilon and respects the budget
    climb = cp.Loss.squared_distance([[-10.0]])
    attack = cp.pgd_attack(
        model, climb, [1.0], 0, epsilon=0.1, steps=1, step_size=0.1, restarts=1
    )
    approx(attack["x_adv"][0], 1.1, 1e-12)
    clean = climb.loss([1.0], 0)
    assert attack["loss_achieved"] >= clean

    # constant models are immune to attack and keep their credences
    const = cp.Model.constant(2, [0.4, -0.4])
    ce2 = cp.Loss.cross_entropy(2)
    out = cp.pgd_attack(const, ce2, [0.3, 0.3], 0, epsilon=0.5, steps=5, step_size=0.1, restarts=2)
    assert out["x_adv"] == [0.3, 0.3]
    const_result = cp.solve_counterfactual(const, ce2, [0.3, 0.3], gamma=2.0)
    c_raw = cp.credence_at_origin(const, ce2, [0.3, 0.3])
    for a, b in zip(const_result["c_dagger"], c_raw):
        approx(a, b, 1e-6)

    # JSON round trip through the model format
    again = cp.Model.from_json(model.to_json())
    assert again.forward([0.25]) == model.forward([0.25])

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()
