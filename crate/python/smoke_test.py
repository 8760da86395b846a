"""Smoke test for the compiled `highway` extension module."""

import csv
import io
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import highway


def close(a, b, tol=1e-9):
    return all(math.isclose(x, y, abs_tol=tol) for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    mdp = highway.Mdp.three_fork()
    q_star = mdp.q_star()
    assert math.isclose(max(q_star[0]), 9.0, abs_tol=1e-9), q_star[0]

    policies = highway.three_fork_policies()
    assert len(policies) == 3

    res = highway.solve_fixed_point(mdp, policies, list(range(1, 6)))
    assert res["converged"]
    assert close(res["q"], q_star, 1e-8)

    zeros = [[0.0] * mdp.num_actions for _ in range(mdp.num_states)]
    step = highway.bellman_optimality(mdp, zeros)
    hw = highway.apply_operator(mdp, zeros, policies, [1, 2, 3], kind="optimality")
    assert all(h >= b - 1e-12 for rh, rb in zip(hw, step) for h, b in zip(rh, rb))

    try:
        highway.apply_operator(mdp, zeros, policies, [1, 2], gate=1)
    except ValueError:
        pass
    else:
        raise AssertionError("gate 1 should be rejected")

    rooms = highway.Mdp.multi_room(2, 3)
    vi = highway.plan(rooms, "vi")
    hvi = highway.plan(rooms, "hvi")
    assert hvi["iterations"] <= vi["iterations"]
    assert max(abs(a - b) for a, b in zip(vi["v"], hvi["v"])) < 1e-8

    r = highway.Mdp.random(5, 2, 0.9, seed=3)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "mdp.json")
        r.save(path)
        assert highway.Mdp.load(path).q_star() == r.q_star()

    assert "fig_fixed_point" in highway.preset_names()
    rows = list(csv.DictReader(io.StringIO(highway.run_experiment("fig_fixed_point"))))
    assert rows and set(rows[0]) == {"experiment", "env", "algorithm", "seed", "metric", "x", "y", "flag"}

    ok, line = highway.check_criterion(4)
    assert ok, line
    print("smoke test passed:", repr(mdp), line)


if __name__ == "__main__":
    main()
