"""Grid value-function iteration, kept independent of the fixed-point solver.

The oracle discretizes F on an equally spaced wage grid and iterates the
Bellman equation for the value of unemployment with employment absorbing.
It never touches the closed-form surplus functions, so agreement with
``solve_reservation_earnings`` is a genuine cross-check.
"""

import numpy as np

from ..errors import SolverError

ORACLE_GRID = 10_001
ORACLE_TOL = 1e-12


def value_iteration_reservation(env, beliefs, n_grid=ORACLE_GRID, tol=ORACLE_TOL, max_iter=200_000):
    """Return ``(R, iterations)`` with ``R = (1 - beta) * U`` from Bellman iteration.

    Works in per-period income units: the Bellman update for ``R = (1-beta)U`` is

        R' = (1-beta) b + beta * [alpha * E max(y, R) + (1-alpha) * R]

    where ``y = theta*w`` with subjective probability ``gamma`` and ``w`` otherwise.
    """
    w, mass = env.wage_dist.grid(n_grid)
    beta, alpha, gamma, theta = env.beta, beliefs.alpha, beliefs.gamma, env.theta
    y_part = theta * w
    r = env.b
    for it in range(1, max_iter + 1):
        best_full = mass @ np.maximum(w, r)
        best_part = mass @ np.maximum(y_part, r)
        expected = gamma * best_part + (1.0 - gamma) * best_full
        r_new = (1.0 - beta) * env.b + beta * (alpha * expected + (1.0 - alpha) * r)
        if abs(r_new - r) < tol:
            return r_new, it
        r = r_new
    raise SolverError("value iteration did not converge", last_iterate=r, iterations=max_iter)
