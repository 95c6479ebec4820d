"""Fixed-effect absorption by alternating projections.

Each fixed-effect dimension is a projection onto group indicators (optionally
with a group-specific linear slope). Cycling through the projections until the
largest change in a sweep falls below ``tol`` converges to the residual from
the joint dummy-variable regression.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from .errors import ConvergenceError

ABSORB_TOL = 1e-8
ABSORB_MAX_ITER = 10_000


@dataclass
class FixedEffect:
    """One absorbed dimension: integer group codes plus an optional within-group slope variable."""

    codes: np.ndarray
    name: str = "fe"
    slope: Optional[np.ndarray] = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.n_groups = int(self.codes.max()) + 1 if self.codes.size else 0
        self.counts = np.bincount(self.codes, minlength=self.n_groups).astype(float)
        if self.slope is not None:
            t = np.asarray(self.slope, dtype=float)
            mean_t = np.bincount(self.codes, t, self.n_groups) / np.maximum(self.counts, 1)
            self._tc = t - mean_t[self.codes]
            self._stt = np.bincount(self.codes, self._tc ** 2, self.n_groups)

    @classmethod
    def from_labels(cls, labels, name="fe", slope=None):
        codes, _ = pd.factorize(np.asarray(labels), sort=True)
        return cls(codes, name=name, slope=slope)

    @property
    def df(self):
        """Parameters spent by this dimension (intercepts, plus slopes where identified)."""
        if self.slope is None:
            return self.n_groups
        return self.n_groups + int(np.count_nonzero(self._stt > 1e-12))

    def project_out(self, x):
        """Residual of ``x`` (1-D) from this dimension's group means (and slopes)."""
        means = np.bincount(self.codes, x, self.n_groups) / np.maximum(self.counts, 1)
        r = x - means[self.codes]
        if self.slope is not None:
            stx = np.bincount(self.codes, self._tc * r, self.n_groups)
            b = np.divide(stx, self._stt, out=np.zeros_like(stx), where=self._stt > 1e-12)
            r = r - b[self.codes] * self._tc
        return r

    def nested_in(self, cluster_codes):
        """True when every group of this dimension sits inside a single cluster."""
        frame = pd.DataFrame({"g": self.codes, "c": cluster_codes})
        return bool((frame.groupby("g")["c"].nunique() <= 1).all())


@dataclass
class AbsorbResult:
    values: np.ndarray
    iterations: int
    converged: bool


def absorb(x, fixed_effects, *, tol=ABSORB_TOL, max_iter=ABSORB_MAX_ITER, raise_on_failure=True):
    """Partial ``fixed_effects`` out of every column of ``x``.

    Parameters
    ----------
    x : array (n,) or (n, k)
    fixed_effects : sequence of FixedEffect
    tol : float
        Convergence when the maximum absolute change over a full sweep is below ``tol``.

    Returns
    -------
    AbsorbResult
    """
    arr = np.array(x, dtype=float, copy=True)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    if not fixed_effects:
        return AbsorbResult(arr[:, 0] if squeeze else arr, 0, True)
    if len(fixed_effects) == 1:
        # a single dimension is an exact one-step projection
        fe = fixed_effects[0]
        for j in range(arr.shape[1]):
            arr[:, j] = fe.project_out(arr[:, j])
        return AbsorbResult(arr[:, 0] if squeeze else arr, 1, True)

    total_iters = 0
    converged = True
    for j in range(arr.shape[1]):
        col = arr[:, j]
        for it in range(1, max_iter + 1):
            prev = col
            for fe in fixed_effects:
                col = fe.project_out(col)
            if np.max(np.abs(col - prev), initial=0.0) < tol:
                break
        else:
            converged = False
        total_iters = max(total_iters, it)
        arr[:, j] = col
    if not converged and raise_on_failure:
        raise ConvergenceError(f"fixed-effect demeaning did not converge in {max_iter} sweeps")
    return AbsorbResult(arr[:, 0] if squeeze else arr, total_iters, converged)


def drop_singletons(fixed_effects_codes):
    """Iteratively flag observations alone in any fixed-effect group.

    ``fixed_effects_codes`` is a list of integer code arrays; returns a boolean
    keep-mask.
    """
    n = len(fixed_effects_codes[0]) if fixed_effects_codes else 0
    keep = np.ones(n, dtype=bool)
    while True:
        bad = np.zeros(n, dtype=bool)
        for codes in fixed_effects_codes:
            counts = np.bincount(codes[keep], minlength=codes.max() + 1 if codes.size else 0)
            bad |= keep & (counts[codes] == 1)
        if not bad.any():
            return keep
        keep &= ~bad
