"""Monte Carlo search spells under the true arrival process.

Spells are simulated in fixed-size blocks, each with its own generator spawned
from the master seed, so the output does not depend on how many workers run
the blocks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import DomainError, SpellTruncationError
from ..seeding import domain_streams
from .model import job_finding_rate, solve_reservation_earnings

MAX_SPELL_DURATION = 100_000
BLOCK_SIZE = 10_000


@dataclass(frozen=True)
class SpellOutcome:
    duration: int
    accepted_type: str
    accepted_wage: float
    income: float


@dataclass(frozen=True)
class SpellSample:
    """Column-oriented spell outcomes; iterating yields ``SpellOutcome`` records."""

    duration: np.ndarray
    parttime: np.ndarray
    accepted_wage: np.ndarray
    income: np.ndarray
    reservation_earnings: float

    def __len__(self):
        return len(self.duration)

    def __iter__(self):
        for d, pt, w, y in zip(self.duration, self.parttime, self.accepted_wage, self.income):
            yield SpellOutcome(int(d), "part-time" if pt else "full-time", float(w), float(y))

    @property
    def periods_at_risk(self):
        return int(self.duration.sum())

    def exit_hazard(self):
        """Pooled per-period exit rate and its binomial standard error."""
        at_risk = self.periods_at_risk
        hazard = len(self) / at_risk
        return hazard, float(np.sqrt(hazard * (1.0 - hazard) / at_risk))

    def to_frame(self):
        return pd.DataFrame({
            "duration": self.duration,
            "accepted_type": np.where(self.parttime, "part-time", "full-time"),
            "accepted_wage": self.accepted_wage,
            "income": self.income,
        })


def _simulate_block(env, r, n, rng, max_duration):
    duration = np.zeros(n, dtype=np.int64)
    parttime = np.zeros(n, dtype=bool)
    wage = np.zeros(n)
    income = np.zeros(n)
    active = np.arange(n)
    t = 0
    while active.size:
        t += 1
        if t > max_duration:
            raise SpellTruncationError(f"{active.size} spells still unemployed after {max_duration} periods")
        m = active.size
        offered = rng.random(m) < env.alpha_true
        is_pt = rng.random(m) < env.gamma_true
        w = env.wage_dist.sample(rng, m)
        y = np.where(is_pt, env.theta * w, w)
        accept = offered & (y >= r)
        done = active[accept]
        duration[done] = t
        parttime[done] = is_pt[accept]
        wage[done] = w[accept]
        income[done] = y[accept]
        active = active[~accept]
    return duration, parttime, wage, income


def simulate_spells(env, beliefs, n_spells, seed, *, max_duration=MAX_SPELL_DURATION, threads=1,
                    block_size=BLOCK_SIZE):
    """Simulate ``n_spells`` unemployment spells for a worker with ``beliefs``.

    Offers arrive with probability ``alpha_true``, are part-time with
    probability ``gamma_true``, and are accepted iff income >= R (ties accept).

    Raises
    ------
    SpellTruncationError
        If a spell would run past ``max_duration``; a zero job-finding rate is
        refused up front since every spell would be truncated.
    """
    if n_spells < 1:
        raise DomainError("n_spells must be at least 1")
    if seed is None:
        raise DomainError("simulate_spells requires an explicit seed")
    policy = solve_reservation_earnings(env, beliefs)
    if job_finding_rate(env, beliefs, policy) == 0.0:
        raise SpellTruncationError(
            f"job-finding rate is zero (R={policy.R:.6g}); every spell would exceed {max_duration} periods"
        )
    sizes = [block_size] * (n_spells // block_size)
    if n_spells % block_size:
        sizes.append(n_spells % block_size)
    streams = domain_streams(seed, "spells", len(sizes))

    def run(i):
        return _simulate_block(env, policy.R, sizes[i], np.random.default_rng(streams[i]), max_duration)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(i) for i in range(len(sizes))]
    cols = [np.concatenate(parts) for parts in zip(*blocks)]
    return SpellSample(cols[0], cols[1], cols[2], cols[3], policy.R)
