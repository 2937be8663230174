"""
Arthur's side of the protocol at desk scale.

Given a Hamiltonian with query access and Merlin's message (lambda*, xi, x*), build the
continuous-time generator

    <y|G|x> = lambda* delta_xy - (xi_y / xi_x) F(y, x)

of the fixed-node operator F, decide exactly whether it is legal at each visited
state, and run seeded Gillespie trajectories from x*.  All legality decisions are
exact; rates become floats only inside the sampler.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import SuccinctError, ZeroAmplitudeVisited
from .exactnum import (INTERVAL_FALLBACK_BITS, ExactValue, IntervalValue, compare,
                       exact_sum, pack)
from .qstate import AmplitudeQuery, split_real
from .xform import SparseHam, complexify_to_real, fixed_node

logger = logging.getLogger(__name__)

# Configuration
SURVIVAL_THRESHOLD = Fraction(1, 2)
DEFAULT_TRIALS = 100

Rate = Union[ExactValue, IntervalValue]


@dataclass(frozen=True)
class MerlinMessage:
    lambda_star: ExactValue
    xi: AmplitudeQuery
    x_star: str

    def check(self):
        if len(self.x_star) != self.xi.n:
            raise ValueError(f"x* has {len(self.x_star)} bits, the state has {self.xi.n}")
        if self.xi(self.x_star).is_zero:
            raise ZeroAmplitudeVisited(f"x* = {self.x_star} lies outside the support of xi")


@dataclass(frozen=True)
class VerifierConfig:
    a: ExactValue
    b: ExactValue
    t_max: Optional[Fraction] = None
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    numeric_fallback_bits: int = INTERVAL_FALLBACK_BITS
    max_jumps: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if compare(self.a, self.b) >= 0:
            raise ValueError(f"thresholds need a < b, got a={self.a}, b={self.b}")
        if self.trials < 1:
            raise ValueError("at least one trial is required")

    def horizon(self, qubits: int) -> float:
        """t_max, defaulting to M^3 in the simulated operator's qubit count."""
        return float(self.t_max if self.t_max is not None else max(qubits, 1) ** 3)


@dataclass(frozen=True)
class Legality:
    legal: bool
    reason: str = ''
    detail: str = ''

    def __str__(self) -> str:
        return 'Legal' if self.legal else f"Illegal({self.reason}{': ' + self.detail if self.detail else ''})"


LEGAL = Legality(True)


class MarkovGenerator:
    """
    Lazy generator of F with respect to xi.  Rates and legality verdicts are cached
    per state behind a lock, so trials on worker threads share one generator.
    """

    def __init__(self, F: SparseHam, msg: MerlinMessage, fallback_bits: Optional[int] = INTERVAL_FALLBACK_BITS):
        self.F = F
        self.msg = msg
        self.fallback_bits = fallback_bits
        self._rates: Dict[str, Dict[str, Rate]] = {}
        self._legality: Dict[str, Legality] = {}
        self._lock = threading.Lock()

    def amplitude(self, x: str) -> ExactValue:
        return self.msg.xi(x)

    def rate(self, x: str, y: str) -> Rate:
        """<y|G|x> for y != x: -(xi_y / xi_x) F(y, x)."""
        xi_x = self.amplitude(x)
        if xi_x.is_zero:
            raise ZeroAmplitudeVisited(f"generator needs xi({x}) != 0")
        h = self.F.entry(y, x)
        if isinstance(h, IntervalValue):
            return -(h * (self.amplitude(y) / xi_x))
        return -(self.amplitude(y) / xi_x * h)

    def diagonal(self, x: str) -> Rate:
        """<x|G|x> = lambda* - F(x, x)."""
        h = self.F.entry(x, x)
        if isinstance(h, IntervalValue):
            return -h + self.msg.lambda_star
        return self.msg.lambda_star - h

    def rates(self, x: str) -> Dict[str, Rate]:
        """Nonzero jump rates out of x; states outside supp(xi) are never entered."""
        with self._lock:
            cached = self._rates.get(x)
        if cached is not None:
            return cached
        out = {}
        for y in self.F.row_support(x):
            if y == x or self.amplitude(y).is_zero:
                continue
            r = self.rate(x, y)
            if r.sign() != 0:
                out[y] = r
        with self._lock:
            self._rates[x] = out
        return out

    def escape(self, x: str) -> Rate:
        return exact_sum(list(self.rates(x).values()), self.fallback_bits)

    def balance_residual(self, x: str) -> Rate:
        """Column sum of G at x; zero iff (F xi)(x) = lambda* xi(x)."""
        return exact_sum([self.diagonal(x)] + list(self.rates(x).values()), self.fallback_bits)

    def legality(self, x: str) -> Legality:
        with self._lock:
            cached = self._legality.get(x)
        if cached is None:
            cached = legality_check(self, x)
            with self._lock:
                self._legality[x] = cached
        return cached


def build_generator(F: SparseHam, msg: MerlinMessage,
                    fallback_bits: Optional[int] = INTERVAL_FALLBACK_BITS) -> MarkovGenerator:
    return MarkovGenerator(F, msg, fallback_bits)


def legality_check(g: MarkovGenerator, x: str) -> Legality:
    """Legal iff every rate out of x is >= 0 and the balance residual is exactly 0."""
    if g.amplitude(x).is_zero:
        return Legality(False, 'ZeroAmplitude', x)
    try:
        rates = g.rates(x)
        for y, r in sorted(rates.items()):
            s = r.sign()
            if s is None:
                return Legality(False, 'UndecidableSign', f"rate {x}->{y}")
            if s < 0:
                return Legality(False, 'NegativeRate', f"{x}->{y} = {r}")
        residual = g.balance_residual(x)
    except ZeroAmplitudeVisited as exc:
        return Legality(False, 'ZeroAmplitude', str(exc))
    s = residual.sign()
    if s is None:
        return Legality(False, 'UndecidableSign', f"balance residual at {x}")
    if s != 0:
        return Legality(False, 'BalanceResidual', f"{x}: {residual}")
    return LEGAL


@dataclass(frozen=True)
class RunOutcome:
    survived: bool
    reason: str
    time: float
    jumps: int
    final_state: str
    occupation: Mapping[str, float] = field(default_factory=dict)
    float_conversions: int = 0


def gillespie_run(g: MarkovGenerator, start: str, cfg: VerifierConfig,
                  rng: Optional[np.random.Generator] = None) -> RunOutcome:
    """One trajectory; Rejected outcomes carry the illegality and its hitting time."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    t_max = cfg.horizon(g.F.n)
    t, x, jumps, conversions = 0.0, start, 0, 0
    occupation: Dict[str, float] = {}
    while True:
        verdict = g.legality(x)
        if not verdict.legal:
            return RunOutcome(False, str(verdict), t, jumps, x, occupation, conversions)
        rates = g.rates(x)
        targets = sorted(rates)
        weights = np.array([float(rates[y]) for y in targets], dtype=float)
        conversions += len(targets)
        total = float(weights.sum())
        if total <= 0.0:
            occupation[x] = occupation.get(x, 0.0) + (t_max - t)
            return RunOutcome(True, 'absorbing', t_max, jumps, x, occupation, conversions)
        dt = rng.exponential(1.0 / total)
        if t + dt >= t_max:
            occupation[x] = occupation.get(x, 0.0) + (t_max - t)
            return RunOutcome(True, 'horizon', t_max, jumps, x, occupation, conversions)
        occupation[x] = occupation.get(x, 0.0) + dt
        t += dt
        index = int(np.searchsorted(np.cumsum(weights), rng.uniform() * total, side='right'))
        x = targets[min(index, len(targets) - 1)]
        jumps += 1
        if cfg.max_jumps is not None and jumps >= cfg.max_jumps:
            # the state just entered still has to pass the legality check
            verdict = g.legality(x)
            if not verdict.legal:
                return RunOutcome(False, str(verdict), t, jumps, x, occupation, conversions)
            return RunOutcome(True, 'jump budget', t, jumps, x, occupation, conversions)


def run_trials(g: MarkovGenerator, start: str, cfg: VerifierConfig) -> List[RunOutcome]:
    """cfg.trials runs, each on its own SeedSequence child; order is deterministic."""
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.trials)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(lambda rng: gillespie_run(g, start, cfg, rng), streams))
    return [gillespie_run(g, start, cfg, rng) for rng in streams]


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str
    lambda_star: ExactValue
    outcomes: Tuple[RunOutcome, ...] = ()
    trace: Tuple[str, ...] = ()

    @property
    def survival_fraction(self) -> Fraction:
        if not self.outcomes:
            return Fraction(0)
        return Fraction(sum(1 for o in self.outcomes if o.survived), len(self.outcomes))

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([{'trial': i, 'survived': o.survived, 'reason': o.reason, 'time': o.time,
                              'jumps': o.jumps, 'final_state': o.final_state,
                              'float_conversions': o.float_conversions}
                             for i, o in enumerate(self.outcomes, 1)],
                            columns=['trial', 'survived', 'reason', 'time', 'jumps', 'final_state',
                                     'float_conversions'])

    def to_report(self) -> dict:
        table = self.table()
        return {
            'accepted': self.accepted,
            'reason': self.reason,
            'lambda_star': pack(self.lambda_star),
            'survival_fraction': str(self.survival_fraction),
            'trials': table.to_dict('records'),
            'rejections': {reason: int(count) for reason, count in
                           table[~table['survived']]['reason'].value_counts().sort_index().items()}
            if len(table) else {},
            'float_conversions': int(table['float_conversions'].sum()) if len(table) else 0,
            'trace': list(self.trace),
        }


def verify(H: SparseHam, msg: MerlinMessage, cfg: VerifierConfig) -> Verdict:
    """
    Reject at once when lambda* > b.  Otherwise make H real (splitting xi to match),
    take the fixed-node operator with respect to xi, and accept iff at least half of
    cfg.trials Gillespie runs from x* survive to t_max.
    """
    trace: List[str] = []
    if compare(msg.lambda_star, cfg.b) > 0:
        return Verdict(False, f"lambda* = {msg.lambda_star} exceeds b = {cfg.b}", msg.lambda_star, (),
                       ('threshold',))
    try:
        if not H.real:
            H = complexify_to_real(H)
            phi, _ = split_real(msg.xi)
            start = msg.x_star + ('0' if not msg.xi(msg.x_star).real().is_zero else '1')
            msg = MerlinMessage(msg.lambda_star, phi, start)
            trace.append(f"complexified to {H.n} qubits, start {start}")
        msg.check()
        F = fixed_node(H, msg.xi, cfg.numeric_fallback_bits)
        trace.append(f"fixed-node operator {F.label}")
        g = build_generator(F, msg, cfg.numeric_fallback_bits)
        outcomes = run_trials(g, msg.x_star, cfg)
    except SuccinctError as exc:
        logger.warning("verification aborted: %s", exc)
        trace.append(f"error: {exc}")
        return Verdict(False, f"{type(exc).__name__}: {exc}", msg.lambda_star, (), tuple(trace))
    survived = sum(1 for o in outcomes if o.survived)
    trace.append(f"{survived}/{len(outcomes)} runs survived to t={cfg.horizon(H.n):g}")
    accepted = Fraction(survived, len(outcomes)) >= SURVIVAL_THRESHOLD
    reason = 'survival fraction meets threshold' if accepted else 'survival fraction below threshold'
    return Verdict(accepted, reason, msg.lambda_star, tuple(outcomes), tuple(trace))


def stationary_distribution(xi: AmplitudeQuery, support: Sequence[str]) -> pd.Series:
    """pi(x) = |xi_x|^2 / sum |xi_y|^2 over the given support, as floats."""
    weights = pd.Series({x: float(xi(x).abs2()) for x in support}, dtype=float)
    return weights / weights.sum()


def occupation_frequencies(outcome: RunOutcome) -> pd.Series:
    series = pd.Series(dict(outcome.occupation), dtype=float)
    return series / series.sum()


def total_variation(p: pd.Series, q: pd.Series) -> float:
    aligned_p, aligned_q = p.align(q, fill_value=0.0)
    return float((aligned_p - aligned_q).abs().sum() / 2)
