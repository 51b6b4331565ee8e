"""
Linearly semi-implicit BDF time stepping of the embedding flow.

Each step extrapolates the embedding from the history, assembles the velocity
system around the extrapolant, solves once and advances r with the BDF
formula of the current order. The first two steps use BDF1 and BDF2.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import FlowAborted, InvalidStep, IsoflowError
from ..fem.forms import MetricContext, isometry_residual
from ..fem.lagrange import FeField, LagrangeSpace, interpolate, lift
from ..fem.regge import ReggeSpace, regge_interpolate
from .sources import MetricSource
from .system import assemble_saddle, dump_matrices, solve_saddle

logger = logging.getLogger(__name__)

# a_0 r^n + sum_j a_j r^(n-j) = tau v^n
BDF_COEFFICIENTS = [
    [1.0, -1.0],
    [3.0 / 2.0, -2.0, 1.0 / 2.0],
    [11.0 / 6.0, -3.0, 3.0 / 2.0, -1.0 / 3.0],
]
# r_hat^n = sum_j e_j r^(n-j)
EXTRAPOLATION = [
    [1.0],
    [2.0, -1.0],
    [3.0, -3.0, 1.0],
]
MAX_ORDER = 3
LAMBDA_WARNING = 1e-6
STEP_MATCH_TOL = 1e-8


class StepRecord(NamedTuple):
    step: int
    t: float
    lambda_norm: float
    constraint_res: float
    isometry_res: float
    wall_ms: float
    lambda_relative: float = 0.0


@dataclass
class FlowState:
    history: list[FeField]          # most recent first
    tau: float
    n: int = 0
    t0: float = 0.0
    records: list[StepRecord] = field(default_factory=list)

    @property
    def t(self) -> float:
        return self.t0 + self.n * self.tau

    @property
    def current(self) -> FeField:
        return self.history[0]

    @property
    def order(self) -> int:
        return min(len(self.history), MAX_ORDER)


@dataclass(frozen=True)
class Sample:
    t: float
    step: int
    r: FeField


@dataclass
class Trajectory:
    samples: list[Sample]
    records: list[StepRecord]
    tau: float

    @property
    def final(self) -> Sample:
        return self.samples[-1]

    @property
    def max_lambda(self) -> float:
        return max((r.lambda_norm for r in self.records), default=0.0)

    @property
    def max_lambda_relative(self) -> float:
        return max((r.lambda_relative for r in self.records), default=0.0)

    def at(self, t: float) -> Sample:
        return min(self.samples, key=lambda s: abs(s.t - t))

    def summary(self) -> dict:
        return {
            "steps": len(self.records),
            "t_final": self.final.t,
            "max_lambda": self.max_lambda,
            "max_lambda_relative": self.max_lambda_relative,
            "max_constraint_res": max((r.constraint_res for r in self.records), default=0.0),
            "final_isometry_res": self.records[-1].isometry_res if self.records else float("nan"),
        }


class BdfIntegrator:
    def __init__(
        self,
        space: LagrangeSpace,
        source: MetricSource,
        ctx: MetricContext,
        regge_space: Optional[ReggeSpace] = None,
        metric_rhs: str = "regge",
        track_isometry: bool = True,
        dump_dir: Optional[str | Path] = None,
    ):
        if metric_rhs not in ("regge", "exact"):
            raise ValueError(f"Unknown metric_rhs '{metric_rhs}'")
        if metric_rhs == "regge" and regge_space is None:
            raise ValueError("metric_rhs='regge' needs a Regge space")
        self.space = space
        self.source = source
        self.manifold = source.manifold
        self.ctx = ctx
        self.regge_space = regge_space
        self.metric_rhs = metric_rhs
        self.track_isometry = track_isometry
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self.pullback = source.pullback(space.mesh)
        self.on_step: Optional[Callable[[FlowState, StepRecord], None]] = None

    def initial_field(self) -> FeField:
        """r_h(0) = I_h (r(0) o a)."""
        return interpolate(self.space, lift(self.manifold, self.source.initial), 3)

    def metric_rate(self, t: float):
        if self.metric_rhs == "exact":
            return self.pullback.rate_at(t)
        return regge_interpolate(self.regge_space, self.pullback.rate_at(t))

    def target_metric(self, t: float):
        if self.metric_rhs == "exact":
            return self.pullback.at(t)
        return regge_interpolate(self.regge_space, self.pullback, t)

    def _constraint_residual(self, system, v: np.ndarray) -> float:
        """max_i |(v, mu_i)| / (|v| |mu_i|) in L2(M_h)."""
        v_norm = float(np.sqrt(max(_mass_norm2(system, v), 0.0)))
        if v_norm == 0.0:
            return 0.0
        mu_norms = np.sqrt(np.einsum("in,ni->i", system.B, system.rigid))
        return float(np.max(np.abs(system.B @ v) / (v_norm * mu_norms)))

    def _step(self, state: FlowState, order: int) -> FlowState:
        started = time.perf_counter()
        tau = state.tau
        t_new = state.t + tau
        self.source.check_time(t_new)

        hist = state.history
        r_hat = hist[0] * EXTRAPOLATION[order - 1][0]
        for c, r in zip(EXTRAPOLATION[order - 1][1:], hist[1:order]):
            r_hat = r_hat + r * c

        system = assemble_saddle(self.space, r_hat, self.metric_rate(t_new), self.ctx, t_new)
        if self.dump_dir is not None and state.n < MAX_ORDER:
            dump_matrices(system, self.dump_dir, prefix=f"step{state.n + 1}_")
        solution = solve_saddle(system)

        a = BDF_COEFFICIENTS[order - 1]
        acc = solution.v * tau
        for c, r in zip(a[1:], hist[:order]):
            acc = acc - r * c
        r_new = acc * (1.0 / a[0])

        iso = float("nan")
        if self.track_isometry:
            iso = isometry_residual(r_new, self.target_metric(t_new), self.ctx)
        record = StepRecord(
            step=state.n + 1,
            t=t_new,
            lambda_norm=solution.lambda_norm,
            constraint_res=self._constraint_residual(system, solution.v.flat),
            isometry_res=iso,
            wall_ms=1e3 * (time.perf_counter() - started),
            lambda_relative=solution.lambda_relative,
        )
        if solution.lambda_relative > LAMBDA_WARNING:
            logger.warning(
                "step %d: multiplier %.3e exceeds %.0e of the right-hand side",
                record.step, solution.lambda_relative, LAMBDA_WARNING,
            )
        logger.debug(
            "step %d t=%.5f bdf%d |lambda|=%.3e constraint=%.3e isometry=%.3e %.1f ms",
            record.step, t_new, order, record.lambda_norm, record.constraint_res, iso, record.wall_ms,
        )

        new_state = FlowState(
            history=[r_new] + hist[: MAX_ORDER - 1],
            tau=tau,
            n=state.n + 1,
            t0=state.t0,
            records=state.records + [record],
        )
        if self.on_step is not None:
            self.on_step(new_state, record)
        return new_state

    def initialize(self, tau: float, until: Optional[float] = None) -> FlowState:
        """Interpolate r(0), then take one BDF1 and one BDF2 step (fewer if `until` is reached)."""
        if not np.isfinite(tau) or tau <= 0:
            raise InvalidStep(f"Step size must be positive, got {tau}")
        t0 = self.source.interval[0]
        state = FlowState(history=[self.initial_field()], tau=float(tau), t0=t0)
        for order in (1, 2):
            if until is not None and state.t + tau > until + STEP_MATCH_TOL * max(1.0, until):
                break
            state = self._step(state, order)
        return state

    def bdf3_step(self, state: FlowState) -> FlowState:
        if len(state.history) < MAX_ORDER:
            raise InvalidStep(f"BDF3 needs {MAX_ORDER} history fields, got {len(state.history)}")
        return self._step(state, MAX_ORDER)

    def advance(self, state: FlowState) -> FlowState:
        return self._step(state, state.order)

    def step_count(self, tau: float, until: float) -> int:
        if not np.isfinite(tau) or tau <= 0:
            raise InvalidStep(f"Step size must be positive, got {tau}")
        if until < 0:
            raise InvalidStep(f"Final time must be non-negative, got {until}")
        steps = int(round(until / tau))
        if abs(steps * tau - until) > STEP_MATCH_TOL * max(1.0, until):
            raise InvalidStep(f"Final time {until} is not a multiple of tau={tau}")
        return steps

    def run(self, tau: float, until: float, sample_times: Sequence[float] = ()) -> Trajectory:
        """
        Integrate to `until` and keep the embedding at the steps nearest to
        `sample_times` (always including the start and the end). A failing
        step raises FlowAborted carrying the trajectory up to that point.
        """
        steps = self.step_count(tau, until)
        self.source.check_time(until)
        wanted = {0, steps} | {int(round(ts / tau)) for ts in sample_times}

        samples: list[Sample] = []
        state = FlowState(history=[self.initial_field()], tau=float(tau), t0=self.source.interval[0])
        samples.append(Sample(t=state.t, step=0, r=state.current))
        try:
            while state.n < steps:
                state = self.advance(state)
                if state.n in wanted:
                    samples.append(Sample(t=state.t, step=state.n, r=state.current))
                    logger.info("sample t=%.4f (step %d/%d)", state.t, state.n, steps)
        except (IsoflowError, np.linalg.LinAlgError) as exc:
            partial = Trajectory(samples=samples, records=state.records, tau=tau)
            logger.error("flow aborted at t=%.4f: %s", state.t + tau, exc)
            raise FlowAborted(f"Flow aborted after step {state.n}: {exc}", trajectory=partial, cause=exc) from exc

        return Trajectory(samples=samples, records=state.records, tau=tau)


def _mass_norm2(system, v: np.ndarray) -> float:
    m = system.mass
    vv = v.reshape(-1, 3)
    return float(np.einsum("nc,nc->", vv, np.asarray(m @ vv)))
