"""Monte Carlo symbol-error-rate estimation, rho sweeps and joint processing gain.

Work is cut into blocks of trials. Each block draws its symbols and noise
from a stream keyed by ``(master_seed, power index, block index)``, and
every splitting ratio and detector at that power reuses the same draws
(common random numbers). Blocks only return integer error counts, so the
totals do not depend on how many worker processes ran them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from splitrx.channel import ChannelParams, draw_noise, transmit
from splitrx.constellation import Constellation
from splitrx.detect import cd_indices, low_complexity_indices
from splitrx.errors import DegenerateDensity, GainUndefined, SplitterDegenerate
from splitrx.likelihood import QuadratureSpec, ml_3d_indices, pd_indices

__all__ = [
    "DETECTORS",
    "SerEstimate",
    "SweepConfig",
    "SweepRow",
    "GainReport",
    "SimulationError",
    "wilson_interval",
    "check_detector",
    "estimate_ser",
    "sweep_rho",
    "joint_gain",
    "resolve_workers",
]

DETECTORS = ("low_complexity", "ml_3d", "cd", "pd")


class SimulationError(RuntimeError):
    """A block failed; the message names the grid point."""


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    z = float(norm.ppf(0.5 + level / 2))
    p = errors / trials
    z2n = z * z / trials
    centre = (p + z2n / 2) / (1 + z2n)
    half = z * math.sqrt(p * (1 - p) / trials + z2n / (4 * trials)) / (1 + z2n)
    # the interval reaches 0 or 1 exactly when every trial went the same way
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class SerEstimate:
    errors: int
    trials: int
    seed: int
    ci_level: float = 0.95
    ser: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError(f"errors={self.errors} outside [0, trials={self.trials}]")
        lo, hi = wilson_interval(self.errors, self.trials, self.ci_level)
        object.__setattr__(self, "ser", self.errors / self.trials)
        object.__setattr__(self, "ci_low", lo)
        object.__setattr__(self, "ci_high", hi)

    @property
    def ci_half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    @property
    def std_error(self) -> float:
        return math.sqrt(self.ser * (1 - self.ser) / self.trials)


@dataclass(frozen=True)
class SweepConfig:
    """One experiment grid. ``params`` supplies everything except power and rho."""

    constellation: Constellation
    params: ChannelParams
    rho_grid: tuple[float, ...]
    power_grid: tuple[float, ...]
    detectors: tuple[str, ...]
    trials: int = 100_000
    master_seed: int = 0
    ci_level: float = 0.95
    quadrature_order: int = 48
    ml_stride: int = 1
    split_detector: str = "ml_3d"
    block_size: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))
        object.__setattr__(self, "power_grid", tuple(float(p) for p in self.power_grid))
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.trials < 1000:
            raise ValueError(f"trials must be >= 1000, got {self.trials}")
        for name, grid in (("rho_grid", self.rho_grid), ("power_grid", self.power_grid)):
            if not grid:
                raise ValueError(f"{name} is empty")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not all(0.0 <= r <= 1.0 for r in self.rho_grid):
            raise ValueError("rho_grid values must lie in [0, 1]")
        if not all(p > 0 for p in self.power_grid):
            raise ValueError("power_grid values must be > 0")
        for d in self.detectors + (self.split_detector,):
            if d not in DETECTORS:
                raise ValueError(f"unknown detector {d!r}; choose from {', '.join(DETECTORS)}")
        if not self.detectors:
            raise ValueError("detectors is empty")
        if self.ml_stride < 1 or self.block_size < 1:
            raise ValueError("ml_stride and block_size must be >= 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")
        QuadratureSpec(self.quadrature_order)

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.quadrature_order)

    def evaluated(self, rho_index: int, detector: str) -> bool:
        """ML is only run on every ``ml_stride``-th grid point."""
        return detector != "ml_3d" or rho_index % self.ml_stride == 0


@dataclass(frozen=True)
class SweepRow:
    power: float
    rho: float
    detector: str
    estimate: SerEstimate


@dataclass(frozen=True)
class GainReport:
    power: float
    ser_cd: float
    ser_pd: float
    ser_split_best: float
    best_rho: float
    gain: float | None
    trials: int
    note: str = ""


def resolve_workers(workers: int | None = None) -> int:
    """Explicit count, else ``SPLITRX_THREADS``, else 1; capped by ``SPLITRX_THREADS``."""
    env = os.environ.get("SPLITRX_THREADS")
    cap = int(env) if env and env.strip().isdigit() and int(env) > 0 else None
    n = workers if workers is not None else (cap or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, int(n))


def check_detector(detector: str, params: ChannelParams) -> None:
    """Raise if ``detector`` cannot run at these parameters."""
    if detector not in DETECTORS:
        raise ValueError(f"unknown detector {detector!r}")
    if detector == "low_complexity":
        if not 0.0 < params.rho < 1.0:
            raise SplitterDegenerate(
                f"low_complexity needs 0 < rho < 1, got rho={params.rho}"
            )
        if params.var_antenna <= 0:
            raise ValueError("low_complexity needs var_antenna > 0")
    if detector == "ml_3d" and (params.var_rectifier <= 0 or params.var_conversion <= 0):
        raise DegenerateDensity("ml_3d needs var_rectifier > 0 and var_conversion > 0")
    if detector == "pd" and params.var_rectifier <= 0 and (
            params.var_antenna <= 0 or params.rho >= 1):
        raise DegenerateDensity("pd needs var_rectifier > 0 or var_antenna > 0")


def _decide(detector, obs, cons, params, quad):
    if detector == "low_complexity":
        return low_complexity_indices(obs, cons, params)
    if detector == "cd":
        return cd_indices(obs, cons, params)
    if detector == "pd":
        return pd_indices(obs, cons, params, quad)
    return ml_3d_indices(obs, cons, params, quad)


@dataclass(frozen=True)
class _Block:
    cons: Constellation
    power_index: int
    block_index: int
    size: int
    seed: int
    # (params, detector) pairs evaluated on the block's draws
    jobs: tuple[tuple[ChannelParams, str], ...]
    quad: QuadratureSpec


def _run_block(block: _Block) -> np.ndarray:
    ss = np.random.SeedSequence(block.seed, spawn_key=(block.power_index, block.block_index))
    rng = np.random.default_rng(ss)
    sent = rng.integers(0, block.cons.order, block.size)
    # noise scaling does not depend on power or rho, so one draw serves every job
    noise = draw_noise(block.jobs[0][0], rng, block.size)
    x = block.cons.values[sent]
    errors = np.empty(len(block.jobs), dtype=np.int64)
    for j, (params, detector) in enumerate(block.jobs):
        try:
            obs = transmit(x, params, noise)
            errors[j] = np.count_nonzero(_decide(detector, obs, block.cons, params, block.quad) != sent)
        except Exception as exc:
            raise SimulationError(
                f"block {block.block_index} failed at power={params.power:g}, "
                f"rho={params.rho:g}, detector={detector}: {exc}"
            ) from exc
    return errors


def _blocks_for(cons, power_index, jobs, trials, seed, block_size, quad):
    out = []
    for b, start in enumerate(range(0, trials, block_size)):
        out.append(_Block(cons, power_index, b, min(block_size, trials - start), seed, jobs, quad))
    return out


def _execute(blocks: list[_Block], workers: int) -> list[np.ndarray]:
    if workers <= 1 or len(blocks) <= 1:
        return [_run_block(b) for b in blocks]
    with ProcessPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
        return list(pool.map(_run_block, blocks))


def _totals(blocks, results):
    """Sum block error counts per (power index, job)."""
    totals: dict[int, np.ndarray] = {}
    for blk, res in zip(blocks, results):
        if blk.power_index in totals:
            totals[blk.power_index] = totals[blk.power_index] + res
        else:
            totals[blk.power_index] = res.copy()
    return totals


def estimate_ser(cons: Constellation, params: ChannelParams, detector: str, trials: int,
                 seed: int, *, ci_level: float = 0.95,
                 quad: QuadratureSpec | None = None, block_size: int = 10_000,
                 workers: int | None = None) -> SerEstimate:
    """SER of one detector at one operating point; deterministic in ``seed``."""
    check_detector(detector, params)
    quad = quad or QuadratureSpec()
    blocks = _blocks_for(cons, 0, ((params, detector),), trials, seed, block_size, quad)
    results = _execute(blocks, resolve_workers(workers))
    return SerEstimate(int(sum(int(r[0]) for r in results)), trials, seed, ci_level)


def _params_at(config: SweepConfig, power: float, rho: float) -> ChannelParams:
    return config.params.replace(power=power, rho=rho)


def sweep_rho(config: SweepConfig, workers: int | None = None) -> list[SweepRow]:
    """SER of every detector over the rho grid, at every power.

    Rows come out ordered by power, then rho, then detector (in config order).
    """
    plan = []
    blocks = []
    for pi, power in enumerate(config.power_grid):
        jobs = []
        for ri, rho in enumerate(config.rho_grid):
            for det in config.detectors:
                if config.evaluated(ri, det):
                    p = _params_at(config, power, rho)
                    check_detector(det, p)
                    jobs.append((p, det))
        plan.append(jobs)
        blocks += _blocks_for(config.constellation, pi, tuple(jobs), config.trials,
                              config.master_seed, config.block_size, config.quadrature)
    totals = _totals(blocks, _execute(blocks, resolve_workers(workers)))
    rows = []
    for pi, jobs in enumerate(plan):
        for (p, det), err in zip(jobs, totals[pi]):
            est = SerEstimate(int(err), config.trials, config.master_seed, config.ci_level)
            rows.append(SweepRow(p.power, p.rho, det, est))
    return rows


def joint_gain(config: SweepConfig, workers: int | None = None) -> list[GainReport]:
    """Joint processing gain ``min(SER_cd, SER_pd) / min_rho SER_split`` per power.

    The coherent receiver runs at rho = 1 and the power-detection receiver at
    rho = 0, both on the same draws as the splitting detector.
    """
    interior = [r for r in config.rho_grid if 0.0 < r < 1.0]
    if not interior:
        raise ValueError("joint gain needs at least one rho strictly inside (0, 1)")
    split = config.split_detector
    plan = []
    blocks = []
    for pi, power in enumerate(config.power_grid):
        jobs = [(_params_at(config, power, 1.0), "cd"), (_params_at(config, power, 0.0), "pd")]
        jobs += [(_params_at(config, power, r), split) for r in interior]
        for p, det in jobs:
            check_detector(det, p)
        plan.append(jobs)
        blocks += _blocks_for(config.constellation, pi, tuple(jobs), config.trials,
                              config.master_seed, config.block_size, config.quadrature)
    totals = _totals(blocks, _execute(blocks, resolve_workers(workers)))
    reports = []
    n = config.trials
    for pi, power in enumerate(config.power_grid):
        err = totals[pi]
        ser_cd, ser_pd = err[0] / n, err[1] / n
        split_ser = err[2:] / n
        best = int(np.argmin(split_ser))
        try:
            gain = _gain(ser_cd, ser_pd, float(split_ser[best]))
            note = ""
        except GainUndefined as exc:
            gain, note = None, str(exc)
        reports.append(GainReport(power, float(ser_cd), float(ser_pd), float(split_ser[best]),
                                  interior[best], gain, n, note))
    return reports


def _gain(ser_cd: float, ser_pd: float, ser_split: float) -> float:
    if ser_split == 0.0:
        raise GainUndefined("no splitting-receiver errors observed; gain undefined")
    return float(min(ser_cd, ser_pd) / ser_split)
