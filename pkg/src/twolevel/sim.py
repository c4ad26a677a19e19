"""Exact stochastic simulation of the two-level laser as a jump process.

Four events change the state ``(m, n2)``:

    pump          n2 + 1          rate J (Poissonian) or at times k/J (regular)
    stimulated    n2 - 1, m + 1   rate (m + 1) n2
    spontaneous   n2 - 1          rate gamma n2
    detection     m - 1           rate alpha m

The lower lasing level empties instantly, so a de-excited atom returns to
the ground state at once. Poissonian pumping uses the direct method. For a
regular pump, stochastic waiting times are drawn from the current total
stochastic rate; a draw that overshoots the next scheduled arrival is
discarded and the clock restarts there (exponential clocks are memoryless
and the rates are constant between events).
"""
from __future__ import annotations

import enum
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from numba import njit

from .steady import LaserParams, steady_state, validate_params

__all__ = [
    "PumpMode",
    "Event",
    "SimConfig",
    "SimState",
    "Trajectory",
    "SimulationError",
    "event_rates",
    "apply_event",
    "make_rng",
    "simulate",
    "simulate_ensemble",
]

BLOCKED_PUMP_LIMIT = 1e-3
_BLOCK = 1 << 18


class SimulationError(RuntimeError):
    pass


class PumpMode(enum.Enum):
    Poissonian = "poissonian"
    Regular = "regular"

    @classmethod
    def for_xi(cls, xi: float) -> "PumpMode":
        if xi == 1:
            return cls.Poissonian
        if xi == 0:
            return cls.Regular
        raise SimulationError(f"simulable pumps are xi∈{{0,1}}, got xi={xi}")

    @property
    def xi(self) -> float:
        return 1.0 if self is PumpMode.Poissonian else 0.0


class Event(enum.IntEnum):
    pump = 0
    stimulated = 1
    spontaneous = 2
    detection = 3


@dataclass(frozen=True)
class SimConfig:
    duration: float
    burn_in: float = 0.0
    sample_interval: float = 0.01
    seed: int = 0
    pump_mode: PumpMode = PumpMode.Poissonian
    record_detections: bool = True
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pump_mode", PumpMode(self.pump_mode))
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise SimulationError("duration must be positive")
        if not 0 <= self.burn_in < self.duration:
            raise SimulationError("burn_in must satisfy 0 ≤ burn_in < duration")
        if not self.sample_interval > 0:
            raise SimulationError("sample_interval must be positive")
        if not 0 <= self.seed < 2**64:
            raise SimulationError("seed must be a 64-bit unsigned integer")
        if self.sample_interval > (self.duration - self.burn_in) / 100:
            warnings.warn(
                "sample_interval exceeds 1/100 of the post-burn-in window; "
                "moment estimates will be coarse",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def n_samples(self) -> int:
        return int(math.floor((self.duration - self.burn_in) / self.sample_interval + 1e-9)) + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pump_mode"] = self.pump_mode.value
        return d


@dataclass(frozen=True)
class SimState:
    t: float
    m: int
    n2: int


@dataclass
class Trajectory:
    """Regular state samples past burn-in plus the detection record.

    ``event_counts`` and ``detections`` cover ``(burn_in, duration]``;
    ``initial_state`` is the state at ``burn_in``.
    """

    t: np.ndarray
    m: np.ndarray
    n2: np.ndarray
    detections: np.ndarray
    event_counts: dict
    blocked_pump: int
    initial_state: SimState
    final_state: SimState
    params: LaserParams
    config: SimConfig

    @property
    def samples(self) -> list[tuple[float, int, int]]:
        return list(zip(self.t.tolist(), self.m.tolist(), self.n2.tolist()))

    @property
    def window(self) -> float:
        return self.config.duration - self.config.burn_in

    def metadata(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "config": self.config.to_dict(),
            "event_counts": dict(self.event_counts),
            "blocked_pump": self.blocked_pump,
            "initial_state": asdict(self.initial_state),
            "final_state": asdict(self.final_state),
            "n_samples": int(self.t.size),
            "n_detections": int(self.detections.size),
        }

    def write(self, samples_path, detections_path=None, metadata_path=None) -> list[str]:
        written = []
        for path in (samples_path, detections_path, metadata_path):
            if path is not None:
                Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(samples_path, "w", newline="") as fh:
            fh.write("t,m,n2\n")
            for t, m, n2 in zip(self.t.tolist(), self.m.tolist(), self.n2.tolist()):
                fh.write(f"{t:.12g},{m},{n2}\n")
        written.append(str(samples_path))
        if detections_path is not None:
            with open(detections_path, "w", newline="") as fh:
                fh.write("t\n")
                fh.writelines(f"{t:.12g}\n" for t in self.detections.tolist())
            written.append(str(detections_path))
        if metadata_path is not None:
            with open(metadata_path, "w") as fh:
                json.dump(self.metadata(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            written.append(str(metadata_path))
        return written


def event_rates(
    state: SimState, params: LaserParams, pump_mode: PumpMode = PumpMode.Poissonian
) -> tuple[float, float, float, float]:
    """``(pump, stimulated, spontaneous, detection)`` rates; a regular pump is scheduled, not drawn."""
    pump = params.J if PumpMode(pump_mode) is PumpMode.Poissonian else 0.0
    return (
        pump,
        float((state.m + 1) * state.n2),
        params.gamma * state.n2,
        params.alpha * state.m,
    )


def apply_event(state: SimState, event: Event, N: int) -> SimState:
    event = Event(event)
    m, n2 = state.m, state.n2
    if event is Event.pump:
        if n2 >= N:
            raise SimulationError("pump blocked: every atom is already excited")
        return SimState(state.t, m, n2 + 1)
    if event in (Event.stimulated, Event.spontaneous):
        if n2 <= 0:
            raise SimulationError(f"{event.name} event with empty upper level")
        return SimState(state.t, m + 1 if event is Event.stimulated else m, n2 - 1)
    if m <= 0:
        raise SimulationError("detection event with empty cavity")
    return SimState(state.t, m - 1, n2)


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator; ``(seed, stream)`` pairs give independent streams."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


# status codes returned by the kernel
_DONE, _NEED_RANDOM, _NEED_BUFFER = 0, 1, 2


@njit(cache=True, nogil=True)
def _advance(
    st,  # float64[2]: t, next pump time index as float
    ist,  # int64[...]: m, n2, sample index, det count, random index, pump k
    counts,  # int64[5]: pump, stimulated, spontaneous, detection, blocked
    N, J, alpha, gamma, regular,
    duration, burn_in, dt, n_samples,
    samples_m, samples_n2, det_buf, post, record, u,
):
    t = st[0]
    m = ist[0]
    n2 = ist[1]
    k = ist[2]
    nd = ist[3]
    iu = ist[4]
    kp = ist[5]
    nu = u.shape[0]
    status = _DONE
    t_pump = kp / J if (regular and J > 0.0) else np.inf
    while True:
        if nd >= det_buf.shape[0]:
            status = _NEED_BUFFER
            break
        if iu + 2 > nu:
            status = _NEED_RANDOM
            break
        stim = (m + 1.0) * n2
        spont = gamma * n2
        det = alpha * m
        pump = 0.0 if regular else J
        total = pump + stim + spont + det
        if total > 0.0:
            tau = -np.log1p(-u[iu]) / total
            t_new = t + tau
        else:
            t_new = np.inf
        scheduled = False
        if t_pump <= t_new:
            t_new = t_pump
            scheduled = True
        if t_new > duration:
            t_new = duration
        while k < n_samples and burn_in + k * dt < t_new:
            samples_m[k] = m
            samples_n2[k] = n2
            k += 1
        if t_new >= duration:
            t = duration
            while k < n_samples and burn_in + k * dt <= duration + 1e-9 * dt:
                samples_m[k] = m
                samples_n2[k] = n2
                k += 1
            break
        t = t_new
        if scheduled:
            kp += 1
            t_pump = kp / J
            iu += 1  # keep random consumption aligned with the event count
            which = 0
        else:
            x = u[iu + 1] * total
            iu += 2
            if x < pump:
                which = 0
            elif x < pump + stim:
                which = 1
            elif x < pump + stim + spont:
                which = 2
            else:
                which = 3
        if which == 0:
            if n2 >= N:
                if post:
                    counts[4] += 1
            else:
                n2 += 1
                if post:
                    counts[0] += 1
        elif which == 1:
            n2 -= 1
            m += 1
            if post:
                counts[1] += 1
        elif which == 2:
            n2 -= 1
            if post:
                counts[2] += 1
        else:
            m -= 1
            if post:
                counts[3] += 1
                if record:
                    det_buf[nd] = t
                    nd += 1
    st[0] = t
    ist[0] = m
    ist[1] = n2
    ist[2] = k
    ist[3] = nd
    ist[4] = iu
    ist[5] = kp
    return status


def _initial_state(params: LaserParams) -> tuple[int, int]:
    if params.J <= 0:
        return 0, 0
    ss = steady_state(params)
    return int(round(ss.m)), min(int(round(ss.n2)), int(params.N))


def simulate(params: LaserParams, config: SimConfig) -> Trajectory:
    """Run one trajectory; bit-identical for identical ``(params, config)``."""
    validate_params(params)
    expected = PumpMode.for_xi(params.xi)
    if expected is not config.pump_mode:
        raise SimulationError(
            f"pump mode {config.pump_mode.value} does not realize xi={params.xi}"
        )
    n_samples = config.n_samples
    if config.duration - config.burn_in < config.sample_interval:
        raise SimulationError("duration too short to collect a sample past burn-in")

    rng = make_rng(config.seed, config.stream)
    m0, n20 = _initial_state(params)
    regular = config.pump_mode is PumpMode.Regular
    st = np.array([0.0])
    ist = np.array([m0, n20, 0, 0, 0, 1], dtype=np.int64)
    counts = np.zeros(5, dtype=np.int64)
    samples_m = np.zeros(n_samples, dtype=np.int64)
    samples_n2 = np.zeros(n_samples, dtype=np.int64)
    det_size = 1024
    if config.record_detections:
        det_size = max(det_size, int(1.2 * params.J * (config.duration - config.burn_in)) + 1024)
    det_buf = np.empty(det_size, dtype=np.float64)
    u = rng.random(_BLOCK)
    initial = None
    burn = config.burn_in

    # run up to burn-in first to capture the state there
    # post-burn-in phase counts events and records detections
    for stop, post in ((burn, False), (config.duration, True)):
        record = post and config.record_detections
        if stop <= st[0]:
            if initial is None:
                initial = SimState(burn, int(ist[0]), int(ist[1]))
            continue
        while True:
            status = _advance(
                st, ist, counts, int(params.N), float(params.J), float(params.alpha),
                float(params.gamma), regular, float(stop), float(burn),
                float(config.sample_interval), n_samples, samples_m, samples_n2,
                det_buf, post, record, u,
            )
            if status == _DONE:
                break
            if status == _NEED_RANDOM:
                # carry over unused values so the stream is consumed in order
                u = np.concatenate([u[ist[4]:], rng.random(_BLOCK)])
                ist[4] = 0
            else:
                det_buf = np.concatenate([det_buf, np.empty(det_buf.size, dtype=np.float64)])
        if initial is None:
            initial = SimState(burn, int(ist[0]), int(ist[1]))
            counts[:] = 0

    pumps = int(counts[0])
    blocked = int(counts[4])
    if blocked > BLOCKED_PUMP_LIMIT * max(pumps + blocked, 1) and blocked > 0:
        raise SimulationError(
            f"{blocked} pump events blocked at n2 = N (more than 0.1% of {pumps + blocked})"
        )
    t = config.burn_in + np.arange(n_samples) * config.sample_interval
    names = [e.name for e in Event]
    return Trajectory(
        t=t,
        m=samples_m,
        n2=samples_n2,
        detections=det_buf[: int(ist[3])].copy(),
        event_counts={name: int(c) for name, c in zip(names, counts[:4])},
        blocked_pump=blocked,
        initial_state=initial,
        final_state=SimState(float(st[0]), int(ist[0]), int(ist[1])),
        params=params,
        config=config,
    )


def simulate_ensemble(
    params: LaserParams, config: SimConfig, n: int, workers: int | None = None
) -> list[Trajectory]:
    """Independent trajectories on streams ``0..n-1`` of ``config.seed``; order fixed by stream."""
    configs = [replace(config, stream=i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: simulate(params, c), configs))
