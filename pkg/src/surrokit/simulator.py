"""Seeded synthetic experiment generator with known ground-truth effects.

Generative model for user i in arm a on day t (relative to allocation):

    Y_it = b_i + tau_a * g(t) * 1[t >= 1] + e_it

where

* b_i ~ Normal(baseline_mean, baseline_sd^2) is a persistent user level;
* tau_a = effect_scale * draw, with draw ~ Student-t(effect_tail_df)
  (standard normal when the df is infinite); control arms have tau = 0;
* g(t) = novelty_floor + (1 - novelty_floor) * 2^(-(t-1)/novelty_halflife)
  is a novelty-decay profile starting at 1 and settling at the floor;
* e_it is a stationary AR(1) chain with marginal standard deviation
  noise_sd, run across the pre- and post-allocation days in day order.

The ground-truth long-term effect of arm a is tau_a times the average of
g(t) over days 1..horizon.

Randomness is counter-based: every (experiment, user) pair owns a Philox
substream derived from the master seed, so corpora are reproducible across
runs and independent of how generation is scheduled across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import IO, Iterator

import numpy as np

from .errors import InvalidConfig
from .panel import ArmLabel, OutcomePanel

_MASK64 = 2**64 - 1

# Counter high-word tags keeping effect draws and user chains disjoint.
_EFFECT_STREAM = 1
_USER_STREAM = 2


@dataclass(frozen=True)
class SimConfig:
    """Knobs of the generative model; see the module docstring.

    ``arms_per_experiment`` counts treatment arms (the control arm is
    always added on top) and may be fractional: experiment k receives
    floor((k+1)*x) - floor(k*x) arms, so a corpus of n experiments totals
    floor(n*x) treatment arms.
    """

    n_experiments: int = 1
    arms_per_experiment: float = 2.0
    users_per_arm: int = 100
    horizon: int = 63
    pre_period: int = 63
    baseline_mean: float = 1.0
    baseline_sd: float = 0.5
    noise_sd: float = 1.0
    ar1_rho: float = 0.2
    effect_scale: float = 0.05
    effect_tail_df: float = 3.0
    novelty_floor: float = 0.7
    novelty_halflife: float = 14.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_experiments < 1:
            raise InvalidConfig(f"n_experiments must be positive, got {self.n_experiments}")
        if self.arms_per_experiment < 1:
            raise InvalidConfig(
                f"arms_per_experiment must be at least 1, got {self.arms_per_experiment}"
            )
        if self.users_per_arm < 1:
            raise InvalidConfig(f"users_per_arm must be positive, got {self.users_per_arm}")
        if self.horizon < 1:
            raise InvalidConfig(f"horizon must be positive, got {self.horizon}")
        if self.pre_period < 0:
            raise InvalidConfig(f"pre_period must be nonnegative, got {self.pre_period}")
        if self.baseline_sd < 0 or self.noise_sd < 0:
            raise InvalidConfig("standard deviations must be nonnegative")
        if not 0.0 <= self.ar1_rho < 1.0:
            raise InvalidConfig(f"ar1_rho must be in [0, 1), got {self.ar1_rho}")
        if not math.isfinite(self.effect_scale):
            raise InvalidConfig("effect_scale must be finite")
        if not self.effect_tail_df > 0:
            raise InvalidConfig(f"effect_tail_df must be positive, got {self.effect_tail_df}")
        if not 0.0 <= self.novelty_floor <= 1.0:
            raise InvalidConfig(
                f"novelty_floor must be in [0, 1], got {self.novelty_floor}"
            )
        if not self.novelty_halflife > 0:
            raise InvalidConfig(
                f"novelty_halflife must be positive, got {self.novelty_halflife}"
            )
        if not 0 <= self.seed <= _MASK64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class SimulatedExperiment:
    """An outcome panel plus its ground-truth long-term effects per arm."""

    panel: OutcomePanel
    true_effects: dict[str, float]

    def __post_init__(self) -> None:
        treatment_names = {arm.name for arm in self.panel.treatment_arms}
        if set(self.true_effects) != treatment_names:
            raise InvalidConfig(
                "true_effects must cover exactly the non-control arms; "
                f"got {sorted(self.true_effects)} vs {sorted(treatment_names)}"
            )


def novelty_profile(days: np.ndarray, floor: float, halflife: float) -> np.ndarray:
    """Decay profile g(t): 1 at day 1, halving towards ``floor``."""
    t = np.asarray(days, dtype=float)
    return floor + (1.0 - floor) * np.exp2(-(t - 1.0) / halflife)


def _treatment_arm_count(arms_per_experiment: float, index: int) -> int:
    # Bresenham-style spreading: fractional configs alternate floor/ceil so
    # that n experiments total floor(n * x) treatment arms.
    x = float(arms_per_experiment)
    eps = 1e-9
    return int(math.floor((index + 1) * x + eps) - math.floor(index * x + eps))


def corpus_treatment_arms(config: SimConfig) -> int:
    """Total treatment arms simulate_corpus will produce."""
    return int(math.floor(config.n_experiments * float(config.arms_per_experiment) + 1e-9))


def _substream(config: SimConfig, index: int, word: int, tag: int) -> np.random.Generator:
    bitgen = np.random.Philox(
        key=[config.seed & _MASK64, index & _MASK64],
        counter=[0, 0, word & _MASK64, tag],
    )
    return np.random.Generator(bitgen)


def simulate_experiment(config: SimConfig, index: int) -> SimulatedExperiment:
    """Generate one experiment; deterministic in (config, index)."""
    if index < 0 or index >= config.n_experiments:
        raise InvalidConfig(
            f"experiment index {index} outside [0, {config.n_experiments})"
        )
    n_treat = _treatment_arm_count(config.arms_per_experiment, index)
    arms = [ArmLabel("control", True)]
    arms += [ArmLabel(f"t{j}", False) for j in range(1, n_treat + 1)]
    n_users = config.users_per_arm * len(arms)
    pre_days = list(range(-config.pre_period, 0))
    post_days = list(range(1, config.horizon + 1))
    all_days = pre_days + post_days
    n_days = len(all_days)

    effect_rng = _substream(config, index, 0, _EFFECT_STREAM)
    if math.isinf(config.effect_tail_df):
        draws = effect_rng.standard_normal(n_treat)
    else:
        draws = effect_rng.standard_t(config.effect_tail_df, size=n_treat)
    tau = config.effect_scale * draws

    # One normal block per user from its own substream: first value feeds
    # the baseline level, the rest drive the AR(1) chain.
    raw = np.empty((n_users, n_days + 1), dtype=float)
    for u in range(n_users):
        raw[u] = _substream(config, index, u, _USER_STREAM).standard_normal(n_days + 1)
    baseline = config.baseline_mean + config.baseline_sd * raw[:, 0]
    shocks = raw[:, 1:]

    noise = np.empty((n_users, n_days), dtype=float)
    noise[:, 0] = config.noise_sd * shocks[:, 0]
    innovation_sd = config.noise_sd * math.sqrt(1.0 - config.ar1_rho**2)
    for t in range(1, n_days):
        noise[:, t] = config.ar1_rho * noise[:, t - 1] + innovation_sd * shocks[:, t]

    outcomes = baseline[:, None] + noise
    profile = novelty_profile(np.array(post_days), config.novelty_floor, config.novelty_halflife)
    post_offset = len(pre_days)
    for arm_index in range(n_treat):
        start = (arm_index + 1) * config.users_per_arm
        outcomes[start : start + config.users_per_arm, post_offset:] += tau[arm_index] * profile

    mean_profile = float(profile.mean())
    true_effects = {
        f"t{j + 1}": float(tau[j] * mean_profile) for j in range(n_treat)
    }

    user_ids = [f"u{u:05d}" for u in range(n_users)]
    user_arms = [arms[u // config.users_per_arm] for u in range(n_users)]
    panel = OutcomePanel.from_matrix(
        experiment_id=f"sim-{index:05d}",
        user_ids=user_ids,
        arms=user_arms,
        days=all_days,
        matrix=outcomes,
        horizon=config.horizon,
    )
    return SimulatedExperiment(panel=panel, true_effects=true_effects)


def simulate_corpus(config: SimConfig) -> Iterator[SimulatedExperiment]:
    """Lazily generate all experiments of a corpus in index order.

    Yields one experiment at a time so corpora can be written to disk in
    constant memory.
    """
    for index in range(config.n_experiments):
        yield simulate_experiment(config, index)


def config_to_dict(config: SimConfig) -> dict:
    return asdict(config)


def config_from_dict(payload: dict) -> SimConfig:
    """Build a config from a JSON object; unknown keys are an error."""
    known = {f.name for f in fields(SimConfig)}
    unknown = set(payload) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    values = dict(payload)
    # Accept "inf" / null for the tail df so plain JSON can request
    # Gaussian effects.
    df = values.get("effect_tail_df")
    if df is None and "effect_tail_df" in values:
        values["effect_tail_df"] = math.inf
    elif isinstance(df, str):
        if df.lower() in ("inf", "infinity"):
            values["effect_tail_df"] = math.inf
        else:
            raise InvalidConfig(f"unparseable effect_tail_df {df!r}")
    try:
        return SimConfig(**values)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from None


def load_config(source: str | Path | IO[str]) -> SimConfig:
    """Read a SimConfig from a JSON file."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return load_config(handle)
    try:
        payload = json.load(source)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise InvalidConfig("config JSON must be an object")
    return config_from_dict(payload)
