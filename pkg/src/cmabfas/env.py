"""Simulated SPIT-filter environment.

Action 1 forwards the call untouched; actions 2..k apply a security test
(a voice CAPTCHA, say) that the caller passes with a class-dependent
probability. Rewards are built from call durations:

* forward: the call duration,
* test passed: call duration minus the test cost,
* test failed: the call is flagged and earns a flat ``flag_reward``
  (minus the test cost only when ``fail_cost_applied``).

Durations are exponential (mean 30 s for every SPIT-type class, 120 s for
normal calls) and clipped at ``d_max`` so that rewards are bounded and can be
mapped affinely onto [0, 1].
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .context import CLASS_LABELS

FORWARD = 1

SCENARIO_FORMAT = "cmabfas-scenario"
SCENARIO_VERSION = 1

# Pass probabilities of the two tests (A2, A3) per class.
DEFAULT_SUCCESS_PROBS = {
    "normal": (0.9, 0.8),
    "honeypot": (0.5, 0.3),
    "voipbot": (0.3, 0.5),
    "warvox": (0.1, 0.3),
    "spitter": (0.3, 0.3),
}

TIE_TOL = 1e-12


@dataclass(frozen=True)
class ActionSpec:
    action: int
    kind: str
    cost: float

    @property
    def is_forward(self) -> bool:
        return self.kind == "forward"


@dataclass(frozen=True)
class RewardModelConfig:
    mean_spit: float = 30.0
    mean_normal: float = 120.0
    flag_reward: float = 100.0
    test_cost: float = 100.0
    d_max: float = 900.0
    fail_cost_applied: bool = False

    def __post_init__(self) -> None:
        if not self.d_max > self.mean_normal:
            raise ValueError("d_max must exceed the mean normal call duration")
        if self.mean_spit <= 0 or self.mean_normal <= 0:
            raise ValueError("duration means must be positive")

    @property
    def r_min(self) -> float:
        return -self.test_cost

    @property
    def r_max(self) -> float:
        return self.d_max

    def mean_duration(self, label: str) -> float:
        return self.mean_normal if label == "normal" else self.mean_spit

    def truncated_mean(self, label: str) -> float:
        mean = self.mean_duration(label)
        return mean * -math.expm1(-self.d_max / mean)


@dataclass(frozen=True)
class Scenario:
    """Success probabilities for the test actions plus the reward model.

    ``probs[label][i]`` is the pass probability of action ``i + 2``.
    """

    probs: dict[str, tuple[float, ...]]
    reward: RewardModelConfig = field(default_factory=RewardModelConfig)

    def __post_init__(self) -> None:
        widths = {len(p) for p in self.probs.values()}
        if len(widths) != 1:
            raise ValueError("every class needs the same number of test actions")
        if set(self.probs) != set(CLASS_LABELS):
            raise ValueError(f"success probabilities required for classes {CLASS_LABELS}")
        for label, row in self.probs.items():
            for p in row:
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"success probability {p!r} for {label!r} outside [0, 1]")

    @property
    def k(self) -> int:
        return 1 + len(next(iter(self.probs.values())))

    def actions(self) -> list[ActionSpec]:
        specs = [ActionSpec(FORWARD, "forward", 0.0)]
        specs += [ActionSpec(a, "security_test", self.reward.test_cost) for a in range(2, self.k + 1)]
        return specs

    def success_prob(self, label: str, action: int) -> float:
        if action == FORWARD:
            raise ValueError("the forward action has no success probability")
        return self.probs[label][action - 2]

    def with_reward(self, reward: RewardModelConfig) -> Scenario:
        return Scenario(self.probs, reward)

    def to_dict(self) -> dict[str, Any]:
        r = self.reward
        return {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "k": self.k,
            "success_probs": {label: list(self.probs[label]) for label in CLASS_LABELS},
            "costs": [0.0] + [r.test_cost] * (self.k - 1),
            "duration_means": {"spit": r.mean_spit, "normal": r.mean_normal},
            "flag_reward": r.flag_reward,
            "fail_cost_applied": r.fail_cost_applied,
            "d_max": r.d_max,
            "scale": [r.r_min, r.r_max],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scenario:
        if data.get("format") != SCENARIO_FORMAT or data.get("version") != SCENARIO_VERSION:
            raise ValueError(f"not a {SCENARIO_FORMAT} v{SCENARIO_VERSION} document")
        means = data.get("duration_means", {})
        costs = [float(c) for c in data.get("costs", [0.0, 100.0])]
        if len(costs) < 2 or costs[0] != 0 or any(c != costs[1] for c in costs[1:]):
            raise ValueError("forward must cost 0 and every test must share one cost")
        reward = RewardModelConfig(
            mean_spit=float(means.get("spit", 30.0)),
            mean_normal=float(means.get("normal", 120.0)),
            flag_reward=float(data.get("flag_reward", 100.0)),
            test_cost=costs[1],
            d_max=float(data.get("d_max", 900.0)),
            fail_cost_applied=bool(data.get("fail_cost_applied", False)),
        )
        scenario = cls({k: tuple(float(p) for p in v) for k, v in data["success_probs"].items()}, reward)
        if scenario.k != data.get("k", scenario.k):
            raise ValueError("k does not match the success probability table")
        return scenario

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        return cls.from_dict(json.loads(Path(path).read_text()))


def default_scenario(spitter_a3: float | None = None, reward: RewardModelConfig | None = None) -> Scenario:
    """The three-action scenario. ``spitter_a3=0.1`` gives the variant whose
    spitter row makes A3 the unique best action."""
    probs = dict(DEFAULT_SUCCESS_PROBS)
    if spitter_a3 is not None:
        probs["spitter"] = (probs["spitter"][0], float(spitter_a3))
    return Scenario(probs, reward or RewardModelConfig())


def sample_duration(label: str, rng: random.Random, config: RewardModelConfig) -> float:
    return min(rng.expovariate(1.0 / config.mean_duration(label)), config.d_max)


@dataclass(frozen=True)
class RewardSample:
    raw: float
    scaled: float
    passed_test: bool | None = None
    duration: float | None = None


def scale(raw: float, config: RewardModelConfig) -> float:
    lo, hi = config.r_min, config.r_max
    if not lo <= raw <= hi:
        raise ValueError(f"raw reward {raw!r} outside [{lo}, {hi}]")
    return (raw - lo) / (hi - lo)


def unscale(scaled: float, config: RewardModelConfig) -> float:
    if not 0.0 <= scaled <= 1.0:
        raise ValueError(f"scaled reward {scaled!r} outside [0, 1]")
    return config.r_min + scaled * (config.r_max - config.r_min)


def sample_reward(label: str, action: int, rng: random.Random, scenario: Scenario) -> RewardSample:
    cfg = scenario.reward
    if action == FORWARD:
        d = sample_duration(label, rng, cfg)
        return RewardSample(d, scale(d, cfg), None, d)
    p = scenario.success_prob(label, action)
    if rng.random() < p:
        d = sample_duration(label, rng, cfg)
        raw = d - cfg.test_cost
        return RewardSample(raw, scale(raw, cfg), True, d)
    raw = cfg.flag_reward - cfg.test_cost if cfg.fail_cost_applied else cfg.flag_reward
    return RewardSample(raw, scale(raw, cfg), False, None)


def expected_reward(label: str, action: int, scenario: Scenario) -> float:
    cfg = scenario.reward
    mu = cfg.truncated_mean(label)
    if action == FORWARD:
        return mu
    p = scenario.success_prob(label, action)
    fail = cfg.flag_reward - cfg.test_cost if cfg.fail_cost_applied else cfg.flag_reward
    return p * (mu - cfg.test_cost) + (1.0 - p) * fail


def expected_table(scenario: Scenario) -> dict[str, list[float]]:
    return {
        label: [expected_reward(label, a, scenario) for a in range(1, scenario.k + 1)]
        for label in CLASS_LABELS
    }


def regret_of(label: str, action: int, scenario: Scenario) -> float:
    row = [expected_reward(label, a, scenario) for a in range(1, scenario.k + 1)]
    return max(row) - row[action - 1]


def optimal_actions(label: str, scenario: Scenario, tol: float = TIE_TOL) -> list[int]:
    row = [expected_reward(label, a, scenario) for a in range(1, scenario.k + 1)]
    best = max(row)
    return [a for a, v in enumerate(row, start=1) if not v < best - tol]


def has_unique_optima(scenario: Scenario) -> bool:
    return all(len(optimal_actions(label, scenario)) == 1 for label in CLASS_LABELS)


class SpitEnvironment:
    """Fast sampler over one scenario, precomputing per-class constants."""

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        cfg = scenario.reward
        self.k = scenario.k
        self._lo = cfg.r_min
        self._width = cfg.r_max - cfg.r_min
        self._rate = {label: 1.0 / cfg.mean_duration(label) for label in CLASS_LABELS}
        self._d_max = cfg.d_max
        self._cost = cfg.test_cost
        self._fail = cfg.flag_reward - cfg.test_cost if cfg.fail_cost_applied else cfg.flag_reward
        self._probs = {label: (None,) + tuple(scenario.probs[label]) for label in CLASS_LABELS}

    def sample(self, label: str, action: int, rng: random.Random) -> float:
        """Raw reward for playing ``action`` on a call of class ``label``."""
        if action == FORWARD:
            d = rng.expovariate(self._rate[label])
            return d if d < self._d_max else self._d_max
        if rng.random() < self._probs[label][action - 1]:
            d = rng.expovariate(self._rate[label])
            return (d if d < self._d_max else self._d_max) - self._cost
        return self._fail

    def scaled(self, raw: float) -> float:
        return (raw - self._lo) / self._width


def generate_scenario(k: int, seed: int, reward: RewardModelConfig | None = None, max_tries: int = 100) -> Scenario:
    """Scenario with ``k - 1`` security tests.

    Every SPIT-type class gets one designated test it almost always fails
    (pass probability 0.1); the remaining tests pass with probability in
    [0.3, 0.5]. Normal callers pass every test with probability in
    [0.8, 0.95]. Draws are repeated until each class has a unique best action.
    """
    if k < 2:
        raise ValueError("a scenario needs at least one security test (k >= 2)")
    reward = reward or RewardModelConfig()
    rng = random.Random(seed)
    tests = list(range(2, k + 1))
    spit_labels = [label for label in CLASS_LABELS if label != "normal"]
    for _ in range(max_tries):
        if len(tests) >= len(spit_labels):
            best = dict(zip(spit_labels, rng.sample(tests, len(spit_labels))))
        else:
            best = {label: rng.choice(tests) for label in spit_labels}
        probs = {"normal": tuple(round(rng.uniform(0.8, 0.95), 4) for _ in tests)}
        for label in spit_labels:
            probs[label] = tuple(0.1 if a == best[label] else round(rng.uniform(0.3, 0.5), 4) for a in tests)
        scenario = Scenario({label: probs[label] for label in CLASS_LABELS}, reward)
        if has_unique_optima(scenario):
            return scenario
    raise RuntimeError(f"no scenario with unique optimal actions after {max_tries} draws")


def scenario_for(k: int, seed: int = 0, spitter_a3: float | None = None,
                 reward: RewardModelConfig | None = None) -> Scenario:
    if k == 3:
        return default_scenario(spitter_a3, reward)
    return generate_scenario(k, seed, reward)
