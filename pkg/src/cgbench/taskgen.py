"""Teacher-network regression tasks whose training error minimum is exactly zero.

A random teacher network labels uniformly drawn inputs, so the teacher weights
reproduce every target and the MSE minimum is zero by construction. The
nonlinearity degree ``d`` sets the weight range to ``[-c, c]`` with
``c = d / sqrt(fan_in)``, which makes the first hidden layer's activation
arguments roughly normal with standard deviation ``d / 3``.

Randomness comes from numpy's counter-based Philox generator, one stream per
``(seed, purpose)`` pair.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

from cgbench.network import ActivationKind, NetworkConfig, forward, param_count
from cgbench.precision import PrecisionMode, demote

PRNG_NAME = "numpy.random.Philox"

_INPUTS = 1
_WEIGHTS = 2

DEFAULT_PATTERNS = 200
DEFAULT_LEAK = 0.05


class Profile(str, enum.Enum):
    MODERATE = "moderate"
    STRONG = "strong"

    @property
    def default_d(self) -> float:
        return 2.0 if self is Profile.MODERATE else 4.0

    def default_activation(self, h: float = DEFAULT_LEAK) -> ActivationKind:
        if self is Profile.MODERATE:
            return ActivationKind.symmetric()
        return ActivationKind.leaky(h)


def _stream(seed: int, purpose: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), purpose])))


@dataclasses.dataclass(frozen=True)
class TaskSpec:
    config: NetworkConfig
    profile: Profile = Profile.MODERATE
    d: float | None = None
    patterns: int = DEFAULT_PATTERNS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(self.profile))
        if self.d is None:
            object.__setattr__(self, "d", self.profile.default_d)
        if not self.d > 0:
            raise ValueError("nonlinearity factor d must be positive")
        if self.patterns < 1:
            raise ValueError("need at least one pattern")

    @classmethod
    def build(
        cls,
        input_dim: int,
        output_dim: int,
        hidden_sizes,
        profile: Profile | str = Profile.MODERATE,
        *,
        d: float | None = None,
        patterns: int = DEFAULT_PATTERNS,
        seed: int = 0,
        h: float = DEFAULT_LEAK,
    ) -> TaskSpec:
        """Spec with the profile's default activation (plain for moderate, leaky for strong)."""
        profile = Profile(profile)
        config = NetworkConfig(input_dim, output_dim, tuple(hidden_sizes), profile.default_activation(h))
        return cls(config, profile, d, patterns, seed)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "profile": self.profile.value,
            "d": self.d,
            "patterns": self.patterns,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TaskSpec:
        return cls(NetworkConfig.from_dict(d["config"]), Profile(d["profile"]), float(d["d"]),
                   int(d["patterns"]), int(d["seed"]))


@dataclasses.dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray
    var_y: float
    teacher_seed: int
    generation_precision: PrecisionMode = PrecisionMode.DOUBLE

    @property
    def patterns(self) -> int:
        return self.inputs.shape[0]

    @property
    def precision(self) -> PrecisionMode:
        return PrecisionMode.SINGLE if self.inputs.dtype == np.float32 else PrecisionMode.DOUBLE

    def astype(self, mode: PrecisionMode) -> Dataset:
        """Copy with inputs and targets rounded to ``mode``; ``var_y`` stays double."""
        return dataclasses.replace(self, inputs=demote(self.inputs, mode), targets=demote(self.targets, mode))


def sample_inputs(patterns: int, input_dim: int, seed: int) -> np.ndarray:
    """I.i.d. uniform draws on [-1, 1], shape ``(patterns, input_dim)``."""
    if patterns < 1 or input_dim < 1:
        raise ValueError("patterns and input_dim must be >= 1")
    return _stream(seed, _INPUTS).uniform(-1.0, 1.0, size=(patterns, input_dim))


def weight_range(d: float, fan_in: int) -> float:
    return d / math.sqrt(fan_in)


def sample_teacher_weights(config: NetworkConfig, d: float, seed: int) -> np.ndarray:
    if not d > 0:
        raise ValueError("nonlinearity factor d must be positive")
    rng = _stream(seed, _WEIGHTS)
    # every layer including the linear output one gets the fan-in scaling
    chunks = [rng.uniform(-weight_range(d, fi), weight_range(d, fi), size=fo * fi)
              for fo, fi in config.layer_shapes]
    params = np.concatenate(chunks)
    assert params.shape[0] == param_count(config)
    return params


def initial_params(config: NetworkConfig, d: float, seed: int, *, teacher_seed: int | None = None) -> np.ndarray:
    """Optimizer starting point: teacher-distributed weights from another seed.

    Uses the same stream layout as the teacher, so reusing the teacher seed
    would start at the global minimum; that is rejected.
    """
    if teacher_seed is not None and seed == teacher_seed:
        raise ValueError("initial seed equals the teacher seed; the run would start at the minimum")
    return sample_teacher_weights(config, d, seed)


def output_variance(targets: np.ndarray) -> float:
    """Variance about the per-component mean, averaged over components (double)."""
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 2:
        raise ValueError("output variance needs at least two patterns")
    centered = y - y.mean(axis=0)
    return float(np.mean(centered * centered))


def generate_task(spec: TaskSpec) -> tuple[Dataset, np.ndarray]:
    """Draw teacher weights and inputs, label by the teacher's forward pass (double)."""
    teacher = sample_teacher_weights(spec.config, spec.d, spec.seed)
    inputs = sample_inputs(spec.patterns, spec.config.input_dim, spec.seed)
    targets = forward(spec.config, teacher, inputs)
    var_y = output_variance(targets) if spec.patterns >= 2 else 0.0
    return Dataset(inputs, targets, var_y, spec.seed), teacher


def with_irreducible_offset(dataset: Dataset, offset: float) -> Dataset:
    """Mirror every pattern and shift all targets by ``offset``.

    Bias-free networks with odd activations give ``f(-x) = -f(x)``, so for any
    weights the MSE on the returned set equals ``offset**2`` plus the MSE on the
    original set. A large offset buries the trainable part of the loss below the
    resolution of single precision while double still resolves it.
    """
    x = np.asarray(dataset.inputs, dtype=np.float64)
    y = np.asarray(dataset.targets, dtype=np.float64)
    inputs = np.concatenate([x, -x])
    targets = np.concatenate([y + offset, -y + offset])
    return Dataset(inputs, targets, output_variance(targets), dataset.teacher_seed)
