"""
KAR Learner - Single-pass network training in the kernel and range spaces

Training runs in three steps and never iterates:
  1. draw every W_k at random (only the blocks of W_2..W_n are actually used)
  2. peel the targets backwards: G_n = Y,
         G_{k-1} = [f_k^-1(G_k) - 1 w_k^T] pinv(sans-bias W_k)
  3. back-substitute forwards: W_1 = pinv(X) f_1^-1(G_1), then
         W_k = pinv([1, f_{k-1}(A_{k-2} W_{k-1})]) f_k^-1(G_k)
That is n - 1 pseudo-inverses going back and n coming forward.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.activation import act, act_inv, clip_to_domain
from src.errors import NonFiniteIntermediate, ShapeMismatch
from src.linalg import CountingPinv, PinvConfig, as_matrix
from src.network import AugmentedBatch, NetworkSpec, WeightStack, augment, predict, with_ones

logger = logging.getLogger(__name__)

NORMAL_SCALED = "normal_scaled"
UNIFORM_PM1 = "uniform_pm1"
INIT_KINDS = (NORMAL_SCALED, UNIFORM_PM1)

# numpy's PCG64 bit generator, seeded directly from TrainConfig.seed
RNG_NAME = "numpy.random.PCG64"

# multiplies 1/sqrt(fan_in); at 1.0 the hidden units of XOR nets are often clipped flat
DEFAULT_INIT_SCALE = 0.5


@dataclass(frozen=True)
class TrainConfig:
    """
    seed: 64-bit seed for the PCG64 generator used by init_weights
    init: normal_scaled draws N(0, (init_scale / sqrt(fan_in))^2);
          uniform_pm1 draws U(-init_scale, init_scale)
    inverse_clip: clip peeled targets into the inverse activation's domain
    clip_warn_fraction: share of clipped elements in one target that flags the run
    """
    seed: int = 0
    init: str = NORMAL_SCALED
    init_scale: float = DEFAULT_INIT_SCALE
    pinv: PinvConfig = field(default_factory=PinvConfig)
    inverse_clip: bool = True
    clip_warn_fraction: float = 0.25

    def __post_init__(self):
        if self.init not in INIT_KINDS:
            raise ValueError(f"unknown init {self.init!r}, expected one of {INIT_KINDS}")
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be > 0, got {self.init_scale}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


@dataclass(frozen=True)
class PeeledTargets:
    """
    G_1 ... G_n; G_k is m x h_k and G_n is the training target Y.

    inverted[k-1] is f_k^-1 of the clipped G_k; clip_counts[k] counts the
    entries moved to do so.
    """
    targets: Tuple[np.ndarray, ...]
    inverted: Tuple[np.ndarray, ...]
    clip_counts: Dict[int, int] = field(default_factory=dict)

    def target(self, k: int) -> np.ndarray:
        return self.targets[k - 1]

    def inverse(self, k: int) -> np.ndarray:
        return self.inverted[k - 1]


@dataclass
class TrainReport:
    """What happened during one training run"""
    seed: int
    init: str
    init_scale: float
    pinv_mode: str
    widths: Tuple[int, ...]
    input_dim: int
    samples: int
    pinv_calls: int = 0
    clip_events: Dict[int, int] = field(default_factory=dict)
    clip_flagged: bool = False
    layer_residuals: Dict[int, float] = field(default_factory=dict)
    bias_rows_from_init: bool = True
    rng: str = RNG_NAME
    wall_time: float = 0.0

    @property
    def total_clip_events(self) -> int:
        return sum(self.clip_events.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "rng": self.rng,
            "init": self.init,
            "init_scale": self.init_scale,
            "pinv_mode": self.pinv_mode,
            "input_dim": self.input_dim,
            "widths": ",".join(str(h) for h in self.widths),
            "samples": self.samples,
            "pinv_calls": self.pinv_calls,
            "clip_events": self.total_clip_events,
            "clip_events_by_layer": ",".join(f"{k}:{v}" for k, v in sorted(self.clip_events.items())),
            "clip_flagged": self.clip_flagged,
            "layer_residuals": ",".join(f"{k}:{v!r}" for k, v in sorted(self.layer_residuals.items())),
            "bias_rows_from_init": self.bias_rows_from_init,
            "wall_time": round(self.wall_time, 6),
        }

    def to_record(self, include_timing: bool = True) -> str:
        """key = value lines, one per field"""
        entries = self.to_dict()
        if not include_timing:
            del entries["wall_time"]
        return "".join(f"{key} = {value}\n" for key, value in entries.items())


def init_weights(spec: NetworkSpec, cfg: TrainConfig) -> WeightStack:
    """
    Draw every W_k, bias rows included.

    W_1 is drawn too so the stack is always complete; training overwrites it.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    layers = []
    for rows, cols in spec.layer_shapes():
        fan_in = rows - 1
        if cfg.init == NORMAL_SCALED:
            W = rng.normal(0.0, cfg.init_scale / np.sqrt(fan_in), size=(rows, cols))
        else:
            W = rng.uniform(-cfg.init_scale, cfg.init_scale, size=(rows, cols))
        layers.append(W)
    return WeightStack(tuple(layers))


def _invert_target(spec: NetworkSpec, k: int, G: np.ndarray, cfg: TrainConfig) -> Tuple[np.ndarray, int]:
    a = spec.activation(k)
    clipped = 0
    if cfg.inverse_clip:
        G, clipped = clip_to_domain(a, G)
    return act_inv(a, G, clip=False, layer=k), clipped


def _pinv_counter(cfg: TrainConfig, pinv_fn: Optional[CountingPinv]) -> CountingPinv:
    return pinv_fn if pinv_fn is not None else CountingPinv(cfg.pinv)


def peel_targets(Y, W: WeightStack, spec: NetworkSpec, cfg: TrainConfig,
                 pinv_fn: Optional[CountingPinv] = None) -> PeeledTargets:
    """
    Derive the per-layer targets G_1 ... G_n from Y.

    Uses the bias rows and sans-bias blocks of W_2 ... W_n, one pseudo-inverse
    per layer. Every G_k is clipped and inverted here, once; back substitution
    reuses the inverses.

    Raises:
        DomainViolation: inverse_clip is off and some G_k leaves the range of f_k
    """
    pinv_fn = _pinv_counter(cfg, pinv_fn)
    G = as_matrix(Y, "Y")
    targets: List[np.ndarray] = [G]
    inverted: List[np.ndarray] = []
    clip_counts = {}
    for k in range(spec.n_layers, 0, -1):
        T, clip_counts[k] = _invert_target(spec, k, G, cfg)
        inverted.append(T)
        if k == 1:
            break
        G = (T - W.bias_row(k)) @ pinv_fn(W.sans_bias(k))
        if not np.isfinite(G).all():
            raise NonFiniteIntermediate(k - 1, "peeled target")
        targets.append(G)
    return PeeledTargets(tuple(reversed(targets)), tuple(reversed(inverted)), clip_counts)


def _back_substitute(X: AugmentedBatch, G: PeeledTargets, spec: NetworkSpec,
                     pinv_fn: CountingPinv):
    layers = []
    residuals = {}
    A = X.X_aug
    for k in range(1, spec.n_layers + 1):
        T = G.inverse(k)
        W_k = pinv_fn(A) @ T
        if not np.isfinite(W_k).all():
            raise NonFiniteIntermediate(k, "weight")
        layers.append(W_k)
        Z = A @ W_k
        residuals[k] = float(np.linalg.norm(Z - T))
        if k < spec.n_layers:
            if not np.isfinite(Z).all():
                raise NonFiniteIntermediate(k, "pre-activation")
            A = with_ones(act(spec.activation(k), Z))
    return WeightStack(tuple(layers)), residuals


def back_substitute(X: AugmentedBatch, Y, G: PeeledTargets, spec: NetworkSpec, cfg: TrainConfig,
                    pinv_fn: Optional[CountingPinv] = None) -> WeightStack:
    """
    Solve W_1 ... W_n front to back against the peeled targets.

    Y must be the target G was peeled from; it is used as G_n.
    """
    Y = as_matrix(Y, "Y")
    if Y.shape != G.target(spec.n_layers).shape or not np.array_equal(Y, G.target(spec.n_layers)):
        raise ShapeMismatch("Y does not match the peeled output target")
    W, _ = _back_substitute(X, G, spec, _pinv_counter(cfg, pinv_fn))
    return W


def _check_training_data(X_raw, Y, spec: NetworkSpec) -> Tuple[AugmentedBatch, np.ndarray]:
    X = augment(X_raw, force=True)
    Y = as_matrix(np.asarray(Y, dtype=np.float64).reshape(X.m, -1), "Y")
    if X.d != spec.input_dim:
        raise ShapeMismatch(f"data has {X.d} features, spec expects {spec.input_dim}")
    if Y.shape[1] != spec.output_dim:
        raise ShapeMismatch(f"targets have {Y.shape[1]} columns, spec output is {spec.output_dim}")
    return X, Y


def train(X_raw, Y, spec: NetworkSpec, cfg: Optional[TrainConfig] = None) -> Tuple[WeightStack, TrainReport]:
    """
    Train a network in one pass.

    Args:
        X_raw: m x d features (no bias column)
        Y: m x q targets inside (or clippable into) the range of f_n
        spec: network structure
        cfg: seed, initialisation and pseudo-inverse settings

    Returns:
        (trained WeightStack, TrainReport)
    """
    cfg = cfg or TrainConfig()
    started = time.perf_counter()
    X, Y = _check_training_data(X_raw, Y, spec)
    pinv_fn = CountingPinv(cfg.pinv)

    initial = init_weights(spec, cfg)
    peeled = peel_targets(Y, initial, spec, cfg, pinv_fn)
    W, residuals = _back_substitute(X, peeled, spec, pinv_fn)
    clip_counts = peeled.clip_counts

    report = TrainReport(
        seed=cfg.seed,
        init=cfg.init,
        init_scale=cfg.init_scale,
        pinv_mode=cfg.pinv.mode,
        widths=spec.widths,
        input_dim=spec.input_dim,
        samples=X.m,
        pinv_calls=pinv_fn.calls,
        clip_events=clip_counts,
        layer_residuals=residuals,
        wall_time=time.perf_counter() - started,
    )
    flagged = [k for k, count in clip_counts.items()
               if count > cfg.clip_warn_fraction * X.m * spec.widths[k - 1]]
    if flagged:
        report.clip_flagged = True
        logger.warning("Targets of layer(s) %s were heavily clipped into the activation domain",
                       ",".join(map(str, flagged)))
    logger.info("Trained %s net on %d samples: %d pseudo-inverses, %d clip events, %.3fs",
                "-".join(map(str, spec.widths)), X.m, report.pinv_calls,
                report.total_clip_events, report.wall_time)
    return W, report


class KarTrainer:
    """Trainer bound to one network structure and configuration"""

    def __init__(self, spec: NetworkSpec, cfg: Optional[TrainConfig] = None):
        self.spec = spec
        self.cfg = cfg or TrainConfig()
        self.weights: Optional[WeightStack] = None
        self.report: Optional[TrainReport] = None

    def fit(self, X_raw, Y) -> Tuple[WeightStack, TrainReport]:
        self.weights, self.report = train(X_raw, Y, self.spec, self.cfg)
        return self.weights, self.report

    def predict(self, X_raw) -> np.ndarray:
        if self.weights is None:
            raise RuntimeError("fit() must be called before predict()")
        return predict(self.spec, self.weights, X_raw)
