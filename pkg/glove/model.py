"""Network definitions, checkpoints and eval-mode prediction."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, ClassVar, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .container import CHECKPOINT_MAGIC, Container, fingerprint, read_container, write_container
from .errors import FingerprintMismatch, ShapeMismatch
from .labels import N_CHANNELS, N_CLASSES, ClassLabel
from .nnkit import (
    AdaptiveAvgPool1d,
    BatchNorm1d,
    Conv1d,
    Dropout,
    LayerNorm,
    Linear,
    MaxPool1d,
    Module,
    ReLU,
    Sequential,
    Tensor,
    concat,
    no_grad,
)
from .nnkit.functional import softmax
from .utils import counter_rng

logger = logging.getLogger(__name__)

MIN_FRAMES = 4


@dataclass(frozen=True)
class BranchSpec:
    in_channels: int = 12
    conv1_channels: int = 64
    conv2_channels: int = 128
    kernel_size: int = 3
    pool: int = 2


@dataclass(frozen=True)
class FusionSpec:
    hidden: Tuple[int, ...] = (512, 256)
    dropout: Tuple[float, ...] = (0.5, 0.4)
    n_classes: int = N_CLASSES


@dataclass(frozen=True)
class SimpleNNSpec:
    input_dim: int
    hidden: Tuple[int, ...] = (128, 64, 32)
    dropout: Tuple[float, ...] = (0.5, 0.3, 0.2)
    n_classes: int = N_CLASSES


class Network(Module):
    """A classifier that can describe itself well enough to be rebuilt from a checkpoint."""

    kind: ClassVar[str] = ""

    def describe(self) -> Dict[str, Any]:
        raise NotImplementedError

    def spec_string(self) -> str:
        return f"{self.kind}:" + ";".join(
            f"{name}={value}" for name, value in sorted(self.describe().items()) if name != "kind"
        ) + ";" + repr(self)

    def fingerprint(self) -> bytes:
        return fingerprint(self.spec_string())

    def check_input(self, x: np.ndarray) -> None:
        raise NotImplementedError

    def reseed_dropout(self, seed: int) -> None:
        for i, module in enumerate(m for m in self.modules() if isinstance(m, Dropout)):
            module.reseed(counter_rng(seed, 1, i))


class Branch(Module):
    """Conv -> BN -> ReLU -> MaxPool -> Conv -> BN -> ReLU -> global average, for one sensor."""

    def __init__(self, spec: BranchSpec, rng: np.random.Generator):
        super().__init__()
        self.conv1 = Conv1d(spec.in_channels, spec.conv1_channels, spec.kernel_size, rng)
        self.bn1 = BatchNorm1d(spec.conv1_channels)
        self.pool = MaxPool1d(spec.pool)
        self.conv2 = Conv1d(spec.conv1_channels, spec.conv2_channels, spec.kernel_size, rng)
        self.bn2 = BatchNorm1d(spec.conv2_channels)
        self.gap = AdaptiveAvgPool1d(1)

    def forward(self, x: Tensor) -> Tensor:
        h = self.pool(self.bn1(self.conv1(x)).relu())
        h = self.gap(self.bn2(self.conv2(h)).relu())
        return h.reshape(h.shape[0], h.shape[1])

    def __repr__(self) -> str:
        parts = (self.conv1, self.bn1, "ReLU", self.pool, self.conv2, self.bn2, "ReLU", self.gap)
        return "Branch(" + ",".join(str(p) if isinstance(p, str) else repr(p) for p in parts) + ")"


def _dense_stack(
    sizes: Tuple[int, ...],
    dropout: Tuple[float, ...],
    rng: np.random.Generator,
    norm: str,
) -> Sequential:
    layers: List[Module] = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        layers.append(Linear(fan_in, fan_out, rng))
        if i == len(sizes) - 2:
            break
        layers.append(LayerNorm(fan_out) if norm == "layer" else BatchNorm1d(fan_out))
        layers.append(ReLU())
        layers.append(Dropout(dropout[i], rng))
    return Sequential(*layers)


class MultiBranchNet(Network):
    """Five per-sensor convolutional branches fused by a dense head.

    Input is (B, 5, frames, coeffs); each sensor slice is transposed so the
    MFCC coefficients are conv channels and frames are the convolved length.
    """

    kind = "multibranch"

    def __init__(
        self,
        branch: BranchSpec = BranchSpec(),
        fusion: FusionSpec = FusionSpec(),
        n_sensors: int = N_CHANNELS,
        seed: int = 0,
    ):
        super().__init__()
        rng = counter_rng(seed, 0)
        self.branch_spec = branch
        self.fusion_spec = fusion
        self.n_sensors = n_sensors
        self.branches: List[Branch] = []
        for i in range(n_sensors):
            module = Branch(branch, rng)
            setattr(self, f"branch{i}", module)
            self.branches.append(module)
        sizes = (n_sensors * branch.conv2_channels, *fusion.hidden, fusion.n_classes)
        self.head = _dense_stack(sizes, fusion.dropout, rng, norm="layer")
        self.last_branch_outputs: List[np.ndarray] = []
        self.reseed_dropout(seed)

    def describe(self) -> Dict[str, Any]:
        fusion = asdict(self.fusion_spec)
        fusion.update(hidden=list(self.fusion_spec.hidden), dropout=list(self.fusion_spec.dropout))
        return {
            "kind": self.kind,
            "n_sensors": self.n_sensors,
            "branch": asdict(self.branch_spec),
            "fusion": fusion,
        }

    def check_input(self, x: np.ndarray) -> None:
        expected = f"(B, {self.n_sensors}, >={MIN_FRAMES}, {self.branch_spec.in_channels})"
        if x.ndim != 4 or x.shape[1] != self.n_sensors or x.shape[3] != self.branch_spec.in_channels:
            raise ShapeMismatch("multibranch input", expected, x.shape)
        if x.shape[2] < MIN_FRAMES:
            raise ShapeMismatch("multibranch input frames", expected, x.shape)

    def forward(self, x: Tensor) -> Tensor:
        x = Tensor._wrap(x)
        self.check_input(x.data)
        embeddings = [branch(x[:, i].transpose(0, 2, 1)) for i, branch in enumerate(self.branches)]
        self.last_branch_outputs = [e.data.copy() for e in embeddings]
        return self.head(concat(embeddings, axis=1))

    def __repr__(self) -> str:
        return f"MultiBranchNet({self.n_sensors}x{self.branches[0]!r},head={self.head!r})"


class SimpleNN(Network):
    """Dense baseline on flattened raw windows: hidden layers with BN, ReLU and dropout."""

    kind = "simplenn"

    def __init__(self, spec: SimpleNNSpec, seed: int = 0):
        super().__init__()
        rng = counter_rng(seed, 0)
        self.spec = spec
        sizes = (spec.input_dim, *spec.hidden, spec.n_classes)
        self.body = _dense_stack(sizes, spec.dropout, rng, norm="batch")
        self.reseed_dropout(seed)

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "input_dim": self.spec.input_dim,
            "hidden": list(self.spec.hidden),
            "dropout": list(self.spec.dropout),
            "n_classes": self.spec.n_classes,
        }

    def check_input(self, x: np.ndarray) -> None:
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ShapeMismatch("simplenn input", f"(B, {self.spec.input_dim})", x.shape)

    def forward(self, x: Tensor) -> Tensor:
        x = Tensor._wrap(x)
        self.check_input(x.data)
        return self.body(x)

    def __repr__(self) -> str:
        return f"SimpleNN({self.body!r})"


def build_model(description: Mapping[str, Any], seed: int = 0) -> Network:
    kind = description.get("kind")
    if kind == MultiBranchNet.kind:
        fusion = dict(description.get("fusion", {}))
        fusion_spec = FusionSpec(
            hidden=tuple(fusion.get("hidden", FusionSpec.hidden)),
            dropout=tuple(fusion.get("dropout", FusionSpec.dropout)),
            n_classes=int(fusion.get("n_classes", N_CLASSES)),
        )
        return MultiBranchNet(
            branch=BranchSpec(**description.get("branch", {})),
            fusion=fusion_spec,
            n_sensors=int(description.get("n_sensors", N_CHANNELS)),
            seed=seed,
        )
    if kind == SimpleNN.kind:
        spec = SimpleNNSpec(
            input_dim=int(description["input_dim"]),
            hidden=tuple(description.get("hidden", (128, 64, 32))),
            dropout=tuple(description.get("dropout", (0.5, 0.3, 0.2))),
            n_classes=int(description.get("n_classes", N_CLASSES)),
        )
        return SimpleNN(spec, seed=seed)
    raise ShapeMismatch("architecture kind", "multibranch or simplenn", kind)


def multibranch_param_count(
    branch: BranchSpec = BranchSpec(),
    fusion: FusionSpec = FusionSpec(),
    n_sensors: int = N_CHANNELS,
) -> int:
    """Closed-form parameter total: conv weights and biases, BN/LN affine pairs, dense layers."""
    k = branch.kernel_size
    per_branch = (
        branch.conv1_channels * branch.in_channels * k + branch.conv1_channels
        + 2 * branch.conv1_channels
        + branch.conv2_channels * branch.conv1_channels * k + branch.conv2_channels
        + 2 * branch.conv2_channels
    )
    sizes = (n_sensors * branch.conv2_channels, *fusion.hidden, fusion.n_classes)
    dense = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    norms = sum(2 * h for h in fusion.hidden)
    return n_sensors * per_branch + dense + norms


@dataclass
class Checkpoint:
    """Trained weights plus the architecture description needed to rebuild the network."""

    architecture: Dict[str, Any]
    fingerprint: bytes
    state: Dict[str, np.ndarray]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: Network, **metadata: Any) -> "Checkpoint":
        return cls(
            architecture=model.describe(),
            fingerprint=model.fingerprint(),
            state=model.state_dict(),
            metadata=dict(metadata),
        )

    def to_model(self) -> Network:
        model = build_model(self.architecture)
        if model.fingerprint() != self.fingerprint:
            raise FingerprintMismatch(
                f"checkpoint fingerprint {self.fingerprint.hex()[:12]} does not match "
                f"rebuilt {model.kind} architecture {model.fingerprint().hex()[:12]}"
            )
        model.load_state_dict(self.state)
        model.eval()
        return model

    def save(self, path: Path | str) -> Path:
        container = Container(
            magic=CHECKPOINT_MAGIC,
            fingerprint=self.fingerprint,
            tensors=self.state,
            metadata={"architecture": self.architecture, **self.metadata},
        )
        path = write_container(path, container)
        logger.info("saved %s checkpoint to %s", self.architecture.get("kind"), path)
        return path

    @classmethod
    def load(cls, path: Path | str) -> "Checkpoint":
        container = read_container(path, CHECKPOINT_MAGIC)
        metadata = dict(container.metadata)
        architecture = metadata.pop("architecture", None)
        if architecture is None:
            raise FingerprintMismatch(f"{path}: checkpoint carries no architecture description")
        return cls(
            architecture=architecture,
            fingerprint=container.fingerprint,
            state=container.tensors,
            metadata=metadata,
        )


def predict_proba(model: Network, batch: np.ndarray) -> np.ndarray:
    """Eval-mode softmax probabilities for a batch; leaves the model in eval mode."""
    model.eval()
    with no_grad():
        return softmax(model(Tensor(batch)), axis=1).data


def predict_batch(
    checkpoint: Checkpoint | Network,
    batch: np.ndarray,
    expected_fingerprint: Optional[bytes] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Class indices and probabilities for every row of ``batch``."""
    model = checkpoint.to_model() if isinstance(checkpoint, Checkpoint) else checkpoint
    if expected_fingerprint is not None and model.fingerprint() != expected_fingerprint:
        raise FingerprintMismatch("model architecture differs from the expected one")
    batch = np.asarray(batch, dtype=np.float64)
    if len(batch) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, N_CLASSES))
    probs = predict_proba(model, batch)
    return probs.argmax(axis=1), probs


def predict(
    checkpoint: Checkpoint | Network,
    x: np.ndarray,
    expected_fingerprint: Optional[bytes] = None,
) -> Tuple[ClassLabel, np.ndarray]:
    """Label and class probabilities for a single unbatched input."""
    indices, probs = predict_batch(checkpoint, np.asarray(x)[None], expected_fingerprint)
    return ClassLabel.from_index(int(indices[0])), probs[0]


__all__ = [
    "MIN_FRAMES",
    "BranchSpec",
    "FusionSpec",
    "SimpleNNSpec",
    "Network",
    "Branch",
    "MultiBranchNet",
    "SimpleNN",
    "build_model",
    "multibranch_param_count",
    "Checkpoint",
    "predict_proba",
    "predict_batch",
    "predict",
]
