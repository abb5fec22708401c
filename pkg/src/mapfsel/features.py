"""Seven-channel image features, normalisation, rescaling and augmentation.

Channel order (index 0..6):

    1 obstacle  2 start  3 goal  4 canonical-path visits
    5 shortest-path pair conflicts  6 shortest/1-suboptimal pair conflicts
    7 all-shortest-path visits
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .grid import Scenario
from .paths import heatmap_all_shortest_visits, heatmap_canonical_visits, heatmap_pairwise_conflicts

NUM_CHANNELS = 7
CHANNEL_NAMES = (
    "obstacle",
    "start",
    "goal",
    "canonical_path_visits",
    "shortest_pair_conflicts",
    "suboptimal_pair_conflicts",
    "all_shortest_visits",
)
# value an obstacle takes in each channel after normalisation; used for padding and erasing
PAD_VALUES = np.array([100.0, 0.0, 0.0, 200.0, 0.0, 0.0, 200.0])
OBSTACLE_HEATMAP = 200.0
DEFAULT_TARGET = 384
DEFAULT_RESCALE = "ppprrrp"
RESCALE_GROUPS = ((0, 1, 2), (3,), (4, 5), (6,))


class RescaleError(ValueError):
    pass


@dataclass
class FeatureTensor:
    channels: np.ndarray  # (7, H, W)
    normalized: bool = False
    obstacle: np.ndarray | None = None  # (H, W) mask at native resolution

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]


@dataclass(frozen=True)
class RescaleSpec:
    methods: str
    target: int = DEFAULT_TARGET

    def __post_init__(self):
        methods = self.methods.replace(" ", "").lower()
        if len(methods) != NUM_CHANNELS or set(methods) - {"p", "r"}:
            raise ValueError(f"rescale spec needs 7 'p'/'r' characters, got {self.methods!r}")
        if self.target < 1:
            raise ValueError("rescale target must be >= 1")
        object.__setattr__(self, "methods", methods)

    @classmethod
    def parse(cls, text: str, target: int = DEFAULT_TARGET) -> "RescaleSpec":
        return cls(text, target)

    @property
    def pad_channels(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.methods) if m == "p")

    @property
    def interp_channels(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.methods) if m == "r")

    def __str__(self) -> str:
        return self.methods


def expand_group_specs() -> list[str]:
    """All 16 specs that switch channels in the groups (1,2,3), (4), (5,6), (7)."""
    import itertools

    specs = []
    for choice in itertools.product("pr", repeat=len(RESCALE_GROUPS)):
        chars = [""] * NUM_CHANNELS
        for m, group in zip(choice, RESCALE_GROUPS):
            for ch in group:
                chars[ch] = m
        specs.append("".join(chars))
    return specs


# ---------------------------------------------------------------------------
# assembly / normalisation


def assemble(scenario: Scenario) -> FeatureTensor:
    grid = scenario.grid
    chans = np.zeros((NUM_CHANNELS, *grid.shape), dtype=np.float64)
    chans[0] = grid.blocked
    for agent in scenario.agents:
        chans[1][agent.start] = 1.0
        chans[2][agent.goal] = 1.0
    chans[3] = heatmap_canonical_visits(scenario)
    chans[4] = heatmap_pairwise_conflicts(scenario, include_suboptimal=False)
    chans[5] = heatmap_pairwise_conflicts(scenario, include_suboptimal=True)
    chans[6] = heatmap_all_shortest_visits(scenario)
    return FeatureTensor(chans, normalized=False, obstacle=grid.blocked.copy())


@dataclass
class NormalizationStats:
    maxima: list[float] = field(default_factory=lambda: [0.0] * NUM_CHANNELS)

    def to_dict(self) -> dict:
        return {"maxima": [float(m) for m in self.maxima]}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls([float(m) for m in d["maxima"]])


def _channel_max(t: FeatureTensor, ch: int) -> float:
    plane = t.channels[ch]
    if ch == 0:
        return float(plane.max())
    free = ~t.obstacle
    return float(plane[free].max()) if free.any() else 0.0


def fit_stats(tensors: Iterable[FeatureTensor]) -> NormalizationStats:
    """Dataset-wide per-channel maxima over non-obstacle cells (channel 1 over all cells)."""
    stats = NormalizationStats()
    seen = False
    for t in tensors:
        seen = True
        for ch in range(NUM_CHANNELS):
            stats.maxima[ch] = max(stats.maxima[ch], _channel_max(t, ch))
    if not seen:
        raise ValueError("fit_stats needs at least one tensor")
    return stats


def apply_stats(t: FeatureTensor, stats: NormalizationStats) -> FeatureTensor:
    out = t.channels.copy()
    for ch in range(NUM_CHANNELS):
        m = stats.maxima[ch]
        if m > 0:
            out[ch] = out[ch] / m * 100.0
    obst = t.obstacle
    out[0] = np.where(obst, 100.0, 0.0)
    for ch in (1, 2, 4, 5):
        out[ch][obst] = 0.0
    for ch in (3, 6):
        out[ch][obst] = OBSTACLE_HEATMAP
    return FeatureTensor(out, normalized=True, obstacle=obst)


# ---------------------------------------------------------------------------
# rescaling


def pad_offsets(height: int, width: int, target: int) -> tuple[int, int]:
    return (target - height) // 2, (target - width) // 2


def rescale(t: FeatureTensor, spec: RescaleSpec) -> np.ndarray:
    """Return a ``(7, target, target)`` array."""
    target = spec.target
    h, w = t.height, t.width
    if spec.pad_channels and (h > target or w > target):
        raise RescaleError(f"map {h}x{w} exceeds rescale target {target}; use a larger target")
    out = np.empty((NUM_CHANNELS, target, target), dtype=np.float64)
    top, left = pad_offsets(h, w, target) if spec.pad_channels else (0, 0)
    for ch in range(NUM_CHANNELS):
        plane = t.channels[ch]
        if spec.methods[ch] == "p":
            out[ch] = PAD_VALUES[ch]
            out[ch, top:top + h, left:left + w] = plane
        else:
            out[ch] = _bilinear(plane, target)
    return out


def crop(rescaled: np.ndarray, height: int, width: int) -> np.ndarray:
    top, left = pad_offsets(height, width, rescaled.shape[-1])
    return rescaled[..., top:top + height, left:left + width]


def _bilinear(plane: np.ndarray, target: int) -> np.ndarray:
    h, w = plane.shape
    if (h, w) == (target, target):
        return plane.copy()
    # half-pixel aligned bilinear resize with edge clamping
    return ndimage.zoom(plane, (target / h, target / w), order=1, mode="nearest", grid_mode=True)


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentDecision:
    flip: bool = False
    rotations: int = 0
    erase: tuple[int, int, int, int] | None = None  # top, left, height, width


def sample_augment(side: int, rng: np.random.Generator, p: float = 0.5) -> AugmentDecision:
    flip = bool(rng.random() < p)
    rotations = int(rng.integers(1, 4)) if rng.random() < p else 0
    erase = None
    if rng.random() < p:
        area = side * side
        for _ in range(10):
            frac = rng.uniform(0.02, 0.2)
            log_ratio = rng.uniform(np.log(0.3), np.log(3.3))
            ratio = float(np.exp(log_ratio))
            eh = int(round(np.sqrt(frac * area * ratio)))
            ew = int(round(np.sqrt(frac * area / ratio)))
            if 0 < eh <= side and 0 < ew <= side:
                top = int(rng.integers(0, side - eh + 1))
                left = int(rng.integers(0, side - ew + 1))
                erase = (top, left, eh, ew)
                break
    return AugmentDecision(flip, rotations, erase)


def apply_augment(x: np.ndarray, d: AugmentDecision) -> np.ndarray:
    if x.shape[-1] != x.shape[-2]:
        raise ValueError("augmentation expects square tensors")
    out = x
    if d.flip:
        out = out[..., ::-1]
    if d.rotations:
        out = np.rot90(out, k=d.rotations, axes=(-2, -1))
    # never write into the caller's array
    out = np.array(out, copy=True, order="C")
    if d.erase is not None:
        top, left, eh, ew = d.erase
        out[:, top:top + eh, left:left + ew] = PAD_VALUES[:, None, None]
    return out


def augment(x: np.ndarray, rng: np.random.Generator, p: float = 0.5) -> np.ndarray:
    """Random horizontal flip, 90-degree rotation and erasing, each with probability ``p``."""
    return apply_augment(x, sample_augment(x.shape[-1], rng, p))


# ---------------------------------------------------------------------------
# export


def write_tensor(path: Path, x: np.ndarray) -> None:
    np.ascontiguousarray(x, dtype="<f4").tofile(path)


def read_tensor(path: Path, side: int) -> np.ndarray:
    return np.fromfile(path, dtype="<f4").reshape(NUM_CHANNELS, side, side)


def write_manifest(path: Path, *, name: str, spec: RescaleSpec, stats: NormalizationStats,
                   entries: Sequence[dict], label_files: Sequence[str] = (), extra: dict | None = None) -> None:
    manifest = {
        "dataset": name,
        "channels": list(CHANNEL_NAMES),
        "dtype": "float32 little-endian",
        "shape": [NUM_CHANNELS, spec.target, spec.target],
        "rescale": spec.methods,
        "normalization": stats.to_dict(),
        "labels": list(label_files),
        "entries": list(entries),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=False) + "\n")
