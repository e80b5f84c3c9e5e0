"""Mask observations: per-frame binary instance masks and their ingestion."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MASK_NAME = re.compile(r"^(?P<frame>\d+)_(?P<instance>\d+)\.png$")


@dataclass(frozen=True)
class MaskKey:
    frame: int
    instance: int

    def as_tuple(self) -> tuple[int, int]:
        return (self.frame, self.instance)


@dataclass
class MaskObservation:
    key: MaskKey
    camera_id: int
    mask: np.ndarray  # (H, W) bool
    source: str = "ingested-detector"  # or "re-segmented"
    quality: float | None = None

    def check_camera(self, width: int, height: int) -> None:
        h, w = self.mask.shape
        if (w, h) != (width, height):
            raise ValueError(
                f"mask {self.key.as_tuple()} is {w}x{h}, camera expects {width}x{height}"
            )


def load_mask_png(path: str | Path) -> np.ndarray:
    from PIL import Image

    arr = np.asarray(Image.open(path).convert("L"))
    return arr >= 128


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    from PIL import Image

    Image.fromarray((mask.astype(np.uint8)) * 255).save(path)


def load_mask_dir(directory: str | Path) -> list[MaskObservation]:
    """Masks named <frame>_<instance>.png; frame id doubles as camera id."""
    out = []
    for path in sorted(Path(directory).glob("*.png")):
        m = MASK_NAME.match(path.name)
        if not m:
            continue
        key = MaskKey(int(m.group("frame")), int(m.group("instance")))
        out.append(MaskObservation(key, key.frame, load_mask_png(path)))
    return out


def decode_rle(counts: list[int], height: int, width: int) -> np.ndarray:
    """COCO-style column-major run-length: counts alternate 0-runs and 1-runs."""
    flat = np.zeros(height * width, bool)
    pos = 0
    val = False
    for run in counts:
        if val:
            flat[pos : pos + run] = True
        pos += run
        val = not val
    return flat.reshape(width, height).T


def encode_rle(mask: np.ndarray) -> list[int]:
    flat = mask.T.reshape(-1).astype(np.int8)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:  # counts must start with a zero-run
        runs = [0] + runs
    return [int(r) for r in runs]


def load_mask_json(path: str | Path) -> list[MaskObservation]:
    """JSON array of {frame, instance, height, width, counts} RLE records."""
    out = []
    for rec in json.loads(Path(path).read_text()):
        key = MaskKey(int(rec["frame"]), int(rec["instance"]))
        mask = decode_rle(rec["counts"], int(rec["height"]), int(rec["width"]))
        out.append(MaskObservation(key, key.frame, mask))
    return out


def apply_quality_hints(
    observations: list[MaskObservation], hints: list[dict], threshold: float
) -> list[MaskObservation]:
    """Attach ingested quality scores and drop observations below threshold."""
    scores = {(int(h["frame"]), int(h["instance"])): float(h["quality"]) for h in hints}
    kept = []
    for obs in observations:
        q = scores.get(obs.key.as_tuple())
        if q is not None:
            obs.quality = q
            if q < threshold:
                continue
        kept.append(obs)
    return kept
