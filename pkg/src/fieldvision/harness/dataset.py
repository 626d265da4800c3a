"""On-disk datasets: PPM image, PGM class mask and a one-line JSON record per frame, plus a manifest.

The carpet field mask used for boundary scoring is not stored; it follows
exactly from pose and chain (see ``Frame.field_mask``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..camera import ExtrinsicChain
from ..geometry import Pose2D, RigidTransform, parse_correction, serialize_correction
from ..imgproc.pnm import decode_pnm, encode_pnm
from ..synth import GroundTruth, carpet_mask

MANIFEST = "manifest.json"
FORMAT_VERSION = 1


class DatasetError(ValueError):
    pass


def frame_stem(i: int) -> str:
    return f"frame_{i:05d}"


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=None, separators=(",", ":"))


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write(path: Path, data: bytes) -> str:
    path.write_bytes(data)
    return _sha(data)


def frame_record(i: int, scene, gt: GroundTruth, extra: dict) -> dict:
    ch = scene.chain
    rec = {
        "frame": i,
        "pose": [gt.pose.x, gt.pose.y, gt.pose.theta],
        "chain": {
            "trunk_roll": ch.trunk_roll,
            "trunk_pitch": ch.trunk_pitch,
            "neck_pan": ch.neck_pan,
            "neck_tilt": ch.neck_tilt,
            "mount_height": float(ch.camera_mount.translation[2]),
            "correction": serialize_correction(ch.correction),
        },
        "ball": None if scene.ball is None else list(scene.ball),
        "blur": scene.blur,
        "occluders": len(scene.occluders),
        "landmarks": gt.landmarks,
    }
    rec.update(extra)
    return rec


def write_frame(root: Path, i: int, img: np.ndarray, gt: GroundTruth, record: dict) -> dict:
    stem = frame_stem(i)
    return {
        "id": i,
        "image": f"{stem}.ppm",
        "mask": f"{stem}_mask.pgm",
        "record": f"{stem}.gt.jsonl",
        "sha256": {
            "image": _write(root / f"{stem}.ppm", encode_pnm(img)),
            "mask": _write(root / f"{stem}_mask.pgm", encode_pnm(gt.mask.astype(np.uint8))),
            "record": _write(root / f"{stem}.gt.jsonl", (dumps(record) + "\n").encode()),
        },
    }


def write_manifest(root: Path, scenario: str, kind: str, config_hash: str, seed: int, frames: list[dict]) -> str:
    manifest = {
        "format": FORMAT_VERSION,
        "scenario": scenario,
        "kind": kind,
        "seed": seed,
        "config_hash": config_hash,
        "count": len(frames),
        "frames": frames,
    }
    text = json.dumps(manifest, sort_keys=True, indent=1) + "\n"
    (root / MANIFEST).write_text(text)
    return _sha(text.encode())


@dataclass
class Frame:
    id: int
    image_path: Path
    mask_path: Path
    record: dict

    def image(self) -> np.ndarray:
        return decode_pnm(self.image_path.read_bytes())

    def mask(self) -> np.ndarray:
        return decode_pnm(self.mask_path.read_bytes())

    def field_mask(self, cam, spec) -> np.ndarray:
        return carpet_mask(self.pose, chain_from_record(self.record), cam, spec)

    @property
    def pose(self) -> Pose2D:
        return Pose2D(*self.record["pose"])

    def landmarks(self, kind: str) -> list[dict]:
        return [lm for lm in self.record["landmarks"] if lm["kind"] == kind]


class Dataset:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        path = self.root / MANIFEST
        if not path.is_file():
            raise DatasetError(f"no dataset manifest at {path}")
        try:
            self.manifest = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise DatasetError(f"corrupt manifest {path}: {e}") from None
        if self.manifest.get("format") != FORMAT_VERSION:
            raise DatasetError(f"unsupported dataset format {self.manifest.get('format')!r}")

    def __len__(self) -> int:
        return len(self.manifest["frames"])

    @property
    def kind(self) -> str:
        return self.manifest["kind"]

    def frame(self, k: int) -> Frame:
        e = self.manifest["frames"][k]
        rec = json.loads((self.root / e["record"]).read_text())
        return Frame(e["id"], self.root / e["image"], self.root / e["mask"], rec)

    def __iter__(self):
        for k in range(len(self)):
            yield self.frame(k)


def chain_from_record(rec: dict, nominal: bool = False):
    """Rebuild the frame's kinematic chain; ``nominal`` drops the correction."""
    c = rec["chain"]
    ch = ExtrinsicChain(
        trunk_roll=c["trunk_roll"],
        trunk_pitch=c["trunk_pitch"],
        neck_pan=c["neck_pan"],
        neck_tilt=c["neck_tilt"],
        camera_mount=RigidTransform(translation=(0.0, 0.0, c["mount_height"])),
    )
    return ch if nominal else ch.with_correction(parse_correction(c["correction"]))
