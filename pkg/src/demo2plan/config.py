"""Pipeline configuration: a flat dataclass loaded from YAML/JSON with a stable digest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

GRASP_TAXONOMY = ("power", "precision", "lateral", "hook")
QUANTIZERS = ("d26", "d6")


@dataclass(frozen=True)
class PipelineConfig:
    # clip segmentation / grounding
    clip_length_s: float = 2.0
    direction_window: int = 10
    rdp_epsilon: float = 0.02
    quantizer: str = "d26"
    posture_window: int = 5
    default_grasp_type: str = "power"
    # inter-anchor arc-length shares for PickUp / Put; MoveHand-like steps split the rest
    pickup_arc_share: float = 0.10
    put_arc_share: float = 0.10
    min_rotation_radius: float = 1e-3
    # model endpoint
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model_id: str = "gpt-4-vision-preview"
    temperature: float = 0.0  # sampling settings are not fixed by the method; pinned for replayability
    token_budget: int = 16000
    chars_per_token: int = 4
    image_token_cost: int = 512
    max_image_edge: int = 768
    frame_sample_count: int = 5
    retry_attempts: int = 3
    retry_backoff_s: float = 1.0
    # evaluation
    strict_tokens: bool = False
    length_normalizer: str = "max"  # "max" or "sum"

    def __post_init__(self) -> None:
        if self.quantizer not in QUANTIZERS:
            raise ValueError(f"unknown quantizer {self.quantizer!r}; expected one of {QUANTIZERS}")
        if self.length_normalizer not in ("max", "sum"):
            raise ValueError(f"length_normalizer must be 'max' or 'sum', got {self.length_normalizer!r}")
        if self.clip_length_s <= 0:
            raise ValueError("clip_length_s must be positive")
        if self.token_budget <= 0:
            raise ValueError("token_budget must be positive")

    def digest(self) -> str:
        """Stable content hash of the configuration, embedded in compiled documents."""
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"config file {path} must hold a mapping")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)
