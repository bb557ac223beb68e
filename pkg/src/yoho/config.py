"""Run configuration: one nested schema shared by the CLI, service and tests."""
from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from yoho.eunet import NetworkConfig
from yoho.losses import LossWeights
from yoho.render import RenderConfig
from yoho.train_infer import TrainConfig


@dataclass(frozen=True)
class InferConfig:
    threshold: float = 0.5
    roi_gating: bool = True


@dataclass(frozen=True)
class RunConfig:
    render: RenderConfig = field(default_factory=RenderConfig)
    net: NetworkConfig = field(default_factory=NetworkConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    infer: InferConfig = field(default_factory=InferConfig)
    run_id: str = "run"
    output_root: str = "runs"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(
            self,
            render=dataclasses.replace(self.render, rng_seed=seed),
            train=dataclasses.replace(self.train, rng_seed=seed),
        )


# Profile overlays; "full" is the production-scale default schedule.
PROFILES: dict[str, dict] = {
    "full": {},
    "smoke": {
        "render": {"k": 32, "seeds_per_sample": 4, "out_size": [64, 64]},
        "net": {"encoder": "small", "base_width": 8},
        "train": {"phase1_steps": 20, "phase2_steps": 20, "batch_size": 8, "checkpoint_every": 10},
    },
    "phantom": {
        "render": {"k": 400, "out_size": [128, 128], "seed_scale_range": [0.55, 1.0]},
        "net": {"encoder": "small", "base_width": 12},
        "train": {"phase1_steps": 300, "phase2_steps": 300, "batch_size": 8},
    },
}

_TUPLE_FIELDS = {"seed_scale_range", "pastes_per_image_range", "out_size", "betas"}


def _build(cls, data: dict, path: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ValueError(f"{path}: unknown config key(s) {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, value in data.items():
        if name in _TUPLE_FIELDS and isinstance(value, (list, tuple)):
            value = tuple(value)
        kwargs[name] = value
    return cls(**kwargs)


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def config_from_dict(doc: dict) -> RunConfig:
    """Strict construction: every unknown key is an error."""
    sections = {"render": RenderConfig, "net": NetworkConfig, "loss": LossWeights,
                "train": TrainConfig, "infer": InferConfig}
    unknown = set(doc) - set(sections) - {"run_id", "output_root"}
    if unknown:
        raise ValueError(f"unknown config key(s) {sorted(unknown)}")
    kwargs: dict[str, Any] = {}
    for name, cls in sections.items():
        kwargs[name] = _build(cls, doc.get(name, {}), name)
    if "run_id" in doc:
        kwargs["run_id"] = str(doc["run_id"])
    if "output_root" in doc:
        kwargs["output_root"] = str(doc["output_root"])
    return RunConfig(**kwargs)


def load_config(
    path: str | os.PathLike | None = None,
    profile: str = "full",
    overrides: dict | None = None,
) -> RunConfig:
    """defaults <- profile overlay <- config file <- explicit overrides."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile '{profile}' (have {sorted(PROFILES)})")
    doc = dict(PROFILES[profile])
    if path is not None:
        file_doc = json.loads(Path(path).read_text())
        if not isinstance(file_doc, dict):
            raise ValueError("config file must contain a JSON object")
        doc = _deep_merge(doc, file_doc)
    if overrides:
        doc = _deep_merge(doc, overrides)
    return config_from_dict(doc)
