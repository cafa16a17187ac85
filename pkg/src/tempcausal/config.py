"""Run configuration: one JSON document with named hyperparameter profiles and flat overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .datasets import SERIES_COUNT, GeneratorSpec
from .detector import DetectorConfig
from .model import ModelConfig
from .trainer import TrainConfig

SECTIONS = ("data", "model", "train", "detector")

# Hyperparameter sets; "model" and "detector" entries override component defaults.
PROFILES: dict[str, dict] = {
    "synthetic-dense": {
        "model": {"d": 256, "d_qk": 256, "h": 4, "d_ffn": 256, "T": 16, "tau": 1.0,
                  "lambda_k": 1e-4, "lambda_m": 1e-4},
        "detector": {"n": 2, "m": 1},
    },
    "synthetic-sparse": {
        "model": {"d": 256, "d_qk": 256, "h": 4, "d_ffn": 256, "T": 16, "tau": 100.0,
                  "lambda_k": 1e-10, "lambda_m": 1e-10},
        "detector": {"n": 2, "m": 1},
    },
    "lorenz": {
        "model": {"d": 512, "d_qk": 512, "h": 8, "d_ffn": 512, "T": 32, "tau": 10.0,
                  "lambda_k": 5e-4, "lambda_m": 5e-4},
        "detector": {"n": 3, "m": 2},
    },
    "fmri": {
        "model": {"d": 256, "d_qk": 256, "h": 4, "d_ffn": 512, "T": 32, "tau": 100.0,
                  "lambda_k": 0.0, "lambda_m": 0.0},
        "detector": {"n": 2, "m": 1},
    },
}

DEFAULT_PROFILE = {
    "diamond": "synthetic-dense",
    "mediator": "synthetic-dense",
    "v-structure": "synthetic-sparse",
    "fork": "synthetic-sparse",
    "lorenz96": "lorenz",
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


def _field_names(cls) -> set[str]:
    return {f.name for f in fields(cls)}


@dataclass
class DataSection:
    """Either a generator spec or CSV paths (``csv`` and optional ``truth``)."""

    name: str | None = None
    csv: str | None = None
    truth: str | None = None
    generator: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "DataSection":
        d = dict(d)
        own = {k: d.pop(k) for k in ("name", "csv", "truth") if k in d}
        return cls(**own, generator=d)

    def spec(self, seed: int | None = None) -> GeneratorSpec:
        g = dict(self.generator)
        if seed is not None:
            g["seed"] = seed
        return GeneratorSpec(**g)

    def label(self) -> str:
        if self.name:
            return self.name
        if self.csv:
            return Path(self.csv).stem
        return self.generator.get("structure", "fork")

    def problems(self) -> list[str]:
        out = []
        if self.csv is not None:
            if self.generator:
                out.append(f"data: csv input cannot be combined with generator keys {sorted(self.generator)}")
            if not Path(self.csv).is_file():
                out.append(f"data.csv: file not found: {self.csv}")
            if self.truth is not None and not Path(self.truth).is_file():
                out.append(f"data.truth: file not found: {self.truth}")
            return out
        unknown = set(self.generator) - _field_names(GeneratorSpec)
        if unknown:
            return [f"data: unknown keys {sorted(unknown)}"]
        return self.spec().problems()

    def series_count(self) -> int | None:
        if self.csv is not None:
            return None
        s = self.spec()
        return s.n_vars if s.structure == "lorenz96" else SERIES_COUNT.get(s.structure)

    def to_dict(self) -> dict:
        d = {k: v for k, v in (("name", self.name), ("csv", self.csv), ("truth", self.truth)) if v is not None}
        d.update(self.generator)
        return d


@dataclass
class RunConfig:
    profile: str | None
    data: DataSection
    model: dict
    train: dict
    detector: dict
    output: str = "runs"
    seeds: list[int] = field(default_factory=lambda: [0])
    datasets: list[DataSection] = field(default_factory=list)    # bench rows; empty means [data]

    # -- construction --------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = copy.deepcopy(doc)
        known = {"profile", "output", "seeds", "datasets", *SECTIONS}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError([f"unknown top-level keys: {sorted(unknown)}"])
        return cls(
            profile=doc.get("profile"),
            data=DataSection.from_dict(doc.get("data", {})),
            model=doc.get("model", {}),
            train=doc.get("train", {}),
            detector=doc.get("detector", {}),
            output=doc.get("output", "runs"),
            seeds=[int(s) for s in doc.get("seeds", [0])],
            datasets=[DataSection.from_dict(d) for d in doc.get("datasets", [])],
        )

    @classmethod
    def load(cls, path, overrides: list[str] | None = None) -> "RunConfig":
        doc = json.loads(Path(path).read_text()) if path else {}
        return cls.from_dict(apply_overrides(doc, overrides or []))

    def to_dict(self) -> dict:
        doc = {"profile": self.profile, "data": self.data.to_dict(), "model": self.model,
               "train": self.train, "detector": self.detector, "output": self.output, "seeds": self.seeds}
        if self.datasets:
            doc["datasets"] = [d.to_dict() for d in self.datasets]
        return doc

    # -- resolution ----------------------------------------------------------

    def profile_for(self, data: DataSection) -> str | None:
        if self.profile is not None:
            return self.profile
        if data.csv is None:
            return DEFAULT_PROFILE.get(data.generator.get("structure", "fork"))
        return None

    def model_config(self, N: int, data: DataSection | None = None) -> ModelConfig:
        base = dict(PROFILES.get(self.profile_for(data or self.data), {}).get("model", {}))
        base.update(self.model)
        base["N"] = N
        return ModelConfig.from_dict(base)

    def train_config(self, seed: int | None = None) -> TrainConfig:
        d = dict(self.train)
        if seed is not None:
            d["seed"] = seed
        return TrainConfig.from_dict(d)

    def detector_config(self, data: DataSection | None = None) -> DetectorConfig:
        base = dict(PROFILES.get(self.profile_for(data or self.data), {}).get("detector", {}))
        base.update(self.detector)
        return DetectorConfig.from_dict(base)

    def problems(self) -> list[str]:
        """Every violation across all sections, not only the first."""
        out = []
        if self.profile is not None and self.profile not in PROFILES:
            out.append(f"unknown profile {self.profile!r}; valid options: {', '.join(PROFILES)}")
        if not self.seeds:
            out.append("seeds must list at least one seed")
        for name, d, cls in (("model", self.model, ModelConfig), ("train", self.train, TrainConfig),
                             ("detector", self.detector, DetectorConfig)):
            unknown = set(d) - _field_names(cls) - ({"N"} if cls is ModelConfig else set())
            if unknown:
                out.append(f"{name}: unknown keys {sorted(unknown)}")
        if "N" in self.model:
            out.append("model.N is taken from the data and cannot be set")
        sections_ok = not out
        for data in self.datasets or [self.data]:
            out.extend(data.problems())
            if not sections_ok:
                continue
            N = data.series_count() or 2
            try:
                out.extend(self.model_config(N, data).problems())
                out.extend(self.detector_config(data).problems())
            except (TypeError, ValueError) as exc:
                out.append(str(exc))
        try:
            out.extend(self.train_config().problems())
        except (TypeError, ValueError) as exc:
            out.append(str(exc))
        return list(dict.fromkeys(out))

    def validate(self) -> "RunConfig":
        errs = self.problems()
        if errs:
            raise ConfigError(errs)
        return self


def parse_value(text: str):
    """JSON literal when possible (numbers, true/false/null, lists), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``section.key=value`` (or ``key=value`` at top level) assignments to a config document."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        item = item[2:] if item.startswith("--") else item
        if "=" not in item:
            raise ConfigError([f"override {item!r} is not of the form section.key=value"])
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError([f"override {path!r} descends into a non-object"])
        node[keys[-1]] = parse_value(raw)
    return doc
