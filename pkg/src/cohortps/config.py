"""Experiment configuration: defaults, profiles, and file parsing.

Config files are plain-text INI (sections of key = value) or an equivalent
JSON object keyed by section. Every key has a default; unknown sections or
keys are errors that name the offending line.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass
from pathlib import Path

from .evaluation import VARIANT_LABELS, ExperimentGrid, standard_variants
from .learners import LearnerKind, LearnerSpec, default_library, derive_seed, reduced_library
from .losses import LossFunction, LossKind

_LOSS_NAMES = {
    "nll": LossKind.NEG_LOG_LIKELIHOOD,
    "neg_log_likelihood": LossKind.NEG_LOG_LIKELIHOOD,
    "squared": LossKind.SQUARED_ERROR,
    "squared_error": LossKind.SQUARED_ERROR,
}

_LEARNER_NAMES = {
    "logistic": (LearnerKind.LOGISTIC, {}),
    "lasso": (LearnerKind.LASSO, {}),
    "tree": (LearnerKind.TREE, {}),
    "forest": (LearnerKind.FOREST, {}),
    "nnet2": (LearnerKind.NEURAL_NET, {"hidden_size": 2}),
    "nnet3": (LearnerKind.NEURAL_NET, {"hidden_size": 3}),
    "nnet5": (LearnerKind.NEURAL_NET, {"hidden_size": 5}),
}

# section -> key -> (parser, default)
_SCHEMA = {
    "grid": {
        "n": ("int_list", (200, 1000)),
        "c": ("float_list", (1.0, 2.0)),
        "variants": ("str_list", VARIANT_LABELS),
        "replications": ("int", 100),
        "base_seed": ("int", 20260810),
    },
    "weights": {
        "w": ("float", 0.37),
        "w_error": ("float", 0.10),
    },
    "stacking": {
        "folds": ("int", 10),
        "loss": ("str", "nll"),
    },
    "library": {
        "learners": ("str_list", ("full",)),
        "forest_trees": ("int", 250),
    },
    "run": {
        "jobs": ("int", 0),  # 0 -> all available cores
        "evaluation_mode": ("str", "insample"),
    },
    "output": {
        "directory": ("str", "cohortps_out"),
    },
}


class ConfigError(ValueError):
    """Bad configuration; message carries file/line context when known."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything cmd_simulate needs, with documented defaults for every field."""

    n_list: tuple = _SCHEMA["grid"]["n"][1]
    C_list: tuple = _SCHEMA["grid"]["c"][1]
    variant_labels: tuple = tuple(VARIANT_LABELS)
    replications: int = _SCHEMA["grid"]["replications"][1]
    base_seed: int = _SCHEMA["grid"]["base_seed"][1]
    w: float = _SCHEMA["weights"]["w"][1]
    w_error: float = _SCHEMA["weights"]["w_error"][1]
    folds: int = _SCHEMA["stacking"]["folds"][1]
    loss_name: str = _SCHEMA["stacking"]["loss"][1]
    learners: tuple = _SCHEMA["library"]["learners"][1]
    forest_trees: int = _SCHEMA["library"]["forest_trees"][1]
    jobs: int = _SCHEMA["run"]["jobs"][1]
    evaluation_mode: str = _SCHEMA["run"]["evaluation_mode"][1]
    output_directory: str = _SCHEMA["output"]["directory"][1]

    def loss(self) -> LossFunction:
        if self.loss_name not in _LOSS_NAMES:
            raise ConfigError(
                f"unknown loss '{self.loss_name}' (choices: {sorted(_LOSS_NAMES)})"
            )
        return LossFunction(kind=_LOSS_NAMES[self.loss_name])

    def library(self) -> list[LearnerSpec]:
        return build_library(self.learners, self.base_seed, self.forest_trees)

    def grid(self) -> ExperimentGrid:
        variants = [
            v
            for v in standard_variants(self.w, self.w_error)
            if v.label in self.variant_labels
        ]
        missing = set(self.variant_labels) - {v.label for v in variants}
        if missing:
            raise ConfigError(f"unknown variants: {sorted(missing)}")
        return ExperimentGrid(
            n_list=self.n_list,
            C_list=self.C_list,
            variants=tuple(variants),
            replications=self.replications,
            base_seed=self.base_seed,
            library=tuple(self.library()),
            k=self.folds,
            loss=self.loss(),
            evaluation_mode=self.evaluation_mode,
        )

    def to_dict(self) -> dict:
        return {
            "grid": {
                "n": list(self.n_list),
                "c": list(self.C_list),
                "variants": list(self.variant_labels),
                "replications": self.replications,
                "base_seed": self.base_seed,
            },
            "weights": {"w": self.w, "w_error": self.w_error},
            "stacking": {"folds": self.folds, "loss": self.loss_name},
            "library": {
                "learners": list(self.learners),
                "forest_trees": self.forest_trees,
            },
            "run": {"jobs": self.jobs, "evaluation_mode": self.evaluation_mode},
            "output": {"directory": self.output_directory},
        }


def build_library(names, base_seed: int, forest_trees: int = 250) -> list[LearnerSpec]:
    """Resolve a library selection: 'full', 'reduced', or learner names."""
    names = [str(n).strip().lower() for n in names]
    if names == ["full"]:
        return default_library(seed=base_seed, forest_trees=forest_trees)
    if names == ["reduced"]:
        return reduced_library(seed=base_seed)
    specs = []
    for i, name in enumerate(names):
        if name not in _LEARNER_NAMES:
            raise ConfigError(
                f"unknown learner '{name}' (choices: full, reduced, {sorted(_LEARNER_NAMES)})"
            )
        kind, hp = _LEARNER_NAMES[name]
        if kind is LearnerKind.FOREST:
            hp = {**hp, "n_trees": forest_trees}
        specs.append(LearnerSpec(kind=kind, hyperparameters=hp, seed=derive_seed(base_seed, i)))
    if not specs:
        raise ConfigError("library selection is empty")
    return specs


def profile_config(name: str) -> ExperimentConfig:
    """Built-in profiles: 'desk' (R=100, n in {200,1000}) and 'paper'
    (R=500, n in {200,500,1000}); both sweep C in {1,2} with all variants."""
    if name == "desk":
        return ExperimentConfig(n_list=(200, 1000), C_list=(1.0, 2.0), replications=100)
    if name == "paper":
        return ExperimentConfig(
            n_list=(200, 500, 1000), C_list=(1.0, 2.0), replications=500
        )
    raise ConfigError(f"unknown profile '{name}' (choices: desk, paper)")


def _parse_value(kind: str, raw, where: str):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return str(raw).strip()
        items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
        items = [str(s).strip() for s in items if str(s).strip()]
        if kind == "int_list":
            return tuple(int(s) for s in items)
        if kind == "float_list":
            return tuple(float(s) for s in items)
        if kind == "str_list":
            return tuple(items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from exc
    raise ConfigError(f"{where}: unknown schema kind {kind}")


_FIELD_OF = {
    ("grid", "n"): "n_list",
    ("grid", "c"): "C_list",
    ("grid", "variants"): "variant_labels",
    ("grid", "replications"): "replications",
    ("grid", "base_seed"): "base_seed",
    ("weights", "w"): "w",
    ("weights", "w_error"): "w_error",
    ("stacking", "folds"): "folds",
    ("stacking", "loss"): "loss_name",
    ("library", "learners"): "learners",
    ("library", "forest_trees"): "forest_trees",
    ("run", "jobs"): "jobs",
    ("run", "evaluation_mode"): "evaluation_mode",
    ("output", "directory"): "output_directory",
}


def _line_of(text: str, needle: str) -> int | None:
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _config_from_sections(sections: dict, path, text: str) -> ExperimentConfig:
    values = {}
    for section, keys in sections.items():
        sec = section.strip().lower()
        if sec not in _SCHEMA:
            line = _line_of(text, section)
            raise ConfigError(
                f"{path}:{line or '?'}: unknown section [{section}] "
                f"(choices: {sorted(_SCHEMA)})"
            )
        for key, raw in keys.items():
            k = key.strip().lower()
            if k not in _SCHEMA[sec]:
                line = _line_of(text, key)
                raise ConfigError(
                    f"{path}:{line or '?'}: unknown key '{key}' in [{section}] "
                    f"(choices: {sorted(_SCHEMA[sec])})"
                )
            kind, _default = _SCHEMA[sec][k]
            values[_FIELD_OF[(sec, k)]] = _parse_value(kind, raw, f"{path} [{section}] {key}")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    """Load an INI or JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(payload, dict) or not all(
            isinstance(v, dict) for v in payload.values()
        ):
            raise ConfigError(f"{path}: JSON config must map sections to key/value objects")
        return _config_from_sections(payload, path, text)

    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return _config_from_sections(sections, path, text)
