"""Pipeline configuration: one TOML file drives every stage.

Every knob has a default, so an empty file (or no file) yields a fully
working simulate -> evaluate run. All randomness flows from the single
top-level `rng_seed`: each stage's own seed is derived from it by name
unless the file pins that stage seed explicitly. The effective (fully
resolved) config can be serialized back to TOML; loading that output
reproduces the exact same configuration, derived seeds included.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .augment import AugmentConfig, AugmentMethod
from .classify import GbdtConfig
from .cograph import CoocConfig
from .embed import SkipGramConfig, WalkConfig
from .errors import ValidationError
from .evaluate import (
    ABLATIONS,
    DEFAULT_SIGNIFICANCE,
    DEFAULT_THRESHOLD,
    EvalSettings,
)
from .featurize import FeatureConfig
from .model import SemesterCalendar
from .regularity import RegularityConfig
from .seeds import derive_seed
from .synthgen import SynthConfig

DEFAULT_CALENDAR_START = date(2024, 9, 2)  # a Monday
DEFAULT_WEEK_COUNT = 13
DEFAULT_N_FOLDS = 5
DEFAULT_N_REPEATS = 10


@dataclass(frozen=True)
class PathsConfig:
    output_dir: str = "starpredict-out"
    events: str = ""
    labels: str = ""

    def __post_init__(self):
        if not self.output_dir:
            raise ValidationError("paths.output_dir must be non-empty")
        if not self.events:
            object.__setattr__(
                self, "events", str(Path(self.output_dir) / "events.csv")
            )
        if not self.labels:
            object.__setattr__(
                self, "labels", str(Path(self.output_dir) / "labels.csv")
            )


@dataclass(frozen=True)
class EvalParams:
    n_folds: int = DEFAULT_N_FOLDS
    n_repeats: int = DEFAULT_N_REPEATS
    threshold: float = DEFAULT_THRESHOLD
    significance: float = DEFAULT_SIGNIFICANCE
    ablations: tuple[str, ...] = tuple(ABLATIONS)
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_folds < 2:
            raise ValidationError("evaluate.n_folds must be >= 2")
        if self.n_repeats < 1:
            raise ValidationError("evaluate.n_repeats must be >= 1")
        if not self.ablations:
            raise ValidationError("evaluate.ablations must be non-empty")
        for name in self.ablations:
            if name not in ABLATIONS:
                raise ValidationError(
                    f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}"
                )


@dataclass(frozen=True)
class PipelineConfig:
    rng_seed: int = 0
    paths: PathsConfig = PathsConfig()
    calendar: SemesterCalendar = SemesterCalendar.from_weeks(
        DEFAULT_CALENDAR_START, DEFAULT_WEEK_COUNT
    )
    regularity: RegularityConfig = RegularityConfig()
    cooc: CoocConfig = CoocConfig()
    walks: WalkConfig = WalkConfig()
    skipgram: SkipGramConfig = SkipGramConfig()
    augment: AugmentConfig = AugmentConfig()
    gbdt: GbdtConfig = GbdtConfig()
    evaluate: EvalParams = EvalParams()
    synth: SynthConfig = SynthConfig()

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            regularity=self.regularity,
            cooc=self.cooc,
            walks=self.walks,
            skipgram=self.skipgram,
        )

    def eval_settings(self) -> EvalSettings:
        return EvalSettings(
            features=self.feature_config(),
            augment=self.augment,
            gbdt=self.gbdt,
            threshold=self.evaluate.threshold,
            significance=self.evaluate.significance,
        )


# seed-carrying stages and the names their sub-seeds derive from
_SEED_STAGES = {
    "walks": "walks",
    "skipgram": "sgns",
    "augment": "augment",
    "gbdt": "gbdt",
    "evaluate": "folds",
    "synth": "synth",
}

_SECTION_TYPES = {
    "paths": PathsConfig,
    "regularity": RegularityConfig,
    "cooc": CoocConfig,
    "walks": WalkConfig,
    "skipgram": SkipGramConfig,
    "augment": AugmentConfig,
    "gbdt": GbdtConfig,
    "evaluate": EvalParams,
    "synth": SynthConfig,
}

_CALENDAR_KEYS = ("start", "weeks", "timezone")


def _coerce(section: str, key: str, value, target_type):
    if target_type is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if target_type is AugmentMethod:
        if not isinstance(value, str):
            raise ValidationError(f"{section}.{key} must be a string")
        try:
            return AugmentMethod(value)
        except ValueError:
            choices = sorted(m.value for m in AugmentMethod)
            raise ValidationError(
                f"{section}.{key}: unknown method {value!r}; choose from {choices}"
            ) from None
    return value


def _build_section(section: str, cls, table: dict, global_seed: int):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in table.items():
        if key not in fields:
            raise ValidationError(f"unknown config key '{section}.{key}'")
        ftype = fields[key].type
        target = {"float": float, "float | None": float}.get(ftype, None)
        if target is float:
            value = _coerce(section, key, value, float)
        elif fields[key].name == "method" and section == "augment":
            value = _coerce(section, key, value, AugmentMethod)
        elif key == "ablations":
            if not isinstance(value, list) or not all(
                isinstance(v, str) for v in value
            ):
                raise ValidationError("evaluate.ablations must be a list of strings")
            value = tuple(value)
        kwargs[key] = value
    stage = _SEED_STAGES.get(section)
    if stage is not None and "rng_seed" not in kwargs:
        kwargs["rng_seed"] = derive_seed(stage, global_seed)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad [{section}] section: {exc}") from None


def _build_calendar(table: dict) -> SemesterCalendar:
    for key in table:
        if key not in _CALENDAR_KEYS:
            raise ValidationError(f"unknown config key 'calendar.{key}'")
    start = table.get("start", DEFAULT_CALENDAR_START)
    if not isinstance(start, date):
        raise ValidationError("calendar.start must be a TOML date (YYYY-MM-DD)")
    weeks = table.get("weeks", DEFAULT_WEEK_COUNT)
    tz = table.get("timezone", "UTC")
    return SemesterCalendar.from_weeks(start, weeks, timezone=tz)


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a fully resolved PipelineConfig from parsed TOML data.
    Unknown keys are rejected, missing ones take defaults, and absent
    stage seeds are derived from the global rng_seed."""
    known_top = {"rng_seed", "calendar"} | set(_SECTION_TYPES)
    for key in data:
        if key not in known_top:
            raise ValidationError(f"unknown config key '{key}'")
    global_seed = data.get("rng_seed", 0)
    if not isinstance(global_seed, int) or isinstance(global_seed, bool):
        raise ValidationError("rng_seed must be an integer")
    sections = {}
    for name, cls in _SECTION_TYPES.items():
        table = data.get(name, {})
        if not isinstance(table, dict):
            raise ValidationError(f"[{name}] must be a table")
        sections[name] = _build_section(name, cls, table, global_seed)
    calendar = _build_calendar(data.get("calendar", {}))
    return PipelineConfig(
        rng_seed=global_seed,
        paths=sections["paths"],
        calendar=calendar,
        regularity=sections["regularity"],
        cooc=sections["cooc"],
        walks=sections["walks"],
        skipgram=sections["skipgram"],
        augment=sections["augment"],
        gbdt=sections["gbdt"],
        evaluate=sections["evaluate"],
        synth=sections["synth"],
    )


def load_config(path=None) -> PipelineConfig:
    """Read a TOML config file; `None` means all defaults (seed 0)."""
    if path is None:
        return config_from_dict({})
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: invalid TOML: {exc}") from None
    return config_from_dict(data)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, AugmentMethod):
        return _fmt(value.value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r} to TOML")


def to_toml(cfg: PipelineConfig) -> str:
    """Serialize the effective config. Every field is written explicitly,
    so a reload reproduces the run exactly (derived seeds included)."""
    out = [f"rng_seed = {cfg.rng_seed}", ""]
    out += [
        "[calendar]",
        f"start = {cfg.calendar.start.isoformat()}",
        f"weeks = {cfg.calendar.week_count}",
        f"timezone = {_fmt(cfg.calendar.timezone)}",
        "",
    ]
    for name in _SECTION_TYPES:
        section = {
            "paths": cfg.paths,
            "regularity": cfg.regularity,
            "cooc": cfg.cooc,
            "walks": cfg.walks,
            "skipgram": cfg.skipgram,
            "augment": cfg.augment,
            "gbdt": cfg.gbdt,
            "evaluate": cfg.evaluate,
            "synth": cfg.synth,
        }[name]
        out.append(f"[{name}]")
        for f in dataclasses.fields(type(section)):
            value = getattr(section, f.name)
            if value is None:
                continue  # optional field left at its in-code default
            out.append(f"{f.name} = {_fmt(value)}")
        out.append("")
    return "\n".join(out)


def write_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_toml(cfg))
