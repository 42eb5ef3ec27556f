"""Study configuration files and run manifests.

Two input shapes are accepted by the CLI: a flat key/value text file
(``key = value`` lines, arrays comma- or space-separated, ``#`` comments)
and a previously emitted JSON manifest. A manifest inlines everything the
run needs -- design, scenarios, seed, backend -- so any output artifact is
regenerable from its manifest alone.
"""

import json
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import DesignConfig
from .quadrature import backend_name
from .scenarios import ScenarioSpec, make_scenario, scenario_library
from .simulate import StudyConfig


class ConfigError(Exception):
    """Unusable configuration content (bad keys, bad values, bad files)."""


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}

DESIGN_KEYS = {
    "doses": ("num_doses", int),
    "target": ("target", float),
    "window": ("window", float),
    "n": ("sample_size", int),
    "phi": ("phi", float),
    "start_dose": ("start_dose", int),
    "prior_sd": ("prior_sd", float),
    "halfwidth": ("halfwidth", float),
    "nu": ("prior_mtd", int),
    "accrual_interval": ("accrual_interval", float),
}

STUDY_KEYS = {"strategies", "phis", "replicates", "seed", "round_to_week",
              "scenarios", "scenario_files", "workers"}


def parse_flat(text: str) -> dict:
    """Parse ``key = value`` lines into a raw string mapping."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value.strip()
    return out


def _as_list(value: str) -> list:
    parts = [p for chunk in value.split(",") for p in chunk.split()]
    return [p.strip() for p in parts if p.strip()]


def _as_bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def load_scenario_file(path: Path, target: float) -> ScenarioSpec:
    """Scenario file: flat text with keys label, tox_probs, prog_probs."""
    try:
        raw = parse_flat(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
    missing = {"tox_probs", "prog_probs"} - raw.keys()
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")
    try:
        tox = [float(x) for x in _as_list(raw["tox_probs"])]
        prog = [float(x) for x in _as_list(raw["prog_probs"])]
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    label = raw.get("label", path.stem)
    try:
        return make_scenario(tox, prog, target, label=label)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _resolve_scenarios(raw: dict, target: float, base_dir: Path) -> tuple:
    specs = []
    selector = raw.get("scenarios", "all")
    if selector:
        library = {s.label: s for s in scenario_library(target)}
        names = _as_list(selector)
        if names == ["all"]:
            specs.extend(library.values())
        else:
            for name in names:
                if name not in library:
                    raise ConfigError(f"unknown scenario label {name!r}")
                specs.append(library[name])
    for rel in _as_list(raw.get("scenario_files", "")):
        specs.append(load_scenario_file(base_dir / rel, target))
    if not specs:
        raise ConfigError("no scenarios selected")
    return tuple(specs)


def study_from_flat(raw: dict, base_dir: Path) -> StudyConfig:
    unknown = set(raw) - set(DESIGN_KEYS) - STUDY_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    design_kwargs = {}
    for key, (field_name, cast) in DESIGN_KEYS.items():
        if key in raw:
            try:
                design_kwargs[field_name] = cast(raw[key])
            except ValueError:
                raise ConfigError(f"{key} must be {cast.__name__}") from None
    try:
        design = DesignConfig(**{**_DEFAULT_DESIGN, **design_kwargs})
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        phis = tuple(float(p) for p in _as_list(raw.get("phis", ""))) or (design.phi,)
        replicates = int(raw.get("replicates", 1000))
        seed = int(raw.get("seed", 20170816))
        workers = int(raw["workers"]) if "workers" in raw else None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    strategies = tuple(_as_list(raw.get("strategies", "A B C"))) or ("A", "B", "C")
    for s in strategies:
        if s not in ("A", "B", "C"):
            raise ConfigError(f"unknown strategy {s!r}")
    try:
        return StudyConfig(
            design=design,
            scenarios=_resolve_scenarios(raw, design.target, base_dir),
            strategies=strategies,
            phis=phis,
            replicates=replicates,
            base_seed=seed,
            round_to_week=_as_bool(raw.get("round_to_week", "true"), "round_to_week"),
            workers=workers,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


_DEFAULT_DESIGN = dict(
    num_doses=5, target=0.25, window=8.0, sample_size=24, phi=0.5,
    start_dose=1, prior_sd=DesignConfig.__dataclass_fields__["prior_sd"].default,
    halfwidth=0.10, prior_mtd=3, accrual_interval=4.0,
)


def build_manifest(config: StudyConfig, artifacts: dict) -> dict:
    return {
        "tool": "titeprog",
        "version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "backend": backend_name(),
        "seed": config.base_seed,
        "study": {
            "design": asdict(config.design),
            "strategies": [s.value for s in config.strategies],
            "phis": list(config.phis),
            "replicates": config.replicates,
            "round_to_week": config.round_to_week,
            "scenarios": [
                {
                    "label": s.label,
                    "tox_label": s.tox_label,
                    "prog_label": s.prog_label,
                    "tox_probs": list(s.tox_probs),
                    "prog_probs": list(s.prog_probs),
                    "true_mtd": s.true_mtd,
                }
                for s in config.scenarios
            ],
        },
        "artifacts": artifacts,
    }


def study_from_manifest(manifest: dict) -> StudyConfig:
    try:
        study = manifest["study"]
        design = DesignConfig(**study["design"])
        scenarios = tuple(
            ScenarioSpec(
                label=s["label"],
                tox_label=s.get("tox_label", s["label"]),
                prog_label=s.get("prog_label", s["label"]),
                tox_probs=tuple(s["tox_probs"]),
                prog_probs=tuple(s["prog_probs"]),
                true_mtd=int(s["true_mtd"]),
            )
            for s in study["scenarios"]
        )
        return StudyConfig(
            design=design,
            scenarios=scenarios,
            strategies=tuple(study["strategies"]),
            phis=tuple(study["phis"]),
            replicates=int(study["replicates"]),
            base_seed=int(manifest["seed"]),
            round_to_week=bool(study["round_to_week"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad manifest: {exc}") from None


def load_study(path: Path) -> StudyConfig:
    """Load a study from a flat config file or a JSON manifest."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return study_from_manifest(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad manifest JSON: {exc}") from None
    return study_from_flat(parse_flat(text), path.parent)
