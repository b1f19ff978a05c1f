"""Run configuration: a plain INI file with one section per data entry.

Example::

    [run]
    models = avg,avgarima,moddshw
    seed = 42
    output_dir = out

    [series:substation7]
    format = long
    path = data/substation7.csv
    dataset = local
    timezone = UTC

    [series:zone1]
    format = gefcom
    load_path = data/Load_history.csv
    temp_path = data/temperature_history.csv
    zone = 1
    station = 1
    dataset = gefcom
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from stlf.errors import ConfigError

VALID_MODELS = ("avg", "avgarima", "origdshw", "moddshw", "narxrf")
VALID_FORMATS = ("long", "gefcom")


@dataclass(frozen=True)
class DataEntry:
    series_id: str
    dataset: str
    format: str
    path: Path | None = None  # long format
    load_path: Path | None = None  # gefcom format
    temp_path: Path | None = None
    zone: str = ""
    station: str = ""
    timezone: str = "UTC"


@dataclass(frozen=True)
class RunConfig:
    entries: tuple[DataEntry, ...]
    models: tuple[str, ...]
    seed: int = 0
    output_dir: Path = Path("out")
    jobs: int = 1
    train_months: int = 3
    n_trees: int = 500
    max_gap: int = 6
    fit_on_demand: bool = True
    meta: dict = field(default_factory=dict)


def _get(section, key, default=None, required=False):
    if key in section:
        return section[key].strip()
    if required:
        raise ConfigError(f"[{section.name}] is missing required key {key!r}")
    return default


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "run" not in parser:
        raise ConfigError(f"{path}: missing [run] section")
    run = parser["run"]

    models = tuple(m.strip() for m in _get(run, "models", required=True).split(",") if m.strip())
    if not models:
        raise ConfigError("models list is empty")
    for m in models:
        if m not in VALID_MODELS:
            raise ConfigError(f"unknown model {m!r}; valid: {', '.join(VALID_MODELS)}")

    entries = []
    for name in parser.sections():
        if not name.startswith("series:"):
            continue
        sec = parser[name]
        series_id = name.split(":", 1)[1].strip()
        if not series_id:
            raise ConfigError(f"[{name}]: empty series id")
        fmt = _get(sec, "format", required=True)
        if fmt not in VALID_FORMATS:
            raise ConfigError(f"[{name}]: unknown format {fmt!r}")
        dataset = _get(sec, "dataset", default="default")
        if fmt == "long":
            p = Path(_get(sec, "path", required=True))
            if not p.exists():
                raise ConfigError(f"[{name}]: path {p} does not exist")
            entries.append(DataEntry(series_id, dataset, fmt, path=p,
                                     timezone=_get(sec, "timezone", default="UTC")))
        else:
            lp = Path(_get(sec, "load_path", required=True))
            tp = Path(_get(sec, "temp_path", required=True))
            for p in (lp, tp):
                if not p.exists():
                    raise ConfigError(f"[{name}]: path {p} does not exist")
            entries.append(DataEntry(
                series_id, dataset, fmt, load_path=lp, temp_path=tp,
                zone=_get(sec, "zone", required=True),
                station=_get(sec, "station", required=True),
            ))
    if not entries:
        raise ConfigError(f"{path}: no [series:<id>] sections")

    try:
        seed = int(_get(run, "seed", default="0"))
        jobs = int(_get(run, "jobs", default="1"))
        train_months = int(_get(run, "train_months", default="3"))
        n_trees = int(_get(run, "n_trees", default="500"))
        max_gap = int(_get(run, "max_gap", default="6"))
    except ValueError as exc:
        raise ConfigError(f"bad integer in [run]: {exc}") from exc
    fit_on_demand = _get(run, "fit_on_demand", default="true").lower() in ("1", "true", "yes")

    return RunConfig(
        entries=tuple(entries),
        models=models,
        seed=seed,
        output_dir=Path(_get(run, "output_dir", default="out")),
        jobs=max(1, jobs),
        train_months=train_months,
        n_trees=n_trees,
        max_gap=max_gap,
        fit_on_demand=fit_on_demand,
    )
