"""Flat ``key=value`` run configuration.

Blank lines and ``#`` comments are ignored. Omitted keys take the defaults
below, which mirror the reference experiment (30 close-open iterations,
2 rules, alpha=0.9, beta=0.001, gamma=0.5, 600 training / 93 test records).
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable

from .dataset import Dataset, gen_synthetic, load_csv, split
from .engine import CouplingParams, NfisRegulator, RegulatorSpec, RstRegulator, StubRegulator
from .sweep import SweepSpec, parse_axis

__all__ = ["ConfigError", "RunConfig", "parse_config", "emit_config", "emit_defaults", "load_config"]


class ConfigError(ValueError):
    pass


SYNTHETIC_KEYS = ("n", "dim", "noise", "data_seed")


@dataclass(frozen=True)
class RunConfig:
    data: str = ""
    n: int = 693
    dim: int = 3
    noise: float = 0.05
    data_seed: int = 7
    n_train: int = 600
    n_test: int = 93
    split_seed: int = 1

    alpha: float = 0.9
    beta: float = 0.001
    gamma: float = 0.5
    law: str = "linear"
    n0: float = 100.0
    n_min: int = 4
    n_max: int = 400
    iterations: int = 30
    som_epochs: int = 20

    regulator: str = "nfis"
    n_rules: int = 2
    max_rules: int = 3
    train_iterations: int = 10
    step: float = 0.01
    scales: tuple[int, ...] = (3,)
    decision_scale: int = 3  # 0 = follow the step's attribute scale
    min_support: int = 1
    stub_error: float = 10.0
    stub_noise: float = 0.0

    axis1: str = ""
    axis2: str = ""
    repetitions: int = 1
    burn_in: int = 10

    seed: int = 0
    out: str = "runs"

    # ------------------------------------------------------------------ builders

    def dataset(self) -> Dataset:
        if self.data:
            return load_csv(self.data)
        return gen_synthetic(self.n, self.dim, self.noise, self.data_seed)

    def split_data(self) -> tuple[Dataset, Dataset]:
        return split(self.dataset(), self.n_train, self.n_test, self.split_seed)

    def coupling(self) -> CouplingParams:
        return CouplingParams(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            law=self.law,
            n0=self.n0,
            n_min=self.n_min,
            n_max=self.n_max,
            iterations=self.iterations,
        )

    def regulator_spec(self) -> RegulatorSpec:
        if self.regulator == "nfis":
            return NfisRegulator(self.n_rules, self.max_rules, self.train_iterations, self.step)
        if self.regulator == "rst":
            return RstRegulator(self.scales, self.decision_scale or None, self.min_support)
        return StubRegulator(self.stub_error, self.stub_noise)

    def sweep_spec(self) -> SweepSpec | None:
        if not self.axis1:
            if self.axis2:
                raise ConfigError("axis2 given without axis1")
            return None
        return SweepSpec(
            self.coupling(),
            self.regulator_spec(),
            parse_axis(self.axis1),
            parse_axis(self.axis2) if self.axis2 else None,
            self.repetitions,
            self.seed,
            self.som_epochs,
        )


def _int(v: str) -> int:
    return int(v)


def _scales(v: str) -> tuple[int, ...]:
    return tuple(int(s) for s in v.split(",") if s.strip())


def _str(v: str) -> str:
    return v


_PARSERS: dict[str, Callable[[str], Any]] = {}
_CHECKS: dict[str, tuple[Callable[[Any], bool], str]] = {
    "n": (lambda v: v >= 1, ">= 1"),
    "dim": (lambda v: v >= 1, ">= 1"),
    "noise": (lambda v: v >= 0, ">= 0"),
    "n_train": (lambda v: v >= 1, ">= 1"),
    "n_test": (lambda v: v >= 1, ">= 1"),
    "law": (lambda v: v in ("linear", "power"), "linear or power"),
    "n0": (lambda v: v > 0, "> 0"),
    "n_min": (lambda v: v >= 4, ">= 4"),
    "iterations": (lambda v: v >= 1, ">= 1"),
    "som_epochs": (lambda v: v >= 1, ">= 1"),
    "regulator": (lambda v: v in ("nfis", "rst", "stub"), "nfis, rst or stub"),
    "n_rules": (lambda v: v >= 1, ">= 1"),
    "max_rules": (lambda v: v >= 1, ">= 1"),
    "train_iterations": (lambda v: v >= 1, ">= 1"),
    "step": (lambda v: v > 0, "> 0"),
    "scales": (lambda v: len(v) > 0 and all(s >= 1 for s in v), "a non-empty list of counts >= 1"),
    "decision_scale": (lambda v: v >= 0, ">= 0 (0 follows the attribute scale)"),
    "min_support": (lambda v: v >= 1, ">= 1"),
    "stub_error": (lambda v: v >= 0, ">= 0"),
    "stub_noise": (lambda v: v >= 0, ">= 0"),
    "repetitions": (lambda v: v >= 1, ">= 1"),
    "burn_in": (lambda v: v >= 0, ">= 0"),
    "seed": (lambda v: v >= 0, ">= 0"),
    "data_seed": (lambda v: v >= 0, ">= 0"),
    "split_seed": (lambda v: v >= 0, ">= 0"),
}

for _f in fields(RunConfig):
    if _f.name == "scales":
        _PARSERS[_f.name] = _scales
    elif _f.type in ("int", int):
        _PARSERS[_f.name] = _int
    elif _f.type in ("float", float):
        _PARSERS[_f.name] = float
    else:
        _PARSERS[_f.name] = _str


def _pairs(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        yield lineno, key, value.strip()


def parse_config(text: str) -> RunConfig:
    values: dict[str, Any] = {}
    for lineno, key, value in _pairs(text):
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key!r}") from None
    return _validate(values)


def _validate(values: dict[str, Any]) -> RunConfig:
    for key, v in values.items():
        check = _CHECKS.get(key)
        if check and not check[0](v):
            raise ConfigError(f"{key}={v!r} out of range: must be {check[1]}")
    if values.get("data"):
        clash = [k for k in SYNTHETIC_KEYS if k in values]
        if clash:
            raise ConfigError(
                f"conflicting dataset sources: data={values['data']!r} and synthetic keys {', '.join(clash)}"
            )
    cfg = replace(RunConfig(), **values)
    _cross_check(cfg)
    return cfg


def _cross_check(cfg: RunConfig) -> None:
    if cfg.n_max < cfg.n_min:
        raise ConfigError(f"n_max={cfg.n_max} out of range: must be >= n_min={cfg.n_min}")
    if cfg.n_rules > cfg.max_rules:
        raise ConfigError(f"n_rules={cfg.n_rules} out of range: must be <= max_rules={cfg.max_rules}")
    if not cfg.data and cfg.n_train + cfg.n_test > cfg.n:
        raise ConfigError(f"n_train + n_test = {cfg.n_train + cfg.n_test} exceeds n={cfg.n}")
    for key in ("axis1", "axis2"):
        text = getattr(cfg, key)
        if text:
            try:
                parse_axis(text)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
    try:
        cfg.coupling()
        cfg.regulator_spec()
        cfg.sweep_spec()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _format(key: str, v: Any) -> str:
    if key == "scales":
        return ",".join(str(s) for s in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    """Render every key; synthetic-data keys are omitted when ``data`` is set."""
    lines = []
    for f in fields(RunConfig):
        if cfg.data and f.name in SYNTHETIC_KEYS:
            continue
        lines.append(f"{f.name}={_format(f.name, getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def emit_defaults() -> str:
    return emit_config(RunConfig())


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    values = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    values.update({k: v for k, v in overrides.items() if v is not None})
    if values.get("data"):
        for k in SYNTHETIC_KEYS:
            values.pop(k, None)
    return _validate(values)
