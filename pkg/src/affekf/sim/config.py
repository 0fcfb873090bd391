"""Plain-text run configuration files (key=value with section headers).

Sections and keys mirror the run-configuration fields:

    [env]    app, feature_count, steps, step_rotation, step_translation,
             visibility_radius, seed, height
    [noise]  sigma_w1, sigma_w2, sigma_v
    [run]    runs, seed, variants, init_mode, prior_sigma, out, jobs
"""
from __future__ import annotations

import configparser

from ..ekf_core import NoiseSpec
from ..slam.variants import VARIANT_NAMES
from .environment import APP_NAMES, EnvironmentSpec
from .runner import RunConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


_ENV_FIELDS = {
    "app": str,
    "feature_count": int,
    "steps": int,
    "step_rotation": float,
    "step_translation": float,
    "visibility_radius": float,
    "seed": int,
    "height": float,
}
_NOISE_FIELDS = {"sigma_w1": float, "sigma_w2": float, "sigma_v": float}
_RUN_FIELDS = {
    "runs": int,
    "seed": int,
    "variants": str,
    "init_mode": str,
    "prior_sigma": float,
    "out": str,
    "jobs": int,
}


def _section(parser, name, fields) -> dict:
    out = {}
    if not parser.has_section(name):
        return out
    for key, raw in parser.items(name):
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
        try:
            out[key] = fields[key](raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from exc
    return out


def parse_variants(raw: str) -> tuple:
    names = tuple(v.strip() for v in raw.split(",") if v.strip())
    if not names:
        raise ConfigError("variants: empty list")
    for v in names:
        if v not in VARIANT_NAMES:
            raise ConfigError(f"variants: unknown variant {v!r} (choose from {', '.join(VARIANT_NAMES)})")
    return names


def load_config(path: str, overrides: dict | None = None) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    if not read:
        raise ConfigError(f"config file not found: {path}")

    env_kw = _section(parser, "env", _ENV_FIELDS)
    if "app" in env_kw and env_kw["app"] not in APP_NAMES:
        raise ConfigError(f"env.app: unknown app {env_kw['app']!r} (choose from {', '.join(APP_NAMES)})")
    noise_kw = _section(parser, "noise", _NOISE_FIELDS)
    run_kw = _section(parser, "run", _RUN_FIELDS)

    overrides = overrides or {}
    for key in ("runs", "seed", "out", "variants", "jobs"):
        if overrides.get(key) is not None:
            run_kw[key] = overrides[key]

    variants = run_kw.get("variants", "std")
    variants = parse_variants(variants) if isinstance(variants, str) else tuple(variants)

    init_mode = run_kw.get("init_mode", "first_observation")
    if init_mode not in ("first_observation", "prior_map"):
        raise ConfigError(f"run.init_mode: unknown mode {init_mode!r}")

    try:
        env = EnvironmentSpec(**env_kw)
        noise = NoiseSpec(**{k: noise_kw.get(k, d) for k, d in
                             (("sigma_w1", 0.003), ("sigma_w2", 0.01), ("sigma_v", 0.1))})
        return RunConfig(
            env=env,
            noise=noise,
            variants=variants,
            runs=int(run_kw.get("runs", 50)),
            seed=int(run_kw.get("seed", 0)),
            init_mode=init_mode,
            prior_sigma=float(run_kw.get("prior_sigma", 0.5)),
            out_dir=run_kw.get("out"),
            jobs=int(run_kw.get("jobs", 1)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
