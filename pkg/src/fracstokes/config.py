"""INI-style run configuration with line-numbered validation errors.

Sections and keys (all optional unless a command needs them)::

    [grid]      ndim, points, half_width
    [time]      t_end, steps
    [equation]  alpha, beta, coefficient, sigma, rho, p,
                coefficient1, sigma1, rho1, coefficient2, sigma2, rho2, q
    [initial]   amplitude, width, center, file, v_amplitude, v_width, v_file
    [solver]    picard_tol, max_iters, blowup_threshold, nonneg_clamp, window
    [sweep]     p_min, p_max, p_step, amplitudes, horizon, steps, width,
                blowup_factor, budget_s, seed, noise, refine_width
    [output]    dir, formats, checkpoint_every, timing
"""

from __future__ import annotations

import configparser
import math
import re
from pathlib import Path
from typing import Callable

import numpy as np

from .fractional_oracle import TimeGrid
from .fujita import SweepConfig
from .semilinear_solver import SolveConfig, SourceSpec
from .spectral_grid import GridSpec

FORMATS = ("frdf", "csv", "json", "jsonl")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file line when known."""


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_.-]+)\s*[=:]")


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = configparser.DEFAULTSECT
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            index[(section, "")] = lineno
            continue
        m = _KEY_RE.match(line)
        if m:
            index[(section, m.group(1).strip().lower())] = lineno
    return index


class RunConfig:
    """Parsed configuration with typed, validated accessors."""

    def __init__(self, text: str, source: str = "<config>", base_dir: Path | None = None) -> None:
        self.source = source
        self.base_dir = base_dir or Path.cwd()
        self._parser = configparser.ConfigParser(interpolation=None)
        try:
            self._parser.read_string(text, source=source)
        except configparser.Error as exc:
            lineno = getattr(exc, "lineno", None)
            where = f"{source}:{lineno}: " if lineno else f"{source}: "
            raise ConfigError(where + str(exc).splitlines()[0]) from exc
        self._lines = _line_index(text)

    @classmethod
    def from_path(cls, path: str | Path) -> RunConfig:
        path = Path(path)
        return cls(path.read_text(encoding="utf-8"), source=str(path), base_dir=path.parent)

    # -- raw access -------------------------------------------------------

    def where(self, section: str, key: str = "") -> str:
        lineno = self._lines.get((section, key)) or self._lines.get((section, ""))
        return f"{self.source}:{lineno}" if lineno else self.source

    def error(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(f"{self.where(section, key)}: [{section}] {key}: {message}")

    def has(self, section: str, key: str) -> bool:
        return self._parser.has_option(section, key)

    def has_section(self, section: str) -> bool:
        return self._parser.has_section(section)

    def raw(self, section: str, key: str) -> str:
        if not self.has(section, key):
            raise ConfigError(f"{self.where(section)}: missing key '{key}' in section [{section}]")
        return self._parser.get(section, key).strip()

    def _typed(self, section, key, default, conv: Callable, check: Callable | None, what: str):
        if not self.has(section, key):
            if default is _REQUIRED:
                self.raw(section, key)
            return default
        text = self.raw(section, key)
        try:
            value = conv(text)
        except (TypeError, ValueError) as exc:
            raise self.error(section, key, f"cannot parse {text!r} as {what}") from exc
        if check is not None and not check(value):
            raise self.error(section, key, f"value {text!r} violates {what}")
        return value

    def get_float(self, section, key, default=None, check=None, what="a finite number"):
        def conv(s):
            v = float(s)
            if not math.isfinite(v):
                raise ValueError(s)
            return v

        return self._typed(section, key, default, conv, check, what)

    def get_int(self, section, key, default=None, check=None, what="an integer"):
        return self._typed(section, key, default, int, check, what)

    def get_bool(self, section, key, default=None):
        def conv(s):
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)

        return self._typed(section, key, default, conv, None, "a boolean")

    def get_floats(self, section, key, default=None, check=None, what="a comma-separated list of numbers"):
        def conv(s):
            vals = tuple(float(v) for v in s.replace(";", ",").split(",") if v.strip())
            if not vals or not all(math.isfinite(v) for v in vals):
                raise ValueError(s)
            return vals

        return self._typed(section, key, default, conv, check, what)

    # -- typed sections ---------------------------------------------------

    def grid(self) -> GridSpec:
        ndim = self.get_int("grid", "ndim", _REQUIRED, lambda v: v in (1, 2, 3), "ndim in {1, 2, 3}")
        points = self.get_int("grid", "points", _REQUIRED, lambda v: v >= 8 and v & (v - 1) == 0, "a power of two >= 8")
        half = self.get_float("grid", "half_width", _REQUIRED, lambda v: v > 0.0, "half_width > 0")
        return GridSpec(ndim, points, half)

    def t_end(self) -> float:
        return self.get_float("time", "t_end", _REQUIRED, lambda v: v >= 0.0, "t_end >= 0")

    def time_grid(self) -> TimeGrid:
        t_end = self.get_float("time", "t_end", _REQUIRED, lambda v: v > 0.0, "t_end > 0")
        steps = self.get_int("time", "steps", _REQUIRED, lambda v: v >= 1, "steps >= 1")
        return TimeGrid(t_end, steps)

    def alpha(self, key: str = "alpha") -> float:
        return self.get_float("equation", key, _REQUIRED, lambda v: 0.0 < v <= 1.0, f"{key} in (0, 1]")

    def source_spec(self, suffix: str = "", power_key: str = "p") -> SourceSpec:
        sec = "equation"
        coef = self.get_float(sec, f"coefficient{suffix}", 1.0, lambda v: v >= 0.0, "coefficient >= 0")
        sigma = self.get_float(sec, f"sigma{suffix}", 0.0, lambda v: v > -1.0, "sigma > -1")
        rho = self.get_float(sec, f"rho{suffix}", 0.0, lambda v: v >= 0.0, "rho >= 0")
        p = self.get_float(sec, power_key, _REQUIRED, lambda v: v >= 1.0, f"{power_key} >= 1")
        return SourceSpec(coef, sigma, rho, p)

    def solve_config(self, time: TimeGrid, initial_sup: float = 0.0) -> SolveConfig:
        sec = "solver"
        tol = self.get_float(sec, "picard_tol", 1.0e-10, lambda v: v > 0.0, "picard_tol > 0")
        iters = self.get_int(sec, "max_iters", 60, lambda v: v >= 1, "max_iters >= 1")
        threshold = self.get_float(sec, "blowup_threshold", 1.0e6, lambda v: v > 0.0, "blowup_threshold > 0")
        if threshold <= initial_sup:
            raise self.error(sec, "blowup_threshold", f"must exceed the initial sup-norm {initial_sup:.6g}")
        clamp = self.get_bool(sec, "nonneg_clamp", False)
        window = self.get_int(sec, "window", 32, lambda v: v >= 1, "window >= 1")
        return SolveConfig(time, tol, iters, threshold, clamp, window)

    def gaussian(self, prefix: str = "") -> tuple[float, float, tuple[float, ...] | None]:
        sec = "initial"
        amp = self.get_float(sec, f"{prefix}amplitude", 1.0, lambda v: v >= 0.0, "amplitude >= 0")
        width = self.get_float(sec, f"{prefix}width", 1.0, lambda v: v > 0.0, "width > 0")
        center = self.get_floats(sec, f"{prefix}center", None)
        return amp, width, center

    def initial_file(self, key: str = "file") -> Path | None:
        if not self.has("initial", key):
            return None
        path = Path(self.raw("initial", key))
        return path if path.is_absolute() else self.base_dir / path

    def output_dir(self, override: str | None) -> Path:
        if override:
            return Path(override)
        if self.has("output", "dir"):
            path = Path(self.raw("output", "dir"))
            return path if path.is_absolute() else self.base_dir / path
        return Path.cwd()

    def formats(self) -> frozenset[str]:
        if not self.has("output", "formats"):
            return frozenset(FORMATS)
        items = {s.strip().lower() for s in self.raw("output", "formats").split(",") if s.strip()}
        unknown = items - set(FORMATS)
        if unknown:
            raise self.error("output", "formats", f"unknown format(s) {sorted(unknown)}; choose from {FORMATS}")
        return frozenset(items)

    def checkpoint_every(self) -> int:
        return self.get_int("output", "checkpoint_every", 0, lambda v: v >= 0, "checkpoint_every >= 0")

    def sweep(self) -> SweepConfig:
        sec = "sweep"
        grid = self.grid()
        p_min = self.get_float(sec, "p_min", _REQUIRED, lambda v: v > 1.0, "p_min > 1")
        p_max = self.get_float(sec, "p_max", _REQUIRED, lambda v: v >= p_min, "p_max >= p_min")
        p_step = self.get_float(sec, "p_step", _REQUIRED, lambda v: v > 0.0, "p_step > 0")
        count = int(math.floor((p_max - p_min) / p_step + 1e-9)) + 1
        p_values = tuple(float(np.round(p_min + i * p_step, 12)) for i in range(count))
        amplitudes = self.get_floats(sec, "amplitudes", _REQUIRED, lambda v: all(a > 0.0 for a in v), "amplitudes > 0")
        horizon = self.get_float(sec, "horizon", _REQUIRED, lambda v: v > 0.0, "horizon > 0")
        steps = self.get_int(sec, "steps", 256, lambda v: v >= 1, "steps >= 1")
        width = self.get_float(sec, "width", 1.0, lambda v: v > 0.0, "width > 0")
        factor = self.get_float(sec, "blowup_factor", None, lambda v: v > 1.0, "blowup_factor > 1")
        budget = self.get_float(sec, "budget_s", 900.0, lambda v: v > 0.0, "budget_s > 0")
        seed = self.get_int(sec, "seed", 0, lambda v: v >= 0, "seed >= 0")
        noise = self.get_float(sec, "noise", 0.0, lambda v: v >= 0.0, "noise >= 0")
        refine = self.get_float(sec, "refine_width", 0.1, lambda v: v > 0.0, "refine_width > 0")
        alpha = self.alpha()
        sigma = self.get_float("equation", "sigma", 0.0, lambda v: v > -1.0, "sigma > -1")
        rho = self.get_float("equation", "rho", 0.0, lambda v: v >= 0.0, "rho >= 0")
        coef = self.get_float("equation", "coefficient", 1.0, lambda v: v >= 0.0, "coefficient >= 0")
        tol = self.get_float("solver", "picard_tol", 1.0e-10, lambda v: v > 0.0, "picard_tol > 0")
        iters = self.get_int("solver", "max_iters", 60, lambda v: v >= 1, "max_iters >= 1")
        threshold = self.get_float("solver", "blowup_threshold", 1.0e6, lambda v: v > 0.0, "blowup_threshold > 0")
        timing = self.get_bool("output", "timing", False)
        if width > grid.half_width / 8.0:
            raise self.error(sec, "width", f"exceeds L/8 = {grid.half_width / 8.0:.6g}")
        spread = math.sqrt(2.0 * horizon**alpha)
        if spread > grid.half_width / 4.0:
            raise self.error(sec, "horizon", f"diffusion length {spread:.6g} exceeds L/4 = {grid.half_width / 4.0:.6g}")
        try:
            return SweepConfig(
                p_values=p_values,
                amplitudes=amplitudes,
                grid=grid,
                alpha=alpha,
                sigma=sigma,
                rho=rho,
                coefficient=coef,
                horizon=horizon,
                steps=steps,
                width=width,
                blowup_threshold=threshold,
                blowup_factor=factor,
                picard_tol=tol,
                picard_max_iters=iters,
                seed=seed,
                noise=noise,
                budget_s=budget,
                refine_width=refine,
                timing=timing,
            )
        except ValueError as exc:
            raise ConfigError(f"{self.where(sec)}: {exc}") from exc


class _Required:
    def __repr__(self) -> str:
        return "<required>"


_REQUIRED = _Required()
