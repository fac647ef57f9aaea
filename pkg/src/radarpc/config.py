"""Pipeline configuration: flat key=value files with dotted section names,
overridable per key from the command line. Precedence: CLI > file >
shipped defaults (defaults.cfg, which pins the production constants).
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

from .bev import GridSpec
from .enhance import EnhancerSpec
from .fusion import WindowSpec
from .metrics import DetEvalConfig
from .supervision import GroundParams
from .validation import ValidationParams


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def load_defaults() -> dict[str, str]:
    text = resources.files("radarpc").joinpath("defaults.cfg").read_text("utf-8")
    return parse_config_text(text, "defaults.cfg")


def _to_bool(val: str, key: str) -> bool:
    low = val.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {val!r}")


@dataclass
class PipelineConfig:
    """Typed view over the merged key=value table."""

    values: dict[str, str]
    out_dir: Path = Path("out")
    scene_path: Path | None = None

    @staticmethod
    def build(config_file: str | Path | None = None,
              overrides: Mapping[str, str] | None = None,
              out_dir: str | Path = "out",
              scene_path: str | Path | None = None) -> "PipelineConfig":
        values = load_defaults()
        known = set(values)
        if config_file is not None:
            path = Path(config_file)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            for k, v in parse_config_text(path.read_text("utf-8"), str(path)).items():
                if k not in known:
                    raise ConfigError(f"{path}: unknown config key {k!r}")
                values[k] = v
        for k, v in (overrides or {}).items():
            if k not in known:
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = str(v)
        return PipelineConfig(values, Path(out_dir),
                              Path(scene_path) if scene_path else None)

    # typed accessors -------------------------------------------------------

    def _float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None

    def _int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError as e:
            raise ConfigError(f"{key}: {e}") from None

    @property
    def seed(self) -> int:
        return self._int("seed")

    @property
    def jobs(self) -> int:
        return max(1, self._int("jobs"))

    @property
    def frame_rate(self) -> float:
        return self._float("window.frame_rate")

    @property
    def window_seconds(self) -> float:
        return self._float("window.seconds")

    def window(self, keyframe_t: float) -> WindowSpec:
        return WindowSpec(self.window_seconds, self.frame_rate, keyframe_t)

    def validation_params(self) -> ValidationParams:
        return ValidationParams(self._float("validation.tau_d"),
                                self._float("validation.r"),
                                self._int("validation.k_min"),
                                _to_bool(self.values["validation.include_query_point"],
                                         "validation.include_query_point"))

    def grid_spec(self) -> GridSpec:
        try:
            return GridSpec(self._float("grid.x_min"), self._float("grid.x_max"),
                            self._float("grid.y_min"), self._float("grid.y_max"),
                            self._int("grid.width"), self._int("grid.height"))
        except ValueError as e:
            raise ConfigError(f"grid: {e}") from None

    def enhancer_spec(self) -> EnhancerSpec:
        try:
            return EnhancerSpec(self.values["enhancer.kind"], self.values["enhancer.cmd"])
        except ValueError as e:
            raise ConfigError(f"enhancer: {e}") from None

    @property
    def tau_int(self) -> int:
        v = self._int("threshold.intensity")
        if not (0 <= v <= 255):
            raise ConfigError(f"threshold.intensity must be a byte, got {v}")
        return v

    @property
    def fscore_tau(self) -> float:
        return self._float("threshold.fscore_tau")

    def det_eval(self) -> DetEvalConfig:
        ths = tuple(float(v) for v in self.values["eval.dist_thresholds"].split(",") if v)
        cats = tuple(c.strip() for c in self.values["eval.categories"].split(",") if c.strip())
        try:
            return DetEvalConfig(ths, self._float("eval.max_range"), cats)
        except ValueError as e:
            raise ConfigError(f"eval: {e}") from None

    def ground_params(self) -> GroundParams:
        try:
            return GroundParams(self.values["ground.method"],
                                self._float("ground.z_cut"),
                                self._int("ground.ransac_iters"),
                                self._float("ground.inlier_tol"),
                                seed=self.seed)
        except ValueError as e:
            raise ConfigError(f"ground: {e}") from None

    @property
    def rear_fov_effective_deg(self) -> float:
        return self._float("fov.rear_effective_deg")
