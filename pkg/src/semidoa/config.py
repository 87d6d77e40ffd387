#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Configuration Management for semidoa
Application settings (JSON + environment) and experiment/scene files (INI)
"""

import configparser
import copy
import json
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .exceptions import ConfigurationError, DomainError
from .models import (ESTIMATOR_NAMES, DensityGeneratorSpec, ExperimentConfig, Family,
                     SourceScene)

try:
    from dotenv import load_dotenv
    load_dotenv()  # Load .env file
except ImportError:
    # dotenv not available, continue without it
    pass

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_PATH = "config/config.json"


def _default_workers() -> int:
    return max(1, os.cpu_count() or 1)


class ConfigManager:
    """Application settings: logging, numerics and simulation defaults"""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or DEFAULT_SETTINGS_PATH
        self._explicit_path = config_path is not None
        self.config: Dict[str, Any] = {}
        self.load_config()

    def load_config(self):
        """Load configuration from file and environment variables"""
        logger.debug(f"Loading configuration from {self.config_path}")

        self.config = self._get_default_config()

        config_file = Path(self.config_path)
        if config_file.exists():
            try:
                with open(config_file, 'r', encoding='utf-8') as f:
                    file_config = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigurationError(f"Cannot read settings file {config_file}: {e}") from e
            self._merge(self.config, {k: v for k, v in file_config.items() if not k.startswith('_')})
            logger.debug("Configuration loaded from file")
        elif self._explicit_path:
            raise ConfigurationError(f"Settings file not found: {config_file}")

        self._load_from_environment()
        self._validate_config()

    def _get_default_config(self) -> Dict[str, Any]:
        return {
            'logging': {
                'level': 'INFO',
                'file': 'logs/semidoa.log',  # relative to output_dir
                'max_size_mb': 10,
                'backup_count': 5
            },
            'numerics': {
                'grid_size': 4096,
                'tyler_tol': 1e-9,
                'tyler_max_iter': 500,
                'value_cap': 1e12
            },
            'simulation': {
                'workers': _default_workers(),
                'progress': True
            },
            'output_dir': 'results'
        }

    @staticmethod
    def _merge(base: Dict[str, Any], update: Dict[str, Any]):
        for key, value in update.items():
            if isinstance(value, dict) and isinstance(base.get(key), dict):
                ConfigManager._merge(base[key], value)
            else:
                base[key] = value

    def _load_from_environment(self):
        """Load configuration from environment variables"""
        env_mappings = {
            'SEMIDOA_LOG_LEVEL': ['logging', 'level'],
            'SEMIDOA_LOG_FILE': ['logging', 'file'],
            'SEMIDOA_WORKERS': ['simulation', 'workers'],
            'SEMIDOA_GRID_SIZE': ['numerics', 'grid_size'],
            'SEMIDOA_OUTPUT_DIR': ['output_dir'],
        }

        for env_var, config_path in env_mappings.items():
            value = os.getenv(env_var)
            if value:
                self._set_nested_config(config_path, value)
                logger.debug(f"Set {'.'.join(config_path)} from environment")

    def _set_nested_config(self, path: List[str], value: str):
        current = self.config
        for key in path[:-1]:
            current = current.setdefault(key, {})

        final_key = path[-1]
        if final_key in ('workers', 'grid_size'):
            try:
                current[final_key] = int(value)
            except ValueError:
                current[final_key] = value
        else:
            current[final_key] = value

    def _validate_config(self):
        errors = []

        log_config = self.config.get('logging', {})
        level = str(log_config.get('level', 'INFO')).upper()
        if not isinstance(logging.getLevelName(level), int):
            errors.append(f"Invalid logging level: {log_config.get('level')}")

        numerics = self.config.get('numerics', {})
        grid_size = numerics.get('grid_size')
        if not isinstance(grid_size, int) or grid_size < 64:
            errors.append(f"numerics.grid_size must be an integer >= 64, got {grid_size}")
        tol = numerics.get('tyler_tol')
        if not isinstance(tol, (int, float)) or not tol > 0:
            errors.append(f"numerics.tyler_tol must be > 0, got {tol}")
        max_iter = numerics.get('tyler_max_iter')
        if not isinstance(max_iter, int) or max_iter < 1:
            errors.append(f"numerics.tyler_max_iter must be an integer >= 1, got {max_iter}")

        simulation = self.config.get('simulation', {})
        workers = simulation.get('workers')
        if not isinstance(workers, int) or workers < 1:
            errors.append(f"simulation.workers must be an integer >= 1, got {workers}")

        if errors:
            logger.error("Configuration validation errors:")
            for error in errors:
                logger.error(f"  - {error}")
            raise ConfigurationError(f"Configuration validation failed: {'; '.join(errors)}")

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def get_nested(self, *keys, default: Any = None) -> Any:
        """Get nested configuration value"""
        current = self.config
        for key in keys:
            if isinstance(current, dict) and key in current:
                current = current[key]
            else:
                return default
        return current

    def get_all(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def log_path(self) -> Optional[Path]:
        """Rotating log file; relative paths live under output_dir, empty disables it"""
        log_file = self.config.get('logging', {}).get('file')
        if not log_file:
            return None
        path = Path(log_file)
        if path.is_absolute():
            return path
        return Path(self.config.get('output_dir') or '.') / path

    def setup_logging(self, verbose: bool = False):
        """Setup logging based on configuration; console output goes to stderr"""
        log_config = self.config.get('logging', {})
        log_level = logging.DEBUG if verbose else getattr(logging, str(log_config.get('level', 'INFO')).upper())

        file_formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        console_formatter = logging.Formatter(
            '%(levelname)s - %(name)s - %(message)s'
        )

        root_logger = logging.getLogger()
        root_logger.setLevel(log_level)
        root_logger.handlers.clear()

        log_file = self.log_path()
        if log_file:
            try:
                Path(log_file).parent.mkdir(parents=True, exist_ok=True)
                file_handler = RotatingFileHandler(
                    log_file,
                    maxBytes=int(log_config.get('max_size_mb', 10)) * 1024 * 1024,
                    backupCount=int(log_config.get('backup_count', 5))
                )
                file_handler.setFormatter(file_formatter)
                root_logger.addHandler(file_handler)
            except OSError as e:
                logger.warning(f"Could not setup rotating file handler: {e}")

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(console_formatter)
        root_logger.addHandler(console_handler)

        logger.debug(f"Logging configured: level={logging.getLevelName(log_level)}, file={log_file}")


# INI experiment / scene files

def _floats(value: Union[str, List[float], float, None]) -> Optional[List[float]]:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, str):
        return [float(v) for v in value.replace(',', ' ').split()]
    return [float(v) for v in value]


class SceneSettings(BaseModel):
    """[scene] section"""
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    n_sensors: int = Field(8, alias="n", ge=2)
    nu: List[float] = Field(default_factory=lambda: [0.1, 0.2])
    sigma0sq: float = Field(1.0, gt=0)
    snr_db: Optional[float] = 5.0
    rho: float = Field(0.5, ge=-1, le=1)
    powers: Optional[List[float]] = None
    gamma_re: Optional[List[float]] = None
    gamma_im: Optional[List[float]] = None

    @field_validator('nu', 'powers', 'gamma_re', 'gamma_im', mode='before')
    @classmethod
    def _split(cls, value):
        return _floats(value)

    @model_validator(mode='after')
    def _check_sources(self):
        k = len(self.nu)
        if k >= self.n_sensors:
            raise ValueError(f"number of sources K={k} must be < N={self.n_sensors}")
        if self.powers is not None and len(self.powers) != k:
            raise ValueError(f"powers needs {k} values, got {len(self.powers)}")
        if self.gamma_re is not None and len(self.gamma_re) != k * k:
            raise ValueError(f"gamma_re needs K*K={k * k} values, got {len(self.gamma_re)}")
        if self.gamma_im is not None and len(self.gamma_im) != k * k:
            raise ValueError(f"gamma_im needs K*K={k * k} values, got {len(self.gamma_im)}")
        return self

    def to_scene(self) -> SourceScene:
        k = len(self.nu)
        if self.gamma_re is not None:
            gamma = np.array(self.gamma_re, dtype=complex).reshape(k, k)
            if self.gamma_im is not None:
                gamma = gamma + 1j * np.array(self.gamma_im).reshape(k, k)
            return SourceScene(self.n_sensors, self.nu, gamma, self.sigma0sq)
        if self.powers is not None:
            return SourceScene.from_powers(self.n_sensors, self.nu, self.powers, self.rho, self.sigma0sq)
        return SourceScene.from_snr(self.n_sensors, self.nu, self.snr_db or 0.0, self.rho, self.sigma0sq)


class DistributionSettings(BaseModel):
    """[distribution] section"""
    model_config = ConfigDict(extra='forbid', populate_by_name=True)

    family: str = 'gaussian'
    lam: Optional[float] = Field(None, alias='lambda')
    s: Optional[float] = None

    @field_validator('family')
    @classmethod
    def _family(cls, value):
        return Family.parse(value).value

    def to_spec(self) -> DensityGeneratorSpec:
        family = Family(self.family)
        value = self.lam if family is Family.STUDENT_T else self.s
        return DensityGeneratorSpec.for_sweep(family, value)


class SweepSettings(BaseModel):
    """[experiment] section"""
    model_config = ConfigDict(extra='forbid')

    sweep: List[float]
    snapshots: int = Field(40, ge=1)
    runs: int = Field(2000, ge=1)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    estimators: List[str] = Field(default_factory=lambda: list(ESTIMATOR_NAMES))
    grid_size: int = Field(4096, ge=64)
    refine: str = 'parabolic'
    exclude_outliers: bool = False
    outlier_threshold: float = Field(0.1, gt=0)
    workers: Optional[int] = Field(None, ge=1)

    @field_validator('sweep', mode='before')
    @classmethod
    def _split(cls, value):
        values = _floats(value)
        if not values:
            raise ValueError("sweep must list at least one value")
        return values

    @field_validator('estimators', mode='before')
    @classmethod
    def _names(cls, value):
        if isinstance(value, str):
            names = [v.strip().lower() for v in value.replace(',', ' ').split()]
            if names == ['all']:
                return list(ESTIMATOR_NAMES)
            return names
        return value

    @field_validator('estimators')
    @classmethod
    def _known(cls, value):
        unknown = [v for v in value if v not in ESTIMATOR_NAMES]
        if unknown or not value:
            raise ValueError(f"estimators must be a non-empty subset of {ESTIMATOR_NAMES}, got {value}")
        return value

    @field_validator('refine')
    @classmethod
    def _refine(cls, value):
        if value not in ('none', 'parabolic', 'bounded'):
            raise ValueError(f"refine must be none, parabolic or bounded, got {value!r}")
        return value


class OutputSettings(BaseModel):
    """[output] section"""
    model_config = ConfigDict(extra='forbid')

    csv: Optional[str] = None
    plot: Optional[str] = None


class ExperimentSettings(BaseModel):
    """Complete experiment file"""
    scene: SceneSettings = Field(default_factory=SceneSettings)
    distribution: DistributionSettings = Field(default_factory=DistributionSettings)
    experiment: SweepSettings
    output: OutputSettings = Field(default_factory=OutputSettings)

    def to_experiment_config(self, runs: Optional[int] = None,
                             seed: Optional[int] = None) -> ExperimentConfig:
        sweep = self.experiment
        family = Family(self.distribution.family)
        if family is Family.GAUSSIAN:
            raise ConfigurationError("Configuration validation failed: experiment family must be t or gg")
        return ExperimentConfig(
            scene=self.scene.to_scene(),
            family=family,
            sweep=sweep.sweep,
            snapshots=sweep.snapshots,
            runs=runs if runs is not None else sweep.runs,
            master_seed=seed if seed is not None else sweep.seed,
            estimators=tuple(sweep.estimators),
            grid_size=sweep.grid_size,
            refine=sweep.refine,
            exclude_outliers=sweep.exclude_outliers,
            outlier_threshold=sweep.outlier_threshold,
        )


def _format_validation_error(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        location = '.'.join(str(part) for part in item['loc'])
        messages.append(f"{location}: {item['msg']}" if location else item['msg'])
    return f"Configuration validation failed: {'; '.join(messages)}"


def read_ini(path: Union[str, Path]) -> Dict[str, Dict[str, str]]:
    """Sections of a key = value file as plain dicts"""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=('#', ';'))
    try:
        with open(path, 'r', encoding='utf-8') as f:
            parser.read_file(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except configparser.Error as e:
        raise ConfigurationError(f"Malformed config file {path}: {e}") from e
    return {section: dict(parser[section]) for section in parser.sections()}


def _validate(model, data: Dict[str, Any], path: Union[str, Path]):
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"{path}: {_format_validation_error(e)}") from e


def load_scene_config(path: Union[str, Path]) -> SourceScene:
    """SourceScene from the [scene] section (defaults to the reference scene)"""
    sections = read_ini(path)
    settings = _validate(SceneSettings, sections.get('scene', {}), path)
    try:
        return settings.to_scene()
    except DomainError as e:
        raise ConfigurationError(f"{path}: {e}") from e


def load_distribution(path: Union[str, Path]) -> DensityGeneratorSpec:
    """DensityGeneratorSpec from the [distribution] section"""
    sections = read_ini(path)
    settings = _validate(DistributionSettings, sections.get('distribution', {}), path)
    try:
        return settings.to_spec()
    except DomainError as e:
        raise ConfigurationError(f"{path}: {e}") from e


def load_experiment_settings(path: Union[str, Path]) -> ExperimentSettings:
    sections = read_ini(path)
    if 'experiment' not in sections:
        raise ConfigurationError(f"{path}: Configuration validation failed: missing [experiment] section")
    unknown = set(sections) - {'scene', 'distribution', 'experiment', 'output'}
    if unknown:
        raise ConfigurationError(f"{path}: unknown sections {sorted(unknown)}")
    return _validate(ExperimentSettings, sections, path)


def load_experiment_config(path: Union[str, Path], runs: Optional[int] = None,
                           seed: Optional[int] = None) -> ExperimentConfig:
    """Validated ExperimentConfig; runs / seed override the file values"""
    settings = load_experiment_settings(path)
    try:
        return settings.to_experiment_config(runs, seed)
    except DomainError as e:
        raise ConfigurationError(f"{path}: {e}") from e
