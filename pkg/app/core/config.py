"""
Configuration management module
"""
import os
import sys
import yaml
from typing import Optional
from pydantic import BaseModel, Field
from loguru import logger

from app.core.exceptions import ConfigError


class SamplerConfig(BaseModel):
    """CC / GS sampler settings"""
    burn_in_tolerance: float = Field(5.0e-5, gt=0)
    burn_in_max_cycles: int = Field(100000, ge=1)
    divergence_threshold: float = Field(1.0e12, gt=0)
    check_every: int = Field(100, ge=1)
    rel_tolerance_real: float = Field(5.0e-5, gt=0)
    rel_tolerance_complex: float = Field(1.0e-5, gt=0)  # on the absolute value
    max_cycles: int = Field(1000000, ge=1)


class NoiseConfig(BaseModel):
    family: str = "z2"  # z2 或 gaussian
    seed: int = Field(20240101, ge=0, lt=2**64)


class SeConfigSection(BaseModel):
    """SE baseline settings"""
    inner_solver: str = "bicg"  # bicg 或 gs
    inner_tolerance: float = Field(5.0e-5, gt=0)
    inner_max_iter: int = Field(10000, ge=1)


class SolverConfig(BaseModel):
    power_iterations: int = Field(1000, ge=1)
    power_tolerance: float = Field(1.0e-6, gt=0)
    power_seed: int = 12345
    dense_order_cap: int = Field(4096, ge=1)


class GeneratorConfig(BaseModel):
    unknown_parent_fraction: float = Field(0.1, ge=0, le=1)
    gamma_convention: str = "dirac"   # dirac 或 as_printed
    atilde_rule: str = "henderson"    # henderson 或 as_printed


class ExperimentSettings(BaseModel):
    replicates: int = Field(1, ge=1)
    jobs: int = Field(4, ge=1)


class ReportConfig(BaseModel):
    timezone: str = "UTC"


class LoggingConfig(BaseModel):
    """日志配置"""
    level: str = "INFO"
    file: Optional[str] = "./logs/mcinv.log"
    max_size: str = "10MB"
    backup_count: int = 5


class Settings(BaseModel):
    """应用配置"""
    sampler: SamplerConfig = SamplerConfig()
    noise: NoiseConfig = NoiseConfig()
    se: SeConfigSection = SeConfigSection()
    solvers: SolverConfig = SolverConfig()
    generators: GeneratorConfig = GeneratorConfig()
    experiment: ExperimentSettings = ExperimentSettings()
    report: ReportConfig = ReportConfig()
    logging: LoggingConfig = LoggingConfig()

    @classmethod
    def load_from_yaml(cls, config_path: str = "config.yaml") -> "Settings":
        """Load configuration from YAML file"""
        # Try to find config file in multiple locations
        possible_paths = [config_path]
        env_path = os.environ.get("MCINV_CONFIG")
        if env_path:
            possible_paths.append(env_path)
        possible_paths.append(os.path.join(os.path.dirname(__file__), "..", "..", "config.yaml"))

        # If running from PyInstaller, also check the executable directory
        if getattr(sys, 'frozen', False):
            possible_paths.append(os.path.join(os.path.dirname(sys.executable), "config.yaml"))

        config_file = None
        for path in possible_paths:
            if path and os.path.exists(path):
                config_file = path
                break

        if config_file is None:
            logger.debug("No configuration file found, using default settings")
            return cls.create_default()

        logger.debug(f"Loading configuration from: {config_file}")
        try:
            with open(config_file, 'r', encoding='utf-8') as f:
                config_data = yaml.safe_load(f) or {}
            return cls(**config_data)
        except (OSError, yaml.YAMLError, ValueError) as e:
            raise ConfigError(f"invalid configuration file {config_file}: {e}", path=config_file)

    @classmethod
    def create_default(cls) -> "Settings":
        """Create default configuration"""
        return cls()


# 全局配置实例
settings: Optional[Settings] = None


def get_settings() -> Settings:
    """获取配置实例"""
    global settings
    if settings is None:
        settings = Settings.load_from_yaml()
    return settings


def reload_settings(config_path: Optional[str] = None) -> Settings:
    """Replace the global settings, e.g. from a ``--config`` flag"""
    global settings
    settings = Settings.load_from_yaml(config_path) if config_path else Settings.load_from_yaml()
    return settings
