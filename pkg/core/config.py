import json
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.exceptions import ConfigurationError, StorageError

LogBase = Literal["e", "2"]


class Settings(BaseSettings):
    # Valeurs du tableau des paramètres expérimentaux (325 / 2 / 10 / 3000)
    match_threshold: float = 325.0
    min_occurrences: int = 10
    acceptance_ratio: float = 2.0
    patch_skip_threshold: int = 3000
    patch_size_px: int = 512

    # Extracteur dense intégré
    stride_px: int = 8
    cell_px: int = 4

    # Apprentissage rapide : 20 patchs par classe
    budget_per_class: int = 20
    per_round_k: int = 2
    schedule: str = "high_density-worst-deterioration*3,worst*"

    log_base: LogBase = "e"
    seed: int = 0
    threads: int = 0
    heatmap_block_px: int = 4
    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="CICMAP_", extra="ignore")


settings = Settings()


class RunConfig(BaseModel):
    """Configuration effective d'une commande : settings < fichier JSON < options"""
    match_threshold: float = Field(gt=0)
    min_occurrences: int = Field(ge=1)
    acceptance_ratio: float = Field(gt=1)
    patch_skip_threshold: int = Field(ge=0)
    patch_size_px: int = Field(gt=0)
    stride_px: int = Field(gt=0)
    cell_px: int = Field(gt=0)
    budget_per_class: int = Field(ge=1)
    per_round_k: int = Field(ge=1)
    schedule: str
    log_base: LogBase
    seed: int
    threads: int = Field(ge=0)
    heatmap_block_px: int = Field(ge=1)
    log_level: str

    @field_validator("log_level")
    @classmethod
    def upper_level(cls, value: str) -> str:
        return value.upper()

    def provenance(self) -> Dict[str, Any]:
        """Bloc recopié dans les sorties JSON ; `threads` n'influence aucun octet de sortie"""
        return self.model_dump(exclude={"threads", "log_level"})


def load_run_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Construit la configuration effective

    Args:
        config_path: fichier JSON optionnel (clés = champs de RunConfig)
        overrides: valeurs issues des options de ligne de commande (None = absent)
    """
    values: Dict[str, Any] = settings.model_dump()

    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as f:
                file_values = json.load(f)
        except OSError as e:
            raise StorageError(f"Lecture impossible de {config_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Fichier de configuration invalide {config_path}: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigurationError(f"{config_path} doit contenir un objet JSON")
        unknown = set(file_values) - set(RunConfig.model_fields)
        if unknown:
            raise ConfigurationError(f"Clés inconnues dans {Path(config_path).name}: {sorted(unknown)}")
        values.update(file_values)

    # Les options gagnent
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigurationError(f"Configuration invalide: {e.errors()[0]['loc']} {e.errors()[0]['msg']}") from e
