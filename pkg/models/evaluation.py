from typing import List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class RocResult(BaseModel):
    # Seuils décroissants ; le premier (+inf) correspond au point (0, 0)
    thresholds: List[float]
    fpr: List[float]
    tpr: List[float]
    auc: float = Field(ge=0.0, le=1.0)


class HistogramBin(BaseModel, frozen=True):
    bin_lo: float
    bin_hi: float
    cancer: int = 0
    normal: int = 0


class SyntheticSpec(BaseModel):
    """
    Lame synthétique : grappes de descripteurs plantées avec un rho^p connu

    `center_seed` fixe la géométrie des grappes ; deux lames de même
    `center_seed` et de `seed` différents partagent leurs caractéristiques.
    """
    n_clusters_p: int = Field(default=3, ge=0)
    n_clusters_n: int = Field(default=3, ge=0)
    cluster_separation: float = Field(default=600.0, gt=0)
    match_threshold: float = Field(default=325.0, gt=0)
    # Un rho par grappe (positives puis négatives) ; défaut 0.9 / 0.1
    planted_rho: Optional[List[float]] = None
    cols: int = Field(default=8, ge=1)
    rows: int = Field(default=8, ge=1)
    patch_size_px: int = Field(default=512, gt=0)
    descriptors_min: int = Field(default=3000, ge=0)
    descriptors_max: int = Field(default=3200, ge=0)
    tumor_fraction: float = Field(default=0.4, ge=0.0, le=1.0)
    boundary_excluded: bool = True
    background_fraction: float = Field(default=0.0, ge=0.0, lt=1.0)
    background_max: int = Field(default=50, ge=0)
    seed: int = 0
    center_seed: int = 0
    slide_id: str = "synthetic"

    @field_validator("planted_rho")
    @classmethod
    def rho_in_unit_interval(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is not None and any(not (0.0 <= r <= 1.0) for r in value):
            raise ValueError("chaque rho planté doit être dans [0, 1]")
        return value

    @model_validator(mode="after")
    def check_shape(self) -> "SyntheticSpec":
        if self.descriptors_max < self.descriptors_min:
            raise ValueError("descriptors_max < descriptors_min")
        if self.planted_rho is not None and len(self.planted_rho) != self.n_clusters:
            raise ValueError("planted_rho doit avoir n_clusters_p + n_clusters_n valeurs")
        if self.n_clusters == 0:
            raise ValueError("au moins une grappe")
        return self

    @property
    def n_clusters(self) -> int:
        return self.n_clusters_p + self.n_clusters_n

    def rhos(self) -> List[float]:
        if self.planted_rho is not None:
            return list(self.planted_rho)
        return [0.9] * self.n_clusters_p + [0.1] * self.n_clusters_n
