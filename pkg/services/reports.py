"""
Service d'écriture/lecture des rapports CSV : cartes de scores, histogrammes, ROC, caractéristiques
"""

import csv
import logging
import math
from pathlib import Path
from typing import List, Optional

from core.exceptions import ParseError
from models.evaluation import HistogramBin, RocResult
from models.evidence import EvidenceModel
from models.scores import ScoreCell, ScoreMap
from services.descriptor_store import Source, open_text
from services.evidence import kl_divergence, rank_features

logger = logging.getLogger(__name__)

SCORE_HEADER = ["X", "Y", "n_descriptors", "skipped", "score", "pos_hits", "neg_hits"]
HISTOGRAM_HEADER = ["bin_lo", "bin_hi", "cancer", "normal"]
ROC_HEADER = ["threshold", "fpr", "tpr"]
FEATURE_HEADER = ["rank", "polarity", "rho_p", "cic", "kl", "count_p", "count_n"]


def _real(value: float) -> str:
    return f"{value:.17g}"


def _score(value: float) -> str:
    return f"{value:.9g}"


def _parse_bool(text: str, line: int) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1"):
        return True
    if lowered in ("false", "0"):
        return False
    raise ParseError(f"booléen illisible '{text}'", line=line)


class ReportStore:
    def write_scores(self, score_map: ScoreMap, target: Source) -> None:
        """Une ligne par patch de la grille, ordre raster ; score vide pour un patch ignoré"""
        with open_text(target, "w") as stream:
            stream.write(",".join(SCORE_HEADER) + "\n")
            for c in score_map.cells:
                score = "" if c.skipped else _score(c.score)
                skipped = "true" if c.skipped else "false"
                stream.write(f"{c.X},{c.Y},{c.n_descriptors},{skipped},{score},{c.pos_hits},{c.neg_hits}\n")
        logger.info(f"💾 Carte de scores écrite: {target} ({score_map.cols}x{score_map.rows})")

    def load_scores(self, source: Source, slide_id: Optional[str] = None) -> ScoreMap:
        """
        Relit une carte de scores ; la grille est déduite des indices maximaux

        Raises:
            ParseError: en-tête, champ ou grille incomplète
        """
        cells: List[ScoreCell] = []
        with open_text(source, "r") as stream:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != SCORE_HEADER:
                raise ParseError("en-tête attendu: " + ",".join(SCORE_HEADER), line=1)
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(SCORE_HEADER):
                    raise ParseError(f"{len(row)} champs au lieu de {len(SCORE_HEADER)}", line=line)
                skipped = _parse_bool(row[3], line)
                try:
                    cells.append(ScoreCell(
                        X=int(row[0]), Y=int(row[1]), n_descriptors=int(row[2]), skipped=skipped,
                        score=None if skipped else float(row[4]),
                        pos_hits=int(row[5]), neg_hits=int(row[6]),
                    ))
                except ValueError as e:
                    raise ParseError(f"valeur illisible ({e})", line=line) from e

        cols = max((c.X for c in cells), default=-1) + 1
        rows = max((c.Y for c in cells), default=-1) + 1
        cells.sort(key=lambda c: (c.Y, c.X))
        if [(c.X, c.Y) for c in cells] != [(X, Y) for Y in range(rows) for X in range(cols)]:
            raise ParseError(f"la carte ne couvre pas exactement la grille {cols}x{rows}")
        if slide_id is None:
            slide_id = Path(source).stem if isinstance(source, (str, Path)) else "slide"
        return ScoreMap(slide_id=slide_id, cols=cols, rows=rows, cells=cells)

    def write_histogram(self, bins: List[HistogramBin], target: Source) -> None:
        with open_text(target, "w") as stream:
            stream.write(",".join(HISTOGRAM_HEADER) + "\n")
            for b in bins:
                stream.write(f"{_real(b.bin_lo)},{_real(b.bin_hi)},{b.cancer},{b.normal}\n")

    def write_roc(self, roc: RocResult, target: Source) -> None:
        """Points (seuil, fpr, tpr) puis une ligne finale `auc,<valeur>`"""
        with open_text(target, "w") as stream:
            stream.write(",".join(ROC_HEADER) + "\n")
            for threshold, fpr, tpr in zip(roc.thresholds, roc.fpr, roc.tpr):
                shown = "inf" if math.isinf(threshold) else _score(threshold)
                stream.write(f"{shown},{_real(fpr)},{_real(tpr)}\n")
            stream.write(f"auc,{_real(roc.auc)}\n")

    def write_features(self, model: EvidenceModel, target: Source, by: str = "cic") -> None:
        """Table des caractéristiques d'évidence, triées par utilité"""
        with open_text(target, "w") as stream:
            stream.write(",".join(FEATURE_HEADER) + "\n")
            for rank, f in enumerate(rank_features(model, by=by), start=1):
                kl = kl_divergence(f.rho_p, model.log_base)
                stream.write(
                    f"{rank},{f.polarity.value},{_real(f.rho_p)},{_real(f.cic)},{_real(kl)},{f.count_p},{f.count_n}\n"
                )


report_store = ReportStore()
