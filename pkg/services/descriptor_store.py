"""
Service de lecture/écriture des descripteurs et des étiquettes de patchs (CSV)
"""

import csv
import io
import logging
from pathlib import Path
from typing import Dict, Optional, TextIO, Union

import numpy as np

from core.exceptions import DescriptorValidationError, ParseError, StorageError
from models.descriptors import DESCRIPTOR_MAX, DESCRIPTOR_SIZE, SlideDescriptorSet
from models.training import PatchLabel, PatchLabels
from services.features import build_slide_set

logger = logging.getLogger(__name__)

DESCRIPTOR_HEADER = ["slide_id", "x", "y"] + [f"d{i}" for i in range(DESCRIPTOR_SIZE)]
LABELS_HEADER = ["X", "Y", "label"]

Source = Union[str, Path, TextIO]


def open_text(source: Source, mode: str):
    if isinstance(source, (str, Path)):
        try:
            return open(source, mode, encoding="utf-8", newline="")
        except OSError as e:
            raise StorageError(f"Accès impossible à {source}: {e}") from e
    return _Borrowed(source)


class _Borrowed:
    """Flux fourni par l'appelant : on ne le ferme pas"""

    def __init__(self, stream: TextIO):
        self.stream = stream

    def __enter__(self) -> TextIO:
        return self.stream

    def __exit__(self, *exc) -> None:
        return None


def _format_component(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


class DescriptorStore:
    def ingest_descriptors(
        self,
        source: Source,
        patch_size_px: int = 512,
        width_px: Optional[int] = None,
        height_px: Optional[int] = None,
        slide_id: Optional[str] = None,
    ) -> SlideDescriptorSet:
        """
        Charge un CSV de descripteurs `slide_id,x,y,d0,...,d127`

        Args:
            source: chemin ou flux texte
            patch_size_px: taille des patchs de la grille
            width_px, height_px: dimensions de la lame (sinon déduites)
            slide_id: identifiant à utiliser pour un fichier sans ligne

        Returns:
            Le SlideDescriptorSet, enregistrements regroupés par patch
        """
        xs, ys, rows = [], [], []
        seen_ids = set()

        with open_text(source, "r") as stream:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != DESCRIPTOR_HEADER:
                raise ParseError("en-tête attendu: slide_id,x,y,d0,...,d127", line=1)

            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != len(DESCRIPTOR_HEADER):
                    raise ParseError(f"{len(row)} champs au lieu de {len(DESCRIPTOR_HEADER)}", line=line)
                try:
                    x, y = int(row[1]), int(row[2])
                    values = np.array(row[3:], dtype=np.float64)
                except ValueError as e:
                    raise ParseError(f"valeur illisible ({e})", line=line) from e
                if x < 0 or y < 0:
                    raise DescriptorValidationError(f"coordonnée négative ({x}, {y})", line=line)
                if not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > DESCRIPTOR_MAX:
                    raise DescriptorValidationError("composante hors de l'intervalle [0, 255]", line=line)
                seen_ids.add(row[0])
                xs.append(x)
                ys.append(y)
                rows.append(values)

        if len(seen_ids) > 1:
            raise DescriptorValidationError(f"plusieurs lames dans un même fichier: {sorted(seen_ids)}")
        if seen_ids:
            slide_id = seen_ids.pop()
        elif slide_id is None:
            slide_id = Path(source).stem if isinstance(source, (str, Path)) else "slide"

        descriptors = np.vstack(rows) if rows else np.empty((0, DESCRIPTOR_SIZE))
        if not rows:
            logger.warning(f"⚠️ Aucun descripteur dans la lame {slide_id}")

        slide = build_slide_set(
            slide_id, np.array(xs, dtype=np.int64), np.array(ys, dtype=np.int64), descriptors,
            patch_size_px=patch_size_px, width_px=width_px, height_px=height_px,
        )
        logger.info(f"📥 Lame {slide_id}: {len(slide)} descripteurs, grille {slide.cols}x{slide.rows}")
        return slide

    def write_descriptors(self, slide: SlideDescriptorSet, target: Source) -> None:
        """Écrit la lame dans l'ordre canonique (composantes entières sans décimales)"""
        integral = slide.descriptors.dtype == np.uint8
        with open_text(target, "w") as stream:
            stream.write(",".join(DESCRIPTOR_HEADER) + "\n")
            buffer = io.StringIO()
            for x, y, d in zip(slide.xs.tolist(), slide.ys.tolist(), slide.descriptors):
                if integral:
                    values = ",".join(map(str, d.tolist()))
                else:
                    values = ",".join(_format_component(v) for v in d.tolist())
                buffer.write(f"{slide.slide_id},{x},{y},{values}\n")
                if buffer.tell() > 1 << 20:
                    stream.write(buffer.getvalue())
                    buffer = io.StringIO()
            stream.write(buffer.getvalue())

    def load_labels(self, source: Source) -> PatchLabels:
        """Charge un CSV `X,Y,label` ; les patchs absents sont exclus"""
        labels: PatchLabels = {}
        with open_text(source, "r") as stream:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != LABELS_HEADER:
                raise ParseError("en-tête attendu: X,Y,label", line=1)
            for row in reader:
                line = reader.line_num
                if not row:
                    continue
                if len(row) != 3:
                    raise ParseError(f"{len(row)} champs au lieu de 3", line=line)
                try:
                    key = (int(row[0]), int(row[1]))
                    label = PatchLabel(row[2].strip())
                except ValueError as e:
                    raise ParseError(f"étiquette illisible ({e})", line=line) from e
                if key[0] < 0 or key[1] < 0:
                    raise DescriptorValidationError(f"patch négatif {key}", line=line)
                if key in labels:
                    raise DescriptorValidationError(f"patch {key} étiqueté deux fois", line=line)
                labels[key] = label
        logger.info(f"🏷️ Étiquettes: {label_counts(labels)}")
        return labels

    def write_labels(self, labels: PatchLabels, target: Source) -> None:
        with open_text(target, "w") as stream:
            stream.write(",".join(LABELS_HEADER) + "\n")
            for (X, Y) in sorted(labels, key=lambda k: (k[1], k[0])):
                stream.write(f"{X},{Y},{labels[(X, Y)].value}\n")


def label_counts(labels: PatchLabels) -> Dict[str, int]:
    counts = {label.value: 0 for label in PatchLabel}
    for label in labels.values():
        counts[label.value] += 1
    return counts


descriptor_store = DescriptorStore()
