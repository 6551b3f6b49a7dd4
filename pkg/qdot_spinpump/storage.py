"""
Capa de persistencia de resultados.
Escribe archivos de salida de forma atómica (archivo temporal + rename).
"""

import os
import tempfile
from pathlib import Path
from typing import Optional

from qdot_spinpump.logger import get_logger

logger = get_logger("storage")


def atomic_write_text(path: Path, text: str) -> Path:
    """
    Escribe `text` en `path` sin dejar archivos a medio escribir.

    Args:
        path: Ruta destino
        text: Contenido (UTF-8, fin de línea '\\n')

    Returns:
        Ruta escrita
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


class OutputStore:
    """Directorio de salida de una corrida"""

    def __init__(self, root: Optional[Path] = None):
        """
        Args:
            root: Directorio de salida (se crea si no existe)
        """
        self.root = Path(root) if root is not None else Path("out")
        self.root.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []

    def path(self, name: str) -> Path:
        return self.root / name

    def write_text(self, name: str, text: str) -> Path:
        path = atomic_write_text(self.path(name), text)
        self.written.append(path)
        logger.debug(f"Escrito {path}")
        return path

    def reserve(self, name: str) -> Path:
        """Ruta temporal para escritores externos (figuras); confirmar con commit()"""
        target = self.path(name)
        return target.with_name(f".{target.name}.tmp")

    def commit(self, tmp_path: Path, name: str) -> Path:
        path = self.path(name)
        os.replace(tmp_path, path)
        self.written.append(path)
        logger.debug(f"Escrito {path}")
        return path
