"""
Sistema de logging con rotación y niveles configurables.
Los mensajes van a stderr; stdout y los archivos de resultados quedan limpios.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

from qdot_spinpump.config import Config

ROOT_LOGGER = "qdot_spinpump"

_FORMATTER = logging.Formatter(
    fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)


def setup_logger(
    name: str = ROOT_LOGGER,
    level: Optional[str] = None,
    log_file: Optional[Path] = None
) -> logging.Logger:
    """
    Configura y retorna el logger del paquete.

    Llamadas repetidas solo ajustan el nivel y agregan el archivo si falta,
    así la CLI puede reconfigurar después de leer el RunConfig.

    Args:
        name: Nombre del logger
        level: Nivel de log (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Archivo rotativo opcional (usa Config.LOG_FILE si no se especifica)

    Returns:
        Logger configurado
    """
    logger = logging.getLogger(name)
    log_level = getattr(logging, (level or Config.LOG_LEVEL).upper(), logging.INFO)
    logger.setLevel(log_level)
    logger.propagate = False

    if not any(getattr(h, "_qdot_console", False) for h in logger.handlers):
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(_FORMATTER)
        console_handler._qdot_console = True
        logger.addHandler(console_handler)

    for handler in logger.handlers:
        handler.setLevel(log_level)

    if log_file is None:
        log_file = Config.get_log_path()

    if log_file is not None:
        log_file = Path(log_file)
        already = any(
            isinstance(h, RotatingFileHandler) and Path(h.baseFilename) == log_file.resolve()
            for h in logger.handlers
        )
        if not already:
            log_file.parent.mkdir(parents=True, exist_ok=True)
            # Rotación: 10 MB por archivo, mantener 5 archivos
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=10 * 1024 * 1024,
                backupCount=5,
                encoding='utf-8'
            )
            file_handler.setLevel(log_level)
            file_handler.setFormatter(_FORMATTER)
            logger.addHandler(file_handler)

    return logger


# Logger por defecto del paquete
logger = setup_logger()


def get_logger(name: str) -> logging.Logger:
    """
    Obtiene un logger hijo del logger principal.

    Args:
        name: Nombre del logger hijo

    Returns:
        Logger configurado
    """
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
