import logging
from pathlib import Path
from typing import Optional

from rich.logging import RichHandler

FILE_FORMAT = "[%(asctime)s] %(levelname)s %(name)s: %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Console logging through rich, plus a plain timestamped log file when
    `log_file` is given. Safe to call repeatedly.
    """
    root = logging.getLogger("isoflow")
    console_level = getattr(logging, str(level).upper(), logging.INFO)
    root.setLevel(logging.DEBUG if log_file else console_level)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    console = RichHandler(rich_tracebacks=False, show_path=False, markup=False)
    console.setFormatter(logging.Formatter("%(message)s"))
    console.setLevel(console_level)
    root.addHandler(console)

    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        file_handler.setLevel(logging.DEBUG)
        root.addHandler(file_handler)

    root.propagate = False
    return root
