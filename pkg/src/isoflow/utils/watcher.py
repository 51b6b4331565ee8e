import hashlib
import logging
import threading
import time
from pathlib import Path
from typing import Callable, Optional

from watchdog.events import FileSystemEvent, FileSystemEventHandler
from watchdog.observers import Observer

logger = logging.getLogger(__name__)


def _digest(path: Path) -> Optional[str]:
    try:
        return hashlib.sha1(path.read_bytes()).hexdigest()
    except OSError:
        return None


class ConfigUpdateHandler(FileSystemEventHandler):
    """
    Re-runs an experiment when its JSON config is saved.

    Editors save either in place (modified) or by renaming a temporary file
    over the target (moved/created); all three count as a save. A save is
    dropped when it falls inside the debounce window or leaves the file's
    bytes unchanged. Saves arriving while a run is in progress collapse into
    one follow-up run.
    """

    def __init__(self, target_file: str, callback: Callable[[str], None], debounce_seconds: float = 0.5):
        self.target = Path(target_file).resolve()
        self.target_file = str(self.target)
        self.callback = callback
        self.debounce_seconds = debounce_seconds
        self.last_triggered = 0.0
        self.last_digest = _digest(self.target)
        self._running = threading.Lock()
        self._pending = False

    def _is_target(self, path) -> bool:
        return bool(path) and Path(path).resolve() == self.target

    def on_modified(self, event: FileSystemEvent):
        if not event.is_directory and self._is_target(event.src_path):
            self._saved()

    def on_created(self, event: FileSystemEvent):
        self.on_modified(event)

    def on_moved(self, event: FileSystemEvent):
        if not event.is_directory and self._is_target(getattr(event, "dest_path", "")):
            self._saved()

    def _saved(self):
        now = time.monotonic()
        if now - self.last_triggered <= self.debounce_seconds:
            return
        digest = _digest(self.target)
        if digest is None or digest == self.last_digest:
            logger.debug("ignoring save of %s: content unchanged", self.target.name)
            return
        self.last_triggered = now
        self.last_digest = digest

        if not self._running.acquire(blocking=False):
            self._pending = True
            logger.info("%s saved during a run; queued one rerun", self.target.name)
            return
        try:
            while True:
                self._pending = False
                self.callback(self.target_file)
                if not self._pending:
                    break
        finally:
            self._running.release()


class ConfigWatcher:
    """Owns the watchdog observer for one config file; restartable after stop."""

    def __init__(self):
        self.observer: Optional[Observer] = None
        self.handler: Optional[ConfigUpdateHandler] = None

    def start_watching(self, file_path: str, callback: Callable[[str], None]):
        path = Path(file_path).resolve()
        if not path.exists():
            raise FileNotFoundError(f"Cannot watch non-existent config: {path}")

        self.stop_watching()
        self.handler = ConfigUpdateHandler(str(path), callback)
        self.observer = Observer()
        self.observer.schedule(self.handler, str(path.parent), recursive=False)
        self.observer.start()
        logger.info("watching %s", path)

    def stop_watching(self):
        if self.observer is not None and self.observer.is_alive():
            self.observer.stop()
            self.observer.join()
        self.observer = None
