"""
ConfigWatcher against a real file system observer.
"""
import threading
import time
from types import SimpleNamespace

import pytest

from isoflow.utils.watcher import ConfigUpdateHandler, ConfigWatcher


def test_save_triggers_callback(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text('{"T": 0.1}')
    fired = threading.Event()
    seen = []

    def on_save(p):
        seen.append(p)
        fired.set()

    watcher = ConfigWatcher()
    watcher.start_watching(str(path), on_save)
    try:
        time.sleep(0.5)
        path.write_text('{"T": 0.2}')
        assert fired.wait(10.0)
    finally:
        watcher.stop_watching()
    assert seen[0] == str(path.resolve())


def test_missing_file_rejected(tmp_path):
    with pytest.raises(FileNotFoundError):
        ConfigWatcher().start_watching(str(tmp_path / "none.json"), lambda p: None)


def _event(path, is_directory=False, dest=""):
    return SimpleNamespace(is_directory=is_directory, src_path=str(path), dest_path=str(dest))


def test_other_files_and_bursts_are_ignored(tmp_path):
    target = tmp_path / "exp.json"
    target.write_text('{"T": 0.1}')
    calls = []
    handler = ConfigUpdateHandler(str(target), calls.append)

    handler.on_modified(_event(tmp_path / "other.json"))
    handler.on_modified(_event(target, is_directory=True))
    assert calls == []

    target.write_text('{"T": 0.2}')
    handler.on_modified(_event(target))
    handler.on_modified(_event(target))
    assert len(calls) == 1


def test_unchanged_content_is_ignored(tmp_path):
    target = tmp_path / "exp.json"
    target.write_text('{"T": 0.1}')
    calls = []
    handler = ConfigUpdateHandler(str(target), calls.append, debounce_seconds=0.0)

    handler.on_modified(_event(target))
    assert calls == []
    target.write_text('{"T": 0.3}')
    handler.on_modified(_event(target))
    assert calls == [str(target.resolve())]


def test_atomic_rename_counts_as_save(tmp_path):
    target = tmp_path / "exp.json"
    target.write_text('{"T": 0.1}')
    calls = []
    handler = ConfigUpdateHandler(str(target), calls.append, debounce_seconds=0.0)

    tmp = tmp_path / ".exp.json.swp"
    tmp.write_text('{"T": 0.4}')
    tmp.replace(target)
    handler.on_moved(_event(tmp, dest=target))
    assert len(calls) == 1


def test_saves_during_a_run_collapse(tmp_path):
    target = tmp_path / "exp.json"
    target.write_text('{"T": 0.1}')
    calls = []

    def slow_run(path):
        calls.append(path)
        if len(calls) == 1:
            # two saves land while the first run is still going
            for value in (0.5, 0.6):
                target.write_text(f'{{"T": {value}}}')
                handler.on_modified(_event(target))

    handler = ConfigUpdateHandler(str(target), slow_run, debounce_seconds=0.0)
    target.write_text('{"T": 0.2}')
    handler.on_modified(_event(target))
    assert len(calls) == 2


def test_stop_without_start():
    ConfigWatcher().stop_watching()


def test_restart_after_stop(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text("{}")
    watcher = ConfigWatcher()
    watcher.start_watching(str(path), lambda p: None)
    watcher.stop_watching()
    watcher.start_watching(str(path), lambda p: None)
    try:
        assert watcher.observer.is_alive()
    finally:
        watcher.stop_watching()
