"""Disk-backed project store with optimistic per-layer versioning.

One store serves one project directory. All mutation goes through the
store's lock (single writer); flush writes dirty layers atomically
(temp file + rename) so a crash never leaves a torn .ann file.
"""

from __future__ import annotations

import json
import os
import threading

from ..corpus import (
    Project,
    SpanAnnotation,
    atomic_write_text,
    layer_path,
    load_project,
    serialize_ann,
)
from ..errors import WeaklabError
from ..sources import WeakSource, dump_sources, load_sources


class VersionConflict(WeaklabError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"layer version is {expected}, request carried {got}")
        self.expected = expected
        self.got = got


class FlushError(WeaklabError):
    """Raised when some layer files could not be written; carries a report
    of what was and was not flushed."""

    def __init__(self, written: list[str], failed: list[tuple[str, str]]):
        super().__init__(
            f"flush wrote {len(written)} file(s), failed on {len(failed)}: "
            + "; ".join(f"{path} ({err})" for path, err in failed)
        )
        self.written = written
        self.failed = failed


class ProjectStore:
    def __init__(self, root: str, name: str | None = None):
        self.root = os.path.abspath(root)
        self.lock = threading.RLock()
        self.project: Project = load_project(self.root, name=name)
        self.sources: dict[str, WeakSource] = {}
        sources_file = os.path.join(self.root, "sources.json")
        if os.path.isfile(sources_file):
            self.sources = load_sources(sources_file)
        self._versions: dict[tuple[str, str], int] = {}
        self._dirty: set[tuple[str, str]] = set()

    # --- layers ------------------------------------------------------------

    def version(self, doc_id: str, layer: str) -> int:
        return self._versions.get((doc_id, layer), 0)

    def get_layer(self, doc_id: str, layer: str) -> tuple[int, list[SpanAnnotation]]:
        with self.lock:
            return self.version(doc_id, layer), list(self.project.layer(doc_id, layer))

    def put_layer(
        self,
        doc_id: str,
        layer: str,
        anns: list[SpanAnnotation],
        version: int,
    ) -> int:
        """Replace a layer under optimistic concurrency.

        The request must echo the current version. A replay (version one
        behind, identical content) is accepted without another write so
        retried requests stay idempotent.
        """
        with self.lock:
            current = self.version(doc_id, layer)
            if version != current:
                if version == current - 1 and list(
                    self.project.layer(doc_id, layer)
                ) == list(anns):
                    return current
                raise VersionConflict(current, version)
            self.project.set_layer(doc_id, layer, anns)
            self._versions[(doc_id, layer)] = current + 1
            self._dirty.add((doc_id, layer))
            return current + 1

    def write_layer(self, doc_id: str, layer: str, anns: list[SpanAnnotation]) -> int:
        """Engine-side layer replacement (source apply, denoise, bridge)."""
        with self.lock:
            self.project.set_layer(doc_id, layer, anns)
            new_version = self.version(doc_id, layer) + 1
            self._versions[(doc_id, layer)] = new_version
            self._dirty.add((doc_id, layer))
            return new_version

    def dirty_layers(self) -> set[tuple[str, str]]:
        with self.lock:
            return set(self._dirty)

    def flush(self) -> list[str]:
        """Serialize every dirty layer to disk; atomic per file.

        Concurrent flush calls serialize on the store lock; a second call
        after a successful first one writes nothing.
        """
        with self.lock:
            written: list[str] = []
            failed: list[tuple[str, str]] = []
            for doc_id, layer in sorted(self._dirty):
                path = layer_path(self.root, doc_id, layer)
                try:
                    atomic_write_text(
                        path, serialize_ann(self.project.layer(doc_id, layer))
                    )
                    written.append(path)
                    self._dirty.discard((doc_id, layer))
                except OSError as exc:
                    failed.append((path, str(exc)))
            if failed:
                raise FlushError(written, failed)
            return written

    # --- sources and labels --------------------------------------------------

    def add_source(self, source: WeakSource) -> None:
        with self.lock:
            if source.id in self.sources:
                raise ValueError(f"source id {source.id!r} already exists")
            self.sources[source.id] = source
            self._write_sources()

    def remove_source(self, source_id: str) -> None:
        with self.lock:
            if source_id not in self.sources:
                raise KeyError(source_id)
            del self.sources[source_id]
            self._write_sources()

    def _write_sources(self) -> None:
        atomic_write_text(
            os.path.join(self.root, "sources.json"), dump_sources(self.sources)
        )

    def add_model_labels(self, labels: set[str]) -> None:
        with self.lock:
            new = labels - self.project.known_labels()
            if not new:
                return
            self.project.model_labels.update(new)
            atomic_write_text(
                os.path.join(self.root, "labels.json"),
                json.dumps(
                    {
                        "labels": sorted(self.project.labels),
                        "model_labels": sorted(self.project.model_labels),
                    },
                    indent=2,
                )
                + "\n",
            )
