"""Background jobs for long engine calls (source application, denoising).

Each job runs on its own thread and can be cancelled cooperatively: the
job function receives a threading.Event and checks it between documents.
"""

from __future__ import annotations

import threading
import traceback
from dataclasses import dataclass, field

PENDING = "pending"
RUNNING = "running"
DONE = "done"
FAILED = "failed"
CANCELLED = "cancelled"


@dataclass
class Job:
    id: str
    kind: str
    status: str = PENDING
    result: object = None
    error: dict | None = None
    cancel_event: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "status": self.status,
            "result": self.result,
            "error": self.error,
        }


class JobCancelled(Exception):
    pass


class JobRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._counter = 0

    def submit(self, kind: str, fn) -> Job:
        """Run fn(cancel_event) on a worker thread; returns immediately."""
        with self._lock:
            self._counter += 1
            job = Job(id=f"job-{self._counter}", kind=kind)
            self._jobs[job.id] = job

        def run():
            job.status = RUNNING
            try:
                job.result = fn(job.cancel_event)
                job.status = CANCELLED if job.cancel_event.is_set() else DONE
            except JobCancelled:
                job.status = CANCELLED
            except Exception as exc:  # surfaced via the status endpoint
                job.error = {
                    "error": type(exc).__name__,
                    "message": str(exc),
                    "trace": traceback.format_exc(limit=5),
                }
                job.status = FAILED

        job.thread = threading.Thread(target=run, daemon=True)
        job.thread.start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def cancel(self, job_id: str) -> Job | None:
        with self._lock:
            job = self._jobs.get(job_id)
        if job is not None:
            job.cancel_event.set()
        return job

    def wait(self, job_id: str, timeout: float = 30.0) -> Job | None:
        job = self.get(job_id)
        if job is not None and job.thread is not None:
            job.thread.join(timeout)
        return job
