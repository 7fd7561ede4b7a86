"""Backend selection for the HMM inner loops.

The compiled extension is preferred when it was built; the numpy fallback
is always available. Set WEAKLAB_KERNEL=python (or =c) to force a backend,
e.g. for the benchmark in benchmarks/bench_hmm.py.
"""

import os

_forced = os.environ.get("WEAKLAB_KERNEL", "").lower()

if _forced in ("py", "python"):
    from . import _kernels_py as _impl

    BACKEND = "python"
elif _forced in ("", "c"):
    try:
        from . import _kernels_c as _impl

        BACKEND = "c"
    except ImportError:
        if _forced == "c":
            raise
        from . import _kernels_py as _impl

        BACKEND = "python"
else:
    raise ValueError(f"WEAKLAB_KERNEL must be 'c' or 'python', got {_forced!r}")

forward = _impl.forward
backward = _impl.backward
transition_counts = _impl.transition_counts
viterbi_path = _impl.viterbi_path
