"""Backend selection: compiled stream core when available, pure Python otherwise.

Set EXACTCHAIN_FORCE_PY=1 to force the Python twin (used by the benchmark and
by the equivalence tests).
"""

import os

if os.environ.get("EXACTCHAIN_FORCE_PY") == "1":
    from . import _core_py as core

    COMPILED = False
else:
    try:
        from . import _core as core  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        from . import _core_py as core

        COMPILED = False

mix64 = core.mix64
derive_key = core.derive_key
uniform_at = core.uniform_at
uniforms = core.uniforms
y_fill = core.y_fill
