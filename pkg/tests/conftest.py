import pytest

from waymemo.engine import available_backends

needs_compiled = pytest.mark.skipif(
    "compiled" not in available_backends(),
    reason="compiled engine not built",
)
