import pytest

from deltanet.engine import available_backends


@pytest.fixture(params=available_backends())
def backend(request):
    """Run the test once per importable engine core."""
    return request.param
