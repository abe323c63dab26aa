import pytest

import volseg


@pytest.fixture(params=volseg.available_backends())
def backend(request):
    """Run a test under every available kernel backend."""
    previous = volseg.get_backend().name
    volseg.set_backend(request.param)
    yield request.param
    volseg.set_backend(previous)
