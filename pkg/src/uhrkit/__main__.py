"""Support `python -m uhrkit`."""

from .cli import entrypoint

entrypoint()
