"""fixturegen: minimal-basis RHF engine producing FCIDUMP fixtures."""

__version__ = "0.1.0"
