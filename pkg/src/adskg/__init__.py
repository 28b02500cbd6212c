"""Wave kernels on asymptotically AdS slabs: rays, modes, propagators,
boundary data, and wavefront diagnostics.

Submodules are loaded lazily so that the command-line layer can export
thread-count settings before numpy initializes.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "bchar",
    "bessel",
    "binio",
    "cli",
    "geometry",
    "holography",
    "microlocal",
    "propagators",
    "spectral",
)

__all__ = ["__version__", *_SUBMODULES]


def __getattr__(name: str):
    if name in _SUBMODULES:
        module = import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
