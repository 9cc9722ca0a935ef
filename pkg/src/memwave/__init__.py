"""Spectral toolkit for a torus wave equation with second-order memory.

Subpackages cover the spectrum of the memory operator and its moving-frame
shift, gap statistics, the dual family of complex exponentials, moment-method
control synthesis, forward/adjoint simulation with terminal certification,
and a localized quasi-solution used to probe non-propagating energy.

Submodules import lazily so the command-line front end can configure thread
environment variables before any numerical library loads.
"""

__version__ = "0.1.0"

_MODEL_EXPORTS = {
    "FourierField",
    "ModelParams",
    "StateTriple",
    "minimal_control_time",
    "sobolev_norm",
    "state_norm",
}

_SUBMODULES = {
    "model",
    "spectrum",
    "gaps",
    "biorthogonal",
    "moment_control",
    "simulator",
    "beam",
    "cli",
}

__all__ = sorted(_MODEL_EXPORTS | _SUBMODULES | {"__version__"})


def __getattr__(name: str):
    import importlib

    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    if name in _MODEL_EXPORTS:
        model = importlib.import_module(".model", __name__)
        return getattr(model, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
