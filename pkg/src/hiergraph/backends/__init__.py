"""Pluggable generators for templates, communities and cross edges."""

from hiergraph.backends.base import GeneratorBackend, MaskViolation, PairMask, conditioning_fidelity
from hiergraph.backends.empirical import EmpiricalBackend, sample_h1_empirical
from hiergraph.backends.statistical import (
    ClassConditionedModel,
    StatisticalBackend,
    adjust_majority,
    fit_statistical,
    model_from_kv,
    read_model_text,
)
from hiergraph.errors import ConfigError

BACKENDS = {"statistical": StatisticalBackend, "empirical": EmpiricalBackend}


def make_backend(name: str, **options) -> GeneratorBackend:
    try:
        cls = BACKENDS[name]
    except KeyError:
        raise ConfigError(f"unknown backend {name!r}; choose from {sorted(BACKENDS)}") from None
    return cls(**options)


def load_backend(path) -> GeneratorBackend:
    """Inverse of ``backend.save(path)``."""
    from hiergraph.hierarchy import load_dataset

    kv = read_model_text(path)
    name = kv.get("backend")
    eps = float(kv.get("edge_epsilon", 1.0))
    if name == "statistical":
        return StatisticalBackend(model_from_kv(kv), edge_epsilon=eps,
                                  count_mode=kv.get("count_mode", "empirical"))
    if name == "empirical":
        ds_path = kv["dataset"]
        return EmpiricalBackend(load_dataset(ds_path), rewire_fraction=float(kv["rewire_fraction"]),
                                edge_epsilon=eps, dataset_path=ds_path)
    raise ConfigError(f"model file names unknown backend {name!r}")


__all__ = [
    "BACKENDS",
    "ClassConditionedModel",
    "EmpiricalBackend",
    "GeneratorBackend",
    "MaskViolation",
    "PairMask",
    "StatisticalBackend",
    "adjust_majority",
    "conditioning_fidelity",
    "fit_statistical",
    "load_backend",
    "make_backend",
    "sample_h1_empirical",
]
