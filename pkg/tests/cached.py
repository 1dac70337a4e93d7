"""Catalog specs and pipeline reports shared across test modules (computed once)."""
import functools

from horizonkit.catalog import load


@functools.lru_cache(maxsize=None)
def spec(name):
    return load(name)


@functools.lru_cache(maxsize=None)
def frame_report(name):
    from horizonkit.frame import frame_audit

    return frame_audit(spec(name))


@functools.lru_cache(maxsize=None)
def jet_report(name, order, candidate=None):
    from horizonkit.jets import jet_audit

    return jet_audit(spec(name), order, candidate=candidate)
