"""Compiled architectures against the straightforward per-node forward pass."""

import numpy as np
import pytest

from aggterm.architectures import (ArchConfig, CompiledModel,
                                   compile_architecture, init_weights,
                                   reference_forward)
from aggterm.errors import ConfigError
from aggterm.graphs import attach_features, sample_graph
from aggterm.graphs import DenseSchedule, ErModel, Uniform01
from aggterm.rng import stream
from aggterm.terms import free_vars
from conftest import rand_graph

KINDS = ("mean", "gcn", "gat", "gps", "gps_rw")


def make_config(kind, rng, classes=3, in_dim=4):
    layers = int(rng.integers(1, 4))
    hidden = int(rng.integers(3, 9))
    kwargs = {}
    if kind == "gps_rw":
        kwargs["rw_len"] = int(rng.integers(2, 6))
    if kind in ("mean", "gps", "gps_rw") and rng.random() < 0.4:
        kwargs["global_readout"] = True
    if layers >= 2 and rng.random() < 0.4:
        kwargs["skips"] = ((1, layers),)
    if rng.random() < 0.3:
        kwargs["activation"] = "sigmoid"
    return ArchConfig(kind=kind, layers=layers, hidden=hidden,
                      classes=classes, in_dim=in_dim, **kwargs)


@pytest.mark.parametrize("kind", KINDS)
def test_compiled_matches_reference(kind):
    rng = np.random.default_rng(sum(KINDS.index(kind) + ord(c) for c in kind))
    for trial in range(12):
        cfg = make_config(kind, rng)
        weights = init_weights(cfg, int(rng.integers(10**6)))
        model = compile_architecture(cfg, weights)
        g = rand_graph(rng, 24, cfg.in_dim,
                       ensure_isolated=(trial % 3 == 0))
        got = model.run(g)
        want = reference_forward(cfg, weights, g)
        assert np.max(np.abs(got - want)) < 1e-9, (kind, trial)


def test_output_is_distribution():
    rng = np.random.default_rng(91)
    cfg = make_config("mean", rng, classes=5)
    model = compile_architecture(cfg, init_weights(cfg, 3))
    g = rand_graph(rng, 30, cfg.in_dim)
    out = model.run(g)
    assert out.shape == (5,)
    assert np.all(out >= 0) and abs(out.sum() - 1.0) < 1e-9


def test_compiled_term_is_closed():
    rng = np.random.default_rng(92)
    for kind in KINDS:
        cfg = make_config(kind, rng)
        model = compile_architecture(cfg, init_weights(cfg, 1))
        assert free_vars(model.term) == ()
        assert isinstance(model, CompiledModel)


def test_full_output_width():
    cfg = ArchConfig(kind="mean", layers=2, hidden=6, classes=2, in_dim=3)
    model = compile_architecture(cfg, init_weights(cfg, 4))
    g = attach_features(sample_graph(ErModel(DenseSchedule(0.3)), 20,
                                     stream(93)), Uniform01(3), stream(94))
    assert model.run(g).shape == (2,)
    assert model.run(g, full=True).shape == (model.dim,)


def test_determinism_same_seed():
    cfg = ArchConfig(kind="gat", layers=2, hidden=5, classes=3, in_dim=2)
    a = compile_architecture(cfg, init_weights(cfg, 8))
    b = compile_architecture(cfg, init_weights(cfg, 8))
    rng = np.random.default_rng(95)
    g = rand_graph(rng, 15, 2)
    assert np.array_equal(a.run(g), b.run(g))


def test_layer_zero_skip_needs_matching_width():
    with pytest.raises(ConfigError):
        ArchConfig(kind="mean", layers=2, hidden=8, classes=3, in_dim=4,
                   skips=((0, 2),))
    # equal widths are fine
    cfg = ArchConfig(kind="mean", layers=2, hidden=4, classes=3, in_dim=4,
                     skips=((0, 2),))
    model = compile_architecture(cfg, init_weights(cfg, 0))
    rng = np.random.default_rng(96)
    g = rand_graph(rng, 12, 4)
    want = reference_forward(cfg, init_weights(cfg, 0), g)
    assert np.max(np.abs(model.run(g) - want)) < 1e-9


def test_gps_rw_needs_rw_len():
    with pytest.raises(ConfigError):
        ArchConfig(kind="gps_rw", layers=1, hidden=4, classes=2, in_dim=3)


def test_wrong_feature_width_rejected():
    cfg = ArchConfig(kind="mean", layers=1, hidden=4, classes=2, in_dim=3)
    model = compile_architecture(cfg, init_weights(cfg, 0))
    rng = np.random.default_rng(97)
    g = rand_graph(rng, 10, 2)
    with pytest.raises(ConfigError):
        model.run(g)
