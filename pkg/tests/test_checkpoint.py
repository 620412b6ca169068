import logging

import numpy as np
import pytest

from lcnn_gan_lab import (
    Activation,
    AdamState,
    CheckpointFormatError,
    LayerSpec,
    Rng,
    init_network,
    load_checkpoint,
    load_network,
    power_iterate,
    save_checkpoint,
    save_network,
)

logging.basicConfig(level=logging.INFO, format="%(name)s (%(levelname)s): %(message)s")
logging.getLogger("lcnn_gan_lab").setLevel(10)

G_SPEC = [LayerSpec(size=6, activation=Activation.RELU), LayerSpec(size=2)]
D_SPEC = [
    LayerSpec(size=5, activation=Activation.LEAKY_RELU, alpha=0.3, spectral_norm=True),
    LayerSpec(size=1, spectral_norm=True),
]


def _pair():
    g = init_network(3, G_SPEC, Rng(1), "scaled_normal")
    d = init_network(2, D_SPEC, Rng(2), "scaled_normal")
    power_iterate(d, 3)
    return g, d


def _write(path, g, d, *, adam=True, step=17):
    rng = Rng(5)
    rng.uniform(9)
    states = [None, None]
    if adam:
        states = []
        for net in (g, d):
            state = AdamState.zeros_like(list(net.parameters()))
            for m in state.m:
                m += np.pi
            state.t = 4
            states.append(state)
    save_checkpoint(
        path,
        generator=g,
        discriminator=d,
        g_optimizer=states[0],
        d_optimizer=states[1],
        step=step,
        rng=rng,
    )
    return rng, states


def test_network_round_trip_is_exact(tmp_path):
    _, d = _pair()
    path = tmp_path / "d.txt"
    save_network(d, path)
    loaded = load_network(path)
    assert loaded.same_parameters(d)
    assert loaded.layers[0].activation is Activation.LEAKY_RELU
    assert loaded.layers[0].alpha == 0.3
    np.testing.assert_array_equal(loaded.layers[1].u, d.layers[1].u)


def test_training_checkpoint_round_trip(tmp_path):
    g, d = _pair()
    path = tmp_path / "cp.txt"
    rng, states = _write(path, g, d)
    cp = load_checkpoint(path)
    assert cp.step == 17
    assert cp.generator.same_parameters(g)
    assert cp.discriminator.same_parameters(d)
    assert (cp.rng.seed, cp.rng.state) == (rng.seed, rng.state)
    assert cp.g_optimizer is not None and cp.g_optimizer.same_as(states[0])
    assert cp.d_optimizer is not None and cp.d_optimizer.same_as(states[1])
    assert not path.with_name("cp.txt.tmp").exists()


def test_sgd_checkpoint_has_no_optimizer_state(tmp_path):
    g, d = _pair()
    path = tmp_path / "cp.txt"
    _write(path, g, d, adam=False)
    cp = load_checkpoint(path)
    assert cp.g_optimizer is None
    assert cp.d_optimizer is None


def test_every_truncation_is_rejected(tmp_path):
    g, d = _pair()
    path = tmp_path / "cp.txt"
    _write(path, g, d)
    lines = path.read_text().splitlines()
    target = tmp_path / "cut.txt"
    for keep in range(len(lines)):
        target.write_text("\n".join(lines[:keep]) + "\n")
        with pytest.raises(CheckpointFormatError):
            load_checkpoint(target)


@pytest.mark.parametrize(
    ("old", "new"),
    [
        ("lcnn-gan-checkpoint 1", "lcnn-gan-checkpoint 9"),
        ("step 17", "step -1"),
        ("layer 6 3 relu", "layer 6 4 relu"),
        ("layer 6 3 relu", "layer 6 3 swish"),
        ("optimizer generator adam", "optimizer generator rmsprop"),
        ("end", "fin"),
    ],
)
def test_corrupted_fields_are_rejected(tmp_path, old, new):
    g, d = _pair()
    path = tmp_path / "cp.txt"
    _write(path, g, d)
    text = path.read_text()
    assert old in text
    path.write_text(text.replace(old, new, 1))
    with pytest.raises(CheckpointFormatError) as err:
        load_checkpoint(path)
    assert err.value.line is not None


def test_non_finite_value_is_rejected(tmp_path):
    g, d = _pair()
    path = tmp_path / "cp.txt"
    _write(path, g, d)
    lines = path.read_text().splitlines()
    first_value = lines.index("values 38") + 1
    lines[first_value] = "nan"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)


def test_binary_file_is_rejected(tmp_path):
    path = tmp_path / "cp.bin"
    path.write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
