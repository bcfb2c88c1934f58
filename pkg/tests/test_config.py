import pydantic
import pytest

from prospect_drive.config import SEED_ENV, PipelineConfig, load_config
from prospect_drive.exceptions import ValidationError
from prospect_drive.models import LabelNoise, WeightingMode


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_ENV, raising=False)


def write(tmp_path, text):
    path = tmp_path / "pipeline.yaml"
    path.write_text(text)
    return path


def test_defaults():
    config = load_config()
    assert config == PipelineConfig()
    assert config.window == 10
    assert config.horizon == 30
    assert config.stop_offset == 3.0
    assert config.cpt.mode is WeightingMode.PAPER_EXACT
    assert config.synth.alpha == 0.9827 and config.synth.gamma == 0.6742


def test_yaml_overrides(tmp_path):
    path = write(
        tmp_path,
        "window: 12\nlimits:\n  a_min: -4.0\nsynth:\n  n_pairs: 7\n  label_noise: argmax\n"
        "cpt:\n  mode: rank_ordered\n",
    )
    config = load_config(path)
    assert config.window == 12
    assert config.limits.a_min == -4.0
    assert config.synth.n_pairs == 7
    assert config.synth.label_noise is LabelNoise.ARGMAX
    assert config.cpt.mode is WeightingMode.RANK_ORDERED
    assert config.horizon == 30


def test_top_level_seed_is_inherited(tmp_path):
    config = load_config(write(tmp_path, "seed: 9\nirl:\n  rng_seed: 2\n"))
    assert config.irl.rng_seed == 2
    assert config.synth.rng_seed == 9
    assert config.cpt.split_seed == 9


def test_environment_seed_wins(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "42")
    config = load_config(write(tmp_path, "seed: 9\nirl:\n  rng_seed: 2\n"))
    assert config.seed == 42
    assert (config.irl.rng_seed, config.synth.rng_seed, config.cpt.split_seed) == (42, 42, 42)


def test_bad_environment_seed(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "soon")
    with pytest.raises(ValidationError):
        load_config()


@pytest.mark.parametrize("text", ["window: [1, 2\n", "- just\n- a list\n"])
def test_unreadable_files(tmp_path, text):
    with pytest.raises(ValidationError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        load_config(tmp_path / "absent.yaml")


def test_out_of_range_value(tmp_path):
    with pytest.raises(pydantic.ValidationError):
        load_config(write(tmp_path, "cpt:\n  test_fraction: 1.5\n"))
