import json

import pytest

from tiltlab.config import DEFAULT_TOLERANCES, ExperimentConfig, check_unique_ids, tolerance
from tiltlab.dist import Beta


def _config(**kwargs):
    spec = { 'id': 'beta', 'model': { 'family': 'Beta', 'params': { 'a': 2, 'b': 5 } },
             'schedule': [ [ 100, 10.0 ], [ 1000, 20.0 ] ], 'seed': 3 }
    spec.update(kwargs)
    return ExperimentConfig.from_dict(spec)


def test_build_model_and_schedule():
    config = _config()
    assert config.build_model() == Beta(2.0, 5.0)
    assert config.schedule == [ (100, 10.0), (1000, 20.0) ]


def test_flags_override_file(tmp_path):
    path = _config().save(tmp_path)
    assert path.name == 'beta_config.json'
    loaded = ExperimentConfig.load(path)
    assert loaded == _config()

    overridden = loaded.override(seed=9, output_dir=None)
    assert overridden.seed == 9
    assert overridden.output_dir == loaded.output_dir
    with pytest.raises(KeyError):
        loaded.override(colour='red')


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ExperimentConfig.load(tmp_path / 'missing.json')


@pytest.mark.parametrize('seed', [ -1, 1.5, None, True ])
def test_seed_must_be_explicit(seed):
    with pytest.raises(ValueError):
        _config(seed=seed)


def test_tolerances():
    config = _config(tolerances={ 'accurate_ks': 0.05 })
    assert config.tolerance('accurate_ks') == 0.05
    assert config.tolerance('regime_ratio') == DEFAULT_TOLERANCES['regime_ratio']
    assert tolerance('accurate_ks', { 'accurate_ks': 0.1 }) == 0.1
    with pytest.raises(KeyError):
        _config(tolerances={ 'nonsense': 1.0 })


def test_required_keys():
    with pytest.raises(KeyError):
        ExperimentConfig.from_dict({ 'id': 'x' })


def test_unique_ids():
    with pytest.raises(ValueError):
        check_unique_ids([ _config(), _config() ])
    check_unique_ids([ _config(), _config(id='other') ])


def test_config_json_is_stable():
    assert json.loads(_config().dumps())['schedule'] == [ [ 100, 10.0 ], [ 1000, 20.0 ] ]
