import hashlib
import io
import json
import math

import numpy as np
import pytest

from dataclasses import dataclass

from tiltlab.utils import JsonMixin, get_unique_name, hash_md5, timestamp_from_unique_name, to_builtin


@dataclass
class _Record(JsonMixin):
    value: float

    def as_dict(self):
        return { 'value': self.value, 'array': np.arange(3), 'flag': np.bool_(True) }

    def json_name(self):
        return 'record'


def test_hash_md5(tmp_path):
    path = tmp_path / 'a.txt'
    path.write_bytes(b'abc')
    assert hash_md5(path) == '900150983cd24fb0d6963f7d28e17f72'


def test_hash_md5_reads_in_chunks(tmp_path, monkeypatch):
    monkeypatch.setattr('tiltlab.utils.HASH_CHUNK', 7)
    path = tmp_path / 'b.bin'
    data = bytes(range(256)) * 3
    path.write_bytes(data)
    assert hash_md5(path) == hashlib.md5(data).hexdigest()


def test_hash_md5_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        hash_md5(tmp_path / 'missing.txt')


def test_unique_name_roundtrips_timestamp():
    tag = get_unique_name()
    assert math.isfinite(timestamp_from_unique_name(tag))
    assert get_unique_name() != tag


def test_unique_name_rejects_bad_format():
    with pytest.raises(TypeError):
        get_unique_name(dateformat=3)


def test_to_builtin_converts_numpy_and_nonfinite():
    out = to_builtin({ 'a': np.float64(1.5), 'b': np.int64(2), 'c': [ math.inf, -math.inf, math.nan ] })
    assert out == { 'a': 1.5, 'b': 2, 'c': [ 'inf', '-inf', 'nan' ] }
    assert type(out['b']) is int


def test_json_mixin_dumps_and_saves(tmp_path):
    rec = _Record(0.25)
    data = json.loads(rec.dumps())
    assert data == { 'value': 0.25, 'array': [ 0, 1, 2 ], 'flag': True }

    fp = io.StringIO()
    rec.dump(fp)
    assert json.loads(fp.getvalue()) == data

    path = rec.save(tmp_path / 'nested')
    assert path.name == 'record.json'
    raw = path.read_bytes()
    assert raw.endswith(b'\n') and b'\r' not in raw
    # 同じ内容なら同じバイト列
    assert rec.save(tmp_path / 'other').read_bytes() == raw
