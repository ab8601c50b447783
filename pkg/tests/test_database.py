import pytest

from tiltlab.database import RunLedger, create_table, is_table_exists, read_table


def test_create_table(tmp_path):
    db = tmp_path / 'ledger.db'
    assert not is_table_exists(db, 'verify')
    create_table(db, 'verify')
    assert is_table_exists(db, 'verify')
    assert len(read_table(db, 'verify')) == 0


def test_invalid_table_name(tmp_path):
    with pytest.raises(ValueError):
        create_table(tmp_path / 'ledger.db', 'drop table; --')


def test_ledger_detects_changed_output(tmp_path):
    out = tmp_path / 'out'
    out.mkdir()
    path = out / 'draws.csv'

    path.write_text('draw\n1\n')
    ledger = RunLedger(out, 'gauss-sup')
    assert ledger.table_name == 'gauss_sup'
    assert ledger.record([ path ], 'gauss-sup', 1)

    # 同じ内容の再実行
    assert RunLedger(out, 'gauss-sup').record([ path ], 'gauss-sup', 1)

    # 別のシードは比較しない
    path.write_text('draw\n2\n')
    assert RunLedger(out, 'gauss-sup').record([ path ], 'gauss-sup', 2)

    # 同じシードで内容が変わった
    assert not RunLedger(out, 'gauss-sup').record([ path ], 'gauss-sup', 1)

    history = ledger.history()
    assert set(history['path']) == { 'draws.csv' }
    assert len(history) == 3
