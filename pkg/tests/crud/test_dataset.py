# tests/crud/test_dataset.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.crud.dataset import DatasetRepository
from app.errors import ArtifactError
from app.schemas.dataset import DatasetHeader, DatasetRecord
from app.schemas.geometry import Scenario, ScenarioParams


def make_records(count=2):
    gen = np.random.default_rng(0)
    return [
        DatasetRecord(attempt=3 * i, scenario=Scenario(width=10.0, height=10.0, seed=i),
                      trajectory=gen.normal(size=(4, 5)), features=gen.normal(size=3))
        for i in range(count)
    ]


def header(count=2):
    return DatasetHeader(seed=1, kind="dense-obstacles", count=count, path_nodes=4, horizon=2, feature_dim=3,
                         params=ScenarioParams())


def test_round_trip_keeps_f32_values(tmp_path):
    records = make_records()
    path = DatasetRepository().save(tmp_path / "d.bin", header(), records)
    dataset = DatasetRepository().load(path)
    assert dataset.header == header()
    assert [e.attempt for e in dataset.index] == [0, 3]
    assert dataset.trajectories.shape == (2, 4, 5)
    for loaded, record in zip(dataset.records(), records):
        assert_allclose(loaded.trajectory, record.trajectory.astype(np.float32))
        assert_allclose(loaded.features, record.features.astype(np.float32))
        assert loaded.scenario == record.scenario


def test_count_mismatch_is_refused(tmp_path):
    with pytest.raises(ArtifactError, match="announces 3"):
        DatasetRepository().save(tmp_path / "d.bin", header(3), make_records(2))


def test_truncated_binary_section(tmp_path):
    path = DatasetRepository().save(tmp_path / "d.bin", header(), make_records())
    data = path.read_bytes()
    path.write_bytes(data[:-4])
    with pytest.raises(ArtifactError, match="binary section") as info:
        DatasetRepository().load(path)
    assert info.value.offset == len(data) - 4


def test_corrupt_index_line_is_located(tmp_path):
    path = DatasetRepository().save(tmp_path / "d.bin", header(), make_records())
    data = path.read_bytes()
    first = data.index(b"\n") + 1
    broken = data[:first] + b"#" + data[first + 1:]
    path.write_bytes(broken)
    with pytest.raises(ArtifactError, match="index line 0") as info:
        DatasetRepository().load(path)
    assert info.value.offset == first
