"""Test the calibration manifest entries."""

import math
from datetime import datetime

import pytest
from attrs.exceptions import FrozenInstanceError

from seqsense.calibration import CalibrationResult
from seqsense.detectors import GaussianDetectorParams, ModelConstants
from seqsense.entry import CalibrationEntry, ReadOnlyCalibrationEntry, point_slug
from seqsense.fusion import SchemeConfig, SprtThresholds
from seqsense.montecarlo import ErrorEstimate

GAUSSIAN = GaussianDetectorParams(rho2=1.0, sigma_w2=1.0)


def _result(**kwargs):
    params = dict(
        scheme=SchemeConfig("rlt", bits=2, period=4, delta=1.5, phi=8.0),
        thresholds=SprtThresholds(3.9, 4.1),
        constants=ModelConstants(kl_h0=0.19, kl_h1=0.31, phi=8.0),
        achieved_alpha=ErrorEstimate(0.0101, 0.0004, 10_000),
        achieved_beta=ErrorEstimate(0.0098, 0.0005, 9_990, 10),
        message_rate=(0.4, 0.5),
        mean_delays=(12.5, 10.25),
        target_alpha=0.01,
        target_beta=0.01,
    )
    params.update(kwargs)
    return CalibrationResult(**params)


def test_point_slug():
    """Test that slugs are deterministic and separate configuration points."""
    scheme = SchemeConfig("rlt", bits=1, period=4)
    slug = point_slug(scheme, [GAUSSIAN] * 2, (1e-2, 1e-2), seed=0)

    assert slug == point_slug(scheme, [GAUSSIAN] * 2, (1e-2, 1e-2), seed=0)
    assert slug.startswith("rlt-1bit-t4-k2-")
    assert slug != point_slug(scheme, [GAUSSIAN] * 2, (1e-3, 1e-2), seed=0)
    assert slug != point_slug(scheme, [GAUSSIAN] * 2, (1e-2, 1e-2), seed=1)
    assert slug != point_slug(scheme, [GAUSSIAN] * 3, (1e-2, 1e-2), seed=0)
    assert slug != point_slug(SchemeConfig("rlt", bits=2, period=4), [GAUSSIAN] * 2, (1e-2, 1e-2))
    assert slug != point_slug(scheme, [GAUSSIAN] * 2, delays=(10.0, 10.0))


def test_point_slug_ignores_resolved_parameters():
    """Test that resolving ``delta`` and ``phi`` keeps the slug."""
    bare = SchemeConfig("rlt", bits=1, period=4)
    resolved = SchemeConfig("rlt", bits=1, period=4, delta=1.2, phi=7.0)

    assert point_slug(bare, [GAUSSIAN], (0.1, 0.1)) == point_slug(resolved, [GAUSSIAN], (0.1, 0.1))


def test_point_slug_needs_targets():
    """Test rejecting a point without targets."""
    with pytest.raises(ValueError):
        point_slug(SchemeConfig("centralized"), [GAUSSIAN])


def test_entry_from_result():
    """Test recording a calibration result."""
    entry = CalibrationEntry.from_result(_result(), [GAUSSIAN] * 2, seed=3)

    assert entry.slug == point_slug(
        SchemeConfig("rlt", bits=2, period=4), [GAUSSIAN] * 2, (0.01, 0.01), seed=3
    )
    assert entry.scheme == "rlt"
    assert entry.k_users == 2
    assert entry.a == 3.9
    assert entry.se_beta == 0.0005
    assert entry.rate_h1 == 0.5
    assert entry.delay_h0 == 12.5
    assert entry.target_delays is None
    assert entry.scheme_config == SchemeConfig("rlt", 2, 4, 1.5, 8.0)
    assert entry.thresholds == SprtThresholds(3.9, 4.1)
    assert entry.constants == ModelConstants(0.19, 0.31, 8.0)
    assert entry.su_models() == [GAUSSIAN] * 2


def test_entry_from_delay_result():
    """Test recording a delay-matched calibration."""
    result = _result(target_alpha=math.nan, target_beta=math.nan, target_delays=(12.0, 10.0))
    entry = CalibrationEntry.from_result(result, [GAUSSIAN], seed=0)

    assert entry.target_delays == [12.0, 10.0]
    assert "delays-12-10" in entry.slug
    assert math.isnan(entry.target_alpha)


def test_entry_to_dict():
    """Test serializing an entry."""
    entry = CalibrationEntry.from_result(_result(), [GAUSSIAN], seed=0, slug="point")
    entry.created_at = datetime(2024, 5, 1, 9, 30, 15, 123)
    data = entry.to_dict()

    assert data["slug"] == "point"
    assert data["created_at"] == "2024-05-01T09:30:15"
    assert data["models"] == [{"kind": "gaussian", "rho2": 1.0, "sigma_w2": 1.0}]
    assert data["gap_alpha"] is False


def test_read_only_entry():
    """Test that read-only entries cannot be edited."""
    data = CalibrationEntry.from_result(_result(), [GAUSSIAN], seed=0).to_dict()
    data["created_at"] = datetime.fromisoformat(data["created_at"])
    entry = ReadOnlyCalibrationEntry(**data)

    with pytest.raises(FrozenInstanceError):
        entry.a = 1.0
    assert entry.thresholds == SprtThresholds(3.9, 4.1)
