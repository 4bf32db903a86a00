"""Test the calibration manifest."""

import json

import pytest

from seqsense.detectors import GaussianDetectorParams
from seqsense.entry import CalibrationEntry, ReadOnlyCalibrationEntry
from seqsense.manifest import Manifest

GAUSSIAN = GaussianDetectorParams(rho2=1.0, sigma_w2=1.0)


def _entry(slug="point", a=3.0):
    return CalibrationEntry(
        slug=slug,
        scheme="centralized",
        bits=None,
        period=4,
        k_users=1,
        models=[GAUSSIAN.to_dict()],
        a=a,
        b=3.0,
        delta=None,
        phi=None,
        kl_h0=0.19,
        kl_h1=0.31,
        model_phi=8.0,
        achieved_alpha=0.01,
        se_alpha=0.001,
        achieved_beta=0.01,
        se_beta=0.001,
        rate_h0=1.0,
        rate_h1=1.0,
        delay_h0=12.0,
        delay_h1=9.0,
        target_alpha=0.01,
        target_beta=0.01,
    )


def test_manifest_save_load(tmp_path):
    """Test writing a manifest and reading it back."""
    fpath = tmp_path / "manifest.json"
    manifest = Manifest(fpath, mode="w")
    manifest.append(_entry("first"))
    manifest.append(_entry("second", a=4.0))
    manifest.save()

    with open(fpath) as infile:
        data = json.load(infile)
    assert [item["slug"] for item in data] == ["first", "second"]

    loaded = Manifest(fpath, mode="w+")
    assert len(loaded) == 2
    assert loaded["second"].a == 4.0
    assert isinstance(loaded["first"], CalibrationEntry)
    assert loaded["first"].created_at == manifest["first"].created_at.replace(microsecond=0)


def test_manifest_nan_targets(tmp_path):
    """Test that delay-matched entries keep their ``nan`` targets."""
    fpath = tmp_path / "manifest.json"
    entry = _entry()
    entry.target_alpha = float("nan")
    entry.target_delays = [12.0, 9.0]
    manifest = Manifest(fpath)
    manifest.append(entry)
    manifest.save()

    loaded = Manifest(fpath, mode="r")["point"]
    assert loaded.target_alpha != loaded.target_alpha
    assert loaded.target_delays == [12.0, 9.0]


def test_manifest_append_replaces(tmp_path):
    """Test that an entry with the same slug replaces the old one."""
    manifest = Manifest(tmp_path / "manifest.json")
    manifest.append(_entry(a=3.0))
    manifest.append(_entry(a=5.0))

    assert len(manifest) == 1
    assert manifest["point"].a == 5.0


def test_manifest_read_only(tmp_path):
    """Test that read-only manifests load frozen entries and refuse writes."""
    fpath = tmp_path / "manifest.json"
    manifest = Manifest(fpath)
    manifest.append(_entry())
    manifest.save()

    read_only = Manifest(fpath, mode="r")
    assert isinstance(read_only["point"], ReadOnlyCalibrationEntry)
    with pytest.raises(RuntimeError):
        read_only.append(_entry("other"))
    with pytest.raises(RuntimeError):
        read_only.save()


def test_manifest_write_mode_ignores_existing(tmp_path):
    """Test that write mode starts from an empty manifest."""
    fpath = tmp_path / "manifest.json"
    manifest = Manifest(fpath)
    manifest.append(_entry())
    manifest.save()

    assert Manifest(fpath).exists
    assert len(Manifest(fpath, mode="w")) == 0
    assert not Manifest(tmp_path / "missing.json", mode="r").exists


def test_manifest_lookup(tmp_path):
    """Test membership and lookup."""
    manifest = Manifest(tmp_path / "manifest.json")
    manifest.append(_entry("first", a=3.0))
    manifest.append(_entry("second", a=4.0))

    assert "first" in manifest
    assert "third" not in manifest
    with pytest.raises(KeyError):
        manifest["third"]
    assert [item["slug"] for item in manifest] == ["first", "second"]


@pytest.mark.parametrize("mode", ["x", "a"])
def test_manifest_invalid_mode(tmp_path, mode):
    """Test rejecting an unknown mode."""
    with pytest.raises(ValueError):
        Manifest(tmp_path / "manifest.json", mode=mode)


def test_manifest_has_no_filter():
    """Test that entries are looked up by slug or iterated, not filtered."""
    assert not hasattr(Manifest, "filter")

