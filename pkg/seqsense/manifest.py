"""The calibration manifest."""

from __future__ import annotations

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Union
from urllib.parse import urlparse

import fsspec

from seqsense.entry import CalibrationEntry, ReadOnlyCalibrationEntry

LOG = logging.getLogger(__name__)


class Manifest:
    """Calibrated configuration points stored as a JSON list.

    Parameters
    ----------
    fpath : str, optional (default "manifest.json")
        The location of the manifest file. If it does not exist yet, ``save``
        creates it.
    mode : {"r", "w", "w+"}, optional (default "w")
        The mode for opening the manifest.

        * ``r``: Existing entries are loaded as
          :py:class:`seqsense.entry.ReadOnlyCalibrationEntry` and nothing can be added.
        * ``w``: No existing entries are loaded.
        * ``w+``: Existing entries are loaded in editable mode.
    **storage_options
        Passed to ``fsspec.filesystem``.

    Attributes
    ----------
    entries : list
        The calibrated points, in insertion order.
    """

    def __init__(
        self,
        fpath: Union[str, Path] = "manifest.json",
        mode: Literal["r", "w", "w+"] = "w",
        **storage_options,
    ):
        """Init method."""
        if isinstance(fpath, str):
            parsed = urlparse(fpath)
            self.fpath = Path(parsed.netloc + parsed.path)
            self.protocol = parsed.scheme or "file"
        else:
            self.fpath = fpath
            self.protocol = "file"
        self.storage_options = storage_options
        self.fs = fsspec.filesystem(self.protocol, **storage_options)

        if mode not in ("r", "w", "w+"):
            raise ValueError("Please provide a valid ``mode`` value.")
        self.mode = mode
        self.entries: List[Union[CalibrationEntry, ReadOnlyCalibrationEntry]] = []
        if mode in ("r", "w+") and self.fs.isfile(self.fpath):
            self.load()

    @property
    def exists(self) -> bool:
        """Whether the manifest file exists."""
        return bool(self.fs.isfile(self.fpath))

    def load(self):
        """Load the existing entries, read-only in ``r`` mode."""
        with self.fs.open(self.fpath, "r") as infile:
            data = json.load(infile)
        cls = ReadOnlyCalibrationEntry if self.mode == "r" else CalibrationEntry
        self.entries = []
        for item in data:
            item["created_at"] = datetime.fromisoformat(item["created_at"])
            self.entries.append(cls(**item))
        LOG.debug(f"Loaded {len(self.entries)} entries from {self.fpath}")

    def save(self):
        """Write the manifest."""
        if self.mode == "r":
            raise RuntimeError("Manifest is in read-only mode.")
        parent = str(self.fpath.parent)
        if parent not in ("", "."):
            self.fs.makedirs(parent, exist_ok=True)
        with self.fs.open(self.fpath, "w") as outfile:
            json.dump(list(self), outfile, sort_keys=True, indent=4)
        LOG.info(f"Saved {len(self.entries)} calibration entries to {self.fpath}")

    def append(self, entry: CalibrationEntry):
        """Add an entry, replacing any entry with the same slug.

        Raises
        ------
        RuntimeError
            Raised when the manifest is in read-only mode.
        """
        if self.mode == "r":
            raise RuntimeError("Manifest is in read-only mode.")
        for idx, existing in enumerate(self.entries):
            if existing.slug == entry.slug:
                LOG.debug(f"Replacing manifest entry {entry.slug}")
                self.entries[idx] = entry
                break
        else:
            self.entries.append(entry)

    def __contains__(self, item: str) -> bool:
        """Check if the manifest has an entry with the given slug."""
        return any(entry.slug == item for entry in self.entries)

    def __getitem__(self, arg: str) -> CalibrationEntry:
        """Retrieve an entry by slug.

        Raises
        ------
        KeyError
            Raised if the slug does not exist.
        """
        for entry in self.entries:
            if entry.slug == arg:
                return entry
        raise KeyError(f"No calibration entry with slug {arg}")

    def __len__(self) -> int:
        """Number of entries."""
        return len(self.entries)

    def __iter__(self) -> Iterator[Dict]:
        """Iterate through the entries as dictionaries."""
        for entry in self.entries:
            yield entry.to_dict()
