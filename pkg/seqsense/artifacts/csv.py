"""Handler for result tables."""

import csv
import math
from datetime import datetime
from typing import Any, ClassVar, Dict, List, Optional, Sequence

from attrs import define, field
from slugify import slugify

from seqsense.artifacts.base import Artifact


def format_value(value: Any) -> str:
    """Render a cell; floats use the shortest repr that round-trips."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(float(value))
    if value is None:
        return ""
    return str(value)


@define(auto_attribs=True)
class CSVArtifact(Artifact):
    """Comma-separated table with a fixed column order.

    ``value`` is a sequence of row mappings; ``columns`` fixes the header.

    .. important::

        This class is not meant to be initialized directly. Please use the ``construct``
        method.
    """

    alias: ClassVar[str] = "csv"
    suffix: ClassVar[str] = "csv"
    binary: ClassVar[bool] = False
    columns: List[str] = field(factory=list)

    @classmethod
    def construct(
        cls,
        name: str,
        value: Optional[Any] = None,
        fname: Optional[str] = None,
        created_at: Optional[datetime] = None,
        writer_kwargs: Optional[Dict] = None,
        columns: Optional[Sequence[str]] = None,
        **kwargs,
    ):
        """Construct the handler class.

        Parameters
        ----------
        columns : sequence of str, optional
            The header. Taken from the first row when omitted.

        See :py:meth:`Artifact.construct` for the other parameters.
        """
        if columns is None:
            columns = list(value[0]) if value else []
        return cls(
            name=name,
            value=value,
            writer_kwargs={"columns": list(columns), **(writer_kwargs or {})},
            fname=fname or f"{slugify(name, separator='_')}.{cls.suffix}",
            created_at=created_at or datetime.now(),
            columns=list(columns),
        )

    @classmethod
    def write(cls, obj, buf, columns: Sequence[str] = (), **kwargs):
        """Write rows under ``columns``; a missing cell raises ``KeyError``."""
        writer = csv.writer(buf, lineterminator="\n", **kwargs)
        writer.writerow(columns)
        for row in obj:
            writer.writerow([format_value(row[col]) for col in columns])
