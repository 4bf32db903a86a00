"""Handler for JSON documents."""

from datetime import datetime
from json import dump
from typing import Any, ClassVar, Dict, Optional

from attrs import define
from slugify import slugify

from seqsense.artifacts.base import Artifact


@define(auto_attribs=True)
class JSONArtifact(Artifact):
    """JSON document, written with sorted keys so reruns are byte-identical.

    .. important::

        This class is not meant to be initialized directly. Please use the ``construct``
        method.
    """

    alias: ClassVar[str] = "json"
    suffix: ClassVar[str] = "json"
    binary: ClassVar[bool] = False

    @classmethod
    def construct(
        cls,
        name: str,
        value: Optional[Any] = None,
        fname: Optional[str] = None,
        created_at: Optional[datetime] = None,
        writer_kwargs: Optional[Dict] = None,
        **kwargs,
    ):
        """Construct the handler class; see :py:meth:`Artifact.construct`."""
        return cls(
            name=name,
            value=value,
            writer_kwargs={"sort_keys": True, "indent": 4, **(writer_kwargs or {})},
            fname=fname or f"{slugify(name, separator='_')}.{cls.suffix}",
            created_at=created_at or datetime.now(),
        )

    @classmethod
    def write(cls, obj, buf, **kwargs):
        """Write ``obj`` with :py:func:`json.dump`."""
        dump(obj, buf, **kwargs)
