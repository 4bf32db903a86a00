"""Output handlers, looked up by alias."""

from typing import List, Type

try:
    from importlib_metadata import entry_points
except ImportError:
    from importlib.metadata import entry_points  # type: ignore

from seqsense.artifacts.base import Artifact
from seqsense.artifacts.csv import CSVArtifact
from seqsense.artifacts.json import JSONArtifact

__all__: List[str] = ["Artifact", "CSVArtifact", "JSONArtifact", "get_handler"]

ENTRY_POINT_GROUP: str = "seqsense.artifact_type"


def get_handler(alias: str) -> Type[Artifact]:
    """Retrieve the handler class registered under ``alias``.

    Handlers registered in the ``seqsense.artifact_type`` entry-point group
    take precedence over the subclasses of :py:class:`Artifact` defined in
    the running interpreter.

    Parameters
    ----------
    alias : str
        The alias for the handler.

    Returns
    -------
    Artifact
        The handler class. Build instances with ``construct``.
    """
    for candidate in entry_points(group=ENTRY_POINT_GROUP):
        if candidate.name != alias:
            continue
        try:
            handler = candidate.load()
        except ImportError as imp:
            raise RuntimeError(f"Unable to import handler for {alias} through entry points") from imp
        if not isinstance(handler, type):
            raise TypeError(f"{candidate} is not a class")
        return handler

    for obj in Artifact.__subclasses__():
        if obj.alias == alias:
            return obj

    raise ValueError(f"No handler available with the name {alias} in `{ENTRY_POINT_GROUP}`.")
