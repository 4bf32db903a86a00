"""Base class for output handlers."""

from abc import ABCMeta, abstractmethod
from datetime import datetime
from typing import Any, ClassVar, Dict, Optional

from attrs import define, field


@define
class Artifact(metaclass=ABCMeta):
    """An output table or document and the way it is written.

    Handlers are not meant to be initialized directly; use ``construct``.

    Parameters
    ----------
    name : str
        The name of the output, e.g. the experiment family.
    fname : str
        The file name.
    value : Any
        The content.
    writer_kwargs : Dict
        Keyword arguments for ``write``.
    created_at : datetime
        When the artifact was produced.

    Attributes
    ----------
    alias : str
        The name the handler is registered under.
    suffix : str
        The standard file suffix.
    binary : bool
        Whether the file is opened in binary mode.
    """

    alias: ClassVar[str]
    suffix: ClassVar[str]
    binary: ClassVar[bool]
    name: str = field(eq=False)
    fname: str = field(eq=False)
    value: Any = field(eq=False)
    writer_kwargs: Dict = field(eq=False)
    created_at: datetime = field(eq=False)

    @classmethod
    @abstractmethod
    def construct(
        cls,
        name: str,
        value: Optional[Any] = None,
        fname: Optional[str] = None,
        created_at: Optional[datetime] = None,
        writer_kwargs: Optional[Dict] = None,
        **kwargs,
    ):
        """Construct the handler.

        Parameters
        ----------
        name : str
            The name of the artifact.
        value : object, optional (default None)
            The content.
        fname : str, optional (default None)
            The file name. Derived from ``name`` and ``suffix`` when omitted.
        created_at : datetime, optional (default None)
            Defaults to :py:meth:`datetime.now`.
        writer_kwargs : Dict, optional (default None)
            Keyword arguments for ``write``.
        **kwargs : Dict
            Handler-specific attributes.
        """

    @classmethod
    @abstractmethod
    def write(cls, obj, buf, **kwargs):
        """Write ``obj`` to a ``fsspec`` buffer."""

    def save(self, fs, directory) -> str:
        """Write the artifact into ``directory`` on the filesystem ``fs``.

        Returns
        -------
        str
            The path written.
        """
        fs.makedirs(str(directory), exist_ok=True)
        fpath = f"{directory}/{self.fname}"
        with fs.open(fpath, "wb" if self.binary else "w") as buf:
            self.write(self.value, buf, **self.writer_kwargs)
        return fpath
