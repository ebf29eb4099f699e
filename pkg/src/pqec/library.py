"""Indexed families of implementable logical channels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channels import Channel, ChannelError, affine_dimension, choi_coordinates


@dataclass(frozen=True, eq=False)
class LogicalChannelLibrary:
    """Channels ``G_k`` with their Choi coordinates stored column-wise.

    ``coords[:, k]`` is ``choi_coordinates(channels[k]).vector``.
    """

    channels: tuple[Channel, ...]
    labels: tuple[str, ...]
    source: Mapping = field(default_factory=dict)
    coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        channels = tuple(self.channels)
        labels = tuple(self.labels)
        if not channels:
            raise ChannelError("library must contain at least one channel")
        if len(labels) != len(channels):
            raise ChannelError("one label per channel required")
        dims = {(c.dim_in, c.dim_out) for c in channels}
        if len(dims) != 1:
            raise ChannelError("library channels must share dimensions")
        for lab, ch in zip(labels, channels):
            ch.require_cptp(f"library channel {lab!r}")
        coords = np.column_stack([choi_coordinates(c).vector for c in channels])
        coords.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "source", dict(self.source))
        object.__setattr__(self, "coords", coords)

    def __len__(self) -> int:
        return len(self.channels)

    def __getitem__(self, k: int) -> Channel:
        return self.channels[k]

    @property
    def dim(self) -> int:
        return self.channels[0].dim_in

    @property
    def affine_dim(self) -> int:
        return affine_dimension(self.dim)

    def then(self, second: Channel | None = None, first: Channel | None = None,
             suffix: str = "") -> "LogicalChannelLibrary":
        """Library of ``second ∘ G_k ∘ first`` for every element."""
        from .channels import compose

        out = []
        for ch in self.channels:
            if first is not None:
                ch = compose(ch, first)
            if second is not None:
                ch = compose(second, ch)
            out.append(ch)
        return LogicalChannelLibrary(tuple(out), tuple(lab + suffix for lab in self.labels),
                                     self.source)

    @classmethod
    def concat(cls, libs: Sequence["LogicalChannelLibrary"]) -> "LogicalChannelLibrary":
        return cls(tuple(c for lib in libs for c in lib.channels),
                   tuple(lab for lib in libs for lab in lib.labels),
                   {"concat": [lib.source for lib in libs]})
