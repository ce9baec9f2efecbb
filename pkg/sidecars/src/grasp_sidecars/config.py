"""Sidecar runtime configuration."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class SidecarConfig:
    """How one sidecar serves: where to listen, which model, which device.

    ``model`` is a registry name (e.g. "color-lut", "masked-depth") or a
    dotted factory path "package.module:factory"; ``options`` is passed to
    the factory untouched.  ``clamp_confidence`` forces confidences into
    [0, 1] before they reach the wire.
    """

    host: str = "127.0.0.1"
    port: int = 8090
    model: str = ""
    device: str = "cpu"
    clamp_confidence: bool = True
    options: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.host:
            raise ValueError("host must be non-empty")
        if not (0 <= self.port <= 65535):
            raise ValueError(f"port {self.port} out of range")
        if not self.model:
            raise ValueError("model identifier must be set")
