"""Security-block licensing protocol, chip model and attack simulator."""

from .block_model import (BlockConfig, LicenseRejected, SecurityBlockState, apply_license, execute_gated,
                          issue_challenge, power_on)
from .kernels import BACKEND
from .types import BlockId, BlockKind, License, Nonce

__version__ = "0.1.0"

__all__ = ["BACKEND", "BlockConfig", "BlockId", "BlockKind", "License", "LicenseRejected", "Nonce",
           "SecurityBlockState", "apply_license", "execute_gated", "issue_challenge", "power_on", "__version__"]
