"""Node state machines: Host, DHCP server, Central Server and Attacker."""

from .attacker import (
    Attacker,
    AttackerStrategy,
    DosFloodCentral,
    DosVictim,
    RaceOldMac,
    SpoofMapping,
)
from .base import Event, Mode, ProtocolError, Station
from .central import CentralConfig, CentralServer, IpMacTable, PendingCheck, TableChange
from .dhcp import DhcpConfig, DhcpServer
from .host import CacheChange, Host, HostConfig, PendingChange

__all__ = [
    "Attacker",
    "AttackerStrategy",
    "CacheChange",
    "CentralConfig",
    "CentralServer",
    "DhcpConfig",
    "DhcpServer",
    "DosFloodCentral",
    "DosVictim",
    "Event",
    "Host",
    "HostConfig",
    "IpMacTable",
    "Mode",
    "PendingChange",
    "PendingCheck",
    "ProtocolError",
    "RaceOldMac",
    "SpoofMapping",
    "Station",
    "TableChange",
]
