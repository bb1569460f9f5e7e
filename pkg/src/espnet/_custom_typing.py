from ipaddress import IPv4Address
from typing import TypeAlias

Address: TypeAlias = IPv4Address | str | int
NodeId: TypeAlias = str
PortId: TypeAlias = int
Spi: TypeAlias = int
