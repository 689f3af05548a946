"""Desk-scale SDN controller for timed bandwidth services and L2 circuits."""

from .cluster import Cluster
from .controller import Controller
from .dataplane import Dataplane
from .fabric import Fabric
from .node import NodeConfig, NsiSetup, ServiceNode
from .reservations import FOREVER, CalendarBook, ReservationCalendar
from .scheduler import BodRequest, BodScheduler
from .sdxl2 import Sdxl2App
from .topology import load_topology, load_topology_file

__version__ = "0.1.0"

__all__ = [
    "BodRequest",
    "BodScheduler",
    "CalendarBook",
    "Cluster",
    "Controller",
    "Dataplane",
    "FOREVER",
    "Fabric",
    "NodeConfig",
    "NsiSetup",
    "ReservationCalendar",
    "Sdxl2App",
    "ServiceNode",
    "load_topology",
    "load_topology_file",
]
