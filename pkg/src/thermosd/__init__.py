"""Convective accelerometer with a first-order electro-thermal sigma-delta modulator."""

from ._backend import BACKEND
from .modulator import BitStream, ModulatorConfig, simulate, simulate_ideal
from .physics import BridgeParameters, GasProperties, OperatingPoint, SensorParameters, operating_point

__all__ = [
    "BACKEND",
    "BitStream",
    "BridgeParameters",
    "GasProperties",
    "ModulatorConfig",
    "OperatingPoint",
    "SensorParameters",
    "operating_point",
    "simulate",
    "simulate_ideal",
]
