"""Steady-state electrical model of a two-converter DC bus.

Two droop-controlled voltage source converters (a transmitter ``a`` and a
receiver ``b``) feed a common bus loaded by a resistance ``r``.  Everything
beyond the transmitter's terminals reduces to a Thevenin equivalent, which
plays the role of the communication channel state.  All functions accept a
scalar or a numpy array for the load ``r`` and broadcast elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _require_positive(**values) -> None:
    for name, value in values.items():
        if not np.all(np.asarray(value) > 0):
            raise ValueError(f"{name} must be positive, got {value!r}")


def _scalar_like(value, *refs):
    """Return a Python float when every reference input was scalar."""
    if all(np.ndim(ref) == 0 for ref in refs):
        return float(value)
    return value


@dataclass(frozen=True)
class VscParams:
    """Droop setpoint of one converter; doubles as a transmit symbol."""

    v: float    # reference voltage [V]
    r_d: float  # virtual (droop) resistance [ohm]

    def __post_init__(self) -> None:
        _require_positive(v=self.v, r_d=self.r_d)


@dataclass(frozen=True)
class TheveninState:
    """Channel state: the one-port equivalent seen from the transmitter."""

    v_eq: float  # equivalent source voltage [V]
    r_eq: float  # equivalent series resistance [ohm]

    def __post_init__(self) -> None:
        _require_positive(v_eq=self.v_eq, r_eq=self.r_eq)


def bus_voltage(tx: VscParams, rx: VscParams, r):
    """Bus voltage v* of the full two-converter circuit at load r.

    v* = (v_a/r_da + v_b/r_db) / (1/r_da + 1/r_db + 1/r)
    """
    r = np.asarray(r, dtype=float)
    _require_positive(r=r)
    num = tx.v / tx.r_d + rx.v / rx.r_d
    den = 1.0 / tx.r_d + 1.0 / rx.r_d + 1.0 / r
    return _scalar_like(num / den, r)


def thevenin(rx: VscParams, r):
    """Reduce receiver and load to the equivalent (v_eq, r_eq) pair.

    v_eq = v_b r / (r + r_db),  r_eq = r r_db / (r + r_db).
    Array input for r yields a TheveninState holding arrays.
    """
    r = np.asarray(r, dtype=float)
    _require_positive(r=r)
    v_eq = rx.v * r / (r + rx.r_d)
    r_eq = r * rx.r_d / (r + rx.r_d)
    return TheveninState(_scalar_like(v_eq, r), _scalar_like(r_eq, r))


def thevenin_open_load(rx: VscParams) -> TheveninState:
    """Infinite-load limit of thevenin: v_eq = v_b, r_eq = r_db."""
    return TheveninState(rx.v, rx.r_d)


def bus_voltage_thevenin(tx: VscParams, state: TheveninState):
    """Bus voltage from the reduced circuit, the channel's output map.

    v* = (v_a/r_da + v_eq/r_eq) / (1/r_da + 1/r_eq)
    """
    num = tx.v / tx.r_d + np.asarray(state.v_eq) / state.r_eq
    den = 1.0 / tx.r_d + 1.0 / np.asarray(state.r_eq)
    return _scalar_like(num / den, state.v_eq, state.r_eq)


def bus_voltage_open_load(tx: VscParams, rx: VscParams):
    """Infinite-load limit of bus_voltage (load branch removed)."""
    num = tx.v / tx.r_d + rx.v / rx.r_d
    den = 1.0 / tx.r_d + 1.0 / rx.r_d
    return num / den


def output_current(tx: VscParams, v_star):
    """Transmitter output current under droop: i_a = (v_a - v*)/r_da."""
    return _scalar_like((tx.v - np.asarray(v_star)) / tx.r_d, v_star)


def output_power(tx: VscParams, rx: VscParams, r):
    """Power delivered to the load: P = v*(r)^2 / r."""
    r = np.asarray(r, dtype=float)
    v = bus_voltage(tx, rx, r)
    return _scalar_like(np.asarray(v) ** 2 / r, r)
